//! Row-major dense matrix used for batched network evaluation.
//!
//! One row per sample. The kernels here loop over the contiguous column
//! dimension innermost so they auto-vectorize, and they skip exact zeros in
//! the left operand, which makes sparse inputs (one-hot grids, rendered line
//! drawings) nearly free.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("matrix data", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// A 1×n matrix holding `v`.
    pub fn row_vector(v: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    /// Stacks equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape("matrix row", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows `self` followed by rows of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape("vstack columns", self.cols, other.cols));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Columns of `self` followed by columns of `other`, row by row.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape("hstack rows", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Copy of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Copy of columns `start..end`.
    pub fn slice_cols(&self, start: usize, end: usize) -> Matrix {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                "matrix add",
                self.rows * self.cols,
                other.rows * other.cols,
            ));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Inputs with fewer non-zeros than this fraction take the sparse path.
const SPARSE_DENSITY: f64 = 0.15;

fn is_sparse(x: &Matrix) -> bool {
    let nz = x.data.iter().filter(|&&v| v != 0.0).count();
    (nz as f64) < SPARSE_DENSITY * x.data.len() as f64
}

/// `c = beta·c + a·b` for row-major operands given as (pointer, row stride, column stride).
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: (&[f64], isize, isize), b: (&[f64], isize, isize), beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: strides describe in-bounds views of the given slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[b, :] = bias + Σ_k x[b, k] · w[k, :]` with `w` stored `(in, out)` row-major.
pub(crate) fn affine_forward(x: &Matrix, w: &[f64], bias: &[f64], out: &mut Matrix) {
    let n_in = x.cols();
    let n_out = bias.len();
    assert_eq!(w.len(), n_in * n_out);
    assert_eq!((out.rows(), out.cols()), (x.rows(), n_out));
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(bias);
    }
    if !is_sparse(x) {
        let (m, k) = (x.rows(), n_in);
        gemm(m, k, n_out, (&x.data, k as isize, 1), (w, n_out as isize, 1), 1.0, &mut out.data);
        return;
    }
    for r in 0..x.rows() {
        let xr = x.row(r);
        let yr = out.row_mut(r);
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wk = &w[k * n_out..(k + 1) * n_out];
            for (y, &wv) in yr.iter_mut().zip(wk) {
                *y += xv * wv;
            }
        }
    }
}

/// Accumulates `dw += xᵀ g` and `db += Σ_b g[b, :]`.
pub(crate) fn affine_param_grads(x: &Matrix, g: &Matrix, dw: &mut [f64], db: &mut [f64]) {
    let n_out = g.cols();
    let n_in = x.cols();
    assert_eq!(dw.len(), n_in * n_out);
    assert_eq!(x.rows(), g.rows());
    for r in 0..g.rows() {
        for (d, &gv) in db.iter_mut().zip(g.row(r)) {
            *d += gv;
        }
    }
    if !is_sparse(x) {
        let b = x.rows();
        gemm(n_in, b, n_out, (&x.data, 1, n_in as isize), (&g.data, n_out as isize, 1), 1.0, dw);
        return;
    }
    for r in 0..x.rows() {
        let gr = g.row(r);
        for (k, &xv) in x.row(r).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let dwk = &mut dw[k * n_out..(k + 1) * n_out];
            for (d, &gv) in dwk.iter_mut().zip(gr) {
                *d += xv * gv;
            }
        }
    }
}

/// `dx[b, k] = Σ_j g[b, j] · w[k, j]`.
pub(crate) fn affine_input_grad(g: &Matrix, w: &[f64], n_in: usize) -> Matrix {
    let n_out = g.cols();
    assert_eq!(w.len(), n_in * n_out);
    let mut dx = Matrix::zeros(g.rows(), n_in);
    gemm(g.rows(), n_out, n_in, (&g.data, n_out as isize, 1), (w, 1, n_out as isize), 0.0, &mut dx.data);
    dx
}
