//! Binary parameter snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes   "MLP1"
//! n_sizes      u32       number of layer sizes (input, hidden..., output)
//! sizes        u32 × n_sizes
//! activations  u8 × (n_sizes - 2)   0 = ReLU, 1 = Tanh, 2 = Identity
//! n_params     u64
//! params       f64 × n_params       flat layout of `Mlp::params`
//! ```
//!
//! Within the flat parameter block each layer stores its weight matrix
//! `(in, out)` row-major followed by its `out` biases.

use std::io::{Read, Write};

use super::mlp::{Activation, Mlp, MlpSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MLP1";

pub fn write_snapshot<W: Write>(mlp: &Mlp, w: &mut W) -> Result<()> {
    let spec = mlp.spec();
    w.write_all(MAGIC)?;
    w.write_all(&(spec.layer_sizes.len() as u32).to_le_bytes())?;
    for &s in &spec.layer_sizes {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for a in &spec.hidden_activations {
        w.write_all(&[a.code()])?;
    }
    w.write_all(&(mlp.param_count() as u64).to_le_bytes())?;
    for p in mlp.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Mlp> {
    let magic: [u8; 4] = read_array(r)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad MLP snapshot magic {magic:?}")));
    }
    let n_sizes = u32::from_le_bytes(read_array(r)?) as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::Format(format!("implausible layer count {n_sizes}")));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(u32::from_le_bytes(read_array(r)?) as usize);
    }
    let mut activations = Vec::with_capacity(n_sizes - 2);
    for _ in 0..n_sizes - 2 {
        let [c] = read_array::<1, _>(r)?;
        activations.push(
            Activation::from_code(c)
                .ok_or_else(|| Error::Format(format!("unknown activation code {c}")))?,
        );
    }
    let spec = MlpSpec {
        layer_sizes: sizes,
        hidden_activations: activations,
    };
    spec.validate()
        .map_err(|e| Error::Format(format!("snapshot spec: {e}")))?;
    let n_params = u64::from_le_bytes(read_array(r)?) as usize;
    if n_params != spec.param_count() {
        return Err(Error::Format(format!(
            "snapshot declares {n_params} parameters, spec needs {}",
            spec.param_count()
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(f64::from_le_bytes(read_array(r)?));
    }
    Mlp::from_params(&spec, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Mlp::init(&MlpSpec::new(&[2, 3, 1], Activation::Tanh), 4).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MLP1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(buf[20], 1); // tanh
        assert_eq!(u64::from_le_bytes(buf[21..29].try_into().unwrap()), 13);
        assert_eq!(buf.len(), 29 + 13 * 8);
        let first = f64::from_le_bytes(buf[29..37].try_into().unwrap());
        assert_eq!(first, m.params()[0]);
    }

    #[test]
    fn truncated_or_corrupt_input_is_rejected() {
        let m = Mlp::init(&MlpSpec::new(&[2, 2], Activation::Relu), 0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&m, &mut buf).unwrap();
        assert!(read_snapshot(&mut &buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(&mut &bad[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn roundtrip(sizes in proptest::collection::vec(1usize..6, 2..5), seed in any::<u64>()) {
            let m = Mlp::init(&MlpSpec::new(&sizes, Activation::Relu), seed).unwrap();
            let mut buf = Vec::new();
            write_snapshot(&m, &mut buf).unwrap();
            let back = read_snapshot(&mut &buf[..]).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
