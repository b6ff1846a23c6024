use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{training_active, CorruptionKind, CorruptionSpec};
use crate::envs::{ModalityInfo, ModalityLayout};
use crate::error::{ensure_len, Error, Result};

/// Everything a corruption needs besides the frame itself.
#[derive(Debug, Clone)]
pub struct CorruptionContext {
    /// Per-frame layout and value range of each modality.
    pub modalities: Vec<ModalityInfo>,
    /// In-distribution frames per modality, used by Hallucination.
    pub bank: Vec<Vec<Vec<f64>>>,
}

impl CorruptionContext {
    pub fn new(modalities: Vec<ModalityInfo>) -> Self {
        let n = modalities.len();
        CorruptionContext {
            modalities,
            bank: vec![Vec::new(); n],
        }
    }

    pub fn with_bank(mut self, bank: Vec<Vec<Vec<f64>>>) -> Self {
        self.bank = bank;
        self
    }

    /// Default Gaussian σ: 0.5 for images, a tenth of the half-range otherwise.
    pub fn default_sigma(&self, modality: usize) -> f64 {
        let info = &self.modalities[modality];
        if info.is_image() {
            0.5
        } else {
            0.1 * (info.range.1 - info.range.0) / 2.0
        }
    }
}

/// Integer rectangle `(rows, cols)` whose area is closest to `fraction` of a
/// `width × height` image, with aspect ratio at most 2. Ties prefer the more
/// square shape.
pub fn patch_rectangle(width: usize, height: usize, fraction: f64) -> (usize, usize) {
    let target = fraction * (width * height) as f64;
    let mut best = (0, 0);
    let mut best_key = (f64::INFINITY, usize::MAX);
    for rows in 1..=height {
        for cols in rows..=width.max(rows) {
            if cols > width || rows > height || cols > 2 * rows {
                continue;
            }
            let key = (((rows * cols) as f64 - target).abs(), cols - rows);
            if key.0 < best_key.0 - 1e-12 || ((key.0 - best_key.0).abs() <= 1e-12 && key.1 < best_key.1) {
                best = (rows, cols);
                best_key = key;
            }
        }
    }
    best
}

/// Moves block `perm[j]` of the input into block position `j` of the output.
pub fn puzzle_permute(img: &[f64], width: usize, height: usize, grid: usize, perm: &[usize]) -> Vec<f64> {
    let bw = width / grid;
    let bh = height / grid;
    let mut out = img.to_vec();
    for (dst, &src) in perm.iter().enumerate() {
        let (dx, dy) = ((dst % grid) * bw, (dst / grid) * bh);
        let (sx, sy) = ((src % grid) * bw, (src / grid) * bh);
        for r in 0..bh {
            let d = (dy + r) * width + dx;
            let s = (sy + r) * width + sx;
            out[d..d + bw].copy_from_slice(&img[s..s + bw]);
        }
    }
    out
}

pub fn puzzle_inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

/// Fixed background pattern: uniform values in `[0, 1)` from `seed`.
pub fn texture_pattern(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>()).collect()
}

fn image_dims(info: &ModalityInfo, kind: CorruptionKind) -> Result<(usize, usize)> {
    match info.layout {
        ModalityLayout::Image { width, height } => Ok((width, height)),
        ModalityLayout::Vector => Err(Error::Config(format!(
            "{kind} corruption needs an image modality, but {:?} is a vector",
            info.name
        ))),
    }
}

/// Corrupts one frame of modality `modality` according to `spec.kind`.
pub fn apply_corruption<R: Rng + ?Sized>(
    frame: &[f64],
    modality: usize,
    spec: &CorruptionSpec,
    ctx: &CorruptionContext,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if training_active() {
        return Err(Error::Usage(
            "observation corruption invoked while training is active".into(),
        ));
    }
    let info = ctx.modalities.get(modality).ok_or_else(|| {
        Error::Config(format!("no modality {modality} in corruption context"))
    })?;
    ensure_len(&format!("{} frame", info.name), info.frame_len, frame.len())?;
    let p = &spec.params;
    let out = match spec.kind {
        CorruptionKind::Gaussian => {
            let sigma = p
                .gaussian_sigma
                .as_ref()
                .and_then(|s| s.get(modality).copied())
                .unwrap_or_else(|| ctx.default_sigma(modality));
            if sigma == 0.0 {
                frame.to_vec()
            } else {
                frame
                    .iter()
                    .map(|&x| x + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        }
        CorruptionKind::SaltPepper => {
            let (lo, hi) = info.range;
            frame
                .iter()
                .map(|&x| {
                    if rng.random::<f64>() < p.salt_pepper_fraction {
                        if rng.random::<bool>() {
                            hi
                        } else {
                            lo
                        }
                    } else {
                        x
                    }
                })
                .collect()
        }
        CorruptionKind::Patches => {
            let (w, h) = image_dims(info, spec.kind)?;
            let (rows, cols) = patch_rectangle(w, h, p.patch_fraction);
            let mut out = frame.to_vec();
            if rows > 0 {
                let y0 = rng.random_range(0..=h - rows);
                let x0 = rng.random_range(0..=w - cols);
                for y in y0..y0 + rows {
                    out[y * w + x0..y * w + x0 + cols].iter_mut().for_each(|v| *v = 0.0);
                }
            }
            out
        }
        CorruptionKind::Puzzle => {
            let (w, h) = image_dims(info, spec.kind)?;
            let g = p.puzzle_grid;
            if w % g != 0 || h % g != 0 {
                return Err(Error::Config(format!(
                    "{w}×{h} image does not split into a {g}×{g} puzzle"
                )));
            }
            let identity: Vec<usize> = (0..g * g).collect();
            let mut perm = identity.clone();
            while perm == identity {
                perm.shuffle(rng);
            }
            puzzle_permute(frame, w, h, g, &perm)
        }
        CorruptionKind::Texture => {
            image_dims(info, spec.kind)?;
            let pattern = texture_pattern(frame.len(), p.texture_seed);
            frame
                .iter()
                .zip(&pattern)
                .map(|(&x, &t)| if x == 0.0 { t } else { x })
                .collect()
        }
        CorruptionKind::Failure => vec![0.0; frame.len()],
        CorruptionKind::Hallucination => {
            let bank = ctx.bank.get(modality).filter(|b| !b.is_empty()).ok_or_else(|| {
                Error::Config(format!(
                    "hallucination needs a non-empty observation bank for {:?}",
                    info.name
                ))
            })?;
            let pick = &bank[rng.random_range(0..bank.len())];
            ensure_len("hallucination bank frame", frame.len(), pick.len())?;
            pick.clone()
        }
    };
    Ok(out)
}
