use std::collections::VecDeque;

use crate::error::{ensure_len, Error, Result};

/// How a modality's per-frame vector is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalityLayout {
    /// Row-major grayscale image.
    Image { width: usize, height: usize },
    Vector,
}

/// Static description of one sensor modality (per frame, before stacking).
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityInfo {
    pub name: String,
    pub frame_len: usize,
    pub layout: ModalityLayout,
    /// Smallest and largest value an entry can take.
    pub range: (f64, f64),
}

impl ModalityInfo {
    pub fn is_image(&self) -> bool {
        matches!(self.layout, ModalityLayout::Image { .. })
    }
}

/// Per-modality vectors for one time step. After frame stacking each vector
/// holds the last `F` frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalObservation {
    pub modalities: Vec<Vec<f64>>,
}

impl MultiModalObservation {
    pub fn new(modalities: Vec<Vec<f64>>) -> Self {
        MultiModalObservation { modalities }
    }

    pub fn num_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn modality(&self, i: usize) -> &[f64] {
        &self.modalities[i]
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.modalities.iter().map(Vec::len).collect()
    }
}

/// Concatenates the last `depth` frames of `history` followed by
/// `new_frame`. With fewer than `depth - 1` past frames the oldest available
/// frame (or `new_frame` itself) is replicated.
pub fn stack_frames(history: &[Vec<f64>], new_frame: &[f64], depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::Config("frame stack depth must be ≥ 1".into()));
    }
    let need = depth - 1;
    let past = &history[history.len().saturating_sub(need)..];
    let pad = need - past.len();
    let first = past.first().map_or(new_frame, Vec::as_slice);
    let mut out = Vec::with_capacity(depth * new_frame.len());
    for _ in 0..pad {
        out.extend_from_slice(first);
    }
    for f in past {
        ensure_len("stacked frame", new_frame.len(), f.len())?;
        out.extend_from_slice(f);
    }
    out.extend_from_slice(new_frame);
    Ok(out)
}

/// Rolling window of the last `depth` multimodal frames.
#[derive(Debug, Clone)]
pub struct FrameStack {
    depth: usize,
    frames: VecDeque<Vec<Vec<f64>>>,
}

impl FrameStack {
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("frame stack depth must be ≥ 1".into()));
        }
        Ok(FrameStack {
            depth,
            frames: VecDeque::with_capacity(depth),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Starts an episode: the first frame is replicated `depth` times.
    pub fn reset(&mut self, first: Vec<Vec<f64>>) -> MultiModalObservation {
        self.frames.clear();
        for _ in 1..self.depth {
            self.frames.push_back(first.clone());
        }
        self.frames.push_back(first);
        self.observation()
    }

    pub fn push(&mut self, frame: Vec<Vec<f64>>) -> MultiModalObservation {
        if self.frames.is_empty() {
            return self.reset(frame);
        }
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        self.observation()
    }

    pub fn observation(&self) -> MultiModalObservation {
        let n = self.frames.back().map_or(0, Vec::len);
        let modalities = (0..n)
            .map(|m| {
                let mut v = Vec::with_capacity(self.depth * self.frames[0][m].len());
                for f in &self.frames {
                    v.extend_from_slice(&f[m]);
                }
                v
            })
            .collect();
        MultiModalObservation { modalities }
    }
}
