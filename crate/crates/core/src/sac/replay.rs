//! Ring-buffer replay of raw multimodal transitions.
//!
//! Observations are stored sparsely (index, value) since rendered frames and
//! one-hot grids are mostly zeros.

use rand::Rng;

use crate::diffcore::Matrix;
use crate::envs::MultiModalObservation;
use crate::error::{ensure_len, Error, Result};

/// Sparse copy of one multimodal observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactObservation {
    lens: Vec<u32>,
    entries: Vec<Vec<(u32, f64)>>,
}

impl CompactObservation {
    pub fn from_observation(obs: &MultiModalObservation) -> Self {
        let lens = obs.modalities.iter().map(|m| m.len() as u32).collect();
        let entries = obs
            .modalities
            .iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, &v)| (i as u32, v))
                    .collect()
            })
            .collect();
        CompactObservation { lens, entries }
    }

    pub fn to_observation(&self) -> MultiModalObservation {
        MultiModalObservation::new(
            (0..self.lens.len())
                .map(|i| {
                    let mut v = vec![0.0; self.lens[i] as usize];
                    self.write_modality(i, &mut v);
                    v
                })
                .collect(),
        )
    }

    pub fn num_modalities(&self) -> usize {
        self.lens.len()
    }

    /// Scatters modality `i` into a zeroed slice.
    pub fn write_modality(&self, i: usize, out: &mut [f64]) {
        for &(k, v) in &self.entries[i] {
            out[k as usize] = v;
        }
    }

    pub fn stored_values(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub obs: CompactObservation,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: CompactObservation,
    /// Terminal flag; time-limit truncation is not terminal.
    pub done: bool,
}

/// A sampled batch with observations laid out one row per sample.
#[derive(Debug, Clone)]
pub struct ReplayBatch {
    pub obs: Vec<Matrix>,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Matrix>,
    pub dones: Vec<f64>,
}

impl ReplayBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer. Pushing into a full buffer evicts the oldest
/// element.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be ≥ 1".into()));
        }
        Ok(ReplayBuffer {
            items: Vec::new(),
            capacity,
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Stored items from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    /// Uniform indices with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < batch {
            return Err(Error::Usage(format!(
                "cannot sample {batch} from replay holding {}",
                self.items.len()
            )));
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }
}

impl ReplayBuffer<TransitionRecord> {
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<ReplayBatch> {
        let idx = self.sample_indices(batch, rng)?;
        gather(&idx.iter().map(|&i| &self.items[i]).collect::<Vec<_>>())
    }

    /// Same draw as [`ReplayBuffer::sample`] in the stacked layout.
    pub fn sample_pairs<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<PairBatch> {
        let idx = self.sample_indices(batch, rng)?;
        gather_pairs(&idx.iter().map(|&i| &self.items[i]).collect::<Vec<_>>())
    }
}

/// Replay sample with both observations of each transition in one matrix
/// per modality: rows `0..B` hold `o_t`, rows `B..2B` hold `o_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub obs_pairs: Vec<Matrix>,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub dones: Vec<f64>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub fn gather_pairs(records: &[&TransitionRecord]) -> Result<PairBatch> {
    let first = records
        .first()
        .ok_or_else(|| Error::Usage("cannot gather an empty batch".into()))?;
    let b = records.len();
    let n = first.obs.num_modalities();
    let act = first.action.len();
    let mut obs_pairs: Vec<Matrix> = first.obs.lens.iter().map(|&l| Matrix::zeros(2 * b, l as usize)).collect();
    let mut actions = Matrix::zeros(b, act);
    let mut rewards = Vec::with_capacity(b);
    let mut dones = Vec::with_capacity(b);
    for (r, rec) in records.iter().enumerate() {
        ensure_len("record modalities", n, rec.obs.num_modalities())?;
        ensure_len("record action", act, rec.action.len())?;
        for (i, m) in obs_pairs.iter_mut().enumerate() {
            ensure_len("record modality length", m.cols(), rec.obs.lens[i] as usize)?;
            ensure_len("record next modality length", m.cols(), rec.next_obs.lens[i] as usize)?;
            rec.obs.write_modality(i, m.row_mut(r));
            rec.next_obs.write_modality(i, m.row_mut(b + r));
        }
        actions.row_mut(r).copy_from_slice(&rec.action);
        rewards.push(rec.reward);
        dones.push(if rec.done { 1.0 } else { 0.0 });
    }
    Ok(PairBatch {
        obs_pairs,
        actions,
        rewards,
        dones,
    })
}

/// Densifies records into a batch.
pub fn gather(records: &[&TransitionRecord]) -> Result<ReplayBatch> {
    let first = records
        .first()
        .ok_or_else(|| Error::Usage("cannot gather an empty batch".into()))?;
    let b = records.len();
    let n = first.obs.num_modalities();
    let act = first.action.len();
    let mut obs: Vec<Matrix> = first.obs.lens.iter().map(|&l| Matrix::zeros(b, l as usize)).collect();
    let mut next_obs = obs.clone();
    let mut actions = Matrix::zeros(b, act);
    let mut rewards = Vec::with_capacity(b);
    let mut dones = Vec::with_capacity(b);
    for (r, rec) in records.iter().enumerate() {
        ensure_len("record modalities", n, rec.obs.num_modalities())?;
        ensure_len("record action", act, rec.action.len())?;
        for i in 0..n {
            ensure_len("record modality length", obs[i].cols(), rec.obs.lens[i] as usize)?;
            ensure_len("record next modality length", obs[i].cols(), rec.next_obs.lens[i] as usize)?;
            rec.obs.write_modality(i, obs[i].row_mut(r));
            rec.next_obs.write_modality(i, next_obs[i].row_mut(r));
        }
        actions.row_mut(r).copy_from_slice(&rec.action);
        rewards.push(rec.reward);
        dones.push(if rec.done { 1.0 } else { 0.0 });
    }
    Ok(ReplayBatch {
        obs,
        actions,
        rewards,
        next_obs,
        dones,
    })
}
