use rand::Rng;

use super::CorruptionSpec;

/// Result of scheduling one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleStep {
    /// Whether each modality is corrupted on this step.
    pub active: Vec<bool>,
    /// Whether a new corruption was triggered on this step.
    pub triggered: Vec<bool>,
}

/// Sticky per-modality corruption schedule.
///
/// Step 0 (the initial observation) is never corrupted. Afterwards a modality
/// with remaining persistence stays corrupted; otherwise it triggers with
/// probability `p`, after which it stays corrupted for `K - 1` more steps.
#[derive(Debug, Clone)]
pub struct CorruptionScheduler {
    counters: Vec<usize>,
}

impl CorruptionScheduler {
    pub fn new(num_modalities: usize) -> Self {
        CorruptionScheduler {
            counters: vec![0; num_modalities],
        }
    }

    pub fn reset(&mut self) {
        self.counters.iter_mut().for_each(|c| *c = 0);
    }

    pub fn counters(&self) -> &[usize] {
        &self.counters
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        spec: &CorruptionSpec,
        rng: &mut R,
        step_index: usize,
    ) -> ScheduleStep {
        let n = self.counters.len();
        let mut out = ScheduleStep {
            active: vec![false; n],
            triggered: vec![false; n],
        };
        if step_index == 0 {
            return out;
        }
        for &m in &spec.targets {
            if m >= n {
                continue;
            }
            if self.counters[m] > 0 {
                self.counters[m] -= 1;
                out.active[m] = true;
            } else if spec.p > 0.0 && rng.random::<f64>() < spec.p {
                out.active[m] = true;
                out.triggered[m] = true;
                self.counters[m] = spec.persistence - 1;
            }
        }
        out
    }
}
