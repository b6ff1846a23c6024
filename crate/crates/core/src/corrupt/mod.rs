//! Test-time observation corruption with per-step probability and sticky
//! persistence.
//!
//! Corruptions act on a single frame of one modality (the newest sensor
//! reading) before it enters the frame stack. Training code paths must never
//! reach [`apply_corruption`]; see [`TrainingGuard`].

mod apply;
mod guard;
mod schedule;

pub use apply::{
    apply_corruption, patch_rectangle, puzzle_inverse, puzzle_permute, texture_pattern,
    CorruptionContext,
};
pub use guard::{training_active, TrainingGuard};
pub use schedule::{CorruptionScheduler, ScheduleStep};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    Gaussian,
    SaltPepper,
    Patches,
    Puzzle,
    Texture,
    Failure,
    Hallucination,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 7] = [
        CorruptionKind::Gaussian,
        CorruptionKind::SaltPepper,
        CorruptionKind::Patches,
        CorruptionKind::Puzzle,
        CorruptionKind::Texture,
        CorruptionKind::Failure,
        CorruptionKind::Hallucination,
    ];

    /// Kinds that need a 2-D image layout.
    pub fn image_only(self) -> bool {
        matches!(
            self,
            CorruptionKind::Patches | CorruptionKind::Puzzle | CorruptionKind::Texture
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::Gaussian => "gaussian",
            CorruptionKind::SaltPepper => "salt_pepper",
            CorruptionKind::Patches => "patches",
            CorruptionKind::Puzzle => "puzzle",
            CorruptionKind::Texture => "texture",
            CorruptionKind::Failure => "failure",
            CorruptionKind::Hallucination => "hallucination",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "saltpepper" && *k == CorruptionKind::SaltPepper))
            .ok_or_else(|| Error::Config(format!("unknown corruption kind {s:?}")))
    }
}

impl std::fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-kind knobs. `None` means "use the per-modality default".
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionParams {
    /// Gaussian standard deviation, one entry per modality index.
    pub gaussian_sigma: Option<Vec<f64>>,
    pub salt_pepper_fraction: f64,
    pub patch_fraction: f64,
    pub puzzle_grid: usize,
    pub texture_seed: u64,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        CorruptionParams {
            gaussian_sigma: None,
            salt_pepper_fraction: 0.3,
            patch_fraction: 0.3,
            puzzle_grid: 3,
            texture_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Probability of triggering on a step.
    pub p: f64,
    /// Number of consecutive frames a triggered corruption lasts.
    pub persistence: usize,
    /// Modality indices that may be corrupted.
    pub targets: Vec<usize>,
    pub params: CorruptionParams,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, p: f64, persistence: usize, targets: Vec<usize>) -> Self {
        CorruptionSpec {
            kind,
            p,
            persistence,
            targets,
            params: CorruptionParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("corruption p = {} not in [0, 1]", self.p)));
        }
        if self.persistence == 0 {
            return Err(Error::Config("corruption persistence K must be ≥ 1".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("corruption needs at least one target modality".into()));
        }
        let pr = &self.params;
        if !(0.0..=1.0).contains(&pr.salt_pepper_fraction) || !(0.0..=1.0).contains(&pr.patch_fraction)
        {
            return Err(Error::Config("corruption fractions must lie in [0, 1]".into()));
        }
        if pr.puzzle_grid < 2 {
            return Err(Error::Config("puzzle grid must be at least 2×2".into()));
        }
        if let Some(s) = &pr.gaussian_sigma {
            if s.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config("gaussian sigma must be ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// Checks the spec against the modalities it will be applied to.
    pub fn check_compatible(&self, modalities: &[crate::envs::ModalityInfo]) -> Result<()> {
        self.validate()?;
        for &t in &self.targets {
            let info = modalities.get(t).ok_or_else(|| {
                Error::Config(format!(
                    "corruption targets modality {t}, but only {} exist",
                    modalities.len()
                ))
            })?;
            if self.kind.image_only() {
                match info.layout {
                    crate::envs::ModalityLayout::Image { width, height } => {
                        if self.kind == CorruptionKind::Puzzle
                            && (width % self.params.puzzle_grid != 0
                                || height % self.params.puzzle_grid != 0)
                        {
                            return Err(Error::Config(format!(
                                "{width}×{height} image does not split into a {g}×{g} puzzle",
                                g = self.params.puzzle_grid
                            )));
                        }
                    }
                    crate::envs::ModalityLayout::Vector => {
                        return Err(Error::Config(format!(
                            "{} corruption needs an image modality, but {:?} is a vector",
                            self.kind, info.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}
