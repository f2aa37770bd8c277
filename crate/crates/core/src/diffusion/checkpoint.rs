use std::path::Path;

use serde::{Deserialize, Serialize};

use super::denoiser::ReferenceDenoiser;
use super::schedule::{NoiseSchedule, ScheduleKind};
use super::train::DiffusionTrainConfig;
use crate::error::{Error, Result};
use crate::layout::io::{read_json, write_json};

pub const DENOISER_CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to sample from a trained denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserCheckpoint {
    pub format_version: u32,
    pub palette_hash: String,
    pub scale: f64,
    pub diffusion_steps: usize,
    pub schedule: ScheduleKind,
    pub train_config: DiffusionTrainConfig,
    pub model: ReferenceDenoiser,
}

impl DenoiserCheckpoint {
    pub fn new(
        model: ReferenceDenoiser,
        schedule: &NoiseSchedule,
        palette_hash: String,
        scale: f64,
        train_config: DiffusionTrainConfig,
    ) -> Self {
        Self {
            format_version: DENOISER_CHECKPOINT_VERSION,
            palette_hash,
            scale,
            diffusion_steps: schedule.steps(),
            schedule: schedule.kind(),
            train_config,
            model,
        }
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.diffusion_steps, self.schedule)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = read_json(path).map_err(|e| match e {
            Error::Json(j) => Error::Checkpoint(format!("{}: {j}", path.display())),
            other => other,
        })?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != DENOISER_CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported denoiser checkpoint version {}",
                self.format_version
            )));
        }
        let fresh = ReferenceDenoiser::new(*self.model.config(), self.model.mode(), 0)?;
        fresh.params().check_layout(self.model.params())?;
        Ok(())
    }

    pub fn check_palette(&self, palette_hash: &str) -> Result<()> {
        if self.palette_hash != palette_hash {
            return Err(Error::Checkpoint("palette hash differs from checkpoint".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{DenoiserConfig, TrainingMode};
    use crate::layout::ConditionKind;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("den.json");
        let model = ReferenceDenoiser::new(
            DenoiserConfig::desk(12, 6, 6),
            TrainingMode::Single(ConditionKind::Arch),
            1,
        )
        .unwrap();
        let sched = NoiseSchedule::new(10, ScheduleKind::Cosine).unwrap();
        let ckpt = DenoiserCheckpoint::new(model, &sched, "abc".into(), 0.25, DiffusionTrainConfig::default());
        ckpt.save(&path).unwrap();
        let back = DenoiserCheckpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.schedule().unwrap(), sched);
        assert!(back.check_palette("xyz").is_err());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"format_version\": 1}").unwrap();
        assert!(matches!(DenoiserCheckpoint::load(&path), Err(Error::Checkpoint(_))));
    }
}
