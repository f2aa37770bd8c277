use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{pool_layout, ApmConfig, ApmLoss, ApmModel, AttributeTarget};
use crate::error::{Error, Result};
use crate::extraction::InstanceMask;
use crate::layout::io::{read_json, write_json};
use crate::layout::SemanticMap;
use crate::nn::Adam;

pub const APM_CHECKPOINT_VERSION: u32 = 1;

/// One annotated instance of a training map.
#[derive(Debug, Clone, PartialEq)]
pub struct ApmSample {
    pub map: SemanticMap,
    pub mask: InstanceMask,
    pub target: AttributeTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApmTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub grid: usize,
    pub dim: usize,
    pub hidden: usize,
}

impl Default for ApmTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            epochs: 20,
            batch_size: 16,
            seed: 0,
            grid: 8,
            dim: 32,
            hidden: 64,
        }
    }
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApmLogRecord {
    pub epoch: usize,
    pub l_s: f64,
    pub l_p: f64,
    pub l_r: f64,
    pub total: f64,
}

pub struct TrainedApm {
    pub model: ApmModel,
    pub log: Vec<ApmLogRecord>,
}

/// Adam with weight decay over all instances, reshuffled every epoch.
pub fn train_apm(samples: &[ApmSample], config: &ApmTrainConfig) -> Result<TrainedApm> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data("no instances to train the attribute model on".into()))?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let model_cfg = ApmConfig {
        num_categories: first.map.num_categories(),
        height: first.map.height(),
        width: first.map.width(),
        grid: config.grid,
        dim: config.dim,
        hidden: config.hidden,
    };
    let mut model = ApmModel::new(model_cfg, config.seed)?;
    for s in samples {
        if s.map.height() != model_cfg.height
            || s.map.width() != model_cfg.width
            || s.map.num_categories() != model_cfg.num_categories
        {
            return Err(Error::Data("training maps differ in size or palette".into()));
        }
        s.mask.check_against(&s.map)?;
    }
    let pooled: Vec<_> = samples.iter().map(|s| pool_layout(&s.map, config.grid)).collect();
    let mut opt = Adam::new(model.params().len(), config.learning_rate, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xa7d5);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = model.params().zeros_like();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum = ApmLoss::default();
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let s = &samples[i];
                let l = model.loss_pooled(pooled[i].clone(), &s.mask, &s.target, Some(&mut grad))?;
                sum.l_s += l.l_s;
                sum.l_p += l.l_p;
                sum.l_r += l.l_r;
                sum.total += l.total;
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            opt.step(model.params_mut().values_mut(), &grad);
        }
        let n = samples.len() as f64;
        let rec = ApmLogRecord {
            epoch,
            l_s: sum.l_s / n,
            l_p: sum.l_p / n,
            l_r: sum.l_r / n,
            total: sum.total / n,
        };
        info!("attribute model epoch {epoch}/{} loss {:.4}", config.epochs, rec.total);
        log.push(rec);
    }
    Ok(TrainedApm { model, log })
}

/// Fraction of samples whose predicted orientation class is correct.
pub fn orientation_accuracy(model: &ApmModel, samples: &[ApmSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for s in samples {
        if model.predict(&s.map, &s.mask)?.orientation == s.target.orientation {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApmCheckpoint {
    pub format_version: u32,
    pub palette_hash: String,
    pub train_config: ApmTrainConfig,
    pub model: ApmModel,
}

impl ApmCheckpoint {
    pub fn new(model: ApmModel, palette_hash: String, train_config: ApmTrainConfig) -> Self {
        Self {
            format_version: APM_CHECKPOINT_VERSION,
            palette_hash,
            train_config,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = read_json(path).map_err(|e| match e {
            Error::Json(j) => Error::Checkpoint(format!("{}: {j}", path.display())),
            other => other,
        })?;
        if ckpt.format_version != APM_CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported attribute checkpoint version {}",
                ckpt.format_version
            )));
        }
        ApmModel::new(*ckpt.model.config(), 0)?
            .params()
            .check_layout(ckpt.model.params())?;
        Ok(ckpt)
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
    use crate::layout::Orientation;

    /// Five 8x8 rooms with one object each, oriented by which wall it touches.
    fn corpus() -> Vec<ApmSample> {
        let spots: [(usize, usize, u8); 5] = [(1, 3, 0), (3, 6, 3), (6, 3, 2), (3, 1, 1), (4, 4, 0)];
        spots
            .iter()
            .enumerate()
            .map(|(i, &(r, c, o))| {
                let mut cells = vec![0u8; 64];
                for rr in 1..7 {
                    for cc in 1..7 {
                        cells[rr * 8 + cc] = 1;
                    }
                }
                let cat = 4 + (i % 2) as u8;
                cells[r * 8 + c] = cat;
                let map = SemanticMap::new(8, 8, 0.5, 12, cells).unwrap();
                ApmSample {
                    mask: InstanceMask::new(8, 8, cat, vec![r * 8 + c]).unwrap(),
                    map,
                    target: AttributeTarget {
                        s_y: 0.5 + 0.1 * i as f64,
                        p_y: 0.0,
                        orientation: Orientation::ALL[o as usize],
                    },
                }
            })
            .collect()
    }

    fn small() -> ApmTrainConfig {
        ApmTrainConfig {
            epochs: 400,
            batch_size: 5,
            learning_rate: 1e-2,
            grid: 4,
            dim: 8,
            hidden: 16,
            ..Default::default()
        }
    }

    #[test]
    fn overfits_five_scenes() {
        let data = corpus();
        let trained = train_apm(&data, &small()).unwrap();
        assert_eq!(orientation_accuracy(&trained.model, &data).unwrap(), 1.0);
        let first = trained.log.first().unwrap().total;
        let last = trained.log.last().unwrap().total;
        assert!(last < first * 0.1, "{first} -> {last}");
    }

    #[test]
    fn deterministic_per_seed() {
        let data = corpus();
        let cfg = ApmTrainConfig { epochs: 3, ..small() };
        let a = train_apm(&data, &cfg).unwrap();
        let b = train_apm(&data, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn empty_corpus_is_data_error() {
        assert!(matches!(train_apm(&[], &small()), Err(Error::Data(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let data = corpus();
        let cfg = ApmTrainConfig { epochs: 1, ..small() };
        let trained = train_apm(&data, &cfg).unwrap();
        let ckpt = ApmCheckpoint::new(trained.model, "h".into(), cfg);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("apm.json");
        ckpt.save(&p).unwrap();
        assert_eq!(ApmCheckpoint::load(&p).unwrap(), ckpt);
    }
}
