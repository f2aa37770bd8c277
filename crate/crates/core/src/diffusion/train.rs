use std::io::Write;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::denoiser::{DenoiserConfig, ReferenceDenoiser, TrainingMode};
use super::loss::{loss_mdm_grad_at, sample_forward};
use super::schedule::{NoiseSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::layout::{ArchMask, ConditionKind, ConditionSpec, RoomType, SemanticMap};
use crate::nn::Adam;

/// One training map; its architecture mask is derived from the map itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSample {
    pub map: SemanticMap,
    pub room_type: RoomType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTrainConfig {
    pub diffusion_steps: usize,
    pub schedule: ScheduleKind,
    pub learning_rate: f64,
    /// Anneal the learning rate to zero over the run on a half cosine.
    #[serde(default)]
    pub cosine_decay: bool,
    pub iterations: usize,
    pub batch_size: usize,
    pub mode: TrainingMode,
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub radius: usize,
    /// Log a row per t-bucket every this many iterations.
    pub log_every: usize,
    pub t_buckets: usize,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            diffusion_steps: 100,
            schedule: ScheduleKind::Cosine,
            learning_rate: 2e-3,
            cosine_decay: true,
            iterations: 20000,
            batch_size: 4,
            mode: TrainingMode::Mixed,
            seed: 0,
            embed_dim: 16,
            hidden_dim: 64,
            radius: 3,
            log_every: 100,
            t_buckets: 4,
        }
    }
}

impl DiffusionTrainConfig {
    /// T = 4000, d = 64, learning rate 1e-4, batch 64.
    pub fn full() -> Self {
        Self {
            diffusion_steps: 4000,
            learning_rate: 1e-4,
            batch_size: 64,
            embed_dim: 64,
            hidden_dim: 256,
            ..Self::default()
        }
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        if !self.cosine_decay || self.iterations == 0 {
            return self.learning_rate;
        }
        let frac = (step.saturating_sub(1)) as f64 / self.iterations as f64;
        0.5 * self.learning_rate * (1.0 + (std::f64::consts::PI * frac).cos())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.diffusion_steps, self.schedule)
    }
}

/// Mean loss of one t-bucket over one logging window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub t_bucket: usize,
    pub loss: f64,
}

pub fn write_loss_csv<W: Write>(records: &[LossRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

/// Picks the condition kind for a training draw.
pub fn draw_kind<R: Rng + ?Sized>(mode: TrainingMode, rng: &mut R) -> ConditionKind {
    match mode {
        TrainingMode::Mixed => ConditionKind::ALL[rng.gen_range(0..3)],
        TrainingMode::Single(k) => k,
    }
}

pub struct TrainedDenoiser {
    pub model: ReferenceDenoiser,
    pub schedule: NoiseSchedule,
    pub log: Vec<LossRecord>,
}

/// Adam on the diffusion objective with uniformly drawn steps.
pub fn train_denoiser(dataset: &[DiffusionSample], config: &DiffusionTrainConfig) -> Result<TrainedDenoiser> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Data("training set is empty".into()))?;
    if config.batch_size == 0 || config.log_every == 0 || config.t_buckets == 0 {
        return Err(Error::Config("batch size, log interval and bucket count must be positive".into()));
    }
    let (h, w, k) = (first.map.height(), first.map.width(), first.map.num_categories());
    if dataset
        .iter()
        .any(|s| s.map.height() != h || s.map.width() != w || s.map.num_categories() != k)
    {
        return Err(Error::Data("training maps differ in size or palette".into()));
    }
    let schedule = config.schedule()?;
    let model_cfg = DenoiserConfig {
        num_categories: k,
        height: h,
        width: w,
        embed_dim: config.embed_dim,
        hidden_dim: config.hidden_dim,
        radius: config.radius,
    };
    let mut model = ReferenceDenoiser::new(model_cfg, config.mode, config.seed)?;
    let mut opt = Adam::new(model.params().len(), config.learning_rate, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_d1ff);
    let mut grad = model.params().zeros_like();
    let mut log = Vec::new();
    let mut bucket_sum = vec![0.0; config.t_buckets];
    let mut bucket_n = vec![0usize; config.t_buckets];
    let t_max = schedule.steps();

    for step in 1..=config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut batch_grad = model.params().zeros_like();
        for _ in 0..config.batch_size {
            let sample = &dataset[rng.gen_range(0..dataset.len())];
            let t = rng.gen_range(1..=t_max);
            let kind = draw_kind(config.mode, &mut rng);
            let cond = ConditionSpec::derive(kind, &ArchMask::from_map(&sample.map), sample.room_type)?;
            let x_t = sample_forward(&sample.map, t, &schedule, &mut rng)?;
            batch_grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = loss_mdm_grad_at(&model, &sample.map, &x_t, t, &cond, &schedule, &mut batch_grad)?;
            for (g, b) in grad.iter_mut().zip(&batch_grad) {
                *g += b / config.batch_size as f64;
            }
            let bucket = ((t - 1) * config.t_buckets / t_max).min(config.t_buckets - 1);
            bucket_sum[bucket] += loss;
            bucket_n[bucket] += 1;
        }
        opt.lr = config.lr_at(step);
        opt.step(model.params_mut().values_mut(), &grad);

        if step % config.log_every == 0 || step == config.iterations {
            for b in 0..config.t_buckets {
                if bucket_n[b] > 0 {
                    log.push(LossRecord {
                        step,
                        t_bucket: b,
                        loss: bucket_sum[b] / bucket_n[b] as f64,
                    });
                }
            }
            let total: f64 = bucket_sum.iter().sum::<f64>() / bucket_n.iter().sum::<usize>().max(1) as f64;
            info!("denoiser step {step}/{} loss {total:.5}", config.iterations);
            bucket_sum.iter_mut().for_each(|v| *v = 0.0);
            bucket_n.iter_mut().for_each(|v| *v = 0);
        }
    }
    Ok(TrainedDenoiser {
        model,
        schedule,
        log,
    })
}

/// Deterministic evaluation loss over fixed (t, x_t) draws per sample.
pub fn evaluation_loss(
    model: &ReferenceDenoiser,
    dataset: &[DiffusionSample],
    schedule: &NoiseSchedule,
    kind: ConditionKind,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut scratch = model.params().zeros_like();
    for sample in dataset {
        let cond = ConditionSpec::derive(kind, &ArchMask::from_map(&sample.map), sample.room_type)?;
        for _ in 0..draws {
            let t = rng.gen_range(1..=schedule.steps());
            let x_t = sample_forward(&sample.map, t, schedule, &mut rng)?;
            total += loss_mdm_grad_at(model, &sample.map, &x_t, t, &cond, schedule, &mut scratch)?;
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_room(rt: RoomType, object: u8) -> DiffusionSample {
        // 8x8 canvas, 6x6 room, a 2x3 object in one corner
        let mut cells = vec![0u8; 64];
        for r in 1..7 {
            for c in 1..7 {
                cells[r * 8 + c] = 1;
            }
        }
        cells[1 * 8 + 3] = 2;
        for r in 4..6 {
            for c in 2..5 {
                cells[r * 8 + c] = object;
            }
        }
        DiffusionSample {
            map: SemanticMap::new(8, 8, 0.25, 12, cells).unwrap(),
            room_type: rt,
        }
    }

    fn small_config(iterations: usize) -> DiffusionTrainConfig {
        DiffusionTrainConfig {
            diffusion_steps: 20,
            iterations,
            batch_size: 2,
            embed_dim: 8,
            hidden_dim: 16,
            learning_rate: 5e-3,
            log_every: 50,
            ..Default::default()
        }
    }

    #[test]
    fn empty_dataset_is_a_data_error() {
        assert!(matches!(
            train_denoiser(&[], &DiffusionTrainConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn loss_decreases_on_two_room_corpus() {
        let data = vec![toy_room(RoomType::Bedroom, 4), toy_room(RoomType::DiningRoom, 8)];
        let mut last = f64::INFINITY;
        for iters in [0usize, 50, 100, 150, 200] {
            let mut cfg = small_config(iters);
            cfg.log_every = 1000;
            cfg.learning_rate = 1e-3;
            let trained = train_denoiser(&data, &cfg).unwrap();
            let eval = evaluation_loss(&trained.model, &data, &trained.schedule, ConditionKind::Arch, 40, 9)
                .unwrap();
            assert!(eval < last, "iterations {iters}: {eval} !< {last}");
            last = eval;
        }
    }

    #[test]
    fn training_is_deterministic_and_logs_buckets() {
        let data = vec![toy_room(RoomType::Bedroom, 4)];
        let a = train_denoiser(&data, &small_config(60)).unwrap();
        let b = train_denoiser(&data, &small_config(60)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
        assert!(a.log.iter().all(|r| r.t_bucket < 4 && r.loss.is_finite()));
        let mut csv_bytes = Vec::new();
        write_loss_csv(&a.log, &mut csv_bytes).unwrap();
        assert!(String::from_utf8(csv_bytes).unwrap().starts_with("step,t_bucket,loss"));
    }

    #[test]
    fn single_kind_training_only_draws_that_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(
                draw_kind(TrainingMode::Single(ConditionKind::Floor), &mut rng),
                ConditionKind::Floor
            );
        }
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[draw_kind(TrainingMode::Mixed, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn cosine_decay_runs_from_full_rate_towards_zero() {
        let cfg = DiffusionTrainConfig { iterations: 100, ..Default::default() };
        assert_eq!(cfg.lr_at(1), cfg.learning_rate);
        assert!((cfg.lr_at(51) - cfg.learning_rate / 2.0).abs() < 1e-12);
        assert!(cfg.lr_at(100) < cfg.learning_rate * 1e-3);
        let flat = DiffusionTrainConfig { cosine_decay: false, ..cfg };
        assert_eq!(flat.lr_at(100), flat.learning_rate);
    }
}
