//! Multinomial diffusion over semantic maps.
//!
//! The forward process mixes each pixel's one-hot label with the uniform
//! distribution over K classes. Sampling runs the exact categorical
//! posterior with a learned estimate of the clean map plugged in.

mod checkpoint;
mod denoiser;
pub mod kernels;
mod loss;
mod sampler;
mod schedule;
mod train;

pub use checkpoint::{DenoiserCheckpoint, DENOISER_CHECKPOINT_VERSION};
pub use denoiser::{
    Denoiser, DenoiserConfig, FixedMapDenoiser, ForwardCache, ReferenceDenoiser, TrainingMode,
};
pub use kernels::{forward_marginal, kl_categorical, posterior, sample_from, step_kernel};
pub use loss::{loss_mdm, loss_mdm_grad, loss_mdm_grad_at, mdm_terms, sample_forward};
pub use sampler::sample_layout;
pub use schedule::{NoiseSchedule, ScheduleKind};
pub use train::{
    draw_kind, evaluation_loss, train_denoiser, write_loss_csv, DiffusionSample,
    DiffusionTrainConfig, LossRecord, TrainedDenoiser,
};
