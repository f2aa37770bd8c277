use rand::Rng;

use super::denoiser::Denoiser;
use super::kernels::{posterior, sample_from};
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::layout::{CategoricalGrid, ConditionSpec, SemanticMap};

/// Ancestral sampling of a semantic map.
///
/// Starts from uniform noise, walks t = T..2 drawing
/// x_{t-1} ~ q(x_{t-1} | x_t, x0_hat) with x0_hat from the denoiser, and
/// returns the argmax of the final x_0 estimate at t = 1.
pub fn sample_layout<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    cond: &ConditionSpec,
    sched: &NoiseSchedule,
    scale: f64,
    rng: &mut R,
) -> Result<SemanticMap> {
    denoiser.check_condition(cond.kind())?;
    let k = denoiser.num_categories();
    let (h, w) = (cond.mask().height(), cond.mask().width());
    if k == 0 {
        return Err(Error::Config("denoiser reports zero categories".into()));
    }
    let mut x_t = sample_from(&CategoricalGrid::uniform(h, w, k), rng);
    for t in (2..=sched.steps()).rev() {
        let x0_hat = denoiser.predict_x0(&x_t, t, cond)?;
        let post = posterior(&x_t, &x0_hat, t, sched)?;
        x_t = sample_from(&post, rng);
    }
    denoiser.predict_x0(&x_t, 1, cond)?.argmax(scale)
}
