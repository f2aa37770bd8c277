//! Exact multinomial diffusion kernels.
//!
//! All kernels act independently per pixel. A noisy state is a grid of
//! category indices (the one-hot vectors are implicit).

use rand::Rng;

use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::layout::CategoricalGrid;

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// q(x_t | x_0) = Cat(alpha_bar_t * x_0 + (1 - alpha_bar_t) / K), `x0` possibly soft.
pub fn forward_marginal(
    x0: &CategoricalGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<CategoricalGrid> {
    sched.check_step(t)?;
    Ok(mix_with_uniform(x0, sched.alpha_bar(t)))
}

/// One forward step q(x_t | x_{t-1}) = Cat(alpha_t * x_{t-1} + (1 - alpha_t) / K).
pub fn step_kernel(
    x_prev: &CategoricalGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<CategoricalGrid> {
    sched.check_step(t)?;
    Ok(mix_with_uniform(x_prev, sched.alpha(t)))
}

fn mix_with_uniform(x: &CategoricalGrid, keep: f64) -> CategoricalGrid {
    let k = x.k();
    let floor = (1.0 - keep) / k as f64;
    let probs = x.probs().iter().map(|&p| keep * p + floor).collect();
    CategoricalGrid::from_raw(x.height(), x.width(), k, probs)
}

/// Fills `out` with q(x_t | x_0 = `label`) for a hard label.
pub fn forward_probs_for_label(label: u8, alpha_bar: f64, out: &mut [f64]) {
    let floor = (1.0 - alpha_bar) / out.len() as f64;
    out.fill(floor);
    out[label as usize] += alpha_bar;
}

/// Draws one category per pixel. Consumes exactly one uniform per pixel.
pub fn sample_from<R: Rng + ?Sized>(grid: &CategoricalGrid, rng: &mut R) -> Vec<u8> {
    grid.probs()
        .chunks_exact(grid.k())
        .map(|p| sample_categorical(p, rng) as u8)
        .collect()
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Unnormalized posterior of a single pixel:
/// theta = [alpha_t x_t + (1 - alpha_t)/K] * [alpha_bar_{t-1} x0 + (1 - alpha_bar_{t-1})/K].
///
/// Returns the normalizer; `out` holds theta / sum afterwards.
pub fn posterior_pixel(x_t: u8, x0: &[f64], t: usize, sched: &NoiseSchedule, out: &mut [f64]) -> f64 {
    let k = x0.len() as f64;
    let a = sched.alpha(t);
    let ab = sched.alpha_bar(t - 1);
    let step_floor = (1.0 - a) / k;
    let marg_floor = (1.0 - ab) / k;
    let mut sum = 0.0;
    for (i, (o, &p)) in out.iter_mut().zip(x0).enumerate() {
        let from_xt = if i == x_t as usize { a + step_floor } else { step_floor };
        *o = from_xt * (ab * p + marg_floor);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    sum
}

/// q(x_{t-1} | x_t, x_0) per pixel, with `x0` a (possibly soft) estimate of x_0.
///
/// At t = 1 the posterior collapses onto x_0 and `x0` is returned as is.
pub fn posterior(
    x_t: &[u8],
    x0: &CategoricalGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<CategoricalGrid> {
    sched.check_step(t)?;
    if x_t.len() != x0.pixels() {
        return Err(Error::Shape(format!(
            "x_t has {} pixels, x0 has {}",
            x_t.len(),
            x0.pixels()
        )));
    }
    if t == 1 {
        return Ok(x0.clone());
    }
    let k = x0.k();
    let mut probs = vec![0.0; x0.probs().len()];
    for (p, &label) in x_t.iter().enumerate() {
        if label as usize >= k {
            return Err(Error::Category(format!("x_t label {label} >= K = {k}")));
        }
        posterior_pixel(label, x0.pixel(p), t, sched, &mut probs[p * k..(p + 1) * k]);
    }
    Ok(CategoricalGrid::from_raw(x0.height(), x0.width(), k, probs))
}

/// KL(p || q) with 0 log 0 = 0 and q floored at 1e-12 inside the log.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Distribution(format!(
            "length mismatch {} vs {}",
            p.len(),
            q.len()
        )));
    }
    for (name, v) in [("p", p), ("q", q)] {
        let sum: f64 = v.iter().sum();
        if v.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-8 {
            return Err(Error::Distribution(format!(
                "{name} is not normalized (sum {sum})"
            )));
        }
    }
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.max(LOG_FLOOR).ln()))
        .sum()
}
