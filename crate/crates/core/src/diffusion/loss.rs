use rand::Rng;

use super::denoiser::{Denoiser, ReferenceDenoiser};
use super::kernels::{forward_probs_for_label, kl_unchecked, posterior_pixel, sample_categorical, LOG_FLOOR};
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::layout::{CategoricalGrid, ConditionSpec, SemanticMap};

/// Draws x_t ~ q(x_t | x_0) for a clean label map.
pub fn sample_forward<R: Rng + ?Sized>(
    x0: &SemanticMap,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Vec<u8>> {
    sched.check_step(t)?;
    let k = x0.num_categories();
    let ab = sched.alpha_bar(t);
    let mut probs = vec![0.0; k];
    Ok(x0
        .cells()
        .iter()
        .map(|&c| {
            forward_probs_for_label(c, ab, &mut probs);
            sample_categorical(&probs, rng) as u8
        })
        .collect())
}

/// Pixel-mean training loss for a fixed noisy state, plus dL/d(x0_hat).
///
/// For t >= 2 the loss is KL(q(x_{t-1} | x_t, x_0) || q(x_{t-1} | x_t, x0_hat));
/// for t = 1 it is -log x0_hat[x_0].
pub fn mdm_terms(
    x0: &SemanticMap,
    x_t: &[u8],
    x0_hat: &CategoricalGrid,
    t: usize,
    sched: &NoiseSchedule,
    want_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    sched.check_step(t)?;
    let k = x0.num_categories();
    let n = x0.cells().len();
    if x0_hat.k() != k || x0_hat.pixels() != n || x_t.len() != n {
        return Err(Error::Shape("loss inputs disagree in size".into()));
    }
    let mut grad = if want_grad { vec![0.0; n * k] } else { Vec::new() };
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    if t == 1 {
        for (p, &c) in x0.cells().iter().enumerate() {
            let q = x0_hat.pixel(p)[c as usize];
            total -= q.max(LOG_FLOOR).ln();
            if want_grad && q > LOG_FLOOR {
                grad[p * k + c as usize] = -inv_n / q;
            }
        }
        return Ok((total * inv_n, grad));
    }

    let a = sched.alpha(t);
    let ab_prev = sched.alpha_bar(t - 1);
    let step_floor = (1.0 - a) / k as f64;
    let mut onehot = vec![0.0; k];
    let mut q_true = vec![0.0; k];
    let mut p_model = vec![0.0; k];
    for (p, (&c, &xt)) in x0.cells().iter().zip(x_t).enumerate() {
        onehot.fill(0.0);
        onehot[c as usize] = 1.0;
        posterior_pixel(xt, &onehot, t, sched, &mut q_true);
        let norm = posterior_pixel(xt, x0_hat.pixel(p), t, sched, &mut p_model);
        total += kl_unchecked(&q_true, &p_model);
        if want_grad {
            // dKL/dtheta_j = (1 - q_j / p_j) / S, dtheta_j/dx0_j = A_j alpha_bar_{t-1}
            let g = &mut grad[p * k..(p + 1) * k];
            for j in 0..k {
                let ratio = if p_model[j] > LOG_FLOOR { q_true[j] / p_model[j] } else { 0.0 };
                let from_xt = if j == xt as usize { a + step_floor } else { step_floor };
                g[j] = inv_n * (1.0 - ratio) / norm * from_xt * ab_prev;
            }
        }
    }
    Ok((total * inv_n, grad))
}

/// Training loss of any denoiser at step t, sampling x_t from `rng`.
pub fn loss_mdm<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    x0: &SemanticMap,
    t: usize,
    cond: &ConditionSpec,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<f64> {
    let x_t = sample_forward(x0, t, sched, rng)?;
    let x0_hat = denoiser.predict_x0(&x_t, t, cond)?;
    Ok(mdm_terms(x0, &x_t, &x0_hat, t, sched, false)?.0)
}

/// Loss and full parameter gradient of the reference denoiser at a fixed x_t.
pub fn loss_mdm_grad_at(
    model: &ReferenceDenoiser,
    x0: &SemanticMap,
    x_t: &[u8],
    t: usize,
    cond: &ConditionSpec,
    sched: &NoiseSchedule,
    grad: &mut [f64],
) -> Result<f64> {
    let cache = model.forward(x_t, t, cond)?;
    let x0_hat = CategoricalGrid::from_raw(x0.height(), x0.width(), x0.num_categories(), cache.probs().to_vec());
    let (loss, dprobs) = mdm_terms(x0, x_t, &x0_hat, t, sched, true)?;
    model.backward(&cache, &dprobs, grad);
    Ok(loss)
}

/// Loss and gradient with x_t drawn from `rng`.
pub fn loss_mdm_grad<R: Rng + ?Sized>(
    model: &ReferenceDenoiser,
    x0: &SemanticMap,
    t: usize,
    cond: &ConditionSpec,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let x_t = sample_forward(x0, t, sched, rng)?;
    let mut grad = model.params().zeros_like();
    let loss = loss_mdm_grad_at(model, x0, &x_t, t, cond, sched, &mut grad)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{DenoiserConfig, FixedMapDenoiser, ScheduleKind, TrainingMode};
    use crate::layout::{ArchMask, ConditionKind, RoomType};
    use crate::nn::relative_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_map(seed: u64) -> SemanticMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (0..6 * 5).map(|_| rng.gen_range(0..7)).collect();
        SemanticMap::new(6, 5, 0.25, 7, cells).unwrap()
    }

    #[test]
    fn oracle_loss_is_zero_for_t_ge_2() {
        let s = NoiseSchedule::new(20, ScheduleKind::Cosine).unwrap();
        let map = toy_map(1);
        let oracle = FixedMapDenoiser::new(&map).unwrap();
        let cond = ConditionSpec::unconditional(6, 5, RoomType::Bedroom);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in 2..=20 {
            assert_eq!(loss_mdm(&oracle, &map, t, &cond, &s, &mut rng).unwrap(), 0.0);
        }
        assert_eq!(loss_mdm(&oracle, &map, 1, &cond, &s, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = NoiseSchedule::new(10, ScheduleKind::Cosine).unwrap();
        let map = toy_map(3);
        let cfg = DenoiserConfig {
            num_categories: 7,
            height: 6,
            width: 5,
            embed_dim: 4,
            hidden_dim: 6,
            radius: 1,
        };
        let mut model = ReferenceDenoiser::new(cfg, TrainingMode::Mixed, 5).unwrap();
        let cond = ConditionSpec::derive(ConditionKind::Arch, &ArchMask::from_map(&map), RoomType::DiningRoom)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in [1usize, 2, 6, 10] {
            let x_t = sample_forward(&map, t, &s, &mut rng).unwrap();
            let mut grad = model.params().zeros_like();
            loss_mdm_grad_at(&model, &map, &x_t, t, &cond, &s, &mut grad).unwrap();
            for _ in 0..40 {
                let i = rng.gen_range(0..grad.len());
                let orig = model.params().values()[i];
                let eval = |m: &mut ReferenceDenoiser, v: f64| {
                    m.params_mut().values_mut()[i] = v;
                    let mut g = m.params().zeros_like();
                    loss_mdm_grad_at(m, &map, &x_t, t, &cond, &s, &mut g).unwrap()
                };
                let h = 1e-5;
                let up = eval(&mut model, orig + h);
                let dn = eval(&mut model, orig - h);
                model.params_mut().values_mut()[i] = orig;
                let fd = (up - dn) / (2.0 * h);
                let err = relative_error(grad[i], fd);
                assert!(err < 1e-4, "t={t} param {i}: analytic {} fd {fd}", grad[i]);
            }
        }
    }
}
