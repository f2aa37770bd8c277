//! Minimal numeric building blocks shared by the trainable models: a flat
//! named parameter store, the Adam optimizer and a few activations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Handle into a [`Params`] segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegId(usize);

/// All parameters of a model in one contiguous vector, split into named segments.
/// Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Params {
    segments: Vec<Segment>,
    values: Vec<f64>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a segment initialized uniformly in [-bound, bound].
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> SegId {
        let len: usize = shape.iter().product();
        let id = self.push_segment(name, shape, len);
        self.values
            .extend((0..len).map(|_| if bound > 0.0 { rng.gen_range(-bound..=bound) } else { 0.0 }));
        id
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> SegId {
        let len: usize = shape.iter().product();
        let id = self.push_segment(name, shape, len);
        self.values.extend(std::iter::repeat(0.0).take(len));
        id
    }

    fn push_segment(&mut self, name: &str, shape: &[usize], len: usize) -> SegId {
        self.segments.push(Segment {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset: self.values.len(),
            len,
        });
        SegId(self.segments.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegId) -> &Segment {
        &self.segments[id.0]
    }

    pub fn get(&self, id: SegId) -> &[f64] {
        let s = &self.segments[id.0];
        &self.values[s.offset..s.offset + s.len]
    }

    pub fn get_mut(&mut self, id: SegId) -> &mut [f64] {
        let s = &self.segments[id.0];
        &mut self.values[s.offset..s.offset + s.len]
    }

    /// The part of a same-layout buffer (e.g. a gradient) belonging to `id`.
    pub fn view<'a>(&self, buf: &'a [f64], id: SegId) -> &'a [f64] {
        let s = &self.segments[id.0];
        &buf[s.offset..s.offset + s.len]
    }

    pub fn view_mut<'a>(&self, buf: &'a mut [f64], id: SegId) -> &'a mut [f64] {
        let s = &self.segments[id.0];
        &mut buf[s.offset..s.offset + s.len]
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }

    /// Checks that another parameter set has the same segment layout.
    pub fn check_layout(&self, other: &Params) -> Result<()> {
        if self.segments != other.segments {
            return Err(Error::Checkpoint("parameter layout mismatch".into()));
        }
        Ok(())
    }

    pub fn find(&self, name: &str) -> Option<SegId> {
        self.segments.iter().position(|s| s.name == name).map(SegId)
    }
}

/// Adam with optional L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Plain gradient descent.
pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// In-place numerically stable softmax.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Backpropagates `dprobs` through a softmax whose output is `probs`, writing logit gradients.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64], dlogits: &mut [f64]) {
    let dot: f64 = probs.iter().zip(dprobs).map(|(p, d)| p * d).sum();
    for ((dl, &p), &d) in dlogits.iter_mut().zip(probs).zip(dprobs) {
        *dl = p * (d - dot);
    }
}

/// Sinusoidal embedding of a scalar position, `[sin(t w_0), cos(t w_0), sin(t w_1), ...]`.
pub fn sinusoidal_embedding(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        out[2 * i] = (t * freq).sin();
        out[2 * i + 1] = (t * freq).cos();
    }
    out
}

/// Relative error used by gradient checks: |a - b| / max(|a|, |b|, 1e-6).
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn params_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = Params::new();
        let a = p.add_uniform("a", &[2, 3], 0.5, &mut rng);
        let b = p.add_zeros("b", &[4]);
        assert_eq!(p.len(), 10);
        assert_eq!(p.get(a).len(), 6);
        assert!(p.get(b).iter().all(|&v| v == 0.0));
        p.get_mut(b)[2] = 7.0;
        assert_eq!(p.values()[8], 7.0);
        assert_eq!(p.find("b"), Some(b));
    }

    #[test]
    fn silu_gradient_matches_difference() {
        for &x in &[-5.0, -1.2, 0.0, 0.3, 4.0] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((fd - silu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_backward_matches_difference() {
        let logits = [0.3, -1.0, 2.0, 0.1];
        let weights = [0.7, -0.2, 1.1, 0.4];
        let f = |l: &[f64]| {
            let mut p = l.to_vec();
            softmax_in_place(&mut p);
            p.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut probs = logits.to_vec();
        softmax_in_place(&mut probs);
        let mut dl = [0.0; 4];
        softmax_backward(&probs, &weights, &mut dl);
        for i in 0..4 {
            let mut up = logits;
            let mut dn = logits;
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (f(&up) - f(&dn)) / 2e-6;
            assert!((fd - dl[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1, 0.0);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }
}
