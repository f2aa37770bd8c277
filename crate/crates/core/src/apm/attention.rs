use crate::error::{Error, Result};
use crate::nn::{softmax_backward, softmax_in_place};

/// Row-major token matrix: `n` tokens of width `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokens {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl Tokens {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::Shape(format!("{} values for {n} tokens of width {d}", data.len())));
        }
        Ok(Self { n, d, data })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }
}

/// `x W` for a d_in x d_out row-major W.
pub(crate) fn project(x: &Tokens, w: &[f64], d_out: usize) -> Tokens {
    let mut out = Tokens::zeros(x.n, d_out);
    for t in 0..x.n {
        let xr = x.row(t);
        let or = out.row_mut(t);
        for (i, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[i * d_out..(i + 1) * d_out];
            for j in 0..d_out {
                or[j] += xv * wr[j];
            }
        }
    }
    out
}

/// Accumulates dW += x^T dy and returns dx = dy W^T.
pub(crate) fn project_backward(x: &Tokens, w: &[f64], dy: &Tokens, dw: &mut [f64]) -> Tokens {
    let (d_in, d_out) = (x.d, dy.d);
    let mut dx = Tokens::zeros(x.n, d_in);
    for t in 0..x.n {
        let xr = x.row(t);
        let dyr = dy.row(t);
        let dxr = dx.row_mut(t);
        for i in 0..d_in {
            let wr = &w[i * d_out..(i + 1) * d_out];
            let dwr = &mut dw[i * d_out..(i + 1) * d_out];
            let mut acc = 0.0;
            for j in 0..d_out {
                dwr[j] += xr[i] * dyr[j];
                acc += dyr[j] * wr[j];
            }
            dxr[i] = acc;
        }
    }
    dx
}

/// Query/key/value projections, each d x d.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a> {
    pub wq: &'a [f64],
    pub wk: &'a [f64],
    pub wv: &'a [f64],
}

pub struct AttentionCache {
    pub q: Tokens,
    pub k: Tokens,
    pub v: Tokens,
    /// Row-stochastic n_q x n_kv attention weights.
    pub weights: Vec<f64>,
    pub out: Tokens,
}

/// Single-head scaled dot-product attention of `query` tokens over `kv` tokens.
pub fn cross_attention(query: &Tokens, kv: &Tokens, w: AttentionWeights<'_>) -> Result<AttentionCache> {
    let d = query.d;
    if kv.d != d || w.wq.len() != d * d || w.wk.len() != d * d || w.wv.len() != d * d {
        return Err(Error::Shape("attention widths disagree".into()));
    }
    let q = project(query, w.wq, d);
    let k = project(kv, w.wk, d);
    let v = project(kv, w.wv, d);
    let scale = 1.0 / (d as f64).sqrt();
    let (nq, nk) = (query.n, kv.n);
    let mut weights = vec![0.0; nq * nk];
    let mut out = Tokens::zeros(nq, d);
    for i in 0..nq {
        let row = &mut weights[i * nk..(i + 1) * nk];
        let qi = q.row(i);
        for (j, s) in row.iter_mut().enumerate() {
            *s = scale * qi.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax_in_place(row);
        let oi = out.row_mut(i);
        for (j, &a) in row.iter().enumerate() {
            for (o, &vv) in oi.iter_mut().zip(v.row(j)) {
                *o += a * vv;
            }
        }
    }
    Ok(AttentionCache { q, k, v, weights, out })
}

/// Gradients of the attention inputs and weights given dL/d(out).
pub(crate) fn cross_attention_backward(
    query: &Tokens,
    kv: &Tokens,
    w: AttentionWeights<'_>,
    cache: &AttentionCache,
    dout: &Tokens,
    dwq: &mut [f64],
    dwk: &mut [f64],
    dwv: &mut [f64],
) -> (Tokens, Tokens) {
    let d = query.d;
    let (nq, nk) = (query.n, kv.n);
    let scale = 1.0 / (d as f64).sqrt();
    let mut dq = Tokens::zeros(nq, d);
    let mut dk = Tokens::zeros(nk, d);
    let mut dv = Tokens::zeros(nk, d);
    let mut da = vec![0.0; nk];
    let mut ds = vec![0.0; nk];
    for i in 0..nq {
        let a = &cache.weights[i * nk..(i + 1) * nk];
        let doi = dout.row(i);
        for j in 0..nk {
            da[j] = doi.iter().zip(cache.v.row(j)).map(|(x, y)| x * y).sum();
            for (dvv, &g) in dv.row_mut(j).iter_mut().zip(doi) {
                *dvv += a[j] * g;
            }
        }
        softmax_backward(a, &da, &mut ds);
        let qi = cache.q.row(i).to_vec();
        let dqi = dq.row_mut(i);
        for j in 0..nk {
            let g = ds[j] * scale;
            if g == 0.0 {
                continue;
            }
            for (x, &kv_) in dqi.iter_mut().zip(cache.k.row(j)) {
                *x += g * kv_;
            }
            for (x, &qv) in dk.row_mut(j).iter_mut().zip(&qi) {
                *x += g * qv;
            }
        }
    }
    let dquery = project_backward(query, w.wq, &dq, dwq);
    let mut dkv = project_backward(kv, w.wk, &dk, dwk);
    let dkv_v = project_backward(kv, w.wv, &dv, dwv);
    for (a, b) in dkv.data.iter_mut().zip(&dkv_v.data) {
        *a += b;
    }
    (dquery, dkv)
}
