use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{cross_attention, cross_attention_backward, project, project_backward, AttentionWeights, Tokens};
use crate::error::{Error, Result};
use crate::extraction::InstanceMask;
use crate::layout::{Orientation, SemanticMap};
use crate::nn::{silu, silu_grad, softmax_in_place, Params, SegId};

/// Smallest vertical size the model reports.
pub const MIN_HEIGHT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApmConfig {
    pub num_categories: usize,
    pub height: usize,
    pub width: usize,
    /// Encoders pool to a grid x grid token map.
    pub grid: usize,
    /// Token width d.
    pub dim: usize,
    pub hidden: usize,
}

impl ApmConfig {
    /// 8x8 tokens of width 32.
    pub fn desk(num_categories: usize, height: usize, width: usize) -> Self {
        Self {
            num_categories,
            height,
            width,
            grid: 8,
            dim: 32,
            hidden: 64,
        }
    }

    /// 32x32 tokens of width 128.
    pub fn full(num_categories: usize, height: usize, width: usize) -> Self {
        Self {
            grid: 32,
            dim: 128,
            hidden: 256,
            ..Self::desk(num_categories, height, width)
        }
    }

    pub fn tokens(&self) -> usize {
        self.grid * self.grid
    }

    fn validate(&self) -> Result<()> {
        if self.grid == 0 || self.dim == 0 || self.hidden == 0 {
            return Err(Error::Config("attribute model dims must be positive".into()));
        }
        if self.height % self.grid != 0 || self.width % self.grid != 0 {
            return Err(Error::Config(format!(
                "{}x{} map does not split into a {} token grid",
                self.height, self.width, self.grid
            )));
        }
        if self.num_categories < 5 {
            return Err(Error::Config("attribute model needs K >= 5".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Layout {
    w_layout: SegId,
    b_layout: SegId,
    w_mask: SegId,
    b_mask: SegId,
    pos: SegId,
    wq: SegId,
    wk: SegId,
    wv: SegId,
    w1: SegId,
    b1: SegId,
    w2: SegId,
    b2: SegId,
    w_s: SegId,
    b_s: SegId,
    w_p: SegId,
    b_p: SegId,
    w_r: SegId,
    b_r: SegId,
}

/// Predicted vertical size, bottom elevation and orientation of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePrediction {
    pub s_y: f64,
    pub p_y: f64,
    pub logits: [f64; 4],
    pub orientation: Orientation,
}

impl AttributePrediction {
    /// Fixed attributes, e.g. from the heuristic baselines.
    pub fn fixed(s_y: f64, p_y: f64, orientation: Orientation) -> Self {
        let mut logits = [0.0; 4];
        logits[orientation.class() as usize] = 1.0;
        Self {
            s_y,
            p_y,
            logits,
            orientation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeTarget {
    pub s_y: f64,
    pub p_y: f64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ApmLoss {
    pub l_s: f64,
    pub l_p: f64,
    pub l_r: f64,
    pub total: f64,
}

/// Layout and mask encoders, cross-attention, a shared two-layer trunk and
/// three heads.
///
/// Each encoder average-pools its input over non-overlapping patches to a
/// grid x grid token map and projects the pooled channels to width d; both
/// add the same learned positional embedding. The layout encoder sees the
/// one-hot map. The mask encoder sees an occupancy channel plus the
/// occupancy copied into the instance's category channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApmModel {
    config: ApmConfig,
    params: Params,
    layout: Layout,
}

pub struct ApmCache {
    layout_in: Tokens,
    mask_in: Tokens,
    f_layout: Tokens,
    f_mask: Tokens,
    attn: super::attention::AttentionCache,
    pooled: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    s_raw: f64,
    p_raw: f64,
    logits: [f64; 4],
}

/// Mean one-hot per patch, K channels per token.
pub fn pool_layout(map: &SemanticMap, grid: usize) -> Tokens {
    let k = map.num_categories();
    let (ph, pw) = (map.height() / grid, map.width() / grid);
    let mut t = Tokens::zeros(grid * grid, k);
    let inv = 1.0 / (ph * pw) as f64;
    for r in 0..map.height() {
        for c in 0..map.width() {
            let tok = (r / ph) * grid + c / pw;
            t.data[tok * k + map.get(r, c) as usize] += inv;
        }
    }
    t
}

/// Occupancy and category-tagged occupancy per patch, K + 1 channels per token.
pub fn pool_mask(mask: &InstanceMask, num_categories: usize, grid: usize) -> Tokens {
    let ch = num_categories + 1;
    let (ph, pw) = (mask.height() / grid, mask.width() / grid);
    let mut t = Tokens::zeros(grid * grid, ch);
    let inv = 1.0 / (ph * pw) as f64;
    let cat = 1 + mask.category() as usize;
    for &p in mask.pixels() {
        let (r, c) = (p / mask.width(), p % mask.width());
        let tok = (r / ph) * grid + c / pw;
        t.data[tok * ch] += inv;
        t.data[tok * ch + cat] += inv;
    }
    t
}

fn dense(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let d_out = b.len();
    let mut y = b.to_vec();
    for (i, &xv) in x.iter().enumerate() {
        for j in 0..d_out {
            y[j] += xv * w[i * d_out + j];
        }
    }
    y
}

/// dW += x^T dy, db += dy, returns dx.
fn dense_backward(x: &[f64], w: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let d_out = dy.len();
    let mut dx = vec![0.0; x.len()];
    for (i, &xv) in x.iter().enumerate() {
        for j in 0..d_out {
            dw[i * d_out + j] += xv * dy[j];
            dx[i] += w[i * d_out + j] * dy[j];
        }
    }
    for (a, b) in db.iter_mut().zip(dy) {
        *a += b;
    }
    dx
}

impl ApmModel {
    pub fn new(config: ApmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, d, h, n) = (config.num_categories, config.dim, config.hidden, config.tokens());
        let mut p = Params::new();
        let b = |fan_in: usize| (3.0 / fan_in as f64).sqrt();
        let layout = Layout {
            w_layout: p.add_uniform("layout_proj", &[k, d], b(k), &mut rng),
            b_layout: p.add_zeros("layout_bias", &[d]),
            w_mask: p.add_uniform("mask_proj", &[k + 1, d], b(k + 1), &mut rng),
            b_mask: p.add_zeros("mask_bias", &[d]),
            pos: p.add_uniform("position_embedding", &[n, d], 0.5, &mut rng),
            wq: p.add_uniform("query", &[d, d], b(d), &mut rng),
            wk: p.add_uniform("key", &[d, d], b(d), &mut rng),
            wv: p.add_uniform("value", &[d, d], b(d), &mut rng),
            w1: p.add_uniform("trunk1", &[d, h], b(d), &mut rng),
            b1: p.add_zeros("trunk1_bias", &[h]),
            w2: p.add_uniform("trunk2", &[h, h], b(h), &mut rng),
            b2: p.add_zeros("trunk2_bias", &[h]),
            w_s: p.add_uniform("size_head", &[h, 1], b(h), &mut rng),
            b_s: p.add_zeros("size_bias", &[1]),
            w_p: p.add_uniform("elevation_head", &[h, 1], b(h), &mut rng),
            b_p: p.add_zeros("elevation_bias", &[1]),
            w_r: p.add_uniform("orientation_head", &[h, 4], b(h), &mut rng),
            b_r: p.add_zeros("orientation_bias", &[4]),
        };
        Ok(Self {
            config,
            params: p,
            layout,
        })
    }

    pub fn config(&self) -> &ApmConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn check(&self, map: &SemanticMap, mask: &InstanceMask) -> Result<()> {
        let c = &self.config;
        if map.height() != c.height || map.width() != c.width || map.num_categories() != c.num_categories {
            return Err(Error::Shape("map does not match the attribute model".into()));
        }
        mask.check_against(map)
    }

    fn attn_weights(&self) -> AttentionWeights<'_> {
        let (p, l) = (&self.params, &self.layout);
        AttentionWeights {
            wq: p.get(l.wq),
            wk: p.get(l.wk),
            wv: p.get(l.wv),
        }
    }

    fn encode(&self, input: &Tokens, w: SegId, b: SegId) -> Tokens {
        let p = &self.params;
        let d = self.config.dim;
        let mut f = project(input, p.get(w), d);
        let (bias, pos) = (p.get(b), p.get(self.layout.pos));
        for t in 0..f.n {
            for i in 0..d {
                f.data[t * d + i] += bias[i] + pos[t * d + i];
            }
        }
        f
    }

    pub fn forward(&self, map: &SemanticMap, mask: &InstanceMask) -> Result<ApmCache> {
        self.check(map, mask)?;
        let layout_in = pool_layout(map, self.config.grid);
        self.forward_pooled(layout_in, mask)
    }

    /// Forward pass with the layout already pooled.
    pub(crate) fn forward_pooled(&self, layout_in: Tokens, mask: &InstanceMask) -> Result<ApmCache> {
        let (c, p, l) = (&self.config, &self.params, &self.layout);
        if mask.count() == 0 {
            return Err(Error::Instance("empty instance mask".into()));
        }
        let mask_in = pool_mask(mask, c.num_categories, c.grid);
        let f_layout = self.encode(&layout_in, l.w_layout, l.b_layout);
        let f_mask = self.encode(&mask_in, l.w_mask, l.b_mask);
        let attn = cross_attention(&f_layout, &f_mask, self.attn_weights())?;
        let d = c.dim;
        let mut pooled = vec![0.0; d];
        for t in 0..attn.out.n {
            for (a, &o) in pooled.iter_mut().zip(attn.out.row(t)) {
                *a += o;
            }
        }
        let inv = 1.0 / attn.out.n as f64;
        pooled.iter_mut().for_each(|v| *v *= inv);
        let z1 = dense(&pooled, p.get(l.w1), p.get(l.b1));
        let h1: Vec<f64> = z1.iter().map(|&z| silu(z)).collect();
        let z2 = dense(&h1, p.get(l.w2), p.get(l.b2));
        let h2: Vec<f64> = z2.iter().map(|&z| silu(z)).collect();
        let s_raw = dense(&h2, p.get(l.w_s), p.get(l.b_s))[0];
        let p_raw = dense(&h2, p.get(l.w_p), p.get(l.b_p))[0];
        let lg = dense(&h2, p.get(l.w_r), p.get(l.b_r));
        Ok(ApmCache {
            layout_in,
            mask_in,
            f_layout,
            f_mask,
            attn,
            pooled,
            z1,
            h1,
            z2,
            h2,
            s_raw,
            p_raw,
            logits: [lg[0], lg[1], lg[2], lg[3]],
        })
    }

    pub fn predict(&self, map: &SemanticMap, mask: &InstanceMask) -> Result<AttributePrediction> {
        Ok(Self::prediction(&self.forward(map, mask)?))
    }

    fn prediction(cache: &ApmCache) -> AttributePrediction {
        let mut best = 0;
        for i in 1..4 {
            if cache.logits[i] > cache.logits[best] {
                best = i;
            }
        }
        AttributePrediction {
            s_y: cache.s_raw.max(MIN_HEIGHT),
            p_y: cache.p_raw,
            logits: cache.logits,
            orientation: Orientation::ALL[best],
        }
    }

    /// Loss on one instance; accumulates parameter gradients into `grad` when given.
    pub fn loss(
        &self,
        map: &SemanticMap,
        mask: &InstanceMask,
        target: &AttributeTarget,
        grad: Option<&mut [f64]>,
    ) -> Result<ApmLoss> {
        self.check(map, mask)?;
        self.loss_pooled(pool_layout(map, self.config.grid), mask, target, grad)
    }

    pub(crate) fn loss_pooled(
        &self,
        layout_in: Tokens,
        mask: &InstanceMask,
        target: &AttributeTarget,
        grad: Option<&mut [f64]>,
    ) -> Result<ApmLoss> {
        let cache = self.forward_pooled(layout_in, mask)?;
        let ds = cache.s_raw - target.s_y;
        let dp = cache.p_raw - target.p_y;
        let mut probs = cache.logits;
        softmax_in_place(&mut probs);
        let r = target.orientation.class() as usize;
        let l_r = -probs[r].max(1e-300).ln();
        let loss = ApmLoss {
            l_s: ds * ds,
            l_p: dp * dp,
            l_r,
            total: ds * ds + dp * dp + l_r,
        };
        if let Some(g) = grad {
            let mut dlogits = probs;
            dlogits[r] -= 1.0;
            self.backward(&cache, 2.0 * ds, 2.0 * dp, &dlogits, g);
        }
        Ok(loss)
    }

    fn backward(&self, cache: &ApmCache, ds: f64, dp: f64, dlogits: &[f64; 4], grad: &mut [f64]) {
        let (c, p, l) = (&self.config, &self.params, &self.layout);
        let d = c.dim;
        let mut dh2 = vec![0.0; c.hidden];
        let heads: [(SegId, SegId, Vec<f64>); 3] = [
            (l.w_s, l.b_s, vec![ds]),
            (l.w_p, l.b_p, vec![dp]),
            (l.w_r, l.b_r, dlogits.to_vec()),
        ];
        for (w, b, dy) in heads {
            let dx = self.dense_back_into(&cache.h2, w, b, &dy, grad);
            for (a, v) in dh2.iter_mut().zip(dx) {
                *a += v;
            }
        }
        let dz2: Vec<f64> = dh2.iter().zip(&cache.z2).map(|(g, &z)| g * silu_grad(z)).collect();
        let dh1 = self.dense_back_into(&cache.h1, l.w2, l.b2, &dz2, grad);
        let dz1: Vec<f64> = dh1.iter().zip(&cache.z1).map(|(g, &z)| g * silu_grad(z)).collect();
        let dpooled = self.dense_back_into(&cache.pooled, l.w1, l.b1, &dz1, grad);

        let n = cache.attn.out.n;
        let inv = 1.0 / n as f64;
        let dout = Tokens {
            n,
            d,
            data: (0..n).flat_map(|_| dpooled.iter().map(|g| g * inv)).collect(),
        };
        let mut dwq = p.view(grad, l.wq).to_vec();
        let mut dwk = p.view(grad, l.wk).to_vec();
        let mut dwv = p.view(grad, l.wv).to_vec();
        let (df_layout, df_mask) = cross_attention_backward(
            &cache.f_layout,
            &cache.f_mask,
            self.attn_weights(),
            &cache.attn,
            &dout,
            &mut dwq,
            &mut dwk,
            &mut dwv,
        );
        p.view_mut(grad, l.wq).copy_from_slice(&dwq);
        p.view_mut(grad, l.wk).copy_from_slice(&dwk);
        p.view_mut(grad, l.wv).copy_from_slice(&dwv);

        for (input, df, w, b) in [
            (&cache.layout_in, &df_layout, l.w_layout, l.b_layout),
            (&cache.mask_in, &df_mask, l.w_mask, l.b_mask),
        ] {
            let mut dw = p.view(grad, w).to_vec();
            project_backward(input, p.get(w), df, &mut dw);
            p.view_mut(grad, w).copy_from_slice(&dw);
            let db = p.view_mut(grad, b);
            for t in 0..df.n {
                for i in 0..d {
                    db[i] += df.data[t * d + i];
                }
            }
            let dpos = p.view_mut(grad, l.pos);
            for (a, v) in dpos.iter_mut().zip(&df.data) {
                *a += v;
            }
        }
    }

    fn dense_back_into(&self, x: &[f64], w: SegId, b: SegId, dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let p = &self.params;
        let mut dw = p.view(grad, w).to_vec();
        let mut db = p.view(grad, b).to_vec();
        let dx = dense_backward(x, p.get(w), dy, &mut dw, &mut db);
        p.view_mut(grad, w).copy_from_slice(&dw);
        p.view_mut(grad, b).copy_from_slice(&db);
        dx
    }
}

impl ApmCache {
    pub fn attention_weights(&self) -> &[f64] {
        &self.attn.weights
    }
}
