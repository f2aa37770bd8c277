use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{one_hot, CategoricalGrid, ConditionKind, ConditionSpec, RoomType, SemanticMap};
use crate::nn::{self, Params, SegId};

/// Anything that estimates x_0 from a noisy map.
pub trait Denoiser {
    fn num_categories(&self) -> usize;

    /// Per-pixel distribution over the clean category given the noisy labels
    /// `x_t` (row-major), the step and the condition.
    fn predict_x0(&self, x_t: &[u8], t: usize, cond: &ConditionSpec) -> Result<CategoricalGrid>;

    /// Rejects condition kinds the model was not trained for.
    fn check_condition(&self, _kind: ConditionKind) -> Result<()> {
        Ok(())
    }
}

/// Which condition kinds a denoiser was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "kind")]
pub enum TrainingMode {
    /// One model for all three kinds, disambiguated by the kind embedding.
    Mixed,
    /// A model dedicated to a single kind.
    Single(ConditionKind),
}

impl TrainingMode {
    pub fn accepts(self, kind: ConditionKind) -> bool {
        match self {
            TrainingMode::Mixed => true,
            TrainingMode::Single(k) => k == kind,
        }
    }

    pub fn check(self, kind: ConditionKind) -> Result<()> {
        if self.accepts(kind) {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                requested: kind.to_string(),
                mode: self.to_string(),
            })
        }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainingMode::Mixed => f.write_str("mixed"),
            TrainingMode::Single(k) => write!(f, "single:{k}"),
        }
    }
}

/// Returns a fixed map's one-hot encoding regardless of input. With the
/// ground-truth map this is the oracle denoiser.
#[derive(Debug, Clone)]
pub struct FixedMapDenoiser {
    target: CategoricalGrid,
}

impl FixedMapDenoiser {
    pub fn new(map: &SemanticMap) -> Result<Self> {
        Ok(Self {
            target: one_hot(map, map.num_categories())?,
        })
    }
}

impl Denoiser for FixedMapDenoiser {
    fn num_categories(&self) -> usize {
        self.target.k()
    }

    fn predict_x0(&self, x_t: &[u8], _t: usize, _cond: &ConditionSpec) -> Result<CategoricalGrid> {
        if x_t.len() != self.target.pixels() {
            return Err(Error::Shape("x_t does not match the fixed map".into()));
        }
        Ok(self.target.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub num_categories: usize,
    pub height: usize,
    pub width: usize,
    /// Embedding width d.
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Neighborhood radius; the window is (2r+1)^2 cells.
    pub radius: usize,
}

impl DenoiserConfig {
    /// d = 16, radius 3, 64 hidden units.
    pub fn desk(num_categories: usize, height: usize, width: usize) -> Self {
        Self {
            num_categories,
            height,
            width,
            embed_dim: 16,
            hidden_dim: 64,
            radius: 3,
        }
    }

    /// Embedding width 64.
    pub fn full(num_categories: usize, height: usize, width: usize) -> Self {
        Self {
            embed_dim: 64,
            hidden_dim: 256,
            ..Self::desk(num_categories, height, width)
        }
    }

    pub fn window(&self) -> usize {
        (2 * self.radius + 1).pow(2)
    }

    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.embed_dim % 2 != 0 {
            return Err(Error::Config("embedding width must be even and positive".into()));
        }
        if self.hidden_dim == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Config("denoiser dims must be positive".into()));
        }
        if self.num_categories < 5 || self.num_categories > 256 {
            return Err(Error::Config(format!("unsupported K = {}", self.num_categories)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Layout {
    cat_emb: SegId,
    mask_emb: SegId,
    room_emb: SegId,
    kind_emb: SegId,
    w_window: SegId,
    w_global: SegId,
    w_cond: SegId,
    pos_bias: SegId,
    b_hidden: SegId,
    w_out: SegId,
    b_out: SegId,
}

/// Per-pixel neighborhood perceptron.
///
/// Each cell is embedded as `category_embedding[x_t] + mask_embedding[mask]`.
/// The hidden layer of a pixel sums a learned projection of every cell in its
/// (2r+1)^2 window, a projection of the map-wide mean cell embedding, a
/// per-pixel position bias and a projection of the conditioning vector
/// `sinusoid(t) + room_embedding + kind_embedding`. A SiLU hidden layer then
/// maps to K logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDenoiser {
    config: DenoiserConfig,
    mode: TrainingMode,
    params: Params,
    layout: Layout,
}

/// Activations kept for the backward pass.
pub struct ForwardCache {
    x_t: Vec<u8>,
    mask: Vec<u8>,
    room: usize,
    kind: usize,
    cond_vec: Vec<f64>,
    mean_feat: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

const MASK_CLASSES: usize = 4;
const KIND_CLASSES: usize = 3;

impl ReferenceDenoiser {
    pub fn new(config: DenoiserConfig, mode: TrainingMode, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, d, h) = (config.num_categories, config.embed_dim, config.hidden_dim);
        let n_win = config.window();
        let mut p = Params::new();
        let emb_bound = 1.0;
        let layout = Layout {
            cat_emb: p.add_uniform("category_embedding", &[k, d], emb_bound, &mut rng),
            mask_emb: p.add_uniform("mask_embedding", &[MASK_CLASSES, d], emb_bound, &mut rng),
            room_emb: p.add_uniform("room_embedding", &[RoomType::COUNT, d], emb_bound, &mut rng),
            kind_emb: p.add_uniform("kind_embedding", &[KIND_CLASSES, d], emb_bound, &mut rng),
            w_window: p.add_uniform(
                "window_weights",
                &[n_win, h, d],
                (3.0 / (n_win * d) as f64).sqrt(),
                &mut rng,
            ),
            w_global: p.add_uniform("global_weights", &[h, d], (3.0 / d as f64).sqrt(), &mut rng),
            w_cond: p.add_uniform("cond_weights", &[h, d], (3.0 / d as f64).sqrt(), &mut rng),
            pos_bias: p.add_zeros("position_bias", &[config.height * config.width, h]),
            b_hidden: p.add_zeros("hidden_bias", &[h]),
            w_out: p.add_uniform("out_weights", &[k, h], (3.0 / h as f64).sqrt(), &mut rng),
            b_out: p.add_zeros("out_bias", &[k]),
        };
        Ok(Self {
            config,
            mode,
            params: p,
            layout,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn mode(&self) -> TrainingMode {
        self.mode
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn check_inputs(&self, x_t: &[u8], cond: &ConditionSpec) -> Result<()> {
        let c = &self.config;
        if x_t.len() != c.height * c.width {
            return Err(Error::Shape(format!(
                "x_t has {} pixels, model expects {}x{}",
                x_t.len(),
                c.height,
                c.width
            )));
        }
        if cond.mask().height() != c.height || cond.mask().width() != c.width {
            return Err(Error::Shape("condition mask size mismatch".into()));
        }
        if let Some(bad) = x_t.iter().find(|&&v| v as usize >= c.num_categories) {
            return Err(Error::Category(format!("x_t label {bad} >= K")));
        }
        Ok(())
    }

    /// Window offsets (dr, dc) in row-major order.
    fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.config.radius as isize;
        (-r..=r).flat_map(|dr| (-r..=r).map(move |dc| (dr, dc))).collect()
    }

    /// Full forward pass keeping activations for [`Self::backward`].
    pub fn forward(&self, x_t: &[u8], t: usize, cond: &ConditionSpec) -> Result<ForwardCache> {
        self.check_inputs(x_t, cond)?;
        let c = &self.config;
        let (k, d, h) = (c.num_categories, c.embed_dim, c.hidden_dim);
        let (rows, cols) = (c.height, c.width);
        let n = rows * cols;
        let p = &self.params;
        let l = &self.layout;
        let cat_emb = p.get(l.cat_emb);
        let mask_emb = p.get(l.mask_emb);
        let mask = cond.mask().cells();

        // conditioning vector
        let room = cond.room_type().index();
        let kind = cond.kind().index();
        let mut cond_vec = nn::sinusoidal_embedding(t as f64, d);
        let room_emb = &p.get(l.room_emb)[room * d..(room + 1) * d];
        let kind_emb = &p.get(l.kind_emb)[kind * d..(kind + 1) * d];
        for i in 0..d {
            cond_vec[i] += room_emb[i] + kind_emb[i];
        }

        // map-wide mean cell embedding, from category and mask histograms
        let mut cat_count = vec![0usize; k];
        let mut mask_count = [0usize; MASK_CLASSES];
        for (&x, &a) in x_t.iter().zip(mask) {
            cat_count[x as usize] += 1;
            mask_count[a as usize] += 1;
        }
        let mut mean_feat = vec![0.0; d];
        for (cat, &cnt) in cat_count.iter().enumerate() {
            if cnt > 0 {
                let w = cnt as f64 / n as f64;
                for i in 0..d {
                    mean_feat[i] += w * cat_emb[cat * d + i];
                }
            }
        }
        for (a, &cnt) in mask_count.iter().enumerate() {
            if cnt > 0 {
                let w = cnt as f64 / n as f64;
                for i in 0..d {
                    mean_feat[i] += w * mask_emb[a * d + i];
                }
            }
        }

        // shared pre-activation: bias + W_cond g + W_global m
        let w_cond = p.get(l.w_cond);
        let w_global = p.get(l.w_global);
        let b_hidden = p.get(l.b_hidden);
        let mut base = b_hidden.to_vec();
        for j in 0..h {
            let mut acc = 0.0;
            for i in 0..d {
                acc += w_cond[j * d + i] * cond_vec[i] + w_global[j * d + i] * mean_feat[i];
            }
            base[j] += acc;
        }

        // per-offset lookup tables: window weights applied to each embedding row
        let (cat_tab, mask_tab) = self.window_tables();

        let offsets = self.offsets();
        let pos_bias = p.get(l.pos_bias);
        let mut pre = vec![0.0; n * h];
        for r in 0..rows {
            for col in 0..cols {
                let px = r * cols + col;
                let out = &mut pre[px * h..(px + 1) * h];
                out.copy_from_slice(&base);
                let pb = &pos_bias[px * h..(px + 1) * h];
                for j in 0..h {
                    out[j] += pb[j];
                }
                for (o, &(dr, dc)) in offsets.iter().enumerate() {
                    let (rr, cc) = (r as isize + dr, col as isize + dc);
                    if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                        continue;
                    }
                    let q = rr as usize * cols + cc as usize;
                    let ct = &cat_tab[(o * k + x_t[q] as usize) * h..][..h];
                    let mt = &mask_tab[(o * MASK_CLASSES + mask[q] as usize) * h..][..h];
                    for j in 0..h {
                        out[j] += ct[j] + mt[j];
                    }
                }
            }
        }

        let hidden: Vec<f64> = pre.iter().map(|&v| nn::silu(v)).collect();
        let w_out = p.get(l.w_out);
        let b_out = p.get(l.b_out);
        let mut probs = vec![0.0; n * k];
        for px in 0..n {
            let hv = &hidden[px * h..(px + 1) * h];
            let logits = &mut probs[px * k..(px + 1) * k];
            for (cat, lg) in logits.iter_mut().enumerate() {
                let w = &w_out[cat * h..(cat + 1) * h];
                *lg = b_out[cat] + w.iter().zip(hv).map(|(a, b)| a * b).sum::<f64>();
            }
            nn::softmax_in_place(logits);
        }

        Ok(ForwardCache {
            x_t: x_t.to_vec(),
            mask: mask.to_vec(),
            room,
            kind,
            cond_vec,
            mean_feat,
            pre,
            hidden,
            probs,
        })
    }

    /// `cat_tab[o][k][j] = sum_i W[o][j][i] cat_emb[k][i]`, and likewise for masks.
    fn window_tables(&self) -> (Vec<f64>, Vec<f64>) {
        let c = &self.config;
        let (k, d, h) = (c.num_categories, c.embed_dim, c.hidden_dim);
        let n_win = c.window();
        let p = &self.params;
        let w = p.get(self.layout.w_window);
        let cat_emb = p.get(self.layout.cat_emb);
        let mask_emb = p.get(self.layout.mask_emb);
        let mut cat_tab = vec![0.0; n_win * k * h];
        let mut mask_tab = vec![0.0; n_win * MASK_CLASSES * h];
        for o in 0..n_win {
            let wo = &w[o * h * d..(o + 1) * h * d];
            for (rows, emb, tab) in [
                (k, cat_emb, &mut cat_tab[o * k * h..(o + 1) * k * h]),
                (MASK_CLASSES, mask_emb, &mut mask_tab[o * MASK_CLASSES * h..(o + 1) * MASK_CLASSES * h]),
            ] {
                for e in 0..rows {
                    let ev = &emb[e * d..(e + 1) * d];
                    for j in 0..h {
                        let wj = &wo[j * d..(j + 1) * d];
                        tab[e * h + j] = wj.iter().zip(ev).map(|(a, b)| a * b).sum();
                    }
                }
            }
        }
        (cat_tab, mask_tab)
    }

    /// Accumulates into `grad` the parameter gradient given `dprobs`, the
    /// gradient of the loss with respect to the output probabilities.
    pub fn backward(&self, cache: &ForwardCache, dprobs: &[f64], grad: &mut [f64]) {
        let c = &self.config;
        let (k, d, h) = (c.num_categories, c.embed_dim, c.hidden_dim);
        let (rows, cols) = (c.height, c.width);
        let n = rows * cols;
        let n_win = c.window();
        let p = &self.params;
        let l = self.layout;
        let w_out = p.get(l.w_out);

        // output layer and hidden activation
        let mut dpre = vec![0.0; n * h];
        let mut dlogits = vec![0.0; k];
        {
            let mut g_wout = vec![0.0; k * h];
            let mut g_bout = vec![0.0; k];
            for px in 0..n {
                nn::softmax_backward(
                    &cache.probs[px * k..(px + 1) * k],
                    &dprobs[px * k..(px + 1) * k],
                    &mut dlogits,
                );
                let hv = &cache.hidden[px * h..(px + 1) * h];
                let dp = &mut dpre[px * h..(px + 1) * h];
                for (cat, &dl) in dlogits.iter().enumerate() {
                    if dl == 0.0 {
                        continue;
                    }
                    g_bout[cat] += dl;
                    let w = &w_out[cat * h..(cat + 1) * h];
                    let gw = &mut g_wout[cat * h..(cat + 1) * h];
                    for j in 0..h {
                        gw[j] += dl * hv[j];
                        dp[j] += dl * w[j];
                    }
                }
                let pre = &cache.pre[px * h..(px + 1) * h];
                for j in 0..h {
                    dp[j] *= nn::silu_grad(pre[j]);
                }
            }
            add_into(p.view_mut(grad, l.w_out), &g_wout);
            add_into(p.view_mut(grad, l.b_out), &g_bout);
        }

        // position bias and shared base
        let mut dbase = vec![0.0; h];
        {
            let gpos = p.view_mut(grad, l.pos_bias);
            for px in 0..n {
                let dp = &dpre[px * h..(px + 1) * h];
                for j in 0..h {
                    gpos[px * h + j] += dp[j];
                    dbase[j] += dp[j];
                }
            }
        }
        add_into(p.view_mut(grad, l.b_hidden), &dbase);

        // conditioning vector and global mean
        let w_cond = p.get(l.w_cond);
        let w_global = p.get(l.w_global);
        let mut dcond = vec![0.0; d];
        let mut dmean = vec![0.0; d];
        {
            let gwc = p.view_mut(grad, l.w_cond);
            for j in 0..h {
                for i in 0..d {
                    gwc[j * d + i] += dbase[j] * cache.cond_vec[i];
                    dcond[i] += dbase[j] * w_cond[j * d + i];
                }
            }
            let gwg = p.view_mut(grad, l.w_global);
            for j in 0..h {
                for i in 0..d {
                    gwg[j * d + i] += dbase[j] * cache.mean_feat[i];
                    dmean[i] += dbase[j] * w_global[j * d + i];
                }
            }
        }
        add_into(&mut p.view_mut(grad, l.room_emb)[cache.room * d..(cache.room + 1) * d], &dcond);
        add_into(&mut p.view_mut(grad, l.kind_emb)[cache.kind * d..(cache.kind + 1) * d], &dcond);

        // window tables
        let offsets = self.offsets();
        let mut dcat_tab = vec![0.0; n_win * k * h];
        let mut dmask_tab = vec![0.0; n_win * MASK_CLASSES * h];
        for r in 0..rows {
            for col in 0..cols {
                let px = r * cols + col;
                let dp = &dpre[px * h..(px + 1) * h];
                for (o, &(dr, dc)) in offsets.iter().enumerate() {
                    let (rr, cc) = (r as isize + dr, col as isize + dc);
                    if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                        continue;
                    }
                    let q = rr as usize * cols + cc as usize;
                    let ct = &mut dcat_tab[(o * k + cache.x_t[q] as usize) * h..][..h];
                    for j in 0..h {
                        ct[j] += dp[j];
                    }
                    let mt = &mut dmask_tab[(o * MASK_CLASSES + cache.mask[q] as usize) * h..][..h];
                    for j in 0..h {
                        mt[j] += dp[j];
                    }
                }
            }
        }

        let w = p.get(l.w_window);
        let cat_emb = p.get(l.cat_emb);
        let mask_emb = p.get(l.mask_emb);
        let mut g_cat = vec![0.0; k * d];
        let mut g_mask = vec![0.0; MASK_CLASSES * d];
        {
            let gw = p.view_mut(grad, l.w_window);
            for o in 0..n_win {
                let wo = &w[o * h * d..(o + 1) * h * d];
                let gwo = &mut gw[o * h * d..(o + 1) * h * d];
                for (rows_e, emb, dtab, gemb) in [
                    (k, cat_emb, &dcat_tab[o * k * h..(o + 1) * k * h], &mut g_cat),
                    (
                        MASK_CLASSES,
                        mask_emb,
                        &dmask_tab[o * MASK_CLASSES * h..(o + 1) * MASK_CLASSES * h],
                        &mut g_mask,
                    ),
                ] {
                    for e in 0..rows_e {
                        let dt = &dtab[e * h..(e + 1) * h];
                        if dt.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        let ev = &emb[e * d..(e + 1) * d];
                        let ge = &mut gemb[e * d..(e + 1) * d];
                        for j in 0..h {
                            let dtj = dt[j];
                            let wj = &wo[j * d..(j + 1) * d];
                            let gwj = &mut gwo[j * d..(j + 1) * d];
                            for i in 0..d {
                                gwj[i] += dtj * ev[i];
                                ge[i] += dtj * wj[i];
                            }
                        }
                    }
                }
            }
        }

        // mean feature contributions
        let mut cat_count = vec![0usize; k];
        let mut mask_count = [0usize; MASK_CLASSES];
        for (&x, &a) in cache.x_t.iter().zip(&cache.mask) {
            cat_count[x as usize] += 1;
            mask_count[a as usize] += 1;
        }
        for (cat, &cnt) in cat_count.iter().enumerate() {
            let wgt = cnt as f64 / n as f64;
            for i in 0..d {
                g_cat[cat * d + i] += wgt * dmean[i];
            }
        }
        for (a, &cnt) in mask_count.iter().enumerate() {
            let wgt = cnt as f64 / n as f64;
            for i in 0..d {
                g_mask[a * d + i] += wgt * dmean[i];
            }
        }
        add_into(p.view_mut(grad, l.cat_emb), &g_cat);
        add_into(p.view_mut(grad, l.mask_emb), &g_mask);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

impl Denoiser for ReferenceDenoiser {
    fn num_categories(&self) -> usize {
        self.config.num_categories
    }

    fn predict_x0(&self, x_t: &[u8], t: usize, cond: &ConditionSpec) -> Result<CategoricalGrid> {
        let cache = self.forward(x_t, t, cond)?;
        Ok(CategoricalGrid::from_raw(
            self.config.height,
            self.config.width,
            self.config.num_categories,
            cache.probs,
        ))
    }

    fn check_condition(&self, kind: ConditionKind) -> Result<()> {
        self.mode.check(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ArchMask;
    use rand::Rng;

    fn tiny() -> ReferenceDenoiser {
        let cfg = DenoiserConfig {
            num_categories: 6,
            height: 5,
            width: 4,
            embed_dim: 4,
            hidden_dim: 5,
            radius: 1,
        };
        ReferenceDenoiser::new(cfg, TrainingMode::Mixed, 11).unwrap()
    }

    #[test]
    fn output_is_a_distribution_and_deterministic() {
        let m = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<u8> = (0..20).map(|_| rng.gen_range(0..6)).collect();
        let cond = ConditionSpec::unconditional(5, 4, RoomType::Bedroom);
        let a = m.predict_x0(&x, 3, &cond).unwrap();
        let b = m.predict_x0(&x, 3, &cond).unwrap();
        assert_eq!(a, b);
        assert!(CategoricalGrid::new(5, 4, 6, a.probs().to_vec()).is_ok());
    }

    #[test]
    fn shape_errors() {
        let m = tiny();
        let cond = ConditionSpec::unconditional(5, 4, RoomType::Bedroom);
        assert!(m.predict_x0(&[0; 19], 1, &cond).is_err());
        let wrong = ConditionSpec::unconditional(4, 4, RoomType::Bedroom);
        assert!(m.predict_x0(&[0; 20], 1, &wrong).is_err());
        assert!(m.predict_x0(&[9; 20], 1, &cond).is_err());
    }

    #[test]
    fn single_mode_refuses_other_kinds() {
        let cfg = tiny().config;
        let m = ReferenceDenoiser::new(cfg, TrainingMode::Single(ConditionKind::Arch), 0).unwrap();
        assert!(m.check_condition(ConditionKind::Arch).is_ok());
        assert!(matches!(
            m.check_condition(ConditionKind::Floor),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn fixed_map_denoiser_returns_one_hot() {
        let map = SemanticMap::new(2, 2, 1.0, 6, vec![0, 1, 4, 5]).unwrap();
        let o = FixedMapDenoiser::new(&map).unwrap();
        let cond = ConditionSpec::derive(
            ConditionKind::Arch,
            &ArchMask::from_map(&map),
            RoomType::Bedroom,
        )
        .unwrap();
        let g = o.predict_x0(&[3, 3, 3, 3], 7, &cond).unwrap();
        assert_eq!(g.argmax(1.0).unwrap(), map);
    }
}
