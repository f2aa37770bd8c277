use serde::{Deserialize, Serialize};

use super::palette::{DOOR, FLOOR, VOID, WINDOW};
use crate::error::{Error, Result};

/// Grid resolution and physical pixel size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// Meters per pixel.
    pub scale: f64,
}

impl GridSpec {
    /// 32x32 at 0.25 m, an 8 m canvas; the preset the end-to-end runs use.
    pub const DESK: GridSpec = GridSpec {
        height: 32,
        width: 32,
        scale: 0.25,
    };
    /// 64x64 at 0.125 m, the same 8 m canvas at twice the resolution.
    pub const DESK64: GridSpec = GridSpec {
        height: 64,
        width: 64,
        scale: 0.125,
    };
    /// 1200x1200 at 0.01 m, a 12 m canvas.
    pub const FULL: GridSpec = GridSpec {
        height: 1200,
        width: 1200,
        scale: 0.01,
    };

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::DESK),
            "desk64" => Ok(Self::DESK64),
            "full" | "paper" => Ok(Self::FULL),
            other => Err(Error::Config(format!("unknown grid preset '{other}'"))),
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Physical extent (width_m, height_m).
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.scale,
            self.height as f64 * self.scale,
        )
    }
}

/// Top-down grid of category indices at a fixed meters-per-pixel scale.
///
/// Rows run along world +z, columns along world +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    height: usize,
    width: usize,
    scale: f64,
    num_categories: usize,
    cells: Vec<u8>,
}

impl SemanticMap {
    pub fn new(
        height: usize,
        width: usize,
        scale: f64,
        num_categories: usize,
        cells: Vec<u8>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "map dims must be positive, got {height}x{width}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Dimension(format!("scale must be positive, got {scale}")));
        }
        if cells.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} cells for a {height}x{width} map",
                cells.len()
            )));
        }
        if num_categories == 0 || num_categories > 256 {
            return Err(Error::Category(format!("invalid K = {num_categories}")));
        }
        if let Some(bad) = cells.iter().find(|&&c| c as usize >= num_categories) {
            return Err(Error::Category(format!(
                "cell value {bad} outside palette of {num_categories}"
            )));
        }
        Ok(Self {
            height,
            width,
            scale,
            num_categories,
            cells,
        })
    }

    pub fn filled(spec: GridSpec, num_categories: usize, value: u8) -> Result<Self> {
        Self::new(
            spec.height,
            spec.width,
            spec.scale,
            num_categories,
            vec![value; spec.pixels()],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            height: self.height,
            width: self.width,
            scale: self.scale,
        }
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn try_get(&self, row: usize, col: usize) -> Result<u8> {
        self.check_bounds(row, col)?;
        Ok(self.get(row, col))
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) -> Result<()> {
        self.check_bounds(row, col)?;
        if value as usize >= self.num_categories {
            return Err(Error::Category(format!(
                "value {value} outside palette of {}",
                self.num_categories
            )));
        }
        self.cells[row * self.width + col] = value;
        Ok(())
    }

    pub fn check_bounds(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.height || col >= self.width {
            return Err(Error::Index {
                row,
                col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    pub fn count(&self, category: u8) -> usize {
        self.cells.iter().filter(|&&c| c == category).count()
    }

    /// Non-void pixel count.
    pub fn room_pixels(&self) -> usize {
        self.cells.iter().filter(|&&c| c != VOID).count()
    }

    pub fn with_cells(&self, cells: Vec<u8>) -> Result<Self> {
        Self::new(self.height, self.width, self.scale, self.num_categories, cells)
    }
}

/// Conditioning grid over {void, floor, door, window}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchMask {
    height: usize,
    width: usize,
    cells: Vec<u8>,
}

impl ArchMask {
    pub fn new(height: usize, width: usize, cells: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || cells.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} mask cells for {height}x{width}",
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c > WINDOW) {
            return Err(Error::Category(format!("mask value {bad} not in 0..=3")));
        }
        Ok(Self {
            height,
            width,
            cells,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            cells: vec![VOID; height * width],
        }
    }

    /// Architecture of a semantic map: object pixels become floor.
    pub fn from_map(map: &SemanticMap) -> Self {
        let cells = map
            .cells()
            .iter()
            .map(|&c| if c > WINDOW { FLOOR } else { c })
            .collect();
        Self {
            height: map.height(),
            width: map.width(),
            cells,
        }
    }

    /// Binary floor mask: every non-void class collapses to floor.
    pub fn to_floor(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            cells: self
                .cells
                .iter()
                .map(|&c| if c == VOID { VOID } else { FLOOR })
                .collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn is_all_void(&self) -> bool {
        self.cells.iter().all(|&c| c == VOID)
    }

    pub fn is_binary(&self) -> bool {
        self.cells.iter().all(|&c| c == VOID || c == FLOOR)
    }

    pub fn floor_pixels(&self) -> usize {
        self.cells.iter().filter(|&&c| c != VOID).count()
    }

    pub fn has_openings(&self) -> bool {
        self.cells.iter().any(|&c| c == DOOR || c == WINDOW)
    }

    /// View as a semantic map over the four reserved classes.
    pub fn to_map(&self, scale: f64, num_categories: usize) -> Result<SemanticMap> {
        SemanticMap::new(
            self.height,
            self.width,
            scale,
            num_categories,
            self.cells.clone(),
        )
    }
}

/// Per-pixel categorical distributions, stored pixel-major (`pixel * K + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalGrid {
    height: usize,
    width: usize,
    k: usize,
    probs: Vec<f64>,
}

impl CategoricalGrid {
    /// Validates that every pixel is a distribution (sum 1 within 1e-9, entries >= 0).
    pub fn new(height: usize, width: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != height * width * k || k == 0 {
            return Err(Error::Shape(format!(
                "{} probabilities for {height}x{width}x{k}",
                probs.len()
            )));
        }
        for (p, px) in probs.chunks_exact(k).enumerate() {
            let sum: f64 = px.iter().sum();
            if px.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Distribution(format!(
                    "pixel {p} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Self::from_raw(height, width, k, probs))
    }

    pub(crate) fn from_raw(height: usize, width: usize, k: usize, probs: Vec<f64>) -> Self {
        Self {
            height,
            width,
            k,
            probs,
        }
    }

    pub fn uniform(height: usize, width: usize, k: usize) -> Self {
        Self::from_raw(height, width, k, vec![1.0 / k as f64; height * width * k])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.probs[index * self.k..(index + 1) * self.k]
    }

    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        self.pixel(row * self.width + col)
    }

    /// Most probable class per pixel; ties resolve to the smaller index.
    pub fn argmax(&self, scale: f64) -> Result<SemanticMap> {
        let cells = self
            .probs
            .chunks_exact(self.k)
            .map(|px| argmax(px) as u8)
            .collect();
        SemanticMap::new(self.height, self.width, scale, self.k, cells)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-pixel one-hot encoding over `k` classes.
pub fn one_hot(map: &SemanticMap, k: usize) -> Result<CategoricalGrid> {
    if let Some(bad) = map.cells().iter().find(|&&c| c as usize >= k) {
        return Err(Error::Category(format!("cell value {bad} >= K = {k}")));
    }
    let mut probs = vec![0.0; map.cells().len() * k];
    for (p, &c) in map.cells().iter().enumerate() {
        probs[p * k + c as usize] = 1.0;
    }
    Ok(CategoricalGrid::from_raw(map.height(), map.width(), k, probs))
}

/// Centers `map` on a void canvas of `target_h` x `target_w`.
///
/// The offset on each axis is `floor((target - size) / 2)`.
pub fn pad_to_canvas(map: &SemanticMap, target_h: usize, target_w: usize) -> Result<SemanticMap> {
    if target_h < map.height() || target_w < map.width() {
        return Err(Error::Dimension(format!(
            "cannot pad {}x{} into {target_h}x{target_w}",
            map.height(),
            map.width()
        )));
    }
    let (off_r, off_c) = canvas_offset(map.height(), map.width(), target_h, target_w);
    let mut cells = vec![VOID; target_h * target_w];
    for r in 0..map.height() {
        let src = &map.cells()[r * map.width()..(r + 1) * map.width()];
        let start = (r + off_r) * target_w + off_c;
        cells[start..start + map.width()].copy_from_slice(src);
    }
    SemanticMap::new(
        target_h,
        target_w,
        map.scale(),
        map.num_categories(),
        cells,
    )
}

/// Row/column offset `pad_to_canvas` applies.
pub fn canvas_offset(h: usize, w: usize, target_h: usize, target_w: usize) -> (usize, usize) {
    ((target_h - h) / 2, (target_w - w) / 2)
}

/// World coordinates (x, z) of a pixel center.
pub fn pixel_to_world(row: usize, col: usize, map: &SemanticMap) -> Result<(f64, f64)> {
    map.check_bounds(row, col)?;
    Ok((
        (col as f64 + 0.5) * map.scale(),
        (row as f64 + 0.5) * map.scale(),
    ))
}

/// Pixel (row, col) containing world point (x, z).
pub fn world_to_pixel(x: f64, z: f64, map: &SemanticMap) -> Result<(usize, usize)> {
    let col = (x / map.scale()).floor();
    let row = (z / map.scale()).floor();
    if !(col >= 0.0 && row >= 0.0) {
        return Err(Error::Index {
            row: row.max(0.0) as usize,
            col: col.max(0.0) as usize,
            height: map.height(),
            width: map.width(),
        });
    }
    let (row, col) = (row as usize, col as usize);
    map.check_bounds(row, col)?;
    Ok((row, col))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(h: usize, w: usize, cells: Vec<u8>) -> SemanticMap {
        SemanticMap::new(h, w, 0.01, 12, cells).unwrap()
    }

    #[test]
    fn rejects_invalid_maps() {
        assert!(SemanticMap::new(0, 2, 0.1, 5, vec![]).is_err());
        assert!(SemanticMap::new(1, 1, 0.0, 5, vec![0]).is_err());
        assert!(SemanticMap::new(1, 1, 0.1, 5, vec![5]).is_err());
        assert!(SemanticMap::new(1, 2, 0.1, 5, vec![0]).is_err());
    }

    #[test]
    fn pad_identity() {
        let m = map(2, 2, vec![1, 4, 5, 0]);
        assert_eq!(pad_to_canvas(&m, 2, 2).unwrap(), m);
    }

    #[test]
    fn pad_centers_block() {
        let m = map(2, 2, vec![1; 4]);
        let p = pad_to_canvas(&m, 4, 4).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if (1..=2).contains(&r) && (1..=2).contains(&c) {
                    1
                } else {
                    0
                };
                assert_eq!(p.get(r, c), expected, "({r},{c})");
            }
        }
        assert_eq!(p.scale(), 0.01);
    }

    #[test]
    fn pad_odd_margin_floors() {
        let m = map(1, 1, vec![7]);
        let p = pad_to_canvas(&m, 4, 5).unwrap();
        // margins 3 and 4 -> offsets 1 and 2
        assert_eq!(p.get(1, 2), 7);
        assert_eq!(p.count(7), 1);
    }

    #[test]
    fn pad_rejects_smaller_target() {
        let m = map(3, 3, vec![0; 9]);
        assert!(matches!(pad_to_canvas(&m, 2, 3), Err(Error::Dimension(_))));
    }

    #[test]
    fn full_canvas_extent_is_twelve_meters() {
        let (w, h) = GridSpec::FULL.extent();
        assert!((w - 12.0).abs() < 1e-9 && (h - 12.0).abs() < 1e-9);
    }

    #[test]
    fn pixel_centers() {
        let m = map(100, 100, vec![0; 10000]);
        let (x, z) = pixel_to_world(0, 0, &m).unwrap();
        assert!((x - 0.005).abs() < 1e-12 && (z - 0.005).abs() < 1e-12);
        let (x, z) = pixel_to_world(99, 0, &m).unwrap();
        assert!((x - 0.005).abs() < 1e-12 && (z - 0.995).abs() < 1e-12);
        assert!(matches!(
            pixel_to_world(100, 0, &m),
            Err(Error::Index { .. })
        ));
        assert!(world_to_pixel(-0.001, 0.5, &m).is_err());
        assert!(world_to_pixel(0.5, 1.0, &m).is_err());
    }

    #[test]
    fn pixel_world_round_trip_random_cells() {
        let m = SemanticMap::new(97, 131, 0.037, 5, vec![0; 97 * 131]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (r, c) = (rng.gen_range(0..97), rng.gen_range(0..131));
            let (x, z) = pixel_to_world(r, c, &m).unwrap();
            assert_eq!(world_to_pixel(x, z, &m).unwrap(), (r, c));
        }
    }

    #[test]
    fn one_hot_examples() {
        let m = SemanticMap::new(1, 1, 1.0, 4, vec![2]).unwrap();
        assert_eq!(one_hot(&m, 4).unwrap().pixel(0), &[0.0, 0.0, 1.0, 0.0]);
        let void = SemanticMap::new(2, 3, 1.0, 6, vec![0; 6]).unwrap();
        let g = one_hot(&void, 6).unwrap();
        for p in 0..6 {
            assert_eq!(g.pixel(p), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let m = SemanticMap::new(1, 1, 1.0, 12, vec![9]).unwrap();
        assert!(matches!(one_hot(&m, 4), Err(Error::Category(_))));
    }

    #[test]
    fn categorical_grid_validates() {
        assert!(CategoricalGrid::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(CategoricalGrid::new(1, 1, 2, vec![1.5, -0.5]).is_err());
        assert!(CategoricalGrid::new(1, 1, 2, vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn arch_mask_from_map() {
        let m = SemanticMap::new(1, 5, 1.0, 12, vec![0, 1, 2, 3, 7]).unwrap();
        let a = ArchMask::from_map(&m);
        assert_eq!(a.cells(), &[0, 1, 2, 3, 1]);
        assert_eq!(a.to_floor().cells(), &[0, 1, 1, 1, 1]);
        assert!(ArchMask::new(1, 1, vec![4]).is_err());
    }

    proptest! {
        #[test]
        fn one_hot_argmax_round_trip(h in 1usize..8, w in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cells: Vec<u8> = (0..h * w).map(|_| rng.gen_range(0..12)).collect();
            let m = SemanticMap::new(h, w, 0.5, 12, cells).unwrap();
            let back = one_hot(&m, 12).unwrap().argmax(0.5).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn pad_preserves_non_void_multiset(
            h in 1usize..6, w in 1usize..6, dh in 0usize..5, dw in 0usize..5, seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cells: Vec<u8> = (0..h * w).map(|_| rng.gen_range(0..12)).collect();
            let m = SemanticMap::new(h, w, 0.5, 12, cells).unwrap();
            let p = pad_to_canvas(&m, h + dh, w + dw).unwrap();
            for k in 1..12u8 {
                prop_assert_eq!(p.count(k), m.count(k));
            }
        }
    }
}
