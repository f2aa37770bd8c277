//! Instance extraction: 4-connected components per object category, filtered
//! by a per-category minimum share of the room.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::io::{read_json, write_json};
use crate::layout::{SceneLayout, SemanticMap, FIRST_OBJECT};

pub const DEFAULT_THRESHOLD: f64 = 0.001;
pub const REPORT_VERSION: u32 = 1;

/// Labels the 4-connected regions of the cells selected by `member`.
///
/// Two-pass union-find. Regions come back as sorted pixel index lists, ordered
/// by (min row, min col) of each region.
pub fn label_regions<F: Fn(usize) -> bool>(height: usize, width: usize, member: F) -> Vec<Vec<usize>> {
    let n = height * width;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if !member(i) {
                continue;
            }
            if c > 0 && member(i - 1) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, i - 1));
                parent[a.max(b)] = a.min(b);
            }
            if r > 0 && member(i - width) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, i - width));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        if member(i) {
            let root = find(&mut parent, i);
            by_root.entry(root).or_default().push(i);
        }
    }
    let mut regions: Vec<Vec<usize>> = by_root.into_values().collect();
    regions.sort_by_key(|px| {
        let min_row = px[0] / width;
        let min_col = px.iter().map(|&p| p % width).min().unwrap_or(0);
        (min_row, min_col, px[0])
    });
    regions
}

/// Binary mask of one instance, stored as sorted row-major pixel indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMask {
    height: usize,
    width: usize,
    category: u8,
    pixels: Vec<usize>,
}

impl InstanceMask {
    pub fn new(height: usize, width: usize, category: u8, mut pixels: Vec<usize>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Instance("instance mask has no pixels".into()));
        }
        pixels.sort_unstable();
        pixels.dedup();
        if pixels.last().is_some_and(|&p| p >= height * width) {
            return Err(Error::Instance("instance pixel outside the grid".into()));
        }
        Ok(Self {
            height,
            width,
            category,
            pixels,
        })
    }

    /// Checks that every pixel carries the mask's category in `map`.
    pub fn check_against(&self, map: &SemanticMap) -> Result<()> {
        if map.height() != self.height || map.width() != self.width {
            return Err(Error::Shape("instance mask and map differ in size".into()));
        }
        if self.pixels.iter().any(|&p| map.cells()[p] != self.category) {
            return Err(Error::Instance(format!(
                "mask pixels are not all category {}",
                self.category
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn category(&self) -> u8 {
        self.category
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn count(&self) -> usize {
        self.pixels.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.pixels.binary_search(&index).is_ok()
    }

    pub fn to_grid(&self) -> Vec<u8> {
        let mut g = vec![0u8; self.height * self.width];
        for &p in &self.pixels {
            g[p] = 1;
        }
        g
    }

    /// Inclusive pixel bounding box (min_row, min_col, max_row, max_col).
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        let w = self.width;
        let min_row = self.pixels[0] / w;
        let max_row = self.pixels[self.pixels.len() - 1] / w;
        let (mut min_col, mut max_col) = (usize::MAX, 0);
        for &p in &self.pixels {
            min_col = min_col.min(p % w);
            max_col = max_col.max(p % w);
        }
        (min_row, min_col, max_row, max_col)
    }

    /// Mean pixel-center position in fractional (row, col).
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (mut r, mut c) = (0.0, 0.0);
        for &p in &self.pixels {
            r += (p / self.width) as f64 + 0.5;
            c += (p % self.width) as f64 + 0.5;
        }
        (r / n, c / n)
    }

    /// Runs of (start, length) over row-major indices.
    pub fn run_lengths(&self) -> Vec<[usize; 2]> {
        let mut runs: Vec<[usize; 2]> = Vec::new();
        for &p in &self.pixels {
            match runs.last_mut() {
                Some(run) if run[0] + run[1] == p => run[1] += 1,
                _ => runs.push([p, 1]),
            }
        }
        runs
    }

    pub fn from_run_lengths(height: usize, width: usize, category: u8, runs: &[[usize; 2]]) -> Result<Self> {
        let pixels = runs.iter().flat_map(|&[s, l]| s..s + l).collect();
        Self::new(height, width, category, pixels)
    }
}

/// Maximal 4-connected regions of one object category.
pub fn connected_components(map: &SemanticMap, category: u8) -> Result<Vec<InstanceMask>> {
    if category < FIRST_OBJECT {
        return Err(Error::Category(format!("category {category} is not an object")));
    }
    let cells = map.cells();
    label_regions(map.height(), map.width(), |i| cells[i] == category)
        .into_iter()
        .map(|px| InstanceMask::new(map.height(), map.width(), category, px))
        .collect()
}

/// Minimum instance-to-room pixel ratio per object category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub ratios: BTreeMap<u8, f64>,
    pub fallback: f64,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self {
            ratios: BTreeMap::new(),
            fallback: DEFAULT_THRESHOLD,
        }
    }
}

impl ThresholdTable {
    pub fn get(&self, category: u8) -> f64 {
        self.ratios.get(&category).copied().unwrap_or(self.fallback)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let t: Self = read_json(path)?;
        if t.ratios.values().chain([&t.fallback]).any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::Data("threshold ratios must lie in (0, 1]".into()));
        }
        Ok(t)
    }
}

/// Per-category minimum over all ground-truth instances of
/// (instance pixels / room pixels), where an instance is a connected region.
pub fn compute_thresholds(dataset: &[SceneLayout]) -> Result<ThresholdTable> {
    if dataset.is_empty() {
        return Err(Error::Data("no scenes to compute thresholds from".into()));
    }
    let mut table = ThresholdTable::default();
    for scene in dataset {
        let map = scene.map();
        let room = map.room_pixels();
        if room == 0 {
            continue;
        }
        for cat in FIRST_OBJECT..map.num_categories() as u8 {
            for comp in connected_components(map, cat)? {
                let ratio = comp.count() as f64 / room as f64;
                let e = table.ratios.entry(cat).or_insert(ratio);
                *e = e.min(ratio);
            }
        }
    }
    Ok(table)
}

/// A kept component with its 2D pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedInstance {
    pub mask: InstanceMask,
    /// Bounding-box center in world (x, z) meters.
    pub center: [f64; 2],
    /// Bounding-box extents along world (x, z) in meters.
    pub footprint: [f64; 2],
}

impl ExtractedInstance {
    pub fn from_mask(mask: InstanceMask, scale: f64) -> Self {
        let (r0, c0, r1, c1) = mask.bbox();
        let center = [
            (c0 + c1 + 1) as f64 * 0.5 * scale,
            (r0 + r1 + 1) as f64 * 0.5 * scale,
        ];
        let footprint = [(c1 - c0 + 1) as f64 * scale, (r1 - r0 + 1) as f64 * scale];
        Self {
            mask,
            center,
            footprint,
        }
    }

    pub fn category(&self) -> u8 {
        self.mask.category()
    }
}

/// Components of every object category whose room share meets its threshold.
///
/// Output is ordered by category, then by component order.
pub fn extract_instances(map: &SemanticMap, thresholds: &ThresholdTable) -> Result<Vec<ExtractedInstance>> {
    let room = map.room_pixels();
    let mut out = Vec::new();
    if room == 0 {
        return Ok(out);
    }
    for cat in FIRST_OBJECT..map.num_categories() as u8 {
        let min_ratio = thresholds.get(cat);
        for comp in connected_components(map, cat)? {
            if (comp.count() as f64 / room as f64) >= min_ratio {
                out.push(ExtractedInstance::from_mask(comp, map.scale()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub category: u8,
    pub pixels: usize,
    pub runs: Vec<[usize; 2]>,
    pub center: [f64; 2],
    pub footprint: [f64; 2],
}

/// Extraction output on disk: masks as run-length encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub scale: f64,
    pub instances: Vec<ReportEntry>,
}

impl ExtractionReport {
    pub fn new(map: &SemanticMap, instances: &[ExtractedInstance]) -> Self {
        Self {
            version: REPORT_VERSION,
            height: map.height(),
            width: map.width(),
            scale: map.scale(),
            instances: instances
                .iter()
                .map(|e| ReportEntry {
                    category: e.category(),
                    pixels: e.mask.count(),
                    runs: e.mask.run_lengths(),
                    center: e.center,
                    footprint: e.footprint,
                })
                .collect(),
        }
    }

    pub fn instances(&self) -> Result<Vec<ExtractedInstance>> {
        self.instances
            .iter()
            .map(|e| {
                let mask = InstanceMask::from_run_lengths(self.height, self.width, e.category, &e.runs)?;
                Ok(ExtractedInstance::from_mask(mask, self.scale))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r: Self = read_json(path)?;
        if r.version != REPORT_VERSION {
            return Err(Error::Data(format!("unsupported extraction report version {}", r.version)));
        }
        Ok(r)
    }
}
