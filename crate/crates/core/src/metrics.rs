//! Plausibility and distribution metrics over assembled scenes.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::assembly::polygon::{contains_point, signed_area, winding_number};
use crate::assembly::Scene3D;
use crate::error::{Error, Result};
use crate::extraction::label_regions;
use crate::layout::io::{write_json, write_text};
use crate::layout::{ArchMask, ObjectInstance, RoomType, SemanticMap, FIRST_OBJECT, VOID};

pub const CKL_EPS: f64 = 1e-6;
pub const OOB_TOL: f64 = 1e-6;
pub const COLLISION_TOL: f64 = 1e-9;
pub const NAV_CELL: f64 = 0.1;
pub const NAV_CUTOFF: f64 = 2.0;

/// Object-category counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryHistogram {
    pub counts: BTreeMap<u8, u64>,
}

impl CategoryHistogram {
    pub fn from_categories<I: IntoIterator<Item = u8>>(cats: I) -> Self {
        let mut h = Self::default();
        for c in cats {
            h.add(c, 1);
        }
        h
    }

    pub fn add(&mut self, category: u8, n: u64) {
        *self.counts.entry(category).or_insert(0) += n;
    }

    pub fn merge(&mut self, other: &CategoryHistogram) {
        for (&c, &n) in &other.counts {
            self.add(c, n);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn frequency(&self, category: u8) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.counts.get(&category).copied().unwrap_or(0) as f64 / t as f64
        }
    }
}

/// sum_c p(c) log((p(c) + eps) / (q(c) + eps)) over normalized frequencies.
pub fn ckl(p: &CategoryHistogram, q: &CategoryHistogram) -> Result<f64> {
    if p.total() == 0 && q.total() == 0 {
        return Err(Error::Metric("both histograms are empty".into()));
    }
    let mut sum = 0.0;
    for &c in p.counts.keys() {
        let pc = p.frequency(c);
        if pc > 0.0 {
            sum += pc * ((pc + CKL_EPS) / (q.frequency(c) + CKL_EPS)).ln();
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobResult {
    pub flags: Vec<bool>,
    pub ratio: f64,
    pub scene_flag: bool,
}

fn check_polygon(poly: &[[f64; 2]]) -> Result<()> {
    if poly.len() < 3 || !(signed_area(poly).abs() > 0.0) {
        return Err(Error::Geometry("degenerate floor polygon".into()));
    }
    Ok(())
}

/// An object is out of bounds when any footprint corner lies outside the
/// floor polygon by more than the tolerance.
pub fn object_out_of_bounds(poly: &[[f64; 2]], inst: &ObjectInstance) -> bool {
    inst.footprint_corners()
        .iter()
        .any(|&(x, z)| !contains_point(poly, [x, z], OOB_TOL))
}

pub fn oob(scene: &Scene3D) -> Result<OobResult> {
    let poly = scene.floor();
    check_polygon(poly)?;
    let flags: Vec<bool> = scene
        .instances()?
        .iter()
        .map(|i| object_out_of_bounds(poly, i))
        .collect();
    let n = flags.iter().filter(|&&f| f).count();
    Ok(OobResult {
        ratio: if flags.is_empty() { 0.0 } else { n as f64 / flags.len() as f64 },
        scene_flag: n > 0,
        flags,
    })
}

/// World-axis bounds (min_x, max_x, min_z, max_z) of a footprint.
pub fn footprint_bounds(inst: &ObjectInstance) -> [f64; 4] {
    let (ex, ez) = inst.footprint_extents();
    let (cx, cz) = (inst.position[0], inst.position[2]);
    [cx - ex / 2.0, cx + ex / 2.0, cz - ez / 2.0, cz + ez / 2.0]
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    a1.min(b1) - a0.max(b0)
}

/// Footprint rectangles overlap and vertical intervals overlap, each by more
/// than the tolerance. Orientations are quarter turns, so footprints are
/// axis-aligned and the separating-axis test reduces to interval checks.
pub fn collides(a: &ObjectInstance, b: &ObjectInstance) -> bool {
    let (ra, rb) = (footprint_bounds(a), footprint_bounds(b));
    let (ya, yb) = (a.vertical_span(), b.vertical_span());
    overlap(ra[0], ra[1], rb[0], rb[1]) > COLLISION_TOL
        && overlap(ra[2], ra[3], rb[2], rb[3]) > COLLISION_TOL
        && overlap(ya.0, ya.1, yb.0, yb.1) > COLLISION_TOL
}

/// Per-object flag: involved in at least one collision.
pub fn collision_flags(instances: &[ObjectInstance]) -> Vec<bool> {
    let mut flags = vec![false; instances.len()];
    for i in 0..instances.len() {
        for j in i + 1..instances.len() {
            if collides(&instances[i], &instances[j]) {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    flags
}

/// Percentage of objects involved in at least one collision.
pub fn collision_rate(scene: &Scene3D) -> Result<f64> {
    let flags = collision_flags(&scene.instances()?);
    if flags.is_empty() {
        return Ok(0.0);
    }
    Ok(100.0 * flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavResult {
    pub percent: f64,
    pub floor_cells: usize,
    pub free_cells: usize,
    pub largest_region: usize,
}

/// Largest 4-connected free region as a percentage of all free floor cells.
///
/// Floor cells are those whose center lies inside the polygon; a cell is
/// blocked when an object with bottom below `cutoff` covers its center.
pub fn navigability(scene: &Scene3D, cell: f64, cutoff: f64) -> Result<NavResult> {
    let poly = scene.floor();
    check_polygon(poly)?;
    if !(cell > 0.0) {
        return Err(Error::Config("navigation cell size must be positive".into()));
    }
    let (mut x0, mut x1, mut z0, mut z1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        z0 = z0.min(p[1]);
        z1 = z1.max(p[1]);
    }
    let cols = ((x1 - x0) / cell - 1e-9).ceil().max(1.0) as usize;
    let rows = ((z1 - z0) / cell - 1e-9).ceil().max(1.0) as usize;
    let obstacles: Vec<[f64; 4]> = scene
        .instances()?
        .iter()
        .filter(|i| i.position[1] < cutoff)
        .map(footprint_bounds)
        .collect();
    let mut floor_cells = 0;
    let mut free = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let p = [x0 + (c as f64 + 0.5) * cell, z0 + (r as f64 + 0.5) * cell];
            if winding_number(p, poly) == 0 {
                continue;
            }
            floor_cells += 1;
            let blocked = obstacles
                .iter()
                .any(|b| p[0] >= b[0] && p[0] <= b[1] && p[1] >= b[2] && p[1] <= b[3]);
            free[r * cols + c] = !blocked;
        }
    }
    let free_cells = free.iter().filter(|&&f| f).count();
    let largest_region = label_regions(rows, cols, |i| free[i])
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let percent = if free_cells == 0 {
        warn!("no free floor cells; navigability is 0");
        0.0
    } else {
        100.0 * largest_region as f64 / free_cells as f64
    };
    Ok(NavResult {
        percent,
        floor_cells,
        free_cells,
        largest_region,
    })
}

/// Share of a map's object pixels that fall on void cells of the mask.
pub fn object_pixels_on_void(map: &SemanticMap, mask: &ArchMask) -> Result<f64> {
    if map.height() != mask.height() || map.width() != mask.width() {
        return Err(Error::Shape("map and mask differ in size".into()));
    }
    let (mut objects, mut on_void) = (0usize, 0usize);
    for (&c, &m) in map.cells().iter().zip(mask.cells()) {
        if c >= FIRST_OBJECT {
            objects += 1;
            if m == VOID {
                on_void += 1;
            }
        }
    }
    Ok(if objects == 0 { 0.0 } else { on_void as f64 / objects as f64 })
}

/// A scene to evaluate with its room type.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalScene {
    pub scene: Scene3D,
    pub room_type: RoomType,
}

/// One table row; percentages in [0, 100] and CKL reported x100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: String,
    pub scenes: usize,
    pub ckl_x100: f64,
    pub oob_scene: f64,
    pub oob_object: f64,
    pub col: f64,
    pub nav: f64,
    pub mean_objects: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// One row per room type present, then the overall row.
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn overall(&self) -> &MetricRow {
        self.rows.last().expect("report has an overall row")
    }

    pub fn row(&self, group: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        write_text(csv_path, &self.to_csv()?)?;
        write_json(json_path, self)
    }
}

/// Metrics per room type, plus an overall row that is the unweighted mean
/// of the room-type rows.
pub fn evaluate_corpus(scenes: &[EvalScene], gt: &BTreeMap<RoomType, CategoryHistogram>) -> Result<MetricReport> {
    if scenes.is_empty() {
        return Err(Error::Metric("no scenes to evaluate".into()));
    }
    let mut rows = Vec::new();
    for rt in RoomType::ALL {
        let group: Vec<&EvalScene> = scenes.iter().filter(|s| s.room_type == rt).collect();
        if group.is_empty() {
            continue;
        }
        let mut generated = CategoryHistogram::default();
        let (mut objects, mut oob_objects, mut oob_scenes, mut colliding) = (0usize, 0usize, 0usize, 0usize);
        let mut nav = 0.0;
        for s in &group {
            let inst = s.scene.instances()?;
            generated.merge(&CategoryHistogram::from_categories(inst.iter().map(|i| i.category)));
            let o = oob(&s.scene)?;
            objects += inst.len();
            oob_objects += o.flags.iter().filter(|&&f| f).count();
            oob_scenes += o.scene_flag as usize;
            colliding += collision_flags(&inst).iter().filter(|&&f| f).count();
            nav += navigability(&s.scene, NAV_CELL, NAV_CUTOFF)?.percent;
        }
        let reference = gt
            .get(&rt)
            .ok_or_else(|| Error::Metric(format!("no reference histogram for {rt}")))?;
        let n = group.len() as f64;
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        rows.push(MetricRow {
            group: rt.name().to_string(),
            scenes: group.len(),
            ckl_x100: 100.0 * ckl(reference, &generated)?,
            oob_scene: pct(oob_scenes, group.len()),
            oob_object: pct(oob_objects, objects),
            col: pct(colliding, objects),
            nav: nav / n,
            mean_objects: objects as f64 / n,
        });
    }
    let m = rows.len() as f64;
    let mean = |f: fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / m;
    let overall = MetricRow {
        group: "overall".into(),
        scenes: scenes.len(),
        ckl_x100: mean(|r| r.ckl_x100),
        oob_scene: mean(|r| r.oob_scene),
        oob_object: mean(|r| r.oob_object),
        col: mean(|r| r.col),
        nav: mean(|r| r.nav),
        mean_objects: mean(|r| r.mean_objects),
    };
    rows.push(overall);
    Ok(MetricReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_room_mesh, Placement, RoomConfig};
    use crate::layout::Orientation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(w: f64, l: f64) -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [w, 0.0], [w, l], [0.0, l]]
    }

    fn place(cat: u8, size: [f64; 3], pos: [f64; 3], r: u8) -> Placement {
        Placement {
            asset_id: format!("a{cat}"),
            category: cat,
            position: pos,
            orientation: Orientation::ALL[r as usize],
            size,
        }
    }

    fn scene(poly: Vec<[f64; 2]>, placements: Vec<Placement>) -> Scene3D {
        Scene3D {
            room: build_room_mesh(&poly, &[], RoomConfig::default()).unwrap(),
            placements,
            failures: vec![],
        }
    }

    #[test]
    fn ckl_values() {
        let p = CategoryHistogram::from_categories([4, 4, 5]);
        assert_eq!(ckl(&p, &p).unwrap(), 0.0);
        let a = CategoryHistogram::from_categories([4]);
        let b = CategoryHistogram::from_categories([5]);
        let v = ckl(&a, &b).unwrap();
        assert!((v - ((1.0 + 1e-6) / 1e-6f64).ln()).abs() < 1e-12);
        assert!((v - 13.8155).abs() < 1e-4);
        assert!(ckl(&CategoryHistogram::default(), &CategoryHistogram::default()).is_err());
    }

    #[test]
    fn ckl_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p: Vec<u64> = (0..8).map(|_| rng.gen_range(0..20)).collect();
            let q: Vec<u64> = (0..8).map(|_| rng.gen_range(0..20)).collect();
            let mut hp = CategoryHistogram::default();
            let mut hq = CategoryHistogram::default();
            for c in 0..8 {
                hp.add(4 + c as u8, p[c]);
                hq.add(4 + c as u8, q[c]);
            }
            let (sp, sq) = (p.iter().sum::<u64>() as f64, q.iter().sum::<u64>() as f64);
            let mut expect = 0.0;
            for c in 0..8 {
                let (pc, qc) = (p[c] as f64 / sp, q[c] as f64 / sq);
                if p[c] > 0 {
                    expect += pc * (pc + 1e-6).ln() - pc * (qc + 1e-6).ln();
                }
            }
            assert!((ckl(&hp, &hq).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn oob_cases() {
        let inside = place(4, [1.0, 1.0, 1.0], [1.0, 0.0, 1.0], 0);
        let past = place(5, [1.0, 1.0, 1.0], [3.6, 0.0, 1.0], 0);
        let touching = place(6, [1.0, 1.0, 1.0], [3.5, 0.0, 0.5], 1);
        let r = oob(&scene(rect(4.0, 3.0), vec![inside, past, touching])).unwrap();
        assert_eq!(r.flags, vec![false, true, false]);
        assert!((r.ratio - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.scene_flag);
    }

    #[test]
    fn collision_fixtures() {
        let a = place(4, [1.0, 1.0, 1.0], [1.0, 0.0, 1.0], 0);
        let b = place(5, [1.0, 1.0, 1.0], [1.5, 0.0, 1.5], 0);
        let c = place(6, [1.0, 1.0, 1.0], [4.0, 0.0, 4.0], 0);
        assert!((collision_rate(&scene(rect(6.0, 6.0), vec![a.clone(), b, c.clone()])).unwrap() - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(collision_rate(&scene(rect(6.0, 6.0), vec![a.clone(), c])).unwrap(), 0.0);
        // shared boundary is not a collision
        let d = place(7, [1.0, 1.0, 1.0], [2.0, 0.0, 1.0], 0);
        assert_eq!(collision_rate(&scene(rect(6.0, 6.0), vec![a, d])).unwrap(), 0.0);
        // lamp hanging above a table
        let table = place(8, [1.2, 0.75, 0.8], [2.0, 0.0, 2.0], 0);
        let lamp = place(7, [0.4, 0.4, 0.4], [2.0, 2.2, 2.0], 0);
        assert_eq!(collision_rate(&scene(rect(6.0, 6.0), vec![table, lamp])).unwrap(), 0.0);
    }

    fn sampled_overlap(a: &ObjectInstance, b: &ObjectInstance) -> bool {
        // dense grid over a's footprint and height; any sample strictly inside b
        let ra = footprint_bounds(a);
        let rb = footprint_bounds(b);
        let (ya, yb) = (a.vertical_span(), b.vertical_span());
        let steps = 24;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let x = ra[0] + (ra[1] - ra[0]) * (i as f64 + 0.5) / (steps as f64 + 1.0);
                    let z = ra[2] + (ra[3] - ra[2]) * (j as f64 + 0.5) / (steps as f64 + 1.0);
                    let y = ya.0 + (ya.1 - ya.0) * (k as f64 + 0.5) / (steps as f64 + 1.0);
                    if x > rb[0] && x < rb[1] && z > rb[2] && z < rb[3] && y > yb.0 && y < yb.1 {
                        return true;
                    }
                }
            }
        }
        false
    }

    #[test]
    fn collision_matches_sampling_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.gen_range(lo..hi) as f64 * 0.25;
        for _ in 0..1000 {
            let mk = |rng: &mut ChaCha8Rng| {
                ObjectInstance::new(
                    4,
                    [q(rng, 1, 8), q(rng, 1, 8), q(rng, 1, 8)],
                    [q(rng, 0, 12), q(rng, 0, 6), q(rng, 0, 12)],
                    Orientation::ALL[rng.gen_range(0..4)],
                )
                .unwrap()
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            assert_eq!(collides(&a, &b), collides(&b, &a));
            assert_eq!(collides(&a, &b), sampled_overlap(&a, &b), "{a:?} {b:?}");
        }
    }

    #[test]
    fn navigability_fixtures() {
        let room = rect(1.1, 1.0);
        assert_eq!(navigability(&scene(room.clone(), vec![]), 0.1, 2.0).unwrap().percent, 100.0);
        let wall = place(4, [0.1, 1.0, 1.0], [0.65, 0.0, 0.5], 0);
        let r = navigability(&scene(room.clone(), vec![wall.clone()]), 0.1, 2.0).unwrap();
        assert_eq!((r.free_cells, r.largest_region), (100, 60));
        assert!((r.percent - 60.0).abs() < 1e-12);
        let lamp = place(7, [0.1, 0.3, 1.0], [0.65, 2.5, 0.5], 0);
        assert_eq!(navigability(&scene(room, vec![lamp]), 0.1, 2.0).unwrap().percent, 100.0);
    }

    #[test]
    fn metrics_are_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let placements: Vec<Placement> = (0..5)
                .map(|i| {
                    place(
                        4 + i,
                        [rng.gen_range(1..6) as f64 * 0.25, 0.8, rng.gen_range(1..6) as f64 * 0.25],
                        [rng.gen_range(0..16) as f64 * 0.25, rng.gen_range(0..3) as f64, rng.gen_range(0..12) as f64 * 0.25],
                        rng.gen_range(0..4),
                    )
                })
                .collect();
            let (dx, dz) = (1.5, -2.25);
            let moved: Vec<Placement> = placements
                .iter()
                .map(|p| Placement {
                    position: [p.position[0] + dx, p.position[1], p.position[2] + dz],
                    ..p.clone()
                })
                .collect();
            let poly = rect(4.0, 3.0);
            let poly2: Vec<[f64; 2]> = poly.iter().map(|p| [p[0] + dx, p[1] + dz]).collect();
            let (a, b) = (scene(poly, placements), scene(poly2, moved));
            assert_eq!(oob(&a).unwrap().flags, oob(&b).unwrap().flags);
            assert_eq!(collision_rate(&a).unwrap(), collision_rate(&b).unwrap());
            assert_eq!(navigability(&a, 0.1, 2.0).unwrap(), navigability(&b, 0.1, 2.0).unwrap());
        }
    }

    #[test]
    fn free_cells_shrink_as_obstacles_are_added() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut placements = Vec::new();
        let mut last = usize::MAX;
        for i in 0..12 {
            placements.push(place(
                4 + (i % 8),
                [0.5, 0.5, rng.gen_range(1..8) as f64 * 0.25],
                [rng.gen_range(0..16) as f64 * 0.25, 0.0, rng.gen_range(0..16) as f64 * 0.25],
                rng.gen_range(0..4),
            ));
            let nav = navigability(&scene(rect(4.0, 4.0), placements.clone()), 0.1, 2.0).unwrap();
            assert_eq!(nav.floor_cells, 1600);
            assert!(nav.free_cells <= last);
            assert!(nav.largest_region <= nav.free_cells);
            last = nav.free_cells;
        }
    }

    #[test]
    fn corpus_report() {
        let clean = scene(rect(4.0, 4.0), vec![place(4, [1.0, 0.5, 2.0], [1.0, 0.0, 1.5], 0)]);
        let gt: BTreeMap<RoomType, CategoryHistogram> = RoomType::ALL
            .iter()
            .map(|&rt| (rt, CategoryHistogram::from_categories([4])))
            .collect();
        let report = evaluate_corpus(
            &[EvalScene {
                scene: clean.clone(),
                room_type: RoomType::Bedroom,
            }],
            &gt,
        )
        .unwrap();
        let o = report.overall();
        assert_eq!((o.oob_scene, o.oob_object, o.col), (0.0, 0.0, 0.0));
        assert!(o.nav <= 100.0);

        let two = scene(
            rect(4.0, 4.0),
            vec![
                place(4, [1.0, 0.5, 1.0], [1.0, 0.0, 1.0], 0),
                place(5, [1.0, 0.5, 1.0], [3.0, 0.0, 3.0], 0),
            ],
        );
        let corpus = vec![
            EvalScene {
                scene: clean.clone(),
                room_type: RoomType::Bedroom,
            },
            EvalScene {
                scene: two,
                room_type: RoomType::LivingRoom,
            },
            EvalScene {
                scene: scene(rect(4.0, 4.0), vec![]),
                room_type: RoomType::DiningRoom,
            },
        ];
        let report = evaluate_corpus(&corpus, &gt).unwrap();
        let counts: Vec<f64> = report.rows.iter().map(|r| r.mean_objects).collect();
        assert_eq!(counts, vec![1.0, 2.0, 0.0, 1.0]);
        let o = report.overall();
        let rows = &report.rows[..3];
        assert!((o.ckl_x100 - rows.iter().map(|r| r.ckl_x100).sum::<f64>() / 3.0).abs() < 1e-12);
        assert!((o.nav - rows.iter().map(|r| r.nav).sum::<f64>() / 3.0).abs() < 1e-12);
        assert!(report.to_csv().unwrap().starts_with("group,scenes,ckl_x100"));
    }

    #[test]
    fn void_violation_share() {
        let map = SemanticMap::new(1, 4, 1.0, 12, vec![4, 4, 5, 1]).unwrap();
        let mask = ArchMask::new(1, 4, vec![0, 1, 1, 1]).unwrap();
        assert!((object_pixels_on_void(&map, &mask).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}
