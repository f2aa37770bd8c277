use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::apm::snap_direction;
use crate::error::{Error, Result};
use crate::extraction::InstanceMask;
use crate::layout::{
    ArchMask, CategoryPalette, GridSpec, ObjectInstance, Orientation, RoomType, SceneLayout, SemanticMap, DOOR,
    FLOOR, VOID, WINDOW,
};

pub const PLACEMENT_ATTEMPTS: usize = 100;
pub const FLOOR_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CountRule {
    Fixed { n: usize },
    /// Uniform over lo..=hi.
    Uniform { lo: usize, hi: usize },
    Bernoulli { p: f64 },
}

impl CountRule {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            CountRule::Fixed { n } => n,
            CountRule::Uniform { lo, hi } => rng.gen_range(lo..=hi),
            CountRule::Bernoulli { p } => rng.gen_bool(p) as usize,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountRule::Fixed { n } => n as f64,
            CountRule::Uniform { lo, hi } => (lo + hi) as f64 / 2.0,
            CountRule::Bernoulli { p } => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlacementRule {
    /// Back against a wall, facing into the room. With `opposite`, the wall
    /// facing that anchor is preferred when one is free.
    AgainstWall { opposite: Option<String> },
    /// Flush with a side of the anchor, sharing its wall and orientation.
    BesideAnchor { anchor: String },
    /// Close to the floor centroid, oriented by the long axis of the footprint.
    Centered,
    /// Along the sides of the anchor, facing it.
    AroundAnchor { anchor: String },
    /// Anywhere free, facing the floor centroid.
    Free,
    /// Hanging near the floor centroid with orientation 0.
    Ceiling,
}

/// One size option: local (x, y, z) size and bottom elevation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub size: [f64; 3],
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRule {
    /// Palette category name.
    pub category: String,
    pub count: CountRule,
    pub placement: PlacementRule,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomGrammar {
    pub room_type: RoomType,
    /// Width (x) and length (z) ranges in meters; sampled on the pixel grid.
    pub width: [f64; 2],
    pub length: [f64; 2],
    pub l_shape_prob: f64,
    pub door_width: f64,
    pub door_clearance: f64,
    pub windows: [usize; 2],
    pub window_widths: Vec<f64>,
    /// Placed in order; anchors must come before the rules that reference them.
    pub objects: Vec<ObjectRule>,
}

fn v(x: f64, y: f64, z: f64) -> Variant {
    Variant {
        size: [x, y, z],
        elevation: 0.0,
    }
}

fn lamp(x: f64, y: f64, elevation: f64) -> Variant {
    Variant {
        size: [x, y, x],
        elevation,
    }
}

fn rule(category: &str, count: CountRule, placement: PlacementRule, variants: Vec<Variant>) -> ObjectRule {
    ObjectRule {
        category: category.into(),
        count,
        placement,
        variants,
    }
}

impl RoomGrammar {
    pub fn bedroom() -> Self {
        Self {
            room_type: RoomType::Bedroom,
            width: [3.0, 5.0],
            length: [3.0, 5.5],
            l_shape_prob: 0.3,
            door_width: 1.0,
            door_clearance: 0.5,
            windows: [0, 2],
            window_widths: vec![1.0, 1.5],
            objects: vec![
                rule(
                    "bed",
                    CountRule::Fixed { n: 1 },
                    PlacementRule::AgainstWall { opposite: None },
                    vec![v(1.0, 0.5, 2.0), v(1.5, 0.55, 2.0), v(1.75, 0.6, 2.25)],
                ),
                rule(
                    "nightstand",
                    CountRule::Uniform { lo: 0, hi: 2 },
                    PlacementRule::BesideAnchor { anchor: "bed".into() },
                    vec![v(0.5, 0.5, 0.5), v(0.5, 0.6, 0.5)],
                ),
                rule(
                    "wardrobe",
                    CountRule::Bernoulli { p: 0.6 },
                    PlacementRule::AgainstWall { opposite: None },
                    vec![v(1.0, 2.0, 0.5), v(1.5, 2.1, 0.75), v(2.0, 2.2, 0.75)],
                ),
                rule(
                    "ceiling_lamp",
                    CountRule::Fixed { n: 1 },
                    PlacementRule::Ceiling,
                    vec![lamp(0.5, 0.3, 2.5), lamp(0.75, 0.4, 2.4)],
                ),
            ],
        }
    }

    pub fn living_room() -> Self {
        Self {
            room_type: RoomType::LivingRoom,
            width: [3.5, 6.0],
            length: [3.5, 6.0],
            l_shape_prob: 0.3,
            door_width: 1.0,
            door_clearance: 0.5,
            windows: [1, 2],
            window_widths: vec![1.0, 1.5, 2.0],
            objects: vec![
                rule(
                    "sofa",
                    CountRule::Fixed { n: 1 },
                    PlacementRule::AgainstWall { opposite: None },
                    vec![v(1.75, 0.8, 0.75), v(2.0, 0.85, 1.0), v(2.5, 0.85, 1.0)],
                ),
                rule(
                    "tv_stand",
                    CountRule::Fixed { n: 1 },
                    PlacementRule::AgainstWall {
                        opposite: Some("sofa".into()),
                    },
                    vec![v(1.5, 0.5, 0.5), v(2.0, 0.55, 0.5)],
                ),
                rule(
                    "dining_chair",
                    CountRule::Uniform { lo: 0, hi: 2 },
                    PlacementRule::Free,
                    vec![v(0.5, 0.9, 0.5)],
                ),
                rule(
                    "ceiling_lamp",
                    CountRule::Bernoulli { p: 0.7 },
                    PlacementRule::Ceiling,
                    vec![lamp(0.5, 0.3, 2.5), lamp(0.75, 0.4, 2.4)],
                ),
            ],
        }
    }

    pub fn dining_room() -> Self {
        Self {
            room_type: RoomType::DiningRoom,
            width: [3.0, 5.5],
            length: [3.0, 5.5],
            l_shape_prob: 0.3,
            door_width: 1.0,
            door_clearance: 0.5,
            windows: [0, 2],
            window_widths: vec![1.0, 1.5],
            objects: vec![
                rule(
                    "dining_table",
                    CountRule::Fixed { n: 1 },
                    PlacementRule::Centered,
                    vec![v(1.5, 0.75, 1.0), v(1.75, 0.75, 1.0), v(2.0, 0.75, 1.0)],
                ),
                rule(
                    "dining_chair",
                    CountRule::Uniform { lo: 2, hi: 6 },
                    PlacementRule::AroundAnchor {
                        anchor: "dining_table".into(),
                    },
                    vec![v(0.5, 0.9, 0.5)],
                ),
                rule(
                    "ceiling_lamp",
                    CountRule::Bernoulli { p: 0.5 },
                    PlacementRule::Ceiling,
                    vec![lamp(0.5, 0.3, 2.5), lamp(0.75, 0.4, 2.4)],
                ),
            ],
        }
    }

    /// Bedroom, living room and dining room grammars.
    pub fn defaults() -> Vec<RoomGrammar> {
        vec![Self::bedroom(), Self::living_room(), Self::dining_room()]
    }

    /// Checks category names, anchors, sizes and pixel alignment for `grid`.
    pub fn validate(&self, palette: &CategoryPalette, grid: GridSpec) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        let on_grid = |m: f64| ((m / grid.scale).round() * grid.scale - m).abs() < 1e-9 && m > 0.0;
        for r in &self.objects {
            let cat = palette
                .index_of(&r.category)
                .ok_or_else(|| Error::Config(format!("category '{}' not in palette", r.category)))?;
            if cat < crate::layout::FIRST_OBJECT {
                return Err(Error::Config(format!("'{}' is not an object category", r.category)));
            }
            if r.variants.is_empty() {
                return Err(Error::Config(format!("'{}' has no size variants", r.category)));
            }
            for var in &r.variants {
                if !on_grid(var.size[0]) || !on_grid(var.size[2]) || !(var.size[1] > 0.0) || var.elevation < 0.0 {
                    return Err(Error::Config(format!(
                        "'{}' size {:?} is not a positive multiple of the {} m pixel",
                        r.category, var.size, grid.scale
                    )));
                }
            }
            let anchor = match &r.placement {
                PlacementRule::BesideAnchor { anchor } | PlacementRule::AroundAnchor { anchor } => Some(anchor),
                PlacementRule::AgainstWall { opposite } => opposite.as_ref(),
                _ => None,
            };
            if let Some(a) = anchor {
                if !seen.contains(&a.as_str()) {
                    return Err(Error::Config(format!("anchor '{a}' must be placed before '{}'", r.category)));
                }
            }
            seen.push(&r.category);
        }
        if self.width[0] > self.width[1] || self.length[0] > self.length[1] || self.width[0] <= 0.0 {
            return Err(Error::Config("room size ranges are empty".into()));
        }
        let (max_w, max_l) = grid.extent();
        if self.width[1] > max_w - 2.0 * grid.scale || self.length[1] > max_l - 2.0 * grid.scale {
            return Err(Error::Config("room does not fit the canvas with a void border".into()));
        }
        if self.windows[0] > self.windows[1] || !(0.0..=1.0).contains(&self.l_shape_prob) {
            return Err(Error::Config("invalid window count or L-shape probability".into()));
        }
        Ok(())
    }

    /// Expected instance count per category.
    pub fn expected_counts(&self, palette: &CategoryPalette) -> BTreeMap<u8, f64> {
        let mut out = BTreeMap::new();
        for r in &self.objects {
            if let Some(c) = palette.index_of(&r.category) {
                *out.entry(c).or_insert(0.0) += r.count.mean();
            }
        }
        out
    }
}

/// Ground-truth attributes and mask of one generated object.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub instance: ObjectInstance,
    pub mask: InstanceMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub layout: SceneLayout,
    pub arch: ArchMask,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
}

impl Rect {
    fn cells(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        (self.r0..self.r0 + self.h).flat_map(move |r| (self.c0..self.c0 + self.w).map(move |c| r * width + c))
    }

    fn center(&self) -> (f64, f64) {
        (self.r0 as f64 + self.h as f64 / 2.0, self.c0 as f64 + self.w as f64 / 2.0)
    }
}

/// Floor plan with openings on a canvas.
struct Floor {
    h: usize,
    w: usize,
    cells: Vec<u8>,
    reserved: Vec<bool>,
    centroid: (f64, f64),
}

impl Floor {
    fn inside(&self, r: isize, c: isize) -> bool {
        r >= 0 && c >= 0 && (r as usize) < self.h && (c as usize) < self.w && self.cells[r as usize * self.w + c as usize] != VOID
    }
}

const DIRS: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

fn px(m: f64, scale: f64) -> usize {
    (m / scale).round() as usize
}

fn sample_px<R: Rng + ?Sized>(range: [f64; 2], scale: f64, rng: &mut R) -> usize {
    rng.gen_range(px(range[0], scale).max(1)..=px(range[1], scale).max(1))
}

fn build_floor<R: Rng + ?Sized>(g: &RoomGrammar, grid: GridSpec, rng: &mut R) -> Floor {
    let (hh, ww) = (grid.height, grid.width);
    let rw = sample_px(g.width, grid.scale, rng);
    let rl = sample_px(g.length, grid.scale, rng);
    let (r_off, c_off) = ((hh - rl) / 2, (ww - rw) / 2);
    let mut cells = vec![VOID; hh * ww];
    for r in r_off..r_off + rl {
        for c in c_off..c_off + rw {
            cells[r * ww + c] = FLOOR;
        }
    }
    if rng.gen_bool(g.l_shape_prob) && rl >= 6 && rw >= 6 {
        let nh = rng.gen_range(rl / 3..=rl / 2);
        let nw = rng.gen_range(rw / 3..=rw / 2);
        let (top, left) = (rng.gen_bool(0.5), rng.gen_bool(0.5));
        let rs = if top { r_off } else { r_off + rl - nh };
        let cs = if left { c_off } else { c_off + rw - nw };
        for r in rs..rs + nh {
            for c in cs..cs + nw {
                cells[r * ww + c] = VOID;
            }
        }
    }
    let mut floor = Floor {
        h: hh,
        w: ww,
        reserved: vec![false; hh * ww],
        centroid: (0.0, 0.0),
        cells,
    };
    let (mut sr, mut sc, mut n) = (0.0, 0.0, 0.0);
    for r in 0..hh {
        for c in 0..ww {
            if floor.cells[r * ww + c] != VOID {
                sr += r as f64 + 0.5;
                sc += c as f64 + 0.5;
                n += 1.0;
            }
        }
    }
    floor.centroid = (sr / n, sc / n);
    place_openings(g, grid, &mut floor, rng);
    floor
}

/// Runs of `len` straight-wall pixels: every pixel has void on side `d` and
/// floor on both along-wall neighbors' wall lines, and none touches an opening.
fn opening_slots(floor: &Floor, d: usize, len: usize) -> Vec<Vec<usize>> {
    let (dr, dc) = DIRS[d];
    let (ar, ac) = DIRS[(d + 1) % 4];
    let wall_px = |r: isize, c: isize| {
        floor.inside(r, c)
            && floor.cells[r as usize * floor.w + c as usize] == FLOOR
            && !floor.inside(r + dr, c + dc)
            && floor.inside(r - dr, c - dc)
    };
    let near_opening = |r: isize, c: isize| {
        DIRS.iter().chain(&[(0, 0)]).any(|&(er, ec)| {
            floor.inside(r + er, c + ec) && matches!(floor.cells[(r + er) as usize * floor.w + (c + ec) as usize], DOOR | WINDOW)
        })
    };
    let mut out = Vec::new();
    for r in 0..floor.h as isize {
        for c in 0..floor.w as isize {
            // slot runs along (ar, ac) starting at (r, c), with a wall pixel on both ends beyond it
            if !wall_px(r - ar, c - ac) {
                continue;
            }
            let run: Vec<(isize, isize)> = (0..=len as isize).map(|i| (r + ar * i, c + ac * i)).collect();
            if run.iter().all(|&(rr, cc)| wall_px(rr, cc) && !near_opening(rr, cc)) && !near_opening(r - ar, c - ac) {
                out.push(run[..len].iter().map(|&(rr, cc)| rr as usize * floor.w + cc as usize).collect());
            }
        }
    }
    out
}

fn place_openings<R: Rng + ?Sized>(g: &RoomGrammar, grid: GridSpec, floor: &mut Floor, rng: &mut R) {
    let door_len = px(g.door_width, grid.scale).max(1);
    let depth = (g.door_clearance / grid.scale - 1e-9).ceil() as isize;
    let mut sides: Vec<usize> = (0..4).collect();
    sides.shuffle(rng);
    for &d in &sides {
        let slots = opening_slots(floor, d, door_len);
        if let Some(slot) = slots.choose(rng) {
            let (dr, dc) = DIRS[d];
            for &i in slot {
                floor.cells[i] = DOOR;
                let (r, c) = ((i / floor.w) as isize, (i % floor.w) as isize);
                for k in 1..=depth {
                    let (rr, cc) = (r - dr * k, c - dc * k);
                    if floor.inside(rr, cc) {
                        floor.reserved[rr as usize * floor.w + cc as usize] = true;
                    }
                }
            }
            break;
        }
    }
    let n_windows = rng.gen_range(g.windows[0]..=g.windows[1]);
    for _ in 0..n_windows {
        let len = px(*g.window_widths.choose(rng).unwrap_or(&1.0), grid.scale).max(1);
        let d = rng.gen_range(0..4);
        let slots = opening_slots(floor, d, len);
        if let Some(slot) = slots.choose(rng) {
            for &i in slot {
                floor.cells[i] = WINDOW;
            }
        }
    }
}

struct Placed {
    rule: usize,
    category: u8,
    rect: Rect,
    orientation: Orientation,
    variant: Variant,
}

struct Board<'a> {
    floor: &'a Floor,
    owner: Vec<Option<u8>>,
}

impl Board<'_> {
    fn fits(&self, rect: Rect, category: u8) -> bool {
        let (h, w) = (self.floor.h, self.floor.w);
        if rect.r0 + rect.h > h || rect.c0 + rect.w > w || rect.h == 0 || rect.w == 0 {
            return false;
        }
        for i in rect.cells(w) {
            if self.floor.cells[i] != FLOOR || self.floor.reserved[i] || self.owner[i].is_some() {
                return false;
            }
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in DIRS {
                let (rr, cc) = (r + dr, c + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                    if self.owner[rr as usize * w + cc as usize] == Some(category) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn against_wall(&self, rect: Rect, o: Orientation) -> bool {
        let (r0, c0, r1, c1) = (rect.r0 as isize, rect.c0 as isize, (rect.r0 + rect.h) as isize, (rect.c0 + rect.w) as isize);
        match o.class() {
            0 => (c0..c1).all(|c| !self.floor.inside(r0 - 1, c)),
            1 => (r0..r1).all(|r| !self.floor.inside(r, c0 - 1)),
            2 => (c0..c1).all(|c| !self.floor.inside(r1, c)),
            _ => (r0..r1).all(|r| !self.floor.inside(r, c1)),
        }
    }

    fn occupy(&mut self, rect: Rect, category: u8) {
        for i in rect.cells(self.floor.w) {
            self.owner[i] = Some(category);
        }
    }
}

fn pixel_extents(var: &Variant, o: Orientation, scale: f64) -> (usize, usize) {
    let (sx, sz) = (px(var.size[0], scale), px(var.size[2], scale));
    if o.is_quarter_turn() {
        (sx, sz)
    } else {
        (sz, sx)
    }
}

fn all_positions(floor: &Floor, h: usize, w: usize) -> impl Iterator<Item = Rect> + '_ {
    (0..floor.h.saturating_sub(h) + 1)
        .flat_map(move |r0| (0..floor.w.saturating_sub(w) + 1).map(move |c0| Rect { r0, c0, h, w }))
}

fn nearest_to_centroid(floor: &Floor, cands: Vec<(Rect, Orientation)>) -> Vec<(Rect, Orientation)> {
    let dist = |r: &Rect| {
        let (cr, cc) = r.center();
        ((cr - floor.centroid.0).powi(2) + (cc - floor.centroid.1).powi(2)).sqrt()
    };
    let best = cands.iter().map(|(r, _)| dist(r)).fold(f64::INFINITY, f64::min);
    cands.into_iter().filter(|(r, _)| dist(r) <= best + 1.0).collect()
}

fn candidates(
    rule: &ObjectRule,
    ri: usize,
    category: u8,
    var: &Variant,
    board: &Board,
    placed: &[Placed],
    rules: &[ObjectRule],
    scale: f64,
) -> Vec<(Rect, Orientation)> {
    let floor = board.floor;
    let find = |name: &str| {
        placed
            .iter()
            .find(|p| rules[p.rule].category == name && p.rule != ri)
    };
    let mut out = Vec::new();
    match &rule.placement {
        PlacementRule::AgainstWall { opposite } => {
            let preferred = opposite.as_deref().and_then(find).map(|a| a.orientation.turned(2));
            for o in Orientation::ALL {
                let (h, w) = pixel_extents(var, o, scale);
                out.extend(
                    all_positions(floor, h, w)
                        .filter(|&r| board.against_wall(r, o) && board.fits(r, category))
                        .map(|r| (r, o)),
                );
            }
            if let Some(p) = preferred {
                if out.iter().any(|&(_, o)| o == p) {
                    out.retain(|&(_, o)| o == p);
                }
            }
        }
        PlacementRule::BesideAnchor { anchor } => {
            if let Some(a) = find(anchor) {
                let o = a.orientation;
                let (h, w) = pixel_extents(var, o, scale);
                let ar = a.rect;
                // back-aligned with the anchor, on either side along the wall
                let spots: Vec<(isize, isize)> = match o.class() {
                    0 => vec![(ar.r0 as isize, ar.c0 as isize - w as isize), (ar.r0 as isize, (ar.c0 + ar.w) as isize)],
                    2 => vec![
                        ((ar.r0 + ar.h) as isize - h as isize, ar.c0 as isize - w as isize),
                        ((ar.r0 + ar.h) as isize - h as isize, (ar.c0 + ar.w) as isize),
                    ],
                    1 => vec![(ar.r0 as isize - h as isize, ar.c0 as isize), ((ar.r0 + ar.h) as isize, ar.c0 as isize)],
                    _ => vec![
                        (ar.r0 as isize - h as isize, (ar.c0 + ar.w) as isize - w as isize),
                        ((ar.r0 + ar.h) as isize, (ar.c0 + ar.w) as isize - w as isize),
                    ],
                };
                for (r0, c0) in spots {
                    if r0 >= 0 && c0 >= 0 {
                        let r = Rect {
                            r0: r0 as usize,
                            c0: c0 as usize,
                            h,
                            w,
                        };
                        if board.fits(r, category) {
                            out.push((r, o));
                        }
                    }
                }
            }
        }
        PlacementRule::AroundAnchor { anchor } => {
            if let Some(a) = find(anchor) {
                let ar = a.rect;
                for o in Orientation::ALL {
                    let (h, w) = pixel_extents(var, o, scale);
                    // the chair on the side it faces away from: class 0 sits above (lower rows)
                    let along: Vec<(isize, isize)> = match o.class() {
                        0 => (0..=ar.w.saturating_sub(w)).map(|k| (ar.r0 as isize - h as isize, (ar.c0 + k) as isize)).collect(),
                        2 => (0..=ar.w.saturating_sub(w)).map(|k| ((ar.r0 + ar.h) as isize, (ar.c0 + k) as isize)).collect(),
                        1 => (0..=ar.h.saturating_sub(h)).map(|k| ((ar.r0 + k) as isize, ar.c0 as isize - w as isize)).collect(),
                        _ => (0..=ar.h.saturating_sub(h)).map(|k| ((ar.r0 + k) as isize, (ar.c0 + ar.w) as isize)).collect(),
                    };
                    for (r0, c0) in along {
                        if r0 >= 0 && c0 >= 0 {
                            let r = Rect {
                                r0: r0 as usize,
                                c0: c0 as usize,
                                h,
                                w,
                            };
                            if board.fits(r, category) {
                                out.push((r, o));
                            }
                        }
                    }
                }
            }
        }
        PlacementRule::Centered => {
            // variants keep the long side on local x, so class 0 lies along x and class 1 along z
            let orients = if var.size[0] == var.size[2] { 1 } else { 2 };
            let mut cands = Vec::new();
            for o in &Orientation::ALL[..orients] {
                let (h, w) = pixel_extents(var, *o, scale);
                cands.extend(all_positions(floor, h, w).filter(|&r| board.fits(r, category)).map(|r| (r, *o)));
            }
            out = nearest_to_centroid(floor, cands);
        }
        PlacementRule::Ceiling => {
            let o = Orientation::ALL[0];
            let (h, w) = pixel_extents(var, o, scale);
            let cands = all_positions(floor, h, w)
                .filter(|&r| board.fits(r, category))
                .map(|r| (r, o))
                .collect();
            out = nearest_to_centroid(floor, cands);
        }
        PlacementRule::Free => {
            for o in Orientation::ALL {
                let (h, w) = pixel_extents(var, o, scale);
                for r in all_positions(floor, h, w) {
                    let (cr, cc) = r.center();
                    if snap_direction(floor.centroid.1 - cc, floor.centroid.0 - cr) == o && board.fits(r, category) {
                        out.push((r, o));
                    }
                }
            }
        }
    }
    out
}

fn try_place<R: Rng + ?Sized>(
    g: &RoomGrammar,
    cats: &[u8],
    counts: &[usize],
    floor: &Floor,
    scale: f64,
    rng: &mut R,
) -> Option<Vec<Placed>> {
    let mut board = Board {
        floor,
        owner: vec![None; floor.h * floor.w],
    };
    let mut placed: Vec<Placed> = Vec::new();
    for (ri, rule) in g.objects.iter().enumerate() {
        for _ in 0..counts[ri] {
            let var = *rule.variants.choose(rng)?;
            let cands = candidates(rule, ri, cats[ri], &var, &board, &placed, &g.objects, scale);
            let &(rect, orientation) = cands.choose(rng)?;
            board.occupy(rect, cats[ri]);
            placed.push(Placed {
                rule: ri,
                category: cats[ri],
                rect,
                orientation,
                variant: var,
            });
        }
    }
    Some(placed)
}

/// Samples one room from the grammar.
///
/// Instance counts are drawn once; positions and size variants are redrawn
/// up to [`PLACEMENT_ATTEMPTS`] times per floor plan and the floor plan up to
/// [`FLOOR_ATTEMPTS`] times before giving up.
pub fn generate_scene<R: Rng + ?Sized>(
    g: &RoomGrammar,
    palette: &CategoryPalette,
    grid: GridSpec,
    rng: &mut R,
) -> Result<GeneratedScene> {
    g.validate(palette, grid)?;
    let cats: Vec<u8> = g
        .objects
        .iter()
        .map(|r| palette.index_of(&r.category).expect("validated"))
        .collect();
    let counts: Vec<usize> = g.objects.iter().map(|r| r.count.sample(rng)).collect();
    for _ in 0..FLOOR_ATTEMPTS {
        let floor = build_floor(g, grid, rng);
        for _ in 0..PLACEMENT_ATTEMPTS {
            if let Some(placed) = try_place(g, &cats, &counts, &floor, grid.scale, rng) {
                return finish(g, palette, grid, &floor, placed);
            }
        }
    }
    Err(Error::Data(format!(
        "could not place {} objects after {FLOOR_ATTEMPTS} floor plans",
        g.room_type
    )))
}

fn finish(
    g: &RoomGrammar,
    palette: &CategoryPalette,
    grid: GridSpec,
    floor: &Floor,
    placed: Vec<Placed>,
) -> Result<GeneratedScene> {
    let mut cells = floor.cells.clone();
    let mut annotations = Vec::with_capacity(placed.len());
    for p in &placed {
        let pixels: Vec<usize> = p.rect.cells(floor.w).collect();
        for &i in &pixels {
            cells[i] = p.category;
        }
        let (cr, cc) = p.rect.center();
        let instance = ObjectInstance::new(
            p.category,
            p.variant.size,
            [cc * grid.scale, p.variant.elevation, cr * grid.scale],
            p.orientation,
        )?;
        annotations.push(Annotation {
            instance,
            mask: InstanceMask::new(floor.h, floor.w, p.category, pixels)?,
        });
    }
    let map = SemanticMap::new(floor.h, floor.w, grid.scale, palette.len(), cells)?;
    let arch = ArchMask::from_map(&map);
    let layout = SceneLayout::new(map, annotations.iter().map(|a| a.instance.clone()).collect(), g.room_type)?;
    Ok(GeneratedScene {
        layout,
        arch,
        annotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_room_mesh, floor_polygon_from_cells, RoomConfig, Scene3D, Placement};
    use crate::extraction::{compute_thresholds, connected_components, extract_instances};
    use crate::metrics::{collision_rate, oob};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene3d(s: &GeneratedScene) -> Scene3D {
        let m = s.layout.map();
        let poly = floor_polygon_from_cells(m.height(), m.width(), s.arch.cells(), m.scale()).unwrap();
        Scene3D {
            room: build_room_mesh(&poly, &[], RoomConfig::default()).unwrap(),
            placements: s
                .annotations
                .iter()
                .map(|a| Placement {
                    asset_id: "x".into(),
                    category: a.instance.category,
                    position: a.instance.position,
                    orientation: a.instance.orientation,
                    size: a.instance.size,
                })
                .collect(),
            failures: vec![],
        }
    }

    #[test]
    fn scenes_are_clean_and_round_trip() {
        let palette = CategoryPalette::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in RoomGrammar::defaults() {
            for _ in 0..60 {
                let s = generate_scene(&g, &palette, GridSpec::DESK, &mut rng).unwrap();
                let s3 = scene3d(&s);
                assert!(!oob(&s3).unwrap().scene_flag);
                assert_eq!(collision_rate(&s3).unwrap(), 0.0);
                let th = compute_thresholds(std::slice::from_ref(&s.layout)).unwrap();
                let got = extract_instances(s.layout.map(), &th).unwrap();
                assert_eq!(got.len(), s.annotations.len());
                for a in &s.annotations {
                    a.mask.check_against(s.layout.map()).unwrap();
                    let (ex, ez) = a.instance.footprint_extents();
                    assert_eq!(a.mask.count(), ((ex / 0.25).round() * (ez / 0.25).round()) as usize);
                }
            }
        }
    }

    #[test]
    fn grammar_rules_hold() {
        let palette = CategoryPalette::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bed = palette.index_of("bed").unwrap();
        let ns = palette.index_of("nightstand").unwrap();
        let lampc = palette.index_of("ceiling_lamp").unwrap();
        for _ in 0..50 {
            let s = generate_scene(&RoomGrammar::bedroom(), &palette, GridSpec::DESK, &mut rng).unwrap();
            assert_eq!(connected_components(s.layout.map(), bed).unwrap().len(), 1);
            let bed_o = s.annotations.iter().find(|a| a.instance.category == bed).unwrap().instance.orientation;
            for a in &s.annotations {
                if a.instance.category == ns {
                    assert_eq!(a.instance.orientation, bed_o);
                }
                if a.instance.category == lampc {
                    assert_eq!(a.instance.orientation.class(), 0);
                    assert!(a.instance.position[1] >= 2.0);
                }
            }
        }
    }

    #[test]
    fn door_clearance_is_kept_free() {
        let palette = CategoryPalette::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in RoomGrammar::defaults() {
            for _ in 0..30 {
                let s = generate_scene(&g, &palette, GridSpec::DESK, &mut rng).unwrap();
                let m = s.layout.map();
                let (h, w) = (m.height() as isize, m.width() as isize);
                let at = |r: isize, c: isize| {
                    if r < 0 || c < 0 || r >= h || c >= w {
                        VOID
                    } else {
                        m.get(r as usize, c as usize)
                    }
                };
                let mut doors = 0;
                for r in 0..h {
                    for c in 0..w {
                        if at(r, c) != DOOR {
                            continue;
                        }
                        doors += 1;
                        for (dr, dc) in DIRS {
                            if at(r + dr, c + dc) == VOID {
                                for k in 1..=2 {
                                    assert!(at(r - dr * k, c - dc * k) < crate::layout::FIRST_OBJECT);
                                }
                            }
                        }
                    }
                }
                assert!(doors > 0);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let palette = CategoryPalette::desk();
        let a = generate_scene(&RoomGrammar::dining_room(), &palette, GridSpec::DESK, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_scene(&RoomGrammar::dining_room(), &palette, GridSpec::DESK, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_bad_grammars() {
        let palette = CategoryPalette::desk();
        let mut g = RoomGrammar::bedroom();
        g.objects.swap(0, 1);
        assert!(g.validate(&palette, GridSpec::DESK).is_err());
        let mut g = RoomGrammar::bedroom();
        g.objects[0].variants[0].size[0] = 1.1;
        assert!(g.validate(&palette, GridSpec::DESK).is_err());
        let mut g = RoomGrammar::bedroom();
        g.objects[0].category = "piano".into();
        assert!(g.validate(&palette, GridSpec::DESK).is_err());
        assert!(RoomGrammar::bedroom().validate(&palette, GridSpec::DESK64).is_ok());
    }
}
