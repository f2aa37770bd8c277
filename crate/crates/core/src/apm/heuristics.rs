use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::InstanceMask;
use crate::layout::{Orientation, SemanticMap, VOID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Random,
    Majority,
    Inward,
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicKind::Random => "random",
            HeuristicKind::Majority => "majority",
            HeuristicKind::Inward => "inward",
        })
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "majority" => Ok(Self::Majority),
            "inward" => Ok(Self::Inward),
            other => Err(Error::Config(format!("unknown orientation heuristic '{other}'"))),
        }
    }
}

/// Orientation class counts per category and overall.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrientationStats {
    pub per_category: BTreeMap<u8, [usize; 4]>,
    pub global: [usize; 4],
}

impl OrientationStats {
    pub fn from_labels<I: IntoIterator<Item = (u8, Orientation)>>(labels: I) -> Self {
        let mut s = Self::default();
        for (cat, o) in labels {
            s.per_category.entry(cat).or_insert([0; 4])[o.class() as usize] += 1;
            s.global[o.class() as usize] += 1;
        }
        s
    }

    /// Most frequent class for the category, falling back to the global counts.
    pub fn majority(&self, category: u8) -> Orientation {
        let counts = self
            .per_category
            .get(&category)
            .filter(|c| c.iter().any(|&n| n > 0))
            .unwrap_or(&self.global);
        let mut best = 0;
        for i in 1..4 {
            if counts[i] > counts[best] {
                best = i;
            }
        }
        Orientation::ALL[best]
    }
}

/// Axis class whose front best matches the world (x, z) direction; ties and
/// the zero vector go to the smaller class.
pub fn snap_direction(dx: f64, dz: f64) -> Orientation {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for o in Orientation::ALL {
        let (fx, fz) = o.front();
        let dot = fx * dx + fz * dz;
        if dot > best_dot {
            best_dot = dot;
            best = o.class() as usize;
        }
    }
    Orientation::ALL[best]
}

/// Faces from the instance centroid toward the centroid of the room's non-void pixels.
pub fn inward_orientation(mask: &InstanceMask, map: &SemanticMap) -> Orientation {
    let (mut fr, mut fc, mut n) = (0.0, 0.0, 0usize);
    for r in 0..map.height() {
        for c in 0..map.width() {
            if map.get(r, c) != VOID {
                fr += r as f64 + 0.5;
                fc += c as f64 + 0.5;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Orientation::ALL[0];
    }
    let (ir, ic) = mask.centroid();
    snap_direction(fc / n as f64 - ic, fr / n as f64 - ir)
}

pub fn heuristic_orientation<R: Rng + ?Sized>(
    kind: HeuristicKind,
    mask: &InstanceMask,
    map: &SemanticMap,
    stats: &OrientationStats,
    rng: &mut R,
) -> Orientation {
    match kind {
        HeuristicKind::Random => Orientation::ALL[rng.gen_range(0..4)],
        HeuristicKind::Majority => stats.majority(mask.category()),
        HeuristicKind::Inward => inward_orientation(mask, map),
    }
}

/// Mean (s_y, p_y) per category and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalPriors {
    pub per_category: BTreeMap<u8, [f64; 2]>,
    pub global: [f64; 2],
}

impl VerticalPriors {
    pub fn from_samples<I: IntoIterator<Item = (u8, f64, f64)>>(samples: I) -> Result<Self> {
        let mut sums: BTreeMap<u8, (f64, f64, usize)> = BTreeMap::new();
        let (mut gs, mut gp, mut gn) = (0.0, 0.0, 0usize);
        for (cat, s, p) in samples {
            let e = sums.entry(cat).or_insert((0.0, 0.0, 0));
            e.0 += s;
            e.1 += p;
            e.2 += 1;
            gs += s;
            gp += p;
            gn += 1;
        }
        if gn == 0 {
            return Err(Error::Config("no samples for vertical priors".into()));
        }
        Ok(Self {
            per_category: sums
                .into_iter()
                .map(|(c, (s, p, n))| (c, [s / n as f64, p / n as f64]))
                .collect(),
            global: [gs / gn as f64, gp / gn as f64],
        })
    }
}

/// Category mean (s_y, p_y), or the global mean for unseen categories.
pub fn heuristic_vertical(category: u8, priors: &VerticalPriors) -> Result<(f64, f64)> {
    if priors.per_category.is_empty() {
        return Err(Error::Config("vertical priors are empty".into()));
    }
    let [s, p] = priors.per_category.get(&category).copied().unwrap_or(priors.global);
    Ok((s, p))
}
