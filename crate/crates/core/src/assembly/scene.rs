use serde::{Deserialize, Serialize};

use super::catalog::AssetCatalog;
use super::mesh::{build_room_mesh, Opening, OpeningKind, RoomConfig, RoomMesh};
use super::polygon::{edge_length, floor_polygon_from_cells, segment_distance};
use crate::apm::AttributePrediction;
use crate::error::{Error, Result};
use crate::extraction::{label_regions, ExtractedInstance};
use crate::layout::{
    ArchMask, ConditionKind, ConditionSpec, ObjectInstance, Orientation, SemanticMap, DOOR, WINDOW,
};

/// One retrieved asset in the room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub category: u8,
    /// Footprint center x, bottom height y, footprint center z.
    pub position: [f64; 3],
    pub orientation: Orientation,
    /// Local-frame size the asset is placed at.
    pub size: [f64; 3],
}

impl Placement {
    pub fn instance(&self) -> Result<ObjectInstance> {
        ObjectInstance::new(self.category, self.size, self.position, self.orientation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementFailure {
    pub index: usize,
    pub category: u8,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene3D {
    pub room: RoomMesh,
    pub placements: Vec<Placement>,
    pub failures: Vec<PlacementFailure>,
}

impl Scene3D {
    pub fn instances(&self) -> Result<Vec<ObjectInstance>> {
        self.placements.iter().map(Placement::instance).collect()
    }

    pub fn floor(&self) -> &[[f64; 2]] {
        &self.room.floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub room: RoomConfig,
    /// Scale each asset axis-wise to the predicted size instead of keeping its catalog size.
    pub rescale: bool,
}

/// Architecture the room is built from: the condition's own mask when it has
/// one, otherwise the generated map's non-void region and openings.
pub fn room_mask_for(cond: &ConditionSpec, generated: &SemanticMap) -> ArchMask {
    match cond.kind() {
        ConditionKind::Arch | ConditionKind::Floor => cond.mask().clone(),
        ConditionKind::None => ArchMask::from_map(generated),
    }
}

/// Door and window spans on the floor polygon.
///
/// Each 4-connected run of door or window pixels is projected onto the
/// polygon edge nearest its centroid. Spans that overlap an earlier one on
/// the same edge are trimmed, and dropped when nothing remains.
pub fn recover_openings(mask: &ArchMask, polygon: &[[f64; 2]], scale: f64) -> Vec<Opening> {
    let (h, w) = (mask.height(), mask.width());
    let n = polygon.len();
    let mut spans: Vec<Opening> = Vec::new();
    for (value, kind) in [(DOOR, OpeningKind::Door), (WINDOW, OpeningKind::Window)] {
        for run in label_regions(h, w, |i| mask.cells()[i] == value) {
            let (mut cx, mut cz) = (0.0, 0.0);
            for &p in &run {
                cx += ((p % w) as f64 + 0.5) * scale;
                cz += ((p / w) as f64 + 0.5) * scale;
            }
            let centroid = [cx / run.len() as f64, cz / run.len() as f64];
            let mut edge = 0;
            let mut best = f64::INFINITY;
            for e in 0..n {
                let d = segment_distance(centroid, polygon[e], polygon[(e + 1) % n]);
                if d < best {
                    best = d;
                    edge = e;
                }
            }
            let a = polygon[edge];
            let b = polygon[(edge + 1) % n];
            let len = edge_length(polygon, edge);
            let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &p in &run {
                let (r, c) = ((p / w) as f64, (p % w) as f64);
                for (x, z) in [(c, r), (c + 1.0, r), (c, r + 1.0), (c + 1.0, r + 1.0)] {
                    let t = (x * scale - a[0]) * u[0] + (z * scale - a[1]) * u[1];
                    lo = lo.min(t);
                    hi = hi.max(t);
                }
            }
            let (start, end) = (lo.max(0.0), hi.min(len));
            if end - start > 1e-9 {
                spans.push(Opening {
                    kind,
                    edge,
                    start,
                    end,
                });
            }
        }
    }
    let mut kept: Vec<Opening> = Vec::new();
    for mut o in spans {
        for k in kept.iter().filter(|k| k.edge == o.edge) {
            if o.start < k.end && k.start < o.end {
                if o.start >= k.start {
                    o.start = k.end;
                } else {
                    o.end = o.end.min(k.start);
                }
            }
        }
        if o.end - o.start > 1e-9 {
            kept.push(o);
        }
    }
    kept
}

/// Retrieves and places one asset per instance inside the room built from `room_mask`.
///
/// The predicted local size is the footprint, un-rotated by the predicted
/// orientation, with the predicted height. Retrieval failures are reported
/// per instance and do not stop the assembly.
pub fn assemble_scene(
    instances: &[ExtractedInstance],
    attributes: &[AttributePrediction],
    catalog: &AssetCatalog,
    room_mask: &ArchMask,
    scale: f64,
    config: &AssemblyConfig,
) -> Result<Scene3D> {
    if instances.len() != attributes.len() {
        return Err(Error::Data(format!(
            "{} instances but {} attribute predictions",
            instances.len(),
            attributes.len()
        )));
    }
    let polygon = floor_polygon_from_cells(room_mask.height(), room_mask.width(), room_mask.cells(), scale)?;
    let openings = recover_openings(room_mask, &polygon, scale);
    let room = build_room_mesh(&polygon, &openings, config.room)?;
    let mut placements = Vec::new();
    let mut failures = Vec::new();
    for (index, (inst, attr)) in instances.iter().zip(attributes).enumerate() {
        let [fx, fz] = inst.footprint;
        let (lx, lz) = if attr.orientation.is_quarter_turn() { (fz, fx) } else { (fx, fz) };
        let predicted = [lx, attr.s_y, lz];
        match catalog.retrieve(inst.category(), predicted) {
            Ok(asset) => placements.push(Placement {
                asset_id: asset.id.clone(),
                category: inst.category(),
                position: [inst.center[0], attr.p_y, inst.center[1]],
                orientation: attr.orientation,
                size: if config.rescale { predicted } else { asset.size },
            }),
            Err(e) => failures.push(PlacementFailure {
                index,
                category: inst.category(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(Scene3D {
        room,
        placements,
        failures,
    })
}
