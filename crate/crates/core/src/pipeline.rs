//! Stage wiring shared by the command-line front end, examples and tests:
//! sampling a batch of maps, attribute sources, and map-to-scene assembly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apm::{
    heuristic_orientation, heuristic_vertical, ApmModel, AttributePrediction, HeuristicKind, OrientationStats,
    VerticalPriors,
};
use crate::assembly::{assemble_scene, room_mask_for, AssemblyConfig, AssetCatalog, Scene3D};
use crate::diffusion::{sample_layout, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::extraction::{extract_instances, ExtractedInstance, ThresholdTable};
use crate::layout::{ArchMask, ConditionKind, ConditionSpec, RoomType, SemanticMap};
use crate::metrics::object_pixels_on_void;

/// Generator for item `index` of a seeded batch.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One sampled map with the condition it was drawn under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub index: usize,
    pub seed: u64,
    pub kind: ConditionKind,
    pub room_type: RoomType,
    /// Condition mask cells (all void for unconditional samples).
    pub mask: Vec<u8>,
    pub map: crate::layout::io::MapJson,
}

impl GeneratedSample {
    pub fn condition(&self) -> Result<ConditionSpec> {
        ConditionSpec::new(self.kind, ArchMask::new(self.map.h, self.map.w, self.mask.clone())?, self.room_type)
    }

    pub fn semantic_map(&self) -> Result<SemanticMap> {
        self.map.clone().try_into()
    }
}

/// Draws `conditions[i]` with stream i of `seed`.
pub fn generate_batch<D: Denoiser + ?Sized>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    conditions: &[ConditionSpec],
    scale: f64,
    seed: u64,
) -> Result<Vec<GeneratedSample>> {
    conditions
        .iter()
        .enumerate()
        .map(|(i, cond)| {
            let map = sample_layout(denoiser, cond, schedule, scale, &mut item_rng(seed, i))?;
            Ok(GeneratedSample {
                index: i,
                seed,
                kind: cond.kind(),
                room_type: cond.room_type(),
                mask: cond.mask().cells().to_vec(),
                map: (&map).into(),
            })
        })
        .collect()
}

/// Where per-instance height, elevation and orientation come from.
pub enum AttributeSource<'a> {
    Model(&'a ApmModel),
    Heuristic {
        kind: HeuristicKind,
        stats: &'a OrientationStats,
        priors: &'a VerticalPriors,
        seed: u64,
    },
}

impl AttributeSource<'_> {
    /// Predictions for every instance of one map; `item` selects the random stream.
    pub fn predict(
        &self,
        map: &SemanticMap,
        instances: &[ExtractedInstance],
        item: usize,
    ) -> Result<Vec<AttributePrediction>> {
        match self {
            AttributeSource::Model(m) => instances.iter().map(|e| m.predict(map, &e.mask)).collect(),
            AttributeSource::Heuristic {
                kind,
                stats,
                priors,
                seed,
            } => {
                let mut rng = item_rng(*seed, item);
                instances
                    .iter()
                    .map(|e| {
                        let o = heuristic_orientation(*kind, &e.mask, map, stats, &mut rng);
                        let (s, p) = heuristic_vertical(e.category(), priors)?;
                        Ok(AttributePrediction::fixed(s, p, o))
                    })
                    .collect()
            }
        }
    }
}

/// Extraction, attribute prediction and assembly of one generated map.
pub fn assemble_sample(
    sample: &GeneratedSample,
    thresholds: &ThresholdTable,
    attributes: &AttributeSource,
    catalog: &AssetCatalog,
    config: &AssemblyConfig,
) -> Result<Scene3D> {
    let map = sample.semantic_map()?;
    let cond = sample.condition()?;
    let instances = extract_instances(&map, thresholds)?;
    let attrs = attributes.predict(&map, &instances, sample.index)?;
    let room = room_mask_for(&cond, &map);
    if room.floor_pixels() == 0 {
        return Err(Error::Geometry("generated map has no room pixels".into()));
    }
    assemble_scene(&instances, &attrs, catalog, &room, map.scale(), config)
}

/// Share of object pixels on void cells of the condition mask, pooled over
/// the samples that carry an architecture or floor mask.
pub fn void_violation(samples: &[GeneratedSample]) -> Result<f64> {
    let (mut on_void, mut total) = (0.0, 0usize);
    for s in samples.iter().filter(|s| s.kind != ConditionKind::None) {
        let map = s.semantic_map()?;
        let n = map.cells().iter().filter(|&&c| crate::layout::palette::is_object(c)).count();
        on_void += object_pixels_on_void(&map, s.condition()?.mask())? * n as f64;
        total += n;
    }
    Ok(if total == 0 { 0.0 } else { on_void / total as f64 })
}
