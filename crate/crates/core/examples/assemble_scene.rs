//! Turns a ground-truth synthetic map into a furnished 3D room using the
//! inward-facing heuristic, then scores it and writes JSON and OBJ.
//!
//! ```text
//! cargo run --example assemble_scene -- [out_dir]
//! ```

use roomdiff::assembly::{assemble_scene, export_scene, room_mask_for, AssemblyConfig, ExportFormat};
use roomdiff::extraction::{compute_thresholds, extract_instances};
use roomdiff::layout::{CategoryPalette, ConditionKind, ConditionSpec, GridSpec};
use roomdiff::metrics::{collision_rate, navigability, oob, NAV_CELL, NAV_CUTOFF};
use roomdiff::pipeline::AttributeSource;
use roomdiff::synth::{generate_scene, orientation_stats, scene_rng, synthetic_catalog, vertical_priors, RoomGrammar};
use roomdiff::apm::HeuristicKind;

fn main() -> roomdiff::Result<()> {
    let palette = CategoryPalette::desk();
    let grammars = RoomGrammar::defaults();
    let scenes = (0..150)
        .map(|i| generate_scene(&grammars[i % 3], &palette, GridSpec::DESK, &mut scene_rng(5, i)))
        .collect::<roomdiff::Result<Vec<_>>>()?;
    let layouts: Vec<_> = scenes.iter().map(|s| s.layout.clone()).collect();
    let thresholds = compute_thresholds(&layouts)?;
    let catalog = synthetic_catalog(&grammars, &palette)?;
    let stats = orientation_stats(&scenes);
    let priors = vertical_priors(&scenes)?;
    let source = AttributeSource::Heuristic {
        kind: HeuristicKind::Inward,
        stats: &stats,
        priors: &priors,
        seed: 0,
    };

    let target = &scenes[0];
    let map = target.layout.map();
    let instances = extract_instances(map, &thresholds)?;
    let attrs = source.predict(map, &instances, 0)?;
    let cond = ConditionSpec::derive(ConditionKind::Arch, &target.arch, target.layout.room_type())?;
    let scene = assemble_scene(&instances, &attrs, &catalog, &room_mask_for(&cond, map), map.scale(), &AssemblyConfig::default())?;

    for p in &scene.placements {
        println!("{:<18} at ({:.2}, {:.2}, {:.2}) facing {}", p.asset_id, p.position[0], p.position[1], p.position[2], p.orientation.degrees());
    }
    println!("openings: {:?}", scene.room.openings.iter().map(|o| o.kind).collect::<Vec<_>>());
    println!("out of bounds: {:.0}% of objects", oob(&scene)?.ratio * 100.0);
    println!("colliding: {:.0}% of objects", collision_rate(&scene)?);
    println!("navigable: {:.1}%", navigability(&scene, NAV_CELL, NAV_CUTOFF)?.percent);

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        export_scene(&scene, ExportFormat::Json, &dir.join("scene.json"))?;
        export_scene(&scene, ExportFormat::Obj, &dir.join("scene.obj"))?;
        println!("wrote scene.json and scene.obj to {}", dir.display());
    }
    Ok(())
}
