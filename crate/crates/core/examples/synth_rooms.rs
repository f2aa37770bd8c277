//! Draws one room from each grammar and prints it, then optionally writes a
//! small dataset.
//!
//! ```text
//! cargo run --example synth_rooms -- [dataset_dir]
//! ```

use roomdiff::layout::io::map_to_text;
use roomdiff::layout::{CategoryPalette, GridSpec};
use roomdiff::synth::{build_dataset, generate_scene, scene_rng, DatasetConfig, RoomGrammar};

fn main() -> roomdiff::Result<()> {
    let palette = CategoryPalette::desk();
    for (i, grammar) in RoomGrammar::defaults().iter().enumerate() {
        let scene = generate_scene(grammar, &palette, GridSpec::DESK, &mut scene_rng(7, i))?;
        println!("{} with {} objects", grammar.room_type, scene.annotations.len());
        for inst in scene.layout.instances() {
            println!(
                "  {:<12} size {:.2?} at ({:.2}, {:.2}, {:.2}) facing {}",
                palette.name(inst.category as usize).unwrap_or("?"),
                inst.size,
                inst.position[0],
                inst.position[1],
                inst.position[2],
                inst.orientation.degrees()
            );
        }
        println!("{}", map_to_text(scene.layout.map()));
    }

    if let Some(dir) = std::env::args().nth(1) {
        let config = DatasetConfig {
            scenes: 100,
            ..Default::default()
        };
        let manifest = build_dataset(&config, &palette, dir.as_ref())?;
        println!(
            "wrote {} train / {} val / {} test scenes to {dir}",
            manifest.counts.train, manifest.counts.val, manifest.counts.test
        );
    }
    Ok(())
}
