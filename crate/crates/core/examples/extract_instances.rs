//! Splits a synthetic map into per-category connected components and shows
//! how the size threshold drops speckles.

use roomdiff::extraction::{compute_thresholds, connected_components, extract_instances};
use roomdiff::layout::io::map_to_text;
use roomdiff::layout::{CategoryPalette, GridSpec};
use roomdiff::synth::{generate_scene, scene_rng, RoomGrammar};

fn main() -> roomdiff::Result<()> {
    let palette = CategoryPalette::desk();
    let grammar = RoomGrammar::dining_room();
    let layouts = (0..200)
        .map(|i| generate_scene(&grammar, &palette, GridSpec::DESK, &mut scene_rng(3, i)).map(|s| s.layout))
        .collect::<roomdiff::Result<Vec<_>>>()?;
    let thresholds = compute_thresholds(&layouts)?;

    let scene = &layouts[0];
    let mut cells = scene.map().cells().to_vec();
    // a stray one-pixel chair in a floor corner
    let stray = cells.iter().position(|&c| c == 1).expect("room has floor");
    cells[stray] = palette.index_of("dining_chair").expect("desk palette");
    let map = scene.map().with_cells(cells)?;
    print!("{}", map_to_text(&map));

    let room = map.room_pixels() as f64;
    for cat in palette.object_indices() {
        let comps = connected_components(&map, cat)?;
        if !comps.is_empty() {
            let sizes: Vec<usize> = comps.iter().map(|c| c.count()).collect();
            println!(
                "{:<12} keeps components of at least {:.1} px, found {sizes:?}",
                palette.name(cat as usize).unwrap_or("?"),
                thresholds.get(cat) * room
            );
        }
    }
    let kept = extract_instances(&map, &thresholds)?;
    println!("kept {} instances (ground truth has {})", kept.len(), scene.instances().len());
    Ok(())
}
