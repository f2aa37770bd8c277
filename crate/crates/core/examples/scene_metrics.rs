//! Scene plausibility metrics on hand-built rooms: category KL, out of
//! bounds, collisions and navigability.

use roomdiff::assembly::{build_room_mesh, Placement, RoomConfig, Scene3D};
use roomdiff::layout::Orientation;
use roomdiff::metrics::{ckl, collision_rate, navigability, oob, CategoryHistogram, NAV_CELL, NAV_CUTOFF};

fn place(id: &str, category: u8, size: [f64; 3], position: [f64; 3]) -> roomdiff::Result<Placement> {
    Ok(Placement {
        asset_id: id.into(),
        category,
        position,
        orientation: Orientation::new(0)?,
        size,
    })
}

fn main() -> roomdiff::Result<()> {
    let beds = CategoryHistogram::from_categories([4, 4, 5]);
    let sofas = CategoryHistogram::from_categories([10]);
    println!("CKL x100 identical: {:.4}", 100.0 * ckl(&beds, &beds)?);
    println!("CKL x100 bedroom vs living room: {:.4}", 100.0 * ckl(&beds, &sofas)?);

    let floor = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]];
    let room = build_room_mesh(&floor, &[], RoomConfig::default())?;
    let scene = Scene3D {
        room,
        placements: vec![
            // bed against the left wall
            place("bed", 4, [1.6, 0.5, 2.0], [0.8, 0.0, 1.5])?,
            // nightstand overlapping the bed
            place("nightstand", 5, [0.5, 0.5, 0.5], [1.7, 0.0, 0.4])?,
            // wardrobe poking through the right wall
            place("wardrobe", 6, [1.0, 2.0, 0.6], [3.8, 0.0, 2.6])?,
            // lamp above the bed, too high to block walking
            place("ceiling_lamp", 7, [0.4, 0.3, 0.4], [0.8, 2.5, 1.5])?,
        ],
        failures: vec![],
    };
    let o = oob(&scene)?;
    println!("out of bounds: {:?} ({:.0}% of objects)", o.flags, o.ratio * 100.0);
    println!("colliding: {:.0}% of objects", collision_rate(&scene)?);
    let nav = navigability(&scene, NAV_CELL, NAV_CUTOFF)?;
    println!(
        "navigable: {:.1}% ({} of {} free cells in the largest region)",
        nav.percent, nav.largest_region, nav.free_cells
    );
    Ok(())
}
