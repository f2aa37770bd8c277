//! Builds the wall and floor mesh of an L-shaped room with a door and a
//! window, and writes it as OBJ.
//!
//! ```text
//! cargo run --example room_mesh -- [out.obj]
//! ```

use roomdiff::assembly::{build_room_mesh, scene_to_obj, Opening, OpeningKind, RoomConfig, Scene3D};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let floor = [[0.0, 0.0], [5.0, 0.0], [5.0, 3.0], [3.0, 3.0], [3.0, 5.0], [0.0, 5.0]];
    let config = RoomConfig::default();
    let bare = build_room_mesh(&floor, &[], config)?;
    let openings = [
        Opening { kind: OpeningKind::Door, edge: 0, start: 1.0, end: 2.0 },
        Opening { kind: OpeningKind::Window, edge: 5, start: 1.0, end: 3.0 },
    ];
    let mesh = build_room_mesh(&floor, &openings, config)?;
    println!("floor area {:.2} m2", mesh.floor_area());
    println!("wall area {:.2} m2 without openings, {:.2} m2 with them", bare.wall_area(), mesh.wall_area());
    println!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());

    if let Some(path) = std::env::args().nth(1) {
        let scene = Scene3D { room: mesh, placements: vec![], failures: vec![] };
        std::fs::write(&path, scene_to_obj(&scene)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
