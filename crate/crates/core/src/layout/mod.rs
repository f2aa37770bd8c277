//! Shared data model: palettes, semantic maps, masks, instances and the
//! pixel/world coordinate convention (rows along +z, columns along +x,
//! pixel centers at half-integer offsets, floor plane at y = 0).

mod grid;
pub mod io;
pub mod palette;
mod scene;

pub use grid::{
    canvas_offset, one_hot, pad_to_canvas, pixel_to_world, world_to_pixel, ArchMask,
    CategoricalGrid, GridSpec, SemanticMap,
};
pub use palette::{CategoryPalette, DOOR, FIRST_OBJECT, FLOOR, VOID, WINDOW};
pub use scene::{
    footprint_corners, footprint_extents, ConditionKind, ConditionSpec, ObjectInstance,
    Orientation, RoomType, SceneLayout,
};
