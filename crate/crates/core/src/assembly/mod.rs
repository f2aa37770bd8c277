//! Scene assembly: asset retrieval, room geometry from masks, placement and export.

mod catalog;
mod export;
mod mesh;
pub mod polygon;
mod scene;

pub use catalog::{size_mse, AssetCatalog, AssetEntry};
pub use export::{
    export_scene, import_scene, scene_from_json, scene_to_json, scene_to_obj, ExportFormat, RoomJson, SceneJson,
    SCENE_FORMAT_VERSION, SCENE_SCHEMA,
};
pub use mesh::{build_room_mesh, Opening, OpeningKind, RoomConfig, RoomMesh};
pub use polygon::{floor_polygon_from_cells, Polygon};
pub use scene::{
    assemble_scene, recover_openings, room_mask_for, AssemblyConfig, Placement, PlacementFailure, Scene3D,
};
