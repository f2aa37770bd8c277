//! Procedural rooms with known statistics: room grammars, scene sampling and
//! the on-disk dataset layout.

mod dataset;
mod grammar;

pub use dataset::*;
pub use grammar::{
    generate_scene, Annotation, CountRule, GeneratedScene, ObjectRule, PlacementRule, RoomGrammar, Variant,
    FLOOR_ATTEMPTS, PLACEMENT_ATTEMPTS,
};
