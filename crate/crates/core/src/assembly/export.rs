use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::{build_room_mesh, Opening, RoomConfig};
use super::scene::{Placement, PlacementFailure, Scene3D};
use crate::error::{Error, Result};
use crate::layout::io::{read_text, write_text};

pub const SCENE_FORMAT_VERSION: u32 = 1;

/// Schema the scene JSON validates against.
pub const SCENE_SCHEMA: &str = include_str!("../../schema/scene.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomJson {
    pub polygon: Vec<[f64; 2]>,
    pub config: RoomConfig,
    pub openings: Vec<Opening>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneJson {
    pub version: u32,
    pub room: RoomJson,
    pub placements: Vec<Placement>,
    pub failures: Vec<PlacementFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Obj,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "obj" => Ok(Self::Obj),
            other => Err(Error::Config(format!("unknown export format '{other}'"))),
        }
    }
}

pub fn scene_to_json(scene: &Scene3D) -> Result<String> {
    let doc = SceneJson {
        version: SCENE_FORMAT_VERSION,
        room: RoomJson {
            polygon: scene.room.floor.clone(),
            config: scene.room.config,
            openings: scene.room.openings.clone(),
        },
        placements: scene.placements.clone(),
        failures: scene.failures.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses scene JSON and rebuilds the room mesh from its polygon and openings.
pub fn scene_from_json(text: &str) -> Result<Scene3D> {
    let doc: SceneJson = serde_json::from_str(text)?;
    if doc.version != SCENE_FORMAT_VERSION {
        return Err(Error::Data(format!("unsupported scene version {}", doc.version)));
    }
    for p in &doc.placements {
        p.instance()?;
    }
    Ok(Scene3D {
        room: build_room_mesh(&doc.room.polygon, &doc.room.openings, doc.room.config)?,
        placements: doc.placements,
        failures: doc.failures,
    })
}

/// Room mesh followed by one box per placement at its placed size.
pub fn scene_to_obj(scene: &Scene3D) -> Result<String> {
    let mut s = String::new();
    let room = &scene.room;
    writeln!(s, "o room").unwrap();
    for v in &room.vertices {
        writeln!(s, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for t in &room.triangles {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    let mut base = room.vertices.len();
    for (i, p) in scene.placements.iter().enumerate() {
        let inst = p.instance()?;
        let (y0, y1) = inst.vertical_span();
        writeln!(s, "o {}_{i}", p.asset_id).unwrap();
        let corners = inst.footprint_corners();
        for y in [y0, y1] {
            for (x, z) in corners {
                writeln!(s, "v {x} {y} {z}").unwrap();
            }
        }
        // bottom 1-4, top 5-8
        for q in [[1, 4, 3, 2], [5, 6, 7, 8], [1, 2, 6, 5], [2, 3, 7, 6], [3, 4, 8, 7], [4, 1, 5, 8]] {
            writeln!(s, "f {} {} {} {}", base + q[0], base + q[1], base + q[2], base + q[3]).unwrap();
        }
        base += 8;
    }
    Ok(s)
}

pub fn export_scene(scene: &Scene3D, format: ExportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ExportFormat::Json => scene_to_json(scene)?,
        ExportFormat::Obj => scene_to_obj(scene)?,
    };
    write_text(path, &text)
}

pub fn import_scene(path: &Path) -> Result<Scene3D> {
    scene_from_json(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Orientation;

    fn scene() -> Scene3D {
        let poly = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]];
        Scene3D {
            room: build_room_mesh(&poly, &[], RoomConfig::default()).unwrap(),
            placements: vec![Placement {
                asset_id: "bed_00".into(),
                category: 4,
                position: [1.0, 0.0, 1.5],
                orientation: Orientation::ALL[1],
                size: [1.0, 0.5, 2.0],
            }],
            failures: vec![],
        }
    }

    #[test]
    fn json_round_trip_and_obj_counts() {
        let s = scene();
        let back = scene_from_json(&scene_to_json(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let obj = scene_to_obj(&s).unwrap();
        let verts = obj.lines().filter(|l| l.starts_with("v ")).count();
        assert_eq!(verts, s.room.vertices.len() + 8);
    }

    #[test]
    fn files_round_trip() {
        let s = scene();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        export_scene(&s, ExportFormat::Json, &p).unwrap();
        assert_eq!(import_scene(&p).unwrap(), s);
        assert!("ply".parse::<ExportFormat>().is_err());
    }
}
