use serde::{Deserialize, Serialize};

use super::polygon::{edge_length, signed_area, triangulate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpeningKind {
    Door,
    Window,
}

/// A cutout along one polygon edge, measured in meters from the edge's first vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub kind: OpeningKind,
    pub edge: usize,
    pub start: f64,
    pub end: f64,
}

/// Vertical extents of walls and openings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    pub wall_height: f64,
    pub door_height: f64,
    pub window_bottom: f64,
    pub window_top: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            wall_height: 3.0,
            door_height: 2.0,
            window_bottom: 0.5,
            window_top: 2.0,
        }
    }
}

impl RoomConfig {
    pub fn vertical_span(&self, kind: OpeningKind) -> (f64, f64) {
        match kind {
            OpeningKind::Door => (0.0, self.door_height),
            OpeningKind::Window => (self.window_bottom, self.window_top),
        }
    }
}

const SPAN_TOL: f64 = 1e-9;

/// Floor triangles plus wall panels around the openings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub floor: Vec<[f64; 2]>,
    pub openings: Vec<Opening>,
    pub config: RoomConfig,
    /// Triangles `0..floor_triangles` are the floor; the rest are walls.
    pub floor_triangles: usize,
}

fn tri_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

impl RoomMesh {
    fn area_of(&self, tris: &[[usize; 3]]) -> f64 {
        tris.iter()
            .map(|t| tri_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .sum()
    }

    pub fn floor_area(&self) -> f64 {
        self.area_of(&self.triangles[..self.floor_triangles])
    }

    pub fn wall_area(&self) -> f64 {
        self.area_of(&self.triangles[self.floor_triangles..])
    }
}

fn check_openings(poly: &[[f64; 2]], openings: &[Opening]) -> Result<()> {
    for o in openings {
        if o.edge >= poly.len() {
            return Err(Error::Geometry(format!("opening on missing edge {}", o.edge)));
        }
        let len = edge_length(poly, o.edge);
        if !(o.start >= -SPAN_TOL && o.end <= len + SPAN_TOL && o.start < o.end) {
            return Err(Error::Geometry(format!(
                "opening [{}, {}] off edge {} of length {len}",
                o.start, o.end, o.edge
            )));
        }
    }
    for (i, a) in openings.iter().enumerate() {
        for b in &openings[i + 1..] {
            if a.edge == b.edge && a.start < b.end - SPAN_TOL && b.start < a.end - SPAN_TOL {
                return Err(Error::Geometry(format!("openings overlap on edge {}", a.edge)));
            }
        }
    }
    Ok(())
}

/// Triangulated floor and extruded walls with rectangular cutouts.
pub fn build_room_mesh(polygon: &[[f64; 2]], openings: &[Opening], config: RoomConfig) -> Result<RoomMesh> {
    if polygon.len() < 3 || !(signed_area(polygon) > 0.0) {
        return Err(Error::Geometry("floor polygon is degenerate".into()));
    }
    check_openings(polygon, openings)?;
    let mut vertices: Vec<[f64; 3]> = polygon.iter().map(|p| [p[0], 0.0, p[1]]).collect();
    let mut triangles = triangulate(polygon)?;
    let floor_triangles = triangles.len();
    let h = config.wall_height;

    let n = polygon.len();
    for e in 0..n {
        let a = polygon[e];
        let b = polygon[(e + 1) % n];
        let len = edge_length(polygon, e);
        let point = |s: f64, y: f64| {
            let t = s / len;
            [a[0] + t * (b[0] - a[0]), y, a[1] + t * (b[1] - a[1])]
        };
        let mut quad = |s0: f64, s1: f64, y0: f64, y1: f64, vertices: &mut Vec<[f64; 3]>| {
            if s1 - s0 <= SPAN_TOL || y1 - y0 <= SPAN_TOL {
                return;
            }
            let base = vertices.len();
            vertices.extend([point(s0, y0), point(s1, y0), point(s1, y1), point(s0, y1)]);
            triangles.push([base, base + 1, base + 2]);
            triangles.push([base, base + 2, base + 3]);
        };
        let mut cuts: Vec<&Opening> = openings.iter().filter(|o| o.edge == e).collect();
        cuts.sort_by(|x, y| x.start.total_cmp(&y.start));
        let mut s = 0.0;
        for o in cuts {
            let (start, end) = (o.start.max(0.0), o.end.min(len));
            quad(s, start, 0.0, h, &mut vertices);
            let (y0, y1) = config.vertical_span(o.kind);
            quad(start, end, 0.0, y0, &mut vertices);
            quad(start, end, y1, h, &mut vertices);
            s = end;
        }
        quad(s, len, 0.0, h, &mut vertices);
    }
    Ok(RoomMesh {
        vertices,
        triangles,
        floor: polygon.to_vec(),
        openings: openings.to_vec(),
        config,
        floor_triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::polygon::perimeter;
    use proptest::prelude::*;

    fn square(side: f64) -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]]
    }

    #[test]
    fn solid_walls_area_is_perimeter_times_height() {
        let m = build_room_mesh(&square(4.0), &[], RoomConfig::default()).unwrap();
        assert_eq!(m.wall_area(), 16.0 * 3.0);
        assert_eq!(m.floor_area(), 16.0);
        assert_eq!(m.triangles.len() - m.floor_triangles, 8);
    }

    #[test]
    fn door_and_window_cutouts() {
        let door = Opening {
            kind: OpeningKind::Door,
            edge: 1,
            start: 1.0,
            end: 2.0,
        };
        let m = build_room_mesh(&square(4.0), &[door], RoomConfig::default()).unwrap();
        assert!((m.wall_area() - (48.0 - 2.0)).abs() < 1e-12);
        let window = Opening {
            kind: OpeningKind::Window,
            edge: 3,
            start: 0.5,
            end: 1.5,
        };
        let m = build_room_mesh(&square(4.0), &[window], RoomConfig::default()).unwrap();
        assert!((m.wall_area() - (48.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn bad_openings_rejected() {
        let o = |edge, start, end| Opening {
            kind: OpeningKind::Door,
            edge,
            start,
            end,
        };
        let cfg = RoomConfig::default();
        assert!(build_room_mesh(&square(2.0), &[o(4, 0.0, 1.0)], cfg).is_err());
        assert!(build_room_mesh(&square(2.0), &[o(0, 1.5, 2.5)], cfg).is_err());
        assert!(build_room_mesh(&square(2.0), &[o(0, 0.0, 1.0), o(0, 0.5, 1.5)], cfg).is_err());
        assert!(build_room_mesh(&square(2.0), &[o(0, 0.0, 1.0), o(0, 1.0, 1.5)], cfg).is_ok());
    }

    proptest! {
        #[test]
        fn wall_area_bookkeeping(side in 2usize..12, picks in proptest::collection::vec((0usize..4, 0usize..12, 1usize..4, any::<bool>()), 0..6)) {
            let poly = square(side as f64 * 0.5);
            let cfg = RoomConfig::default();
            let mut openings: Vec<Opening> = Vec::new();
            for (edge, start, width, door) in picks {
                let (s, e) = (start as f64 * 0.5, (start + width) as f64 * 0.5);
                if e > side as f64 * 0.5 { continue; }
                if openings.iter().any(|o| o.edge == edge && s < o.end && o.start < e) { continue; }
                openings.push(Opening { kind: if door { OpeningKind::Door } else { OpeningKind::Window }, edge, start: s, end: e });
            }
            let m = build_room_mesh(&poly, &openings, cfg).unwrap();
            let cut: f64 = openings.iter().map(|o| {
                let (y0, y1) = cfg.vertical_span(o.kind);
                (o.end - o.start) * (y1 - y0)
            }).sum();
            prop_assert!((m.wall_area() - (perimeter(&poly) * 3.0 - cut)).abs() < 1e-9);
            prop_assert!((m.floor_area() - signed_area(&poly)).abs() < 1e-9);
        }
    }
}
