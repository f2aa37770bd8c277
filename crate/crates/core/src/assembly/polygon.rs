use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::extraction::label_regions;
use crate::layout::VOID;

/// Closed polygon in world (x, z); the last vertex connects back to the first.
pub type Polygon = Vec<[f64; 2]>;

/// Signed shoelace area in (x, z); positive for the orientation the tracer emits.
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let [x0, z0] = poly[i];
        let [x1, z1] = poly[(i + 1) % n];
        s += x0 * z1 - x1 * z0;
    }
    0.5 * s
}

pub fn perimeter(poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|i| edge_length(poly, i))
        .sum()
}

pub fn edge_length(poly: &[[f64; 2]], i: usize) -> f64 {
    let a = poly[i];
    let b = poly[(i + 1) % poly.len()];
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Distance from `p` to segment `a`-`b`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dz * dz;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dz) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qz) = (a[0] + t * dx, a[1] + t * dz);
    ((p[0] - qx).powi(2) + (p[1] - qz).powi(2)).sqrt()
}

pub fn boundary_distance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|i| segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Nonzero winding number of `poly` around `p`.
pub fn winding_number(p: [f64; 2], poly: &[[f64; 2]]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Inside test that counts points within `tol` of the boundary as inside.
pub fn contains_point(poly: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    winding_number(p, poly) != 0 || boundary_distance(p, poly) <= tol
}

/// Outer boundary of the largest 4-connected non-void region of a label grid.
///
/// Traced along pixel edges with the region kept on the positive-area side,
/// collinear vertices merged, starting at the smallest (z, x) vertex. Holes
/// are ignored. Ties between equally large regions go to the first in
/// (min row, min col) order.
pub fn floor_polygon_from_cells(height: usize, width: usize, cells: &[u8], scale: f64) -> Result<Polygon> {
    let regions = label_regions(height, width, |i| cells[i] != VOID);
    let mut best: Option<&Vec<usize>> = None;
    for r in &regions {
        if best.map_or(true, |b| r.len() > b.len()) {
            best = Some(r);
        }
    }
    let region = best.ok_or_else(|| Error::Geometry("no floor pixels".into()))?;
    let mut inside = vec![false; height * width];
    for &p in region {
        inside[p] = true;
    }
    let at = |r: isize, c: isize| -> bool {
        r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width && inside[r as usize * width + c as usize]
    };

    // directed edges between integer lattice points (x = col, z = row)
    let mut out: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    for &p in region {
        let (r, c) = ((p / width) as isize, (p % width) as isize);
        let (x, z) = (c as i64, r as i64);
        if !at(r - 1, c) {
            out.entry((x, z)).or_default().push((x + 1, z));
        }
        if !at(r, c + 1) {
            out.entry((x + 1, z)).or_default().push((x + 1, z + 1));
        }
        if !at(r + 1, c) {
            out.entry((x + 1, z + 1)).or_default().push((x, z + 1));
        }
        if !at(r, c - 1) {
            out.entry((x, z + 1)).or_default().push((x, z));
        }
    }
    let start = *out
        .keys()
        .min_by_key(|&&(x, z)| (z, x))
        .expect("region has boundary edges");

    let mut used: HashMap<((i64, i64), (i64, i64)), bool> = HashMap::new();
    let mut loop_pts = vec![start];
    let mut cur = start;
    let mut dir = (0i64, -1i64);
    loop {
        let cands = &out[&cur];
        let next = if cands.len() == 1 {
            cands[0]
        } else {
            // pinch vertex: turn away from the current pixel so voids touching the
            // outside at a corner stay out of the loop
            let away = (dir.1, -dir.0);
            *cands
                .iter()
                .find(|&&n| (n.0 - cur.0, n.1 - cur.1) == away && !used.contains_key(&(cur, n)))
                .or_else(|| cands.iter().find(|&&n| !used.contains_key(&(cur, n))))
                .expect("unused outgoing edge at pinch vertex")
        };
        used.insert((cur, next), true);
        dir = (next.0 - cur.0, next.1 - cur.1);
        cur = next;
        if cur == start {
            break;
        }
        loop_pts.push(cur);
    }

    let n = loop_pts.len();
    let mut merged = Vec::with_capacity(n);
    for i in 0..n {
        let prev = loop_pts[(i + n - 1) % n];
        let p = loop_pts[i];
        let next = loop_pts[(i + 1) % n];
        let d0 = (p.0 - prev.0, p.1 - prev.1);
        let d1 = (next.0 - p.0, next.1 - p.1);
        if d0.0 * d1.1 - d0.1 * d1.0 != 0 {
            merged.push([p.0 as f64 * scale, p.1 as f64 * scale]);
        }
    }
    Ok(merged)
}

/// Ear-clipping triangulation of a simple positive-area polygon.
pub fn triangulate(poly: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            });
            if !blocked {
                tris.push([ia, ib, ic]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(Error::Geometry("polygon could not be triangulated".into()));
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_traces_to_rectangle() {
        let poly = floor_polygon_from_cells(2, 3, &[1; 6], 1.0).unwrap();
        assert_eq!(poly, vec![[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [0.0, 2.0]]);
        assert_eq!(signed_area(&poly), 6.0);
    }

    #[test]
    fn l_shape_has_six_vertices() {
        let cells = [1, 1, 1, 1, 1, 1, 1, 1, 0];
        let poly = floor_polygon_from_cells(3, 3, &cells, 1.0).unwrap();
        assert_eq!(
            poly,
            vec![[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [2.0, 2.0], [2.0, 3.0], [0.0, 3.0]]
        );
        assert_eq!(signed_area(&poly), 8.0);
    }

    #[test]
    fn holes_are_ignored_and_largest_region_wins() {
        let cells = [
            1, 1, 1, 0, 1, //
            1, 0, 1, 0, 0, //
            1, 1, 1, 0, 0,
        ];
        let poly = floor_polygon_from_cells(3, 5, &cells, 0.5).unwrap();
        assert_eq!(signed_area(&poly), 9.0 * 0.25);
        assert!(floor_polygon_from_cells(2, 2, &[0; 4], 1.0).is_err());
    }

    #[test]
    fn pinched_hole_stays_outside_the_loop() {
        // the enclosed void cell touches the exterior only at a corner
        let cells = [1, 1, 1, 1, 0, 1, 1, 1, 0];
        let poly = floor_polygon_from_cells(3, 3, &cells, 1.0).unwrap();
        assert_eq!(signed_area(&poly), 8.0);
        let ring = [
            1, 1, 1, 1, //
            1, 1, 0, 1, //
            1, 0, 1, 1, //
            1, 1, 1, 1,
        ];
        let poly = floor_polygon_from_cells(4, 4, &ring, 1.0).unwrap();
        assert_eq!(poly, vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]]);
    }

    fn ray_cast(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
        let mut inside = false;
        let n = poly.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (poly[i], poly[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    #[test]
    fn winding_agrees_with_ray_casting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cells: Vec<u8> = (0..64).map(|i| if i % 8 < 6 || i / 8 < 3 { 1 } else { 0 }).collect();
        let poly = floor_polygon_from_cells(8, 8, &cells, 0.5).unwrap();
        for _ in 0..10_000 {
            let p = [rng.gen_range(-0.5..4.5), rng.gen_range(-0.5..4.5)];
            if boundary_distance(p, &poly) < 1e-9 {
                continue;
            }
            assert_eq!(winding_number(p, &poly) != 0, ray_cast(p, &poly), "{p:?}");
        }
    }

    fn arb_cells() -> impl Strategy<Value = (usize, usize, Vec<u8>)> {
        (1usize..9, 1usize..9).prop_flat_map(|(h, w)| {
            proptest::collection::vec(0u8..3, h * w).prop_map(move |c| (h, w, c))
        })
    }

    proptest! {
        #[test]
        fn hole_free_area_matches_pixel_count((h, w, cells) in arb_cells()) {
            let Ok(poly) = floor_polygon_from_cells(h, w, &cells, 0.25) else {
                prop_assert!(cells.iter().all(|&c| c == 0));
                return Ok(());
            };
            let regions = label_regions(h, w, |i| cells[i] != VOID);
            let largest = regions.iter().map(|r| r.len()).max().unwrap();
            let first = regions.iter().find(|r| r.len() == largest).unwrap();
            let mut filled = vec![false; h * w];
            for &p in first { filled[p] = true; }
            // count void cells enclosed by the region
            let outside = label_regions(h + 2, w + 2, |i| {
                let (r, c) = (i / (w + 2), i % (w + 2));
                r == 0 || c == 0 || r == h + 1 || c == w + 1 || !filled[(r - 1) * w + (c - 1)]
            });
            let exterior = outside.iter().find(|r| r.contains(&0)).unwrap().len();
            let holes = (h + 2) * (w + 2) - exterior - largest;
            let expect = (largest + holes) as f64 * 0.0625;
            prop_assert!((signed_area(&poly) - expect).abs() < 1e-9);
            let tris = triangulate(&poly).unwrap();
            let tri_area: f64 = tris.iter().map(|t| signed_area(&[poly[t[0]], poly[t[1]], poly[t[2]]])).sum();
            prop_assert!((tri_area - expect).abs() < 1e-9);
        }
    }
}
