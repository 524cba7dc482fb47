//! Isosurface extraction on a regular lattice.
//!
//! The 256-entry case table is generated at first use rather than
//! transcribed. For every corner sign pattern, each cube face's contour
//! chords are found by walking the face's four corners counterclockwise
//! (as seen from outside the cell) and pairing every outside→inside
//! crossing with the next crossing along the walk. That pairing depends
//! only on the face's own corner signs, so the two cells sharing a face
//! always cut it with the same chords and the output is watertight;
//! ambiguous faces (two diagonal inside corners) resolve by isolating the
//! inside corners. Tracing the directed chords around the cell yields
//! oriented polygons whose fan triangulations wind counterclockwise seen
//! from outside the enclosed region.

use super::BasemeshError;
use crate::mesh::HalfedgeMesh;
use crate::surface::Surface;
use crate::Vec3;
use std::collections::HashMap;
use std::sync::OnceLock;

/// Corner `c` of the unit cell sits at offset (c&1, c>>1&1, c>>2&1).
/// Edges are grouped by axis — 0–3 along x, 4–7 along y, 8–11 along z —
/// and the first corner of each pair is the lattice-lower endpoint.
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Face corner cycles, counterclockwise as seen from outside the cell.
const FACES: [[usize; 4]; 6] = [
    [0, 4, 6, 2], // x = 0
    [1, 3, 7, 5], // x = 1
    [0, 1, 5, 4], // y = 0
    [2, 6, 7, 3], // y = 1
    [0, 2, 3, 1], // z = 0
    [4, 5, 7, 6], // z = 1
];

fn edge_between(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    EDGES
        .iter()
        .position(|&e| e == key)
        .expect("corner pair spans a cube edge")
}

/// Triangles (as cube-edge index triples) cut by one corner sign pattern;
/// bit c of `mask` set means corner c is inside (field < 0).
fn case_triangles(mask: u8) -> Vec<[u8; 3]> {
    const NONE: u8 = u8::MAX;
    let inside = |c: usize| mask >> c & 1 == 1;
    // next[e] = the edge the chord leaving crossing e arrives at.
    let mut next = [NONE; 12];
    for cycle in &FACES {
        let mut crossings = [(0usize, false); 4];
        let mut n = 0;
        for i in 0..4 {
            let (a, b) = (cycle[i], cycle[(i + 1) % 4]);
            if inside(a) != inside(b) {
                crossings[n] = (edge_between(a, b), !inside(a));
                n += 1;
            }
        }
        // The inside/outside state alternates at each crossing, so an
        // entry's cyclic successor is always an exit.
        for i in 0..n {
            let (e, is_entry) = crossings[i];
            if is_entry {
                next[e] = crossings[(i + 1) % n].0 as u8;
            }
        }
    }
    // Every crossed edge is an entry on exactly one of its two faces, so
    // `next` restricted to crossed edges is a permutation; its cycles are
    // the closed contour polygons of this cell.
    let mut tris = Vec::new();
    let mut used = [false; 12];
    for start in 0..12usize {
        if next[start] == NONE || used[start] {
            continue;
        }
        let mut cycle = vec![start as u8];
        used[start] = true;
        let mut cur = next[start] as usize;
        while cur != start {
            cycle.push(cur as u8);
            used[cur] = true;
            cur = next[cur] as usize;
        }
        for i in 1..cycle.len() - 1 {
            tris.push([cycle[0], cycle[i], cycle[i + 1]]);
        }
    }
    tris
}

fn case_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|m| case_triangles(m as u8)))
}

/// Extracts the `iso` level set of `surface` as a closed manifold
/// triangle mesh. Implicit surfaces contour φ = iso; point clouds contour
/// their winding number w = iso (pass 0.5).
///
/// The lattice has `resolution` cells per axis over the surface's padded
/// bounding box. Each output vertex is created once per crossed lattice
/// edge, so triangles meeting across cell boundaries share bit-identical
/// coordinates.
pub fn marching_cubes(
    surface: &Surface,
    resolution: usize,
    iso: f64,
) -> Result<HalfedgeMesh, BasemeshError> {
    if resolution < 8 {
        return Err(BasemeshError::ResolutionTooLow { resolution });
    }
    let (blo, bhi) = surface.bounds();
    let extent = bhi - blo;
    // Pad by ~2 cells so the lattice boundary stays strictly outside even
    // when the surface touches its bounding box.
    let pad = extent * (2.0 / resolution as f64) + Vec3::repeat(1e-9 * extent.norm().max(1e-9));
    let lo = blo - pad;
    let h = (extent + pad * 2.0) / resolution as f64;

    let implicit = surface.is_implicit();
    // Negative inside. Evaluation failures (points outside a sampled
    // grid's domain) and non-finite values read as far outside, which
    // closes the surface at the domain boundary instead of leaving holes.
    let field = |p: Vec3| -> f64 {
        let v = if implicit {
            surface.eval(p).map(|phi| phi - iso).unwrap_or(f64::MAX)
        } else {
            surface.winding_number(p).map(|w| iso - w).unwrap_or(f64::MAX)
        };
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    };

    let n = resolution + 1;
    let point =
        |i: usize, j: usize, k: usize| lo + Vec3::new(i as f64 * h.x, j as f64 * h.y, k as f64 * h.z);
    let eval_slab = |k: usize| -> Vec<f64> {
        let mut slab = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                slab.push(field(point(i, j, k)));
            }
        }
        slab
    };

    let table = case_table();
    let mut verts: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // Lattice edge (lower endpoint, axis) → output vertex. Streaming two
    // value slabs keeps memory flat in the resolution's cube.
    let mut edge_vertex: HashMap<u64, u32> = HashMap::new();

    let mut below = eval_slab(0);
    for k in 0..resolution {
        let above = eval_slab(k + 1);
        for j in 0..resolution {
            for i in 0..resolution {
                let f = [
                    below[j * n + i],
                    below[j * n + i + 1],
                    below[(j + 1) * n + i],
                    below[(j + 1) * n + i + 1],
                    above[j * n + i],
                    above[j * n + i + 1],
                    above[(j + 1) * n + i],
                    above[(j + 1) * n + i + 1],
                ];
                let mut mask = 0usize;
                for (c, v) in f.iter().enumerate() {
                    if *v < 0.0 {
                        mask |= 1 << c;
                    }
                }
                if mask == 0 || mask == 255 {
                    continue;
                }
                for tri in &table[mask] {
                    let ids = tri.map(|e| {
                        let e = e as usize;
                        let (a, b) = EDGES[e];
                        let axis = e / 4;
                        let (gi, gj, gk) = (i + (a & 1), j + (a >> 1 & 1), k + (a >> 2 & 1));
                        let key = (((gi * n + gj) * n + gk) * 3 + axis) as u64;
                        *edge_vertex.entry(key).or_insert_with(|| {
                            let pa = point(gi, gj, gk);
                            let mut pb = pa;
                            pb[axis] += h[axis];
                            let (fa, fb) = (f[a], f[b]);
                            // The clamp keeps the vertex strictly inside
                            // its edge even when a corner value is ~0, so
                            // no two lattice edges emit the same point.
                            let t = (fa / (fa - fb)).clamp(1e-3, 1.0 - 1e-3);
                            verts.push(pa + (pb - pa) * t);
                            (verts.len() - 1) as u32
                        })
                    });
                    faces.push(ids);
                }
            }
        }
        below = above;
    }

    if faces.is_empty() {
        return Err(BasemeshError::EmptyLevelSet);
    }
    Ok(HalfedgeMesh::from_faces(verts, &faces)?)
}
