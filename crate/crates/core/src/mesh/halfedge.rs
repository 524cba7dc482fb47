//! Halfedge mesh storage and structural validation.
//!
//! Twins are stored adjacently so `twin(h) = h ^ 1` and the undirected edge
//! id is `h >> 1`; connectivity surgery (see `surgery.rs`) reuses edge slots
//! where possible and marks removed elements dead rather than shifting
//! indices, so ids stay stable until [`HalfedgeMesh::compacted`] is called.
//! Meshes built by [`HalfedgeMesh::from_faces`] are always compact (no dead
//! slots).

use std::collections::HashMap;

use super::{bary_lerp, MeshError, SurfacePoint};
use crate::Vec3;

/// Sentinel for "not yet wired" slots during construction.
const UNSET: u32 = u32::MAX;

/// Minimum face area accepted anywhere in the crate (squared world units).
pub(crate) const MIN_FACE_AREA: f64 = 1e-12;

/// Orthonormal face frame: `tangent1 × tangent2 = normal`.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub normal: Vec3,
    pub tangent1: Vec3,
    pub tangent2: Vec3,
}

/// Closed, oriented, manifold triangle mesh.
#[derive(Debug, Clone)]
pub struct HalfedgeMesh {
    pub(crate) positions: Vec<Vec3>,
    /// Next halfedge in the face cycle (3-cycles).
    pub(crate) next: Vec<u32>,
    /// Vertex each halfedge leaves.
    pub(crate) origin: Vec<u32>,
    /// Incident face of each halfedge.
    pub(crate) face: Vec<u32>,
    /// One halfedge of each face (the face's "first" edge; deterministic).
    pub(crate) face_halfedge: Vec<u32>,
    /// One outgoing halfedge per vertex.
    pub(crate) vertex_halfedge: Vec<u32>,
    /// Liveness flags; `from_faces` output has everything alive.
    pub(crate) vertex_alive: Vec<bool>,
    pub(crate) edge_alive: Vec<bool>,
    pub(crate) face_alive: Vec<bool>,
    pub(crate) n_dead_vertices: usize,
    pub(crate) n_dead_edges: usize,
    pub(crate) n_dead_faces: usize,
}

impl HalfedgeMesh {
    /// Builds and validates a mesh from positions and oriented triangles.
    ///
    /// Rejects out-of-range indices, repeated vertices within a face,
    /// near-zero areas, non-manifold or inconsistently oriented edges,
    /// boundary edges, and vertices whose incident faces do not form a
    /// single disk.
    pub fn from_faces(positions: Vec<Vec3>, faces: &[[u32; 3]]) -> Result<Self, MeshError> {
        if positions.is_empty() || faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = positions.len();
        for (fi, f) in faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace { face: fi });
            }
            for &v in f {
                if v as usize >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        index: v,
                        count: nv,
                    });
                }
            }
            let [a, b, c] = f.map(|v| positions[v as usize]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if !(area >= MIN_FACE_AREA) {
                return Err(MeshError::ZeroAreaFace { face: fi, area });
            }
        }

        let nh = faces.len() * 3;
        let mut next = vec![UNSET; nh];
        let mut origin = vec![UNSET; nh];
        let mut face = vec![UNSET; nh];
        let mut face_halfedge = vec![UNSET; faces.len()];
        let mut vertex_halfedge = vec![UNSET; nv];

        // Key: undirected vertex pair; value: edge id whose slot 2e carries
        // the first-seen direction.
        let mut edge_of: HashMap<(u32, u32), u32> = HashMap::with_capacity(nh / 2);
        let mut n_edges: u32 = 0;
        // Halfedge slot per face corner, filled as edges are discovered.
        let mut corner_slot = vec![UNSET; nh];

        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let slot = match edge_of.get(&key) {
                    None => {
                        let e = n_edges;
                        n_edges += 1;
                        edge_of.insert(key, e);
                        2 * e
                    }
                    Some(&e) => {
                        let h0 = (2 * e) as usize;
                        if origin[2 * e as usize + 1] != UNSET {
                            return Err(MeshError::NonManifoldEdge { v0: key.0, v1: key.1 });
                        }
                        if origin[h0] == a {
                            // Second face traverses the edge in the same
                            // direction: opposite orientations.
                            return Err(MeshError::InconsistentOrientation {
                                v0: key.0,
                                v1: key.1,
                            });
                        }
                        2 * e + 1
                    }
                };
                // `next`/`face` arrays may be shorter than the discovered
                // slot count; grow lazily (at most nh slots total since each
                // face contributes 3 halfedges).
                let s = slot as usize;
                if s >= origin.len() {
                    let new_len = s + 2;
                    next.resize(new_len, UNSET);
                    origin.resize(new_len, UNSET);
                    face.resize(new_len, UNSET);
                }
                origin[s] = a;
                face[s] = fi as u32;
                corner_slot[fi * 3 + k] = slot;
                if vertex_halfedge[a as usize] == UNSET {
                    vertex_halfedge[a as usize] = slot;
                }
            }
            for k in 0..3 {
                let h = corner_slot[fi * 3 + k];
                let hn = corner_slot[fi * 3 + (k + 1) % 3];
                next[h as usize] = hn;
            }
            face_halfedge[fi] = corner_slot[fi * 3];
        }

        // Unpaired slots are boundary edges.
        for (&(v0, v1), &e) in &edge_of {
            if origin[2 * e as usize + 1] == UNSET {
                return Err(MeshError::BoundaryEdge { v0, v1 });
            }
        }

        let mesh = Self {
            positions,
            next,
            origin,
            face,
            face_halfedge,
            vertex_halfedge,
            vertex_alive: vec![true; nv],
            edge_alive: vec![true; n_edges as usize],
            face_alive: vec![true; faces.len()],
            n_dead_vertices: 0,
            n_dead_edges: 0,
            n_dead_faces: 0,
        };
        // Disk-link check: the twin-orbit around each vertex must visit every
        // outgoing halfedge exactly once.
        let mut valence = vec![0u32; nv];
        for h in 0..mesh.origin.len() {
            valence[mesh.origin[h] as usize] += 1;
        }
        for v in 0..nv as u32 {
            if mesh.vertex_halfedge[v as usize] == UNSET {
                // Isolated vertices are tolerated at build (files may list
                // unreferenced vertices); they are dropped by `compacted`.
                continue;
            }
            let mut count = 0u32;
            let start = mesh.vertex_halfedge[v as usize];
            let mut h = start;
            loop {
                count += 1;
                if count > valence[v as usize] {
                    return Err(MeshError::NonDiskVertex { vertex: v });
                }
                h = mesh.next[(h ^ 1) as usize];
                if h == start {
                    break;
                }
            }
            if count != valence[v as usize] {
                return Err(MeshError::NonDiskVertex { vertex: v });
            }
        }
        Ok(mesh)
    }

    // ----- sizes -----

    /// Number of live vertices.
    pub fn n_vertices(&self) -> usize {
        self.positions.len() - self.n_dead_vertices
    }
    /// Number of live undirected edges.
    pub fn n_edges(&self) -> usize {
        self.edge_alive.len() - self.n_dead_edges
    }
    /// Number of live faces.
    pub fn n_faces(&self) -> usize {
        self.face_halfedge.len() - self.n_dead_faces
    }
    /// Total slot counts (live + dead), for iteration bounds.
    pub fn vertex_slots(&self) -> usize {
        self.positions.len()
    }
    pub fn edge_slots(&self) -> usize {
        self.edge_alive.len()
    }
    pub fn face_slots(&self) -> usize {
        self.face_halfedge.len()
    }
    pub fn is_compact(&self) -> bool {
        self.n_dead_vertices == 0 && self.n_dead_edges == 0 && self.n_dead_faces == 0
    }

    /// V − E + F over live elements.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    // ----- liveness -----

    pub fn vertex_is_alive(&self, v: u32) -> bool {
        self.vertex_alive[v as usize]
    }
    pub fn edge_is_alive(&self, e: u32) -> bool {
        self.edge_alive[e as usize]
    }
    pub fn face_is_alive(&self, f: u32) -> bool {
        self.face_alive[f as usize]
    }

    // ----- connectivity queries (valid on live elements) -----

    #[inline]
    pub fn twin(&self, h: u32) -> u32 {
        h ^ 1
    }
    #[inline]
    pub fn next(&self, h: u32) -> u32 {
        self.next[h as usize]
    }
    /// Previous halfedge in the 3-cycle.
    #[inline]
    pub fn prev(&self, h: u32) -> u32 {
        self.next[self.next[h as usize] as usize]
    }
    /// Vertex the halfedge leaves.
    #[inline]
    pub fn origin_of(&self, h: u32) -> u32 {
        self.origin[h as usize]
    }
    /// Vertex the halfedge points at.
    #[inline]
    pub fn target_of(&self, h: u32) -> u32 {
        self.origin[(h ^ 1) as usize]
    }
    #[inline]
    pub fn face_of(&self, h: u32) -> u32 {
        self.face[h as usize]
    }
    /// Undirected edge id of a halfedge.
    #[inline]
    pub fn edge_of(&self, h: u32) -> u32 {
        h >> 1
    }
    /// Canonical halfedge of an edge.
    #[inline]
    pub fn halfedge_of_edge(&self, e: u32) -> u32 {
        2 * e
    }
    #[inline]
    pub fn halfedge_of_face(&self, f: u32) -> u32 {
        self.face_halfedge[f as usize]
    }
    #[inline]
    pub fn halfedge_of_vertex(&self, v: u32) -> u32 {
        self.vertex_halfedge[v as usize]
    }
    /// Endpoints of an edge (origin of its canonical halfedge first).
    pub fn edge_endpoints(&self, e: u32) -> (u32, u32) {
        (self.origin_of(2 * e), self.target_of(2 * e))
    }

    #[inline]
    pub fn position(&self, v: u32) -> Vec3 {
        self.positions[v as usize]
    }
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }
    pub(crate) fn set_position(&mut self, v: u32, p: Vec3) {
        self.positions[v as usize] = p;
    }

    /// The three vertices of a face in orientation order, starting at the
    /// face's first halfedge.
    pub fn face_vertices(&self, f: u32) -> [u32; 3] {
        let h0 = self.face_halfedge[f as usize];
        let h1 = self.next(h0);
        let h2 = self.next(h1);
        [self.origin_of(h0), self.origin_of(h1), self.origin_of(h2)]
    }
    pub fn face_positions(&self, f: u32) -> [Vec3; 3] {
        self.face_vertices(f).map(|v| self.position(v))
    }

    pub fn face_area(&self, f: u32) -> f64 {
        let [a, b, c] = self.face_positions(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit face normal (CCW orientation).
    pub fn face_normal(&self, f: u32) -> Result<Vec3, MeshError> {
        let [a, b, c] = self.face_positions(f);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 2.0 * MIN_FACE_AREA {
            return Err(MeshError::ZeroAreaFace {
                face: f as usize,
                area: 0.5 * len,
            });
        }
        Ok(n / len)
    }

    /// Sum of live face areas.
    pub fn total_area(&self) -> f64 {
        self.live_faces().map(|f| self.face_area(f)).sum()
    }

    /// Axis-aligned bounding box over live vertices.
    pub fn bbox(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in self.live_vertices() {
            let p = self.position(v);
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        (lo, hi)
    }

    /// Iterator over live face ids.
    pub fn live_faces(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.face_slots() as u32).filter(move |&f| self.face_alive[f as usize])
    }
    /// Iterator over live edge ids.
    pub fn live_edges(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.edge_slots() as u32).filter(move |&e| self.edge_alive[e as usize])
    }
    /// Iterator over live vertex ids.
    pub fn live_vertices(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.vertex_slots() as u32).filter(move |&v| self.vertex_alive[v as usize])
    }

    /// Outgoing halfedges around a vertex (counter-clockwise orbit).
    pub fn outgoing(&self, v: u32) -> Vec<u32> {
        let start = self.vertex_halfedge[v as usize];
        let mut out = Vec::with_capacity(8);
        let mut h = start;
        loop {
            out.push(h);
            h = self.next(h ^ 1);
            if h == start {
                break;
            }
            debug_assert!(out.len() <= self.origin.len(), "broken vertex orbit");
        }
        out
    }

    /// Vertex ids adjacent to `v`.
    pub fn vertex_neighbors(&self, v: u32) -> Vec<u32> {
        self.outgoing(v).iter().map(|&h| self.target_of(h)).collect()
    }

    pub fn vertex_valence(&self, v: u32) -> usize {
        self.outgoing(v).len()
    }

    /// Position of a barycentric surface point.
    pub fn embed(&self, p: SurfacePoint) -> Vec3 {
        bary_lerp(&self.face_positions(p.face), &p.bary)
    }

    /// Orthonormal frame of the face under `p`: the normal is the face
    /// normal; `tangent1` is the face's first edge projected into the
    /// tangent plane and normalized; `tangent2 = normal × tangent1`.
    pub fn frame_at(&self, p: &SurfacePoint) -> Result<Frame, MeshError> {
        let normal = self.face_normal(p.face)?;
        let h0 = self.face_halfedge[p.face as usize];
        let e = self.position(self.target_of(h0)) - self.position(self.origin_of(h0));
        let t = e - normal * e.dot(&normal);
        let tangent1 = t / t.norm();
        let tangent2 = normal.cross(&tangent1);
        Ok(Frame {
            normal,
            tangent1,
            tangent2,
        })
    }

    /// Faces grouped by twin-adjacency; returns one label per face slot
    /// (dead slots get `u32::MAX`) and the label count. Labels are assigned
    /// in increasing face-id order of first contact.
    pub fn face_components(&self) -> (Vec<u32>, usize) {
        let mut label = vec![UNSET; self.face_slots()];
        let mut n_labels = 0usize;
        let mut stack = Vec::new();
        for f0 in self.live_faces() {
            if label[f0 as usize] != UNSET {
                continue;
            }
            let current = n_labels as u32;
            n_labels += 1;
            stack.push(f0);
            label[f0 as usize] = current;
            while let Some(f) = stack.pop() {
                let h0 = self.face_halfedge[f as usize];
                for h in [h0, self.next(h0), self.prev(h0)] {
                    let g = self.face_of(h ^ 1);
                    if label[g as usize] == UNSET {
                        label[g as usize] = current;
                        stack.push(g);
                    }
                }
            }
        }
        (label, n_labels)
    }

    /// Connected component with the largest total area (ties: the component
    /// that contains the lowest face id, which is the lowest label).
    pub fn largest_component(&self) -> Result<HalfedgeMesh, MeshError> {
        if self.n_faces() == 0 {
            return Err(MeshError::Empty);
        }
        let (label, n_labels) = self.face_components();
        if n_labels == 1 && self.is_compact() {
            return Ok(self.clone());
        }
        let mut area = vec![0.0f64; n_labels];
        for f in self.live_faces() {
            area[label[f as usize] as usize] += self.face_area(f);
        }
        let mut best = 0usize;
        for (i, &a) in area.iter().enumerate() {
            if a > area[best] {
                best = i;
            }
        }
        self.submesh(|f| label[f as usize] == best as u32)
    }

    /// Compact copy containing only faces selected by `keep`, with vertices
    /// renumbered densely in first-use order.
    pub(crate) fn submesh(&self, keep: impl Fn(u32) -> bool) -> Result<HalfedgeMesh, MeshError> {
        let mut vmap = vec![UNSET; self.vertex_slots()];
        let mut positions = Vec::new();
        let mut faces = Vec::new();
        for f in self.live_faces() {
            if !keep(f) {
                continue;
            }
            let tri = self.face_vertices(f).map(|v| {
                let m = &mut vmap[v as usize];
                if *m == UNSET {
                    *m = positions.len() as u32;
                    positions.push(self.position(v));
                }
                *m
            });
            faces.push(tri);
        }
        HalfedgeMesh::from_faces(positions, &faces)
    }

    /// Compact rebuild dropping dead slots. Returns the new mesh plus the
    /// old→new vertex and face maps (`u32::MAX` for dead slots).
    pub fn compacted(&self) -> Result<(HalfedgeMesh, Vec<u32>, Vec<u32>), MeshError> {
        let mut vmap = vec![UNSET; self.vertex_slots()];
        let mut fmap = vec![UNSET; self.face_slots()];
        let mut positions = Vec::with_capacity(self.n_vertices());
        let mut faces = Vec::with_capacity(self.n_faces());
        for f in self.live_faces() {
            let tri = self.face_vertices(f).map(|v| {
                let m = &mut vmap[v as usize];
                if *m == UNSET {
                    *m = positions.len() as u32;
                    positions.push(self.position(v));
                }
                *m
            });
            fmap[f as usize] = faces.len() as u32;
            faces.push(tri);
        }
        let mesh = HalfedgeMesh::from_faces(positions, &faces)?;
        Ok((mesh, vmap, fmap))
    }

    /// Full structural validation over live elements: 3-cycles, twin/origin
    /// consistency, disk links, distinct face corners, minimum areas, and
    /// edge uniqueness. Cheap enough for tests; not run in hot paths.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.n_faces() == 0 || self.n_vertices() == 0 {
            return Err(MeshError::Empty);
        }
        let corrupt = |msg: String| Err(MeshError::Corrupt(msg));
        // Face cycles.
        for f in self.live_faces() {
            let h0 = self.face_halfedge[f as usize];
            let h1 = self.next(h0);
            let h2 = self.next(h1);
            if self.next(h2) != h0 {
                return corrupt(format!("face {f} halfedges do not form a 3-cycle"));
            }
            let mut vs = [0u32; 3];
            for (k, h) in [h0, h1, h2].into_iter().enumerate() {
                if !self.edge_alive[(h >> 1) as usize] {
                    return corrupt(format!("face {f} references dead edge {}", h >> 1));
                }
                if self.face[h as usize] != f {
                    return corrupt(format!("halfedge {h} face pointer mismatch"));
                }
                vs[k] = self.origin_of(h);
                if !self.vertex_alive[vs[k] as usize] {
                    return corrupt(format!("face {f} references dead vertex {}", vs[k]));
                }
            }
            if vs[0] == vs[1] || vs[1] == vs[2] || vs[0] == vs[2] {
                return Err(MeshError::DegenerateFace { face: f as usize });
            }
            let area = self.face_area(f);
            if !(area >= MIN_FACE_AREA) {
                return Err(MeshError::ZeroAreaFace {
                    face: f as usize,
                    area,
                });
            }
            // Origin/twin chaining: target(h) == origin(next(h)).
            for h in [h0, h1, h2] {
                if self.target_of(h) != self.origin_of(self.next(h)) {
                    return corrupt(format!("halfedge {h} breaks origin chaining"));
                }
            }
        }
        // Edge slots: both halves reference live faces, endpoints distinct,
        // uniqueness of undirected vertex pairs.
        let mut seen: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.n_edges());
        for e in self.live_edges() {
            let (h0, h1) = (2 * e, 2 * e + 1);
            for h in [h0, h1] {
                if !self.face_alive[self.face[h as usize] as usize] {
                    return corrupt(format!("edge {e} borders dead face"));
                }
            }
            let (a, b) = (self.origin_of(h0), self.origin_of(h1));
            if a == b {
                return corrupt(format!("edge {e} endpoints coincide"));
            }
            if self.target_of(h0) != b || self.target_of(h1) != a {
                return corrupt(format!("edge {e} twin origins inconsistent"));
            }
            let key = (a.min(b), a.max(b));
            if let Some(prev) = seen.insert(key, e) {
                return corrupt(format!("edges {prev} and {e} join the same vertices"));
            }
        }
        // Vertex orbits cover all outgoing halfedges (disk links).
        let mut valence = vec![0u32; self.vertex_slots()];
        for e in self.live_edges() {
            valence[self.origin_of(2 * e) as usize] += 1;
            valence[self.origin_of(2 * e + 1) as usize] += 1;
        }
        for v in self.live_vertices() {
            let start = self.vertex_halfedge[v as usize];
            if !self.edge_alive[(start >> 1) as usize] || self.origin_of(start) != v {
                return corrupt(format!("vertex {v} anchor halfedge invalid"));
            }
            let mut h = start;
            let mut count = 0u32;
            loop {
                count += 1;
                if count > valence[v as usize] {
                    return Err(MeshError::NonDiskVertex { vertex: v });
                }
                h = self.next(h ^ 1);
                if h == start {
                    break;
                }
            }
            if count != valence[v as usize] {
                return Err(MeshError::NonDiskVertex { vertex: v });
            }
        }
        Ok(())
    }
}
