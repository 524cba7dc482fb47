//! In-place connectivity surgery: edge flip, edge split, halfedge collapse.
//!
//! These operations preserve the manifold invariants whenever the matching
//! `can_*` predicate approves the operation first. Removed elements are
//! flagged dead (ids stay stable); callers compact when surgery is done.
//! Twin pairing (`twin(h) = h ^ 1`) is preserved by reusing or relocating
//! slots instead of rewiring twin pointers.

use super::halfedge::HalfedgeMesh;
use crate::Vec3;

impl HalfedgeMesh {
    pub(crate) fn alloc_vertex(&mut self, pos: Vec3) -> u32 {
        let v = self.positions.len() as u32;
        self.positions.push(pos);
        self.vertex_halfedge.push(u32::MAX);
        self.vertex_alive.push(true);
        v
    }

    fn alloc_edge(&mut self) -> u32 {
        let e = self.edge_alive.len() as u32;
        for _ in 0..2 {
            self.next.push(u32::MAX);
            self.origin.push(u32::MAX);
            self.face.push(u32::MAX);
        }
        self.edge_alive.push(true);
        e
    }

    fn alloc_face(&mut self) -> u32 {
        let f = self.face_halfedge.len() as u32;
        self.face_halfedge.push(u32::MAX);
        self.face_alive.push(true);
        f
    }

    fn kill_vertex(&mut self, v: u32) {
        self.vertex_alive[v as usize] = false;
        self.n_dead_vertices += 1;
    }
    fn kill_edge(&mut self, e: u32) {
        self.edge_alive[e as usize] = false;
        self.n_dead_edges += 1;
    }
    fn kill_face(&mut self, f: u32) {
        self.face_alive[f as usize] = false;
        self.n_dead_faces += 1;
    }

    /// The four corners of the edge's quad: (a, b, c, d) where the edge runs
    /// a→b, c is opposite in the left face, d opposite in the right face.
    pub(crate) fn edge_quad(&self, e: u32) -> (u32, u32, u32, u32) {
        let h0 = 2 * e;
        let h1 = h0 + 1;
        (
            self.origin_of(h0),
            self.origin_of(h1),
            self.origin_of(self.prev(h0)),
            self.origin_of(self.prev(h1)),
        )
    }

    /// Whether `flip_edge(e)` keeps the mesh manifold: the opposite corners
    /// must be distinct, not already joined by an edge, and the flip must
    /// not drop an endpoint below valence 3.
    pub(crate) fn can_flip_edge(&self, e: u32) -> bool {
        if !self.edge_is_alive(e) {
            return false;
        }
        let (a, b, c, d) = self.edge_quad(e);
        if c == d {
            return false;
        }
        if self.vertex_valence(a) < 4 || self.vertex_valence(b) < 4 {
            return false;
        }
        // An existing (c, d) edge would be duplicated by the flip.
        !self
            .outgoing(c)
            .iter()
            .any(|&h| self.target_of(h) == d)
    }

    /// Rotates edge `e` inside its quad: (a,b) becomes (c,d). The edge id is
    /// reused. Caller must have checked [`Self::can_flip_edge`].
    pub(crate) fn flip_edge(&mut self, e: u32) {
        debug_assert!(self.can_flip_edge(e));
        let h0 = 2 * e;
        let h1 = h0 + 1;
        let (f0, f1) = (self.face_of(h0), self.face_of(h1));
        let n0 = self.next(h0);
        let p0 = self.next(n0);
        let n1 = self.next(h1);
        let p1 = self.next(n1);
        let (a, b) = (self.origin_of(h0), self.origin_of(h1));
        let (c, d) = (self.origin_of(p0), self.origin_of(p1));

        // New faces: f0 = (a→d, d→c, c→a), f1 = (d→b, b→c, c→d).
        self.origin[h0 as usize] = c; // h0: c→d
        self.origin[h1 as usize] = d; // h1: d→c
        for (h, f) in [(n1, f0), (h1, f0), (p0, f0), (p1, f1), (n0, f1), (h0, f1)] {
            self.face[h as usize] = f;
        }
        self.next[n1 as usize] = h1;
        self.next[h1 as usize] = p0;
        self.next[p0 as usize] = n1;
        self.next[p1 as usize] = n0;
        self.next[n0 as usize] = h0;
        self.next[h0 as usize] = p1;
        self.face_halfedge[f0 as usize] = n1;
        self.face_halfedge[f1 as usize] = p1;
        if self.vertex_halfedge[a as usize] == h0 {
            self.vertex_halfedge[a as usize] = n1; // a→d
        }
        if self.vertex_halfedge[b as usize] == h1 {
            self.vertex_halfedge[b as usize] = n0; // b→c
        }
        debug_assert!(self.validate_around(&[a, b, c, d]));
    }

    /// Splits edge `e` at `pos`, replacing its two triangles by four. The
    /// edge id is reused for the (a, new) half; three edges, two faces, and
    /// one vertex are allocated. Returns the new vertex id.
    pub(crate) fn split_edge(&mut self, e: u32, pos: Vec3) -> u32 {
        debug_assert!(self.edge_is_alive(e));
        let h0 = 2 * e; // a→b
        let h1 = h0 + 1; // b→a
        let (f0, f1) = (self.face_of(h0), self.face_of(h1));
        let n0 = self.next(h0); // b→c
        let p0 = self.next(n0); // c→a
        let n1 = self.next(h1); // a→d
        let p1 = self.next(n1); // d→b
        let (a, b) = (self.origin_of(h0), self.origin_of(h1));
        let (c, d) = (self.origin_of(p0), self.origin_of(p1));

        let m = self.alloc_vertex(pos);
        let hmb = 2 * self.alloc_edge(); // m→b / b→m
        let hbm = hmb + 1;
        let hmc = 2 * self.alloc_edge(); // m→c / c→m
        let hcm = hmc + 1;
        let hmd = 2 * self.alloc_edge(); // m→d / d→m
        let hdm = hmd + 1;
        let f2 = self.alloc_face();
        let f3 = self.alloc_face();

        // f0 = (h0: a→m, hmc: m→c, p0: c→a)
        // f2 = (hmb: m→b, n0: b→c, hcm: c→m)
        // f1 = (h1: m→a, n1: a→d, hdm: d→m)
        // f3 = (hbm: b→m, hmd: m→d, p1: d→b)
        self.origin[h1 as usize] = m;
        for (h, o) in [(hmb, m), (hbm, b), (hmc, m), (hcm, c), (hmd, m), (hdm, d)] {
            self.origin[h as usize] = o;
        }
        let cycles: [(u32, [u32; 3]); 4] = [
            (f0, [h0, hmc, p0]),
            (f2, [hmb, n0, hcm]),
            (f1, [h1, n1, hdm]),
            (f3, [hbm, hmd, p1]),
        ];
        for (f, hs) in cycles {
            for k in 0..3 {
                self.next[hs[k] as usize] = hs[(k + 1) % 3];
                self.face[hs[k] as usize] = f;
            }
            self.face_halfedge[f as usize] = hs[0];
        }
        self.vertex_halfedge[m as usize] = hmb;
        if self.vertex_halfedge[b as usize] == h1 {
            self.vertex_halfedge[b as usize] = n0; // b→c
        }
        debug_assert!(self.validate_around(&[a, b, c, d, m]));
        m
    }

    /// Whether collapsing `target(h)` into `origin(h)` keeps the mesh a
    /// closed manifold: the classic link condition (the endpoints' common
    /// neighbors are exactly the two opposite corners) plus valence floors.
    pub(crate) fn can_collapse_halfedge(&self, h: u32) -> bool {
        if !self.edge_is_alive(h >> 1) || self.n_faces() <= 4 {
            return false;
        }
        let a = self.origin_of(h);
        let b = self.target_of(h);
        let c = self.origin_of(self.prev(h));
        let d = self.origin_of(self.prev(h ^ 1));
        if c == d {
            return false;
        }
        // Opposite corners each lose one edge; kept vertex ends with
        // valence(a) + valence(b) - 4.
        if self.vertex_valence(c) < 4 || self.vertex_valence(d) < 4 {
            return false;
        }
        if self.vertex_valence(a) + self.vertex_valence(b) < 7 {
            return false;
        }
        let a_nbrs: Vec<u32> = self.vertex_neighbors(a);
        let mut common = 0usize;
        for &x in &self.vertex_neighbors(b) {
            if x == a {
                continue;
            }
            if a_nbrs.contains(&x) {
                if x != c && x != d {
                    return false;
                }
                common += 1;
            }
        }
        common == 2
    }

    /// Collapses `target(h)` into `origin(h)`; the kept vertex optionally
    /// moves to `new_pos`. Kills one vertex, three edges, and two faces.
    /// Caller must have checked [`Self::can_collapse_halfedge`].
    pub(crate) fn collapse_halfedge(&mut self, h: u32, new_pos: Option<Vec3>) {
        debug_assert!(self.can_collapse_halfedge(h));
        let h0 = h; // a→b
        let t = h ^ 1; // b→a
        let (f0, f1) = (self.face_of(h0), self.face_of(t));
        let n0 = self.next(h0); // b→c
        let p0 = self.next(n0); // c→a
        let n1 = self.next(t); // a→d
        let p1 = self.next(n1); // d→b
        let (a, b) = (self.origin_of(h0), self.origin_of(t));
        let (c, d) = (self.origin_of(p0), self.origin_of(p1));

        let b_out = self.outgoing(b);

        // Surviving sides of the merged edge pairs: the exterior twin of
        // b→c relocates into p0's slot (edge (c,a) survives), the exterior
        // twin of d→b relocates into n1's slot (edge (a,d) survives).
        let s0 = n0 ^ 1; // c→b, becomes c→a in slot p0
        let s1 = p1 ^ 1; // b→d, becomes a→d in slot n1
        let pa = self.prev(s0);
        let pb = self.prev(s1);
        let remap = |x: u32| {
            if x == s0 {
                p0
            } else if x == s1 {
                n1
            } else {
                x
            }
        };

        for (src, dst) in [(s0, p0), (s1, n1)] {
            self.next[dst as usize] = self.next[src as usize];
            self.face[dst as usize] = self.face[src as usize];
            self.origin[dst as usize] = self.origin[src as usize];
        }
        self.next[remap(pa) as usize] = p0;
        self.next[remap(pb) as usize] = n1;
        self.next[p0 as usize] = remap(self.next[p0 as usize]);
        self.next[n1 as usize] = remap(self.next[n1 as usize]);
        for (moved, slot) in [(s0, p0), (s1, n1)] {
            let f = self.face[slot as usize] as usize;
            if self.face_halfedge[f] == moved {
                self.face_halfedge[f] = slot;
            }
        }

        self.kill_edge(h0 >> 1);
        self.kill_edge(n0 >> 1);
        self.kill_edge(p1 >> 1);
        self.kill_face(f0);
        self.kill_face(f1);
        self.kill_vertex(b);

        // Re-home every surviving halfedge that left b.
        for hb in b_out {
            let hh = remap(hb);
            if self.edge_is_alive(hh >> 1) {
                self.origin[hh as usize] = a;
            }
        }

        self.vertex_halfedge[a as usize] = n1; // a→d
        self.vertex_halfedge[c as usize] = p0; // c→a
        self.vertex_halfedge[d as usize] = n1 ^ 1; // d→a
        if let Some(p) = new_pos {
            self.set_position(a, p);
        }
        debug_assert!(self.validate_around(&[a, c, d]));
    }

    /// Local structural check around a set of vertices (debug aid): orbits
    /// close, faces are 3-cycles with live, distinct corners.
    pub(crate) fn validate_around(&self, vs: &[u32]) -> bool {
        for &v in vs {
            if !self.vertex_is_alive(v) {
                continue;
            }
            let anchor = self.vertex_halfedge[v as usize];
            if !self.edge_is_alive(anchor >> 1) || self.origin_of(anchor) != v {
                return false;
            }
            let ring = self.outgoing(v);
            if ring.len() < 3 {
                return false;
            }
            for &h in &ring {
                if !self.edge_is_alive(h >> 1) || self.origin_of(h) != v {
                    return false;
                }
                let f = self.face_of(h);
                if !self.face_is_alive(f) {
                    return false;
                }
                let (h1, h2) = (self.next(h), self.next(self.next(h)));
                if self.next(h2) != h {
                    return false;
                }
                let (x, y, z) = (self.origin_of(h), self.origin_of(h1), self.origin_of(h2));
                if x == y || y == z || x == z {
                    return false;
                }
            }
            // No duplicate neighbors (would mean a doubled edge).
            let mut nbrs: Vec<u32> = ring.iter().map(|&h| self.target_of(h)).collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            if nbrs.len() != ring.len() {
                return false;
            }
        }
        true
    }
}
