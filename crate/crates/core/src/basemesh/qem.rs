//! Quadric-error-metric decimation.
//!
//! Every vertex carries the summed squared-distance quadric of its
//! incident face planes. Collapsing an edge merges the endpoint quadrics
//! and costs the merged quadric at the best placement — its minimizer
//! when the 3×3 system is invertible, the edge midpoint otherwise. A
//! binary heap orders candidates lazily: entries are stamped with their
//! endpoints' version counters and silently discarded once stale.
//! Collapses that would break the manifold link condition, flip a
//! surviving face's normal, or create a near-zero-area face are skipped.

use super::BasemeshError;
use crate::mesh::HalfedgeMesh;
use crate::{Mat3, Vec3};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Default)]
struct Quadric {
    a: Mat3,
    b: Vec3,
    c: f64,
}

impl Quadric {
    /// Squared distance to the plane n·x + d = 0 (n unit).
    fn plane(n: Vec3, d: f64) -> Self {
        Quadric {
            a: n * n.transpose(),
            b: n * d,
            c: d * d,
        }
    }

    fn add(&mut self, o: &Quadric) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
    }

    fn plus(&self, o: &Quadric) -> Quadric {
        let mut q = *self;
        q.add(o);
        q
    }

    /// pᵀAp + 2b·p + c; a sum of squared plane distances, ≥ 0 up to
    /// rounding.
    fn cost(&self, p: Vec3) -> f64 {
        (self.a * p).dot(&p) + 2.0 * self.b.dot(&p) + self.c
    }

    fn minimizer(&self) -> Option<Vec3> {
        if self.a.determinant().abs() < 1e-12 {
            return None;
        }
        self.a.try_inverse().map(|inv| inv * -self.b)
    }
}

/// Heap entry: (cost bits, edge, endpoint a, endpoint b, stamp a, stamp b).
/// Costs are clamped non-negative, so their bit patterns order like the
/// floats; the remaining fields make ties deterministic.
type Candidate = (u64, u32, u32, u32, u32, u32);

fn best_placement(q: &Quadric, pa: Vec3, pb: Vec3) -> Vec3 {
    let mid = (pa + pb) * 0.5;
    match q.minimizer() {
        // A nearly singular quadric can put its minimizer far down a flat
        // valley; placements must stay near the edge for the geometric
        // gates to mean anything, so distant ones fall back to midpoint.
        Some(p) if (p - mid).norm() <= 2.0 * (pa - pb).norm().max(1e-12) => p,
        _ => mid,
    }
}

fn push_candidate(
    m: &HalfedgeMesh,
    quadrics: &[Quadric],
    version: &[u32],
    heap: &mut BinaryHeap<Reverse<Candidate>>,
    e: u32,
) {
    let (a, b) = m.edge_endpoints(e);
    let q = quadrics[a as usize].plus(&quadrics[b as usize]);
    let placement = best_placement(&q, m.position(a), m.position(b));
    let cost = q.cost(placement).max(0.0);
    heap.push(Reverse((
        cost.to_bits(),
        e,
        a,
        b,
        version[a as usize],
        version[b as usize],
    )));
}

/// Whether moving both endpoints of `h` to `p` keeps every surviving
/// incident face non-degenerate and un-flipped.
fn collapse_keeps_geometry(m: &HalfedgeMesh, h: u32, p: Vec3, min_area: f64) -> bool {
    let (a, b) = (m.origin_of(h), m.target_of(h));
    let (f0, f1) = (m.face_of(h), m.face_of(m.twin(h)));
    let sub = |v: u32| if v == a || v == b { p } else { m.position(v) };
    for v in [a, b] {
        for hv in m.outgoing(v) {
            let fc = m.face_of(hv);
            if fc == f0 || fc == f1 {
                continue;
            }
            let [v0, v1, v2] = m.face_vertices(fc);
            let old = (m.position(v1) - m.position(v0))
                .cross(&(m.position(v2) - m.position(v0)));
            let new = (sub(v1) - sub(v0)).cross(&(sub(v2) - sub(v0)));
            if new.norm() < 2.0 * min_area {
                return false;
            }
            if old.norm() > 2.0 * min_area && old.dot(&new) <= 0.0 {
                return false;
            }
        }
    }
    true
}

/// Collapses edges of `mesh` greedily by quadric error until at most
/// `target_faces` faces remain. Returns the decimated mesh and whether
/// the target was reached; rejection of unsafe collapses can exhaust the
/// candidates first, in which case the flag is false.
pub fn qem_decimate(
    mesh: &HalfedgeMesh,
    target_faces: usize,
) -> Result<(HalfedgeMesh, bool), BasemeshError> {
    if target_faces < 4 {
        return Err(BasemeshError::TargetTooSmall {
            target: target_faces,
        });
    }
    let mut m = mesh.compacted()?.0;
    if m.n_faces() <= target_faces {
        return Ok((m, true));
    }

    let mut quadrics = vec![Quadric::default(); m.vertex_slots()];
    for fc in m.live_faces() {
        let [p0, p1, p2] = m.face_positions(fc);
        let cr = (p1 - p0).cross(&(p2 - p0));
        let nn = cr.norm();
        if nn < 1e-30 {
            continue;
        }
        let n = cr / nn;
        let q = Quadric::plane(n, -n.dot(&p0));
        for v in m.face_vertices(fc) {
            quadrics[v as usize].add(&q);
        }
    }

    let min_area = {
        let (lo, hi) = m.bbox();
        1e-12 * (hi - lo).norm_squared()
    };
    let mut version = vec![0u32; m.vertex_slots()];
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();
    for e in m.live_edges() {
        push_candidate(&m, &quadrics, &version, &mut heap, e);
    }

    while m.n_faces() > target_faces {
        let Some(Reverse((_, e, va, vb, sa, sb))) = heap.pop() else {
            break;
        };
        if !m.edge_is_alive(e) {
            continue;
        }
        let (a, b) = m.edge_endpoints(e);
        if (a, b) != (va, vb) || version[a as usize] != sa || version[b as usize] != sb {
            continue;
        }
        let h = m.halfedge_of_edge(e); // collapse keeps a = origin
        if !m.can_collapse_halfedge(h) {
            continue;
        }
        let q = quadrics[a as usize].plus(&quadrics[b as usize]);
        let placement = best_placement(&q, m.position(a), m.position(b));
        if !collapse_keeps_geometry(&m, h, placement, min_area) {
            continue;
        }
        let qb = quadrics[b as usize];
        m.collapse_halfedge(h, Some(placement));
        quadrics[a as usize].add(&qb);
        version[a as usize] += 1;
        for hv in m.outgoing(a) {
            push_candidate(&m, &quadrics, &version, &mut heap, hv >> 1);
        }
    }

    let reached = m.n_faces() <= target_faces;
    Ok((m.compacted()?.0, reached))
}
