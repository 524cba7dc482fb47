//! Length-based triangle geometry and intrinsic Delaunay flipping.
//!
//! Everything here works from per-edge lengths alone: areas come from a
//! numerically stable Heron evaluation, angle cotangents from the law of
//! cosines, and a flipped diagonal's length from laying the two incident
//! triangles flat across their shared edge. Vertex positions are never
//! read — flips straighten the abstract metric, not the drawing.

use super::RemeshError;
use crate::mesh::HalfedgeMesh;

/// Edges whose opposite-angle cotangents sum below this violate the
/// Delaunay condition (the two angles sum past π).
pub(crate) const DELAUNAY_TOL: f64 = -1e-9;

/// Strict triangle-inequality slack every length triple must keep.
pub(crate) const LENGTH_SLACK: f64 = 1e-12;

/// Triangle area from side lengths (Kahan's stable Heron form); 0 when the
/// triple violates the triangle inequality.
pub(crate) fn area_from_lengths(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_unstable_by(|p, q| q.total_cmp(p));
    let [x, y, z] = s;
    let t = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
    if t > 0.0 {
        0.25 * t.sqrt()
    } else {
        0.0
    }
}

/// Cotangent of the angle opposite side `a`: (b² + c² − a²) / (4·area).
pub(crate) fn cot_opposite(a: f64, b: f64, c: f64) -> f64 {
    (b * b + c * c - a * a) / (4.0 * area_from_lengths(a, b, c))
}

/// All sides positive and every strict triangle inequality holding with
/// more than [`LENGTH_SLACK`] to spare.
pub(crate) fn triangle_slack_ok(a: f64, b: f64, c: f64) -> bool {
    a > 0.0
        && b > 0.0
        && c > 0.0
        && b + c - a > LENGTH_SLACK
        && a + c - b > LENGTH_SLACK
        && a + b - c > LENGTH_SLACK
}

/// Sum of the two cotangents opposite edge `e` — its Delaunay weight.
pub(crate) fn cotan_weight(mesh: &HalfedgeMesh, lengths: &[f64], e: u32) -> f64 {
    let mut sum = 0.0;
    for h in [2 * e, 2 * e + 1] {
        let n = mesh.next(h);
        let p = mesh.next(n);
        sum += cot_opposite(
            lengths[(h >> 1) as usize],
            lengths[(n >> 1) as usize],
            lengths[(p >> 1) as usize],
        );
    }
    sum
}

/// Total area implied by the intrinsic lengths (sum of Heron face areas).
pub(crate) fn total_intrinsic_area(mesh: &HalfedgeMesh, lengths: &[f64]) -> f64 {
    mesh.live_faces()
        .map(|f| {
            let h = mesh.halfedge_of_face(f);
            let n = mesh.next(h);
            let p = mesh.next(n);
            area_from_lengths(
                lengths[(h >> 1) as usize],
                lengths[(n >> 1) as usize],
                lengths[(p >> 1) as usize],
            )
        })
        .sum()
}

/// Lays edge `e`'s two triangles flat across it and returns the distance
/// between the opposite corners — the flipped edge's length — plus the
/// fraction of `e` at which that diagonal crosses it. The crossing lies
/// strictly inside (0, 1) exactly when the unfolded quadrilateral is
/// convex, which a Delaunay-violating edge always satisfies.
pub(crate) fn unfolded_diagonal(mesh: &HalfedgeMesh, lengths: &[f64], e: u32) -> (f64, f64) {
    let len = |h: u32| lengths[(h >> 1) as usize];
    let h0 = 2 * e;
    let h1 = h0 + 1;
    let w = lengths[e as usize];
    let (n0, n1) = (mesh.next(h0), mesh.next(h1));
    let (bc, ca) = (len(n0), len(mesh.next(n0)));
    let (ad, db) = (len(n1), len(mesh.next(n1)));
    // Shared edge from (0,0) to (w,0); left apex above it, right below.
    let cx = (w * w + ca * ca - bc * bc) / (2.0 * w);
    let cy = (ca * ca - cx * cx).max(0.0).sqrt();
    let dx = (w * w + ad * ad - db * db) / (2.0 * w);
    let dy = -(ad * ad - dx * dx).max(0.0).sqrt();
    let diag = ((cx - dx).powi(2) + (cy - dy).powi(2)).sqrt();
    let cross = if cy - dy > 0.0 {
        (cx + (dx - cx) * cy / (cy - dy)) / w
    } else {
        f64::NAN
    };
    (diag, cross)
}

/// Per-run accounting of [`flip_to_delaunay`].
#[derive(Debug, Default)]
pub(crate) struct FlipStats {
    pub flips: usize,
    /// Violating-edge count at the start of each sweep (ends with 0 on
    /// clean convergence).
    pub violations_per_sweep: Vec<usize>,
}

/// Flips edges until every edge's Delaunay weight is ≥ −1e-9, updating
/// `lengths` in place via the planar unfolding. Connectivity changes;
/// positions and vertex data never do. The flip budget (50 per edge) is a
/// bug guard — real meshes converge in a handful of sweeps.
pub(crate) fn flip_to_delaunay(
    mesh: &mut HalfedgeMesh,
    lengths: &mut [f64],
) -> Result<FlipStats, RemeshError> {
    let budget = 50 * mesh.n_edges();
    let mut stats = FlipStats::default();
    loop {
        let violating: Vec<u32> = mesh
            .live_edges()
            .filter(|&e| cotan_weight(mesh, lengths, e) < DELAUNAY_TOL)
            .collect();
        stats.violations_per_sweep.push(violating.len());
        if violating.is_empty() {
            return Ok(stats);
        }
        let mut flipped = 0usize;
        for e in violating {
            // Earlier flips in this sweep may have already fixed it.
            if cotan_weight(mesh, lengths, e) >= DELAUNAY_TOL || !mesh.can_flip_edge(e) {
                continue;
            }
            let (diag, cross) = unfolded_diagonal(mesh, lengths, e);
            if !(cross > 0.0 && cross < 1.0) || !diag.is_finite() {
                continue;
            }
            // Both post-flip triples must keep strict slack.
            let len = |h: u32| lengths[(h >> 1) as usize];
            let h0 = 2 * e;
            let h1 = h0 + 1;
            let (bc, ca) = (len(mesh.next(h0)), len(mesh.prev(h0)));
            let (ad, db) = (len(mesh.next(h1)), len(mesh.prev(h1)));
            if !triangle_slack_ok(diag, ad, ca) || !triangle_slack_ok(diag, db, bc) {
                continue;
            }
            mesh.flip_edge(e);
            lengths[e as usize] = diag;
            flipped += 1;
            stats.flips += 1;
            if stats.flips > budget {
                return Err(RemeshError::FlipBudget {
                    flips: stats.flips,
                    edges: mesh.n_edges(),
                });
            }
        }
        if flipped == 0 {
            // Remaining violations are combinatorially pinned (a flip
            // would break manifoldness); stop rather than spin.
            return Ok(stats);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::kite_pyramid;
    use super::*;
    use crate::testutil::{assert_near, assert_rel, icosphere, tetrahedron};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chord_lengths(mesh: &HalfedgeMesh) -> Vec<f64> {
        (0..mesh.edge_slots() as u32)
            .map(|e| {
                if mesh.edge_is_alive(e) {
                    let (u, v) = mesh.edge_endpoints(e);
                    (mesh.position(u) - mesh.position(v)).norm()
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn edge_between(mesh: &HalfedgeMesh, a: u32, b: u32) -> u32 {
        mesh.live_edges()
            .find(|&e| {
                let (u, v) = mesh.edge_endpoints(e);
                (u, v) == (a, b) || (u, v) == (b, a)
            })
            .expect("edge exists")
    }

    #[test]
    fn heron_matches_hand_areas_and_rejects_violations() {
        assert_near(area_from_lengths(3.0, 4.0, 5.0), 6.0, 1e-12, "3-4-5");
        assert_near(
            area_from_lengths(1.0, 1.0, 2.0f64.sqrt()),
            0.5,
            1e-12,
            "unit right",
        );
        assert_near(
            area_from_lengths(1.0, 1.0, 1.0),
            3.0f64.sqrt() / 4.0,
            1e-15,
            "equilateral",
        );
        assert_eq!(area_from_lengths(1.0, 1.0, 2.5), 0.0);
        // Needle triangle: naive Heron loses half the digits here, the
        // sorted form keeps full precision. Height = √(a² − c²/4).
        let needle = area_from_lengths(1e5, 1e5, 1.0);
        let exact = 0.5 * (1e10f64 - 0.25).sqrt();
        assert_rel(needle, exact, 1e-14, 1e-300, "needle");
    }

    #[test]
    fn cotangents_match_known_angles() {
        // Equilateral: 60° everywhere, cot = 1/√3.
        assert_near(
            cot_opposite(1.0, 1.0, 1.0),
            1.0 / 3.0f64.sqrt(),
            1e-12,
            "60 degrees",
        );
        // 3-4-5: the angle opposite 5 is 90° (cot 0); opposite 3 it is
        // atan(3/4) (cot 4/3).
        assert_near(cot_opposite(5.0, 3.0, 4.0), 0.0, 1e-12, "90 degrees");
        assert_near(cot_opposite(3.0, 4.0, 5.0), 4.0 / 3.0, 1e-12, "atan(3/4)");
    }

    #[test]
    fn unfolding_recovers_planar_diagonals() {
        // Square kite (wing 1): both diagonals have length 2, and the
        // crossing sits at the midpoint.
        let m = kite_pyramid(1.0);
        let lengths = chord_lengths(&m);
        let e = edge_between(&m, 0, 2);
        let (diag, cross) = unfolded_diagonal(&m, &lengths, e);
        assert_near(diag, 2.0, 1e-12, "square diagonal");
        assert_near(cross, 0.5, 1e-12, "square crossing");

        // Thin kite: the flipped diagonal spans the wings, length 0.3.
        let m = kite_pyramid(0.15);
        let lengths = chord_lengths(&m);
        let e = edge_between(&m, 0, 2);
        let (diag, _) = unfolded_diagonal(&m, &lengths, e);
        assert_near(diag, 0.3, 1e-12, "kite wingspan");
    }

    #[test]
    fn unfolding_ignores_the_dihedral_fold() {
        // Two equilateral faces of a regular tetrahedron unfold to a
        // rhombus whose diagonal is twice the triangle height, no matter
        // how sharply they fold in 3D.
        let m = tetrahedron();
        let lengths = chord_lengths(&m);
        let a = lengths[0];
        for e in m.live_edges() {
            let (diag, cross) = unfolded_diagonal(&m, &lengths, e);
            assert_near(diag, a * 3.0f64.sqrt(), 1e-12, "rhombus diagonal");
            assert_near(cross, 0.5, 1e-12, "rhombus crossing");
        }
    }

    #[test]
    fn delaunay_meshes_need_no_flips() {
        let mut m = icosphere(1);
        let mut lengths = chord_lengths(&m);
        let stats = flip_to_delaunay(&mut m, &mut lengths).unwrap();
        assert_eq!(stats.flips, 0);
        assert_eq!(stats.violations_per_sweep, vec![0]);
    }

    #[test]
    fn thin_kite_needs_exactly_one_flip() {
        let mut m = kite_pyramid(0.15);
        let mut lengths = chord_lengths(&m);
        let e = edge_between(&m, 0, 2);
        assert!(cotan_weight(&m, &lengths, e) < DELAUNAY_TOL);
        let area_before = total_intrinsic_area(&m, &lengths);

        let stats = flip_to_delaunay(&mut m, &mut lengths).unwrap();
        assert_eq!(stats.flips, 1);
        assert_eq!(stats.violations_per_sweep, vec![1, 0]);
        // The reused edge slot now spans the wings.
        let (u, v) = m.edge_endpoints(e);
        assert_eq!((u.min(v), u.max(v)), (1, 3));
        assert_near(lengths[e as usize], 0.3, 1e-12, "flipped length");
        for e in m.live_edges() {
            assert!(cotan_weight(&m, &lengths, e) >= DELAUNAY_TOL);
        }
        // The flip retriangulates the same flat quad: area is conserved.
        let area_after = total_intrinsic_area(&m, &lengths);
        assert_rel(area_after, area_before, 1e-12, 1e-300, "kite area");
    }

    #[test]
    fn perturbed_sphere_converges_and_conserves_area() {
        let m0 = icosphere(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let positions: Vec<_> = m0
            .positions()
            .iter()
            .map(|p| {
                p + crate::Vec3::new(
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                )
            })
            .collect();
        let faces: Vec<[u32; 3]> = m0.live_faces().map(|f| m0.face_vertices(f)).collect();
        let mut m = HalfedgeMesh::from_faces(positions, &faces).unwrap();
        let mut lengths = chord_lengths(&m);
        let area_before = total_intrinsic_area(&m, &lengths);

        let stats = flip_to_delaunay(&mut m, &mut lengths).unwrap();
        assert!(stats.flips > 0, "perturbation should force flips");
        // Violations shrink strictly every sweep down to zero.
        for w in stats.violations_per_sweep.windows(2) {
            assert!(w[1] < w[0], "sweeps {:?}", stats.violations_per_sweep);
        }
        assert_eq!(*stats.violations_per_sweep.last().unwrap(), 0);
        for e in m.live_edges() {
            assert!(cotan_weight(&m, &lengths, e) >= DELAUNAY_TOL);
        }
        // Each flip retriangulates a flat quad, so total area survives.
        let area_after = total_intrinsic_area(&m, &lengths);
        assert_rel(area_after, area_before, 1e-6, 1e-300, "metric area");
        // Connectivity stayed manifold through every flip.
        m.validate().unwrap();
        // Every face still satisfies the strict triangle inequality.
        for f in m.live_faces() {
            let h = m.halfedge_of_face(f);
            let (n, p) = (m.next(h), m.prev(h));
            assert!(triangle_slack_ok(
                lengths[(h >> 1) as usize],
                lengths[(n >> 1) as usize],
                lengths[(p >> 1) as usize],
            ));
        }
    }
}
