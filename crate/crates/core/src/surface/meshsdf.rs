//! Signed distance to a closed triangle mesh.
//!
//! Distance comes from an accelerated closest-point query; sign from the
//! exact winding number, computed by summing per-triangle solid angles.

use crate::mesh::{Bvh, HalfedgeMesh};
use crate::Vec3;

pub struct MeshSdf {
    mesh: HalfedgeMesh,
    bvh: Bvh,
    /// Triangle corner copies for the winding-number sweep.
    tris: Vec<[Vec3; 3]>,
    bbox_diag: f64,
}

impl MeshSdf {
    pub fn new(mesh: HalfedgeMesh) -> Self {
        let bvh = Bvh::new(&mesh);
        let tris = mesh
            .live_faces()
            .map(|f| mesh.face_positions(f))
            .collect();
        let (lo, hi) = mesh.bbox();
        MeshSdf {
            bvh,
            tris,
            bbox_diag: (hi - lo).norm(),
            mesh,
        }
    }

    pub fn mesh(&self) -> &HalfedgeMesh {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Winding number by exact solid-angle summation; ≈1 inside, ≈0
    /// outside, integer-valued away from the surface for closed meshes.
    pub fn winding_number(&self, p: Vec3) -> f64 {
        let mut total = 0.0;
        for t in &self.tris {
            let a = t[0] - p;
            let b = t[1] - p;
            let c = t[2] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Unsigned closest-point distance, negated inside.
    pub fn eval(&self, p: Vec3) -> f64 {
        let d = self.bvh.closest(p).distance;
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }

    /// Central-difference gradient with step 1e-4 × bounding-box diagonal.
    pub fn grad(&self, p: Vec3) -> Vec3 {
        let h = 1e-4 * self.bbox_diag;
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[i] += h;
            pm[i] -= h;
            g[i] = (self.eval(pp) - self.eval(pm)) / (2.0 * h);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::AnalyticSdf;
    use crate::testutil::{assert_near, cube, icosphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_winding_inside_and_outside() {
        let s = MeshSdf::new(cube());
        assert_near(s.winding_number(Vec3::zeros()), 1.0, 1e-9, "origin");
        assert_near(
            s.winding_number(Vec3::new(10.0, 0.0, 0.0)),
            0.0,
            1e-9,
            "far outside",
        );
    }

    #[test]
    fn winding_is_integer_away_from_surface() {
        let s = MeshSdf::new(cube());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let p = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            if s.bvh.closest(p).distance < 1e-3 {
                continue;
            }
            let w = s.winding_number(p);
            let nearest_int = w.round();
            assert!(
                (w - nearest_int).abs() < 1e-6,
                "non-integer winding {w} at {p:?}"
            );
        }
    }

    #[test]
    fn cube_sdf_matches_analytic_box() {
        let s = MeshSdf::new(cube());
        let bx = AnalyticSdf::Box {
            half_extents: Vec3::new(1.0, 1.0, 1.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let p = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            if s.eval(p).abs() < 1e-6 {
                continue;
            }
            assert_near(s.eval(p), bx.eval(p), 1e-9, "cube distance");
        }
    }

    #[test]
    fn sphere_mesh_gradient_is_nearly_radial() {
        let s = MeshSdf::new(icosphere(3));
        for p in [
            Vec3::new(0.0, 0.0, 1.7),
            Vec3::new(1.3, 0.4, -0.2),
            Vec3::new(-0.5, 0.5, 0.5) * 0.6, // inside
        ] {
            let g = s.grad(p);
            let radial = p.normalize();
            assert!(
                (g.normalize() - radial).norm() < 0.05,
                "grad {g:?} vs radial {radial:?}"
            );
        }
    }
}
