//! Coarse base-mesh construction: isosurface extraction, decimation, and
//! placement inside the canonical training cube [−1.5, 1.5]³.
//!
//! The pipeline is dense-extract → keep the largest connected component →
//! quadric decimation to a face budget → normalize. The returned
//! transform maps original-frame points into the normalized frame; wrap
//! the target surface with it so both sides of training agree.

mod mc;
mod qem;

pub use mc::marching_cubes;
pub use qem::qem_decimate;

use crate::mesh::{HalfedgeMesh, MeshError};
use crate::surface::Surface;
use crate::NormalizationTransform;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasemeshError {
    #[error("resolution {resolution} is below the minimum of 8 cells per axis")]
    ResolutionTooLow { resolution: usize },
    #[error("the level set is empty over the sampled domain")]
    EmptyLevelSet,
    #[error("decimation target {target} is below the minimum of 4 faces")]
    TargetTooSmall { target: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Extraction knobs; the defaults match the training pipeline.
#[derive(Debug, Clone, Copy)]
pub struct BaseMeshParams {
    /// Lattice cells per axis for the dense extraction.
    pub resolution: usize,
    /// Decimation face budget.
    pub target_faces: usize,
}

impl Default for BaseMeshParams {
    fn default() -> Self {
        BaseMeshParams {
            resolution: 128,
            target_faces: 2000,
        }
    }
}

/// A coarse watertight approximation of a target surface, scaled and
/// centered inside [−1.5, 1.5]³.
pub struct BaseMesh {
    pub mesh: HalfedgeMesh,
    /// Maps original-frame points into the normalized frame the mesh
    /// lives in (apply) and back (invert).
    pub transform: NormalizationTransform,
    /// False when decimation stalled above the face budget.
    pub reached_target: bool,
}

/// Builds the coarse base mesh for `surface`: extract densely (the φ = 0
/// level set, or the winding-number 0.5 level set for point clouds), keep
/// the largest component, decimate, and normalize into the canonical
/// cube.
pub fn extract_base_mesh(
    surface: &Surface,
    params: BaseMeshParams,
) -> Result<BaseMesh, BasemeshError> {
    let iso = if surface.is_implicit() { 0.0 } else { 0.5 };
    let dense = marching_cubes(surface, params.resolution, iso)?;
    let main = dense.largest_component()?;
    let (mut mesh, reached_target) = qem_decimate(&main, params.target_faces)?;
    let transform = normalizing_transform(&mesh);
    for v in 0..mesh.vertex_slots() as u32 {
        if mesh.vertex_is_alive(v) {
            let p = transform.apply(mesh.position(v));
            mesh.set_position(v, p);
        }
    }
    Ok(BaseMesh {
        mesh,
        transform,
        reached_target,
    })
}

/// The uniform scale + translation that centers `mesh`'s bounding box at
/// the origin with its largest half-extent at 1.5.
pub fn normalizing_transform(mesh: &HalfedgeMesh) -> NormalizationTransform {
    let (lo, hi) = mesh.bbox();
    let center = (lo + hi) * 0.5;
    let half = ((hi - lo) * 0.5).max().max(1e-30);
    let scale = 1.5 / half;
    NormalizationTransform {
        scale,
        translation: -center * scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{sample_uniform, Bvh};
    use crate::surface::{AnalyticSdf, GridSdf};
    use crate::testutil::assert_near;
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_base_mesh_fits_canonical_cube() {
        let s = Surface::unit_sphere();
        let bm = extract_base_mesh(
            &s,
            BaseMeshParams {
                resolution: 64,
                target_faces: 500,
            },
        )
        .unwrap();
        assert!(bm.reached_target);
        assert!(bm.mesh.n_faces() <= 500);
        bm.mesh.validate().unwrap();
        assert_eq!(bm.mesh.euler_characteristic(), 2);

        let (lo, hi) = bm.mesh.bbox();
        for i in 0..3 {
            assert!(lo[i] >= -1.5 - 1e-9 && hi[i] <= 1.5 + 1e-9);
        }
        assert_near(((hi - lo) * 0.5).max(), 1.5, 1e-9, "largest half-extent");

        // De-normalized vertices sit near the unit sphere.
        for v in bm.mesh.live_vertices() {
            let p = bm.transform.invert(bm.mesh.position(v));
            assert_near(p.norm(), 1.0, 0.1, "de-normalized radius");
        }
    }

    #[test]
    fn big_sphere_normalization_scale() {
        let s = Surface::Analytic(AnalyticSdf::Sphere {
            center: Vec3::zeros(),
            radius: 100.0,
        });
        let bm = extract_base_mesh(
            &s,
            BaseMeshParams {
                resolution: 96,
                target_faces: 2000,
            },
        )
        .unwrap();
        assert_near(bm.transform.scale, 0.015, 2e-4, "normalization scale");
        assert!(bm.transform.translation.norm() < 5e-3);
    }

    #[test]
    fn two_components_keep_the_larger() {
        // Two well-separated spheres under a tiny blend radius: the level
        // set has two shells and only the big one survives.
        let s = Surface::Analytic(AnalyticSdf::SmoothUnion {
            a: Box::new(AnalyticSdf::Sphere {
                center: Vec3::new(-3.0, 0.0, 0.0),
                radius: 1.0,
            }),
            b: Box::new(AnalyticSdf::Sphere {
                center: Vec3::new(3.0, 0.0, 0.0),
                radius: 0.4,
            }),
            k: 0.05,
        });
        let bm = extract_base_mesh(
            &s,
            BaseMeshParams {
                resolution: 64,
                target_faces: 500,
            },
        )
        .unwrap();
        bm.mesh.validate().unwrap();
        assert_eq!(bm.mesh.euler_characteristic(), 2);
        for v in bm.mesh.live_vertices() {
            let p = bm.transform.invert(bm.mesh.position(v));
            assert_near(
                (p - Vec3::new(-3.0, 0.0, 0.0)).norm(),
                1.0,
                0.15,
                "surviving shell radius",
            );
        }
    }

    #[test]
    fn decimation_stays_close_to_the_dense_mesh() {
        let s = Surface::unit_sphere();
        let dense = marching_cubes(&s, 64, 0.0).unwrap();
        let (coarse, reached) = qem_decimate(&dense, 2000).unwrap();
        assert!(reached);
        let bvh = Bvh::new(&dense);
        let (lo, hi) = dense.bbox();
        let bound = 0.1 * (hi - lo).norm();
        for sp in sample_uniform(&coarse, 10_000, 7) {
            let hit = bvh.closest(coarse.embed(sp));
            assert!(
                hit.distance <= bound,
                "sampled point is {} from the dense mesh",
                hit.distance
            );
        }
    }

    #[test]
    fn normalization_round_trip() {
        let t = NormalizationTransform {
            scale: 0.37,
            translation: Vec3::new(0.4, -1.2, 3.0),
        };
        let inv = t.inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = Vec3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            );
            let back = t.invert(t.apply(p));
            assert!((back - p).norm() <= 1e-6 * p.norm().max(1.0));
            assert!((inv.apply(t.apply(p)) - p).norm() <= 1e-6 * p.norm().max(1.0));
        }
        let id = NormalizationTransform::identity();
        assert_eq!(id.apply(Vec3::new(1.0, 2.0, 3.0)), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn empty_level_set_propagates() {
        let g = GridSdf::from_fn([9, 9, 9], Vec3::repeat(-1.0), Vec3::repeat(1.0), |_| 1.0)
            .unwrap();
        assert!(matches!(
            extract_base_mesh(&Surface::Grid(g), BaseMeshParams::default()),
            Err(BasemeshError::EmptyLevelSet)
        ));
    }
}
