//! Neural displacement fields over coarse base meshes.
//!
//! The library learns a residual map `g(x) = x + MLP(encoding(x))` that
//! carries a coarse manifold "base mesh" onto a target surface given as an
//! analytic SDF, a sampled SDF grid, a mesh-backed SDF, or an oriented point
//! cloud. The trained field plus the base mesh packs into a compact `.ndf`
//! file (see FORMAT.md). On the consuming side the crate extracts manifold
//! meshes at a caller-chosen resolution, makes them intrinsically Delaunay,
//! and runs spectral, geodesic, scalar-field, and point-sampling tasks.
//!
//! Pipeline overview:
//!
//! ```text
//!   surface (SDF / grid / mesh / cloud)
//!     └─ basemesh: marching cubes → largest component → QEM → normalize
//!          └─ dispfield: two-phase training of g (and its inverse)
//!               └─ package: .ndf  ── transmit ──►  unpack
//!                    └─ remesh: split/collapse/flip → intrinsic Delaunay
//!                         └─ geomproc / scalarfield / sampling
//! ```
//!
//! All randomness flows from caller-provided seeds; every operation is
//! deterministic and single-threaded.

#[cfg(test)]
pub(crate) mod testutil;

pub mod basemesh;
pub mod dispfield;
pub mod geomproc;
pub mod mesh;
pub mod neural;
pub mod package;
pub mod remesh;
pub mod sampling;
pub mod scalarfield;
pub mod surface;

/// 3-component f64 vector used for all geometry.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 f64 matrix (ambient Jacobians, frames).
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Similarity transform `p ↦ scale·p + translation` that places a base
/// mesh (and its target surface) inside the canonical cube [−1.5, 1.5]³.
/// Invertible by construction: `scale > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    /// Original frame → normalized frame.
    pub fn apply(&self, p: Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    /// Normalized frame → original frame.
    pub fn invert(&self, p: Vec3) -> Vec3 {
        (p - self.translation) / self.scale
    }

    pub fn inverse(&self) -> Self {
        NormalizationTransform {
            scale: 1.0 / self.scale,
            translation: -self.translation / self.scale,
        }
    }
}
