//! Manifold halfedge triangle meshes, file I/O, closest-point acceleration,
//! and uniform surface sampling.
//!
//! Every mesh in this crate is a closed, oriented, manifold triangle mesh;
//! construction rejects anything else. Halfedges are stored in twin pairs so
//! that `twin(h) = h ^ 1` and the undirected edge id is `h >> 1`.

mod bvh;
mod halfedge;
mod io;
mod sample;
mod surgery;

pub use bvh::{closest_point, closest_point_brute_force, Bvh, ClosestHit};
pub use halfedge::{Frame, HalfedgeMesh};
pub use io::{
    load_mesh, load_point_cloud, write_obj, write_ply, write_ply_scalar, write_point_cloud_xyz,
    write_xyz,
};
pub use sample::{sample_uniform, UniformSampler};

use crate::Vec3;

/// Barycentric point on a specific face of a [`HalfedgeMesh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    /// Face index.
    pub face: u32,
    /// Barycentric weights over the face's three vertices; non-negative,
    /// summing to 1.
    pub bary: [f64; 3],
}

impl SurfacePoint {
    /// Builds a surface point, checking the barycentric invariants.
    pub fn new(face: u32, bary: [f64; 3]) -> Result<Self, MeshError> {
        let sum: f64 = bary.iter().sum();
        if bary.iter().any(|&w| !(w >= -1e-9) || !w.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(MeshError::InvalidSurfacePoint { face, bary });
        }
        // Clamp away the 1e-9 slack so downstream interpolation never sees
        // negative weights.
        let mut b = bary.map(|w| w.max(0.0));
        let s: f64 = b.iter().sum();
        for w in &mut b {
            *w /= s;
        }
        Ok(Self { face, bary: b })
    }

    /// Surface point sitting exactly on a face corner.
    pub fn at_corner(face: u32, corner: usize) -> Self {
        let mut bary = [0.0; 3];
        bary[corner] = 1.0;
        Self { face, bary }
    }

    /// Face centroid.
    pub fn centroid(face: u32) -> Self {
        Self {
            face,
            bary: [1.0 / 3.0; 3],
        }
    }
}

/// Errors from mesh construction, validation, queries, and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("face {face} is not a triangle with three distinct vertices")]
    DegenerateFace { face: usize },
    #[error("face {face} has near-zero area ({area:.3e} < 1e-12)")]
    ZeroAreaFace { face: usize, area: f64 },
    #[error("vertex index {index} out of range (vertex count {count})")]
    IndexOutOfRange { index: u32, count: usize },
    #[error("non-manifold edge ({v0}, {v1}): more than two incident faces")]
    NonManifoldEdge { v0: u32, v1: u32 },
    #[error("inconsistent orientation at edge ({v0}, {v1}): both faces traverse it the same way")]
    InconsistentOrientation { v0: u32, v1: u32 },
    #[error("boundary edge ({v0}, {v1}): closed surfaces required")]
    BoundaryEdge { v0: u32, v1: u32 },
    #[error("vertex {vertex}: incident faces do not form a single disk")]
    NonDiskVertex { vertex: u32 },
    #[error("mesh is empty")]
    Empty,
    #[error("invalid surface point on face {face}: barycentrics {bary:?}")]
    InvalidSurfacePoint { face: u32, bary: [f64; 3] },
    #[error("halfedge structure corrupt: {0}")]
    Corrupt(String),
    #[error("unsupported file format: {0}")]
    UnsupportedFormat(String),
}

/// Linear interpolation of three per-corner vectors by barycentric weights.
pub(crate) fn bary_lerp(corners: &[Vec3; 3], bary: &[f64; 3]) -> Vec3 {
    corners[0] * bary[0] + corners[1] * bary[1] + corners[2] * bary[2]
}
