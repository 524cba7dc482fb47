//! Target surfaces: implicit evaluation, gradients, winding numbers, and
//! projection onto the surface.
//!
//! Four representations share one interface: closed-form signed distance
//! functions, sampled distance grids, signed distance to closed meshes,
//! and oriented point clouds. The first three are *implicit* — they expose
//! φ with φ < 0 inside — and project by Newton iteration on φ. Point
//! clouds have no φ; they project onto the 0.5 level set of the
//! generalized winding number instead.

mod analytic;
mod cloud;
mod grid;
mod meshsdf;

pub use analytic::AnalyticSdf;
pub use cloud::OrientedPointCloud;
pub use grid::GridSdf;
pub use meshsdf::MeshSdf;

use crate::{NormalizationTransform, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
    #[error("point ({}, {}, {}) lies outside the sampled domain", point[0], point[1], point[2])]
    OutsideDomain { point: [f64; 3] },
    #[error("this surface representation has no implicit function")]
    NotImplicit,
    #[error("winding numbers require a mesh or point-cloud surface")]
    NoWindingNumber,
}

/// Outcome of projecting a point onto the surface.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionResult {
    /// Landing point; on the surface when `converged`.
    pub point: Vec3,
    /// Whether the tolerance was met (|φ| ≤ 1e-6, or winding-number
    /// bracket width ≤ 1e-6 for point clouds). Callers discard
    /// non-converged samples.
    pub converged: bool,
    /// Field evaluations / accepted steps spent.
    pub iterations: u32,
}

const NEWTON_TOL: f64 = 1e-6;
const NEWTON_MAX_ITERS: u32 = 30;

/// A target surface in any supported representation.
pub enum Surface {
    Analytic(AnalyticSdf),
    Grid(GridSdf),
    Mesh(MeshSdf),
    Cloud(OrientedPointCloud),
    /// A surface viewed through a similarity transform, so queries in the
    /// normalized frame hit the original geometry.
    Transformed {
        surface: Box<Surface>,
        transform: NormalizationTransform,
    },
}

impl Surface {
    pub fn unit_sphere() -> Self {
        Surface::Analytic(AnalyticSdf::unit_sphere())
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Surface::Analytic(AnalyticSdf::Torus { major, minor })
    }

    pub fn cube(half_extent: f64) -> Self {
        Surface::Analytic(AnalyticSdf::Box {
            half_extents: Vec3::repeat(half_extent),
        })
    }

    /// Wraps the surface so that all queries are interpreted in the frame
    /// produced by `transform` (the frame the base mesh lives in).
    pub fn normalized(self, transform: NormalizationTransform) -> Self {
        Surface::Transformed {
            surface: Box::new(self),
            transform,
        }
    }

    /// Whether φ is available (everything except point clouds).
    pub fn is_implicit(&self) -> bool {
        match self {
            Surface::Cloud(_) => false,
            Surface::Transformed { surface, .. } => surface.is_implicit(),
            _ => true,
        }
    }

    /// Implicit value φ(p): negative inside, positive outside. Uniform
    /// scaling preserves the distance property, so transformed surfaces
    /// report `scale · φ(p_original)`.
    pub fn eval(&self, p: Vec3) -> Result<f64, SurfaceError> {
        match self {
            Surface::Analytic(s) => Ok(s.eval(p)),
            Surface::Grid(g) => g.eval(p),
            Surface::Mesh(m) => Ok(m.eval(p)),
            Surface::Cloud(_) => Err(SurfaceError::NotImplicit),
            Surface::Transformed { surface, transform } => {
                Ok(surface.eval(transform.invert(p))? * transform.scale)
            }
        }
    }

    /// Gradient ∇φ(p).
    pub fn grad(&self, p: Vec3) -> Result<Vec3, SurfaceError> {
        match self {
            Surface::Analytic(s) => Ok(s.grad(p)),
            Surface::Grid(g) => Ok(g.eval_grad(p)?.1),
            Surface::Mesh(m) => Ok(m.grad(p)),
            Surface::Cloud(_) => Err(SurfaceError::NotImplicit),
            // ∇(s·φ(T⁻¹p)) = s·(1/s)·∇φ = ∇φ at the pre-image.
            Surface::Transformed { surface, transform } => surface.grad(transform.invert(p)),
        }
    }

    /// Winding number; defined for meshes and point clouds.
    pub fn winding_number(&self, p: Vec3) -> Result<f64, SurfaceError> {
        match self {
            Surface::Mesh(m) => Ok(m.winding_number(p)),
            Surface::Cloud(c) => Ok(c.winding_number(p)),
            Surface::Transformed { surface, transform } => {
                surface.winding_number(transform.invert(p))
            }
            _ => Err(SurfaceError::NoWindingNumber),
        }
    }

    /// Outward unit normal of the surface near `p`; `hint` breaks
    /// degeneracies and seeds the point-cloud estimate.
    pub fn normal_at(&self, p: Vec3, hint: Vec3) -> Vec3 {
        match self {
            Surface::Cloud(c) => c.normal_estimate(p, hint),
            // Directions are invariant under a positive similarity.
            Surface::Transformed { surface, transform } => {
                surface.normal_at(transform.invert(p), hint)
            }
            _ => match self.grad(p) {
                Ok(g) if g.norm() > 1e-12 => g / g.norm(),
                _ => hint,
            },
        }
    }

    /// Projects `p` onto the surface. Implicit representations run Newton
    /// iteration on φ; point clouds bracket and bisect the winding-number
    /// 0.5 level set along an estimated normal direction.
    pub fn project(&self, p: Vec3, normal_hint: Vec3) -> ProjectionResult {
        match self {
            Surface::Analytic(s) => project_analytic(s, p),
            Surface::Grid(_) | Surface::Mesh(_) => project_newton(self, p),
            Surface::Cloud(c) => c.project(p, normal_hint),
            Surface::Transformed { surface, transform } => {
                if surface.is_implicit() {
                    // Newton on the wrapped φ enforces the tolerance in
                    // *this* frame (delegating would enforce it in the
                    // original frame, off by the scale factor).
                    project_newton(self, p)
                } else {
                    let inner = surface.project(transform.invert(p), normal_hint);
                    ProjectionResult {
                        point: transform.apply(inner.point),
                        ..inner
                    }
                }
            }
        }
    }

    /// Axis-aligned bounds guaranteed to contain the surface.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Surface::Analytic(s) => analytic_bounds(s),
            Surface::Grid(g) => g.bbox(),
            Surface::Mesh(m) => m.mesh().bbox(),
            Surface::Cloud(c) => {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for p in c.points() {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                (lo, hi)
            }
            // scale > 0, so apply() preserves componentwise order.
            Surface::Transformed { surface, transform } => {
                let (lo, hi) = surface.bounds();
                (transform.apply(lo), transform.apply(hi))
            }
        }
    }
}

fn analytic_bounds(s: &AnalyticSdf) -> (Vec3, Vec3) {
    match s {
        AnalyticSdf::Sphere { center, radius } => {
            (center - Vec3::repeat(*radius), center + Vec3::repeat(*radius))
        }
        AnalyticSdf::Torus { major, minor } => {
            let r = major + minor;
            (Vec3::new(-r, -r, -minor), Vec3::new(r, r, *minor))
        }
        AnalyticSdf::Box { half_extents } => (-half_extents, *half_extents),
        AnalyticSdf::SmoothUnion { a, b, k } => {
            let (alo, ahi) = analytic_bounds(a);
            let (blo, bhi) = analytic_bounds(b);
            // The blend can bulge outward by up to k/4 between the shapes.
            let pad = Vec3::repeat(k * 0.25);
            (alo.inf(&blo) - pad, ahi.sup(&bhi) + pad)
        }
    }
}

/// One full step p − φ∇φ (exact for true distance fields), then up to
/// three Newton polish steps.
fn project_analytic(s: &AnalyticSdf, p: Vec3) -> ProjectionResult {
    let mut x = p;
    let mut fx = s.eval(x);
    if fx.abs() <= NEWTON_TOL {
        return ProjectionResult {
            point: x,
            converged: true,
            iterations: 0,
        };
    }
    x -= s.grad(x) * fx;
    fx = s.eval(x);
    let mut iterations = 1;
    while fx.abs() > NEWTON_TOL && iterations < 4 {
        let g = s.grad(x);
        let n2 = g.norm_squared().max(1e-30);
        x -= g * (fx / n2);
        fx = s.eval(x);
        iterations += 1;
    }
    ProjectionResult {
        point: x,
        converged: fx.abs() <= NEWTON_TOL,
        iterations,
    }
}

/// Damped Newton iteration on φ: steps that fail to reduce |φ| are halved,
/// so |φ| decreases monotonically across accepted iterations.
fn project_newton(s: &Surface, p: Vec3) -> ProjectionResult {
    let fail = |point, iterations| ProjectionResult {
        point,
        converged: false,
        iterations,
    };
    let mut x = p;
    let mut fx = match s.eval(x) {
        Ok(v) => v,
        Err(_) => return fail(p, 0),
    };
    let mut iterations = 0;
    while fx.abs() > NEWTON_TOL {
        if iterations >= NEWTON_MAX_ITERS {
            return fail(x, iterations);
        }
        let g = match s.grad(x) {
            Ok(g) => g,
            Err(_) => return fail(x, iterations),
        };
        let n2 = g.norm_squared();
        if n2 < 1e-30 {
            return fail(x, iterations);
        }
        let mut step = -g * (fx / n2);
        let mut accepted = false;
        for _ in 0..20 {
            let cand = x + step;
            match s.eval(cand) {
                Ok(fc) if fc.abs() < fx.abs() => {
                    x = cand;
                    fx = fc;
                    accepted = true;
                    break;
                }
                // Out of domain or no progress: shorten the step.
                _ => step *= 0.5,
            }
        }
        if !accepted {
            return fail(x, iterations);
        }
        iterations += 1;
    }
    ProjectionResult {
        point: x,
        converged: true,
        iterations,
    }
}
