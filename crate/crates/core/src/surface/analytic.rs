//! Closed-form signed distance functions and their gradients.

use crate::Vec3;

/// A signed distance function with analytic value and gradient.
///
/// Negative inside, positive outside. `SmoothUnion` blends are exact
/// implicit functions but only approximate distances; Newton projection
/// normalizes by the gradient, so that distinction is harmless downstream.
#[derive(Debug, Clone)]
pub enum AnalyticSdf {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    /// Circle of radius `major` in the xy-plane, tube radius `minor`.
    Torus {
        major: f64,
        minor: f64,
    },
    /// Axis-aligned box centered at the origin.
    Box {
        half_extents: Vec3,
    },
    /// Polynomial smooth minimum of two fields with blend radius `k`.
    SmoothUnion {
        a: std::boxed::Box<AnalyticSdf>,
        b: std::boxed::Box<AnalyticSdf>,
        k: f64,
    },
}

impl AnalyticSdf {
    pub fn unit_sphere() -> Self {
        AnalyticSdf::Sphere {
            center: Vec3::zeros(),
            radius: 1.0,
        }
    }

    pub fn eval(&self, p: Vec3) -> f64 {
        match self {
            AnalyticSdf::Sphere { center, radius } => (p - center).norm() - radius,
            AnalyticSdf::Torus { major, minor } => {
                let rho = p.xy().norm();
                ((rho - major).powi(2) + p.z * p.z).sqrt() - minor
            }
            AnalyticSdf::Box { half_extents } => {
                let q = p.abs() - half_extents;
                let outside = q.map(|c| c.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            AnalyticSdf::SmoothUnion { a, b, k } => smooth_min(a.eval(p), b.eval(p), *k),
        }
    }

    pub fn grad(&self, p: Vec3) -> Vec3 {
        match self {
            AnalyticSdf::Sphere { center, radius: _ } => {
                let d = p - center;
                let n = d.norm();
                if n < 1e-12 {
                    Vec3::x() // arbitrary unit direction at the center
                } else {
                    d / n
                }
            }
            AnalyticSdf::Torus { major, minor: _ } => {
                let rho = p.xy().norm();
                let u = rho - major;
                let m = (u * u + p.z * p.z).sqrt();
                if m < 1e-12 {
                    return Vec3::z(); // on the tube's core circle
                }
                if rho < 1e-12 {
                    // On the axis the radial direction is ambiguous; pick x.
                    return Vec3::new(u / m, 0.0, p.z / m);
                }
                Vec3::new(u * p.x / rho, u * p.y / rho, p.z) / m
            }
            AnalyticSdf::Box { half_extents } => {
                let q = p.abs() - half_extents;
                let sign = Vec3::new(sgn(p.x), sgn(p.y), sgn(p.z));
                if q.max() > 0.0 {
                    // Outside: gradient of the clamped-corner distance.
                    let c = q.map(|v| v.max(0.0));
                    let n = c.norm().max(1e-300);
                    (c / n).component_mul(&sign)
                } else {
                    // Inside: the nearest wall is along the largest component.
                    let axis = argmax3(q);
                    let mut g = Vec3::zeros();
                    g[axis] = sign[axis];
                    g
                }
            }
            AnalyticSdf::SmoothUnion { a, b, k } => {
                let (fa, fb) = (a.eval(p), b.eval(p));
                let (wa, wb) = smooth_min_weights(fa, fb, *k);
                a.grad(p) * wa + b.grad(p) * wb
            }
        }
    }
}

fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn argmax3(v: Vec3) -> usize {
    if v.x >= v.y && v.x >= v.z {
        0
    } else if v.y >= v.z {
        1
    } else {
        2
    }
}

/// Quadratic polynomial smooth minimum.
fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    let h = (0.5 + 0.5 * (b - a) / k).clamp(0.0, 1.0);
    b * (1.0 - h) + a * h - k * h * (1.0 - h)
}

/// Chain-rule weights (∂smin/∂a, ∂smin/∂b).
fn smooth_min_weights(a: f64, b: f64, k: f64) -> (f64, f64) {
    let t = 0.5 + 0.5 * (b - a) / k;
    if !(0.0..=1.0).contains(&t) {
        // Clamped region: plain min.
        return if a < b { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    // s(a,b) = b(1−h) + a·h − k·h(1−h) with h = t; dh/da = −1/(2k).
    let dh_da = -0.5 / k;
    let dh_db = 0.5 / k;
    let ds_dh = a - b - k * (1.0 - 2.0 * t);
    (t + ds_dh * dh_da, (1.0 - t) + ds_dh * dh_db)
}
