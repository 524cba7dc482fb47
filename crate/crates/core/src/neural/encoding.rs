//! Periodic positional encoding of 3D points.
//!
//! A point maps to `[x, sin(2⁰πx), cos(2⁰πx), …, sin(2^{L−1}πx),
//! cos(2^{L−1}πx)]` applied coordinate-wise: the raw coordinates followed
//! by L frequency levels of six entries each (sin of all three
//! coordinates, then cos), 3 + 6L values total.

use crate::Vec3;
use ndarray::{Array1, Array2};
use std::f64::consts::PI;

pub fn encoding_dim(levels: usize) -> usize {
    3 + 6 * levels
}

/// Writes the encoding of `p` into `out` (length 3 + 6·levels).
pub fn write_encoding(p: Vec3, levels: usize, out: &mut [f64]) {
    assert_eq!(out.len(), encoding_dim(levels), "encoding buffer length");
    out[0] = p.x;
    out[1] = p.y;
    out[2] = p.z;
    for c in 0..3 {
        // One sincos per axis; higher octaves follow from the double-angle
        // identities (error growth ~2^L·ε, far below training noise).
        let (mut s, mut k_cos) = (PI * p[c]).sin_cos();
        for k in 0..levels {
            out[3 + 6 * k + c] = s;
            out[3 + 6 * k + 3 + c] = k_cos;
            let doubled = 2.0 * s * k_cos;
            k_cos = 1.0 - 2.0 * s * s;
            s = doubled;
        }
    }
}

pub fn positional_encoding(p: Vec3, levels: usize) -> Array1<f64> {
    let mut out = Array1::zeros(encoding_dim(levels));
    write_encoding(p, levels, out.as_slice_mut().expect("contiguous"));
    out
}

/// Writes the directional derivative of the encoding at `p` along `t`
/// (the encoding Jacobian times `t`): raw rows pass `t` through, the
/// level-k rows scale by ±2^kπ with the sin/cos chain rule.
pub fn write_encoding_tangent(p: Vec3, levels: usize, t: Vec3, out: &mut [f64]) {
    assert_eq!(out.len(), encoding_dim(levels), "encoding buffer length");
    out[0] = t.x;
    out[1] = t.y;
    out[2] = t.z;
    for c in 0..3 {
        let mut omega = PI;
        for k in 0..levels {
            let arg = omega * p[c];
            out[3 + 6 * k + c] = omega * arg.cos() * t[c];
            out[3 + 6 * k + 3 + c] = -omega * arg.sin() * t[c];
            omega *= 2.0;
        }
    }
}

/// Encodes a 3×s batch of column points into a (3+6L)×s matrix.
pub fn encode_batch(points: &Array2<f64>, levels: usize) -> Array2<f64> {
    assert_eq!(points.nrows(), 3, "batch row count");
    let s = points.ncols();
    let mut out = Array2::zeros((encoding_dim(levels), s));
    let mut buf = vec![0.0; encoding_dim(levels)];
    for i in 0..s {
        let p = Vec3::new(points[[0, i]], points[[1, i]], points[[2, i]]);
        write_encoding(p, levels, &mut buf);
        for (r, &v) in buf.iter().enumerate() {
            out[[r, i]] = v;
        }
    }
    out
}

/// Pulls a gradient on the encoding back to a gradient on the points:
/// returns Jᵀ·upstream per column. Reads the stored sin/cos values from
/// `encoded` (the output of [`encode_batch`]) instead of recomputing them.
pub fn encoding_backward(
    encoded: &Array2<f64>,
    levels: usize,
    upstream: &Array2<f64>,
) -> Array2<f64> {
    let s = encoded.ncols();
    assert_eq!(encoded.nrows(), encoding_dim(levels), "encoding rows");
    assert_eq!(upstream.dim(), encoded.dim(), "upstream shape");
    let mut out = Array2::zeros((3, s));
    for i in 0..s {
        for c in 0..3 {
            let mut acc = upstream[[c, i]];
            let mut omega = PI;
            for k in 0..levels {
                let sin = encoded[[3 + 6 * k + c, i]];
                let cos = encoded[[3 + 6 * k + 3 + c, i]];
                acc += omega * (cos * upstream[[3 + 6 * k + c, i]]
                    - sin * upstream[[3 + 6 * k + 3 + c, i]]);
                omega *= 2.0;
            }
            out[[c, i]] = acc;
        }
    }
    out
}

/// Dense (3+6L)×3 Jacobian of the encoding at `p`.
pub fn encoding_jacobian(p: Vec3, levels: usize) -> Array2<f64> {
    let dim = encoding_dim(levels);
    let mut jac = Array2::zeros((dim, 3));
    let mut col = vec![0.0; dim];
    for (c, t) in [Vec3::x(), Vec3::y(), Vec3::z()].into_iter().enumerate() {
        write_encoding_tangent(p, levels, t, &mut col);
        for r in 0..dim {
            jac[[r, c]] = col[r];
        }
    }
    jac
}
