//! Oriented point clouds: generalized winding numbers and projection onto
//! the 0.5 level set.
//!
//! Each point carries a uniform area weight derived from local sample
//! spacing: a disk of the 8-nearest-neighbor radius r₈ holds 8 samples, so
//! the per-point area is (π/8)·r₈², averaged over the cloud. With that
//! weight the winding field is ≈1 inside, ≈0 outside, and its 0.5 level
//! set approximates the sampled surface.

use std::collections::HashMap;

use super::{ProjectionResult, SurfaceError};
use crate::Vec3;

pub struct OrientedPointCloud {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    grid: HashGrid,
    /// Mean local spacing; Gaussian kernel width for normal estimation.
    kernel_width: f64,
    /// Uniform per-point area weight (mean of squared local spacings).
    area_weight: f64,
    bbox_diag: f64,
    // Structure-of-arrays copies for the winding-number sweep.
    px: Vec<f64>,
    py: Vec<f64>,
    pz: Vec<f64>,
    nx: Vec<f64>,
    ny: Vec<f64>,
    nz: Vec<f64>,
}

impl OrientedPointCloud {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self, SurfaceError> {
        if points.len() != normals.len() {
            return Err(SurfaceError::Format(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        if points.len() < 9 {
            return Err(SurfaceError::Format(
                "point cloud needs at least 9 points".into(),
            ));
        }
        for (i, n) in normals.iter().enumerate() {
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(SurfaceError::Format(format!(
                    "normal {i} has length {}, need unit",
                    n.norm()
                )));
            }
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let bbox_diag = (hi - lo).norm();
        if bbox_diag <= 0.0 {
            return Err(SurfaceError::Format("all cloud points coincide".into()));
        }

        // Cell size ~2× the spacing a surface-distributed cloud would have.
        let cell = 2.0 * bbox_diag / (points.len() as f64).sqrt().max(1.0);
        let grid = HashGrid::build(&points, cell.max(bbox_diag * 1e-6));

        // Local spacing from the 8th-neighbor radius at every point.
        let mut sum_s = 0.0;
        let mut sum_s2 = 0.0;
        for (i, p) in points.iter().enumerate() {
            let nn = grid.knn(&points, *p, 8, Some(i as u32));
            let r8 = nn.last().map(|&(d, _)| d).unwrap_or(0.0);
            let s2 = r8 * r8 * std::f64::consts::PI / 8.0;
            sum_s2 += s2;
            sum_s += s2.sqrt();
        }
        let n = points.len() as f64;
        let kernel_width = sum_s / n;
        let area_weight = sum_s2 / n;

        let sox = |sel: fn(&Vec3) -> f64, v: &[Vec3]| v.iter().map(sel).collect::<Vec<_>>();
        Ok(OrientedPointCloud {
            px: sox(|p| p.x, &points),
            py: sox(|p| p.y, &points),
            pz: sox(|p| p.z, &points),
            nx: sox(|p| p.x, &normals),
            ny: sox(|p| p.y, &normals),
            nz: sox(|p| p.z, &normals),
            grid,
            kernel_width,
            area_weight,
            bbox_diag,
            points,
            normals,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    /// Generalized winding number: exact summation of per-point dipole
    /// contributions with the uniform area weight.
    pub fn winding_number(&self, p: Vec3) -> f64 {
        // Queries that coincide with a sample are singular; nudge them.
        let eps = 1e-9 * self.bbox_diag;
        let p = if self.grid.nearest_within(&self.points, p, eps).is_some() {
            p + Vec3::repeat(eps / 3f64.sqrt())
        } else {
            p
        };
        let mut sum = 0.0;
        for i in 0..self.px.len() {
            let dx = self.px[i] - p.x;
            let dy = self.py[i] - p.y;
            let dz = self.pz[i] - p.z;
            let r2 = dx * dx + dy * dy + dz * dz;
            let r = r2.sqrt();
            let dot = dx * self.nx[i] + dy * self.ny[i] + dz * self.nz[i];
            sum += dot / (r2 * r);
        }
        sum * self.area_weight / (4.0 * std::f64::consts::PI)
    }

    /// Gaussian-weighted average of the 8 nearest normals; falls back
    /// to `fallback` when the average degenerates.
    pub fn normal_estimate(&self, p: Vec3, fallback: Vec3) -> Vec3 {
        let nn = self.grid.knn(&self.points, p, 8, None);
        let sigma = self.kernel_width;
        let d0 = nn.first().map(|&(d, _)| d).unwrap_or(0.0);
        let mut acc = Vec3::zeros();
        for &(d, i) in &nn {
            // Shifted Gaussian weights keep far queries from underflowing.
            let w = (-(d * d - d0 * d0) / (2.0 * sigma * sigma)).exp();
            acc += self.normals[i as usize] * w;
        }
        let n = acc.norm();
        if n < 1e-9 {
            fallback
        } else {
            acc / n
        }
    }

    /// Projects `p` onto the winding-number 0.5 level set: march along the
    /// estimated normal direction until the level is bracketed, then bisect
    /// to width 1e-6.
    pub fn project(&self, p: Vec3, normal_hint: Vec3) -> ProjectionResult {
        const MAX_EVALS: u32 = 120;
        const BISECT_WIDTH: f64 = 1e-6;
        let evals = std::cell::Cell::new(0u32);
        let gwn = |q: Vec3| {
            evals.set(evals.get() + 1);
            self.winding_number(q)
        };

        let w0 = gwn(p);
        let mut dir = self.normal_estimate(p, normal_hint);
        if w0 < 0.5 {
            dir = -dir; // outside: walk against the outward normal
        }

        // March with steps tied to the distance from the cloud, floored by
        // the kernel width so the level set cannot be straddled unseen.
        let mut t_prev = 0.0;
        let mut w_prev = w0;
        let mut bracket = None;
        let mut t = 0.0;
        while evals.get() < MAX_EVALS && t < 2.0 * self.bbox_diag {
            let here = p + dir * t;
            let cap = 0.1 * self.bbox_diag;
            let near = self
                .grid
                .nearest_within(&self.points, here, cap)
                .unwrap_or(cap);
            let step = (0.5 * near).clamp(0.5 * self.kernel_width, cap);
            t += step;
            let w = gwn(p + dir * t);
            if (w - 0.5) * (w_prev - 0.5) <= 0.0 {
                bracket = Some((t_prev, t));
                break;
            }
            t_prev = t;
            w_prev = w;
        }

        let Some((mut lo, mut hi)) = bracket else {
            return ProjectionResult {
                point: p + dir * t_prev,
                converged: false,
                iterations: evals.get(),
            };
        };

        let mut w_lo = w_prev;
        while hi - lo > BISECT_WIDTH && evals.get() < 2 * MAX_EVALS {
            let mid = 0.5 * (lo + hi);
            let w = gwn(p + dir * mid);
            if (w - 0.5) * (w_lo - 0.5) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                w_lo = w;
            }
        }
        ProjectionResult {
            point: p + dir * (0.5 * (lo + hi)),
            converged: hi - lo <= BISECT_WIDTH,
            iterations: evals.get(),
        }
    }
}

/// Uniform hash grid over points, for k-nearest-neighbor queries.
struct HashGrid {
    cell: f64,
    map: HashMap<[i64; 3], Vec<u32>>,
}

impl HashGrid {
    fn build(points: &[Vec3], cell: f64) -> Self {
        let mut grid = HashGrid {
            cell,
            map: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let key = grid.key(*p);
            grid.map.entry(key).or_default().push(i as u32);
        }
        grid
    }

    fn key(&self, p: Vec3) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    /// The `k` nearest points to `q`, sorted by distance, optionally
    /// excluding one index. Scans cells in expanding Chebyshev shells and
    /// stops once the k-th distance is covered by fully-scanned shells.
    fn knn(&self, points: &[Vec3], q: Vec3, k: usize, exclude: Option<u32>) -> Vec<(f64, u32)> {
        let center = self.key(q);
        let mut found: Vec<(f64, u32)> = Vec::with_capacity(k + 8);
        let mut ring = 0i64;
        loop {
            let mut any_cell = false;
            for_shell(center, ring, |cell_key| {
                if let Some(ids) = self.map.get(&cell_key) {
                    any_cell = true;
                    for &i in ids {
                        if exclude == Some(i) {
                            continue;
                        }
                        let d = (points[i as usize] - q).norm();
                        found.push((d, i));
                    }
                }
            });
            if !found.is_empty() || any_cell {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                found.truncate(4 * k.max(2)); // keep the sort cheap
            }
            // Every point within ring·cell of q has been seen once the
            // shells through `ring` are scanned.
            if found.len() >= k && found[k - 1].0 <= ring as f64 * self.cell {
                found.truncate(k);
                return found;
            }
            ring += 1;
            if ring as f64 * self.cell > 1e6 * self.cell.max(1.0) {
                // Degenerate fallback; callers validated cloud size.
                found.truncate(k);
                return found;
            }
        }
    }

    /// Distance to the nearest point if one lies within `radius`, else
    /// `None`. Only shells overlapping the radius are visited, so the cost
    /// is bounded regardless of how far `q` is from the cloud.
    fn nearest_within(&self, points: &[Vec3], q: Vec3, radius: f64) -> Option<f64> {
        let center = self.key(q);
        let max_ring = (radius / self.cell).ceil() as i64 + 1;
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // Everything within (ring−1)·cell has been seen already.
            if best <= (ring - 1).max(0) as f64 * self.cell {
                break;
            }
            for_shell(center, ring, |cell_key| {
                if let Some(ids) = self.map.get(&cell_key) {
                    for &i in ids {
                        let d = (points[i as usize] - q).norm();
                        if d < best {
                            best = d;
                        }
                    }
                }
            });
        }
        (best <= radius).then_some(best)
    }
}

/// Visits every cell key at Chebyshev distance exactly `ring` from
/// `center`.
fn for_shell(center: [i64; 3], ring: i64, mut visit: impl FnMut([i64; 3])) {
    if ring == 0 {
        visit(center);
        return;
    }
    for dx in -ring..=ring {
        for dy in -ring..=ring {
            for dz in -ring..=ring {
                if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                    continue;
                }
                visit([center[0] + dx, center[1] + dy, center[2] + dz]);
            }
        }
    }
}
