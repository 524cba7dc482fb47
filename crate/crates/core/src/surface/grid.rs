//! Axis-aligned sampled distance fields with trilinear interpolation.
//!
//! File layout (little-endian): three `i32` dimensions, six `f32` bounding
//! box floats (min xyz, max xyz), then `nx·ny·nz` `f32` values with x
//! varying fastest: index `(iz·ny + iy)·nx + ix`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SurfaceError;
use crate::Vec3;

#[derive(Debug, Clone)]
pub struct GridSdf {
    dims: [usize; 3],
    bbox_min: Vec3,
    bbox_max: Vec3,
    values: Vec<f32>,
}

impl GridSdf {
    pub fn from_values(
        dims: [usize; 3],
        bbox_min: Vec3,
        bbox_max: Vec3,
        values: Vec<f32>,
    ) -> Result<Self, SurfaceError> {
        if dims.iter().any(|&n| n < 2) {
            return Err(SurfaceError::Format("grid needs at least 2 samples per axis".into()));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(SurfaceError::Format(format!(
                "value count {} does not match dims {:?}",
                values.len(),
                dims
            )));
        }
        for i in 0..3 {
            if !(bbox_min[i] < bbox_max[i]) {
                return Err(SurfaceError::Format("degenerate bounding box".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SurfaceError::Format("non-finite grid value".into()));
        }
        Ok(GridSdf {
            dims,
            bbox_min,
            bbox_max,
            values,
        })
    }

    /// Samples `f` on the lattice.
    pub fn from_fn(
        dims: [usize; 3],
        bbox_min: Vec3,
        bbox_max: Vec3,
        f: impl Fn(Vec3) -> f64,
    ) -> Result<Self, SurfaceError> {
        let h = Self::spacing_for(dims, bbox_min, bbox_max);
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for iz in 0..dims[2] {
            for iy in 0..dims[1] {
                for ix in 0..dims[0] {
                    let p = bbox_min
                        + Vec3::new(ix as f64 * h.x, iy as f64 * h.y, iz as f64 * h.z);
                    values.push(f(p) as f32);
                }
            }
        }
        Self::from_values(dims, bbox_min, bbox_max, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SurfaceError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut b4 = [0u8; 4];
        let mut dims = [0usize; 3];
        for d in &mut dims {
            r.read_exact(&mut b4)?;
            let n = i32::from_le_bytes(b4);
            if n < 2 {
                return Err(SurfaceError::Format(format!("bad grid dimension {n}")));
            }
            *d = n as usize;
        }
        let mut bb = [0f64; 6];
        for v in &mut bb {
            r.read_exact(&mut b4)?;
            *v = f32::from_le_bytes(b4) as f64;
        }
        let count = dims[0] * dims[1] * dims[2];
        let mut raw = vec![0u8; 4 * count];
        r.read_exact(&mut raw).map_err(|_| {
            SurfaceError::Format(format!("grid file truncated; expected {count} values"))
        })?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(
            dims,
            Vec3::new(bb[0], bb[1], bb[2]),
            Vec3::new(bb[3], bb[4], bb[5]),
            values,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SurfaceError> {
        let mut w = BufWriter::new(File::create(path)?);
        for &d in &self.dims {
            w.write_all(&(d as i32).to_le_bytes())?;
        }
        for v in [
            self.bbox_min.x,
            self.bbox_min.y,
            self.bbox_min.z,
            self.bbox_max.x,
            self.bbox_max.y,
            self.bbox_max.z,
        ] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn bbox(&self) -> (Vec3, Vec3) {
        (self.bbox_min, self.bbox_max)
    }

    fn spacing_for(dims: [usize; 3], bbox_min: Vec3, bbox_max: Vec3) -> Vec3 {
        Vec3::new(
            (bbox_max.x - bbox_min.x) / (dims[0] - 1) as f64,
            (bbox_max.y - bbox_min.y) / (dims[1] - 1) as f64,
            (bbox_max.z - bbox_min.z) / (dims[2] - 1) as f64,
        )
    }

    fn spacing(&self) -> Vec3 {
        Self::spacing_for(self.dims, self.bbox_min, self.bbox_max)
    }

    pub fn value_at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[(iz * self.dims[1] + iy) * self.dims[0] + ix] as f64
    }

    /// Cell index, fractional coordinates, and per-axis spacing for `p`.
    fn locate(&self, p: Vec3) -> Result<([usize; 3], Vec3, Vec3), SurfaceError> {
        let h = self.spacing();
        let mut cell = [0usize; 3];
        let mut frac = Vec3::zeros();
        for a in 0..3 {
            let span = self.bbox_max[a] - self.bbox_min[a];
            let slack = 1e-9 * span;
            if p[a] < self.bbox_min[a] - slack || p[a] > self.bbox_max[a] + slack {
                return Err(SurfaceError::OutsideDomain {
                    point: [p.x, p.y, p.z],
                });
            }
            let u = ((p[a] - self.bbox_min[a]) / h[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            let i = (u.floor() as usize).min(self.dims[a] - 2);
            cell[a] = i;
            frac[a] = u - i as f64;
        }
        Ok((cell, frac, h))
    }

    /// Trilinear value.
    pub fn eval(&self, p: Vec3) -> Result<f64, SurfaceError> {
        Ok(self.eval_grad(p)?.0)
    }

    /// Trilinear value and its analytic gradient (constant per cell along
    /// each axis, bilinear in the other two).
    pub fn eval_grad(&self, p: Vec3) -> Result<(f64, Vec3), SurfaceError> {
        let ([ix, iy, iz], t, h) = self.locate(p)?;
        let c = |dx: usize, dy: usize, dz: usize| self.value_at(ix + dx, iy + dy, iz + dz);
        let (c000, c100, c010, c110) = (c(0, 0, 0), c(1, 0, 0), c(0, 1, 0), c(1, 1, 0));
        let (c001, c101, c011, c111) = (c(0, 0, 1), c(1, 0, 1), c(0, 1, 1), c(1, 1, 1));
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;

        let c00 = lerp(c000, c100, t.x);
        let c10 = lerp(c010, c110, t.x);
        let c01 = lerp(c001, c101, t.x);
        let c11 = lerp(c011, c111, t.x);
        let c0 = lerp(c00, c10, t.y);
        let c1 = lerp(c01, c11, t.y);
        let value = lerp(c0, c1, t.z);

        let dx = {
            let d00 = c100 - c000;
            let d10 = c110 - c010;
            let d01 = c101 - c001;
            let d11 = c111 - c011;
            lerp(lerp(d00, d10, t.y), lerp(d01, d11, t.y), t.z) / h.x
        };
        let dy = lerp(c10 - c00, c11 - c01, t.z) / h.y;
        let dz = (c1 - c0) / h.z;
        Ok((value, Vec3::new(dx, dy, dz)))
    }
}
