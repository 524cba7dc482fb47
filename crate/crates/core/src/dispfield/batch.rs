//! Column-batched sample state shared by the losses, the trainer, and the
//! weighted sampler.
//!
//! A batch freezes everything derivable from the sample locations alone
//! (embedded positions, positional encodings, face frames, in-plane
//! barycentric gradients); the feature-dependent input rows are assembled
//! per call because the features train.

use ndarray::{Array2, ArrayView2};

use super::{bary_gradients, DispfieldError, DisplacementField};
use crate::mesh::{HalfedgeMesh, SurfacePoint};
use crate::neural::{encoding_dim, write_encoding, write_encoding_tangent};
use crate::Vec3;

pub(crate) struct SampleBatch {
    pub points: Vec<SurfacePoint>,
    /// 3×s embedded positions.
    pub x: Array2<f64>,
    /// (3+6L)×s positional encodings of the embedded positions.
    pub pe: Array2<f64>,
    /// Face corner vertex ids per sample.
    pub verts: Vec<[u32; 3]>,
    pub tangents: Option<TangentData>,
    levels: usize,
}

/// Frame tangents, barycentric in-plane gradients, and encoded tangent
/// rows for both frame directions.
pub(crate) struct TangentData {
    pub t: [Vec<Vec3>; 2],
    pub grad_w: Vec<[Vec3; 3]>,
    pub pe_t: [Array2<f64>; 2],
}

impl SampleBatch {
    pub fn new(
        mesh: &HalfedgeMesh,
        points: Vec<SurfacePoint>,
        levels: usize,
        with_tangents: bool,
    ) -> Result<Self, DispfieldError> {
        let s = points.len();
        let enc = encoding_dim(levels);
        let mut x = Array2::zeros((3, s));
        let mut pe = Array2::zeros((enc, s));
        let mut verts = Vec::with_capacity(s);
        let mut buf = vec![0.0; enc];
        for (i, p) in points.iter().enumerate() {
            if (p.face as usize) >= mesh.face_slots() || !mesh.face_is_alive(p.face) {
                return Err(DispfieldError::DeadFace { face: p.face });
            }
            let pos = mesh.embed(*p);
            for c in 0..3 {
                x[[c, i]] = pos[c];
            }
            write_encoding(pos, levels, &mut buf);
            for (r, &v) in buf.iter().enumerate() {
                pe[[r, i]] = v;
            }
            verts.push(mesh.face_vertices(p.face));
        }
        let tangents = if with_tangents {
            let mut t = [Vec::with_capacity(s), Vec::with_capacity(s)];
            let mut grad_w = Vec::with_capacity(s);
            let mut pe_t = [Array2::zeros((enc, s)), Array2::zeros((enc, s))];
            for (i, p) in points.iter().enumerate() {
                let frame = mesh.frame_at(p)?;
                let pos = mesh.embed(*p);
                for (which, tv) in [frame.tangent1, frame.tangent2].into_iter().enumerate() {
                    write_encoding_tangent(pos, levels, tv, &mut buf);
                    for (r, &v) in buf.iter().enumerate() {
                        pe_t[which][[r, i]] = v;
                    }
                    t[which].push(tv);
                }
                grad_w.push(bary_gradients(&mesh.face_positions(p.face)));
            }
            Some(TangentData { t, grad_w, pe_t })
        } else {
            None
        };
        Ok(SampleBatch {
            points,
            x,
            pe,
            verts,
            tangents,
            levels,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Full network input: encoding rows, then blended feature rows.
    pub fn input(&self, field: &DisplacementField) -> Array2<f64> {
        let enc = encoding_dim(self.levels);
        let d = field.feature_dim();
        let s = self.len();
        let mut input = Array2::zeros((enc + d, s));
        input.slice_mut(ndarray::s![..enc, ..]).assign(&self.pe);
        for i in 0..s {
            for (k, &v) in self.verts[i].iter().enumerate() {
                let w = self.points[i].bary[k];
                for j in 0..d {
                    input[[enc + j, i]] += w * field.features[[v as usize, j]];
                }
            }
        }
        input
    }

    /// Tangent-direction input for frame direction `which`: encoded
    /// tangent rows plus the in-plane derivative of the feature blend.
    pub fn tangent_input(&self, field: &DisplacementField, which: usize) -> Array2<f64> {
        let tan = self.tangents.as_ref().expect("batch built with tangents");
        let enc = encoding_dim(self.levels);
        let d = field.feature_dim();
        let s = self.len();
        let mut input = Array2::zeros((enc + d, s));
        input
            .slice_mut(ndarray::s![..enc, ..])
            .assign(&tan.pe_t[which]);
        for i in 0..s {
            for (k, &v) in self.verts[i].iter().enumerate() {
                let dw = tan.grad_w[i][k].dot(&tan.t[which][i]);
                for j in 0..d {
                    input[[enc + j, i]] += dw * field.features[[v as usize, j]];
                }
            }
        }
        input
    }

    /// Accumulates gradients on the feature input rows back onto the
    /// per-vertex feature matrix (the blend is linear in the rows).
    pub fn scatter_feature_grads(&self, d_rows: ArrayView2<f64>, out: &mut Array2<f64>) {
        let d = out.ncols();
        debug_assert_eq!(d_rows.nrows(), d);
        for i in 0..self.len() {
            for (k, &v) in self.verts[i].iter().enumerate() {
                let w = self.points[i].bary[k];
                for j in 0..d {
                    out[[v as usize, j]] += w * d_rows[[j, i]];
                }
            }
        }
    }

    /// Same for gradients on the tangent-direction feature rows, whose
    /// coefficients are the in-plane barycentric derivatives.
    pub fn scatter_feature_tangent_grads(
        &self,
        which: usize,
        d_rows: ArrayView2<f64>,
        out: &mut Array2<f64>,
    ) {
        let tan = self.tangents.as_ref().expect("batch built with tangents");
        let d = out.ncols();
        debug_assert_eq!(d_rows.nrows(), d);
        for i in 0..self.len() {
            for (k, &v) in self.verts[i].iter().enumerate() {
                let dw = tan.grad_w[i][k].dot(&tan.t[which][i]);
                for j in 0..d {
                    out[[v as usize, j]] += dw * d_rows[[j, i]];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::mesh::sample_uniform;
    use crate::testutil::assert_near;

    #[test]
    fn batch_input_matches_single_sample_encoding() {
        let mut field = identity_field(octahedron());
        for v in 0..field.base.n_vertices() {
            for j in 0..4 {
                field.features[[v, j]] = (v + j) as f64 * 0.03 - 0.1;
            }
        }
        let pts = sample_uniform(&field.base, 25, 5);
        let batch = SampleBatch::new(&field.base, pts.clone(), field.levels, false).unwrap();
        let input = batch.input(&field);
        for (i, p) in pts.iter().enumerate() {
            let single = field.encode_input(p).unwrap();
            for (r, &v) in single.iter().enumerate() {
                assert_near(input[[r, i]], v, 1e-15, "input entry");
            }
        }
    }

    #[test]
    fn batch_pushforward_matches_pointwise_pushforward() {
        let base = octahedron();
        let mut field = identity_field(base);
        for v in 0..field.base.n_vertices() {
            for j in 0..4 {
                field.features[[v, j]] = ((v * 7 + j * 3) % 5) as f64 * 0.05;
            }
        }
        // Give the net some weight so tangents actually transform.
        field.net = crate::neural::Mlp::kaiming(&[55, 8, 3], 3);
        let pts = sample_uniform(&field.base, 10, 6);
        let batch = SampleBatch::new(&field.base, pts.clone(), field.levels, true).unwrap();
        let input = batch.input(&field);
        let cache = field.net.forward_cache(input);
        for which in 0..2 {
            let tin = batch.tangent_input(&field, which);
            let tc = field.net.forward_tangent(&cache, &tin);
            let tan = batch.tangents.as_ref().unwrap();
            for (i, p) in pts.iter().enumerate() {
                let (b1, b2) = field.pushforward(p).unwrap();
                let want = if which == 0 { b1 } else { b2 };
                let got = tan.t[which][i]
                    + Vec3::new(
                        tc.output()[[0, i]],
                        tc.output()[[1, i]],
                        tc.output()[[2, i]],
                    );
                assert!((got - want).norm() < 1e-10, "pushforward {which} sample {i}");
            }
        }
    }
}
