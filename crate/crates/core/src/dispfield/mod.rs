//! Learned displacement fields over a coarse base mesh.
//!
//! A displacement field maps the base surface into space as
//! `g(x) = x + net([encoding(x), feature blend])`, where the feature blend
//! interpolates learnable per-vertex vectors barycentrically. An inverse
//! field maps ambient points back with `y + net(encoding(y))` — it carries
//! no per-vertex features because its domain is ambient space. The module
//! houses the geometric queries on a field (mapped normals, local
//! Jacobians), the training losses and two-phase optimizer, and
//! area-distortion-weighted sampling.

mod batch;
mod loss;
mod sample;
mod train;

pub use loss::{
    loss_anchor, loss_conformal, loss_cycle, loss_normal, loss_projection,
};
pub use sample::sample_weighted;
pub use train::{train, write_history_csv, HistoryRow, TrainingRun};


use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{HalfedgeMesh, MeshError, SurfacePoint};
use crate::neural::{encoding_dim, positional_encoding, write_encoding_tangent, Mlp, NeuralError};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum DispfieldError {
    #[error("invalid training config: {reason}")]
    InvalidConfig { reason: String },
    #[error("field is inconsistent: {reason}")]
    InvalidField { reason: String },
    #[error("surface point on dead or out-of-range face {face}")]
    DeadFace { face: u32 },
    #[error("degenerate pushforward on face {face}: |Jt1 x Jt2| = {norm:.3e}")]
    DegeneratePushforward { face: u32, norm: f64 },
    #[error("{failed} of {total} projections failed to converge")]
    ProjectionFailures { failed: usize, total: usize },
    #[error("no usable samples for {what}")]
    NoUsableSamples { what: &'static str },
    #[error("anchor loss requested with an empty anchor list")]
    NoAnchors,
    #[error("non-finite loss at {phase} epoch {epoch}")]
    NonFiniteLoss { phase: &'static str, epoch: usize },
    #[error("rejection sampling acceptance rate {acceptance:.2e} fell below 1e-3")]
    SamplingCollapse { acceptance: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Forward displacement field: base mesh, residual network, and learnable
/// per-vertex features.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    pub base: HalfedgeMesh,
    /// Residual net; input width 3+6·levels+feature_dim, output width 3.
    pub net: Mlp,
    /// One feature row per base vertex.
    pub features: Array2<f64>,
    pub levels: usize,
}

/// Inverse field mapping ambient points back toward the base surface.
#[derive(Debug, Clone)]
pub struct InverseField {
    /// Input width 3+6·levels, output width 3.
    pub net: Mlp,
    pub levels: usize,
}

/// The 2×2 in-plane derivative of the field between the base tangent frame
/// and the mapped tangent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalJacobian(pub [[f64; 2]; 2]);

/// Overflow-safe `(1/10)·ln(1+exp(10t))`.
pub(crate) fn softplus_tenth(t: f64) -> f64 {
    t.max(0.0) + 0.1 * (-10.0 * t.abs()).exp().ln_1p()
}

/// Its derivative, `sigmoid(10t)`.
pub(crate) fn softplus_tenth_slope(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-10.0 * t).exp())
    } else {
        let e = (10.0 * t).exp();
        e / (1.0 + e)
    }
}

impl LocalJacobian {
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// trace(JᵀJ): the sum of squared entries.
    pub fn trace_gram(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum()
    }

    /// Conformality penalty `χ(−det/trace(JᵀJ))` with the softplus-like
    /// `χ(t) = (1/10)·ln(1+exp(10t))`. The argument is scale-invariant and
    /// reaches its minimum −1/2 exactly at conformal maps; `None` when the
    /// trace vanishes (fully degenerate sample).
    pub fn conformal_energy(&self) -> Option<f64> {
        let tr = self.trace_gram();
        if tr <= 0.0 {
            return None;
        }
        Some(softplus_tenth(-self.det() / tr))
    }
}

/// Point-to-point training constraint: a base surface point that must land
/// on a stated target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub face: u32,
    pub bary: [f64; 3],
    pub target: [f64; 3],
}

impl Anchor {
    pub fn surface_point(&self) -> Result<SurfacePoint, MeshError> {
        SurfacePoint::new(self.face, self.bary)
    }

    pub fn target_point(&self) -> Vec3 {
        Vec3::new(self.target[0], self.target[1], self.target[2])
    }
}

/// Hyperparameters of [`train`]. Serializes to/from JSON with every field
/// optional (missing fields take the documented defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Weight of the inverse-consistency loss.
    pub lambda_cycle: f64,
    /// Weight of the surface-matching loss.
    pub lambda_projection: f64,
    /// Weight of the anchor loss; 0 disables it. A common choice is
    /// 0.1·lambda_projection.
    pub lambda_anchor: f64,
    /// Weight of the normal-alignment loss; 0 disables it.
    pub lambda_normal: f64,
    /// Weight of the conformality loss; 0 disables it.
    pub lambda_conformal: f64,
    /// Samples per main-phase batch.
    pub samples_per_batch: usize,
    /// Main-phase epoch count (one full-batch step per epoch).
    pub epochs: usize,
    /// Identity-fit epoch count.
    pub init_epochs: usize,
    /// Identity-fit sample count.
    pub init_samples: usize,
    /// Main-phase epochs between batch resamples.
    pub resample_every: usize,
    pub learning_rate: f64,
    pub anchors: Vec<Anchor>,
    pub seed: u64,
    /// Positional-encoding level count L (input gains 6 channels each).
    pub encoding_levels: usize,
    /// Per-vertex feature dimension d.
    pub feature_dim: usize,
    /// Hidden-layer widths of both networks.
    pub hidden_widths: Vec<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lambda_cycle: 1e2,
            lambda_projection: 1e4,
            lambda_anchor: 0.0,
            lambda_normal: 0.0,
            lambda_conformal: 0.0,
            samples_per_batch: 32768,
            epochs: 10000,
            init_epochs: 1000,
            init_samples: 32768,
            resample_every: 10,
            learning_rate: 1e-3,
            anchors: Vec::new(),
            seed: 0,
            encoding_levels: 8,
            feature_dim: 4,
            hidden_widths: vec![64, 64],
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), DispfieldError> {
        let bad = |reason: &str| {
            Err(DispfieldError::InvalidConfig {
                reason: reason.to_string(),
            })
        };
        let weights = [
            self.lambda_cycle,
            self.lambda_projection,
            self.lambda_anchor,
            self.lambda_normal,
            self.lambda_conformal,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("loss weights must be finite and non-negative");
        }
        if self.samples_per_batch == 0 || self.init_samples == 0 {
            return bad("batch sizes must be at least 1");
        }
        if self.resample_every == 0 {
            return bad("resample_every must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive and finite");
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.iter().any(|&w| w == 0) {
            return bad("hidden widths must be non-empty and positive");
        }
        if self.lambda_anchor > 0.0 && self.anchors.is_empty() {
            return Err(DispfieldError::NoAnchors);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DispfieldError> {
        let cfg: TrainingConfig =
            serde_json::from_str(text).map_err(|e| DispfieldError::InvalidConfig {
                reason: format!("config JSON: {e}"),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl DisplacementField {
    /// Builds a field, checking the net/feature/mesh shape contract. The
    /// base mesh must be compact so vertex ids index the feature rows.
    pub fn new(
        base: HalfedgeMesh,
        net: Mlp,
        features: Array2<f64>,
        levels: usize,
    ) -> Result<Self, DispfieldError> {
        if !base.is_compact() {
            return Err(DispfieldError::InvalidField {
                reason: "base mesh must be compact".into(),
            });
        }
        if features.nrows() != base.n_vertices() {
            return Err(DispfieldError::InvalidField {
                reason: format!(
                    "feature rows {} != base vertex count {}",
                    features.nrows(),
                    base.n_vertices()
                ),
            });
        }
        let want = encoding_dim(levels) + features.ncols();
        if net.input_dim() != want || net.output_dim() != 3 {
            return Err(DispfieldError::InvalidField {
                reason: format!(
                    "net maps {}->{}, expected {}->3",
                    net.input_dim(),
                    net.output_dim(),
                    want
                ),
            });
        }
        Ok(DisplacementField {
            base,
            net,
            features,
            levels,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    fn check_face(&self, face: u32) -> Result<(), DispfieldError> {
        if (face as usize) < self.base.face_slots() && self.base.face_is_alive(face) {
            Ok(())
        } else {
            Err(DispfieldError::DeadFace { face })
        }
    }

    /// Barycentric blend of the three corner feature rows.
    pub fn blended_feature(&self, p: &SurfacePoint) -> Vec<f64> {
        let verts = self.base.face_vertices(p.face);
        let d = self.feature_dim();
        let mut out = vec![0.0; d];
        for (k, &v) in verts.iter().enumerate() {
            let w = p.bary[k];
            for (o, &u) in out.iter_mut().zip(self.features.row(v as usize)) {
                *o += w * u;
            }
        }
        out
    }

    /// Network input for one surface point: positional encoding of the
    /// embedded position, then the feature blend.
    pub fn encode_input(&self, p: &SurfacePoint) -> Result<Vec<f64>, DispfieldError> {
        self.check_face(p.face)?;
        let x = self.base.embed(*p);
        let enc = encoding_dim(self.levels);
        let mut input = vec![0.0; enc + self.feature_dim()];
        crate::neural::write_encoding(x, self.levels, &mut input[..enc]);
        input[enc..].copy_from_slice(&self.blended_feature(p));
        Ok(input)
    }

    /// The mapped position `x + net(...)`.
    pub fn eval(&self, p: &SurfacePoint) -> Result<Vec3, DispfieldError> {
        let input = self.encode_input(p)?;
        let x = self.base.embed(*p);
        let out = self.net.forward(&input);
        Ok(x + Vec3::new(out[0], out[1], out[2]))
    }

    /// Pushes the two base-frame tangents through the field's derivative,
    /// returning `(J t1, J t2)`. The derivative of the feature blend along
    /// an in-plane direction uses the constant barycentric gradients of the
    /// face.
    pub fn pushforward(&self, p: &SurfacePoint) -> Result<(Vec3, Vec3), DispfieldError> {
        self.check_face(p.face)?;
        let frame = self.base.frame_at(p)?;
        let pushed = self.push_tangents(p, &[frame.tangent1, frame.tangent2])?;
        Ok((pushed[0], pushed[1]))
    }

    /// Pushforward of arbitrary in-plane tangent directions.
    pub(crate) fn push_tangents(
        &self,
        p: &SurfacePoint,
        tangents: &[Vec3; 2],
    ) -> Result<[Vec3; 2], DispfieldError> {
        let input = self.encode_input(p)?;
        let jac = self.net.input_jacobian(&input);
        let x = self.base.embed(*p);
        let enc = encoding_dim(self.levels);
        let grads = bary_gradients(&self.base.face_positions(p.face));
        let verts = self.base.face_vertices(p.face);
        let mut out = [Vec3::zeros(); 2];
        let mut din = vec![0.0; input.len()];
        for (which, t) in tangents.iter().enumerate() {
            write_encoding_tangent(x, self.levels, *t, &mut din[..enc]);
            din[enc..].fill(0.0);
            for (k, &v) in verts.iter().enumerate() {
                let dw = grads[k].dot(t);
                for (j, slot) in din[enc..].iter_mut().enumerate() {
                    *slot += dw * self.features[[v as usize, j]];
                }
            }
            let mut pushed = *t;
            for r in 0..3 {
                let mut acc = 0.0;
                for (c, &d) in din.iter().enumerate() {
                    acc += jac[[r, c]] * d;
                }
                pushed[r] += acc;
            }
            out[which] = pushed;
        }
        Ok(out)
    }

    /// Unit normal of the mapped surface: the normalized cross product of
    /// the pushed-forward tangents.
    pub fn mapped_normal(&self, p: &SurfacePoint) -> Result<Vec3, DispfieldError> {
        let (b1, b2) = self.pushforward(p)?;
        let c = b1.cross(&b2);
        let n = c.norm();
        if n < 1e-10 {
            return Err(DispfieldError::DegeneratePushforward {
                face: p.face,
                norm: n,
            });
        }
        Ok(c / n)
    }

    /// The in-plane derivative between the base frame `(t1, t2)` and the
    /// mapped frame: the mapped frame takes the (already in-plane)
    /// pushforward of `t1`, normalized, and completes it with
    /// `n × t`. The construction makes the matrix upper-triangular with a
    /// non-negative determinant.
    pub fn local_jacobian(&self, p: &SurfacePoint) -> Result<LocalJacobian, DispfieldError> {
        let (b1, b2) = self.pushforward(p)?;
        let c = b1.cross(&b2);
        let n = c.norm();
        if n < 1e-10 {
            return Err(DispfieldError::DegeneratePushforward {
                face: p.face,
                norm: n,
            });
        }
        let normal = c / n;
        let t1 = b1 / b1.norm();
        let t2 = normal.cross(&t1);
        Ok(LocalJacobian([
            [t1.dot(&b1), t1.dot(&b2)],
            [t2.dot(&b1), t2.dot(&b2)],
        ]))
    }
}

impl InverseField {
    pub fn new(net: Mlp, levels: usize) -> Result<Self, DispfieldError> {
        if net.input_dim() != encoding_dim(levels) || net.output_dim() != 3 {
            return Err(DispfieldError::InvalidField {
                reason: format!(
                    "inverse net maps {}->{}, expected {}->3",
                    net.input_dim(),
                    net.output_dim(),
                    encoding_dim(levels)
                ),
            });
        }
        Ok(InverseField { net, levels })
    }

    /// The pulled-back position `y + net(encoding(y))`.
    pub fn eval(&self, y: Vec3) -> Vec3 {
        let enc = positional_encoding(y, self.levels);
        let out = self.net.forward(enc.as_slice().expect("contiguous"));
        y + Vec3::new(out[0], out[1], out[2])
    }
}

/// In-plane gradients of the three barycentric coordinates of a face.
pub(crate) fn bary_gradients(pos: &[Vec3; 3]) -> [Vec3; 3] {
    let n = (pos[1] - pos[0]).cross(&(pos[2] - pos[0]));
    let n2 = n.norm_squared().max(1e-300);
    [
        n.cross(&(pos[2] - pos[1])) / n2,
        n.cross(&(pos[0] - pos[2])) / n2,
        n.cross(&(pos[1] - pos[0])) / n2,
    ]
}
