//! Adam optimizer with first/second moment estimates and bias correction.
//!
//! Every step checks gradients for non-finite values *before* touching the
//! parameters, so a failed step leaves the model untouched. Updated
//! parameters are snapped to the f32 grid to keep the in-memory model
//! bit-identical to its serialized form.

use ndarray::{Array1, Array2};

use super::mlp::{Mlp, MlpGrads};
use super::NeuralError;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

fn update(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, bc1: f64, bc2: f64) {
    *m = BETA1 * *m + (1.0 - BETA1) * g;
    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
    let mhat = *m / bc1;
    let vhat = *v / bc2;
    *p = (*p - lr * mhat / (vhat.sqrt() + EPS)) as f32 as f64;
}

/// Adam state for every parameter of an [`Mlp`].
pub struct AdamState {
    lr: f64,
    t: u64,
    mw: Vec<Array2<f64>>,
    vw: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros = MlpGrads::zeros_like(net);
        AdamState {
            lr,
            t: 0,
            mw: zeros.dw.clone(),
            vw: zeros.dw,
            mb: zeros.db.clone(),
            vb: zeros.db,
        }
    }

    /// One optimizer step. Errors (and leaves everything unchanged) if any
    /// gradient entry is non-finite.
    /// Changes the step size for subsequent updates; moment estimates and
    /// the step counter are preserved.
    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<(), NeuralError> {
        for (layer, (dw, db)) in grads.dw.iter().zip(&grads.db).enumerate() {
            if dw.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFiniteGradient {
                    layer,
                    kind: "weights",
                });
            }
            if db.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFiniteGradient {
                    layer,
                    kind: "biases",
                });
            }
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for (layer, (w, b)) in net.layers_mut().enumerate() {
            for (((p, &g), m), v) in w
                .iter_mut()
                .zip(grads.dw[layer].iter())
                .zip(self.mw[layer].iter_mut())
                .zip(self.vw[layer].iter_mut())
            {
                update(p, g, m, v, self.lr, bc1, bc2);
            }
            for (((p, &g), m), v) in b
                .iter_mut()
                .zip(grads.db[layer].iter())
                .zip(self.mb[layer].iter_mut())
                .zip(self.vb[layer].iter_mut())
            {
                update(p, g, m, v, self.lr, bc1, bc2);
            }
        }
        Ok(())
    }
}

/// Adam state for a free parameter matrix (e.g. learned per-vertex
/// features) that trains alongside a network.
pub struct AdamBuffer {
    lr: f64,
    t: u64,
    m: Array2<f64>,
    v: Array2<f64>,
}

impl AdamBuffer {
    pub fn new(shape: (usize, usize), lr: f64) -> Self {
        AdamBuffer {
            lr,
            t: 0,
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    pub fn step(&mut self, params: &mut Array2<f64>, grads: &Array2<f64>) -> Result<(), NeuralError> {
        assert_eq!(params.dim(), self.m.dim(), "parameter shape");
        assert_eq!(grads.dim(), self.m.dim(), "gradient shape");
        if grads.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFiniteGradient {
                layer: 0,
                kind: "feature matrix",
            });
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            update(p, g, m, v, self.lr, bc1, bc2);
        }
        Ok(())
    }
}
