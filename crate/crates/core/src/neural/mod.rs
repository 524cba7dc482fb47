//! Small-MLP machinery: positional encoding, forward/backward passes,
//! input Jacobians, forward-mode tangents, Kaiming initialization, Adam.
//!
//! Everything is dense and CPU-only. Parameters always hold values that
//! are exactly representable in 32-bit floats (initialization and every
//! optimizer step re-quantize), so serializing them as f32 round-trips
//! bit-exactly; arithmetic between quantizations runs in f64, which keeps
//! finite-difference gradient checks well-conditioned.

mod adam;
mod encoding;
mod mlp;

pub use adam::{AdamBuffer, AdamState};
pub use encoding::{
    encode_batch, encoding_backward, encoding_dim, encoding_jacobian, positional_encoding,
    write_encoding, write_encoding_tangent,
};
pub use mlp::{Activations, Mlp, MlpGrads, TangentCache};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite gradient in layer {layer} {kind}; training aborted")]
    NonFiniteGradient { layer: usize, kind: &'static str },
}
