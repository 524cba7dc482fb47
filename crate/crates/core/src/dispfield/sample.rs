//! Rejection sampling of the base surface proportional to the mapped area
//! density |det J_f|, so training batches cover the target surface evenly.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batch::SampleBatch;
use super::loss::pushforward_batch;
use super::{DispfieldError, DisplacementField};
use crate::mesh::{SurfacePoint, UniformSampler};
use crate::Vec3;

/// Proposals are drawn uniformly by area and accepted with probability
/// `|det J_f| / M`. The envelope `M` is re-tightened to 1.2× the largest
/// determinant seen after every draw, so early underestimates only make the
/// distribution conservative for one call, never wrong: acceptance
/// probabilities are clamped to 1.
pub(crate) struct WeightedSampler {
    envelope: f64,
}

/// Abort rejection sampling when fewer than this fraction of proposals are
/// accepted; the field has degenerated to (near) zero mapped area.
const MIN_ACCEPTANCE: f64 = 1e-3;

/// Proposals drawn before the acceptance rate is trusted enough to abort on.
const ABORT_HORIZON: usize = 10_000;

impl WeightedSampler {
    pub fn new() -> Self {
        WeightedSampler { envelope: 0.0 }
    }

    /// Draws `n` samples distributed proportionally to the mapped area
    /// density of `field`. Consumes exactly one uniform per acceptance test
    /// so results are reproducible for a given RNG state.
    pub fn draw(
        &mut self,
        field: &DisplacementField,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<SurfacePoint>, DispfieldError> {
        let uniform = UniformSampler::new(&field.base);
        let chunk = (2 * n).clamp(256, 4096);
        if self.envelope <= 0.0 {
            // Pilot pass: estimate the density ceiling before accepting.
            let pilot: Vec<SurfacePoint> = (0..256).map(|_| uniform.sample(rng)).collect();
            let dets = batch_dets(field, &pilot)?;
            let max = dets.iter().cloned().fold(0.0, f64::max);
            self.envelope = (1.2 * max).max(1e-12);
        }
        let mut accepted = Vec::with_capacity(n);
        let mut proposed = 0usize;
        let mut max_det: f64 = 0.0;
        while accepted.len() < n {
            let proposals: Vec<SurfacePoint> =
                (0..chunk).map(|_| uniform.sample(rng)).collect();
            let dets = batch_dets(field, &proposals)?;
            for (p, det) in proposals.into_iter().zip(dets) {
                proposed += 1;
                max_det = max_det.max(det);
                if rng.random::<f64>() < (det / self.envelope).min(1.0) {
                    accepted.push(p);
                    if accepted.len() == n {
                        break;
                    }
                }
            }
            if proposed >= ABORT_HORIZON
                && (accepted.len() as f64) < MIN_ACCEPTANCE * proposed as f64
            {
                return Err(DispfieldError::SamplingCollapse {
                    acceptance: accepted.len() as f64 / proposed as f64,
                });
            }
        }
        self.envelope = (1.2 * max_det).max(1e-12);
        Ok(accepted)
    }
}

/// Mapped area density |det J_f| = ‖b₁ × b₂‖ for each point, evaluated in
/// one batched forward/tangent pass.
fn batch_dets(
    field: &DisplacementField,
    points: &[SurfacePoint],
) -> Result<Vec<f64>, DispfieldError> {
    let batch = SampleBatch::new(&field.base, points.to_vec(), field.levels, true)?;
    let cache = field.net.forward_cache(batch.input(field));
    let pf = pushforward_batch(field, &batch, &cache);
    Ok((0..batch.len())
        .map(|i| col3(&pf.b[0], i).cross(&col3(&pf.b[1], i)).norm())
        .collect())
}

fn col3(a: &Array2<f64>, i: usize) -> Vec3 {
    Vec3::new(a[[0, i]], a[[1, i]], a[[2, i]])
}

/// Draws `n` base-surface samples whose density is proportional to the
/// mapped area density |det J_f|, deterministically for a given seed.
pub fn sample_weighted(
    field: &DisplacementField,
    n: usize,
    seed: u64,
) -> Result<Vec<SurfacePoint>, DispfieldError> {
    if n == 0 {
        return Err(DispfieldError::InvalidConfig {
            reason: "cannot draw zero samples".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightedSampler::new().draw(field, n, &mut rng)
}
