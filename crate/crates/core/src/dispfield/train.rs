//! Two-phase displacement-field training: both networks are first fit to the
//! identity map on fresh volume samples, then full-batch Adam descends the
//! weighted surface-fitting objective on density-resampled batches.

use std::f64::consts::PI;
use std::io;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batch::SampleBatch;
use super::loss::{objective_with_grads, Weights};
use super::sample::WeightedSampler;
use super::{DispfieldError, DisplacementField, InverseField, TrainingConfig};
use crate::mesh::HalfedgeMesh;
use crate::neural::{encoding_dim, write_encoding, AdamBuffer, AdamState, Mlp};
use crate::surface::Surface;
use crate::Vec3;

/// Per-epoch record of the main phase. Optional terms are present exactly
/// when their weight in the configuration was positive.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss_projection: f64,
    pub loss_cycle: f64,
    pub loss_anchor: Option<f64>,
    pub loss_normal: Option<f64>,
    pub loss_conformal: Option<f64>,
}

/// A trained forward/inverse field pair plus the loss history of the main
/// phase.
pub struct TrainingRun {
    pub field: DisplacementField,
    pub inverse: InverseField,
    pub history: Vec<HistoryRow>,
}

/// Writes the loss history as CSV. Optional columns appear when the run
/// recorded them (their weight was positive).
pub fn write_history_csv(rows: &[HistoryRow], out: &mut impl io::Write) -> io::Result<()> {
    let (anchor, normal, conformal) = rows.first().map_or((false, false, false), |r| {
        (
            r.loss_anchor.is_some(),
            r.loss_normal.is_some(),
            r.loss_conformal.is_some(),
        )
    });
    let mut header = String::from("epoch,loss_projection,loss_cycle");
    for (on, name) in [
        (anchor, "loss_anchor"),
        (normal, "loss_normal"),
        (conformal, "loss_conformal"),
    ] {
        if on {
            header.push(',');
            header.push_str(name);
        }
    }
    writeln!(out, "{header}")?;
    for r in rows {
        write!(out, "{},{},{}", r.epoch, r.loss_projection, r.loss_cycle)?;
        for (on, v) in [
            (anchor, r.loss_anchor),
            (normal, r.loss_normal),
            (conformal, r.loss_conformal),
        ] {
            if on {
                write!(out, ",{}", v.unwrap_or(f64::NAN))?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One minibatch Adam step toward zero output.
fn identity_step(
    net: &mut Mlp,
    adam: &mut AdamState,
    input: Array2<f64>,
    phase: &'static str,
    epoch: usize,
) -> Result<(), DispfieldError> {
    let n = input.ncols() as f64;
    let cache = net.forward_cache(input);
    let out = cache.output();
    let loss = out.mapv(|v| v * v).sum() / n;
    if !loss.is_finite() {
        return Err(DispfieldError::NonFiniteLoss { phase, epoch });
    }
    let upstream = out.mapv(|v| v * (2.0 / n));
    let grads = net.backward_params(&cache, &upstream);
    adam.step(net, &grads)?;
    Ok(())
}

/// Fits both networks to the zero-displacement map. Every epoch draws fresh
/// points uniformly from the base's bounding box expanded 1.5x about its
/// center, so the fit has to hold everywhere the fields will later be
/// evaluated instead of memorizing a fixed pool; the learning rate follows a
/// cosine decay to the final epoch. Feature channels are zero and frozen
/// here, so the forward input is the positional encoding padded with zeros.
fn fit_identity_pair(
    theta: &mut Mlp,
    phi: &mut Mlp,
    base: &HalfedgeMesh,
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), DispfieldError> {
    let enc = encoding_dim(config.encoding_levels);
    let d = config.feature_dim;
    let (lo, hi) = base.bbox();
    let center = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.75;
    let q = config.init_samples;
    let mb = q.min(1024);
    let mut adam_theta = AdamState::new(theta, config.learning_rate);
    let mut adam_phi = AdamState::new(phi, config.learning_rate);
    let mut buf = vec![0.0; enc];
    for epoch in 0..config.init_epochs {
        let lr = config.learning_rate * 0.5 * (1.0 + (PI * epoch as f64 / config.init_epochs as f64).cos());
        adam_theta.set_lr(lr);
        adam_phi.set_lr(lr);
        let mut done = 0;
        while done < q {
            let n = mb.min(q - done);
            // Rows are contiguous per point; transposing afterwards hands the
            // nets a column-major batch without copying.
            let mut rows = Array2::zeros((n, enc + d));
            for i in 0..n {
                let p = center
                    + Vec3::new(
                        half.x * (2.0 * rng.random::<f64>() - 1.0),
                        half.y * (2.0 * rng.random::<f64>() - 1.0),
                        half.z * (2.0 * rng.random::<f64>() - 1.0),
                    );
                write_encoding(p, config.encoding_levels, &mut buf);
                rows.row_mut(i).as_slice_mut().unwrap()[..enc].copy_from_slice(&buf);
            }
            let phi_in = rows.slice(s![.., 0..enc]).to_owned().reversed_axes();
            let theta_in = rows.reversed_axes();
            identity_step(theta, &mut adam_theta, theta_in, "identity (forward)", epoch)?;
            identity_step(phi, &mut adam_phi, phi_in, "identity (inverse)", epoch)?;
            done += n;
        }
    }
    Ok(())
}

/// Trains a displacement field mapping `base` onto `surface`.
///
/// Phase 1 initializes both networks to the identity on fresh volume samples
/// around the base; phase 2 runs one full-batch Adam step per epoch on the
/// weighted objective, redrawing the batch from the mapped-area density
/// every `resample_every` epochs. Identical configurations reproduce
/// bit-identical results: parameters are kept on the f32 grid and all
/// randomness flows from the configured seed.
pub fn train(
    surface: &Surface,
    base: &HalfedgeMesh,
    config: &TrainingConfig,
) -> Result<TrainingRun, DispfieldError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let enc = encoding_dim(config.encoding_levels);
    let d = config.feature_dim;
    let mut widths_theta = Vec::with_capacity(config.hidden_widths.len() + 2);
    widths_theta.push(enc + d);
    widths_theta.extend_from_slice(&config.hidden_widths);
    widths_theta.push(3);
    let mut widths_phi = widths_theta.clone();
    widths_phi[0] = enc;

    let seed_theta = rng.random::<u64>();
    let seed_phi = rng.random::<u64>();
    let mut field = DisplacementField::new(
        base.clone(),
        Mlp::kaiming(&widths_theta, seed_theta),
        Array2::zeros((base.n_vertices(), d)),
        config.encoding_levels,
    )?;
    let mut inverse = InverseField::new(Mlp::kaiming(&widths_phi, seed_phi), config.encoding_levels)?;

    // Phase 1: identity fit over the volume around the base.
    if config.init_epochs > 0 {
        fit_identity_pair(&mut field.net, &mut inverse.net, base, config, &mut rng)?;
    }

    // Phase 2: full-batch descent on the weighted objective.
    let w = Weights::from_config(config);
    let with_tangents = !surface.is_implicit() || w.normal > 0.0 || w.conformal > 0.0;
    let mut adam_theta = AdamState::new(&field.net, config.learning_rate);
    let mut adam_phi = AdamState::new(&inverse.net, config.learning_rate);
    let mut adam_features = AdamBuffer::new(field.features.dim(), config.learning_rate);
    let mut sampler = WeightedSampler::new();
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch: Option<SampleBatch> = None;
    for epoch in 0..config.epochs {
        if batch.is_none() || epoch % config.resample_every == 0 {
            let points = sampler.draw(&field, config.samples_per_batch, &mut rng)?;
            batch = Some(SampleBatch::new(
                base,
                points,
                config.encoding_levels,
                with_tangents,
            )?);
        }
        let b = batch.as_ref().unwrap();
        let (obj, grads) = objective_with_grads(&field, &inverse, surface, b, &config.anchors, &w)?;
        let failed = obj.total - obj.converged;
        if 2 * failed > obj.total {
            return Err(DispfieldError::ProjectionFailures {
                failed,
                total: obj.total,
            });
        }
        if !obj.weighted_total(&w).is_finite() {
            return Err(DispfieldError::NonFiniteLoss {
                phase: "main",
                epoch,
            });
        }
        history.push(HistoryRow {
            epoch,
            loss_projection: obj.projection,
            loss_cycle: obj.cycle,
            loss_anchor: obj.anchor,
            loss_normal: obj.normal,
            loss_conformal: obj.conformal,
        });
        adam_theta.step(&mut field.net, &grads.theta)?;
        if d > 0 {
            adam_features.step(&mut field.features, &grads.features)?;
        }
        adam_phi.step(&mut inverse.net, &grads.phi)?;
    }

    Ok(TrainingRun {
        field,
        inverse,
        history,
    })
}
