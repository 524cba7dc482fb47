//! Training losses for displacement fields, and the fused objective that
//! evaluates every enabled term together with its analytic gradients.
//!
//! The public functions score a field on a fixed set of base-surface samples;
//! each returns the plain (unweighted) mean so callers can weight and combine
//! terms themselves. `objective_with_grads` is the training workhorse: one
//! forward pass shared across all terms, one backward pass per adjoint stream.

use ndarray::{s, Array2};

use super::batch::SampleBatch;
use super::{
    softplus_tenth, softplus_tenth_slope, Anchor, DispfieldError, DisplacementField, InverseField,
    TrainingConfig,
};
use crate::mesh::SurfacePoint;
use crate::neural::{encode_batch, encoding_backward, Activations, MlpGrads, TangentCache};
use crate::surface::Surface;
use crate::Vec3;

fn col3(a: &Array2<f64>, i: usize) -> Vec3 {
    Vec3::new(a[[0, i]], a[[1, i]], a[[2, i]])
}

fn add_col3(a: &mut Array2<f64>, i: usize, v: Vec3) {
    a[[0, i]] += v.x;
    a[[1, i]] += v.y;
    a[[2, i]] += v.z;
}

/// Pushforwards of both frame tangents for every sample in a batch: the
/// tangent caches (kept for the reverse sweep) and the pushed vectors
/// `b_j = t_j + J·(d input/d t_j)` as 3×s columns.
pub(crate) struct PushforwardBatch {
    pub tc: [TangentCache; 2],
    pub b: [Array2<f64>; 2],
}

pub(crate) fn pushforward_batch(
    field: &DisplacementField,
    batch: &SampleBatch,
    cache: &Activations,
) -> PushforwardBatch {
    let tangents = batch
        .tangents
        .as_ref()
        .expect("batch must be built with tangent data");
    let push = |which: usize| -> (TangentCache, Array2<f64>) {
        let tin = batch.tangent_input(field, which);
        let tc = field.net.forward_tangent(cache, &tin);
        let mut b = tc.output().to_owned();
        for (i, t) in tangents.t[which].iter().enumerate() {
            add_col3(&mut b, i, *t);
        }
        (tc, b)
    };
    let (tc0, b0) = push(0);
    let (tc1, b1) = push(1);
    PushforwardBatch {
        tc: [tc0, tc1],
        b: [b0, b1],
    }
}

/// Mapped unit normal for sample `i`, or `None` when the pushed tangents are
/// numerically parallel (cross-product norm below 1e-10).
fn mapped_normal_col(pf: &PushforwardBatch, i: usize) -> Option<Vec3> {
    let c = col3(&pf.b[0], i).cross(&col3(&pf.b[1], i));
    let n = c.norm();
    (n >= 1e-10).then(|| c / n)
}

struct ProjectionBatch {
    /// Closest surface point per sample; `None` where projection failed.
    projected: Vec<Option<Vec3>>,
    converged: usize,
}

/// Projects every mapped point onto the surface. Point clouds need an
/// orientation hint (the mapped normal); implicit surfaces ignore it.
fn project_batch(
    surface: &Surface,
    y: &Array2<f64>,
    pf: Option<&PushforwardBatch>,
) -> ProjectionBatch {
    let n = y.ncols();
    let mut projected = Vec::with_capacity(n);
    let mut converged = 0;
    for i in 0..n {
        let hint = match pf {
            Some(pf) => mapped_normal_col(pf, i).unwrap_or_else(Vec3::zeros),
            None => Vec3::zeros(),
        };
        let r = surface.project(col3(y, i), hint);
        if r.converged {
            converged += 1;
            projected.push(Some(r.point));
        } else {
            projected.push(None);
        }
    }
    ProjectionBatch {
        projected,
        converged,
    }
}

/// Mean squared distance from the mapped samples to their closest surface
/// points, averaged over the samples whose projection converged. Errors with
/// [`DispfieldError::ProjectionFailures`] when no sample projects.
pub fn loss_projection(
    field: &DisplacementField,
    surface: &Surface,
    samples: &[SurfacePoint],
) -> Result<f64, DispfieldError> {
    let with_tangents = !surface.is_implicit();
    let batch = SampleBatch::new(&field.base, samples.to_vec(), field.levels, with_tangents)?;
    let cache = field.net.forward_cache(batch.input(field));
    let y = &batch.x + cache.output();
    let pf = with_tangents.then(|| pushforward_batch(field, &batch, &cache));
    let proj = project_batch(surface, &y, pf.as_ref());
    if proj.converged == 0 {
        return Err(DispfieldError::ProjectionFailures {
            failed: batch.len(),
            total: batch.len(),
        });
    }
    let mut acc = 0.0;
    for (i, q) in proj.projected.iter().enumerate() {
        if let Some(q) = q {
            acc += (col3(&y, i) - q).norm_squared();
        }
    }
    Ok(acc / proj.converged as f64)
}

/// Mean squared round-trip error `‖g_φ(g_θ(x)) − x‖²` over the samples.
pub fn loss_cycle(
    field: &DisplacementField,
    inverse: &InverseField,
    samples: &[SurfacePoint],
) -> Result<f64, DispfieldError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let batch = SampleBatch::new(&field.base, samples.to_vec(), field.levels, false)?;
    let cache = field.net.forward_cache(batch.input(field));
    let y = &batch.x + cache.output();
    let z = &y + &inverse.net.forward_batch(&encode_batch(&y, inverse.levels));
    let r = &z - &batch.x;
    Ok(r.mapv(|v| v * v).sum() / batch.len() as f64)
}

/// Mean squared residual `‖g_θ(p_i) − q_i‖²` over the anchor constraints.
pub fn loss_anchor(field: &DisplacementField, anchors: &[Anchor]) -> Result<f64, DispfieldError> {
    if anchors.is_empty() {
        return Err(DispfieldError::NoAnchors);
    }
    let mut acc = 0.0;
    for a in anchors {
        let y = field.eval(&a.surface_point()?)?;
        acc += (y - a.target_point()).norm_squared();
    }
    Ok(acc / anchors.len() as f64)
}

/// Mean squared deviation between the mapped unit normal and the surface
/// normal at the closest surface point. Samples whose projection fails or
/// whose pushed tangents are degenerate are skipped; if every sample is
/// skipped the loss is undefined and an error is returned.
pub fn loss_normal(
    field: &DisplacementField,
    surface: &Surface,
    samples: &[SurfacePoint],
) -> Result<f64, DispfieldError> {
    let batch = SampleBatch::new(&field.base, samples.to_vec(), field.levels, true)?;
    let cache = field.net.forward_cache(batch.input(field));
    let y = &batch.x + cache.output();
    let pf = pushforward_batch(field, &batch, &cache);
    let proj = project_batch(surface, &y, Some(&pf));
    let mut acc = 0.0;
    let mut count = 0usize;
    for (i, q) in proj.projected.iter().enumerate() {
        let (Some(q), Some(n)) = (q, mapped_normal_col(&pf, i)) else {
            continue;
        };
        let target = surface.normal_at(*q, n);
        acc += (n - target).norm_squared();
        count += 1;
    }
    if count == 0 {
        return Err(DispfieldError::NoUsableSamples {
            what: "normal alignment",
        });
    }
    Ok(acc / count as f64)
}

/// Mean conformality penalty `χ(−det J_f / tr(J_fᵀ J_f))` over the samples,
/// computed from the pushed tangents (`det = ‖b₁×b₂‖`, `tr = ‖b₁‖²+‖b₂‖²`).
/// Samples where both pushed tangents vanish are skipped.
pub fn loss_conformal(
    field: &DisplacementField,
    samples: &[SurfacePoint],
) -> Result<f64, DispfieldError> {
    let batch = SampleBatch::new(&field.base, samples.to_vec(), field.levels, true)?;
    let cache = field.net.forward_cache(batch.input(field));
    let pf = pushforward_batch(field, &batch, &cache);
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..batch.len() {
        let (b1, b2) = (col3(&pf.b[0], i), col3(&pf.b[1], i));
        let trace = b1.norm_squared() + b2.norm_squared();
        if trace <= 0.0 {
            continue;
        }
        acc += softplus_tenth(-b1.cross(&b2).norm() / trace);
        count += 1;
    }
    if count == 0 {
        return Err(DispfieldError::NoUsableSamples {
            what: "conformal energy",
        });
    }
    Ok(acc / count as f64)
}

/// Loss weights pulled out of a training configuration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weights {
    pub projection: f64,
    pub cycle: f64,
    pub anchor: f64,
    pub normal: f64,
    pub conformal: f64,
}

impl Weights {
    pub fn from_config(c: &TrainingConfig) -> Self {
        Weights {
            projection: c.lambda_projection,
            cycle: c.lambda_cycle,
            anchor: c.lambda_anchor,
            normal: c.lambda_normal,
            conformal: c.lambda_conformal,
        }
    }

    fn needs_tangents(&self) -> bool {
        self.normal > 0.0 || self.conformal > 0.0
    }
}

/// Unweighted per-term means from one objective evaluation. Optional terms
/// are `None` when their weight is zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Objective {
    pub projection: f64,
    pub converged: usize,
    pub total: usize,
    pub cycle: f64,
    pub anchor: Option<f64>,
    pub normal: Option<f64>,
    pub conformal: Option<f64>,
}

impl Objective {
    pub fn weighted_total(&self, w: &Weights) -> f64 {
        w.projection * self.projection
            + w.cycle * self.cycle
            + self.anchor.map_or(0.0, |v| w.anchor * v)
            + self.normal.map_or(0.0, |v| w.normal * v)
            + self.conformal.map_or(0.0, |v| w.conformal * v)
    }
}

/// Gradients of the weighted total with respect to every trainable tensor.
pub(crate) struct Gradients {
    pub theta: MlpGrads,
    pub features: Array2<f64>,
    pub phi: MlpGrads,
}

/// Evaluates the weighted training objective on a prepared batch and returns
/// each term's unweighted mean together with the gradients of the weighted
/// sum. The projection and cycle terms are always evaluated (they are the
/// progress signals recorded per epoch) even when their weight is zero;
/// gradients flow only through terms with positive weight.
pub(crate) fn objective_with_grads(
    field: &DisplacementField,
    inverse: &InverseField,
    surface: &Surface,
    batch: &SampleBatch,
    anchors: &[Anchor],
    w: &Weights,
) -> Result<(Objective, Gradients), DispfieldError> {
    let n = batch.len();
    if n == 0 {
        return Err(DispfieldError::NoUsableSamples {
            what: "objective batch",
        });
    }
    let enc = crate::neural::encoding_dim(field.levels);
    let d = field.feature_dim();

    let cache = field.net.forward_cache(batch.input(field));
    let y = &batch.x + cache.output();
    let need_pf = w.needs_tangents() || !surface.is_implicit();
    let pf = need_pf.then(|| pushforward_batch(field, batch, &cache));

    // Projection term: value over converged samples, plus its upstream.
    let proj = project_batch(surface, &y, pf.as_ref());
    if proj.converged == 0 {
        return Err(DispfieldError::ProjectionFailures {
            failed: n,
            total: n,
        });
    }
    let mut dy = Array2::<f64>::zeros((3, n));
    let mut proj_acc = 0.0;
    for (i, q) in proj.projected.iter().enumerate() {
        if let Some(q) = q {
            let r = col3(&y, i) - q;
            proj_acc += r.norm_squared();
            if w.projection > 0.0 {
                // Detached closest point: moving y moves q only tangentially,
                // so the residual direction carries the full derivative.
                add_col3(&mut dy, i, r * (2.0 * w.projection / proj.converged as f64));
            }
        }
    }
    let proj_mean = proj_acc / proj.converged as f64;

    // Cycle term: value always; gradients reach both nets when enabled.
    let pe_y = encode_batch(&y, inverse.levels);
    let cache_phi = inverse.net.forward_cache(pe_y);
    let z = &y + cache_phi.output();
    let r_c = &z - &batch.x;
    let cycle_mean = r_c.mapv(|v| v * v).sum() / n as f64;
    let mut grads_phi = MlpGrads::zeros_like(&inverse.net);
    if w.cycle > 0.0 {
        let upstream_phi = r_c.mapv(|v| v * (2.0 * w.cycle / n as f64));
        let (g_phi, d_pe) = inverse.net.backward(&cache_phi, &upstream_phi);
        grads_phi.add_scaled(&g_phi, 1.0);
        // dz/dy = I + J_φ·J_PE, so the cycle upstream on y is the residual
        // plus the encoding pullback of the inverse net's input gradient.
        dy += &upstream_phi;
        dy += &encoding_backward(cache_phi.input(), inverse.levels, &d_pe);
    }

    let mut grads_theta = MlpGrads::zeros_like(&field.net);
    let mut d_features = Array2::<f64>::zeros(field.features.dim());

    // Anchor term: its own small batch, sharing the accumulators.
    let anchor_mean = if w.anchor > 0.0 {
        if anchors.is_empty() {
            return Err(DispfieldError::NoAnchors);
        }
        let pts = anchors
            .iter()
            .map(|a| a.surface_point())
            .collect::<Result<Vec<_>, _>>()?;
        let abatch = SampleBatch::new(&field.base, pts, field.levels, false)?;
        let acache = field.net.forward_cache(abatch.input(field));
        let ya = &abatch.x + acache.output();
        let m = anchors.len();
        let mut up = Array2::<f64>::zeros((3, m));
        let mut acc = 0.0;
        for (i, a) in anchors.iter().enumerate() {
            let r = col3(&ya, i) - a.target_point();
            acc += r.norm_squared();
            add_col3(&mut up, i, r * (2.0 * w.anchor / m as f64));
        }
        let (g, din) = field.net.backward(&acache, &up);
        grads_theta.add_scaled(&g, 1.0);
        if d > 0 {
            abatch.scatter_feature_grads(din.slice(s![enc.., ..]), &mut d_features);
        }
        Some(acc / m as f64)
    } else {
        None
    };

    // Normal and conformal terms share the pushforward adjoints db₁, db₂.
    let mut db = [Array2::<f64>::zeros((3, n)), Array2::<f64>::zeros((3, n))];
    let mut normal_mean = None;
    if w.normal > 0.0 {
        let pf = pf.as_ref().unwrap();
        // First pass: count usable samples so the mean's scale is known.
        let mut used = Vec::with_capacity(n);
        let mut acc = 0.0;
        for (i, q) in proj.projected.iter().enumerate() {
            let (Some(q), Some(nrm)) = (q, mapped_normal_col(pf, i)) else {
                continue;
            };
            let target = surface.normal_at(*q, nrm);
            acc += (nrm - target).norm_squared();
            used.push((i, nrm, target));
        }
        if used.is_empty() {
            return Err(DispfieldError::NoUsableSamples {
                what: "normal alignment",
            });
        }
        let scale = w.normal / used.len() as f64;
        for (i, nrm, target) in used.iter() {
            let (b1, b2) = (col3(&pf.b[0], *i), col3(&pf.b[1], *i));
            let cn = b1.cross(&b2).norm();
            // d‖n − t‖²/dc through n = c/‖c‖: project out the radial part.
            let dn = (nrm - target) * 2.0 * scale;
            let dc = (dn - nrm * nrm.dot(&dn)) / cn;
            add_col3(&mut db[0], *i, b2.cross(&dc));
            add_col3(&mut db[1], *i, dc.cross(&b1));
        }
        normal_mean = Some(acc / used.len() as f64);
    }
    let mut conformal_mean = None;
    if w.conformal > 0.0 {
        let pf = pf.as_ref().unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            let (b1, b2) = (col3(&pf.b[0], i), col3(&pf.b[1], i));
            let trace = b1.norm_squared() + b2.norm_squared();
            if trace <= 0.0 {
                continue;
            }
            acc += softplus_tenth(-b1.cross(&b2).norm() / trace);
            count += 1;
        }
        if count == 0 {
            return Err(DispfieldError::NoUsableSamples {
                what: "conformal energy",
            });
        }
        let scale = w.conformal / count as f64;
        for i in 0..n {
            let (b1, b2) = (col3(&pf.b[0], i), col3(&pf.b[1], i));
            let trace = b1.norm_squared() + b2.norm_squared();
            if trace <= 0.0 {
                continue;
            }
            let c = b1.cross(&b2);
            let cn = c.norm();
            // χ(−‖c‖/T) differentiates to σ(10t)·(−d‖c‖/T + ‖c‖ dT/T²);
            // the ‖c‖ direction is undefined below the degeneracy cutoff,
            // where only the trace part survives.
            let sigma = softplus_tenth_slope(-cn / trace) * scale;
            let radial = sigma * cn / (trace * trace);
            let mut db1 = b1 * (2.0 * radial);
            let mut db2 = b2 * (2.0 * radial);
            if cn >= 1e-10 {
                let dc = c * (-sigma / (trace * cn));
                db1 += b2.cross(&dc);
                db2 += dc.cross(&b1);
            }
            add_col3(&mut db[0], i, db1);
            add_col3(&mut db[1], i, db2);
        }
        conformal_mean = Some(acc / count as f64);
    }
    if w.needs_tangents() {
        for (which, dbw) in db.iter().enumerate() {
            let pf = pf.as_ref().unwrap();
            let (g, dxdot) = field.net.backward_tangent(&cache, &pf.tc[which], dbw);
            grads_theta.add_scaled(&g, 1.0);
            if d > 0 {
                batch.scatter_feature_tangent_grads(
                    which,
                    dxdot.slice(s![enc.., ..]),
                    &mut d_features,
                );
            }
        }
    }

    // Main backward: projection + cycle upstreams on y share one sweep.
    if w.projection > 0.0 || w.cycle > 0.0 {
        let (g, din) = field.net.backward(&cache, &dy);
        grads_theta.add_scaled(&g, 1.0);
        if d > 0 {
            batch.scatter_feature_grads(din.slice(s![enc.., ..]), &mut d_features);
        }
    }

    Ok((
        Objective {
            projection: proj_mean,
            converged: proj.converged,
            total: n,
            cycle: cycle_mean,
            anchor: anchor_mean,
            normal: normal_mean,
            conformal: conformal_mean,
        },
        Gradients {
            theta: grads_theta,
            features: d_features,
            phi: grads_phi,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{
        identity_field, identity_inverse, linear_field, octahedron, tetra_with_flat_face,
    };
    use super::super::{DisplacementField, InverseField};
    use super::*;
    use crate::mesh::{sample_uniform, HalfedgeMesh};
    use crate::neural::Mlp;
    use crate::surface::AnalyticSdf;
    use crate::testutil::{assert_near, icosphere};
    use nalgebra::Matrix3;

    fn corner_samples(mesh: &HalfedgeMesh) -> Vec<SurfacePoint> {
        mesh.live_faces()
            .flat_map(|f| (0..3).map(move |c| SurfacePoint::at_corner(f, c)))
            .collect()
    }

    #[test]
    fn projection_loss_vanishes_on_the_surface() {
        let base = octahedron();
        let field = identity_field(base.clone());
        let surface = Surface::unit_sphere();
        // Octahedron corners already lie on the unit sphere.
        let l = loss_projection(&field, &surface, &corner_samples(&base)).unwrap();
        assert!(l <= 1e-12, "corner samples should project to themselves: {l}");
    }

    #[test]
    fn projection_loss_is_squared_distance_off_the_surface() {
        let base = octahedron();
        // g(x) = 1.1·x pushes the corner (1,0,0) radially 0.1 off the sphere.
        let field = linear_field(base.clone(), Matrix3::from_diagonal_element(0.1));
        let surface = Surface::unit_sphere();
        let l = loss_projection(&field, &surface, &[SurfacePoint::at_corner(0, 0)]).unwrap();
        assert_near(l, 0.01, 1e-8, "single radial offset");
    }

    #[test]
    fn projection_loss_errors_when_nothing_converges() {
        use crate::surface::GridSdf;
        let base = octahedron();
        let field = identity_field(base.clone());
        // Grid domain far away from the octahedron: every query falls outside
        // and projection cannot converge.
        let lo = Vec3::new(50.0, 50.0, 50.0);
        let hi = Vec3::new(51.0, 51.0, 51.0);
        let grid =
            GridSdf::from_fn([9, 9, 9], lo, hi, |p| (p - Vec3::new(50.5, 50.5, 50.5)).norm() - 0.2)
                .unwrap();
        let err = loss_projection(&field, &Surface::Grid(grid), &corner_samples(&base))
            .unwrap_err();
        assert!(matches!(
            err,
            DispfieldError::ProjectionFailures { failed: 24, total: 24 }
        ));
    }

    #[test]
    fn projection_gradient_is_a_descent_direction() {
        // Moving the parameters a small step along the negative gradient must
        // reduce the weighted objective, and the first-order decrease must
        // match the gradient norm.
        let base = octahedron();
        let mut field = DisplacementField::new(
            base.clone(),
            Mlp::kaiming(&[51 + 4, 16, 3], 11),
            Array2::from_shape_fn((base.n_vertices(), 4), |(i, j)| {
                0.03 * ((i * 7 + j * 3) as f64).sin()
            }),
            8,
        )
        .unwrap();
        let inverse = identity_inverse(8);
        let surface = Surface::unit_sphere();
        let samples = sample_uniform(&base, 64, 5);
        let batch = SampleBatch::new(&base, samples, field.levels, false).unwrap();
        let w = Weights {
            projection: 1.0,
            cycle: 0.0,
            anchor: 0.0,
            normal: 0.0,
            conformal: 0.0,
        };
        let (obj, grads) =
            objective_with_grads(&field, &inverse, &surface, &batch, &[], &w).unwrap();
        let total0 = obj.weighted_total(&w);
        let mut gnorm2 = 0.0;
        for idx in 0..field.net.param_count() {
            gnorm2 += grads.theta.get(idx).powi(2);
        }
        let gnorm = gnorm2.sqrt();
        assert!(gnorm > 1e-8, "gradient should not vanish at a random net");
        let mut prev = total0;
        for &eps in &[1e-4, 2e-4, 3e-4] {
            let mut stepped = field.net.clone();
            for idx in 0..stepped.param_count() {
                let p = stepped.get_param(idx);
                stepped.set_param(idx, p - eps * grads.theta.get(idx) / gnorm);
            }
            std::mem::swap(&mut field.net, &mut stepped);
            let l = loss_projection(&field, &surface, batch.points.as_slice()).unwrap();
            std::mem::swap(&mut field.net, &mut stepped);
            assert!(
                l < prev,
                "objective should keep decreasing along -grad: {l} !< {prev}"
            );
            prev = l;
        }
    }

    #[test]
    fn cycle_loss_is_zero_for_an_identity_pair() {
        let base = octahedron();
        let field = identity_field(base.clone());
        let inverse = identity_inverse(8);
        let l = loss_cycle(&field, &inverse, &corner_samples(&base)).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn cycle_loss_measures_round_trip_displacement() {
        let base = octahedron();
        let field = identity_field(base.clone());
        // Inverse that shifts every point by +0.1 in x: round-trip error 0.01.
        let mut net = Mlp::zeros(&[51, 1, 3]);
        // Output-layer x bias lives right after W0 (55 = 51·1), b0 (1), W1 (3).
        let b_x = 51 + 1 + 3;
        net.set_param(b_x, 0.1);
        let inverse = InverseField::new(net, 8).unwrap();
        let l = loss_cycle(&field, &inverse, &corner_samples(&base)).unwrap();
        assert_near(l, 0.01, 1e-12, "uniform 0.1 shift");
    }

    #[test]
    fn anchor_loss_counts_squared_residuals() {
        let base = octahedron();
        let field = identity_field(base.clone());
        let p = base.embed(SurfacePoint::centroid(0));
        let satisfied = Anchor {
            face: 0,
            bary: [1.0 / 3.0; 3],
            target: [p.x, p.y, p.z],
        };
        assert_eq!(loss_anchor(&field, &[satisfied.clone()]).unwrap(), 0.0);
        let off = Anchor {
            face: 0,
            bary: [1.0 / 3.0; 3],
            target: [p.x + 0.2, p.y, p.z],
        };
        assert_near(
            loss_anchor(&field, &[satisfied, off]).unwrap(),
            0.02,
            1e-14,
            "mean of 0 and 0.04",
        );
        assert!(matches!(
            loss_anchor(&field, &[]),
            Err(DispfieldError::NoAnchors)
        ));
    }

    #[test]
    fn normal_loss_is_small_for_a_fine_sphere_approximation() {
        // A subdivided icosahedron (1280 faces) mapped by the identity: face
        // normals differ from the sphere normals only by discretization.
        let base = icosphere(3);
        assert_eq!(base.n_faces(), 1280);
        let field = identity_field(base.clone());
        let surface = Surface::unit_sphere();
        let samples: Vec<_> = base.live_faces().map(SurfacePoint::centroid).collect();
        let l = loss_normal(&field, &surface, &samples).unwrap();
        assert!(l <= 1e-2, "fine mesh normals should nearly match: {l}");
        assert!(l > 0.0, "discretization error should not vanish exactly");
    }

    #[test]
    fn normal_loss_detects_an_inverted_orientation() {
        // Flat face in z=0 oriented downward, surface normal pointing up:
        // ‖n − t‖² = 4 per sample.
        let base = tetra_with_flat_face(true);
        let field = identity_field(base.clone());
        let surface = Surface::Analytic(AnalyticSdf::Sphere {
            center: Vec3::new(0.0, 0.0, -1000.0),
            radius: 1000.0,
        });
        let samples = vec![
            SurfacePoint::centroid(0),
            SurfacePoint::new(0, [0.5, 0.25, 0.25]).unwrap(),
            SurfacePoint::new(0, [0.2, 0.3, 0.5]).unwrap(),
        ];
        let l = loss_normal(&field, &surface, &samples).unwrap();
        assert_near(l, 4.0, 1e-3, "anti-parallel normals");
    }

    #[test]
    fn normal_loss_is_invariant_under_sample_reordering() {
        let base = icosphere(1);
        let field = identity_field(base.clone());
        let surface = Surface::unit_sphere();
        let samples: Vec<_> = base.live_faces().map(SurfacePoint::centroid).collect();
        let mut shuffled = samples.clone();
        shuffled.reverse();
        shuffled.rotate_left(13);
        let a = loss_normal(&field, &surface, &samples).unwrap();
        let b = loss_normal(&field, &surface, &shuffled).unwrap();
        assert_near(a, b, 1e-12, "order invariance");
    }

    #[test]
    fn conformal_loss_of_an_isometry_hits_the_energy_floor() {
        // The identity maps every face isometrically: det 1, trace 2, so each
        // sample contributes exactly χ(−1/2).
        let base = octahedron();
        let field = identity_field(base.clone());
        let samples: Vec<_> = base.live_faces().map(SurfacePoint::centroid).collect();
        let l = loss_conformal(&field, &samples).unwrap();
        let floor = softplus_tenth(-0.5);
        assert_near(l, floor, 1e-12, "isometric field");
        assert_near(floor, 6.71e-4, 1e-5, "χ(−1/2)");
    }

    /// Central-difference check of a scalar function of one parameter.
    fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    struct FdSetup {
        field: DisplacementField,
        inverse: InverseField,
        surface: Surface,
        batch: SampleBatch,
        anchors: Vec<Anchor>,
        w: Weights,
    }

    impl FdSetup {
        fn total(&self) -> f64 {
            let (obj, _) = objective_with_grads(
                &self.field,
                &self.inverse,
                &self.surface,
                &self.batch,
                &self.anchors,
                &self.w,
            )
            .unwrap();
            obj.weighted_total(&self.w)
        }

        fn check_all_params(&mut self, stride: usize, tol: f64) {
            let (_, grads) = objective_with_grads(
                &self.field,
                &self.inverse,
                &self.surface,
                &self.batch,
                &self.anchors,
                &self.w,
            )
            .unwrap();
            let h = 1e-6;
            let mut checked = 0usize;
            for idx in (0..self.field.net.param_count()).step_by(stride) {
                let p0 = self.field.net.get_param(idx);
                let fd = central_diff(
                    |v| {
                        self.field.net.set_param(idx, v);
                        let t = self.total();
                        self.field.net.set_param(idx, p0);
                        t
                    },
                    p0,
                    h,
                );
                let an = grads.theta.get(idx);
                let denom = fd.abs().max(an.abs()).max(1e-4);
                assert!(
                    ((fd - an) / denom).abs() <= tol,
                    "θ[{idx}]: fd {fd} vs analytic {an}"
                );
                checked += 1;
            }
            for idx in (0..self.inverse.net.param_count()).step_by(stride) {
                let p0 = self.inverse.net.get_param(idx);
                let fd = central_diff(
                    |v| {
                        self.inverse.net.set_param(idx, v);
                        let t = self.total();
                        self.inverse.net.set_param(idx, p0);
                        t
                    },
                    p0,
                    h,
                );
                let an = grads.phi.get(idx);
                let denom = fd.abs().max(an.abs()).max(1e-4);
                assert!(
                    ((fd - an) / denom).abs() <= tol,
                    "φ[{idx}]: fd {fd} vs analytic {an}"
                );
                checked += 1;
            }
            let (rows, cols) = self.field.features.dim();
            for flat in (0..rows * cols).step_by(stride.max(1)) {
                let (i, j) = (flat / cols, flat % cols);
                let p0 = self.field.features[[i, j]];
                let fd = central_diff(
                    |v| {
                        self.field.features[[i, j]] = v;
                        let t = self.total();
                        self.field.features[[i, j]] = p0;
                        t
                    },
                    p0,
                    h,
                );
                let an = grads.features[[i, j]];
                let denom = fd.abs().max(an.abs()).max(1e-4);
                assert!(
                    ((fd - an) / denom).abs() <= tol,
                    "feature[{i},{j}]: fd {fd} vs analytic {an}"
                );
                checked += 1;
            }
            assert!(checked > 40, "stride too coarse: only {checked} params");
        }
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        // Tiny configuration: no positional encoding, no features, 3→8→8→3
        // nets, 16 samples on a sphere. Projection and cycle terms enabled.
        let base = octahedron();
        let field = DisplacementField::new(
            base.clone(),
            Mlp::kaiming(&[3, 8, 8, 3], 1234),
            Array2::zeros((base.n_vertices(), 0)),
            0,
        )
        .unwrap();
        let inverse = InverseField::new(Mlp::kaiming(&[3, 8, 8, 3], 4321), 0).unwrap();
        let surface = Surface::unit_sphere();
        let samples = sample_uniform(&base, 16, 99);
        let batch = SampleBatch::new(&base, samples, 0, false).unwrap();
        let mut setup = FdSetup {
            field,
            inverse,
            surface,
            batch,
            anchors: vec![],
            w: Weights {
                projection: 1e4,
                cycle: 1e2,
                anchor: 0.0,
                normal: 0.0,
                conformal: 0.0,
            },
        };
        setup.check_all_params(3, 1e-3);
    }

    #[test]
    fn objective_gradients_match_finite_differences_with_all_terms() {
        // All five terms enabled, with 2-channel features so every gradient
        // path is exercised (including the tangent-channel feature scatter).
        // The target is a sampled plane: trilinear interpolation reproduces a
        // linear function exactly, so the detached projections and normals are
        // noise-free and finite differences stay honest.
        let base = octahedron();
        let field = DisplacementField::new(
            base.clone(),
            Mlp::kaiming(&[5, 8, 8, 3], 77),
            Array2::from_shape_fn((base.n_vertices(), 2), |(i, j)| {
                0.05 * ((3 * i + 2 * j + 1) as f64).cos()
            }),
            0,
        )
        .unwrap();
        use crate::surface::GridSdf;
        let inverse = InverseField::new(Mlp::kaiming(&[3, 8, 8, 3], 88), 0).unwrap();
        let surface = Surface::Grid(
            GridSdf::from_fn(
                [9, 9, 9],
                Vec3::new(-3.0, -3.0, -3.0),
                Vec3::new(3.0, 3.0, 3.0),
                |p| p.z,
            )
            .unwrap(),
        );
        let samples = sample_uniform(&base, 12, 7);
        let batch = SampleBatch::new(&base, samples, 0, true).unwrap();
        let centroid = base.embed(SurfacePoint::centroid(0));
        let anchors = vec![Anchor {
            face: 0,
            bary: [1.0 / 3.0; 3],
            target: [centroid.x + 0.05, centroid.y, centroid.z + 0.02],
        }];
        let mut setup = FdSetup {
            field,
            inverse,
            surface,
            batch,
            anchors,
            w: Weights {
                projection: 1e4,
                cycle: 1e2,
                anchor: 1e2,
                normal: 10.0,
                conformal: 10.0,
            },
        };
        setup.check_all_params(3, 1e-3);
    }
}
