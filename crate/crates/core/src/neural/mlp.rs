//! Dense multilayer perceptron with rectifier hidden layers and an
//! identity output layer.
//!
//! Batches are column-major: an (in × q) matrix holds q samples. The
//! rectifier derivative at exactly 0 is defined as 0, so every pass is a
//! pure function of inputs and parameters. Besides reverse-mode gradients
//! there is a forward-tangent pass (for Jacobian-vector products) and its
//! reverse pass: for piecewise-linear activations a loss that consumes
//! only tangent outputs has zero adjoint on the primal path, so that
//! reverse pass touches just the tangent chain and leaves biases alone.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rounds to the nearest 32-bit float value (kept in f64 storage).
fn snap_f32(v: f64) -> f64 {
    v as f32 as f64
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            let v: f64 = rng.random();
            return (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    widths: Vec<usize>,
    /// Per layer: (widths[l+1] × widths[l]).
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Cached batch forward pass: the input, every rectified hidden activation,
/// and the output. Rectifier masks are recovered from the activations
/// (`a > 0` exactly when the pre-activation was positive).
pub struct Activations {
    input: Array2<f64>,
    /// Rectified activations, one per hidden layer.
    acts: Vec<Array2<f64>>,
    /// Final-layer output (no activation).
    out: Array2<f64>,
}

impl Activations {
    pub fn output(&self) -> &Array2<f64> {
        &self.out
    }
    pub fn batch_len(&self) -> usize {
        self.input.ncols()
    }
    pub fn input(&self) -> &Array2<f64> {
        &self.input
    }
}

/// Forward-tangent pass over the same batch: tangents of every
/// pre-/post-activation, plus the input tangents that seeded it.
pub struct TangentCache {
    input_tangent: Array2<f64>,
    zdots: Vec<Array2<f64>>,
    adots: Vec<Array2<f64>>,
}

impl TangentCache {
    pub fn output(&self) -> &Array2<f64> {
        self.zdots.last().expect("at least one layer")
    }
}

/// Parameter gradients shaped like an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            dw: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            db: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            a.scaled_add(scale, b);
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            a.scaled_add(scale, b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.dw {
            a.mapv_inplace(|v| v * s);
        }
        for a in &mut self.db {
            a.mapv_inplace(|v| v * s);
        }
    }

    /// Flat read in the canonical parameter order (see [`Mlp::get_param`]).
    pub fn get(&self, mut idx: usize) -> f64 {
        for (w, b) in self.dw.iter().zip(&self.db) {
            if idx < w.len() {
                let cols = w.ncols();
                return w[[idx / cols, idx % cols]];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }
}

impl Mlp {
    /// All-zero network (useful as the residual identity).
    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        assert!(widths.iter().all(|&w| w >= 1), "zero layer width");
        Mlp {
            widths: widths.to_vec(),
            weights: widths
                .windows(2)
                .map(|p| Array2::zeros((p[1], p[0])))
                .collect(),
            biases: widths[1..].iter().map(|&w| Array1::zeros(w)).collect(),
        }
    }

    /// Weights ~ Normal(0, 2/fan_in), biases zero; deterministic per seed
    /// and snapped to the f32 grid.
    pub fn kaiming(widths: &[usize], seed: u64) -> Self {
        let mut net = Mlp::zeros(widths);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut net.weights {
            let std = (2.0 / w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| snap_f32(std * standard_normal(&mut rng)));
        }
        net
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }
    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }
    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Canonical flat order: layer-major, row-major weights, then biases.
    /// The same order serializes to the packaged parameter blob.
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if idx < w.len() {
                let cols = w.ncols();
                return w[[idx / cols, idx % cols]];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, v: f64) {
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            if idx < w.len() {
                let cols = w.ncols();
                w[[idx / cols, idx % cols]] = v;
                return;
            }
            idx -= w.len();
            if idx < b.len() {
                b[idx] = v;
                return;
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Serializes parameters in the canonical flat order as f32.
    pub fn params_f32(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().map(|&v| v as f32));
            out.extend(b.iter().map(|&v| v as f32));
        }
        out
    }

    /// Builds a network from widths and a canonical-order parameter blob.
    pub fn from_params_f32(widths: &[usize], params: &[f32]) -> Self {
        let mut net = Mlp::zeros(widths);
        assert_eq!(params.len(), net.param_count(), "parameter blob length");
        let mut it = params.iter();
        for (w, b) in net.weights.iter_mut().zip(&mut net.biases) {
            for v in w.iter_mut() {
                *v = *it.next().expect("length checked") as f64;
            }
            for v in b.iter_mut() {
                *v = *it.next().expect("length checked") as f64;
            }
        }
        net
    }

    /// Clamps every parameter to its nearest f32 value.
    pub fn snap_to_f32(&mut self) {
        for w in &mut self.weights {
            w.mapv_inplace(snap_f32);
        }
        for b in &mut self.biases {
            b.mapv_inplace(snap_f32);
        }
    }

    pub(crate) fn layers_mut(
        &mut self,
    ) -> impl Iterator<Item = (&mut Array2<f64>, &mut Array1<f64>)> {
        self.weights.iter_mut().zip(self.biases.iter_mut())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input length");
        let last = self.n_layers() - 1;
        let mut a = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z: Vec<f64> = b.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let row = w.row(r);
                let mut acc = 0.0;
                for (wi, ai) in row.iter().zip(&a) {
                    acc += wi * ai;
                }
                *zr += acc;
                if l < last {
                    *zr = zr.max(0.0);
                }
            }
            a = z;
        }
        a
    }

    /// Batched forward over column samples; (in × q) → (out × q).
    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.input_dim(), "batch row count");
        let last = self.n_layers() - 1;
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.dot(&a);
            z += &b.view().insert_axis(Axis(1));
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Forward pass that keeps everything the backward passes need.
    pub fn forward_cache(&self, x: Array2<f64>) -> Activations {
        assert_eq!(x.nrows(), self.input_dim(), "batch row count");
        let last = self.n_layers() - 1;
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(last);
        let mut out = None;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let a_prev = if l == 0 { &x } else { &acts[l - 1] };
            let mut z = w.dot(a_prev);
            if l < last {
                // Bias and rectifier in one sweep; rows are contiguous.
                for (mut row, &bv) in z.rows_mut().into_iter().zip(b) {
                    row.mapv_inplace(|v| (v + bv).max(0.0));
                }
                acts.push(z);
            } else {
                z += &b.view().insert_axis(Axis(1));
                out = Some(z);
            }
        }
        Activations {
            input: x,
            acts,
            out: out.expect("at least one layer"),
        }
    }

    /// Reverse-mode gradients for upstream ∂E/∂output (out × q); returns
    /// parameter gradients and ∂E/∂input (in × q).
    pub fn backward(&self, cache: &Activations, upstream: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let (grads, dx) = self.backward_impl(cache, upstream, true);
        (grads, dx.expect("input gradient requested"))
    }

    /// Same as [`Self::backward`] without the input-gradient product
    /// (saves the largest GEMM when the input is not differentiated).
    pub fn backward_params(&self, cache: &Activations, upstream: &Array2<f64>) -> MlpGrads {
        self.backward_impl(cache, upstream, false).0
    }

    fn backward_impl(
        &self,
        cache: &Activations,
        upstream: &Array2<f64>,
        want_dx: bool,
    ) -> (MlpGrads, Option<Array2<f64>>) {
        assert_eq!(upstream.nrows(), self.output_dim(), "upstream row count");
        assert_eq!(upstream.ncols(), cache.batch_len(), "upstream batch width");
        let mut grads = MlpGrads::zeros_like(self);
        let mut dz = upstream.clone();
        for l in (0..self.n_layers()).rev() {
            let a_prev = if l == 0 { &cache.input } else { &cache.acts[l - 1] };
            grads.dw[l] = dz.dot(&a_prev.t());
            grads.db[l] = dz.sum_axis(Axis(1));
            if l == 0 {
                let dx = want_dx.then(|| self.weights[0].t().dot(&dz));
                return (grads, dx);
            }
            let mut da = self.weights[l].t().dot(&dz);
            da.zip_mut_with(&cache.acts[l - 1], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            dz = da;
        }
        unreachable!("loop returns at layer 0");
    }

    /// Forward-mode tangents: pushes input tangents ẋ (in × q) through
    /// the rectifier mask pattern of `cache`; the output tangent is the
    /// network Jacobian at each sample times that sample's ẋ column.
    pub fn forward_tangent(&self, cache: &Activations, xdot: &Array2<f64>) -> TangentCache {
        assert_eq!(xdot.nrows(), self.input_dim(), "tangent row count");
        assert_eq!(xdot.ncols(), cache.batch_len(), "tangent batch width");
        let last = self.n_layers() - 1;
        let mut zdots = Vec::with_capacity(self.n_layers());
        let mut adots: Vec<Array2<f64>> = Vec::with_capacity(last);
        for (l, w) in self.weights.iter().enumerate() {
            let a_prev = if l == 0 { xdot } else { &adots[l - 1] };
            let zdot = w.dot(a_prev);
            if l < last {
                let mut adot = zdot.clone();
                adot.zip_mut_with(&cache.acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                adots.push(adot);
            }
            zdots.push(zdot);
        }
        TangentCache {
            input_tangent: xdot.clone(),
            zdots,
            adots,
        }
    }

    /// Parameter gradients of a loss that consumes only the tangent
    /// outputs of `tcache`, plus the gradient with respect to the input
    /// tangents. The rectifier's second derivative is zero, so the primal
    /// adjoints vanish and biases receive no gradient.
    pub fn backward_tangent(
        &self,
        cache: &Activations,
        tcache: &TangentCache,
        upstream: &Array2<f64>,
    ) -> (MlpGrads, Array2<f64>) {
        assert_eq!(upstream.nrows(), self.output_dim(), "upstream row count");
        assert_eq!(upstream.ncols(), cache.batch_len(), "upstream batch width");
        let mut grads = MlpGrads::zeros_like(self);
        let mut dzdot = upstream.clone();
        for l in (0..self.n_layers()).rev() {
            let adot_prev = if l == 0 {
                &tcache.input_tangent
            } else {
                &tcache.adots[l - 1]
            };
            grads.dw[l] = dzdot.dot(&adot_prev.t());
            if l == 0 {
                return (grads, self.weights[0].t().dot(&dzdot));
            }
            let mut dadot = self.weights[l].t().dot(&dzdot);
            dadot.zip_mut_with(&cache.acts[l - 1], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            dzdot = dadot;
        }
        unreachable!("loop returns at layer 0");
    }

    /// Exact (out × in) Jacobian at one input, by pushing the identity
    /// tangent basis through the rectifier masks.
    pub fn input_jacobian(&self, x: &[f64]) -> Array2<f64> {
        assert_eq!(x.len(), self.input_dim(), "input length");
        let last = self.n_layers() - 1;
        let mut a = Array1::from(x.to_vec());
        let mut t = Array2::eye(self.input_dim());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w.dot(&a) + b;
            let zt = w.dot(&t);
            if l < last {
                let mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                t = &zt * &mask.view().insert_axis(Axis(1));
                a = z.mapv(|v| v.max(0.0));
            } else {
                t = zt;
                a = z;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::assert_near;
    use rand::Rng;

    /// Straight-line re-implementation used as an independent oracle.
    fn oracle_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..net.n_layers() {
            let (rows, cols) = net.weights[l].dim();
            let mut z = vec![0.0f64; rows];
            for r in 0..rows {
                let mut acc = net.biases[l][r];
                for c in 0..cols {
                    acc += net.weights[l][[r, c]] * a[c];
                }
                if l + 1 < net.n_layers() && acc < 0.0 {
                    acc = 0.0;
                }
                z[r] = acc;
            }
            a = z;
        }
        a
    }

    fn random_input(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_net_maps_everything_to_zero() {
        let net = Mlp::zeros(&[5, 7, 2]);
        let y = net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer_is_identity() {
        let mut net = Mlp::zeros(&[4, 4]);
        for i in 0..4 {
            net.set_param(i * 4 + i, 1.0);
        }
        let x = [0.3, -1.2, 4.5, 0.0];
        assert_eq!(net.forward(&x), x.to_vec());
    }

    #[test]
    fn forward_agrees_with_straight_line_oracle() {
        let net = Mlp::kaiming(&[6, 16, 16, 3], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let x = random_input(&mut rng, 6);
            let y = net.forward(&x);
            let o = oracle_forward(&net, &x);
            for (a, b) in y.iter().zip(&o) {
                assert_near(*a, *b, 1e-5, "oracle agreement");
            }
            // Batch path must agree with the single path too.
            let xm = Array2::from_shape_vec((6, 1), x.clone()).unwrap();
            let ym = net.forward_batch(&xm);
            for r in 0..3 {
                assert_near(ym[[r, 0]], y[r], 1e-12, "batch vs single");
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Mlp::kaiming(&[5, 8, 2], 99);
        let x = [0.1, 0.2, -0.3, 0.4, -0.5];
        let a = net.forward(&x);
        let b = net.forward(&x);
        assert_eq!(a, b);
    }

    #[test]
    fn kaiming_statistics_and_determinism() {
        let mut pooled = Vec::new();
        for seed in 0..10 {
            let net = Mlp::kaiming(&[64, 64], seed);
            for w in &net.weights {
                pooled.extend(w.iter().copied());
            }
            for b in &net.biases {
                assert!(b.iter().all(|&v| v == 0.0), "biases start at zero");
            }
        }
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let target = 2.0 / 64.0;
        assert!(
            (var - target).abs() <= 0.2 * target,
            "weight variance {var} vs {target}"
        );

        let a = Mlp::kaiming(&[10, 20, 3], 7);
        let b = Mlp::kaiming(&[10, 20, 3], 7);
        assert_eq!(a.params_f32(), b.params_f32());
        // Parameters live exactly on the f32 grid.
        for i in 0..a.param_count() {
            let v = a.get_param(i);
            assert_eq!(v, v as f32 as f64);
        }
    }

    #[test]
    fn backward_matches_finite_differences_across_seeds() {
        for seed in 0..50 {
            let net = Mlp::kaiming(&[3, 8, 8, 3], seed);
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let q = 4;
            let x = Array2::from_shape_fn((3, q), |_| rng.random_range(-1.0..1.0));
            let upstream = Array2::from_shape_fn((3, q), |_| rng.random_range(-1.0..1.0));
            // E = Σ upstream ⊙ output
            let loss = |n: &Mlp| (&n.forward_batch(&x) * &upstream).sum();

            let cache = net.forward_cache(x.clone());
            let grads = net.backward_params(&cache, &upstream);

            let step = 1e-3;
            for idx in (0..net.param_count()).step_by(7) {
                let mut plus = net.clone();
                plus.set_param(idx, net.get_param(idx) + step);
                let mut minus = net.clone();
                minus.set_param(idx, net.get_param(idx) - step);
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let an = grads.get(idx);
                let denom = fd.abs().max(an.abs()).max(1e-6);
                assert!(
                    (fd - an).abs() / denom <= 1e-4,
                    "seed {seed} param {idx}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::kaiming(&[4, 6, 2], 3);
        let x = Array2::from_elem((4, 5), 0.37);
        let cache = net.forward_cache(x.clone());
        let (grads, dx) = net.backward(&cache, &Array2::zeros((2, 5)));
        assert!(grads.dw.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(grads.db.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_net_input_gradient_is_weight_transpose() {
        let net = Mlp::kaiming(&[4, 3], 11);
        let x = Array2::from_shape_fn((4, 2), |(r, c)| (r + c) as f64 * 0.1);
        let upstream = Array2::from_shape_fn((3, 2), |(r, c)| (2 * r + c) as f64 * 0.2 - 0.3);
        let cache = net.forward_cache(x);
        let (_, dx) = net.backward(&cache, &upstream);
        let expect = net.weights[0].t().dot(&upstream);
        assert_eq!(dx, expect);
    }

    #[test]
    fn input_jacobian_basics() {
        let zero = Mlp::zeros(&[3, 8, 3]);
        assert!(zero
            .input_jacobian(&[0.2, 0.4, 0.6])
            .iter()
            .all(|&v| v == 0.0));

        let lin = Mlp::kaiming(&[5, 2], 17);
        let jac = lin.input_jacobian(&[0.0; 5]);
        assert_eq!(jac, lin.weights[0]);
    }

    #[test]
    fn input_jacobian_matches_finite_differences() {
        let net = Mlp::kaiming(&[3, 10, 10, 3], 23);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let step = 1e-5;
        let mut tested = 0;
        'outer: while tested < 100 {
            let x = random_input(&mut rng, 3);
            // Finite differences are meaningless across a rectifier kink;
            // skip inputs that sit on one.
            let mut a = Array1::from(x.clone());
            for l in 0..net.n_layers() - 1 {
                let z = net.weights[l].dot(&a) + &net.biases[l];
                if z.iter().any(|v| v.abs() < 1e-3) {
                    continue 'outer;
                }
                a = z.mapv(|v| v.max(0.0));
            }
            let jac = net.input_jacobian(&x);
            for c in 0..3 {
                let mut hi = x.clone();
                hi[c] += step;
                let mut lo = x.clone();
                lo[c] -= step;
                let yh = net.forward(&hi);
                let yl = net.forward(&lo);
                for r in 0..3 {
                    let fd = (yh[r] - yl[r]) / (2.0 * step);
                    let denom = fd.abs().max(jac[[r, c]].abs()).max(1e-6);
                    assert!(
                        (fd - jac[[r, c]]).abs() / denom <= 1e-4,
                        "entry ({r},{c}): fd {fd} vs {}",
                        jac[[r, c]]
                    );
                }
            }
            tested += 1;
        }
    }

    #[test]
    fn forward_tangent_matches_input_jacobian() {
        let net = Mlp::kaiming(&[4, 12, 3], 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let q = 6;
        let x = Array2::from_shape_fn((4, q), |_| rng.random_range(-1.0..1.0));
        let xdot = Array2::from_shape_fn((4, q), |_| rng.random_range(-1.0..1.0));
        let cache = net.forward_cache(x.clone());
        let tcache = net.forward_tangent(&cache, &xdot);
        for s in 0..q {
            let col: Vec<f64> = x.column(s).to_vec();
            let jac = net.input_jacobian(&col);
            let jt = jac.dot(&xdot.column(s));
            for r in 0..3 {
                assert_near(tcache.output()[[r, s]], jt[r], 1e-12, "jvp column");
            }
        }
    }

    #[test]
    fn tangent_backward_matches_finite_differences() {
        for seed in [2u64, 5, 9, 14] {
            let net = Mlp::kaiming(&[3, 8, 8, 3], seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let q = 5;
            let x = Array2::from_shape_fn((3, q), |_| rng.random_range(-1.0..1.0));
            let xdot = Array2::from_shape_fn((3, q), |_| rng.random_range(-1.0..1.0));
            let upstream = Array2::from_shape_fn((3, q), |_| rng.random_range(-1.0..1.0));
            // E = Σ upstream ⊙ (J(x)·ẋ)
            let loss = |n: &Mlp| {
                let cache = n.forward_cache(x.clone());
                let t = n.forward_tangent(&cache, &xdot);
                (t.output() * &upstream).sum()
            };

            let cache = net.forward_cache(x.clone());
            let tcache = net.forward_tangent(&cache, &xdot);
            let (grads, dxdot) = net.backward_tangent(&cache, &tcache, &upstream);

            // E is linear in ẋ, so ∂E/∂ẋ per sample is exactly Jᵀu.
            for s in 0..q {
                let col: Vec<f64> = x.column(s).to_vec();
                let jtu = net.input_jacobian(&col).t().dot(&upstream.column(s));
                for r in 0..3 {
                    assert_near(dxdot[[r, s]], jtu[r], 1e-10, "tangent input gradient");
                }
            }

            let step = 1e-3;
            for idx in (0..net.param_count()).step_by(5) {
                let base = net.get_param(idx);
                let mut plus = net.clone();
                plus.set_param(idx, base + step);
                let mut minus = net.clone();
                minus.set_param(idx, base - step);
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let an = grads.get(idx);
                let denom = fd.abs().max(an.abs()).max(1e-5);
                assert!(
                    (fd - an).abs() / denom <= 2e-4,
                    "seed {seed} param {idx}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn params_round_trip_exactly() {
        let net = Mlp::kaiming(&[7, 9, 4], 41);
        let blob = net.params_f32();
        assert_eq!(blob.len(), net.param_count());
        let back = Mlp::from_params_f32(&[7, 9, 4], &blob);
        assert_eq!(net.params_f32(), back.params_f32());
        for i in 0..net.param_count() {
            assert_eq!(net.get_param(i), back.get_param(i));
        }
    }

    #[test]
    #[should_panic(expected = "input length")]
    fn forward_rejects_wrong_input_length() {
        Mlp::zeros(&[4, 2]).forward(&[1.0, 2.0]);
    }
}
