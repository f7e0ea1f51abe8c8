//! Extrinsic Gaussian process surrogate.
//!
//! The covariance between two manifold points is a squared-exponential kernel
//! on their embeddings, `R(x, z) = σ_f² exp(−‖J(x) − J(z)‖² / 2ℓ²)`, which is
//! positive semi-definite on any manifold because it is the restriction of a
//! valid kernel on ℝᴰ. The prior mean is zero.

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifolds::{embed, ManifoldKind, ManifoldPoint};

/// First jitter tried when the regularized Gram is not numerically PD, in units of σ_f².
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter before giving up, in units of σ_f².
pub const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// RBF lengthscale ℓ in embedding-space units.
    pub lengthscale: f64,
    /// Signal variance σ_f².
    pub amplitude: f64,
    /// Observation noise variance σ_n².
    pub noise: f64,
}

impl KernelParams {
    pub fn new(lengthscale: f64, amplitude: f64, noise: f64) -> Result<Self> {
        let params = KernelParams {
            lengthscale,
            amplitude,
            noise,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lengthscale.is_finite()
            && self.lengthscale > 0.0
            && self.amplitude.is_finite()
            && self.amplitude > 0.0
            && self.noise.is_finite()
            && self.noise >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid kernel parameters {self:?}")))
        }
    }

    /// Covariance as a function of squared embedded distance.
    pub fn covariance(&self, sq_dist: f64) -> f64 {
        self.amplitude * (-sq_dist / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    /// Scale-free defaults: ℓ = median pairwise embedded distance, σ_f² =
    /// variance of the values (floored at 1e-6), σ_n² = 1e-6·σ_f².
    pub fn median_heuristic(data: &GpDataset) -> KernelParams {
        let pts = &data.embedded;
        let mut dists: Vec<f64> = Vec::new();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = (&pts[i] - &pts[j]).norm();
                if d > 0.0 {
                    dists.push(d);
                }
            }
        }
        let lengthscale = if dists.is_empty() {
            1.0
        } else {
            dists.sort_by(f64::total_cmp);
            let mid = dists.len() / 2;
            if dists.len() % 2 == 0 {
                0.5 * (dists[mid - 1] + dists[mid])
            } else {
                dists[mid]
            }
        };
        let n = data.values.len() as f64;
        let mean = data.values.iter().sum::<f64>() / n;
        let var = data.values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let amplitude = var.max(1e-6);
        KernelParams {
            lengthscale,
            amplitude,
            noise: 1e-6 * amplitude,
        }
    }
}

/// `σ_f² exp(−‖J(x) − J(z)‖² / 2ℓ²)`.
pub fn kernel_eval(params: &KernelParams, x: &ManifoldPoint, z: &ManifoldPoint) -> Result<f64> {
    let d = crate::manifolds::extrinsic_distance(x, z)?;
    Ok(params.covariance(d * d))
}

/// Evaluated points with cached flat embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset {
    kind: ManifoldKind,
    points: Vec<ManifoldPoint>,
    embedded: Vec<DVector<f64>>,
    values: Vec<f64>,
}

impl GpDataset {
    pub fn new(kind: ManifoldKind) -> Self {
        GpDataset {
            kind,
            points: Vec::new(),
            embedded: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_points(points: Vec<ManifoldPoint>, values: Vec<f64>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset needs at least one point".into()))?;
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let mut data = GpDataset::new(first.kind());
        for (x, y) in points.into_iter().zip(values) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: ManifoldPoint, y: f64) -> Result<()> {
        if x.kind() != self.kind {
            return Err(Error::KindMismatch {
                left: self.kind.to_string(),
                right: x.kind().to_string(),
            });
        }
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite value {y}")));
        }
        self.embedded.push(embed(&x).flat());
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    /// Same points with every value replaced through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&y| f(y)).collect();
        if values.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidInput("mapped values are not finite".into()));
        }
        Ok(GpDataset {
            values,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flat embedded coordinates of every point.
    pub fn embedded(&self) -> &[DVector<f64>] {
        &self.embedded
    }
}

/// Kernel matrix of the dataset plus `σ_n² I`.
pub fn gram_matrix(params: &KernelParams, data: &GpDataset) -> Result<DMatrix<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidInput("gram matrix of an empty dataset".into()));
    }
    let n = data.len();
    let pts = &data.embedded;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.amplitude + params.noise;
        for j in 0..i {
            let v = params.covariance((&pts[i] - &pts[j]).norm_squared());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Posterior mean and variance of the latent function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Posterior together with its gradient in flat embedded coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGradient {
    pub posterior: Posterior,
    pub mean_grad: DVector<f64>,
    /// Gradient of the variance; zero when the variance was clamped.
    pub variance_grad: DVector<f64>,
}

/// A zero-mean GP conditioned on a dataset. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    data: GpDataset,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// Factorizes `K + σ_n² I`, escalating diagonal jitter from 1e-10·σ_f² by
    /// factors of 10 up to 1e-4·σ_f² if the plain factorization fails.
    pub fn new(params: KernelParams, data: GpDataset) -> Result<Self> {
        params.validate()?;
        let gram = gram_matrix(&params, &data)?;
        let y = DVector::from_column_slice(&data.values);
        let mut jitter = 0.0;
        loop {
            let mut m = gram.clone();
            if jitter > 0.0 {
                for i in 0..m.nrows() {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(chol) = Cholesky::new(m) {
                let alpha = chol.solve(&y);
                if alpha.iter().all(|a| a.is_finite()) {
                    if jitter > 0.0 {
                        debug!("gram factorized with jitter {jitter:e}");
                    }
                    return Ok(GpModel {
                        params,
                        data,
                        chol,
                        alpha,
                        jitter,
                    });
                }
            }
            jitter = if jitter == 0.0 {
                JITTER_START * params.amplitude
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_MAX * params.amplitude * (1.0 + 1e-9) {
                return Err(Error::IllConditioned {
                    jitter: JITTER_MAX * params.amplitude,
                });
            }
        }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn data(&self) -> &GpDataset {
        &self.data
    }

    pub fn kind(&self) -> ManifoldKind {
        self.data.kind
    }

    /// Lower-triangular Cholesky factor of the regularized Gram matrix.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(K + σ_n² I)⁻¹ y`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Diagonal jitter that was needed on top of σ_n².
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn cross_covariance(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.data.len(),
            self.data
                .embedded
                .iter()
                .map(|xi| self.params.covariance((xi - x).norm_squared())),
        )
    }

    fn check_flat(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.data.kind.ambient_dim() {
            return Err(Error::InvalidInput(format!(
                "query has {} coordinates, model expects {}",
                x.len(),
                self.data.kind.ambient_dim()
            )));
        }
        Ok(())
    }

    fn posterior_from_cross(&self, k: &DVector<f64>) -> (Posterior, bool) {
        let mean = k.dot(&self.alpha);
        let w = self.chol.l_dirty().solve_lower_triangular(k).unwrap_or_else(|| k.clone());
        let raw = self.params.amplitude - w.norm_squared();
        let clamped = raw < 0.0;
        if clamped {
            debug!("posterior variance {raw:e} clamped to 0");
        }
        (
            Posterior {
                mean,
                variance: raw.max(0.0),
            },
            clamped,
        )
    }

    /// Posterior at a manifold point.
    pub fn posterior(&self, x: &ManifoldPoint) -> Result<Posterior> {
        if x.kind() != self.data.kind {
            return Err(Error::KindMismatch {
                left: self.data.kind.to_string(),
                right: x.kind().to_string(),
            });
        }
        self.posterior_flat(&embed(x).flat())
    }

    /// Posterior at an arbitrary point of the embedding space, in flat coordinates.
    pub fn posterior_flat(&self, x: &DVector<f64>) -> Result<Posterior> {
        self.check_flat(x)?;
        Ok(self.posterior_from_cross(&self.cross_covariance(x)).0)
    }

    /// Posterior and its gradient with respect to the flat embedded query.
    ///
    /// With `∇k_i = k_i (x_i − x) / ℓ²`, the mean gradient is `Σ α_i ∇k_i` and
    /// the variance gradient is `−2 Σ [(K + σ_n² I)⁻¹ k]_i ∇k_i`.
    pub fn posterior_gradient_flat(&self, x: &DVector<f64>) -> Result<PosteriorGradient> {
        self.check_flat(x)?;
        let k = self.cross_covariance(x);
        let (posterior, clamped) = self.posterior_from_cross(&k);
        let kinv_k = self.chol.solve(&k);
        let inv_l2 = 1.0 / (self.params.lengthscale * self.params.lengthscale);
        let mut mean_grad = DVector::zeros(x.len());
        let mut variance_grad = DVector::zeros(x.len());
        for (i, xi) in self.data.embedded.iter().enumerate() {
            let dk = (xi - x) * (k[i] * inv_l2);
            mean_grad.axpy(self.alpha[i], &dk, 1.0);
            if !clamped {
                variance_grad.axpy(-2.0 * kinv_k[i], &dk, 1.0);
            }
        }
        Ok(PosteriorGradient {
            posterior,
            mean_grad,
            variance_grad,
        })
    }

    /// `−½ yᵀα − Σ log L_ii − (n/2) log 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = DVector::from_column_slice(&self.data.values);
        let n = self.data.len() as f64;
        let log_det_half: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * y.dot(&self.alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Box constraints for hyperparameter fitting, as `(lower, upper)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub amplitude: (f64, f64),
    pub noise: (f64, f64),
}

impl HyperBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("amplitude", self.amplitude),
            ("noise", self.noise),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid {name} bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    /// Default multipliers for [`HyperBounds::scaled_to`]: ℓ within [0.05, 20]×
    /// the median heuristic, σ_f² within [1e-3, 1e3]× the value variance,
    /// σ_n² within [1e-10, 1e-2]× the value variance.
    pub const DEFAULT_FACTORS: HyperBounds = HyperBounds {
        lengthscale: (0.05, 20.0),
        amplitude: (1e-3, 1e3),
        noise: (1e-10, 1e-2),
    };

    /// Bounds scaled to a dataset with [`HyperBounds::DEFAULT_FACTORS`].
    pub fn for_data(data: &GpDataset) -> HyperBounds {
        HyperBounds::scaled_to(data, &HyperBounds::DEFAULT_FACTORS)
    }

    /// Multiplies `factors` by the median-heuristic lengthscale and by the
    /// value variance of `data`.
    pub fn scaled_to(data: &GpDataset, factors: &HyperBounds) -> HyperBounds {
        let base = KernelParams::median_heuristic(data);
        let scale = |(lo, hi): (f64, f64), s: f64| (lo * s, hi * s);
        HyperBounds {
            lengthscale: scale(factors.lengthscale, base.lengthscale),
            amplitude: scale(factors.amplitude, base.amplitude),
            noise: scale(factors.noise, base.amplitude),
        }
    }

    fn log_ranges(&self) -> [(f64, f64); 3] {
        [self.lengthscale, self.amplitude, self.noise].map(|(lo, hi)| (lo.ln(), hi.ln()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Random restarts in addition to the initial guess.
    pub restarts: usize,
    /// Initial coordinate-search step in log-parameter units.
    pub initial_step: f64,
    /// The search stops once the step falls below this.
    pub min_step: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 4,
            initial_step: 1.0,
            min_step: 1e-3,
            max_sweeps: 200,
            seed: 0,
        }
    }
}

fn params_from_log(theta: &[f64; 3]) -> KernelParams {
    KernelParams {
        lengthscale: theta[0].exp(),
        amplitude: theta[1].exp(),
        noise: theta[2].exp(),
    }
}

fn lml_at(data: &GpDataset, theta: &[f64; 3]) -> Option<f64> {
    GpModel::new(params_from_log(theta), data.clone())
        .ok()
        .map(|m| m.log_marginal_likelihood())
        .filter(|v| v.is_finite())
}

/// Maximizes the log marginal likelihood over log-parameters by a multistart
/// coordinate search confined to `bounds`.
pub fn fit_hyperparams(
    data: &GpDataset,
    init: &KernelParams,
    bounds: &HyperBounds,
    config: &FitConfig,
) -> Result<KernelParams> {
    if data.len() < 2 {
        return Err(Error::InvalidInput("fitting needs at least two points".into()));
    }
    bounds.validate()?;
    let ranges = bounds.log_ranges();
    let clamp = |theta: [f64; 3]| -> [f64; 3] {
        let mut out = theta;
        for (v, (lo, hi)) in out.iter_mut().zip(ranges) {
            *v = v.clamp(lo, hi);
        }
        out
    };
    let init_log = clamp([
        init.lengthscale.max(f64::MIN_POSITIVE).ln(),
        init.amplitude.max(f64::MIN_POSITIVE).ln(),
        init.noise.max(f64::MIN_POSITIVE).ln(),
    ]);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![init_log];
    for _ in 0..config.restarts {
        starts.push(ranges.map(|(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo }));
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for start in starts {
        let Some(mut value) = lml_at(data, &start) else {
            continue;
        };
        let mut theta = start;
        let mut step = config.initial_step;
        let mut sweeps = 0;
        while step >= config.min_step && sweeps < config.max_sweeps {
            sweeps += 1;
            let mut improved = false;
            for coord in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut trial = theta;
                    trial[coord] += sign * step;
                    let trial = clamp(trial);
                    if trial == theta {
                        continue;
                    }
                    if let Some(v) = lml_at(data, &trial) {
                        if v > value {
                            theta = trial;
                            value = v;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((theta, value));
        }
    }
    best.map(|(theta, _)| params_from_log(&theta))
        .ok_or(Error::FittingFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{random_point, random_point_seeded, ManifoldPoint};
    use rand_distr::StandardNormal;

    fn sphere_data(n: usize, seed: u64) -> GpDataset {
        let kind = ManifoldKind::sphere(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<_> = (0..n).map(|_| random_point(kind, &mut rng)).collect();
        let values = points.iter().map(|p| p.coords()[0] + 0.5 * p.coords()[2]).collect();
        GpDataset::from_points(points, values).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::new(2.0, 1.0, 0.0).unwrap();
        let north = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        let south = ManifoldPoint::sphere(&[0.0, 0.0, -1.0]).unwrap();
        assert_eq!(kernel_eval(&p, &north, &north).unwrap(), 1.0);
        assert!((kernel_eval(&p, &north, &south).unwrap() - (-0.5f64).exp()).abs() < 1e-15);

        let frame = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rotated = DMatrix::from_column_slice(3, 2, &[c, c, 0.0, -c, c, 0.0]);
        let a = ManifoldPoint::grassmann(frame).unwrap();
        let b = ManifoldPoint::grassmann(rotated).unwrap();
        let p = KernelParams::new(0.7, 2.5, 0.0).unwrap();
        assert!((kernel_eval(&p, &a, &b).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(KernelParams::new(0.0, 1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, -1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, 1.0, -1e-3).is_err());
    }

    #[test]
    fn gram_examples() {
        let p = KernelParams::new(1.0, 1.5, 0.01).unwrap();
        let x = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let one = GpDataset::from_points(vec![x.clone()], vec![0.0]).unwrap();
        let g = gram_matrix(&p, &one).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert!((g[(0, 0)] - 1.51).abs() < 1e-15);

        // Duplicate points: rank-1 kernel part, PD only through the noise.
        let dup = GpDataset::from_points(vec![x.clone(), x.clone()], vec![0.0, 1.0]).unwrap();
        assert!(GpModel::new(p, dup.clone()).is_ok());
        let noiseless = KernelParams::new(1.0, 1.5, 0.0).unwrap();
        let model = GpModel::new(noiseless, dup).unwrap();
        assert!(model.jitter() > 0.0);

        let data = sphere_data(5, 3);
        let p = KernelParams::new(0.8, 1.0, 0.05).unwrap();
        let g = gram_matrix(&p, &data).unwrap();
        let eig = nalgebra::SymmetricEigen::new(g).eigenvalues;
        assert!(eig.iter().all(|&l| l >= 0.05 - 1e-10));
    }

    #[test]
    fn cholesky_reconstructs_gram() {
        let data = sphere_data(8, 9);
        let p = KernelParams::new(0.6, 1.3, 1e-4).unwrap();
        let model = GpModel::new(p, data.clone()).unwrap();
        let l = model.cholesky_factor();
        let gram = gram_matrix(&p, &data).unwrap();
        assert!((&l * l.transpose() - &gram).norm() / gram.norm() < 1e-8);
    }

    #[test]
    fn posterior_interpolates_and_reverts() {
        let data = sphere_data(6, 1);
        let p = KernelParams::new(0.9, 1.0, 0.0).unwrap();
        let model = GpModel::new(p, data.clone()).unwrap();
        for (x, y) in data.points().iter().zip(data.values()) {
            let post = model.posterior(x).unwrap();
            assert!((post.mean - y).abs() < 1e-8);
            assert!(post.variance <= 1e-8);
        }

        // Off-manifold query far away in the embedding space.
        let far = DVector::from_column_slice(&[100.0, 100.0, 100.0]);
        let post = model.posterior_flat(&far).unwrap();
        assert!(post.mean.abs() < 1e-6);
        assert!((post.variance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn posterior_matches_dense_inverse() {
        let data = sphere_data(3, 4);
        let p = KernelParams::new(0.7, 2.0, 1e-3).unwrap();
        let model = GpModel::new(p, data.clone()).unwrap();
        let x = random_point_seeded(data.kind(), 77);
        let k = DVector::from_iterator(
            3,
            data.points().iter().map(|xi| kernel_eval(&p, xi, &x).unwrap()),
        );
        let inv = gram_matrix(&p, &data).unwrap().try_inverse().unwrap();
        let y = DVector::from_column_slice(data.values());
        let mean = k.dot(&(&inv * &y));
        let var = p.amplitude - k.dot(&(&inv * &k));
        let post = model.posterior(&x).unwrap();
        assert!((post.mean - mean).abs() < 1e-10);
        assert!((post.variance - var).abs() < 1e-10);
    }

    #[test]
    fn lml_single_point() {
        let x = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let data = GpDataset::from_points(vec![x], vec![0.0]).unwrap();
        let model = GpModel::new(KernelParams::new(1.0, 0.75, 0.25).unwrap(), data).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((model.log_marginal_likelihood() - expected).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_lengthscale_and_respects_bounds() {
        // Sample 40 values from a GP with ℓ = 1 on the sphere.
        let kind = ManifoldKind::sphere(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let points: Vec<_> = (0..40).map(|_| random_point(kind, &mut rng)).collect();
        let truth = KernelParams::new(1.0, 1.0, 1e-4).unwrap();
        let zero = GpDataset::from_points(points.clone(), vec![0.0; 40]).unwrap();
        let l = Cholesky::new(gram_matrix(&truth, &zero).unwrap()).unwrap().l();
        let z = DVector::from_fn(40, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &l * z;
        let data = GpDataset::from_points(points, y.iter().copied().collect()).unwrap();

        let bounds = HyperBounds {
            lengthscale: (0.05, 10.0),
            amplitude: (1e-2, 1e2),
            noise: (1e-8, 1e-1),
        };
        let init = KernelParams::new(0.2, 5.0, 1e-2).unwrap();
        let fitted = fit_hyperparams(&data, &init, &bounds, &FitConfig::default()).unwrap();
        assert!(
            (0.5..=2.0).contains(&fitted.lengthscale),
            "fitted lengthscale {}",
            fitted.lengthscale
        );
        for (v, (lo, hi)) in [
            (fitted.lengthscale, bounds.lengthscale),
            (fitted.amplitude, bounds.amplitude),
            (fitted.noise, bounds.noise),
        ] {
            assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
        }
        let again = fit_hyperparams(&data, &init, &bounds, &FitConfig::default()).unwrap();
        assert_eq!(fitted, again);
    }

    #[test]
    fn fit_needs_two_points() {
        let data = sphere_data(1, 0);
        let p = KernelParams::new(1.0, 1.0, 1e-6).unwrap();
        let bounds = HyperBounds {
            lengthscale: (0.1, 10.0),
            amplitude: (0.1, 10.0),
            noise: (1e-9, 1e-3),
        };
        assert!(fit_hyperparams(&data, &p, &bounds, &FitConfig::default()).is_err());
    }
}
