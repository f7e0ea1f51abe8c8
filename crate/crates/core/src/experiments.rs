//! Objective constructions with known optima: extrinsic Fréchet means,
//! low-rank approximation on the Grassmannian, and kernel regression with
//! SPD-valued responses.

use std::time::Instant;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::{self, BaselineOutcome, GdConfig, GradObjective, NelderMeadConfig};
use crate::bo::{self, BoAbort, BoConfig, BoOutcome, Objective};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifolds::{
    embed, gaussian_symmetric, project_to_image, random_point, random_point_seeded, spd_intrinsic_distance, unembed,
    AmbientVector, ManifoldKind, ManifoldPoint,
};

// ---------------------------------------------------------------------------
// Extrinsic Fréchet mean

/// Data for the sample Fréchet function `f_n(x) = (1/n) Σ ‖J(x) − J(x_i)‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrechetProblem {
    data: Vec<ManifoldPoint>,
}

impl FrechetProblem {
    pub fn new(data: Vec<ManifoldPoint>) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| Error::InvalidInput("Fréchet problem needs data".into()))?;
        let kind = first.kind();
        if let Some(bad) = data.iter().find(|x| x.kind() != kind) {
            return Err(Error::KindMismatch {
                left: kind.to_string(),
                right: bad.kind().to_string(),
            });
        }
        Ok(FrechetProblem { data })
    }

    /// `n` equispaced points on the circle of height `z` of S².
    pub fn latitude_circle(n: usize, z: f64) -> Result<Self> {
        if !(z > -1.0 && z < 1.0) || n == 0 {
            return Err(Error::InvalidInput(format!(
                "latitude circle needs n ≥ 1 and |z| < 1, got n={n}, z={z}"
            )));
        }
        let r = (1.0 - z * z).sqrt();
        let data = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                ManifoldPoint::sphere(&[r * a.cos(), r * a.sin(), z])
            })
            .collect::<Result<Vec<_>>>()?;
        FrechetProblem::new(data)
    }

    /// Points scattered around a random centre: each is a retraction of the
    /// centre's embedding plus `spread`-scaled Gaussian noise.
    pub fn random_cluster(kind: ManifoldKind, n: usize, spread: f64, seed: u64) -> Result<Self> {
        kind.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centre = embed(&random_point(kind, &mut rng)).flat();
        let mut data = Vec::with_capacity(n);
        while data.len() < n {
            let noise = DVector::from_fn(centre.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = AmbientVector::from_flat(kind, &(&centre + noise * spread))?;
            if let Ok(x) = unembed(kind, &v) {
                data.push(x);
            }
        }
        FrechetProblem::new(data)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.data[0].kind()
    }

    pub fn data(&self) -> &[ManifoldPoint] {
        &self.data
    }

    fn embedded_mean(&self) -> DMatrix<f64> {
        let sum = self
            .data
            .iter()
            .fold(DMatrix::zeros(self.kind().ambient_shape().0, self.kind().ambient_shape().1), |acc, x| {
                acc + embed(x).matrix()
            });
        sum / self.data.len() as f64
    }

    pub fn value(&self, x: &ManifoldPoint) -> f64 {
        let jx = embed(x);
        self.data
            .iter()
            .map(|xi| (jx.matrix() - embed(xi).matrix()).norm_squared())
            .sum::<f64>()
            / self.data.len() as f64
    }

    /// Closed-form extrinsic mean: the projection of the embedded average
    /// onto the image manifold.
    pub fn extrinsic_mean_oracle(&self) -> Result<ManifoldPoint> {
        let kind = self.kind();
        let mean = AmbientVector::new(kind, self.embedded_mean())?;
        unembed(kind, &project_to_image(kind, &mean)?)
    }

    pub fn objective(&self) -> Result<Objective> {
        let oracle = self.extrinsic_mean_oracle()?;
        let value = self.value(&oracle);
        let problem = self.clone();
        Ok(Objective::new(self.kind(), move |x| problem.value(x)).with_oracle(oracle, value))
    }

    /// The objective with its ambient gradient `2 (J(x) − mean J(x_i))`.
    pub fn grad_objective(&self) -> Result<GradObjective> {
        let mean = self.embedded_mean();
        Ok(GradObjective::new(self.objective()?, move |x| {
            AmbientVector::new(x.kind(), (embed(x).matrix() - &mean) * 2.0)
                .expect("embedded shapes agree")
        }))
    }
}

// ---------------------------------------------------------------------------
// Low-rank approximation on the Grassmannian

/// Approximate `F ∈ ℝ^{n×m}` by `XW` with `X` spanning a p-dimensional subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannApproxProblem {
    f: DMatrix<f64>,
    p: usize,
}

/// Optimal subspace from the singular value decomposition of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdOracle {
    pub point: ManifoldPoint,
    pub value: f64,
    pub singular_values: Vec<f64>,
    /// False when σ_p and σ_{p+1} coincide and the optimal subspace is not unique.
    pub unique: bool,
}

impl GrassmannApproxProblem {
    pub fn new(f: DMatrix<f64>, p: usize) -> Result<Self> {
        let (n, m) = f.shape();
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        if n > m {
            return Err(Error::InvalidInput(format!("expected n ≤ m, got {n}×{m}")));
        }
        if p == 0 || p >= n || p >= m {
            return Err(Error::InvalidInput(format!("need 1 ≤ p < n, got p={p}, n={n}")));
        }
        let problem = GrassmannApproxProblem { f, p };
        let sv = problem.sorted_svd().1;
        let tol = sv[0].max(1.0) * 1e-12 * m as f64;
        if sv.iter().filter(|&&s| s > tol).count() < n {
            return Err(Error::InvalidInput("matrix is not of full row rank".into()));
        }
        Ok(problem)
    }

    /// Seeded Gaussian `n×m` matrix (full rank with probability one).
    pub fn random(n: usize, m: usize, p: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        GrassmannApproxProblem::new(f, p)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> ManifoldKind {
        ManifoldKind::Grassmann {
            p: self.p,
            n: self.f.nrows(),
        }
    }

    /// Left singular vectors and singular values of `F`, sorted descending.
    fn sorted_svd(&self) -> (DMatrix<f64>, Vec<f64>) {
        let svd = self.f.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut sorted_u = DMatrix::zeros(u.nrows(), order.len());
        for (dst, &src) in order.iter().enumerate() {
            sorted_u.set_column(dst, &u.column(src));
        }
        let values = order.iter().map(|&i| svd.singular_values[i]).collect();
        (sorted_u, values)
    }

    /// Column-wise least-squares weights `W_j = (XᵀX)⁻¹ Xᵀ F_j`.
    pub fn approx_weights(&self, frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xtx = frame.transpose() * frame;
        let inv = xtx
            .try_inverse()
            .ok_or_else(|| Error::Domain("frame columns are linearly dependent".into()))?;
        let xt_f = frame.transpose() * &self.f;
        let mut w = DMatrix::zeros(frame.ncols(), self.f.ncols());
        for j in 0..self.f.ncols() {
            w.set_column(j, &(&inv * xt_f.column(j)));
        }
        Ok(w)
    }

    /// `‖XW − F‖_F` with `W` from [`Self::approx_weights`].
    pub fn value(&self, x: &ManifoldPoint) -> f64 {
        let frame = x.coords();
        match self.approx_weights(frame) {
            Ok(w) => (frame * w - &self.f).norm(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn svd_oracle(&self) -> Result<SvdOracle> {
        let (u, sv) = self.sorted_svd();
        let p = self.p;
        let value = sv[p..].iter().map(|s| s * s).sum::<f64>().sqrt();
        let unique = (sv[p - 1] - sv[p]).abs() >= 1e-10;
        if !unique {
            warn!("σ_p = σ_(p+1): the optimal subspace is not unique");
        }
        let point = ManifoldPoint::grassmann_span(&u.columns(0, p).into_owned())?;
        Ok(SvdOracle {
            point,
            value,
            singular_values: sv,
            unique,
        })
    }

    pub fn objective(&self) -> Result<Objective> {
        let oracle = self.svd_oracle()?;
        let problem = self.clone();
        Ok(Objective::new(self.kind(), move |x| problem.value(x)).with_oracle(oracle.point, oracle.value))
    }

    /// On the projector `P = XXᵀ` the objective is `√(‖F‖² − ⟨P, FFᵀ⟩)`, with
    /// ambient gradient `−FFᵀ / (2 f)`.
    pub fn grad_objective(&self) -> Result<GradObjective> {
        let problem = self.clone();
        let fft = &self.f * self.f.transpose();
        Ok(GradObjective::new(self.objective()?, move |x| {
            let value = problem.value(x);
            let g = if value > 0.0 {
                &fft * (-0.5 / value)
            } else {
                DMatrix::zeros(fft.nrows(), fft.ncols())
            };
            AmbientVector::new(x.kind(), g).expect("n×n gradient")
        }))
    }

    /// Initial design `X_i = Û + i(−1)^i / 2`, i = 1..count, where `Û` holds the
    /// top-p left singular vectors; each shifted matrix is retracted through
    /// `unembed(X_i X_iᵀ)`.
    pub fn shifted_svd_design(&self, count: usize) -> Result<Vec<ManifoldPoint>> {
        let (u, _) = self.sorted_svd();
        let u_hat = u.columns(0, self.p).into_owned();
        let kind = self.kind();
        (1..=count)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let shifted = u_hat.add_scalar(sign * i as f64 / 2.0);
                let proj = AmbientVector::new(kind, &shifted * shifted.transpose())?;
                unembed(kind, &proj)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Kernel regression with SPD responses

/// Weighted log-Euclidean Fréchet problem at one covariate location `z`:
/// `f(y) = Σ (1/h) K_h(z, z_i) ‖log y − log y_i‖²_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdRegressionProblem {
    covariates: Vec<f64>,
    responses: Vec<ManifoldPoint>,
    bandwidth: f64,
    query: f64,
}

/// Weights below this are treated as zero when checking the neighbourhood.
pub const MIN_KERNEL_WEIGHT: f64 = 1e-300;

/// `exp(−(z − z')² / 2h²)`.
pub fn gaussian_kernel(z: f64, z_other: f64, bandwidth: f64) -> f64 {
    let d = z - z_other;
    (-d * d / (2.0 * bandwidth * bandwidth)).exp()
}

impl SpdRegressionProblem {
    pub fn new(covariates: Vec<f64>, responses: Vec<ManifoldPoint>, bandwidth: f64, query: f64) -> Result<Self> {
        if covariates.len() != responses.len() || covariates.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} covariates but {} responses",
                covariates.len(),
                responses.len()
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !query.is_finite() || covariates.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("covariates must be finite".into()));
        }
        let kind = responses[0].kind();
        if !matches!(kind, ManifoldKind::Spd { .. }) {
            return Err(Error::Domain(format!("responses must be SPD, got {kind}")));
        }
        if let Some(bad) = responses.iter().find(|y| y.kind() != kind) {
            return Err(Error::KindMismatch {
                left: kind.to_string(),
                right: bad.kind().to_string(),
            });
        }
        Ok(SpdRegressionProblem {
            covariates,
            responses,
            bandwidth,
            query,
        })
    }

    /// Synthetic 3×3 tensors along `n` equispaced arc lengths in [0, 1]:
    /// `y_i = exp(A₀ + z_i A₁ + noise·E_i)` with fixed symmetric `A₀`, `A₁` and
    /// seeded Gaussian symmetric `E_i`. Bandwidth 0.1, query at the first arc length.
    pub fn generate(n: usize, noise: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("need at least two arc lengths".into()));
        }
        let a0 = DMatrix::from_row_slice(3, 3, &[0.8, 0.1, -0.2, 0.1, 0.3, 0.05, -0.2, 0.05, -0.4]);
        let a1 = DMatrix::from_row_slice(3, 3, &[0.5, -0.3, 0.0, -0.3, -0.6, 0.2, 0.0, 0.2, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let covariates: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let responses = covariates
            .iter()
            .map(|&z| {
                let e = gaussian_symmetric(3, &mut rng);
                ManifoldPoint::spd(linalg::sym_exp(&(&a0 + &a1 * z + e * noise)))
            })
            .collect::<Result<Vec<_>>>()?;
        SpdRegressionProblem::new(covariates, responses, 0.1, 0.0)
    }

    pub fn with_query(&self, query: f64) -> Result<Self> {
        SpdRegressionProblem::new(self.covariates.clone(), self.responses.clone(), self.bandwidth, query)
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        SpdRegressionProblem::new(self.covariates.clone(), self.responses.clone(), bandwidth, self.query)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.responses[0].kind()
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn responses(&self) -> &[ManifoldPoint] {
        &self.responses
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn query(&self) -> f64 {
        self.query
    }

    /// `(1/h) K_h(z, z_i)` for every observation.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let w: Vec<f64> = self
            .covariates
            .iter()
            .map(|&zi| gaussian_kernel(self.query, zi, self.bandwidth) / self.bandwidth)
            .collect();
        if w.iter().all(|&v| v < MIN_KERNEL_WEIGHT) {
            return Err(Error::EmptyNeighborhood {
                threshold: MIN_KERNEL_WEIGHT,
            });
        }
        Ok(w)
    }

    fn value_with(&self, weights: &[f64], y: &ManifoldPoint) -> f64 {
        weights
            .iter()
            .zip(&self.responses)
            .map(|(w, yi)| {
                let d = spd_intrinsic_distance(y, yi).unwrap_or(f64::INFINITY);
                w * d * d
            })
            .sum()
    }

    pub fn value(&self, y: &ManifoldPoint) -> Result<f64> {
        Ok(self.value_with(&self.weights()?, y))
    }

    fn weighted_log_mean(&self, weights: &[f64]) -> DMatrix<f64> {
        let p = self.kind().ambient_shape().0;
        let total: f64 = weights.iter().sum();
        let sum = weights
            .iter()
            .zip(&self.responses)
            .fold(DMatrix::zeros(p, p), |acc, (w, yi)| acc + embed(yi).matrix() * *w);
        sum / total
    }

    /// Closed-form log-Euclidean weighted mean `exp(Σ w_i log y_i / Σ w_i)`.
    pub fn weighted_mean_oracle(&self) -> Result<ManifoldPoint> {
        let weights = self.weights()?;
        ManifoldPoint::spd(linalg::sym_exp(&self.weighted_log_mean(&weights)))
    }

    pub fn objective(&self) -> Result<Objective> {
        let weights = self.weights()?;
        let oracle = self.weighted_mean_oracle()?;
        let value = self.value_with(&weights, &oracle);
        let problem = self.clone();
        Ok(Objective::new(self.kind(), move |y| problem.value_with(&weights, y)).with_oracle(oracle, value))
    }

    /// Ambient gradient in log coordinates: `2 Σ w_i (log y − log y_i)`.
    pub fn grad_objective(&self) -> Result<GradObjective> {
        let weights = self.weights()?;
        let total: f64 = weights.iter().sum();
        let mean = self.weighted_log_mean(&weights);
        Ok(GradObjective::new(self.objective()?, move |y| {
            AmbientVector::new(y.kind(), (embed(y).matrix() - &mean) * (2.0 * total))
                .expect("p×p gradient")
        }))
    }
}

// ---------------------------------------------------------------------------
// Side-by-side runs

/// Initial design size used for the SPD regression experiment. The cone is
/// unbounded, and a small design leaves the GP without the large-scale trend.
pub const SPD_REGRESSION_INIT: usize = 30;

/// Comparison optimizers to run next to eBO.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BaselinePlan {
    pub gd: Option<GdConfig>,
    pub nelder_mead: Option<NelderMeadConfig>,
}

#[derive(Debug)]
pub struct Comparison {
    pub ebo: std::result::Result<BoOutcome, BoAbort>,
    pub gd: Option<Result<BaselineOutcome>>,
    pub nelder_mead: Option<Result<BaselineOutcome>>,
    /// Shared starting point of the baselines.
    pub start: ManifoldPoint,
    /// Wall time per optimizer in milliseconds: eBO, GD, Nelder–Mead.
    pub wall_ms: [Option<f64>; 3],
}

/// Runs eBO and the requested baselines on one objective. Both baselines
/// start from the first point of eBO's initial design, so the three runs
/// begin with the same information.
pub fn compare(
    obj: &Objective,
    gradient: Option<&GradObjective>,
    cfg: &BoConfig,
    design: Option<&[ManifoldPoint]>,
    plan: &BaselinePlan,
) -> Result<Comparison> {
    if plan.gd.is_some() && gradient.is_none() {
        return Err(Error::InvalidInput("gradient descent needs an objective with a gradient".into()));
    }
    let start = match design {
        Some([first, ..]) => first.clone(),
        Some([]) => return Err(Error::InvalidInput("initial design is empty".into())),
        None => random_point_seeded(obj.kind(), cfg.seed),
    };
    let timed = |f: &mut dyn FnMut()| {
        let t = Instant::now();
        f();
        t.elapsed().as_secs_f64() * 1e3
    };
    let mut wall_ms = [None; 3];
    let mut ebo = None;
    wall_ms[0] = Some(timed(&mut || ebo = Some(bo::run_with_design(obj, cfg, design))));
    let mut gd = None;
    if let Some(g) = plan.gd {
        let grad = gradient.expect("checked above");
        wall_ms[1] = Some(timed(&mut || gd = Some(baselines::riemannian_gd(grad, &start, &g))));
    }
    let mut nelder_mead = None;
    if let Some(n) = plan.nelder_mead {
        wall_ms[2] = Some(timed(&mut || nelder_mead = Some(baselines::nelder_mead(obj, &start, &n))));
    }
    Ok(Comparison {
        ebo: ebo.expect("ran above"),
        gd,
        nelder_mead,
        start,
        wall_ms,
    })
}
