//! Probability-of-improvement acquisition and its maximization over the
//! embedded image of the manifold by projected gradient ascent.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::egp::GpModel;
use crate::error::{Error, Result};
use crate::manifolds::{
    embed, exp_map, project_to_tangent, random_point, AmbientVector, ManifoldPoint,
};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Below this the normal CDF is evaluated through its asymptotic series.
const LOG_CDF_ASYMPTOTIC: f64 = -37.0;

/// `ln Φ(x)`, accurate where Φ itself rounds to 0 or 1.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x >= LOG_CDF_ASYMPTOTIC {
        normal_cdf(x).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() + INV_SQRT_2PI.ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// `φ(x) / Φ(x)`, the derivative of [`log_normal_cdf`].
pub fn normal_mills_ratio(x: f64) -> f64 {
    if x >= LOG_CDF_ASYMPTOTIC {
        normal_pdf(x) / normal_cdf(x)
    } else {
        let x2 = x * x;
        -x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2))
    }
}

/// Ball in flat embedded coordinates that confines the acquisition search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBall {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl SearchBall {
    /// Smallest ball around the centroid of `points` that contains them all.
    pub fn enclosing(points: &[DVector<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("search ball needs points".into()))?;
        let center = points.iter().fold(DVector::zeros(first.len()), |acc, p| acc + p) / points.len() as f64;
        let radius = points.iter().map(|p| (p - &center).norm()).fold(0.0, f64::max);
        Ok(SearchBall { center, radius })
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (x - &self.center).norm() <= self.radius
    }
}

/// Random starts drawn per ascent start before falling back to the incumbent.
const MAX_START_DRAWS: usize = 100;

/// GP posterior plus the incumbent value, enough to score candidates.
#[derive(Debug, Clone)]
pub struct AcquisitionState {
    model: GpModel,
    f_best: f64,
    sigma_floor: f64,
    region: Option<SearchBall>,
}

impl AcquisitionState {
    /// Uses `sigma_floor = 1e-12·σ_f`.
    pub fn new(model: GpModel, f_best: f64) -> Result<Self> {
        let floor = 1e-12 * model.params().amplitude.sqrt();
        AcquisitionState::with_sigma_floor(model, f_best, floor)
    }

    pub fn with_sigma_floor(model: GpModel, f_best: f64, sigma_floor: f64) -> Result<Self> {
        if !f_best.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite incumbent value {f_best}")));
        }
        if !(sigma_floor > 0.0 && sigma_floor.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma floor must be positive, got {sigma_floor}")));
        }
        Ok(AcquisitionState {
            model,
            f_best,
            sigma_floor,
            region: None,
        })
    }

    /// Confines [`ascend`] and the random starts of [`maximize`] to `region`.
    pub fn with_region(mut self, region: SearchBall) -> Result<Self> {
        if region.center.len() != self.model.kind().ambient_dim() || !(region.radius >= 0.0) {
            return Err(Error::InvalidInput("search ball does not match the model".into()));
        }
        self.region = Some(region);
        Ok(self)
    }

    pub fn region(&self) -> Option<&SearchBall> {
        self.region.as_ref()
    }

    fn admits(&self, x: &ManifoldPoint) -> bool {
        self.region.as_ref().is_none_or(|r| r.contains(&embed(x).flat()))
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn f_best(&self) -> f64 {
        self.f_best
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    /// `Φ((f_best − ν) / max(σ, floor))` at a flat embedded point.
    pub fn pi_value_flat(&self, x: &DVector<f64>) -> Result<f64> {
        let post = self.model.posterior_flat(x)?;
        let sigma = post.std_dev().max(self.sigma_floor);
        Ok(normal_cdf((self.f_best - post.mean) / sigma))
    }

    pub fn pi_value(&self, x: &ManifoldPoint) -> Result<f64> {
        self.pi_value_flat(&embed(x).flat())
    }

    /// Value and Euclidean gradient of the acquisition at a flat embedded point.
    pub fn pi_gradient_flat(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let pg = self.model.posterior_gradient_flat(x)?;
        let raw_sigma = pg.posterior.std_dev();
        let (sigma, sigma_grad) = if raw_sigma > self.sigma_floor {
            (raw_sigma, &pg.variance_grad / (2.0 * raw_sigma))
        } else {
            (self.sigma_floor, DVector::zeros(x.len()))
        };
        let r = (self.f_best - pg.posterior.mean) / sigma;
        let density = normal_pdf(r);
        let value = normal_cdf(r);
        if density == 0.0 {
            return Ok((value, DVector::zeros(x.len())));
        }
        // ∇r = (−∇ν − r ∇σ) / σ
        let r_grad = (-&pg.mean_grad - sigma_grad * r) / sigma;
        Ok((value, r_grad * density))
    }

    /// `ln PI` and its Euclidean gradient at a flat embedded point. Same
    /// maximizers as PI, but neither saturates at 1 nor underflows at 0.
    pub fn log_pi_gradient_flat(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let pg = self.model.posterior_gradient_flat(x)?;
        let raw_sigma = pg.posterior.std_dev();
        let (sigma, sigma_grad) = if raw_sigma > self.sigma_floor {
            (raw_sigma, &pg.variance_grad / (2.0 * raw_sigma))
        } else {
            (self.sigma_floor, DVector::zeros(x.len()))
        };
        let r = (self.f_best - pg.posterior.mean) / sigma;
        let r_grad = (-&pg.mean_grad - sigma_grad * r) / sigma;
        Ok((log_normal_cdf(r), r_grad * normal_mills_ratio(r)))
    }

    pub fn log_pi_value(&self, x: &ManifoldPoint) -> Result<f64> {
        let post = self.model.posterior_flat(&embed(x).flat())?;
        let sigma = post.std_dev().max(self.sigma_floor);
        Ok(log_normal_cdf((self.f_best - post.mean) / sigma))
    }

    /// Euclidean gradient of the acquisition at `J(x)`, in ambient form.
    pub fn pi_gradient_ambient(&self, x: &ManifoldPoint) -> Result<AmbientVector> {
        let (_, grad) = self.pi_gradient_flat(&embed(x).flat())?;
        AmbientVector::from_flat(x.kind(), &grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    /// Step size λ applied to the projected gradient.
    pub step: f64,
    pub max_steps: usize,
    /// Stop once the projected gradient norm falls below this.
    pub grad_tol: f64,
    /// Number of ascent starts used by [`maximize`].
    pub n_starts: usize,
    /// Halvings of λ tried before a step is abandoned.
    pub max_backtracks: usize,
    pub seed: u64,
}

impl AscentConfig {
    /// λ = 0.1·ℓ, T = 200, tolerance 1e-8, 10 starts, 20 halvings.
    pub fn for_lengthscale(lengthscale: f64, seed: u64) -> Self {
        AscentConfig {
            step: 0.1 * lengthscale,
            max_steps: 200,
            grad_tol: 1e-8,
            n_starts: 10,
            max_backtracks: 20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step > 0.0
            && self.step.is_finite()
            && self.max_steps > 0
            && self.grad_tol > 0.0
            && self.n_starts > 0
        {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid ascent configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub point: ManifoldPoint,
    /// Acquisition value at `point`.
    pub value: f64,
    /// Its logarithm, which keeps ranking points where PI rounds to 0 or 1.
    pub log_value: f64,
    /// Accepted steps.
    pub steps: usize,
}

/// Projected gradient ascent of the acquisition along the image manifold,
/// `x_{t+1} = exp_{x_t}(λ 𝒫 grad ã)`, with step halving whenever a step fails
/// to increase the acquisition. Only improving steps are accepted, so the
/// returned iterate is the best one visited.
///
/// The ascent runs on `ln PI`, whose gradient is the PI gradient rescaled by
/// `1/PI`; the maximizers are the same.
pub fn ascend(
    state: &AcquisitionState,
    config: &AscentConfig,
    x0: &ManifoldPoint,
) -> Result<AscentResult> {
    config.validate()?;
    if x0.kind() != state.model.kind() {
        return Err(Error::KindMismatch {
            left: state.model.kind().to_string(),
            right: x0.kind().to_string(),
        });
    }
    let mut x = x0.clone();
    let mut value = state.log_pi_value(&x)?;
    let mut steps = 0;
    for _ in 0..config.max_steps {
        let (_, grad) = state.log_pi_gradient_flat(&embed(&x).flat())?;
        let direction = project_to_tangent(&x, &AmbientVector::from_flat(x.kind(), &grad)?)?;
        if direction.norm() < config.grad_tol {
            break;
        }
        let mut lambda = config.step;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            // Steps the retraction cannot represent, or that leave the search
            // region, count as rejected.
            let candidate = match exp_map(&x, &direction, lambda) {
                Ok(c) if state.admits(&c) => c,
                _ => {
                    lambda *= 0.5;
                    continue;
                }
            };
            let cand_value = state.log_pi_value(&candidate)?;
            if cand_value > value {
                accepted = Some((candidate, cand_value));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((next, next_value)) => {
                x = next;
                value = next_value;
                steps += 1;
            }
            None => break,
        }
    }
    Ok(AscentResult {
        point: x,
        value: value.exp(),
        log_value: value,
        steps,
    })
}

/// Best observed point of the model's dataset (lowest value, first on ties).
fn incumbent(state: &AcquisitionState) -> Option<ManifoldPoint> {
    let data = state.model.data();
    data.values()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| data.points()[i].clone())
}

/// Runs [`ascend`] from the best observed point and `n_starts − 1` random
/// points drawn from `config.seed` (redrawn until they fall inside the search
/// region, if any), and returns the start with the highest
/// final acquisition (lowest start index on ties).
pub fn maximize(state: &AcquisitionState, config: &AscentConfig) -> Result<AscentResult> {
    config.validate()?;
    let kind = state.model.kind();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = Vec::with_capacity(config.n_starts);
    if let Some(best) = incumbent(state) {
        starts.push(best);
    }
    while starts.len() < config.n_starts {
        let drawn = (0..MAX_START_DRAWS)
            .map(|_| random_point(kind, &mut rng))
            .find(|x| state.admits(x));
        match (drawn, starts.first()) {
            (Some(x), _) => starts.push(x),
            (None, Some(best)) => starts.push(best.clone()),
            (None, None) => return Err(Error::Domain("no random start inside the search region".into())),
        }
    }
    maximize_from(state, config, &starts)
}

/// Multistart ascent from explicit starting points.
pub fn maximize_from(
    state: &AcquisitionState,
    config: &AscentConfig,
    starts: &[ManifoldPoint],
) -> Result<AscentResult> {
    let results: Vec<Result<AscentResult>> = starts
        .par_iter()
        .map(|x0| ascend(state, config, x0))
        .collect();
    let mut best: Option<AscentResult> = None;
    let mut last_err = None;
    for result in results {
        match result {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.log_value > b.log_value) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::InvalidInput("maximize called without starts".into()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egp::{GpDataset, KernelParams};
    use crate::manifolds::{random_point_seeded, ManifoldKind};

    fn state(points: Vec<ManifoldPoint>, values: Vec<f64>, params: KernelParams) -> AcquisitionState {
        let f_best = values.iter().copied().fold(f64::INFINITY, f64::min);
        let data = GpDataset::from_points(points, values).unwrap();
        AcquisitionState::new(GpModel::new(params, data).unwrap(), f_best).unwrap()
    }

    #[test]
    fn normal_cdf_properties() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        for x in [0.1, 0.7, 1.96, 3.0, 8.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-12);
        }
        assert!((normal_cdf(1.96) - 0.975).abs() < 1e-4);
    }

    #[test]
    fn pi_value_examples() {
        let x = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let z = ManifoldPoint::sphere(&[0.0, 1.0, 0.0]).unwrap();
        let params = KernelParams::new(1.0, 1.0, 0.0).unwrap();
        let st = state(vec![x.clone(), z], vec![-1.0, 2.0], params);
        let at_best = st.pi_value(&x).unwrap();
        // Noise-free interpolation leaves only the jitter's trace at the data.
        assert!((at_best - 0.5).abs() < 1e-3, "{at_best}");

        // ν = f_best − 1.96σ: build a state whose f_best is shifted accordingly.
        let q = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        let post = st.model().posterior(&q).unwrap();
        let shifted = AcquisitionState::new(st.model().clone(), post.mean + 1.96 * post.std_dev()).unwrap();
        assert!((shifted.pi_value(&q).unwrap() - 0.975).abs() < 1e-3);

        let low = AcquisitionState::with_sigma_floor(st.model().clone(), -1e6, 1e-12).unwrap();
        assert!(low.pi_value(&q).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_underflow_gives_zero() {
        let x = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let params = KernelParams::new(1.0, 1.0, 0.0).unwrap();
        let st = state(vec![x.clone()], vec![5.0], params);
        let deep = AcquisitionState::new(st.model().clone(), -1e6).unwrap();
        let g = deep.pi_gradient_ambient(&x).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let kind = ManifoldKind::sphere(2).unwrap();
        let points: Vec<_> = (0..5).map(|s| random_point_seeded(kind, 100 + s)).collect();
        let values: Vec<f64> = points.iter().map(|p| p.coords()[2] + p.coords()[0].powi(2)).collect();
        let st = state(points, values, KernelParams::new(0.8, 1.0, 1e-4).unwrap());
        let q = embed(&random_point_seeded(kind, 7)).flat();
        let (_, grad) = st.pi_gradient_flat(&q).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut plus = q.clone();
            let mut minus = q.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (st.pi_value_flat(&plus).unwrap() - st.pi_value_flat(&minus).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * grad.norm().max(1e-12), "{fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn symmetric_midpoint_is_stationary() {
        // Two equal-valued data points symmetric about the x axis: the acquisition
        // is symmetric under y ↦ −y, so its projected gradient at (1,0,0) has no y
        // component and, with z symmetry too, vanishes.
        let a = ManifoldPoint::sphere(&[0.0, 1.0, 0.0]).unwrap();
        let b = ManifoldPoint::sphere(&[0.0, -1.0, 0.0]).unwrap();
        let st = state(vec![a, b], vec![1.0, 1.0], KernelParams::new(1.0, 1.0, 1e-6).unwrap());
        let mid = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let g = st.pi_gradient_ambient(&mid).unwrap();
        let proj = project_to_tangent(&mid, &g).unwrap();
        assert!(proj.norm() < 1e-6);

        let cfg = AscentConfig::for_lengthscale(1.0, 0);
        let res = ascend(&st, &cfg, &mid).unwrap();
        assert_eq!(res.point, mid);
        assert_eq!(res.steps, 0);
    }

    #[test]
    fn ascent_is_monotone_and_beats_probes() {
        let kind = ManifoldKind::sphere(2).unwrap();
        let data_point = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        let st = state(vec![data_point], vec![0.0], KernelParams::new(0.7, 1.0, 1e-6).unwrap());
        let cfg = AscentConfig::for_lengthscale(0.7, 1);
        let x0 = ManifoldPoint::sphere(&[0.6, 0.0, 0.8]).unwrap();
        let a0 = st.pi_value(&x0).unwrap();
        let res = ascend(&st, &cfg, &x0).unwrap();
        assert!(res.value >= a0);
        let probe_best = (0..100)
            .map(|s| st.pi_value(&random_point_seeded(kind, 1000 + s)).unwrap())
            .fold(0.0, f64::max);
        assert!(res.value >= probe_best - 1e-3, "{} vs {probe_best}", res.value);
    }

    #[test]
    fn maximize_beats_random_search() {
        let kind = ManifoldKind::sphere(2).unwrap();
        let points: Vec<_> = (0..3).map(|s| random_point_seeded(kind, 40 + s)).collect();
        let values = vec![0.3, -0.2, 0.9];
        let st = state(points, values, KernelParams::new(0.9, 0.5, 1e-6).unwrap());
        let cfg = AscentConfig::for_lengthscale(0.9, 5);
        let best = maximize(&st, &cfg).unwrap();
        let search = (0..500)
            .map(|s| st.pi_value(&random_point_seeded(kind, 5000 + s)).unwrap())
            .fold(0.0, f64::max);
        assert!(best.value >= search - 1e-2);
        assert_eq!(maximize(&st, &cfg).unwrap(), best);

        let single = AscentConfig { n_starts: 1, ..cfg };
        let incumbent = st.model().data().points()[1].clone();
        assert_eq!(maximize(&st, &single).unwrap(), ascend(&st, &single, &incumbent).unwrap());
    }
}
