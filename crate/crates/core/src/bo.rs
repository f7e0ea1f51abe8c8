//! The extrinsic Bayesian optimization outer loop.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{maximize, AcquisitionState, AscentConfig, SearchBall};
use crate::egp::{fit_hyperparams, FitConfig, GpDataset, GpModel, HyperBounds, KernelParams};
use crate::error::{Error, Result};
use crate::manifolds::{
    exp_map, extrinsic_distance, random_point, random_unit_tangent, ManifoldKind, ManifoldPoint,
};
use crate::trace::{RunTrace, TraceRecord};

/// Proposals closer than this (extrinsic distance) to an evaluated point are perturbed.
pub const DEDUP_DISTANCE: f64 = 1e-8;

pub type ObjectiveFn = Arc<dyn Fn(&ManifoldPoint) -> f64 + Send + Sync>;

/// A black-box objective on a manifold. Only values are ever requested.
#[derive(Clone)]
pub struct Objective {
    kind: ManifoldKind,
    eval: ObjectiveFn,
    oracle: Option<(ManifoldPoint, f64)>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("kind", &self.kind)
            .field("oracle", &self.oracle)
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn new(kind: ManifoldKind, eval: impl Fn(&ManifoldPoint) -> f64 + Send + Sync + 'static) -> Self {
        Objective {
            kind,
            eval: Arc::new(eval),
            oracle: None,
        }
    }

    /// Attaches the known minimizer and minimum value, used for error traces.
    pub fn with_oracle(mut self, point: ManifoldPoint, value: f64) -> Self {
        self.oracle = Some((point, value));
        self
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn oracle(&self) -> Option<&(ManifoldPoint, f64)> {
        self.oracle.as_ref()
    }

    pub fn eval(&self, x: &ManifoldPoint) -> f64 {
        (self.eval)(x)
    }

    /// Extrinsic distance from `x` to the oracle minimizer.
    pub fn error_to_oracle(&self, x: &ManifoldPoint) -> Option<f64> {
        self.oracle
            .as_ref()
            .and_then(|(opt, _)| extrinsic_distance(x, opt).ok())
    }
}

/// Kernel hyperparameters: fixed, or derived from the initial design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    /// Median-heuristic defaults (see [`KernelParams::median_heuristic`]).
    Auto,
    Fixed(KernelParams),
}

/// Acquisition ascent settings; `step = None` means λ = 0.1·ℓ for the current model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentSettings {
    pub step: Option<f64>,
    pub max_steps: usize,
    pub grad_tol: f64,
    pub n_starts: usize,
    pub max_backtracks: usize,
}

impl Default for AscentSettings {
    fn default() -> Self {
        AscentSettings {
            step: None,
            max_steps: 200,
            grad_tol: 1e-8,
            n_starts: 10,
            max_backtracks: 20,
        }
    }
}

impl AscentSettings {
    pub fn resolve(&self, lengthscale: f64, seed: u64) -> AscentConfig {
        AscentConfig {
            step: self.step.unwrap_or(0.1 * lengthscale),
            max_steps: self.max_steps,
            grad_tol: self.grad_tol,
            n_starts: self.n_starts,
            max_backtracks: self.max_backtracks,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoConfig {
    /// Initial random design size k.
    pub init: usize,
    /// Outer iterations T.
    pub iters: usize,
    /// Refit hyperparameters after the initial design and then every this
    /// many iterations; 0 disables fitting.
    pub refit_every: usize,
    pub ascent: AscentSettings,
    pub kernel: KernelChoice,
    /// Subtract the mean observed value before conditioning the zero-mean GP.
    pub center_values: bool,
    /// Hyperparameter bounds as multiples of the initial design's median
    /// heuristic; see [`HyperBounds::scaled_to`].
    pub bound_factors: HyperBounds,
    /// On non-compact manifolds, confine the acquisition search to the
    /// smallest embedded ball around the initial design's centroid that
    /// contains the design. Ignored on compact manifolds.
    pub bounded_search: bool,
    pub seed: u64,
}

impl BoConfig {
    pub fn new(init: usize, iters: usize, seed: u64) -> Self {
        BoConfig {
            init,
            iters,
            refit_every: 5,
            ascent: AscentSettings::default(),
            kernel: KernelChoice::Auto,
            center_values: true,
            bound_factors: HyperBounds::DEFAULT_FACTORS,
            bounded_search: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bound_factors.validate()?;
        if self.init == 0 {
            return Err(Error::InvalidInput("initial design size must be at least 1".into()));
        }
        if let KernelChoice::Fixed(p) = self.kernel {
            p.validate()?;
        }
        let a = &self.ascent;
        if a.n_starts == 0 || a.max_steps == 0 || !(a.grad_tol > 0.0) {
            return Err(Error::InvalidInput(format!("invalid ascent settings {a:?}")));
        }
        if let Some(step) = a.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid ascent step {step}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BoOutcome {
    pub best_point: ManifoldPoint,
    pub best_value: f64,
    pub trace: RunTrace,
    pub dataset: GpDataset,
    pub params: KernelParams,
    /// Objective evaluations, including the initial design.
    pub evaluations: usize,
}

/// A run that stopped early; carries everything recorded before the failure.
#[derive(Debug, Clone)]
pub struct BoAbort {
    pub error: Error,
    pub trace: RunTrace,
    pub best: Option<(ManifoldPoint, f64)>,
    pub evaluations: usize,
}

impl fmt::Display for BoAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run aborted after {} iterations: {}",
            self.trace.len(),
            self.error
        )
    }
}

impl std::error::Error for BoAbort {}

/// Replaces a proposal that coincides with an evaluated point by a random
/// tangent step of length `0.1·ℓ` from it.
pub fn proposal_dedup<R: Rng + ?Sized>(
    data: &GpDataset,
    x_next: ManifoldPoint,
    lengthscale: f64,
    rng: &mut R,
) -> Result<ManifoldPoint> {
    let too_close = |x: &ManifoldPoint| -> Result<bool> {
        for p in data.points() {
            if extrinsic_distance(x, p)? < DEDUP_DISTANCE {
                return Ok(true);
            }
        }
        Ok(false)
    };
    if !too_close(&x_next)? {
        return Ok(x_next);
    }
    let mut candidate = x_next.clone();
    for _ in 0..16 {
        let v = random_unit_tangent(&x_next, rng);
        candidate = exp_map(&x_next, &v, 0.1 * lengthscale)?;
        if !too_close(&candidate)? {
            debug!("duplicate proposal perturbed");
            return Ok(candidate);
        }
    }
    Ok(candidate)
}

struct Incumbent {
    point: ManifoldPoint,
    value: f64,
}

fn build_state(
    data: &GpDataset,
    params: KernelParams,
    cfg: &BoConfig,
    region: Option<&SearchBall>,
    f_best: f64,
) -> Result<AcquisitionState> {
    let center = cfg.center_values;
    let offset = if center {
        data.values().iter().sum::<f64>() / data.len() as f64
    } else {
        0.0
    };
    let shifted = data.map_values(|y| y - offset)?;
    let state = AcquisitionState::new(GpModel::new(params, shifted)?, f_best - offset)?;
    match region {
        Some(r) => state.with_region(r.clone()),
        None => Ok(state),
    }
}

fn refit(data: &GpDataset, params: KernelParams, bounds: &HyperBounds, center: bool, seed: u64) -> KernelParams {
    if data.len() < 2 {
        return params;
    }
    let offset = if center {
        data.values().iter().sum::<f64>() / data.len() as f64
    } else {
        0.0
    };
    let Ok(shifted) = data.map_values(|y| y - offset) else {
        return params;
    };
    let config = FitConfig {
        seed,
        ..FitConfig::default()
    };
    match fit_hyperparams(&shifted, &params, bounds, &config) {
        Ok(p) => p,
        Err(e) => {
            debug!("hyperparameter fit failed ({e}); keeping previous parameters");
            params
        }
    }
}

/// Runs eBO: a random initial design of size k, then T rounds of
/// acquisition maximization, evaluation and incumbent update.
pub fn run(obj: &Objective, cfg: &BoConfig) -> std::result::Result<BoOutcome, BoAbort> {
    run_with_design(obj, cfg, None)
}

/// Like [`run`], but evaluates the given points as the initial design instead
/// of drawing `cfg.init` random ones.
pub fn run_with_design(
    obj: &Objective,
    cfg: &BoConfig,
    design: Option<&[ManifoldPoint]>,
) -> std::result::Result<BoOutcome, BoAbort> {
    let mut trace = RunTrace::new();
    let abort = |error: Error, trace: RunTrace, inc: Option<&Incumbent>, evaluations: usize| BoAbort {
        error,
        trace,
        best: inc.map(|i| (i.point.clone(), i.value)),
        evaluations,
    };
    let mut cfg = cfg.clone();
    if let Some(points) = design {
        cfg.init = points.len();
    }
    if let Err(e) = cfg.validate() {
        return Err(abort(e, trace, None, 0));
    }
    let kind = obj.kind();
    if let Some(bad) = design.into_iter().flatten().find(|x| x.kind() != kind) {
        let err = Error::KindMismatch {
            left: kind.to_string(),
            right: bad.kind().to_string(),
        };
        return Err(abort(err, trace, None, 0));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = GpDataset::new(kind);
    let mut incumbent: Option<Incumbent> = None;

    for i in 0..cfg.init {
        let x = match design {
            Some(points) => points[i].clone(),
            None => random_point(kind, &mut rng),
        };
        let y = obj.eval(&x);
        if !y.is_finite() {
            let err = Error::NonFiniteObjective { value: y, iteration: 0 };
            return Err(abort(err, trace, incumbent.as_ref(), i + 1));
        }
        if incumbent.as_ref().is_none_or(|inc| y < inc.value) {
            incumbent = Some(Incumbent {
                point: x.clone(),
                value: y,
            });
        }
        data.push(x, y).expect("kind and value checked");
    }

    let mut params = match cfg.kernel {
        KernelChoice::Auto => KernelParams::median_heuristic(&data),
        KernelChoice::Fixed(p) => p,
    };
    let bounds = HyperBounds::scaled_to(&data, &cfg.bound_factors);
    let region = if cfg.bounded_search && !kind.is_compact() {
        Some(SearchBall::enclosing(data.embedded()).expect("initial design is non-empty"))
    } else {
        None
    };
    if cfg.refit_every > 0 {
        params = refit(&data, params, &bounds, cfg.center_values, rng.next_u64());
    }

    for s in 0..cfg.iters {
        let inc = incumbent.as_ref().expect("initial design is non-empty");
        if cfg.refit_every > 0 && s > 0 && s % cfg.refit_every == 0 {
            params = refit(&data, params, &bounds, cfg.center_values, rng.next_u64());
        }
        let state = match build_state(&data, params, &cfg, region.as_ref(), inc.value) {
            Ok(st) => st,
            Err(e) => return Err(abort(e, trace, Some(inc), data.len())),
        };
        let ascent = cfg.ascent.resolve(params.lengthscale, rng.next_u64());
        let proposal = match maximize(&state, &ascent) {
            Ok(r) => r.point,
            Err(e) => return Err(abort(e, trace, Some(inc), data.len())),
        };
        let x_next = match proposal_dedup(&data, proposal, params.lengthscale, &mut rng) {
            Ok(x) => x,
            Err(e) => return Err(abort(e, trace, Some(inc), data.len())),
        };
        let y = obj.eval(&x_next);
        if !y.is_finite() {
            let err = Error::NonFiniteObjective {
                value: y,
                iteration: s + 1,
            };
            return Err(abort(err, trace, Some(inc), data.len() + 1));
        }
        if y < inc.value {
            incumbent = Some(Incumbent {
                point: x_next.clone(),
                value: y,
            });
        }
        let inc = incumbent.as_ref().expect("set above");
        trace.push(TraceRecord {
            iter: s + 1,
            point: x_next.clone(),
            f_next: y,
            f_best: inc.value,
            best_point: inc.point.clone(),
            err_to_oracle: obj.error_to_oracle(&inc.point),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        data.push(x_next, y).expect("kind and value checked");
    }

    let inc = incumbent.expect("initial design is non-empty");
    info!(
        "eBO finished: {} evaluations, best value {:.6e}",
        data.len(),
        inc.value
    );
    Ok(BoOutcome {
        best_point: inc.point,
        best_value: inc.value,
        evaluations: data.len(),
        trace,
        dataset: data,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::random_point_seeded;

    fn sphere_linear() -> Objective {
        let kind = ManifoldKind::sphere(2).unwrap();
        Objective::new(kind, |x| x.coords()[2])
    }

    #[test]
    fn zero_iterations_returns_best_initial() {
        let obj = sphere_linear();
        let cfg = BoConfig::new(6, 0, 3);
        let out = run(&obj, &cfg).unwrap();
        let min = out.dataset.values().iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_value, min);
        assert!(out.trace.is_empty());
        assert_eq!(out.evaluations, 6);
    }

    #[test]
    fn constant_objective_keeps_incumbent() {
        let kind = ManifoldKind::sphere(2).unwrap();
        let obj = Objective::new(kind, |_| 3.5);
        let out = run(&obj, &BoConfig::new(3, 5, 1)).unwrap();
        assert!(out.trace.records().iter().all(|r| r.f_best == 3.5));
        assert_eq!(out.dataset.len(), 8);
    }

    #[test]
    fn incumbent_is_running_minimum() {
        let obj = sphere_linear();
        let cfg = BoConfig::new(3, 8, 9);
        let out = run(&obj, &cfg).unwrap();
        let values = out.dataset.values();
        for r in out.trace.records() {
            let running = values[..3 + r.iter].iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(r.f_best, running);
        }
        let again = run(&obj, &cfg).unwrap();
        assert_eq!(out.trace.to_csv(false), again.trace.to_csv(false));
    }

    #[test]
    fn non_finite_objective_aborts_with_trace() {
        let kind = ManifoldKind::sphere(2).unwrap();
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let obj = Objective::new(kind, move |x| {
            let n = counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if n >= 5 {
                f64::NAN
            } else {
                x.coords()[0]
            }
        });
        let err = run(&obj, &BoConfig::new(3, 10, 0)).unwrap_err();
        assert!(matches!(err.error, Error::NonFiniteObjective { .. }));
        assert_eq!(err.trace.len(), 2);
        assert!(err.best.is_some());
    }

    #[test]
    fn dedup_examples() {
        let kind = ManifoldKind::sphere(2).unwrap();
        let pts: Vec<_> = (0..3).map(|s| random_point_seeded(kind, s)).collect();
        let data = GpDataset::from_points(pts.clone(), vec![0.0, 1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let far = random_point_seeded(kind, 99);
        assert_eq!(proposal_dedup(&data, far.clone(), 0.5, &mut rng).unwrap(), far);
        let moved = proposal_dedup(&data, pts[1].clone(), 0.5, &mut rng).unwrap();
        for p in &pts {
            assert!(extrinsic_distance(&moved, p).unwrap() >= DEDUP_DISTANCE);
        }
        assert!((moved.coords().norm() - 1.0).abs() < 1e-12);
    }
}
