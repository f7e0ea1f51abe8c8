//! Comparison optimizers: Riemannian gradient descent for objectives with an
//! analytic gradient, and Nelder–Mead run in flat embedded coordinates.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use crate::bo::Objective;
use crate::error::{Error, Result};
use crate::manifolds::{
    embed, exp_map, project_to_tangent, unembed, AmbientVector, ManifoldPoint,
};
use crate::trace::{RunTrace, TraceRecord};

pub type GradientFn = Arc<dyn Fn(&ManifoldPoint) -> AmbientVector + Send + Sync>;

/// An objective with an ambient gradient at `J(x)`. Only the tangent
/// component of the gradient matters: it must match the derivative of
/// `f ∘ unembed` at `J(x)`.
#[derive(Clone)]
pub struct GradObjective {
    base: Objective,
    grad: GradientFn,
}

impl fmt::Debug for GradObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradObjective")
            .field("base", &self.base)
            .finish_non_exhaustive()
    }
}

impl GradObjective {
    pub fn new(
        base: Objective,
        grad: impl Fn(&ManifoldPoint) -> AmbientVector + Send + Sync + 'static,
    ) -> Self {
        GradObjective {
            base,
            grad: Arc::new(grad),
        }
    }

    pub fn base(&self) -> &Objective {
        &self.base
    }

    pub fn grad(&self, x: &ManifoldPoint) -> AmbientVector {
        (self.grad)(x)
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub best_point: ManifoldPoint,
    pub best_value: f64,
    pub trace: RunTrace,
    /// Objective evaluations, including the starting point.
    pub evaluations: usize,
    pub gradient_evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    /// Initial step, restored at every iteration before backtracking.
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the projected gradient norm falls below this.
    pub tol: f64,
    pub max_backtracks: usize,
    /// Cap on objective plus gradient evaluations, the starting point included.
    pub max_oracle_calls: Option<usize>,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            step: 0.5,
            max_iters: 100,
            tol: 1e-10,
            max_backtracks: 30,
            max_oracle_calls: None,
        }
    }
}

fn record(
    trace: &mut RunTrace,
    obj: &Objective,
    iter: usize,
    point: &ManifoldPoint,
    value: f64,
    best: &(ManifoldPoint, f64),
    start: Instant,
) {
    trace.push(TraceRecord {
        iter,
        point: point.clone(),
        f_next: value,
        f_best: best.1,
        best_point: best.0.clone(),
        err_to_oracle: obj.error_to_oracle(&best.0),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    });
}

/// `x_{t+1} = exp_{x_t}(−step · 𝒫 grad f)`, halving the step until the
/// objective strictly decreases. Stops on a small projected gradient, on
/// `max_iters`, on the oracle-call budget, or when no halving produces a
/// decrease.
pub fn riemannian_gd(obj: &GradObjective, x0: &ManifoldPoint, cfg: &GdConfig) -> Result<BaselineOutcome> {
    if !(cfg.step > 0.0 && cfg.tol > 0.0) {
        return Err(Error::InvalidInput(format!("invalid gradient descent config {cfg:?}")));
    }
    let base = &obj.base;
    let start = Instant::now();
    let mut x = x0.clone();
    let mut fx = base.eval(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective { value: fx, iteration: 0 });
    }
    let mut evaluations = 1;
    let mut gradient_evaluations = 0;
    let mut trace = RunTrace::new();
    let budget = cfg.max_oracle_calls.unwrap_or(usize::MAX);
    for t in 0..cfg.max_iters {
        // a step needs one gradient and at least one trial evaluation
        if evaluations + gradient_evaluations + 2 > budget {
            break;
        }
        let g = obj.grad(&x);
        gradient_evaluations += 1;
        let v = project_to_tangent(&x, &g)?;
        if v.norm() < cfg.tol {
            break;
        }
        let descent = v.scaled(-1.0);
        let mut step = cfg.step;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            if evaluations + gradient_evaluations >= budget {
                break;
            }
            // a step too long to retract (SPD exponential overflow) counts as a failed trial
            if let Ok(cand) = exp_map(&x, &descent, step) {
                let fc = base.eval(&cand);
                evaluations += 1;
                if fc < fx {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            break;
        };
        x = next;
        fx = f_next;
        let best = (x.clone(), fx);
        record(&mut trace, base, t + 1, &x, fx, &best, start);
    }
    Ok(BaselineOutcome {
        best_point: x,
        best_value: fx,
        trace,
        evaluations,
        gradient_evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop once every vertex lies within this distance of the best one.
    pub tol: f64,
    /// Axis perturbation used to build the initial simplex.
    pub initial_scale: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evals: 200,
            tol: 1e-8,
            initial_scale: 0.1,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Vertex {
    flat: DVector<f64>,
    value: f64,
}

struct RetractedObjective<'a> {
    obj: &'a Objective,
    evaluations: usize,
    max_evals: usize,
    best: (ManifoldPoint, f64),
    trace: RunTrace,
    start: Instant,
}

impl RetractedObjective<'_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.max_evals
    }

    fn eval_point(&mut self, x: &ManifoldPoint) -> f64 {
        self.evaluations += 1;
        let value = self.obj.eval(x);
        let value = if value.is_finite() { value } else { f64::INFINITY };
        if value < self.best.1 {
            self.best = (x.clone(), value);
        }
        record(
            &mut self.trace,
            self.obj,
            self.evaluations,
            x,
            value,
            &self.best,
            self.start,
        );
        value
    }

    /// Evaluates `f(unembed(v))`; candidates that cannot be retracted score +∞
    /// and are not counted as objective evaluations.
    fn eval_flat(&mut self, flat: &DVector<f64>) -> f64 {
        let kind = self.obj.kind();
        match AmbientVector::from_flat(kind, flat).and_then(|v| unembed(kind, &v)) {
            Ok(x) => self.eval_point(&x),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½) in the
/// flat embedding coordinates. The simplex lives in the ambient space; every
/// vertex is retracted onto the manifold through `unembed` before the
/// objective sees it, so the initial axis perturbations of `J(x0)` are
/// evaluated at their retractions without collapsing the simplex.
pub fn nelder_mead(obj: &Objective, x0: &ManifoldPoint, cfg: &NelderMeadConfig) -> Result<BaselineOutcome> {
    if cfg.max_evals == 0 || !(cfg.tol > 0.0) || !(cfg.initial_scale > 0.0) {
        return Err(Error::InvalidInput(format!("invalid Nelder-Mead config {cfg:?}")));
    }
    let kind = obj.kind();
    if x0.kind() != kind {
        return Err(Error::KindMismatch {
            left: kind.to_string(),
            right: x0.kind().to_string(),
        });
    }
    let dim = kind.ambient_dim();
    let mut f = RetractedObjective {
        obj,
        evaluations: 0,
        max_evals: cfg.max_evals,
        best: (x0.clone(), f64::INFINITY),
        trace: RunTrace::new(),
        start: Instant::now(),
    };

    let v0 = embed(x0).flat();
    let f0 = f.eval_point(x0);
    let mut simplex = vec![Vertex { flat: v0.clone(), value: f0 }];
    for i in 0..dim {
        if f.exhausted() {
            break;
        }
        let mut v = v0.clone();
        v[i] += cfg.initial_scale;
        let value = f.eval_flat(&v);
        simplex.push(Vertex { flat: v, value });
    }

    // Rejected candidates are free, so also cap the number of simplex updates.
    let mut rounds = 0;
    while simplex.len() == dim + 1 && !f.exhausted() && rounds < 10 * cfg.max_evals {
        rounds += 1;
        // Stable sort keeps earlier vertices first on ties.
        simplex.sort_by(|a, b| a.value.total_cmp(&b.value));
        let best = &simplex[0].flat;
        let diameter = simplex[1..]
            .iter()
            .map(|v| (&v.flat - best).norm())
            .fold(0.0, f64::max);
        if diameter < cfg.tol {
            break;
        }
        let n = dim;
        let centroid = simplex[..n]
            .iter()
            .fold(DVector::zeros(dim), |acc, v| acc + &v.flat)
            / n as f64;
        let worst = simplex[n].value;
        let second_worst = simplex[n - 1].value;
        let best_value = simplex[0].value;

        let reflected = &centroid + (&centroid - &simplex[n].flat) * REFLECT;
        let fr = f.eval_flat(&reflected);
        if fr < best_value {
            if f.exhausted() {
                simplex[n] = Vertex { flat: reflected, value: fr };
                break;
            }
            let expanded = &centroid + (&reflected - &centroid) * EXPAND;
            let fe = f.eval_flat(&expanded);
            simplex[n] = if fe < fr {
                Vertex { flat: expanded, value: fe }
            } else {
                Vertex { flat: reflected, value: fr }
            };
            continue;
        }
        if fr < second_worst {
            simplex[n] = Vertex { flat: reflected, value: fr };
            continue;
        }
        if f.exhausted() {
            break;
        }
        let (contracted, threshold) = if fr < worst {
            (&centroid + (&reflected - &centroid) * CONTRACT, fr)
        } else {
            (&centroid + (&simplex[n].flat - &centroid) * CONTRACT, worst)
        };
        let fc = f.eval_flat(&contracted);
        if fc < threshold || (fr < worst && fc <= threshold) {
            simplex[n] = Vertex { flat: contracted, value: fc };
            continue;
        }
        let anchor = simplex[0].flat.clone();
        for v in simplex.iter_mut().skip(1) {
            if f.exhausted() {
                break;
            }
            v.flat = &anchor + (&v.flat - &anchor) * SHRINK;
            v.value = f.eval_flat(&v.flat);
        }
    }

    Ok(BaselineOutcome {
        best_point: f.best.0,
        best_value: f.best.1,
        evaluations: f.evaluations,
        gradient_evaluations: 0,
        trace: f.trace,
    })
}
