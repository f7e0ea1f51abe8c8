//! Builds the configured problem, runs eBO and the baselines, and writes
//! one CSV trace per optimizer plus `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use manibo::baselines::{BaselineOutcome, GradObjective};
use manibo::bo::{BoAbort, BoOutcome, Objective};
use manibo::experiments::{
    compare, BaselinePlan, FrechetProblem, GrassmannApproxProblem, SpdRegressionProblem,
};
use manibo::manifolds::ManifoldPoint;
use manibo::trace::{format_float, RunTrace};
use serde_json::{json, Map, Value};

use crate::config::{ConfigError, Experiment, GrassmannDesign, Resolved};

/// A problem ready to optimize.
pub struct Problem {
    pub objective: Objective,
    pub gradient: Option<GradObjective>,
    pub design: Option<Vec<ManifoldPoint>>,
    /// Extra facts about the known optimum for the summary.
    pub oracle_notes: Map<String, Value>,
}

fn problem_error(e: manibo::Error) -> ConfigError {
    ConfigError(format!("invalid problem: {e}"))
}

pub fn build_problem(cfg: &Resolved, seed: u64) -> Result<Problem, ConfigError> {
    let data_seed = cfg.data_seed(seed);
    let mut notes = Map::new();
    let (objective, gradient, design) = match cfg.experiment {
        Experiment::FrechetSphere => {
            let s = cfg.frechet_sphere.as_ref().expect("resolved with settings");
            let prob = FrechetProblem::latitude_circle(s.points, s.latitude).map_err(problem_error)?;
            (
                prob.objective().map_err(problem_error)?,
                Some(prob.grad_objective().map_err(problem_error)?),
                None,
            )
        }
        Experiment::GrassmannApprox => {
            let s = cfg.grassmann_approx.as_ref().expect("resolved with settings");
            let prob = GrassmannApproxProblem::random(s.rows, s.cols, s.p, data_seed).map_err(problem_error)?;
            let oracle = prob.svd_oracle().map_err(problem_error)?;
            notes.insert("singular_values".into(), Value::Array(oracle.singular_values.iter().map(|&v| num(v)).collect()));
            notes.insert("unique".into(), Value::Bool(oracle.unique));
            let design = match s.design {
                GrassmannDesign::Random => None,
                GrassmannDesign::ShiftedSvd => Some(prob.shifted_svd_design(cfg.init).map_err(problem_error)?),
            };
            (
                prob.objective().map_err(problem_error)?,
                Some(prob.grad_objective().map_err(problem_error)?),
                design,
            )
        }
        Experiment::SpdRegression => {
            let s = cfg.spd_regression.as_ref().expect("resolved with settings");
            let prob = SpdRegressionProblem::generate(s.locations, s.noise, data_seed)
                .and_then(|p| p.with_bandwidth(s.bandwidth))
                .and_then(|p| p.with_query(s.query))
                .map_err(problem_error)?;
            prob.weights().map_err(problem_error)?;
            (
                prob.objective().map_err(problem_error)?,
                Some(prob.grad_objective().map_err(problem_error)?),
                None,
            )
        }
        Experiment::Custom => {
            let s = cfg.custom.as_ref().expect("resolved with settings");
            let prob = FrechetProblem::random_cluster(s.manifold.0, s.points, s.spread, data_seed).map_err(problem_error)?;
            (
                prob.objective().map_err(problem_error)?,
                Some(prob.grad_objective().map_err(problem_error)?),
                None,
            )
        }
    };
    Ok(Problem {
        objective,
        gradient,
        design,
        oracle_notes: notes,
    })
}

/// JSON number with 17 significant digits; `null` when not finite.
fn num(v: f64) -> Value {
    if v.is_finite() {
        serde_json::from_str(&format_float(v)).expect("formatted float is valid JSON")
    } else {
        Value::Null
    }
}

fn log10_or_null(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |d| num(d.log10()))
}

struct Report {
    name: &'static str,
    trace: Option<RunTrace>,
    entry: Value,
    failed: bool,
}

fn summarize(obj: &Objective, best: Option<(&ManifoldPoint, f64)>, evaluations: usize, iterations: usize, wall_ms: f64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("final_value".into(), best.map_or(Value::Null, |(_, v)| num(v)));
    m.insert(
        "err_to_oracle".into(),
        log10_or_null(best.and_then(|(x, _)| obj.error_to_oracle(x))),
    );
    if let (Some((_, oracle_value)), Some((_, v))) = (obj.oracle(), best) {
        let gap = (v - oracle_value) / oracle_value.abs();
        m.insert("relative_gap".into(), if oracle_value.abs() > 0.0 { num(gap) } else { Value::Null });
    }
    m.insert("evaluations".into(), json!(evaluations));
    m.insert("iterations".into(), json!(iterations));
    m.insert("wall_ms".into(), num(wall_ms));
    m
}

fn ebo_report(obj: &Objective, result: Result<BoOutcome, BoAbort>, wall_ms: f64) -> Report {
    match result {
        Ok(out) => {
            let mut m = summarize(obj, Some((&out.best_point, out.best_value)), out.evaluations, out.trace.len(), wall_ms);
            m.insert("status".into(), json!("ok"));
            m.insert(
                "kernel".into(),
                json!({
                    "lengthscale": num(out.params.lengthscale),
                    "amplitude": num(out.params.amplitude),
                    "noise": num(out.params.noise),
                }),
            );
            Report {
                name: "ebo",
                trace: Some(out.trace),
                entry: Value::Object(m),
                failed: false,
            }
        }
        Err(abort) => {
            let best = abort.best.as_ref().map(|(x, v)| (x, *v));
            let mut m = summarize(obj, best, abort.evaluations, abort.trace.len(), wall_ms);
            m.insert("status".into(), json!("aborted"));
            m.insert("error".into(), json!(abort.error.to_string()));
            Report {
                name: "ebo",
                trace: Some(abort.trace),
                entry: Value::Object(m),
                failed: true,
            }
        }
    }
}

fn baseline_report(name: &'static str, obj: &Objective, result: manibo::Result<BaselineOutcome>, wall_ms: f64) -> Report {
    match result {
        Ok(out) => {
            let mut m = summarize(obj, Some((&out.best_point, out.best_value)), out.evaluations, out.trace.len(), wall_ms);
            m.insert("gradient_evaluations".into(), json!(out.gradient_evaluations));
            m.insert("status".into(), json!("ok"));
            Report {
                name,
                trace: Some(out.trace),
                entry: Value::Object(m),
                failed: false,
            }
        }
        Err(e) => Report {
            name,
            trace: None,
            entry: json!({ "status": "aborted", "error": e.to_string() }),
            failed: true,
        },
    }
}

pub struct SeedOutcome {
    pub dir: PathBuf,
    pub failed: bool,
    pub lines: Vec<String>,
}

/// Runs one seed into `dir`. Traces are written even when an optimizer aborts.
pub fn run_seed(cfg: &Resolved, seed: u64, dir: &Path) -> Result<SeedOutcome, Box<dyn std::error::Error>> {
    let problem = build_problem(cfg, seed)?;
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let obj = &problem.objective;
    let plan = BaselinePlan {
        gd: cfg.gd_config(),
        nelder_mead: cfg.nelder_mead_config(),
    };
    let bo = cfg.bo_config(seed);

    let run = compare(obj, problem.gradient.as_ref(), &bo, problem.design.as_deref(), &plan)?;
    let mut reports = vec![ebo_report(obj, run.ebo, run.wall_ms[0].unwrap_or(0.0))];
    if let Some(out) = run.gd {
        reports.push(baseline_report("gd", obj, out, run.wall_ms[1].unwrap_or(0.0)));
    }
    if let Some(out) = run.nelder_mead {
        reports.push(baseline_report("nelder-mead", obj, out, run.wall_ms[2].unwrap_or(0.0)));
    }

    let mut optimizers = Map::new();
    let mut lines = Vec::new();
    let mut failed = false;
    for r in reports {
        if let Some(trace) = &r.trace {
            let path = dir.join(format!("{}.csv", r.name));
            trace
                .write_csv(&path, cfg.record_wall_time)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        }
        failed |= r.failed;
        lines.push(describe(r.name, &r.entry));
        optimizers.insert(r.name.into(), r.entry);
    }

    let mut oracle = Map::new();
    if let Some((_, value)) = obj.oracle() {
        oracle.insert("value".into(), num(*value));
    }
    oracle.extend(problem.oracle_notes);
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "seed": seed,
        "data_seed": cfg.data_seed(seed),
        "manifold": obj.kind().to_string(),
        "config": serde_json::to_value(cfg.for_seed(seed))?,
        "oracle": if oracle.is_empty() { Value::Null } else { Value::Object(oracle) },
        "optimizers": optimizers,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let path = dir.join("summary.json");
    fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(SeedOutcome {
        dir: dir.to_path_buf(),
        failed,
        lines,
    })
}

fn describe(name: &str, entry: &Value) -> String {
    let field = |k: &str| {
        entry
            .get(k)
            .and_then(Value::as_f64)
            .map_or("n/a".to_string(), |v| format!("{v:.6e}"))
    };
    match entry.get("status").and_then(Value::as_str) {
        Some("ok") => format!(
            "{name}: best {} after {} evaluations, log10 error to oracle {}",
            field("final_value"),
            entry.get("evaluations").and_then(Value::as_u64).unwrap_or(0),
            field("err_to_oracle"),
        ),
        _ => format!(
            "{name}: aborted ({})",
            entry.get("error").and_then(Value::as_str).unwrap_or("unknown error")
        ),
    }
}
