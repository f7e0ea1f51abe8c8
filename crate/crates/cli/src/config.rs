//! Run configuration: a TOML file and command-line flags layered over
//! per-experiment defaults. Flags win over the file, the file over defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use manibo::baselines::{GdConfig, NelderMeadConfig};
use manibo::bo::{AscentSettings, BoConfig};
use manibo::experiments::SPD_REGRESSION_INIT;
use manibo::manifolds::ManifoldKind;
use serde::{Deserialize, Serialize};

pub const DEFAULT_OUT: &str = "manibo-out";
pub const OUT_ENV: &str = "MANIBO_OUT";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FrechetSphere,
    GrassmannApprox,
    SpdRegression,
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::FrechetSphere => "frechet-sphere",
            Experiment::GrassmannApprox => "grassmann-approx",
            Experiment::SpdRegression => "spd-regression",
            Experiment::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Gd,
    NelderMead,
}

/// Initial design for the Grassmann experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GrassmannDesign {
    Random,
    /// Shifted copies of the top singular frame, retracted onto the manifold.
    ShiftedSvd,
}

/// Manifold written as `sphere:N`, `grassmann:P,N` or `spd:P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSpec(pub ManifoldKind);

impl FromStr for ManifoldSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, dims) = s
            .split_once(':')
            .ok_or_else(|| format!("expected sphere:N, grassmann:P,N or spd:P, got {s:?}"))?;
        let dims = dims
            .split(',')
            .map(|d| d.trim().parse::<usize>().map_err(|e| format!("bad dimension {d:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let kind = match (name.trim(), dims.as_slice()) {
            ("sphere", [n]) => ManifoldKind::sphere(*n),
            ("grassmann", [p, n]) => ManifoldKind::grassmann(*p, *n),
            ("spd", [p]) => ManifoldKind::spd(*p),
            _ => return Err(format!("expected sphere:N, grassmann:P,N or spd:P, got {s:?}")),
        };
        kind.map(ManifoldSpec).map_err(|e| e.to_string())
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            ManifoldKind::Sphere { n } => write!(f, "sphere:{n}"),
            ManifoldKind::Grassmann { p, n } => write!(f, "grassmann:{p},{n}"),
            ManifoldKind::Spd { p } => write!(f, "spd:{p}"),
        }
    }
}

impl Serialize for ManifoldSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ManifoldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Acquisition ascent step: a fixed λ, or `"auto"` for 0.1 × lengthscale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSetting {
    Fixed(f64),
    Auto(String),
}

impl StepSetting {
    fn resolve(&self) -> Result<Option<f64>, ConfigError> {
        match self {
            StepSetting::Fixed(v) if *v > 0.0 && v.is_finite() => Ok(Some(*v)),
            StepSetting::Fixed(v) => Err(invalid(format!("ascent step must be positive, got {v}"))),
            StepSetting::Auto(s) if s == "auto" => Ok(None),
            StepSetting::Auto(s) => Err(invalid(format!("ascent step must be a number or \"auto\", got {s:?}"))),
        }
    }
}

impl FromStr for StepSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(StepSetting::Auto(s.into()));
        }
        s.parse().map(StepSetting::Fixed).map_err(|e| format!("{s:?}: {e}"))
    }
}

// ---------------------------------------------------------------------------
// File layer

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    experiment: Option<Experiment>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    data_seed: Option<u64>,
    init: Option<usize>,
    iters: Option<usize>,
    refit_every: Option<usize>,
    baselines: Option<Vec<Baseline>>,
    out: Option<PathBuf>,
    record_wall_time: Option<bool>,
    #[serde(default)]
    frechet_sphere: FrechetFile,
    #[serde(default)]
    grassmann_approx: GrassmannFile,
    #[serde(default)]
    spd_regression: SpdFile,
    #[serde(default)]
    custom: CustomFile,
    #[serde(default)]
    ascent: AscentFile,
    #[serde(default)]
    gd: GdFile,
    #[serde(default)]
    nelder_mead: NelderMeadFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FrechetFile {
    points: Option<usize>,
    latitude: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct GrassmannFile {
    rows: Option<usize>,
    cols: Option<usize>,
    p: Option<usize>,
    design: Option<GrassmannDesign>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SpdFile {
    locations: Option<usize>,
    noise: Option<f64>,
    bandwidth: Option<f64>,
    query: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct CustomFile {
    manifold: Option<ManifoldSpec>,
    points: Option<usize>,
    spread: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct AscentFile {
    step: Option<StepSetting>,
    max_steps: Option<usize>,
    n_starts: Option<usize>,
    grad_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct GdFile {
    step: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
    max_oracle_calls: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct NelderMeadFile {
    max_evals: Option<usize>,
    tol: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| invalid(format!("invalid config file: {}", e.message())))
    }
}

// ---------------------------------------------------------------------------
// Flag layer

#[derive(Debug, Default, Args)]
pub struct RunFlags {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run several seeds, each into its own `seed-<n>` subdirectory.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub seeds: Option<Vec<u64>>,
    /// Seed of the generated problem data; defaults to the run seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Initial random design size k.
    #[arg(long)]
    pub init: Option<usize>,
    /// BO iterations T.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub refit_every: Option<usize>,
    /// Comparison optimizers: gd, nelder-mead, or none.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub baselines: Option<Vec<BaselineFlag>>,
    /// Output directory; also settable through MANIBO_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fill the wall_ms CSV column (traces are then no longer byte-reproducible).
    #[arg(long)]
    pub record_wall_time: bool,

    #[arg(long, help_heading = "frechet-sphere / custom")]
    pub points: Option<usize>,
    #[arg(long, allow_hyphen_values = true, help_heading = "frechet-sphere")]
    pub latitude: Option<f64>,

    #[arg(long, help_heading = "grassmann-approx")]
    pub rows: Option<usize>,
    #[arg(long, help_heading = "grassmann-approx")]
    pub cols: Option<usize>,
    #[arg(long, help_heading = "grassmann-approx")]
    pub p: Option<usize>,
    #[arg(long, value_enum, help_heading = "grassmann-approx")]
    pub design: Option<GrassmannDesign>,

    #[arg(long, help_heading = "spd-regression")]
    pub locations: Option<usize>,
    #[arg(long, help_heading = "spd-regression")]
    pub noise: Option<f64>,
    #[arg(long, help_heading = "spd-regression")]
    pub bandwidth: Option<f64>,
    #[arg(long, allow_hyphen_values = true, help_heading = "spd-regression")]
    pub query: Option<f64>,

    /// sphere:N, grassmann:P,N or spd:P
    #[arg(long, help_heading = "custom")]
    pub manifold: Option<ManifoldSpec>,
    #[arg(long, help_heading = "custom")]
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineFlag {
    Gd,
    NelderMead,
    None,
}

// ---------------------------------------------------------------------------
// Resolved settings

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FrechetSettings {
    pub points: usize,
    pub latitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GrassmannSettings {
    pub rows: usize,
    pub cols: usize,
    pub p: usize,
    pub design: GrassmannDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SpdSettings {
    pub locations: usize,
    pub noise: f64,
    pub bandwidth: f64,
    pub query: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CustomSettings {
    pub manifold: ManifoldSpec,
    pub points: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AscentResolved {
    pub step: StepSetting,
    pub max_steps: usize,
    pub n_starts: usize,
    pub grad_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GdResolved {
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub max_oracle_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct NelderMeadResolved {
    pub max_evals: usize,
    pub tol: f64,
}

/// Every setting of one run with all defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Resolved {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub data_seed: Option<u64>,
    pub init: usize,
    pub iters: usize,
    pub refit_every: usize,
    pub baselines: Vec<Baseline>,
    pub out: PathBuf,
    pub record_wall_time: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frechet_sphere: Option<FrechetSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grassmann_approx: Option<GrassmannSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spd_regression: Option<SpdSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSettings>,
    pub ascent: AscentResolved,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gd: Option<GdResolved>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nelder_mead: Option<NelderMeadResolved>,
}

impl Resolved {
    /// The configuration of a single seed, as recorded in its summary.
    pub fn for_seed(&self, seed: u64) -> Resolved {
        Resolved {
            seeds: vec![seed],
            data_seed: Some(self.data_seed(seed)),
            ..self.clone()
        }
    }

    pub fn data_seed(&self, seed: u64) -> u64 {
        self.data_seed.unwrap_or(seed)
    }

    pub fn bo_config(&self, seed: u64) -> BoConfig {
        let mut cfg = BoConfig::new(self.init, self.iters, seed);
        cfg.refit_every = self.refit_every;
        cfg.ascent = AscentSettings {
            step: match self.ascent.step {
                StepSetting::Fixed(v) => Some(v),
                StepSetting::Auto(_) => None,
            },
            max_steps: self.ascent.max_steps,
            n_starts: self.ascent.n_starts,
            grad_tol: self.ascent.grad_tol,
            ..AscentSettings::default()
        };
        cfg
    }

    pub fn gd_config(&self) -> Option<GdConfig> {
        self.gd.as_ref().map(|g| GdConfig {
            step: g.step,
            max_iters: g.max_iters,
            tol: g.tol,
            max_oracle_calls: Some(g.max_oracle_calls),
            ..GdConfig::default()
        })
    }

    pub fn nelder_mead_config(&self) -> Option<NelderMeadConfig> {
        self.nelder_mead.as_ref().map(|n| NelderMeadConfig {
            max_evals: n.max_evals,
            tol: n.tol,
            ..NelderMeadConfig::default()
        })
    }
}

fn default_baselines(experiment: Experiment) -> Vec<Baseline> {
    match experiment {
        Experiment::GrassmannApprox => vec![Baseline::NelderMead],
        _ => vec![Baseline::Gd],
    }
}

fn default_budget(experiment: Experiment) -> (usize, usize) {
    match experiment {
        Experiment::FrechetSphere => (5, 25),
        Experiment::GrassmannApprox => (5, 30),
        Experiment::SpdRegression => (SPD_REGRESSION_INIT, 30),
        Experiment::Custom => (5, 30),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, ConfigError> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be at least {min}, got {v}")))
    }
}

/// Merges flags over the file and fills defaults. `env_out` is the value of
/// `MANIBO_OUT`, which sits between the `--out` flag and the file.
pub fn resolve(file: FileConfig, flags: &RunFlags, env_out: Option<PathBuf>) -> Result<Resolved, ConfigError> {
    let experiment = flags
        .experiment
        .or(file.experiment)
        .ok_or_else(|| invalid("missing experiment (frechet-sphere, grassmann-approx, spd-regression or custom)"))?;

    let seeds = match (&flags.seeds, flags.seed, &file.seeds, file.seed) {
        (Some(s), _, _, _) => s.clone(),
        (None, Some(s), _, _) => vec![s],
        (None, None, Some(s), _) => s.clone(),
        (None, None, None, Some(s)) => vec![s],
        (None, None, None, None) => return Err(invalid("missing seed: set `seed` or `seeds`")),
    };
    if seeds.is_empty() {
        return Err(invalid("seeds must not be empty"));
    }
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != seeds.len() {
        return Err(invalid("seeds must be distinct"));
    }

    let (default_init, default_iters) = default_budget(experiment);
    let init = at_least("init", flags.init.or(file.init).unwrap_or(default_init), 1)?;
    let iters = flags.iters.or(file.iters).unwrap_or(default_iters);
    let refit_every = flags.refit_every.or(file.refit_every).unwrap_or(5);

    let mut baselines = match &flags.baselines {
        Some(list) if list.contains(&BaselineFlag::None) => {
            if list.len() > 1 {
                return Err(invalid("`none` cannot be combined with other baselines"));
            }
            Vec::new()
        }
        Some(list) => list
            .iter()
            .map(|b| match b {
                BaselineFlag::Gd => Baseline::Gd,
                _ => Baseline::NelderMead,
            })
            .collect(),
        None => file.baselines.clone().unwrap_or_else(|| default_baselines(experiment)),
    };
    baselines.sort_unstable();
    baselines.dedup();

    let out = flags
        .out
        .clone()
        .or(env_out)
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let record_wall_time = flags.record_wall_time || file.record_wall_time.unwrap_or(false);

    let mut resolved = Resolved {
        experiment,
        seeds,
        data_seed: flags.data_seed.or(file.data_seed),
        init,
        iters,
        refit_every,
        baselines: baselines.clone(),
        out,
        record_wall_time,
        frechet_sphere: None,
        grassmann_approx: None,
        spd_regression: None,
        custom: None,
        ascent: resolve_ascent(&file.ascent)?,
        gd: None,
        nelder_mead: None,
    };

    match experiment {
        Experiment::FrechetSphere => {
            let f = &file.frechet_sphere;
            resolved.frechet_sphere = Some(FrechetSettings {
                points: at_least("points", flags.points.or(f.points).unwrap_or(8), 1)?,
                latitude: finite("latitude", flags.latitude.or(f.latitude).unwrap_or(-0.5))?,
            });
        }
        Experiment::GrassmannApprox => {
            let g = &file.grassmann_approx;
            resolved.grassmann_approx = Some(GrassmannSettings {
                rows: flags.rows.or(g.rows).unwrap_or(3),
                cols: flags.cols.or(g.cols).unwrap_or(6),
                p: flags.p.or(g.p).unwrap_or(2),
                design: flags.design.or(g.design).unwrap_or(GrassmannDesign::Random),
            });
        }
        Experiment::SpdRegression => {
            let s = &file.spd_regression;
            resolved.spd_regression = Some(SpdSettings {
                locations: at_least("locations", flags.locations.or(s.locations).unwrap_or(75), 2)?,
                noise: finite("noise", flags.noise.or(s.noise).unwrap_or(0.1))?,
                bandwidth: positive("bandwidth", flags.bandwidth.or(s.bandwidth).unwrap_or(0.1))?,
                query: finite("query", flags.query.or(s.query).unwrap_or(0.5))?,
            });
        }
        Experiment::Custom => {
            let c = &file.custom;
            let manifold = flags
                .manifold
                .or(c.manifold)
                .unwrap_or(ManifoldSpec(ManifoldKind::Sphere { n: 2 }));
            resolved.custom = Some(CustomSettings {
                manifold,
                points: at_least("points", flags.points.or(c.points).unwrap_or(10), 1)?,
                spread: positive("spread", flags.spread.or(c.spread).unwrap_or(0.5))?,
            });
        }
    }

    if baselines.contains(&Baseline::Gd) {
        let g = &file.gd;
        resolved.gd = Some(GdResolved {
            step: positive("gd step", g.step.unwrap_or(0.5))?,
            max_iters: g.max_iters.unwrap_or(iters),
            tol: positive("gd tol", g.tol.unwrap_or(1e-10))?,
            // equal cost: eBO spends init + iters objective evaluations
            max_oracle_calls: at_least("gd max-oracle-calls", g.max_oracle_calls.unwrap_or(init + iters), 1)?,
        });
    }
    if baselines.contains(&Baseline::NelderMead) {
        let n = &file.nelder_mead;
        resolved.nelder_mead = Some(NelderMeadResolved {
            max_evals: at_least("nelder-mead max-evals", n.max_evals.unwrap_or(200), 1)?,
            tol: positive("nelder-mead tol", n.tol.unwrap_or(1e-8))?,
        });
    }
    Ok(resolved)
}

fn resolve_ascent(a: &AscentFile) -> Result<AscentResolved, ConfigError> {
    let defaults = AscentSettings::default();
    let step = a.step.clone().unwrap_or(StepSetting::Auto("auto".into()));
    step.resolve()?;
    Ok(AscentResolved {
        step,
        max_steps: at_least("ascent max-steps", a.max_steps.unwrap_or(defaults.max_steps), 1)?,
        n_starts: at_least("ascent n-starts", a.n_starts.unwrap_or(defaults.n_starts), 1)?,
        grad_tol: positive("ascent grad-tol", a.grad_tol.unwrap_or(defaults.grad_tol))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(text: &str) -> Result<Resolved, ConfigError> {
        resolve(FileConfig::parse(text)?, &RunFlags::default(), None)
    }

    #[test]
    fn manifold_spec_round_trip() {
        for s in ["sphere:2", "grassmann:2,5", "spd:3"] {
            assert_eq!(s.parse::<ManifoldSpec>().unwrap().to_string(), s);
        }
        assert!("grassmann:3,3".parse::<ManifoldSpec>().is_err());
        assert!("torus:2".parse::<ManifoldSpec>().is_err());
        assert!("sphere".parse::<ManifoldSpec>().is_err());
    }

    #[test]
    fn defaults_follow_experiment() {
        let r = resolve_text("experiment = \"spd-regression\"\nseed = 1\n").unwrap();
        assert_eq!((r.init, r.iters), (SPD_REGRESSION_INIT, 30));
        assert_eq!(r.baselines, vec![Baseline::Gd]);
        assert_eq!(r.gd.unwrap().max_oracle_calls, SPD_REGRESSION_INIT + 30);
        let r = resolve_text("experiment = \"grassmann-approx\"\nseed = 1\n").unwrap();
        assert_eq!(r.baselines, vec![Baseline::NelderMead]);
        assert!(r.gd.is_none());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = resolve_text("experiment = \"custom\"\nseed = 1\nitres = 3\n").unwrap_err();
        assert!(err.0.contains("itres"), "{err}");
        let err = resolve_text("experiment = \"custom\"\nseed = 1\n[gd]\nstpe = 3\n").unwrap_err();
        assert!(err.0.contains("stpe"), "{err}");
    }

    #[test]
    fn seed_is_required() {
        let err = resolve_text("experiment = \"custom\"\n").unwrap_err();
        assert!(err.0.contains("seed"));
    }

    #[test]
    fn flags_override_env_override_file() {
        let file = "experiment = \"custom\"\nseed = 1\nout = \"from-file\"\niters = 4\n";
        let flags = RunFlags {
            iters: Some(9),
            ..RunFlags::default()
        };
        let r = resolve(FileConfig::parse(file).unwrap(), &flags, Some("from-env".into())).unwrap();
        assert_eq!(r.iters, 9);
        assert_eq!(r.out, PathBuf::from("from-env"));
        let flags = RunFlags {
            out: Some("from-flag".into()),
            ..RunFlags::default()
        };
        let r = resolve(FileConfig::parse(file).unwrap(), &flags, Some("from-env".into())).unwrap();
        assert_eq!(r.out, PathBuf::from("from-flag"));
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let r = resolve_text("experiment = \"frechet-sphere\"\nseeds = [3, 4]\n[ascent]\nstep = 0.05\n").unwrap();
        let text = toml::to_string(&r).unwrap();
        let back: Resolved = toml::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(resolve_text("experiment = \"custom\"\nseed = 1\ninit = 0\n").is_err());
        assert!(resolve_text("experiment = \"spd-regression\"\nseed = 1\n[spd-regression]\nbandwidth = -1.0\n").is_err());
        assert!(resolve_text("experiment = \"custom\"\nseed = 1\n[ascent]\nstep = \"big\"\n").is_err());
        assert!(resolve_text("experiment = \"custom\"\nseeds = [1, 1]\n").is_err());
    }
}
