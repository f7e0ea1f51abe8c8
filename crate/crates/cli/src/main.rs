mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, FileConfig, Resolved, RunFlags};

/// Extrinsic Bayesian optimization on manifolds.
#[derive(Debug, Parser)]
#[command(name = "manibo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment with eBO and the selected baselines.
    Run {
        /// TOML file; flags given on the command line take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check a config file and print it with every default filled in.
    Validate {
        config: PathBuf,
    },
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn load_file(path: Option<&Path>) -> Result<FileConfig, ConfigError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            FileConfig::parse(&text)
        }
    }
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(config::OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Resolves the configuration and builds every seed's problem, so that a
/// bad setting is reported before anything runs.
fn prepare(path: Option<&Path>, flags: &RunFlags) -> Result<Resolved, ConfigError> {
    let resolved = config::resolve(load_file(path)?, flags, env_out())?;
    for &seed in &resolved.seeds {
        run::build_problem(&resolved, seed)?;
    }
    Ok(resolved)
}

fn cmd_validate(path: &Path) -> ExitCode {
    match prepare(Some(path), &RunFlags::default()) {
        Ok(resolved) => {
            print!("{}", toml::to_string(&resolved).expect("resolved config serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn cmd_run(path: Option<&Path>, flags: &RunFlags) -> ExitCode {
    let resolved = match prepare(path, flags) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let fan_out = resolved.seeds.len() > 1;
    let mut failed = false;
    for &seed in &resolved.seeds {
        let dir = if fan_out {
            resolved.out.join(format!("seed-{seed}"))
        } else {
            resolved.out.clone()
        };
        match run::run_seed(&resolved, seed, &dir) {
            Ok(outcome) => {
                println!("{} seed {seed} -> {}", resolved.experiment.name(), outcome.dir.display());
                for line in &outcome.lines {
                    println!("  {line}");
                }
                failed |= outcome.failed;
            }
            Err(e) => {
                eprintln!("error: seed {seed}: {e}");
                failed = true;
            }
        }
    }
    if failed {
        eprintln!("error: at least one optimizer aborted; partial traces were written");
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config, flags } => cmd_run(config.as_deref(), flags),
        Command::Validate { config } => cmd_validate(config),
    }
}
