use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsf_cli::checks::{self, COVARIANCE_SAMPLES};
use nsf_cli::experiment::write_json_file;
use nsf_cli::studies::{compare_schemes, mc_budget_check, weak_strong_experiment};
use nsf_cli::{parse_config, CliError, Experiment, RunConfig, WORKERS_ENV};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nsf", version, about = "Stochastic Navier-Stokes-Fourier experiments on the 3-torus")]
struct Cli {
    /// Only print errors and final reports.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration, or a metadata.json from an earlier run to replay it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of paths, overriding the configuration.
    #[arg(long)]
    paths: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo ensemble and write its artifacts.
    Run(Common),
    /// Compare the mean time-integrated dissipation with its a priori bound.
    McBudget(Common),
    /// Twin runs on a shared Brownian path against the Gronwall envelope.
    WeakStrong {
        #[command(flatten)]
        common: Common,
        /// Amplitude of the cosine perturbation of psi along x1.
        #[arg(long, default_value_t = 1e-3)]
        amplitude: f64,
    },
    /// Strong convergence between scheme pairs on coupled paths.
    CompareSchemes {
        #[command(flatten)]
        common: Common,
        /// Decreasing step sizes, each a multiple of the last.
        #[arg(long, value_delimiter = ',', default_value = "4e-4,2e-4,1e-4")]
        dt_list: Vec<f64>,
    },
    /// Stationarity of noise bases and covariance of matrix increments.
    VerifyNoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = COVARIANCE_SAMPLES)]
        samples: usize,
    },
    /// Residuals of the structural identities of the deterministic operators.
    VerifyGeneric(Common),
    /// The full invariant suite.
    VerifyProperties(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Precondition("this command needs --config PATH".into()))?;
    let mut cfg = parse_config(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(p) = common.paths {
        cfg.n_paths = p;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.clone());
    }
    let output = cfg.output.clone();
    let mut cfg = cfg.validated()?;
    cfg.output = output;
    Ok(cfg)
}

fn report<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        write_json_file(&dir.join(name), value)?;
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = cfg.output_dir();
            let run = Experiment::new(cfg)?.execute(&out)?;
            let s = &run.summary;
            println!(
                "{} of {} paths completed; summary in {}",
                s.completed,
                s.n_paths,
                out.join("summary.json").display()
            );
            Ok(s.failed.is_empty())
        }
        Command::McBudget(c) => {
            let cfg = load(&c)?;
            let out = cfg.output_dir();
            let (budget, _) = mc_budget_check(&Experiment::new(cfg)?, &out)?;
            report(&budget, None, "budget.json")?;
            Ok(budget.pass)
        }
        Command::WeakStrong { common, amplitude } => {
            let cfg = load(&common)?;
            let out = cfg.output_dir();
            let r = weak_strong_experiment(&Experiment::new(cfg)?, amplitude, Some(&out))?;
            report(&r, None, "weak_strong.json")?;
            Ok(r.pass)
        }
        Command::CompareSchemes { common, dt_list } => {
            let cfg = load(&common)?;
            let out = cfg.output_dir();
            let r = compare_schemes(&Experiment::new(cfg)?, &dt_list, Some(&out))?;
            report(&r, None, "compare_schemes.json")?;
            Ok(r.pass)
        }
        Command::VerifyNoise { common, samples } => {
            let basis = match &common.config {
                Some(_) => Some(Experiment::new(load(&common)?)?.basis),
                None => None,
            };
            let r = checks::verify_noise(basis.as_ref(), samples, common.seed.unwrap_or(0))?;
            report(&r, common.out.as_deref(), "verify_noise.json")?;
            Ok(r.pass)
        }
        Command::VerifyGeneric(c) => {
            let r = checks::run_generic(c.seed.unwrap_or(0))?;
            report(&r, c.out.as_deref(), "verify_generic.json")?;
            Ok(r.pass)
        }
        Command::VerifyProperties(c) => {
            let r = checks::verify_properties(c.seed.unwrap_or(0))?;
            report(&r, c.out.as_deref(), "verify_properties.json")?;
            Ok(r.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot size the worker pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {WORKERS_ENV} must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
