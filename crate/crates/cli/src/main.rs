use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use noma_core::baselines::{brute_force_joint, OracleMode};
use noma_core::UserWeights;
use noma_sim::channel::generate_channel;
use noma_sim::instance::SavedInstance;
use noma_sim::output::{write_csv, write_json};
use noma_sim::{run_campaign, RunOptions, ScenarioSpec, SimError, SweepSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "noma-sim",
    version,
    about = "Joint sub-channel and power allocation simulator for downlink NOMA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        scheme: Option<String>,
        /// Override the sweep, e.g. `M=10,20,30`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Brute-force the joint optimum of one small random instance.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the optimal matching and instance as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify two-sided exchange stability of a saved matching.
    StabilityCheck {
        /// JSON file written by `oracle --out` or by hand.
        matching: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
    },
}

/// Failures that map to the configuration exit code.
struct ConfigError(anyhow::Error);

fn load_spec(path: &Path) -> std::result::Result<ScenarioSpec, ConfigError> {
    ScenarioSpec::load(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(ConfigError)
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> std::result::Result<(), (u8, anyhow::Error)> {
    let cfg_err = |e: ConfigError| (EXIT_CONFIG, e.0);
    let rt_err = |e: anyhow::Error| (EXIT_RUNTIME, e);
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
            parallel,
            scheme,
            sweep,
        } => {
            let mut spec = load_spec(&config).map_err(cfg_err)?;
            if let Some(s) = seed {
                spec.system.rng_seed = s;
            }
            if let Some(s) = scheme {
                spec.scheme = s;
            }
            if let Some(s) = sweep {
                spec.sweep = Some(SweepSpec::parse(&s).map_err(|e| (EXIT_CONFIG, e.into()))?);
            }
            let result = run_campaign(
                &spec,
                RunOptions {
                    parallel,
                    keep_allocations: false,
                },
            )
            .map_err(|e| {
                let code = match e {
                    SimError::Io(_) | SimError::Json(_) | SimError::Csv(_) => EXIT_RUNTIME,
                    _ => EXIT_CONFIG,
                };
                (code, e.into())
            })?;
            for t in result.trials.iter().filter(|t| t.outcome.is_err()) {
                eprintln!(
                    "trial {} (sweep {:?}, seed {}) failed: {}",
                    t.trial,
                    t.sweep_value,
                    t.seed,
                    t.outcome.as_ref().unwrap_err()
                );
            }
            if result.all_failed() {
                return Err((
                    EXIT_RUNTIME,
                    SimError::AllTrialsFailed(result.trials.len()).into(),
                ));
            }
            let w = output(&out).map_err(rt_err)?;
            match format {
                Format::Csv => write_csv(&result.rows, w),
                Format::Json => write_json(&result.rows, w),
            }
            .map_err(|e| rt_err(e.into()))?;
            if result.failures > 0 {
                eprintln!(
                    "{} of {} trials failed",
                    result.failures,
                    result.trials.len()
                );
            }
            Ok(())
        }
        Command::Oracle { config, seed, out } => {
            let spec = load_spec(&config).map_err(cfg_err)?;
            let mut sys = spec.system.clone();
            if let Some(s) = seed {
                sys.rng_seed = s;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(sys.rng_seed);
            let ch = generate_channel(&sys, &mut rng, sys.num_subchannels);
            let weights = UserWeights::uniform(sys.num_users);
            let mode = spec
                .oracle_grid_steps
                .map_or(OracleMode::Exact, OracleMode::Grid);
            let best =
                brute_force_joint(&ch, &sys, &weights, mode).map_err(|e| rt_err(e.into()))?;
            println!("total utility: {}", best.total_utility);
            print!("{}", best.matching);
            if let Some(path) = out {
                SavedInstance::from_allocation(&ch, &weights, sys.total_power_watts, &best)
                    .save(&path)
                    .map_err(|e| rt_err(e.into()))?;
            }
            Ok(())
        }
        Command::StabilityCheck { matching, eps } => {
            let inst = SavedInstance::load(&matching)
                .with_context(|| format!("reading {}", matching.display()))
                .map_err(|e| (EXIT_CONFIG, e))?;
            let s = inst.stability(eps).map_err(|e| (EXIT_CONFIG, e.into()))?;
            if s.stable {
                println!("stable: no approved swap exists");
            } else if let Some((proposal, verdict)) = s.witness {
                println!("not stable: {proposal:?} is approved ({verdict:?})");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
