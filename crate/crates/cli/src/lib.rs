//! Batch front-end for `fraplace-core`.
//!
//! ```text
//! fraplace --config run.json [--workers N] [--overwrite] [--solver.tol=1e-8] <command> [args]
//! ```
//!
//! Any `--a.b=value` flag (or `--set a.b=value`) overrides the config field at
//! that dotted path before validation. Exit codes: 0 success, 1 validation
//! error, 2 convergence failure, 3 property violation.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Context, SweepArgs, VerifyArgs, WeightSpec, DEFAULT_PROPERTIES};
use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fraplace",
    version,
    about = "Fractional p-Laplacian eigenvalues, solvability and steady states"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Cap on worker threads.
    #[arg(long, global = true, env = "FRAPLACE_WORKERS")]
    workers: Option<usize>,

    /// Write directly into output.dir instead of a timestamped subdirectory.
    #[arg(long, global = true)]
    overwrite: bool,

    /// Config override `dotted.path=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Principal eigenpair for a weight: zero, a0, ainf, const:<c>, ainf_k:<k>.
    Eigen {
        #[arg(long, default_value = "zero")]
        weight: WeightSpec,
    },
    /// Criterion verdict followed by the truncated energy minimization.
    Solve,
    /// Solvability verdict only.
    Criterion,
    /// Randomized inequality and gradient checks.
    Verify {
        /// Comma-separated property names; an empty value selects none.
        #[arg(long, value_delimiter = ',')]
        properties: Option<Vec<String>>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Exponents for the kernel checks; defaults to the config p.
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
    },
    /// Logistic lambda sweep locating the existence threshold.
    Sweep {
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// Treat lo and hi as multiples of lambda1(0).
        #[arg(long)]
        relative: bool,
    },
}

/// Pulls `--a.b=value` and `--a.b value` flags out of `args`.
type Overrides = Vec<(String, String)>;

fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Overrides), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg.to_str().and_then(|s| s.strip_prefix("--")).filter(|s| {
            let key = s.split('=').next().unwrap_or("");
            key.contains('.') && !key.starts_with('-')
        });
        match dotted.map(str::to_owned) {
            Some(body) => match body.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it
                        .next()
                        .and_then(|v| v.into_string().ok())
                        .ok_or_else(|| {
                            CliError::Validation(format!("override --{body} needs a value"))
                        })?;
                    overrides.push((body, v));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn parse_set(entries: &[String]) -> Result<Vec<(String, String)>, CliError> {
    entries
        .iter()
        .map(|e| {
            e.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got '{e}'")))
        })
        .collect()
}

fn dispatch(cli: Cli, overrides: Vec<(String, String)>) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Validation("missing --config <file>".into()))?;
    let mut all = overrides;
    all.extend(parse_set(&cli.set)?);
    let config = Config::load(&path, &all)?;
    let ctx = Context {
        overwrite: cli.overwrite,
    };
    let dir = match cli.command {
        Command::Eigen { weight } => commands::eigen(&config, weight, &ctx)?.dir,
        Command::Solve => commands::solve_cmd(&config, &ctx)?.dir,
        Command::Criterion => commands::criterion(&config, &ctx)?.dir,
        Command::Verify {
            properties,
            trials,
            seed,
            p_values,
        } => {
            let properties = match properties {
                Some(list) => list.into_iter().filter(|s| !s.trim().is_empty()).collect(),
                None => DEFAULT_PROPERTIES.iter().map(|s| s.to_string()).collect(),
            };
            let args = VerifyArgs {
                properties,
                trials,
                seed: seed.unwrap_or(config.seed),
                p_values: p_values.unwrap_or_else(|| vec![config.p]),
            };
            commands::verify(&config, &args, &ctx)?.dir
        }
        Command::Sweep {
            lo,
            hi,
            steps,
            relative,
        } => {
            commands::sweep(
                &config,
                &SweepArgs {
                    lo,
                    hi,
                    steps,
                    relative,
                },
                &ctx,
            )?
            .dir
        }
    };
    println!("output: {}", dir.display());
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = split_overrides(args).and_then(|(rest, overrides)| {
        let cli = match Cli::try_parse_from(rest) {
            Ok(cli) => cli,
            Err(e) => {
                let code = if e.use_stderr() { 1 } else { 0 };
                let _ = e.print();
                return if code == 0 {
                    Ok(None)
                } else {
                    Err(CliError::Validation("invalid arguments".into()))
                };
            }
        };
        Ok(Some((cli, overrides)))
    });
    let outcome = result.and_then(|parsed| {
        let Some((cli, overrides)) = parsed else {
            return Ok(());
        };
        match cli.workers {
            Some(0) => Err(CliError::field("workers", "must be at least 1")),
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
                pool.install(|| dispatch(cli, overrides))
            }
            None => dispatch(cli, overrides),
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
