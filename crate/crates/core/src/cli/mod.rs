//! Command-line experiment runner.
//!
//! Every subcommand reads an optional flat config, echoes the effective config
//! into the output directory, writes its CSV/field artifacts there, and finishes
//! with `summary.json`. Exit codes follow [`summary::exit`].

pub mod commands;
pub mod config;
pub mod expr;
pub mod summary;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use config::ExperimentConfig;
use summary::{exit, Summary};

#[derive(Debug, Parser)]
#[command(name = "hqlab", version, about = "Hessian quotient equations on flat complex tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key = value experiment config.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "U64", default_value_t = crate::selftest::DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for data-parallel loops.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Reduced trial counts (self-test only).
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cone condition margins and strict/boundary/violated classification.
    CheckCone(CommonArgs),
    /// One Newton solve at parameter `t`.
    Solve(CommonArgs),
    /// Continuation along the `t` schedule.
    Continue(CommonArgs),
    /// Stability constants over a shrinking density perturbation.
    Stability(CommonArgs),
    /// Two-stage solve of the fake boundary problem.
    FakeBoundary(CommonArgs),
    /// Property suites and oracles.
    Selftest(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckCone(_) => "check-cone",
            Command::Solve(_) => "solve",
            Command::Continue(_) => "continue",
            Command::Stability(_) => "stability",
            Command::FakeBoundary(_) => "fake-boundary",
            Command::Selftest(_) => "selftest",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::CheckCone(a)
            | Command::Solve(a)
            | Command::Continue(a)
            | Command::Stability(a)
            | Command::FakeBoundary(a)
            | Command::Selftest(a) => a,
        }
    }
}

fn prepare(cmd: &Command) -> Result<(ExperimentConfig, PathBuf)> {
    let args = cmd.args();
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = args.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    if args.threads == Some(0) {
        return Err(Error::Input("--threads must be positive".into()));
    }
    Ok((cfg, out))
}

fn write_outputs(out: &Path, cfg: &ExperimentConfig, summary: &Summary) -> Result<()> {
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    fs::write(out.join("summary.json"), summary.to_json())?;
    Ok(())
}

/// Runs one parsed invocation; returns the summary (when one was produced) and
/// the process exit code.
pub fn execute(cli: &Cli) -> (Option<Summary>, i32) {
    let cmd = &cli.command;
    let (cfg, out) = match prepare(cmd) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("hqlab {}: {e}", cmd.name());
            return (None, exit::USAGE);
        }
    };
    let args = cmd.args();
    if let Some(t) = args.threads {
        // a pool can only be installed once per process; later calls keep the first
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("hqlab {}: cannot create {}: {e}", cmd.name(), out.display());
        return (None, exit::USAGE);
    }
    let mut summary = Summary::new(cmd.name(), args.seed, args.threads);
    commands::guarded(&mut summary, |s| match cmd {
        Command::CheckCone(_) => commands::check_cone(&cfg, &out, s),
        Command::Solve(_) => commands::solve(&cfg, &out, s),
        Command::Continue(_) => commands::continue_path(&cfg, &out, s),
        Command::Stability(_) => commands::stability(&cfg, &out, s),
        Command::FakeBoundary(_) => commands::fake_boundary(&cfg, &out, s),
        Command::Selftest(a) => commands::selftest(a.quick, a.seed, s),
    });
    summary.finalize();
    if let Err(e) = write_outputs(&out, &cfg, &summary) {
        eprintln!("hqlab {}: cannot write outputs: {e}", cmd.name());
        return (Some(summary), exit::FAILURE);
    }
    let code = summary.exit_code;
    (Some(summary), code)
}

/// Entry point for `main`: parses `argv`, runs, prints a one-line status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let (summary, code) = execute(&cli);
    if let Some(s) = summary {
        let failed = s.assertions.iter().filter(|a| !a.passed).count();
        println!(
            "{}: {:?} (exit {code}), {} assertions, {failed} failed{}",
            s.command,
            s.status,
            s.assertions.len(),
            s.failing_stage.as_ref().map(|st| format!(", stage {st}")).unwrap_or_default()
        );
        if let Some(e) = &s.error {
            eprintln!("error: {e}");
        }
    }
    code
}
