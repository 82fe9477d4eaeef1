//! `warpstab`: run experiments from a TOML config and write JSON/CSV artifacts.
//!
//! Exit codes: 0 success, 1 I/O failure or `compare` differences, 2 invalid config or report
//! mismatch, 3 solver failure, 4 failed checks under `--strict`.

mod compare;
mod config;
mod error;
mod experiments;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::Report;

#[derive(Parser, Debug)]
#[command(name = "warpstab", version, about = "Serrin-type problems and stability deficits in warped products")]
struct Cli {
    /// Root under which runs without an explicit output directory are placed.
    #[arg(long, global = true, env = "WARPSTAB_OUTPUT_ROOT", default_value = "warpstab-out")]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check hypotheses H1-H5 on the warping profile.
    VerifyHypotheses(RunArgs),
    /// Solve the Serrin problem and report its deficits.
    SolveSerrin(RunArgs),
    /// Solve the warped torsion problem and report its energies and bounds.
    SolveWarped(RunArgs),
    /// Integral identity residuals over a sequence of refinements.
    Identities(RunArgs),
    /// Heintze-Karcher deficit of the domain boundary.
    HkDeficit(RunArgs),
    /// Constant-mean-curvature deficit of the domain boundary.
    CmcDeficit(RunArgs),
    /// Deficits along a one-parameter family of perturbed boundaries.
    Sweep(RunArgs),
    /// Compare two reports field by field.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config and the output root).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 4 when any check in the report fails.
    #[arg(long)]
    strict: bool,
    /// Mesh size (overrides `solver.h`).
    #[arg(long)]
    h: Option<f64>,
    /// Seed for randomized sample grids (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Largest accepted relative difference per field.
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    /// Absolute differences up to this size are accepted regardless of the relative size.
    #[arg(long, default_value_t = 0.0)]
    abs_tol: f64,
    /// Write the full comparison to this JSON file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match cli.command {
        Command::Compare(args) => return run_compare(&args),
        Command::VerifyHypotheses(a) => ("verify-hypotheses", a),
        Command::SolveSerrin(a) => ("solve-serrin", a),
        Command::SolveWarped(a) => ("solve-warped", a),
        Command::Identities(a) => ("identities", a),
        Command::HkDeficit(a) => ("hk-deficit", a),
        Command::CmcDeficit(a) => ("cmc-deficit", a),
        Command::Sweep(a) => ("sweep", a),
    };
    run_experiment(name, &args, &cli.output_root)
}

fn output_dir(args: &RunArgs, cfg: &RunConfig, root: &Path) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Some(out) = &cfg.output {
        return PathBuf::from(out);
    }
    let stem = args.config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    root.join(stem)
}

fn run_experiment(name: &str, args: &RunArgs, root: &Path) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.select(name)?;
    if let Some(h) = args.h {
        cfg.solver.h = h;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let prepared = cfg.validate()?;
    let dir = output_dir(args, &cfg, root);

    let start = Instant::now();
    let artifacts = experiments::run(&cfg, &prepared)?;
    report::write_artifacts(&dir, &artifacts, &args.config, start.elapsed().as_secs_f64())?;

    let failed = artifacts.report.failed_checks();
    println!(
        "{name}: {} check(s), {} failed; artifacts in {}",
        artifacts.report.checks.len(),
        failed.len(),
        dir.display()
    );
    for c in &failed {
        println!("  failed: {} = {:e} (limit {:e})", c.name, c.value, c.limit);
    }
    if args.strict && !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        return Err(CliError::Strict(failed.len(), names.join(", ")));
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<(), CliError> {
    let a = Report::read(&args.a).map_err(|e| CliError::Schema(format!("{e:#}")))?;
    let b = Report::read(&args.b).map_err(|e| CliError::Schema(format!("{e:#}")))?;
    let cmp = compare::compare(&a, &b, args.rel_tol, args.abs_tol)?;
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&cmp).map_err(anyhow::Error::from)? + "\n";
        std::fs::write(out, text).map_err(|e| anyhow::anyhow!("writing {}: {e}", out.display()))?;
    }
    println!(
        "{}: {} field(s), max relative difference {:e}, {} beyond tolerance",
        cmp.kind, cmp.fields, cmp.max_relative, cmp.exceeded
    );
    for d in cmp.diffs.iter().filter(|d| !d.within) {
        println!("  {}: {} vs {} (relative {:e})", d.path, d.a, d.b, d.relative);
    }
    if cmp.exceeded > 0 {
        return Err(CliError::Differences(cmp.exceeded));
    }
    Ok(())
}
