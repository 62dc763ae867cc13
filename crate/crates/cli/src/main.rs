//! `grouppdo`: runs the named verification suites on a configured grid and
//! writes a self-contained JSON report.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 for
//! usage or configuration errors.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use grouppdo::checks::{dense_limit, run_suite, Command, Context};
use grouppdo::expcalc::ScalarSymbol;
use grouppdo::group::{build_grid, Backend, GridConfig};
use grouppdo::plancherel::DiagnosticRecord;
use grouppdo::samples::{random_scalar_symbol, PacketFamily, Patch};

use config::Config;
use report::{CheckRecord, ExperimentReport, Output, TrajectoryPoint};

/// Residuals below this are rounding noise and need not decrease.
const ROUNDING_FLOOR: f64 = 1e-11;

#[derive(Parser, Debug)]
#[command(
    name = "grouppdo",
    version,
    about = "Verification experiments for the group pseudo-differential calculus"
)]
struct Cli {
    /// plancherel-check, quantize-check, moyal-check, covariance-check,
    /// tilde-check, multconv-check, crossed-check, expcalc-check or all.
    command: String,
    /// JSON config: {backend, grid, tolerances, seed}.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report and data files.
    #[arg(long)]
    out: PathBuf,
    /// Run a refinement sweep over this many grid levels (at least 2).
    #[arg(long)]
    levels: Option<usize>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("grouppdo: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, String> {
    let command: Command = cli.command.parse().map_err(|e| format!("{e}"))?;
    if let Some(levels) = cli.levels {
        if levels < 2 {
            return Err(format!("--levels must be at least 2, got {levels}"));
        }
    }
    let config = Config::load(&cli.config)?;
    let seed = cli.seed.unwrap_or(config.seed);
    let out = Output::new(&cli.out)?;
    let start = Instant::now();

    let mut grids = vec![config.grid.clone()];
    for _ in 1..cli.levels.unwrap_or(1) {
        let next = grids.last().unwrap().refined().map_err(|e| e.to_string())?;
        grids.push(next);
    }
    let mut report = ExperimentReport::new(command, &config, seed);
    let suites = plan(command, &grids, cli.levels.is_some(), &mut report)?;
    match cli.levels {
        None => single(&suites, &config, seed, &mut report, &out)?,
        Some(_) => sweep(command, &suites, &config, &grids, seed, &mut report, &out)?,
    }
    report.finish(start.elapsed().as_secs_f64());
    out.write_json(&format!("{}.json", command.name()), &report)?;
    for c in &report.checks {
        let value = c
            .residual
            .map_or_else(|| c.error.clone().unwrap_or_default(), |r| format!("{r:.3e}"));
        let level = c.level.map_or_else(String::new, |l| format!(" [level {l}]"));
        println!(
            "{} {}/{}{level}: {value}",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.name
        );
    }
    Ok(report.pass)
}

/// Suites to run.  A suite that cannot run on these grids is a usage error
/// when named directly and is listed as skipped under `all`.
fn plan(
    command: Command,
    grids: &[GridConfig],
    sweep: bool,
    report: &mut ExperimentReport,
) -> Result<Vec<Command>, String> {
    let finest = grids.last().unwrap();
    let nodes = build_grid(finest).map_err(|e| e.to_string())?.len();
    let mut suites = Vec::new();
    for suite in command.suites() {
        let reason = if suite == Command::ExpcalcCheck && finest.backend == Backend::Cyclic {
            Some(format!("{suite} needs the affine backend"))
        } else {
            match dense_limit(suite, sweep) {
                Some(limit) if finest.backend == Backend::Affine && nodes > limit => Some(format!(
                    "{suite} builds dense {nodes} x {nodes} kernels; the limit is {limit} nodes"
                )),
                _ => None,
            }
        };
        match reason {
            None => suites.push(suite),
            Some(r) if command == Command::All => report.skip(suite, r),
            Some(r) => return Err(r),
        }
    }
    Ok(suites)
}

fn single(
    suites: &[Command],
    config: &Config,
    seed: u64,
    report: &mut ExperimentReport,
    out: &Output,
) -> Result<(), String> {
    let ctx = Context::new(&config.grid, seed, config.tolerances.clone()).map_err(|e| e.to_string())?;
    for &suite in suites {
        match run_suite(suite, &ctx, false) {
            Ok(results) => {
                for r in results {
                    report.diagnostics.push(DiagnosticRecord {
                        test: format!("{suite}/{}", r.name),
                        backend: config.grid.backend,
                        grid: config.grid.clone(),
                        residual: r.residual,
                        refinement_level: 0,
                    });
                    report.checks.push(CheckRecord::from_result(suite, &r));
                }
            }
            Err(e) => report.checks.push(CheckRecord::error(suite, &e.to_string())),
        }
        if suite == Command::ExpcalcCheck {
            write_scalar_symbol(&ctx, out)?;
        }
    }
    Ok(())
}

/// The symbol used by `expcalc-check`, as CSV plus lattice manifest.
fn write_scalar_symbol(ctx: &Context, out: &Output) -> Result<(), String> {
    let family = PacketFamily {
        tau: 0.3,
        ..PacketFamily::default()
    };
    let b: ScalarSymbol = random_scalar_symbol(&ctx.grid, ctx.seed, Patch::interior(), family);
    out.write_with("expcalc_symbol.csv", |p| b.write_csv(p))?;
    out.write_with("expcalc_lattice.json", |p| b.write_manifest(p))
}

fn sweep(
    command: Command,
    suites: &[Command],
    config: &Config,
    grids: &[GridConfig],
    seed: u64,
    report: &mut ExperimentReport,
    out: &Output,
) -> Result<(), String> {
    let mut trajectory = Vec::new();
    for &suite in suites {
        let mut points: Vec<TrajectoryPoint> = Vec::new();
        let mut failed = None;
        for (level, grid) in grids.iter().enumerate() {
            let result = Context::new(grid, seed, config.tolerances.clone()).and_then(|ctx| {
                let nodes = ctx.grid.len();
                run_suite(suite, &ctx, true).map(|r| (nodes, r))
            });
            match result {
                Ok((nodes, results)) => {
                    let r = &results[0];
                    report.diagnostics.push(DiagnosticRecord {
                        test: format!("{suite}/{}", r.name),
                        backend: grid.backend,
                        grid: grid.clone(),
                        residual: r.residual,
                        refinement_level: level,
                    });
                    report.checks.push(CheckRecord::from_result(suite, r).at_level(level));
                    points.push(TrajectoryPoint::new(suite, r, level, nodes));
                }
                Err(e) => {
                    failed = Some(e.to_string());
                    report
                        .checks
                        .push(CheckRecord::error(suite, &e.to_string()).at_level(level));
                    break;
                }
            }
        }
        if failed.is_none() {
            report.checks.push(monotonicity(suite, &points));
        }
        trajectory.extend(points);
    }
    out.write_with(&format!("{}_sweep.csv", command.name()), |p| {
        report::write_trajectory_csv(p, &trajectory)
    })?;
    report.trajectory = Some(trajectory);
    Ok(())
}

/// Largest increase between consecutive levels, ignoring pairs that both sit
/// at the rounding floor; passes when it is negative or zero.
fn monotonicity(suite: Command, points: &[TrajectoryPoint]) -> CheckRecord {
    let worst = points
        .windows(2)
        .filter(|w| w[0].residual > ROUNDING_FLOOR || w[1].residual > ROUNDING_FLOOR)
        .map(|w| w[1].residual - w[0].residual)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    let name = points.first().map_or("residual", |p| p.check.as_str());
    CheckRecord {
        suite: suite.name().into(),
        name: format!("{name}_monotone"),
        level: None,
        residual: Some(worst),
        tolerance: Some(0.0),
        pass: worst <= 0.0,
        error: None,
    }
}
