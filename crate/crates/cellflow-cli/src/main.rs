//! Batch front end: solve scenarios, run sweeps, compare engines, and
//! simulate, all driven by one TOML file.
//!
//! Exit codes: 0 success, 2 unusable config or flags, 3 infeasible
//! scenario (the message names the violated stability condition), 4 an
//! iterative solver did not converge.

mod exec;
mod rows;

use std::fs::File;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use cellflow_core::config::{self, AppConfig, EngineChoice, SweepParameter};

use crate::exec::{CliError, EngineReport};
use crate::rows::PointResult;

const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Parser)]
#[command(
    name = "cellflow",
    version,
    about = "Flow-level throughput and handover analysis for processor-sharing cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with analytic engines and print KPI tables.
    Solve(RunArgs),
    /// Run the sweep configured in the file and emit CSV rows.
    Sweep(RunArgs),
    /// Report per-KPI maximum relative gaps between engines.
    Compare(RunArgs),
    /// Estimate KPIs with the discrete-event simulator.
    Simulate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario file.
    config: PathBuf,
    /// Engine to run (markov, qs, sim, network-sim, fixed-point,
    /// fixed-point:qs); repeatable.
    #[arg(long = "engine", value_name = "NAME")]
    engines: Vec<String>,
    /// Master random seed; falls back to CELLFLOW_SEED, then the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV (JSON for compare) here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Simulation runs per point (overrides the config).
    #[arg(long, value_name = "N")]
    runs: Option<usize>,
    /// Target simulated events per run (overrides the config).
    #[arg(long = "events-per-run", value_name = "N")]
    events_per_run: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_app(args: &RunArgs) -> Result<AppConfig, CliError> {
    let mut app = config::load(&args.config)?;
    if let Some(runs) = args.runs {
        if runs < 2 {
            return Err(CliError::config(
                "--runs must be at least 2 for confidence intervals",
            ));
        }
        app.sim.runs = runs;
    }
    if let Some(events) = args.events_per_run {
        if events == 0 {
            return Err(CliError::config("--events-per-run must be positive"));
        }
        app.sim.events_per_run = events;
    }
    Ok(app)
}

fn parse_engines(args: &RunArgs) -> Result<Vec<EngineChoice>, CliError> {
    args.engines
        .iter()
        .map(|s| s.parse::<EngineChoice>().map_err(CliError::from))
        .collect()
}

fn selected_engines(
    args: &RunArgs,
    default: &[EngineChoice],
) -> Result<Vec<EngineChoice>, CliError> {
    let parsed = parse_engines(args)?;
    Ok(if parsed.is_empty() {
        default.to_vec()
    } else {
        parsed
    })
}

/// Precedence: flag, CELLFLOW_SEED, config, fixed default.
fn resolve_seed(args: &RunArgs, app: &AppConfig) -> Result<u64, CliError> {
    if let Some(seed) = args.seed {
        return Ok(seed);
    }
    if let Ok(text) = std::env::var("CELLFLOW_SEED") {
        return text.trim().parse().map_err(|_| {
            CliError::config(format!("CELLFLOW_SEED {text:?} is not an unsigned integer"))
        });
    }
    Ok(app.sim.seed.unwrap_or(DEFAULT_SEED))
}

/// Independent master seed per sweep point so the grid can run in any
/// order and still reproduce.
fn point_seed(master: u64, point: usize) -> u64 {
    let mut z = master ^ (point as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn require_topology_for_network_sim(
    engines: &[EngineChoice],
    app: &AppConfig,
) -> Result<(), CliError> {
    if engines.contains(&EngineChoice::NetworkSim) && app.topology.is_none() {
        return Err(CliError::config(
            "the network-sim engine needs a [topology] section",
        ));
    }
    Ok(())
}

fn write_results(args: &RunArgs, results: &[PointResult]) -> Result<(), CliError> {
    let to_io = |e: csv::Error| CliError::io(e.to_string());
    match &args.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
            rows::write_csv(file, results).map_err(to_io)
        }
        None => rows::write_csv(std::io::stdout().lock(), results).map_err(to_io),
    }
}

fn cmd_solve(args: &RunArgs) -> Result<(), CliError> {
    let app = load_app(args)?;
    let engines = selected_engines(args, &[EngineChoice::Markov])?;
    for engine in &engines {
        if engine.is_stochastic() {
            return Err(CliError::config(format!(
                "engine {engine} is stochastic; use the simulate command"
            )));
        }
    }
    let mut reports: Vec<EngineReport> = Vec::new();
    for &engine in &engines {
        reports.push(exec::evaluate(
            engine,
            &app.scenario,
            app.topology.as_ref(),
            &app.sim,
            DEFAULT_SEED,
        )?);
    }
    for (i, report) in reports.iter().enumerate() {
        rows::print_report(engines[i], report);
        if i > 0 {
            rows::print_gaps(engines[0], &reports[0], report);
        }
    }
    if args.out.is_some() {
        let results: Vec<PointResult> = engines
            .iter()
            .zip(reports)
            .map(|(&engine, report)| PointResult {
                point: 0,
                sweep_value: None,
                engine,
                outcome: Ok(report),
            })
            .collect();
        write_results(args, &results)?;
    }
    Ok(())
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let app = load_app(args)?;
    let default = if app.topology.is_some() {
        EngineChoice::NetworkSim
    } else {
        EngineChoice::Sim
    };
    let engines = selected_engines(args, &[default])?;
    for engine in &engines {
        if !engine.is_stochastic() {
            return Err(CliError::config(format!(
                "engine {engine} is analytic; use the solve command"
            )));
        }
    }
    require_topology_for_network_sim(&engines, &app)?;
    let seed = resolve_seed(args, &app)?;
    let mut reports: Vec<EngineReport> = Vec::new();
    for &engine in &engines {
        let report = exec::evaluate(engine, &app.scenario, app.topology.as_ref(), &app.sim, seed)?;
        rows::print_report(engine, &report);
        reports.push(report);
    }
    if args.out.is_some() {
        let results: Vec<PointResult> = engines
            .iter()
            .zip(reports)
            .map(|(&engine, report)| PointResult {
                point: 0,
                sweep_value: None,
                engine,
                outcome: Ok(report),
            })
            .collect();
        write_results(args, &results)?;
    }
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<(), CliError> {
    let app = load_app(args)?;
    let sweep = app
        .sweep
        .clone()
        .ok_or_else(|| CliError::config("the sweep command needs a [sweep] section"))?;
    let engines = selected_engines(args, &sweep.engines)?;
    require_topology_for_network_sim(&engines, &app)?;
    let seed = resolve_seed(args, &app)?;
    let results = run_grid(
        &app,
        Some(sweep.parameter),
        &grid(&sweep.values),
        &engines,
        seed,
    );
    write_results(args, &results)
}

fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let app = load_app(args)?;
    let mut engines = parse_engines(args)?;
    if engines.is_empty() {
        if let Some(sweep) = &app.sweep {
            engines = sweep.engines.clone();
        }
    }
    let mut unique: Vec<EngineChoice> = Vec::new();
    for engine in engines {
        if !unique.contains(&engine) {
            unique.push(engine);
        }
    }
    if unique.len() < 2 {
        return Err(CliError::config(
            "compare needs at least two distinct engines (repeat --engine)",
        ));
    }
    require_topology_for_network_sim(&unique, &app)?;
    let seed = resolve_seed(args, &app)?;
    let (parameter, values): (Option<SweepParameter>, Vec<Option<f64>>) = match &app.sweep {
        Some(sweep) => (
            Some(sweep.parameter),
            sweep.values.iter().map(|&v| Some(v)).collect(),
        ),
        None => (None, vec![None]),
    };
    let results = run_grid(&app, parameter, &values, &unique, seed);
    let report = rows::compare_json(&unique, &results);
    let text = serde_json::to_string_pretty(&report).expect("serializable report");
    println!("{text}");
    if let Some(path) = &args.out {
        let mut file = File::create(path)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        writeln!(file, "{text}").map_err(|e| CliError::io(e.to_string()))?;
    }
    Ok(())
}

fn grid(values: &[f64]) -> Vec<Option<f64>> {
    values.iter().map(|&v| Some(v)).collect()
}

/// Evaluate every (point, engine) pair on the worker pool; the collected
/// order is the declaration order, so output stays in grid order no
/// matter which task finishes first.
fn run_grid(
    app: &AppConfig,
    parameter: Option<SweepParameter>,
    values: &[Option<f64>],
    engines: &[EngineChoice],
    seed: u64,
) -> Vec<PointResult> {
    let tasks: Vec<(usize, Option<f64>, EngineChoice)> = values
        .iter()
        .enumerate()
        .flat_map(|(i, &value)| engines.iter().map(move |&engine| (i, value, engine)))
        .collect();
    tasks
        .par_iter()
        .map(|&(point, value, engine)| {
            let sweep = match (parameter, value) {
                (Some(p), Some(v)) => Some((p, v)),
                _ => None,
            };
            PointResult {
                point,
                sweep_value: value,
                engine,
                outcome: exec::evaluate_point(app, sweep, engine, point_seed(seed, point))
                    .map_err(|e| e.status()),
            }
        })
        .collect()
}
