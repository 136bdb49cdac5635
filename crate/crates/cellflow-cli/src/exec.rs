//! Engine dispatch: turn one scenario (or one sweep point) into KPI rows,
//! with failures classified for the exit-code contract.

use cellflow_core::config::{self, AppConfig, EngineChoice, SimSettings, SweepParameter};
use cellflow_core::markov::{self, MarkovError, TruncationOptions};
use cellflow_core::network::{
    self, Engine, EngineError, FixedPointOptions, NetworkError, NetworkTopology,
};
use cellflow_core::qs::{self, QsError};
use cellflow_core::sim::{self, CellMode, SimError, SimSummary};
use cellflow_core::{CellScenario, Kpis};

/// Failure category; decides the process exit code and the status label
/// in sweep rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unusable input: bad file, bad flag, engine/config mismatch.
    Config,
    /// The scenario has no equilibrium; the message names the violated
    /// stability condition.
    Infeasible,
    /// An iterative solver gave up before reaching its tolerance.
    NonConvergence,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Io => 1,
            ErrorKind::Config => 2,
            ErrorKind::Infeasible => 3,
            ErrorKind::NonConvergence => 4,
        }
    }

    /// Status-column form, prefixed with the category so a CSV consumer
    /// can filter without parsing the message.
    pub fn status(&self) -> String {
        let label = match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::Infeasible => "infeasible",
            ErrorKind::NonConvergence => "no-convergence",
            ErrorKind::Io => "io",
        };
        format!("{label}: {}", self.message)
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        Self::config(e.to_string())
    }
}

fn markov_kind(e: &MarkovError) -> ErrorKind {
    match e {
        MarkovError::Unstable { .. } => ErrorKind::Infeasible,
        _ => ErrorKind::NonConvergence,
    }
}

fn qs_kind(e: &QsError) -> ErrorKind {
    match e {
        QsError::Unstable { .. } => ErrorKind::Infeasible,
        QsError::SeveralMobileClasses { .. } => ErrorKind::Config,
    }
}

impl From<MarkovError> for CliError {
    fn from(e: MarkovError) -> Self {
        Self {
            kind: markov_kind(&e),
            message: e.to_string(),
        }
    }
}

impl From<QsError> for CliError {
    fn from(e: QsError) -> Self {
        Self {
            kind: qs_kind(&e),
            message: e.to_string(),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        let kind = match &e {
            NetworkError::Infeasible { .. } => ErrorKind::Infeasible,
            NetworkError::NotConverged { .. } => ErrorKind::NonConvergence,
            NetworkError::BadTopology { .. } => ErrorKind::Config,
            NetworkError::Engine { source, .. } => match source {
                EngineError::Markov(m) => markov_kind(m),
                EngineError::Qs(q) => qs_kind(q),
            },
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::config(e.to_string())
    }
}

/// One class's KPIs, with half-widths when the engine is stochastic.
#[derive(Debug, Clone)]
pub struct ClassRow {
    pub class: String,
    pub e_n: f64,
    pub gamma: f64,
    pub h: f64,
    pub ci: Option<ClassCi>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassCi {
    pub e_n: f64,
    pub gamma: f64,
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct CellBlock {
    pub cell: usize,
    pub capacity: f64,
    /// Analytic engines only; the simulator does not estimate it.
    pub empty_probability: Option<f64>,
    pub classes: Vec<ClassRow>,
}

#[derive(Debug, Clone)]
pub struct EngineReport {
    pub cells: Vec<CellBlock>,
    pub diagnostics: String,
}

fn kpi_block(cell: usize, scenario: &CellScenario, kpis: &Kpis) -> CellBlock {
    let classes = scenario
        .classes
        .iter()
        .zip(&kpis.classes)
        .map(|(c, k)| ClassRow {
            class: c.name.clone(),
            e_n: k.mean_occupancy,
            gamma: k.throughput,
            h: k.handover_probability,
            ci: None,
        })
        .collect();
    CellBlock {
        cell,
        capacity: scenario.capacity,
        empty_probability: Some(kpis.empty_probability),
        classes,
    }
}

fn sim_block(cell: usize, scenario: &CellScenario, summary: &SimSummary) -> CellBlock {
    let classes = scenario
        .classes
        .iter()
        .zip(&summary.classes)
        .map(|(c, est)| ClassRow {
            class: c.name.clone(),
            e_n: est.mean_occupancy.mean,
            gamma: est.throughput.mean,
            h: est.handover_probability.mean,
            ci: Some(ClassCi {
                e_n: est.mean_occupancy.half_width,
                gamma: est.throughput.half_width,
                h: est.handover_probability.half_width,
            }),
        })
        .collect();
    CellBlock {
        cell,
        capacity: scenario.capacity,
        empty_probability: None,
        classes,
    }
}

/// Apply the sweep (when given) and evaluate. Every failure comes back as
/// a classified error so sweep rows can carry it in the status column.
pub fn evaluate_point(
    app: &AppConfig,
    sweep: Option<(SweepParameter, f64)>,
    engine: EngineChoice,
    seed: u64,
) -> Result<EngineReport, CliError> {
    let (scenario, topology) = match sweep {
        None => (app.scenario.clone(), app.topology.clone()),
        Some((parameter, value)) => {
            let swept = config::apply_sweep(&app.scenario, app.radius_m, parameter, value)?;
            let topology = app
                .topology
                .as_ref()
                .map(|t| retarget(t, &swept))
                .transpose()?;
            (swept, topology)
        }
    };
    evaluate(engine, &scenario, topology.as_ref(), &app.sim, seed)
}

/// Rebuild the topology around a swept scenario: per-cell capacities and
/// routing survive, the class list is replaced everywhere.
fn retarget(topology: &NetworkTopology, swept: &CellScenario) -> Result<NetworkTopology, CliError> {
    let cells = topology
        .cells
        .iter()
        .map(|c| CellScenario::new(c.capacity, swept.classes.clone()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok(NetworkTopology::new(cells, topology.routing.clone())?)
}

pub fn evaluate(
    engine: EngineChoice,
    scenario: &CellScenario,
    topology: Option<&NetworkTopology>,
    sim_settings: &SimSettings,
    seed: u64,
) -> Result<EngineReport, CliError> {
    match engine {
        EngineChoice::Markov => {
            let solution = markov::solve_auto(scenario, &TruncationOptions::default())?;
            let worst = solution.conservation.iter().fold(0.0_f64, |a, &r| a.max(r));
            let dist = &solution.distribution;
            let diagnostics = format!(
                "bounds={:?} states={} balance_residual={:.2e} sweeps={} \
                 tail_mass={:.1e} conservation_max={:.2e}",
                dist.space().bounds(),
                dist.space().len(),
                dist.residual,
                dist.sweeps,
                dist.tail_mass,
                worst
            );
            Ok(EngineReport {
                cells: vec![kpi_block(0, scenario, &solution.kpis)],
                diagnostics,
            })
        }
        EngineChoice::Qs => {
            let solution = qs::qs_kpis(scenario)?;
            let diagnostics = format!(
                "A={:.12e} mobile_mean={:.6e} step1_empty={:.6e} q_len={}",
                solution.a,
                solution.mobile_mean,
                solution.step1.empty_probability,
                solution.q.len()
            );
            Ok(EngineReport {
                cells: vec![kpi_block(0, scenario, &solution.kpis)],
                diagnostics,
            })
        }
        EngineChoice::FixedPoint | EngineChoice::FixedPointQs => {
            let inner = if engine == EngineChoice::FixedPoint {
                Engine::Markov
            } else {
                Engine::Qs
            };
            let options = FixedPointOptions::default();
            let (result, cell_scenarios): (_, Vec<&CellScenario>) = match topology {
                Some(t) => (
                    network::solve_heterogeneous(t, inner, &options)?,
                    t.cells.iter().collect(),
                ),
                None => (
                    network::solve_homogeneous(scenario, inner, &options)?,
                    vec![scenario],
                ),
            };
            let cells = result
                .kpis
                .iter()
                .zip(&cell_scenarios)
                .enumerate()
                .map(|(i, (kpis, sc))| kpi_block(i, sc, kpis))
                .collect();
            let rates: Vec<String> = result
                .handover_in
                .iter()
                .map(|cell| {
                    let inner: Vec<String> = cell.iter().map(|v| format!("{v:.4e}")).collect();
                    format!("[{}]", inner.join(","))
                })
                .collect();
            let diagnostics = format!(
                "iterations={} residual={:.2e} handover_in={}",
                result.iterations,
                result.residual,
                rates.join(" ")
            );
            Ok(EngineReport { cells, diagnostics })
        }
        EngineChoice::Sim => {
            let report = markov::check_stability(scenario);
            if !report.stable {
                return Err(MarkovError::Unstable {
                    static_load: report.static_load,
                }
                .into());
            }
            let total_rate: f64 = scenario.classes.iter().map(|c| c.arrival_rate).sum();
            if total_rate <= 0.0 {
                return Err(CliError::config("nothing arrives: all rates are zero"));
            }
            let horizon = sim::horizon_for_events(total_rate, sim_settings.events_per_run);
            let summary = sim::replicate_cell(
                scenario,
                &CellMode::Impatience,
                horizon,
                seed,
                sim_settings.runs,
            )?;
            let diagnostics = format!(
                "runs={} window={:.3e}s mean_events={:.3e} seed={seed}",
                summary.runs, summary.duration, summary.mean_events
            );
            Ok(EngineReport {
                cells: vec![sim_block(0, scenario, &summary)],
                diagnostics,
            })
        }
        EngineChoice::NetworkSim => {
            let topology = topology.ok_or_else(|| {
                CliError::config("the network-sim engine needs a [topology] section")
            })?;
            for (i, cell) in topology.cells.iter().enumerate() {
                let load = cell.total_load();
                if load >= 1.0 {
                    return Err(NetworkError::Infeasible { cell: i, load }.into());
                }
            }
            let total_rate: f64 = topology
                .cells
                .iter()
                .flat_map(|c| c.classes.iter())
                .map(|c| c.arrival_rate)
                .sum();
            if total_rate <= 0.0 {
                return Err(CliError::config("nothing arrives: all rates are zero"));
            }
            let horizon = sim::horizon_for_events(total_rate, sim_settings.events_per_run);
            let summaries = sim::replicate_network(topology, horizon, seed, sim_settings.runs)?;
            let cells = summaries
                .iter()
                .zip(&topology.cells)
                .enumerate()
                .map(|(i, (summary, sc))| sim_block(i, sc, summary))
                .collect();
            let mean_events: f64 = summaries.iter().map(|s| s.mean_events).sum::<f64>();
            let diagnostics = format!(
                "runs={} window={:.3e}s mean_events={:.3e} seed={seed}",
                summaries[0].runs, summaries[0].duration, mean_events
            );
            Ok(EngineReport { cells, diagnostics })
        }
    }
}
