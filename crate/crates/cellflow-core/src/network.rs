//! Fixed-point solvers for networks of cells coupled by handover traffic.
//!
//! A mobile flow that leaves cell `j` before finishing re-enters a neighbor
//! according to routing probabilities and continues its transfer there. In
//! equilibrium the per-cell arrival rate of class `k` splits into fresh
//! traffic and handover in-traffic, `lambda = lambda0 + lambda_in`, and the
//! in-rates must balance the out-rates `lambda_out = theta * E(N)` through
//! the routing matrix. Both solvers iterate this balance map with damping,
//! evaluating each cell with a pluggable single-cell engine.
//!
//! The homogeneous solver studies one representative cell of a symmetric
//! network, where every cell sees the same in-rate it emits. The
//! heterogeneous solver iterates all cells jointly, Jacobi style.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{self, MarkovError, TruncationOptions};
use crate::model::{CellScenario, Kpis};
use crate::qs::{self, QsError};

/// Guard for relative residuals when an in-rate is still zero.
const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cell {cell}: fresh offered load {load} is not below 1, no equilibrium exists")]
    Infeasible { cell: usize, load: f64 },
    #[error("handover balance not reached after {iterations} iterations, residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("cell {cell}: {source}")]
    Engine {
        cell: usize,
        #[source]
        source: EngineError,
    },
    #[error("invalid topology: {reason}")]
    BadTopology { reason: String },
}

/// Single-cell engine failure, tagged by which engine produced it.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Qs(#[from] QsError),
}

/// Which single-cell engine evaluates the performance function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Engine {
    /// Exact truncated-chain solver: accurate, heavier per evaluation.
    Markov,
    /// Two-pass quasi-stationary scheme: closed forms, fast.
    Qs,
}

impl Engine {
    fn evaluate(&self, scenario: &CellScenario) -> Result<(Vec<f64>, Kpis), EngineError> {
        let kpis = match self {
            Engine::Markov => markov::solve_auto(scenario, &TruncationOptions::default())?.kpis,
            Engine::Qs => qs::qs_kpis(scenario)?.kpis,
        };
        let out = scenario
            .classes
            .iter()
            .zip(&kpis.classes)
            .map(|(class, k)| class.mobility_rate * k.mean_occupancy)
            .collect();
        Ok((out, kpis))
    }
}

/// Cells plus per-class routing. `routing[k][j][i]` is the probability that
/// a class-`k` flow leaving cell `j` continues in cell `i`. Every row is
/// either stochastic (within 1e-12) or identically zero (flows of that
/// class leave the network from that cell), with nothing on the diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub cells: Vec<CellScenario>,
    pub routing: Vec<Vec<Vec<f64>>>,
}

impl NetworkTopology {
    pub fn new(
        cells: Vec<CellScenario>,
        routing: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, NetworkError> {
        let bad = |reason: String| NetworkError::BadTopology { reason };
        if cells.is_empty() {
            return Err(bad("no cells".into()));
        }
        let n_classes = cells[0].classes.len();
        for (i, cell) in cells.iter().enumerate() {
            if cell.classes.len() != n_classes {
                return Err(bad(format!(
                    "cell {i} has {} classes, cell 0 has {n_classes}",
                    cell.classes.len()
                )));
            }
            for (k, class) in cell.classes.iter().enumerate() {
                if class.name != cells[0].classes[k].name {
                    return Err(bad(format!(
                        "class {k} is named {:?} in cell {i} but {:?} in cell 0",
                        class.name, cells[0].classes[k].name
                    )));
                }
            }
        }
        if routing.len() != n_classes {
            return Err(bad(format!(
                "{} routing matrices for {n_classes} classes",
                routing.len()
            )));
        }
        for (k, matrix) in routing.iter().enumerate() {
            if matrix.len() != cells.len() {
                return Err(bad(format!(
                    "class {k}: routing matrix has {} rows for {} cells",
                    matrix.len(),
                    cells.len()
                )));
            }
            for (j, row) in matrix.iter().enumerate() {
                if row.len() != cells.len() {
                    return Err(bad(format!(
                        "class {k}: routing row {j} has {} entries for {} cells",
                        row.len(),
                        cells.len()
                    )));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(bad(format!(
                        "class {k}: routing row {j} has a negative or non-finite entry"
                    )));
                }
                if row[j] != 0.0 {
                    return Err(bad(format!("class {k}: cell {j} routes to itself")));
                }
                let sum: f64 = row.iter().sum();
                if sum != 0.0 && (sum - 1.0).abs() > 1e-12 {
                    return Err(bad(format!(
                        "class {k}: routing row {j} sums to {sum}, expected 0 or 1"
                    )));
                }
            }
        }
        Ok(Self { cells, routing })
    }

    /// Ring of `count` copies of one cell, each routing half of its
    /// leaving flows to each neighbor. Two cells exchange everything; a
    /// single cell has nowhere to send and gets a zero row.
    pub fn ring(cell: CellScenario, count: usize) -> Result<Self, NetworkError> {
        if count == 0 {
            return Err(NetworkError::BadTopology {
                reason: "ring of zero cells".into(),
            });
        }
        let mut matrix = vec![vec![0.0; count]; count];
        match count {
            1 => {}
            2 => {
                matrix[0][1] = 1.0;
                matrix[1][0] = 1.0;
            }
            _ => {
                for j in 0..count {
                    matrix[j][(j + 1) % count] = 0.5;
                    matrix[j][(j + count - 1) % count] = 0.5;
                }
            }
        }
        let routing = vec![matrix; cell.classes.len()];
        Self::new(vec![cell; count], routing)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    /// Step fraction toward the freshly evaluated balance map, in (0, 1].
    pub damping: f64,
    /// Relative handover-balance residual declaring convergence.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}

/// Converged handover equilibrium: in-rates per cell and class, the KPIs
/// of every cell evaluated at those rates, and how hard it was to get
/// there. `residual` is the worst relative gap between each in-rate and
/// the routed sum of out-rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub handover_in: Vec<Vec<f64>>,
    pub kpis: Vec<Kpis>,
    pub iterations: usize,
    pub residual: f64,
}

/// Out-rates `theta_k * E(N_k)` of one cell fed by the given per-class
/// handover in-rates on top of its fresh traffic.
pub fn performance_function(
    cell: &CellScenario,
    handover_in: &[f64],
    engine: Engine,
) -> Result<Vec<f64>, EngineError> {
    let (out, _) = engine.evaluate(&with_inflow(cell, handover_in))?;
    Ok(out)
}

fn with_inflow(cell: &CellScenario, handover_in: &[f64]) -> CellScenario {
    assert_eq!(
        handover_in.len(),
        cell.classes.len(),
        "one in-rate per class"
    );
    let mut out = cell.clone();
    for (class, extra) in out.classes.iter_mut().zip(handover_in) {
        class.arrival_rate += extra;
    }
    out
}

fn relative_residual(current: &[f64], target: &[f64]) -> f64 {
    current
        .iter()
        .zip(target)
        .map(|(c, t)| (t - c).abs() / c.max(RESIDUAL_FLOOR))
        .fold(0.0, f64::max)
}

/// Equilibrium of one representative cell in a symmetric network: every
/// cell re-receives exactly what it emits, so the balance map is
/// `lambda_in <- theta * E(N; lambda0 + lambda_in)` per class. Damped
/// iteration from zero in-rates; total fresh load below one is required
/// (and conjectured sufficient) for the fixed point to exist.
pub fn solve_homogeneous(
    cell: &CellScenario,
    engine: Engine,
    options: &FixedPointOptions,
) -> Result<FixedPointResult, NetworkError> {
    assert!(
        options.damping > 0.0 && options.damping <= 1.0,
        "damping must lie in (0, 1]"
    );
    let load = cell.total_load();
    if load >= 1.0 {
        return Err(NetworkError::Infeasible { cell: 0, load });
    }

    let mut lam_in = vec![0.0; cell.classes.len()];
    let mut climbing = true;
    for iteration in 1..=options.max_iterations {
        let (out, kpis) = engine
            .evaluate(&with_inflow(cell, &lam_in))
            .map_err(|source| NetworkError::Engine { cell: 0, source })?;
        let residual = relative_residual(&lam_in, &out);
        if residual < options.tolerance {
            return Ok(FixedPointResult {
                handover_in: vec![lam_in],
                kpis: vec![kpis],
                iterations: iteration,
                residual,
            });
        }
        if climbing && iteration <= 50 {
            // From a zero start the balance map should only push the
            // in-rates upward while the iterate climbs toward the fixed
            // point; anything else is worth a diagnostic.
            for (k, (&cur, &next)) in lam_in.iter().zip(&out).enumerate() {
                if next < cur * (1.0 - 1e-9) {
                    log::debug!(
                        "handover balance map decreased class {k} at iteration \
                         {iteration}: {cur:e} -> {next:e}"
                    );
                    climbing = false;
                }
            }
        }
        for (cur, next) in lam_in.iter_mut().zip(&out) {
            *cur += options.damping * (next - *cur);
        }
    }

    // One more evaluation prices the final iterate's residual.
    let (out, _) = engine
        .evaluate(&with_inflow(cell, &lam_in))
        .map_err(|source| NetworkError::Engine { cell: 0, source })?;
    Err(NetworkError::NotConverged {
        iterations: options.max_iterations,
        residual: relative_residual(&lam_in, &out),
    })
}

/// Joint equilibrium of all cells: each iteration evaluates every cell at
/// the current in-rates (in parallel), routes the out-rates, and damps.
/// Convergence is declared on the worst per-cell, per-class balance gap.
pub fn solve_heterogeneous(
    topology: &NetworkTopology,
    engine: Engine,
    options: &FixedPointOptions,
) -> Result<FixedPointResult, NetworkError> {
    assert!(
        options.damping > 0.0 && options.damping <= 1.0,
        "damping must lie in (0, 1]"
    );
    let n_cells = topology.cells.len();
    let n_classes = topology.cells[0].classes.len();
    for (i, cell) in topology.cells.iter().enumerate() {
        let load = cell.total_load();
        if load >= 1.0 {
            return Err(NetworkError::Infeasible { cell: i, load });
        }
    }

    let mut lam_in = vec![vec![0.0; n_classes]; n_cells];
    for iteration in 1..=options.max_iterations {
        let evaluated: Vec<(Vec<f64>, Kpis)> = topology
            .cells
            .par_iter()
            .zip(&lam_in)
            .enumerate()
            .map(|(i, (cell, rates))| {
                engine
                    .evaluate(&with_inflow(cell, rates))
                    .map_err(|source| NetworkError::Engine { cell: i, source })
            })
            .collect::<Result<_, _>>()?;

        let mut target = vec![vec![0.0; n_classes]; n_cells];
        for (k, matrix) in topology.routing.iter().enumerate() {
            for j in 0..n_cells {
                let out_jk = evaluated[j].0[k];
                if out_jk == 0.0 {
                    continue;
                }
                for i in 0..n_cells {
                    target[i][k] += matrix[j][i] * out_jk;
                }
            }
        }

        let residual = lam_in
            .iter()
            .zip(&target)
            .map(|(c, t)| relative_residual(c, t))
            .fold(0.0, f64::max);
        if residual < options.tolerance {
            return Ok(FixedPointResult {
                handover_in: lam_in,
                kpis: evaluated.into_iter().map(|(_, k)| k).collect(),
                iterations: iteration,
                residual,
            });
        }
        for (current, next) in lam_in.iter_mut().zip(&target) {
            for (cur, nxt) in current.iter_mut().zip(next) {
                *cur += options.damping * (nxt - *cur);
            }
        }
    }

    Err(NetworkError::NotConverged {
        iterations: options.max_iterations,
        residual: f64::NAN,
    })
}
