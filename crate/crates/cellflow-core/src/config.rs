//! TOML configuration: one document describes a cell (optionally a network
//! of cells), simulation defaults, and an optional parameter sweep.
//!
//! ```toml
//! [cell]
//! capacity_mbps = 50.0
//! radius_m = 100.0            # optional, needed for speed sweeps
//!
//! [[class]]
//! name = "static"
//! arrival_rate = 0.2          # fresh flows per second
//! mean_volume_mbit = 100.0
//!
//! [[class]]
//! name = "mobile"
//! arrival_rate = 0.2
//! mean_volume_mbit = 100.0
//! mobility_rate = 0.1         # 1/s; omit or 0 for a static class
//! volume_law = "exponential"  # deterministic|uniform|exponential|pareto2|hyperexp2
//! sojourn_law = "exponential"
//!
//! [topology]                  # optional; absent means a single cell
//! ring = 4                    # ring(I): each cell routes 1/2 to each neighbor
//! # or: cells = 2 with routing = [[0.0, 1.0], [1.0, 0.0]] (shared by classes)
//! # capacity_scale = [1.0, 2.0]  # optional per-cell capacity multipliers
//!
//! [sim]                       # optional
//! runs = 10
//! events_per_run = 1000000
//! seed = 7
//!
//! [sweep]                     # optional
//! parameter = "rho_s"         # rho_s|rho0|theta_m|speed_kmh|mobile_fraction
//! values = [0.1, 0.3, 0.5]
//! engines = ["markov", "qs"]
//! ```
//!
//! Rates are per second, volumes in megabits, capacities in megabits per
//! second; scenario values are converted to bits internally. Mean sojourn
//! times are `1 / mobility_rate`; a class's `sojourn_law` picks the family
//! around that mean and is ignored for static classes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::dist::Distribution;
use crate::model::{CellScenario, ModelError, TrafficClass};
use crate::network::{NetworkError, NetworkTopology};

const MEGA: f64 = 1e6;
const KMH_TO_MS: f64 = 1.0 / 3.6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Topology(#[from] NetworkError),
}

fn invalid(reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(reason.into())
}

/// Which quantity a sweep varies. Load parameters rescale arrival rates,
/// keeping the configured class mix; mobility parameters rewrite the
/// mobility rate of every configured-mobile class, zero turning them
/// static; speed maps to a mobility rate through the cell radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    StaticLoad,
    TotalLoad,
    MobilityRate,
    SpeedKmh,
    MobileFraction,
}

impl SweepParameter {
    pub fn key(&self) -> &'static str {
        match self {
            Self::StaticLoad => "rho_s",
            Self::TotalLoad => "rho0",
            Self::MobilityRate => "theta_m",
            Self::SpeedKmh => "speed_kmh",
            Self::MobileFraction => "mobile_fraction",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "rho_s" => Ok(Self::StaticLoad),
            "rho0" => Ok(Self::TotalLoad),
            "theta_m" => Ok(Self::MobilityRate),
            "speed_kmh" => Ok(Self::SpeedKmh),
            "mobile_fraction" => Ok(Self::MobileFraction),
            other => Err(invalid(format!(
                "unknown sweep parameter {other:?}; expected rho_s, rho0, theta_m, \
                 speed_kmh, or mobile_fraction"
            ))),
        }
    }
}

/// An engine a command can dispatch to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineChoice {
    /// Exact stationary analysis of the truncated chain.
    Markov,
    /// Two-pass quasi-stationary approximation.
    Qs,
    /// Single-cell discrete-event simulation.
    Sim,
    /// Multi-cell discrete-event simulation over the configured topology.
    NetworkSim,
    /// Handover fixed point evaluated with the exact engine.
    FixedPoint,
    /// Handover fixed point evaluated with the quasi-stationary engine.
    FixedPointQs,
}

impl EngineChoice {
    /// Whether the engine estimates from random runs rather than solving.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::Sim | Self::NetworkSim)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Markov => "markov",
            Self::Qs => "qs",
            Self::Sim => "sim",
            Self::NetworkSim => "network-sim",
            Self::FixedPoint => "fixed-point",
            Self::FixedPointQs => "fixed-point:qs",
        }
    }
}

impl fmt::Display for EngineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "markov" => Ok(Self::Markov),
            "qs" => Ok(Self::Qs),
            "sim" => Ok(Self::Sim),
            "network-sim" => Ok(Self::NetworkSim),
            "fixed-point" => Ok(Self::FixedPoint),
            "fixed-point:qs" => Ok(Self::FixedPointQs),
            other => Err(invalid(format!(
                "unknown engine {other:?}; expected markov, qs, sim, network-sim, \
                 fixed-point, or fixed-point:qs"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub engines: Vec<EngineChoice>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    pub runs: usize,
    pub events_per_run: u64,
    pub seed: Option<u64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            runs: 10,
            events_per_run: 1_000_000,
            seed: None,
        }
    }
}

/// A parsed and validated configuration document.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub scenario: CellScenario,
    pub radius_m: Option<f64>,
    pub topology: Option<NetworkTopology>,
    pub sim: SimSettings,
    pub sweep: Option<SweepSpec>,
}

pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn parse(text: &str) -> Result<AppConfig, ConfigError> {
    let file: FileConfig = toml::from_str(text)?;
    file.build()
}

/// Rebuild the scenario with the swept parameter set to `value`. Always
/// derived from the base scenario, so sweep points are order-independent.
/// Feasibility is not checked here; engines decide what they accept.
pub fn apply_sweep(
    scenario: &CellScenario,
    radius_m: Option<f64>,
    parameter: SweepParameter,
    value: f64,
) -> Result<CellScenario, ConfigError> {
    if !value.is_finite() || value < 0.0 {
        return Err(invalid(format!(
            "sweep value {value} for {} must be finite and nonnegative",
            parameter.key()
        )));
    }
    match parameter {
        SweepParameter::StaticLoad => scale_group(scenario, value, |c| !c.is_mobile(), "static"),
        SweepParameter::TotalLoad => scale_group(scenario, value, |_| true, "any"),
        SweepParameter::MobilityRate => set_mobility(scenario, value),
        SweepParameter::SpeedKmh => {
            let radius = radius_m.ok_or_else(|| {
                invalid("speed sweeps need [cell] radius_m to map speed to a mobility rate")
            })?;
            set_mobility(scenario, value * KMH_TO_MS / radius)
        }
        SweepParameter::MobileFraction => {
            if value > 1.0 {
                return Err(invalid(format!(
                    "mobile fraction {value} must lie in [0, 1]"
                )));
            }
            let total = scenario.total_load();
            let with_static = scale_group(
                scenario,
                (1.0 - value) * total,
                |c| !c.is_mobile(),
                "static",
            )?;
            scale_group(&with_static, value * total, |c| c.is_mobile(), "mobile")
        }
    }
}

/// Rescale the arrival rates of the classes selected by `pick` so their
/// combined offered load becomes `target`, leaving the mix inside the group
/// untouched.
fn scale_group(
    scenario: &CellScenario,
    target: f64,
    pick: impl Fn(&TrafficClass) -> bool,
    group: &str,
) -> Result<CellScenario, ConfigError> {
    let current: f64 = scenario
        .classes
        .iter()
        .filter(|c| pick(c))
        .map(|c| c.arrival_rate * c.mean_volume / scenario.capacity)
        .sum();
    if current == 0.0 {
        if target == 0.0 {
            return Ok(scenario.clone());
        }
        return Err(invalid(format!(
            "cannot reach a {group} load of {target}: the configured {group} load is zero"
        )));
    }
    let factor = target / current;
    let mut out = scenario.clone();
    for class in out.classes.iter_mut().filter(|c| pick(c)) {
        class.arrival_rate *= factor;
    }
    Ok(out)
}

/// Set every configured-mobile class to mobility rate `theta`, resampling
/// the sojourn law around the new mean; `theta = 0` turns them static.
fn set_mobility(scenario: &CellScenario, theta: f64) -> Result<CellScenario, ConfigError> {
    let mut classes = Vec::with_capacity(scenario.classes.len());
    for class in &scenario.classes {
        if !class.is_mobile() {
            classes.push(class.clone());
            continue;
        }
        let sojourn = if theta > 0.0 {
            Some(
                class
                    .sojourn_dist
                    .as_ref()
                    .expect("mobile class")
                    .with_mean(1.0 / theta)?,
            )
        } else {
            None
        };
        classes.push(TrafficClass::new(
            class.name.clone(),
            class.arrival_rate,
            class.mean_volume,
            theta,
            class.volume_dist,
            sojourn,
        )?);
    }
    Ok(CellScenario::new(scenario.capacity, classes)?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    cell: CellSection,
    #[serde(rename = "class")]
    classes: Vec<ClassSection>,
    topology: Option<TopologySection>,
    sim: Option<SimSection>,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSection {
    capacity_mbps: f64,
    radius_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassSection {
    name: String,
    arrival_rate: f64,
    mean_volume_mbit: f64,
    #[serde(default)]
    mobility_rate: f64,
    #[serde(default = "exponential_law")]
    volume_law: String,
    volume_scv: Option<f64>,
    #[serde(default = "exponential_law")]
    sojourn_law: String,
    sojourn_scv: Option<f64>,
}

fn exponential_law() -> String {
    "exponential".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    ring: Option<usize>,
    cells: Option<usize>,
    routing: Option<Vec<Vec<f64>>>,
    capacity_scale: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    runs: Option<usize>,
    events_per_run: Option<u64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    parameter: String,
    values: Vec<f64>,
    engines: Vec<String>,
}

impl FileConfig {
    fn build(self) -> Result<AppConfig, ConfigError> {
        let capacity = self.cell.capacity_mbps * MEGA;
        let radius_m = self.cell.radius_m;
        if let Some(r) = radius_m {
            if !r.is_finite() || r <= 0.0 {
                return Err(invalid(format!("radius_m {r} must be positive")));
            }
        }

        let mut classes = Vec::with_capacity(self.classes.len());
        for section in &self.classes {
            if self
                .classes
                .iter()
                .filter(|c| c.name == section.name)
                .count()
                > 1
            {
                return Err(invalid(format!("duplicate class name {:?}", section.name)));
            }
            classes.push(section.to_class()?);
        }
        let scenario = CellScenario::new(capacity, classes)?;

        let topology = match self.topology {
            Some(section) => Some(section.build(&scenario)?),
            None => None,
        };

        let defaults = SimSettings::default();
        let sim = match self.sim {
            Some(s) => SimSettings {
                runs: s.runs.unwrap_or(defaults.runs),
                events_per_run: s.events_per_run.unwrap_or(defaults.events_per_run),
                seed: s.seed,
            },
            None => defaults,
        };
        if sim.runs < 2 {
            return Err(invalid(format!(
                "sim runs {} must be at least 2 for confidence intervals",
                sim.runs
            )));
        }
        if sim.events_per_run == 0 {
            return Err(invalid("sim events_per_run must be positive"));
        }

        let sweep = match self.sweep {
            Some(s) => Some(s.build(radius_m, topology.is_some())?),
            None => None,
        };

        Ok(AppConfig {
            scenario,
            radius_m,
            topology,
            sim,
            sweep,
        })
    }
}

impl ClassSection {
    fn to_class(&self) -> Result<TrafficClass, ConfigError> {
        let volume_mean = self.mean_volume_mbit * MEGA;
        let volume = build_dist(&self.volume_law, volume_mean, self.volume_scv, &self.name)?;
        let sojourn = if self.mobility_rate > 0.0 {
            Some(build_dist(
                &self.sojourn_law,
                1.0 / self.mobility_rate,
                self.sojourn_scv,
                &self.name,
            )?)
        } else {
            None
        };
        Ok(TrafficClass::new(
            self.name.clone(),
            self.arrival_rate,
            volume_mean,
            self.mobility_rate,
            volume,
            sojourn,
        )?)
    }
}

fn build_dist(
    family: &str,
    mean: f64,
    scv: Option<f64>,
    class: &str,
) -> Result<Distribution, ConfigError> {
    if family != "hyperexp2" && scv.is_some() {
        return Err(invalid(format!(
            "class {class:?}: an scv only parameterizes the hyperexp2 family, not {family:?}"
        )));
    }
    let dist = match family {
        "exponential" => Distribution::exponential(mean)?,
        "deterministic" => Distribution::deterministic(mean)?,
        "uniform" => Distribution::uniform(mean)?,
        "pareto2" => Distribution::pareto2(mean)?,
        "hyperexp2" => {
            let scv = scv
                .ok_or_else(|| invalid(format!("class {class:?}: hyperexp2 needs an scv field")))?;
            Distribution::hyper_exp2(mean, scv)?
        }
        other => {
            return Err(invalid(format!(
                "class {class:?}: unknown law {other:?}; expected exponential, \
                 deterministic, uniform, pareto2, or hyperexp2"
            )))
        }
    };
    Ok(dist)
}

impl TopologySection {
    fn build(self, scenario: &CellScenario) -> Result<NetworkTopology, ConfigError> {
        let topology = match (self.ring, self.cells, &self.routing) {
            (Some(count), None, None) => NetworkTopology::ring(scenario.clone(), count)?,
            (None, Some(count), Some(routing)) => {
                let matrix = routing.clone();
                let per_class = vec![matrix; scenario.classes.len()];
                NetworkTopology::new(vec![scenario.clone(); count], per_class)?
            }
            _ => {
                return Err(invalid(
                    "topology needs either ring = I, or cells = I with a routing matrix",
                ))
            }
        };
        let mut topology = topology;
        if let Some(scale) = self.capacity_scale {
            if scale.len() != topology.cells.len() {
                return Err(invalid(format!(
                    "capacity_scale has {} entries for {} cells",
                    scale.len(),
                    topology.cells.len()
                )));
            }
            for (cell, factor) in topology.cells.iter_mut().zip(&scale) {
                if !factor.is_finite() || *factor <= 0.0 {
                    return Err(invalid(format!(
                        "capacity_scale entry {factor} must be positive"
                    )));
                }
                cell.capacity *= factor;
            }
        }
        Ok(topology)
    }
}

impl SweepSection {
    fn build(self, radius_m: Option<f64>, has_topology: bool) -> Result<SweepSpec, ConfigError> {
        let parameter: SweepParameter = self.parameter.parse()?;
        if self.values.is_empty() {
            return Err(invalid("sweep values must be nonempty"));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(invalid("sweep values must be finite"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sweep values must be strictly increasing"));
        }
        if parameter == SweepParameter::SpeedKmh && radius_m.is_none() {
            return Err(invalid(
                "speed sweeps need [cell] radius_m to map speed to a mobility rate",
            ));
        }
        if self.engines.is_empty() {
            return Err(invalid("sweep engines must be nonempty"));
        }
        let engines = self
            .engines
            .iter()
            .map(|e| e.parse())
            .collect::<Result<Vec<EngineChoice>, _>>()?;
        if engines.contains(&EngineChoice::NetworkSim) && !has_topology {
            return Err(invalid("the network-sim engine needs a [topology] section"));
        }
        Ok(SweepSpec {
            parameter,
            values: self.values,
            engines,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
        [cell]
        capacity_mbps = 50.0
        radius_m = 100.0

        [[class]]
        name = "static"
        arrival_rate = 0.2
        mean_volume_mbit = 100.0

        [[class]]
        name = "mobile"
        arrival_rate = 0.2
        mean_volume_mbit = 100.0
        mobility_rate = 0.1
        sojourn_law = "pareto2"

        [topology]
        ring = 4

        [sim]
        runs = 8
        events_per_run = 50000
        seed = 11

        [sweep]
        parameter = "rho_s"
        values = [0.1, 0.4, 0.7]
        engines = ["markov", "qs", "sim"]
    "#;

    #[test]
    fn full_document_parses_with_unit_conversion() {
        let app = parse(FULL).unwrap();
        assert_eq!(app.scenario.capacity, 5e7);
        assert_eq!(app.scenario.classes.len(), 2);
        let mobile = &app.scenario.classes[1];
        assert_eq!(mobile.mean_volume, 1e8);
        assert_eq!(mobile.mobility_rate, 0.1);
        assert_eq!(
            mobile.sojourn_dist,
            Some(Distribution::pareto2(10.0).unwrap())
        );
        assert_eq!(app.radius_m, Some(100.0));

        let topology = app.topology.as_ref().unwrap();
        assert_eq!(topology.cells.len(), 4);
        assert_eq!(topology.routing[0][0][1], 0.5);

        assert_eq!(app.sim.runs, 8);
        assert_eq!(app.sim.events_per_run, 50_000);
        assert_eq!(app.sim.seed, Some(11));

        let sweep = app.sweep.as_ref().unwrap();
        assert_eq!(sweep.parameter, SweepParameter::StaticLoad);
        assert_eq!(sweep.values, vec![0.1, 0.4, 0.7]);
        assert_eq!(
            sweep.engines,
            vec![EngineChoice::Markov, EngineChoice::Qs, EngineChoice::Sim]
        );
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let app = parse(
            r#"
            [cell]
            capacity_mbps = 10.0

            [[class]]
            name = "only"
            arrival_rate = 0.05
            mean_volume_mbit = 10.0
        "#,
        )
        .unwrap();
        assert!(app.topology.is_none());
        assert!(app.sweep.is_none());
        assert_eq!(app.sim.runs, 10);
        assert_eq!(app.sim.events_per_run, 1_000_000);
        let class = &app.scenario.classes[0];
        assert!(!class.is_mobile());
        assert_eq!(class.volume_dist, Distribution::exponential(1e7).unwrap());
    }

    #[test]
    fn documents_with_mistakes_are_rejected() {
        let cases: &[(&str, &str)] = &[
            (
                "duplicate class name",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                [[class]]
                name = "a"
                arrival_rate = 0.2
                mean_volume_mbit = 1.0
            "#,
            ),
            (
                "unknown law",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                volume_law = "zipf"
            "#,
            ),
            (
                "hyperexp2 without scv",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                volume_law = "hyperexp2"
            "#,
            ),
            (
                "non-increasing sweep",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                [sweep]
                parameter = "rho_s"
                values = [0.5, 0.5]
                engines = ["markov"]
            "#,
            ),
            (
                "unknown engine",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                [sweep]
                parameter = "rho_s"
                values = [0.5]
                engines = ["quantum"]
            "#,
            ),
            (
                "speed sweep without radius",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                mobility_rate = 0.5
                [sweep]
                parameter = "speed_kmh"
                values = [0.0, 36.0]
                engines = ["markov"]
            "#,
            ),
            (
                "network-sim without topology",
                r#"
                [cell]
                capacity_mbps = 10.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
                mobility_rate = 0.5
                [sweep]
                parameter = "rho0"
                values = [0.2]
                engines = ["network-sim"]
            "#,
            ),
            (
                "mistyped section key",
                r#"
                [cell]
                capacity_mbps = 10.0
                radius = 50.0
                [[class]]
                name = "a"
                arrival_rate = 0.1
                mean_volume_mbit = 1.0
            "#,
            ),
        ];
        for (what, text) in cases {
            assert!(parse(text).is_err(), "{what} should be rejected");
        }
    }

    fn base() -> AppConfig {
        parse(FULL).unwrap()
    }

    #[test]
    fn static_load_sweep_rescales_only_static_classes() {
        let app = base();
        let swept =
            apply_sweep(&app.scenario, app.radius_m, SweepParameter::StaticLoad, 0.6).unwrap();
        assert!((swept.static_load() - 0.6).abs() < 1e-12);
        assert!((swept.mobile_load() - 0.4).abs() < 1e-12);
        assert_eq!(swept.classes[1].arrival_rate, 0.2);
    }

    #[test]
    fn total_load_sweep_preserves_the_mix() {
        let app = base();
        let swept =
            apply_sweep(&app.scenario, app.radius_m, SweepParameter::TotalLoad, 0.5).unwrap();
        assert!((swept.total_load() - 0.5).abs() < 1e-12);
        assert!((swept.static_load() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mobility_sweep_rewrites_the_sojourn_law_mean() {
        let app = base();
        let swept = apply_sweep(
            &app.scenario,
            app.radius_m,
            SweepParameter::MobilityRate,
            0.8,
        )
        .unwrap();
        assert_eq!(swept.classes[1].mobility_rate, 0.8);
        assert_eq!(
            swept.classes[1].sojourn_dist,
            Some(Distribution::pareto2(1.25).unwrap())
        );
        assert_eq!(swept.classes[0].mobility_rate, 0.0);

        let frozen = apply_sweep(
            &app.scenario,
            app.radius_m,
            SweepParameter::MobilityRate,
            0.0,
        )
        .unwrap();
        assert!(!frozen.classes[1].is_mobile());
        assert_eq!(frozen.classes[1].sojourn_dist, None);
    }

    #[test]
    fn speed_sweep_maps_through_the_radius() {
        // 36 km/h across a 100 m cell gives 0.1 exits per second.
        let app = base();
        let swept =
            apply_sweep(&app.scenario, app.radius_m, SweepParameter::SpeedKmh, 36.0).unwrap();
        assert!((swept.classes[1].mobility_rate - 0.1).abs() < 1e-15);
        assert!(matches!(
            apply_sweep(&app.scenario, None, SweepParameter::SpeedKmh, 36.0),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn mobile_fraction_sweep_keeps_the_total() {
        let app = base();
        let swept = apply_sweep(
            &app.scenario,
            app.radius_m,
            SweepParameter::MobileFraction,
            0.25,
        )
        .unwrap();
        assert!((swept.total_load() - 0.8).abs() < 1e-12);
        assert!((swept.mobile_load() - 0.2).abs() < 1e-12);
        assert!((swept.static_load() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn impossible_group_targets_are_rejected() {
        let app = parse(
            r#"
            [cell]
            capacity_mbps = 10.0
            [[class]]
            name = "m"
            arrival_rate = 0.1
            mean_volume_mbit = 10.0
            mobility_rate = 0.5
        "#,
        )
        .unwrap();
        assert!(matches!(
            apply_sweep(&app.scenario, None, SweepParameter::StaticLoad, 0.3),
            Err(ConfigError::Invalid(_))
        ));
    }
}
