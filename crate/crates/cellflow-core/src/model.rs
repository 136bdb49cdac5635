//! Scenario description shared by every engine.
//!
//! All quantities are kept in base units: bits, seconds, bits per second.
//! Config parsing converts the human-friendly Mbit values at the boundary,
//! so the analysis and simulation code never sees a unit again.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::Distribution;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("class {class}: {quantity} distribution mean {dist_mean} does not match declared value {declared}")]
    MeanMismatch {
        class: String,
        quantity: &'static str,
        declared: f64,
        dist_mean: f64,
    },
    #[error("scenario must contain at least one class")]
    NoClasses,
    #[error("class {class}: throughput and mobility both vanish, handover identity is degenerate")]
    DegenerateKpi { class: String },
}

/// One flow class: Poisson arrivals, i.i.d. volumes, and for mobile classes
/// an i.i.d. cell sojourn time after which an unfinished flow leaves anyway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficClass {
    pub name: String,
    /// Fresh flow arrival rate, flows per second.
    pub arrival_rate: f64,
    /// Mean flow volume `sigma`, bits.
    pub mean_volume: f64,
    /// Sojourn rate `theta = 1 / E(sojourn)`, per second; 0 marks a static class.
    pub mobility_rate: f64,
    pub volume_dist: Distribution,
    /// Sojourn-time law; `None` for static classes.
    pub sojourn_dist: Option<Distribution>,
}

impl TrafficClass {
    /// The declared mean of each law must agree with the scalar parameters:
    /// volumes with `mean_volume`, sojourns with `1 / mobility_rate`.
    pub fn new(
        name: impl Into<String>,
        arrival_rate: f64,
        mean_volume: f64,
        mobility_rate: f64,
        volume_dist: Distribution,
        sojourn_dist: Option<Distribution>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if !arrival_rate.is_finite() || arrival_rate < 0.0 {
            return Err(ModelError::InvalidParameter {
                what: "arrival rate",
                value: arrival_rate,
            });
        }
        if !mean_volume.is_finite() || mean_volume <= 0.0 {
            return Err(ModelError::InvalidParameter {
                what: "mean volume",
                value: mean_volume,
            });
        }
        if !mobility_rate.is_finite() || mobility_rate < 0.0 {
            return Err(ModelError::InvalidParameter {
                what: "mobility rate",
                value: mobility_rate,
            });
        }
        check_mean(&name, "volume", mean_volume, volume_dist.mean())?;
        let sojourn_dist = if mobility_rate > 0.0 {
            let dist = sojourn_dist.unwrap_or(Distribution::Exponential {
                mean: 1.0 / mobility_rate,
            });
            check_mean(&name, "sojourn", 1.0 / mobility_rate, dist.mean())?;
            Some(dist)
        } else {
            None
        };
        Ok(Self {
            name,
            arrival_rate,
            mean_volume,
            mobility_rate,
            volume_dist,
            sojourn_dist,
        })
    }

    /// Static class with exponential volumes.
    pub fn static_exp(
        name: impl Into<String>,
        arrival_rate: f64,
        mean_volume: f64,
    ) -> Result<Self, ModelError> {
        let vol = Distribution::exponential(mean_volume)?;
        Self::new(name, arrival_rate, mean_volume, 0.0, vol, None)
    }

    /// Mobile class with exponential volumes and sojourns.
    pub fn mobile_exp(
        name: impl Into<String>,
        arrival_rate: f64,
        mean_volume: f64,
        mobility_rate: f64,
    ) -> Result<Self, ModelError> {
        let vol = Distribution::exponential(mean_volume)?;
        Self::new(name, arrival_rate, mean_volume, mobility_rate, vol, None)
    }

    pub fn is_mobile(&self) -> bool {
        self.mobility_rate > 0.0
    }
}

fn check_mean(
    class: &str,
    quantity: &'static str,
    declared: f64,
    dist_mean: f64,
) -> Result<(), ModelError> {
    if (dist_mean - declared).abs() > 1e-9 * declared.abs() {
        return Err(ModelError::MeanMismatch {
            class: class.to_string(),
            quantity,
            declared,
            dist_mean,
        });
    }
    Ok(())
}

/// A single processor-sharing cell: capacity plus an ordered class list.
/// Class order is significant; every engine reports results in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScenario {
    /// Cell capacity `C`, bits per second, shared equally among active flows.
    pub capacity: f64,
    pub classes: Vec<TrafficClass>,
}

impl CellScenario {
    pub fn new(capacity: f64, classes: Vec<TrafficClass>) -> Result<Self, ModelError> {
        if !capacity.is_finite() || capacity <= 0.0 {
            return Err(ModelError::InvalidParameter {
                what: "cell capacity",
                value: capacity,
            });
        }
        if classes.is_empty() {
            return Err(ModelError::NoClasses);
        }
        Ok(Self { capacity, classes })
    }

    pub fn derive_rates(&self) -> DerivedRates {
        let mut rates = DerivedRates {
            mu: Vec::with_capacity(self.classes.len()),
            rho: Vec::with_capacity(self.classes.len()),
            rho_theta: Vec::with_capacity(self.classes.len()),
        };
        for class in &self.classes {
            let mu = self.capacity / class.mean_volume;
            rates.mu.push(mu);
            rates.rho.push(class.arrival_rate / mu);
            rates.rho_theta.push(class.mobility_rate / mu);
        }
        rates
    }

    /// Total offered load of static classes; the cell has a stationary
    /// regime exactly when this is below one, regardless of mobile load.
    pub fn static_load(&self) -> f64 {
        self.classes
            .iter()
            .filter(|c| !c.is_mobile())
            .map(|c| c.arrival_rate * c.mean_volume / self.capacity)
            .sum()
    }

    pub fn mobile_load(&self) -> f64 {
        self.classes
            .iter()
            .filter(|c| c.is_mobile())
            .map(|c| c.arrival_rate * c.mean_volume / self.capacity)
            .sum()
    }

    pub fn total_load(&self) -> f64 {
        self.static_load() + self.mobile_load()
    }

    /// Returns a copy with class `k`'s arrival rate replaced.
    pub fn with_arrival_rate(&self, k: usize, arrival_rate: f64) -> Self {
        let mut out = self.clone();
        out.classes[k].arrival_rate = arrival_rate;
        out
    }
}

/// Per-class completion rate and load factors implied by a scenario:
/// `mu = C / sigma`, `rho = lambda / mu`, `rho_theta = theta / mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRates {
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_theta: Vec<f64>,
}

/// Steady-state metrics for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassKpis {
    /// Mean number of active flows `E(N)`.
    pub mean_occupancy: f64,
    /// Mean per-flow throughput `gamma = C * E(share) / E(N)`, bits per second.
    pub throughput: f64,
    /// Probability that a flow leaves the cell before finishing its transfer.
    pub handover_probability: f64,
    /// Mean capacity share `E(N/L; N > 0)` (dimensionless carried load).
    pub carried_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    pub classes: Vec<ClassKpis>,
    /// Probability of an empty cell.
    pub empty_probability: f64,
}

/// Maximum relative deviation, over mobile classes, from the identity
/// `H = theta * sigma / (gamma + theta * sigma)` that ties the handover
/// probability to the throughput. Static classes are excluded (their `H`
/// is zero by definition).
pub fn kpi_identity_check(kpis: &Kpis, scenario: &CellScenario) -> Result<f64, ModelError> {
    let mut worst: f64 = 0.0;
    for (class, k) in scenario.classes.iter().zip(&kpis.classes) {
        if !class.is_mobile() {
            continue;
        }
        let ts = class.mobility_rate * class.mean_volume;
        let denom = k.throughput + ts;
        if denom == 0.0 {
            return Err(ModelError::DegenerateKpi {
                class: class.name.clone(),
            });
        }
        let implied = ts / denom;
        let scale = k.handover_probability.abs().max(implied.abs()).max(1e-12);
        worst = worst.max((k.handover_probability - implied).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_reference() -> CellScenario {
        // 50 Mbit/s cell, 100 Mbit mean volume for both classes, half the
        // traffic mobile with a 10 s mean sojourn.
        CellScenario::new(
            5e7,
            vec![
                TrafficClass::static_exp("static", 0.2, 1e8).unwrap(),
                TrafficClass::mobile_exp("mobile", 0.2, 1e8, 0.1).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn completion_rate_is_capacity_over_volume() {
        let rates = two_class_reference().derive_rates();
        assert_eq!(rates.mu, vec![0.5, 0.5]);
        assert!((rates.rho[0] - 0.4).abs() < 1e-15);
        assert!((rates.rho[1] - 0.4).abs() < 1e-15);
        assert_eq!(rates.rho_theta[0], 0.0);
        assert!((rates.rho_theta[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_arrivals_mean_zero_load() {
        let sc =
            CellScenario::new(5e7, vec![TrafficClass::static_exp("s", 0.0, 1e8).unwrap()]).unwrap();
        assert_eq!(sc.derive_rates().rho, vec![0.0]);
        assert_eq!(sc.total_load(), 0.0);
    }

    #[test]
    fn load_splits_by_mobility() {
        let sc = two_class_reference();
        assert!((sc.static_load() - 0.4).abs() < 1e-15);
        assert!((sc.mobile_load() - 0.4).abs() < 1e-15);
        assert!((sc.total_load() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn volume_mean_mismatch_is_rejected() {
        let vol = Distribution::exponential(2e8).unwrap();
        let err = TrafficClass::new("bad", 0.1, 1e8, 0.0, vol, None);
        assert!(matches!(err, Err(ModelError::MeanMismatch { .. })));
    }

    #[test]
    fn sojourn_mean_must_be_inverse_mobility_rate() {
        let vol = Distribution::exponential(1e8).unwrap();
        let bad_sojourn = Distribution::deterministic(5.0).unwrap();
        let err = TrafficClass::new("bad", 0.1, 1e8, 0.1, vol, Some(bad_sojourn));
        assert!(matches!(err, Err(ModelError::MeanMismatch { .. })));

        let good = Distribution::deterministic(10.0).unwrap();
        let class = TrafficClass::new("ok", 0.1, 1e8, 0.1, vol, Some(good)).unwrap();
        assert!(class.is_mobile());
    }

    #[test]
    fn mobile_class_defaults_to_exponential_sojourn() {
        let class = TrafficClass::mobile_exp("m", 0.1, 1e8, 0.1).unwrap();
        let sojourn = class.sojourn_dist.unwrap();
        assert!(sojourn.is_exponential());
        assert!((sojourn.mean() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identity_check_excludes_static_classes_and_flags_degenerate() {
        let sc = two_class_reference();
        // H consistent with gamma for the mobile class; garbage for the
        // static class must not matter.
        let ts = 0.1 * 1e8;
        let gamma = 2.1e7;
        let kpis = Kpis {
            classes: vec![
                ClassKpis {
                    mean_occupancy: 1.0,
                    throughput: 1.9e7,
                    handover_probability: 0.42, // ignored: static
                    carried_load: 0.4,
                },
                ClassKpis {
                    mean_occupancy: 0.6,
                    throughput: gamma,
                    handover_probability: ts / (gamma + ts),
                    carried_load: 0.4,
                },
            ],
            empty_probability: 0.3,
        };
        assert!(kpi_identity_check(&kpis, &sc).unwrap() < 1e-15);

        // gamma -> 0 forces H -> 1 through the same identity.
        let mut saturated = kpis.clone();
        saturated.classes[1].throughput = 0.0;
        saturated.classes[1].handover_probability = 1.0;
        assert!(kpi_identity_check(&saturated, &sc).unwrap() < 1e-15);

        // theta * sigma + gamma == 0 cannot be scored.
        let mut degenerate = sc.clone();
        degenerate.classes[1].mean_volume = 1e8;
        let mut zeroed = kpis;
        zeroed.classes[1].throughput = -ts; // synthetic, only to hit the guard
        assert!(matches!(
            kpi_identity_check(&zeroed, &degenerate),
            Err(ModelError::DegenerateKpi { .. })
        ));
    }

    #[test]
    fn scenario_round_trips_through_toml_bit_exactly() {
        let mut sc = two_class_reference();
        // Awkward floats on purpose.
        sc.capacity = 5.000000000000001e7;
        sc.classes[0].arrival_rate = 0.1 + 0.2; // 0.30000000000000004
        sc.classes[1].volume_dist = Distribution::hyper_exp2(1e8, 4.0).unwrap();
        let text = toml::to_string(&sc).unwrap();
        let back: CellScenario = toml::from_str(&text).unwrap();
        assert_eq!(sc, back);
    }
}
