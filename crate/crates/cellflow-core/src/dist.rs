//! Flow-volume and sojourn-time distributions.
//!
//! Every family is parameterized by its mean so that scenarios can swap the
//! law of a quantity without touching its first moment. The supported
//! families cover the usual sensitivity studies: deterministic and uniform
//! for low variability, exponential as the Markov baseline, a shape-2 Pareto
//! for infinite variance, and a two-phase hyperexponential for any squared
//! coefficient of variation at or above one.

use rand::distr::Distribution as Sample;
use rand::Rng;
use rand_distr::{Exp, Pareto};
use serde::{Deserialize, Serialize};

use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Exponential {
        mean: f64,
    },
    /// Point mass at `value`.
    Deterministic {
        value: f64,
    },
    /// Uniform on `[0, 2 * mean]`.
    Uniform {
        mean: f64,
    },
    /// Shape-2 Pareto shifted to start at zero (Lomax), survival
    /// `(1 + x / mean)^-2`; infinite variance.
    Pareto2 {
        mean: f64,
    },
    /// Balanced-mean two-phase hyperexponential matching `mean` and `scv`.
    HyperExp2 {
        mean: f64,
        scv: f64,
    },
}

impl Distribution {
    pub fn exponential(mean: f64) -> Result<Self, ModelError> {
        check_mean(mean)?;
        Ok(Self::Exponential { mean })
    }

    pub fn deterministic(value: f64) -> Result<Self, ModelError> {
        check_mean(value)?;
        Ok(Self::Deterministic { value })
    }

    pub fn uniform(mean: f64) -> Result<Self, ModelError> {
        check_mean(mean)?;
        Ok(Self::Uniform { mean })
    }

    pub fn pareto2(mean: f64) -> Result<Self, ModelError> {
        check_mean(mean)?;
        Ok(Self::Pareto2 { mean })
    }

    pub fn hyper_exp2(mean: f64, scv: f64) -> Result<Self, ModelError> {
        check_mean(mean)?;
        if !scv.is_finite() || scv < 1.0 {
            return Err(ModelError::InvalidParameter {
                what: "hyperexponential scv (must be >= 1)",
                value: scv,
            });
        }
        Ok(Self::HyperExp2 { mean, scv })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { mean }
            | Self::Uniform { mean }
            | Self::Pareto2 { mean }
            | Self::HyperExp2 { mean, .. } => mean,
            Self::Deterministic { value } => value,
        }
    }

    /// Variance; `f64::INFINITY` for the shape-2 Pareto.
    pub fn variance(&self) -> f64 {
        match *self {
            Self::Exponential { mean } => mean * mean,
            Self::Deterministic { .. } => 0.0,
            Self::Uniform { mean } => mean * mean / 3.0,
            Self::Pareto2 { .. } => f64::INFINITY,
            Self::HyperExp2 { mean, scv } => scv * mean * mean,
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Deterministic { .. } => "deterministic",
            Self::Uniform { .. } => "uniform",
            Self::Pareto2 { .. } => "pareto2",
            Self::HyperExp2 { .. } => "hyperexp2",
        }
    }

    /// Same family with a new mean; the hyperexponential keeps its squared
    /// coefficient of variation.
    pub fn with_mean(&self, mean: f64) -> Result<Self, ModelError> {
        match *self {
            Self::Exponential { .. } => Self::exponential(mean),
            Self::Deterministic { .. } => Self::deterministic(mean),
            Self::Uniform { .. } => Self::uniform(mean),
            Self::Pareto2 { .. } => Self::pareto2(mean),
            Self::HyperExp2 { scv, .. } => Self::hyper_exp2(mean, scv),
        }
    }

    /// Draws one strictly positive value (deterministic family aside, where
    /// the point mass itself is positive by construction).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { mean } => Exp::new(1.0 / mean).unwrap().sample(rng),
            Self::Deterministic { value } => value,
            Self::Uniform { mean } => 2.0 * mean * rng.random::<f64>(),
            Self::Pareto2 { mean } => mean * (Pareto::new(1.0, 2.0).unwrap().sample(rng) - 1.0),
            Self::HyperExp2 { mean, scv } => {
                let (p1, mu1, mu2) = hyper_exp2_phases(mean, scv);
                let rate = if rng.random::<f64>() < p1 { mu1 } else { mu2 };
                Exp::new(rate).unwrap().sample(rng)
            }
        }
    }
}

/// Phase probabilities and rates of the balanced-mean hyperexponential:
/// `p1/mu1 = p2/mu2`, first two moments matching (mean, scv).
fn hyper_exp2_phases(mean: f64, scv: f64) -> (f64, f64, f64) {
    let d = ((scv - 1.0) / (scv + 1.0)).sqrt();
    let p1 = 0.5 * (1.0 + d);
    let p2 = 1.0 - p1;
    (p1, 2.0 * p1 / mean, 2.0 * p2 / mean)
}

fn check_mean(mean: f64) -> Result<(), ModelError> {
    if !mean.is_finite() || mean <= 0.0 {
        return Err(ModelError::InvalidParameter {
            what: "distribution mean (must be positive)",
            value: mean,
        });
    }
    Ok(())
}
