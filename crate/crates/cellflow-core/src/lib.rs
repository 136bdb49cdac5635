//! Flow-level performance models for processor-sharing cells with mobile users.
//!
//! A cell is modelled as a single processor-sharing server: the capacity `C`
//! is split equally among all flows present. Each traffic class brings
//! Poisson flow arrivals with a given mean volume; *mobile* classes
//! additionally abandon the cell when their sojourn time expires, whether or
//! not the transfer has finished. The two target metrics per class are the
//! mean per-flow throughput and the probability that a flow leaves the cell
//! before completing (its handover probability).
//!
//! Three mutually validating engines compute these metrics for a single
//! cell, and two fixed-point solvers extend them to networks of cells coupled
//! by handover traffic:
//!
//! * [`markov`]: exact stationary analysis of the truncated occupancy chain,
//! * [`qs`]: a two-step quasi-stationary approximation with closed forms,
//! * [`sim`]: a flow-level discrete-event simulator (single cell or network),
//! * [`network`]: damped fixed-point iteration balancing handover flows.

pub mod config;
pub mod dist;
pub mod markov;
pub mod model;
pub mod network;
pub mod qs;
pub mod sim;

pub use dist::Distribution;
pub use model::{CellScenario, ClassKpis, DerivedRates, Kpis, ModelError, TrafficClass};
