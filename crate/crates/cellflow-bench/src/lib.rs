//! Shared scenario builders for the benchmark suite.

use cellflow_core::{CellScenario, TrafficClass};

/// Two-class cell (half static, half mobile) at the given static load.
pub fn half_mobile_cell(rho_s: f64, norm_mobility: f64) -> CellScenario {
    let capacity = 5e7;
    let volume = 1e8;
    let mu = capacity / volume;
    CellScenario::new(
        capacity,
        vec![
            TrafficClass::static_exp("static", rho_s * mu, volume).unwrap(),
            TrafficClass::mobile_exp("mobile", rho_s * mu, volume, norm_mobility * mu).unwrap(),
        ],
    )
    .unwrap()
}
