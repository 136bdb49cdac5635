//! Fast engine: two-pass quasi-stationary decomposition for a cell carrying
//! one mobile class on top of static classes.
//!
//! Impatience caps how long mobile flows linger, so their count moves on a
//! faster timescale than the static backlog once mobility is appreciable.
//! Each pass freezes the slow side and equilibrates the fast one. Pass one
//! holds the static class at its conditional equilibrium and leaves a
//! Poisson law for the mobile count whose mean `a` solves a scalar fixed
//! point; marginalizing gives the static law `q`. Pass two re-relaxes the
//! mobile class conditionally on each static level, giving `psi`. The
//! pass-two joint law `q(l) * psi(m|l)` is the engine's output; throughputs
//! and handover probabilities follow in closed form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CellScenario, ClassKpis, Kpis};

#[derive(Debug, Error)]
pub enum QsError {
    #[error("static offered load {static_load} is not below 1: no stationary regime exists")]
    Unstable { static_load: f64 },
    #[error("the two-pass scheme handles at most one mobile class, the scenario has {count}")]
    SeveralMobileClasses { count: usize },
}

/// Everything the two-pass scheme produces. `q` and `psi` are truncated
/// where their tails stop mattering: `q` sums to 1 within 1e-9 and each
/// `psi` row within 1e-12 of the untruncated laws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QsSolution {
    /// Mean of the pass-one Poisson law for the mobile count. Zero exactly
    /// when the scenario carries no mobile load.
    pub a: f64,
    /// Static-count marginal `q(l)` for `l` up to the truncation point.
    pub q: Vec<f64>,
    /// Conditional mobile-count laws, `psi[l][m]` aligned with `q`.
    pub psi: Vec<Vec<f64>>,
    /// Pass-two mean mobile count.
    pub mobile_mean: f64,
    pub kpis: Kpis,
    pub step1: Step1Kpis,
}

/// Pass-one quantities, kept for diagnostics; the pass-two values in
/// `QsSolution::kpis` are the engine's answer. The static throughput is
/// identical between passes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Step1Kpis {
    pub mobile_mean: f64,
    pub empty_probability: f64,
    pub mobile_throughput: f64,
    pub mobile_handover: f64,
}

/// Mean of the pass-one Poisson law for the mobile count: the unique
/// nonnegative root of
/// `exp(-a) * (1 - rho_s) = rho_theta * a + 1 - rho_s - rho_m`.
///
/// The defect is `rho_m` at zero, strictly decreasing, and nonpositive at
/// `rho_m / rho_theta`, so the root is bracketed and unique; bisection
/// followed by a Newton polish drives |defect| below 1e-12.
pub fn solve_a(rho_s: f64, rho_m: f64, rho_theta: f64) -> f64 {
    assert!((0.0..1.0).contains(&rho_s), "rho_s must lie in [0, 1)");
    assert!(rho_m >= 0.0, "rho_m must be nonnegative");
    assert!(rho_theta > 0.0, "rho_theta must be positive");
    if rho_m == 0.0 {
        return 0.0;
    }
    let f = |a: f64| (-a).exp() * (1.0 - rho_s) - rho_theta * a - (1.0 - rho_s - rho_m);
    let mut lo = 0.0_f64;
    let mut hi = rho_m / rho_theta + 1.0;
    while hi - lo > f64::EPSILON * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..2 {
        let slope = -(-a).exp() * (1.0 - rho_s) - rho_theta;
        a = (a - f(a) / slope).max(0.0);
    }
    a
}

/// Pass-one static-count marginal `q(l)`.
pub fn marginal_q(ell: usize, a: f64, rho_s: f64) -> f64 {
    assert!((0.0..1.0).contains(&rho_s), "rho_s must lie in [0, 1)");
    assert!(a >= 0.0, "a must be nonnegative");
    let x = a * (1.0 - rho_s);
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..=ell {
        term *= x * (ell - k + 1) as f64 / (k * k) as f64;
        sum += term;
    }
    if sum.is_finite() {
        (-a * rho_s).exp() * rho_s.powi(ell as i32) * (1.0 - rho_s) * sum
    } else {
        // The polynomial sum can overflow long before the geometric factor
        // tames it; redo the accumulation in log space.
        let ln_x = x.ln();
        let mut ln_term = 0.0_f64;
        let mut ln_sum = 0.0_f64;
        for k in 1..=ell {
            ln_term += ln_x + ((ell - k + 1) as f64).ln() - 2.0 * (k as f64).ln();
            ln_sum = log_add(ln_sum, ln_term);
        }
        (-a * rho_s + (ell as f64) * rho_s.ln() + (-rho_s).ln_1p() + ln_sum).exp()
    }
}

/// Pass-two conditional probability of `m` mobile flows next to `ell`
/// static ones. Values beyond the adaptive cutoff (relative tail term
/// below 1e-14) are reported as zero.
pub fn conditional_psi(m: usize, ell: usize, rho_m: f64, rho_theta: f64) -> f64 {
    let row = psi_row(ell, rho_m, rho_theta);
    row.get(m).copied().unwrap_or(0.0)
}

/// Pass-one joint law of `ell` static and `m` mobile flows. Factorial and
/// binomial factors are assembled in log space so large counts stay
/// finite.
pub fn step1_joint(ell: usize, m: usize, a: f64, rho_s: f64) -> f64 {
    assert!((0.0..1.0).contains(&rho_s), "rho_s must lie in [0, 1)");
    assert!(a >= 0.0, "a must be nonnegative");
    if a == 0.0 && m > 0 {
        return 0.0;
    }
    if rho_s == 0.0 && ell > 0 {
        return 0.0;
    }
    let mut ln = -a + (m + 1) as f64 * (-rho_s).ln_1p();
    if m > 0 {
        ln += m as f64 * a.ln() - ln_factorial(m);
        ln += ln_factorial(ell + m) - ln_factorial(ell) - ln_factorial(m);
    }
    if ell > 0 {
        ln += ell as f64 * rho_s.ln();
    }
    ln.exp()
}

/// Explicit pass-one mean for the homogeneous network reduction, where the
/// handover in-rate equals the out-rate by symmetry and the fixed point
/// collapses to a closed form. Independent of the mobility rate.
pub fn mm_step1_a(rho_s0: f64, rho0: f64) -> f64 {
    assert!(
        (0.0..1.0).contains(&rho_s0) && rho0 < 1.0 && rho0 >= rho_s0,
        "loads must satisfy 0 <= rho_s0 <= rho0 < 1"
    );
    ((1.0 - rho_s0) / (1.0 - rho0)).ln()
}

/// Run the two-pass scheme on a cell scenario. Static classes are
/// aggregated; at most one mobile class is supported.
pub fn qs_kpis(scenario: &CellScenario) -> Result<QsSolution, QsError> {
    let mobile_count = scenario.classes.iter().filter(|c| c.is_mobile()).count();
    if mobile_count > 1 {
        return Err(QsError::SeveralMobileClasses {
            count: mobile_count,
        });
    }
    let rho_s = scenario.static_load();
    if rho_s >= 1.0 {
        return Err(QsError::Unstable { static_load: rho_s });
    }

    let capacity = scenario.capacity;
    let rates = scenario.derive_rates();
    let mobile = scenario.classes.iter().position(|c| c.is_mobile());
    let (rho_m, rho_theta) = match mobile {
        Some(k) => (rates.rho[k], rates.rho_theta[k]),
        None => (0.0, 1.0),
    };

    let a = if rho_m > 0.0 {
        solve_a(rho_s, rho_m, rho_theta)
    } else {
        0.0
    };

    // Pass two: accumulate E(N_M) = sum_l q(l) * E(N_M | l). The
    // conditional mean is bounded by the impatience-only level
    // rho_m / rho_theta, which bounds the discarded tail.
    let mobile_cap = rho_m / rho_theta;
    let mut q = Vec::new();
    let mut psi = Vec::new();
    let mut covered = 0.0_f64;
    let mut mobile_mean = 0.0_f64;
    let mut ell = 0usize;
    loop {
        let ql = marginal_q(ell, a, rho_s);
        let row = psi_row(ell, rho_m, rho_theta);
        let row_mean: f64 = row.iter().enumerate().map(|(m, &p)| m as f64 * p).sum();
        covered += ql;
        mobile_mean += ql * row_mean;
        q.push(ql);
        psi.push(row);
        let tail = 1.0 - covered;
        if tail <= 0.0
            || (ell >= 10 && tail < 1e-9 && tail * mobile_cap < 1e-9 * mobile_mean.max(1e-300))
        {
            break;
        }
        ell += 1;
    }

    let gamma_s = capacity * (1.0 - rho_s) / (1.0 + a);
    let static_mean_total = (1.0 + a) * rho_s / (1.0 - rho_s);

    let classes = scenario
        .classes
        .iter()
        .enumerate()
        .map(|(k, class)| {
            if class.is_mobile() {
                mobile_class_kpis(
                    class.arrival_rate,
                    class.mean_volume,
                    class.mobility_rate,
                    mobile_mean,
                    capacity,
                )
            } else if class.arrival_rate > 0.0 {
                ClassKpis {
                    mean_occupancy: rates.rho[k] / rho_s * static_mean_total,
                    throughput: gamma_s,
                    handover_probability: 0.0,
                    carried_load: rates.rho[k],
                }
            } else {
                ClassKpis {
                    mean_occupancy: 0.0,
                    throughput: capacity,
                    handover_probability: 0.0,
                    carried_load: 0.0,
                }
            }
        })
        .collect();

    let kpis = Kpis {
        classes,
        empty_probability: q[0] * psi[0][0],
    };

    let step1 = match mobile {
        Some(k) => {
            let class = &scenario.classes[k];
            let pass1 = mobile_class_kpis(
                class.arrival_rate,
                class.mean_volume,
                class.mobility_rate,
                a,
                capacity,
            );
            Step1Kpis {
                mobile_mean: a,
                empty_probability: step1_joint(0, 0, a, rho_s),
                mobile_throughput: pass1.throughput,
                mobile_handover: pass1.handover_probability,
            }
        }
        None => Step1Kpis {
            mobile_mean: 0.0,
            empty_probability: step1_joint(0, 0, a, rho_s),
            mobile_throughput: capacity,
            mobile_handover: 0.0,
        },
    };

    Ok(QsSolution {
        a,
        q,
        psi,
        mobile_mean,
        kpis,
        step1,
    })
}

/// Mobile KPIs from a mean count: throughput from the rate balance
/// `lambda = mu * carried + theta * E(N)`, handover share from the exit
/// split. A class with no arrivals is reported with the same conventions
/// as the exact engine (idle-cell throughput, single-flow handover odds).
fn mobile_class_kpis(
    arrival_rate: f64,
    mean_volume: f64,
    mobility_rate: f64,
    mean_count: f64,
    capacity: f64,
) -> ClassKpis {
    if arrival_rate > 0.0 && mean_count > 0.0 {
        let throughput = mean_volume * (arrival_rate / mean_count - mobility_rate);
        ClassKpis {
            mean_occupancy: mean_count,
            throughput,
            handover_probability: mobility_rate * mean_count / arrival_rate,
            carried_load: (arrival_rate - mobility_rate * mean_count) * mean_volume / capacity,
        }
    } else {
        let ts = mobility_rate * mean_volume;
        ClassKpis {
            mean_occupancy: 0.0,
            throughput: capacity,
            handover_probability: ts / (capacity + ts),
            carried_load: 0.0,
        }
    }
}

/// Normalized pass-two conditional law of the mobile count at static level
/// `ell`, built from the term recursion
/// `psi(m) / psi(m-1) = rho_m * (ell + m) / (m * (1 + rho_theta * (ell + m)))`
/// and cut off adaptively once terms stop mattering.
fn psi_row(ell: usize, rho_m: f64, rho_theta: f64) -> Vec<f64> {
    assert!(rho_m >= 0.0, "rho_m must be nonnegative");
    assert!(rho_theta > 0.0, "rho_theta must be positive");
    let mut vals = vec![1.0_f64];
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut m = 1usize;
    loop {
        let lm = (ell + m) as f64;
        term *= rho_m * lm / (m as f64 * (1.0 + rho_theta * lm));
        vals.push(term);
        sum += term;
        if term == 0.0 || (m > 10 && term < 1e-14 * sum) {
            break;
        }
        if term > 1e290 {
            // Rescale a steeply growing body so the running sum stays
            // finite; only the relative profile matters before
            // normalization.
            let inv = 1.0 / term;
            for v in &mut vals {
                *v *= inv;
            }
            sum *= inv;
            term = 1.0;
        }
        m += 1;
    }
    let inv = 1.0 / sum;
    for v in &mut vals {
        *v *= inv;
    }
    vals
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// log(exp(a) + exp(b)) without leaving log space.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov;
    use crate::model::TrafficClass;

    // Frozen by an independent bisection implementation of the fixed
    // point, run at 300 halvings.
    const A_03_03_1: f64 = 0.182_960_648_778_324_8;
    const A_06_08_05: f64 = 1.073_459_220_242_176_7;

    fn scenario(rho_s: f64, rho_m: f64, theta: f64) -> CellScenario {
        let mu = 0.5;
        CellScenario::new(
            5e7,
            vec![
                TrafficClass::static_exp("static", rho_s * mu, 1e8).unwrap(),
                TrafficClass::mobile_exp("mobile", rho_m * mu, 1e8, theta).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn fixed_point_matches_independent_bisection() {
        assert!((solve_a(0.3, 0.3, 1.0) - A_03_03_1).abs() < 1e-12);
        assert!((solve_a(0.6, 0.8, 0.5) - A_06_08_05).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_defect_is_tiny_and_sign_definite() {
        for (rho_s, rho_m, rho_theta) in [
            (0.0, 0.5, 0.3),
            (0.3, 0.3, 1.0),
            (0.6, 0.8, 0.5),
            (0.95, 5.0, 1.0),
            (0.2, 10.0, 0.05),
        ] {
            let a = solve_a(rho_s, rho_m, rho_theta);
            let defect = (-a).exp() * (1.0 - rho_s) - rho_theta * a - (1.0 - rho_s - rho_m);
            assert!(defect.abs() < 1e-12, "defect {defect:e}");
            assert!(a > 0.0);
        }
        assert_eq!(solve_a(0.7, 0.0, 0.4), 0.0);
    }

    #[test]
    fn fixed_point_saturating_static_limit() {
        // As the static load fills the cell the mobile class keeps only its
        // impatience exits, so the mean tends to rho_m / rho_theta.
        let a = solve_a(1.0 - 1e-9, 0.3, 1.0);
        assert!((a - 0.3).abs() < 1e-6);
    }

    #[test]
    fn static_marginal_closed_form_corners() {
        let a = 1.3;
        let rho_s = 0.45;
        let q0 = marginal_q(0, a, rho_s);
        assert!((q0 - (-a * rho_s).exp() * (1.0 - rho_s)).abs() < 1e-15);
        for ell in 0..30 {
            let geometric = (1.0 - rho_s) * rho_s.powi(ell as i32);
            assert!((marginal_q(ell, 0.0, rho_s) - geometric).abs() < 1e-15);
        }
    }

    #[test]
    fn static_marginal_matches_series_form() {
        // The closed form must agree with summing the pass-one joint law
        // over the mobile count.
        let a = 1.5;
        let rho_s = 0.6;
        for ell in 0..=50 {
            let series: f64 = (0..=200).map(|m| step1_joint(ell, m, a, rho_s)).sum();
            let closed = marginal_q(ell, a, rho_s);
            assert!(
                (closed - series).abs() <= 1e-10 * closed.max(1e-30),
                "ell={ell}: closed {closed:e} vs series {series:e}"
            );
        }
    }

    #[test]
    fn static_marginal_normalizes() {
        let a = 2.2;
        let rho_s = 0.8;
        let mut sum = 0.0;
        for ell in 0..2000 {
            sum += marginal_q(ell, a, rho_s);
        }
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_law_matches_product_form() {
        // Independent arrangement: psi(m) proportional to
        // rho_m^m * C(ell+m, m) / prod_{j<=m} (1 + rho_theta (ell + j)).
        let rho_m = 0.7_f64;
        let rho_theta = 0.35;
        for ell in [0usize, 1, 7, 50] {
            let mut ln_terms = Vec::new();
            let mut ln_t = 0.0_f64;
            ln_terms.push(0.0);
            for m in 1..=200usize {
                let lm = (ell + m) as f64;
                ln_t += rho_m.ln() + lm.ln() - (m as f64).ln() - (1.0 + rho_theta * lm).ln();
                ln_terms.push(ln_t);
            }
            let peak = ln_terms.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = ln_terms.iter().map(|t| (t - peak).exp()).sum();
            for (m, &lt) in ln_terms.iter().enumerate() {
                let reference = (lt - peak).exp() / z;
                let got = conditional_psi(m, ell, rho_m, rho_theta);
                // Absolute slack covers the documented truncation of the
                // sub-1e-14 tail.
                assert!(
                    (got - reference).abs() <= 1e-12 * reference + 1e-13,
                    "ell={ell} m={m}: got {got:e} vs {reference:e}"
                );
            }
        }
    }

    #[test]
    fn conditional_law_normalizes_per_level() {
        for ell in [0usize, 3, 25, 400] {
            let row = psi_row(ell, 1.4, 0.25);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "ell={ell} sum {sum}");
        }
    }

    #[test]
    fn conditional_law_without_mobile_load_is_degenerate() {
        assert_eq!(conditional_psi(0, 5, 0.0, 0.8), 1.0);
        assert_eq!(conditional_psi(3, 5, 0.0, 0.8), 0.0);
    }

    #[test]
    fn conditional_law_pure_impatience_limit_is_poisson() {
        // With service negligible next to impatience the mobile class is a
        // pure immigration-death system.
        let rho_theta = 1e6;
        let rho_m = 0.5 * rho_theta;
        let mean = 0.5_f64;
        for m in 0..10 {
            let poisson =
                (-mean).exp() * mean.powi(m as i32) / (1..=m).product::<usize>().max(1) as f64;
            let got = conditional_psi(m, 0, rho_m, rho_theta);
            assert!((got - poisson).abs() < 1e-5 * poisson.max(1e-12), "m={m}");
        }
    }

    #[test]
    fn joint_law_corner_and_marginals() {
        let a = 0.9;
        let rho_s = 0.55;
        assert!((step1_joint(0, 0, a, rho_s) - (-a).exp() * (1.0 - rho_s)).abs() < 1e-15);

        // Mobile marginal is Poisson with mean `a`.
        for m in 0..12 {
            let sum: f64 = (0..4000).map(|ell| step1_joint(ell, m, a, rho_s)).sum();
            let poisson = (-a).exp() * a.powi(m as i32) / (1..=m).product::<usize>().max(1) as f64;
            assert!((sum - poisson).abs() < 1e-9, "m={m}: {sum} vs {poisson}");
        }

        // Static marginal is `q`.
        for ell in 0..40 {
            let sum: f64 = (0..300).map(|m| step1_joint(ell, m, a, rho_s)).sum();
            assert!((sum - marginal_q(ell, a, rho_s)).abs() < 1e-12);
        }
    }

    #[test]
    fn pass_one_mean_identity() {
        // The fixed point is equivalent to the occupancy identity
        // rho_theta * a = rho_s + rho_m + joint(0,0) - 1.
        for (rho_s, rho_m, rho_theta) in [(0.4, 0.4, 0.2), (0.2, 1.5, 0.8)] {
            let a = solve_a(rho_s, rho_m, rho_theta);
            let lhs = rho_theta * a;
            let rhs = rho_s + rho_m + step1_joint(0, 0, a, rho_s) - 1.0;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_scenario_kpis_are_frozen() {
        // Same mixed scenario the exact engine freezes: rho_s = rho_m =
        // 0.4, mobility a fifth of the service rate. Values from an
        // independent implementation of both passes.
        let sol = qs_kpis(&scenario(0.4, 0.4, 0.1)).unwrap();
        assert!((sol.a - 0.617_642_466_776_074_5).abs() < 1e-12);
        assert!((sol.mobile_mean - 0.640_854_925_646_195_4).abs() < 1e-9);
        let s = &sol.kpis.classes[0];
        let m = &sol.kpis.classes[1];
        assert!((s.throughput - 18_545_507.190_961_26).abs() / 1e7 < 1e-9);
        assert!((m.throughput - 21_208_311.272_373_125).abs() / 1e7 < 1e-7);
        assert!((m.handover_probability - 0.320_427_462_823_097_7).abs() < 1e-9);
        assert!((s.mean_occupancy - 1.078_428_311_184_049_8).abs() < 1e-9);
        assert!((sol.kpis.empty_probability - 0.321_227_167_931_048_6).abs() < 1e-9);
        assert!((sol.step1.mobile_mean - sol.a).abs() < 1e-15);

        let q_sum: f64 = sol.q.iter().sum();
        assert!(q_sum > 1.0 - 1e-9);
        let q_mean: f64 = sol.q.iter().enumerate().map(|(l, &p)| l as f64 * p).sum();
        assert!((q_mean - s.mean_occupancy).abs() < 1e-6);
    }

    #[test]
    fn no_mobile_load_reduces_to_plain_sharing() {
        let mu = 0.5;
        let sc = CellScenario::new(
            5e7,
            vec![TrafficClass::static_exp("s", 0.3 * mu, 1e8).unwrap()],
        )
        .unwrap();
        let sol = qs_kpis(&sc).unwrap();
        assert_eq!(sol.a, 0.0);
        assert!((sol.kpis.classes[0].throughput - 5e7 * 0.7).abs() < 1e-6);
        assert_eq!(sol.mobile_mean, 0.0);
    }

    #[test]
    fn network_reduction_mean_closed_form() {
        assert!((mm_step1_a(0.25, 0.5) - 1.5_f64.ln()).abs() < 1e-12);
        assert_eq!(mm_step1_a(0.4, 0.4), 0.0);
    }

    #[test]
    fn network_reduction_mean_is_self_consistent() {
        // Feeding the closed-form mean back as handover in-traffic must
        // reproduce it through the general fixed point, whatever the
        // mobility rate.
        let rho_s0 = 0.25;
        let rho0 = 0.5;
        let a = mm_step1_a(rho_s0, rho0);
        for rho_theta in [0.05, 0.5, 5.0] {
            let rho_m_eff = (rho0 - rho_s0) + rho_theta * a;
            assert!((solve_a(rho_s0, rho_m_eff, rho_theta) - a).abs() < 1e-8);
        }
    }

    #[test]
    fn agrees_with_exact_engine_in_design_regime() {
        // The timescale split needs mobility to be at least a modest
        // fraction of the service rate; there the scheme tracks the exact
        // chain within a few percent, tightening as mobility grows.
        for (theta, tol) in [(0.1, 0.03), (0.5, 0.02), (2.5, 0.01)] {
            let sc = scenario(0.4, 0.4, theta);
            let qs = qs_kpis(&sc).unwrap();
            let exact = markov::solve_auto(&sc, &markov::TruncationOptions::default()).unwrap();
            let qm = &qs.kpis.classes[1];
            let em = &exact.kpis.classes[1];
            let gamma_gap = (qm.throughput - em.throughput).abs() / em.throughput;
            assert!(gamma_gap < tol, "theta={theta}: throughput gap {gamma_gap}");
            let h_gap =
                (qm.handover_probability - em.handover_probability).abs() / em.handover_probability;
            assert!(h_gap < tol, "theta={theta}: handover gap {h_gap}");
        }
    }

    #[test]
    fn rejects_unsupported_shapes() {
        let mu = 0.5;
        let two_mobile = CellScenario::new(
            5e7,
            vec![
                TrafficClass::mobile_exp("a", 0.1 * mu, 1e8, 0.2).unwrap(),
                TrafficClass::mobile_exp("b", 0.1 * mu, 1e8, 0.4).unwrap(),
            ],
        )
        .unwrap();
        assert!(matches!(
            qs_kpis(&two_mobile),
            Err(QsError::SeveralMobileClasses { count: 2 })
        ));

        let saturated =
            CellScenario::new(1.0, vec![TrafficClass::static_exp("s", 1.0, 1.0).unwrap()]).unwrap();
        assert!(matches!(qs_kpis(&saturated), Err(QsError::Unstable { .. })));
    }
}
