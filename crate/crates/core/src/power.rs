//! Per-slot power decisions: Lyapunov weights and the sum-power water-filling
//! solver for `min sum_n [V p_n - J log2(1 + p_n h_n / c)]`, `sum p_n <= budget`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{in_gev_support, GevParams};
use crate::queueing::VirtualQueues;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Lyapunov tradeoff parameter.
    pub v: f64,
    pub p_max_dbm: f64,
    pub n_rb: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            v: 0.0,
            p_max_dbm: 10.0,
            n_rb: 20,
        }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0) || !self.v.is_finite() {
            return Err(Error::config("power.v", "must be finite and >= 0"));
        }
        if !self.p_max_dbm.is_finite() {
            return Err(Error::config("power.p_max_dbm", "must be finite"));
        }
        if self.n_rb == 0 {
            return Err(Error::config("power.n_rb", "must be at least 1"));
        }
        Ok(())
    }

    pub fn p_max_w(&self) -> f64 {
        crate::channel::dbm_to_watts(self.p_max_dbm)
    }

    /// Sum-power budget of one pair, `N * P_max`.
    pub fn budget_w(&self) -> f64 {
        self.n_rb as f64 * self.p_max_w()
    }
}

/// `W T_c [Q_M + (2 Q_B + 1) x + 2 x^3]` with `x = q + lambda`.
pub fn weight_rsu(vq: &VirtualQueues, q: f64, lambda: f64, w: f64, t_c: f64) -> f64 {
    let x = q + lambda;
    w * t_c * (vq.q_m + (2.0 * vq.q_b + 1.0) * x + 2.0 * x * x * x)
}

/// Pair-local weight: the queue term always counts, the maximal-queue terms only
/// while `q + lambda` is inside the estimated GEV support (always, without an estimate).
pub fn weight_evt(
    vq_local: &VirtualQueues,
    q: f64,
    lambda: f64,
    gev: Option<&GevParams>,
    w: f64,
    t_c: f64,
) -> f64 {
    let x = q + lambda;
    let active = gev.is_none_or(|g| in_gev_support(x, g));
    let tail = if active {
        weight_rsu(vq_local, q, lambda, w, t_c)
    } else {
        0.0
    };
    w * t_c * x + tail
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerDecision {
    /// Watts per RB, aligned with the input gains.
    pub p: Vec<f64>,
    pub eta: f64,
    pub objective: f64,
}

impl PowerDecision {
    fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            eta: 0.0,
            objective: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Value of the per-slot objective at powers `p`.
pub fn objective(p: &[f64], j: f64, v: f64, gains: &[f64], noise_plus_i: f64) -> f64 {
    p.iter()
        .zip(gains)
        .map(|(&pn, &h)| v * pn - j * (pn * h / noise_plus_i).ln_1p() / LN_2)
        .sum()
}

/// Water-filling thresholds `c / h` of the usable RBs, ascending, with their indices.
fn floors(gains: &[f64], noise_plus_i: f64) -> Vec<(usize, f64)> {
    let mut a: Vec<(usize, f64)> = gains
        .iter()
        .enumerate()
        .filter(|(_, &h)| h > 0.0)
        .map(|(i, &h)| (i, noise_plus_i / h))
        .collect();
    a.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    a
}

/// Level `w` with `sum (w - a_n)^+ = budget`, for ascending floors `a`.
fn level_for_budget(a: &[(usize, f64)], budget: f64) -> f64 {
    let mut prefix = 0.0;
    for m in 1..=a.len() {
        prefix += a[m - 1].1;
        let w = (budget + prefix) / m as f64;
        if m == a.len() || w <= a[m].1 {
            return w;
        }
    }
    unreachable!("nonempty floors")
}

fn fill(a: &[(usize, f64)], level: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    for &(i, floor) in a {
        p[i] = (level - floor).max(0.0);
    }
    p
}

/// KKT solution of the per-slot problem. The water level is computed exactly
/// from the sorted floors, so the budget is met to rounding when it binds.
pub fn waterfill(
    j: f64,
    v: f64,
    gains: &[f64],
    noise_plus_i: f64,
    budget: f64,
) -> Result<PowerDecision> {
    if !(j >= 0.0) || !j.is_finite() {
        return Err(Error::domain(
            "waterfill",
            format!("weight {j} must be finite and >= 0"),
        ));
    }
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(
            "waterfill",
            format!("V = {v} must be finite and >= 0"),
        ));
    }
    if !(noise_plus_i > 0.0) {
        return Err(Error::domain(
            "waterfill",
            "noise plus interference must be positive",
        ));
    }
    if !(budget > 0.0) {
        return Err(Error::domain("waterfill", "budget must be positive"));
    }
    if gains.iter().any(|h| !(*h >= 0.0)) {
        return Err(Error::domain("waterfill", "gains must be >= 0"));
    }
    let n = gains.len();
    let a = floors(gains, noise_plus_i);
    if j == 0.0 || a.is_empty() {
        return Ok(PowerDecision::zeros(n));
    }

    // Unconstrained level when eta = 0.
    let free_level = if v > 0.0 {
        j / (v * LN_2)
    } else {
        f64::INFINITY
    };
    let free_total: f64 = a.iter().map(|&(_, f)| (free_level - f).max(0.0)).sum();
    let (level, eta) = if free_total <= budget {
        (free_level, 0.0)
    } else {
        let level = level_for_budget(&a, budget);
        (level, (j / (level * LN_2) - v).max(0.0))
    };
    let p = fill(&a, level, n);
    let objective = objective(&p, j, v, gains, noise_plus_i);
    Ok(PowerDecision { p, eta, objective })
}

/// Largest violation among the KKT conditions, each relative to `V + eta`
/// (stationarity and dual feasibility) or to the budget (primal, slackness).
pub fn kkt_residual(
    d: &PowerDecision,
    j: f64,
    v: f64,
    gains: &[f64],
    noise_plus_i: f64,
    budget: f64,
) -> f64 {
    let scale = v + d.eta;
    let mut r: f64 = 0.0;
    for (&p, &h) in d.p.iter().zip(gains) {
        r = r.max((-p).max(0.0) / budget);
        if h <= 0.0 {
            r = r.max(p / budget);
            continue;
        }
        let marginal = j * h / ((noise_plus_i + p * h) * LN_2);
        if p > 0.0 {
            r = r.max((marginal - scale).abs() / scale.max(f64::MIN_POSITIVE));
        } else if marginal > scale {
            r = r.max((marginal - scale) / scale.max(f64::MIN_POSITIVE));
        }
    }
    let total = d.total();
    r = r.max((total - budget).max(0.0) / budget);
    if d.eta > 0.0 {
        r = r.max((budget - total).abs() / budget);
    }
    r
}

/// Minimum-power allocation reaching `target_bps` over RBs of width `w`,
/// or the full-budget rate-maximizing allocation when the target is out of reach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTargetDecision {
    pub p: Vec<f64>,
    /// Shannon rate the allocation achieves, bits/s.
    pub rate_bps: f64,
    pub reached: bool,
}

pub fn min_power_for_rate(
    target_bps: f64,
    w: f64,
    gains: &[f64],
    noise_plus_i: f64,
    budget: f64,
) -> Result<RateTargetDecision> {
    if !(target_bps >= 0.0) || !(w > 0.0) || !(noise_plus_i > 0.0) || !(budget > 0.0) {
        return Err(Error::domain("min_power_for_rate", "invalid arguments"));
    }
    let n = gains.len();
    let a = floors(gains, noise_plus_i);
    let rate_of = |p: &[f64]| -> f64 {
        p.iter()
            .zip(gains)
            .map(|(&pn, &h)| w * (pn * h / noise_plus_i).ln_1p() / LN_2)
            .sum()
    };
    if target_bps == 0.0 || a.is_empty() {
        return Ok(RateTargetDecision {
            p: vec![0.0; n],
            rate_bps: 0.0,
            reached: target_bps == 0.0,
        });
    }
    // Active RBs get p = level - floor, so their rate is W log2(level / floor).
    let bits_per_hz = target_bps / w;
    let mut log_sum = 0.0;
    let mut level = 0.0;
    for m in 1..=a.len() {
        log_sum += a[m - 1].1.log2();
        level = ((bits_per_hz + log_sum) / m as f64).exp2();
        if m == a.len() || level <= a[m].1 {
            break;
        }
    }
    let p = fill(&a, level, n);
    if p.iter().sum::<f64>() <= budget {
        let rate_bps = rate_of(&p);
        return Ok(RateTargetDecision {
            p,
            rate_bps,
            reached: true,
        });
    }
    let p = fill(&a, level_for_budget(&a, budget), n);
    let rate_bps = rate_of(&p);
    Ok(RateTargetDecision {
        p,
        rate_bps,
        reached: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WT: f64 = 180e3 * 3e-3;

    #[test]
    fn rsu_weight_examples() {
        let z = VirtualQueues::default();
        assert_eq!(weight_rsu(&z, 0.0, 0.0, 180e3, 3e-3), 0.0);
        let one = VirtualQueues { q_m: 1.0, q_b: 0.0 };
        assert!((weight_rsu(&one, 0.0, 0.0, 180e3, 3e-3) - WT).abs() < 1e-9);
        assert!((weight_rsu(&z, 4.0, 6.0, 180e3, 3e-3) - 540.0 * 2010.0).abs() < 1e-6);
    }

    #[test]
    fn evt_weight_examples() {
        let vq = VirtualQueues { q_m: 7.0, q_b: 3.0 };
        let off = GevParams {
            mu: 1e4,
            sigma: 10.0,
            xi: 0.5,
        };
        assert!((weight_evt(&vq, 5.0, 5.0, Some(&off), 180e3, 3e-3) - WT * 10.0).abs() < 1e-9);
        let gumbel = GevParams {
            mu: 1e4,
            sigma: 10.0,
            xi: 0.0,
        };
        let full = weight_evt(&vq, 5.0, 5.0, Some(&gumbel), 180e3, 3e-3);
        assert!((full - WT * 10.0 - weight_rsu(&vq, 5.0, 5.0, 180e3, 3e-3)).abs() < 1e-6);
        assert_eq!(
            weight_evt(&VirtualQueues::default(), 0.0, 0.0, None, 180e3, 3e-3),
            0.0
        );
    }

    #[test]
    fn single_rb_closed_form() {
        let d = waterfill(LN_2, 1.0, &[1.0], 0.5, 100.0).unwrap();
        assert!((d.p[0] - 0.5).abs() < 1e-12);
        assert_eq!(d.eta, 0.0);
    }

    #[test]
    fn zero_weight_or_gains() {
        assert_eq!(
            waterfill(0.0, 1.0, &[1.0, 2.0], 0.5, 1.0).unwrap().p,
            vec![0.0, 0.0]
        );
        assert_eq!(
            waterfill(5.0, 1.0, &[0.0, 0.0], 0.5, 1.0).unwrap().p,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn equal_gains_split_budget() {
        let d = waterfill(1e6, 0.0, &[2.0, 2.0], 1.0, 0.2).unwrap();
        assert!((d.p[0] - 0.1).abs() < 1e-15 && (d.p[1] - 0.1).abs() < 1e-15);
        assert!(d.eta > 0.0);
        // brute force over a 1e-4 W grid
        let mut best = f64::INFINITY;
        for i in 0..=2000 {
            let p0 = i as f64 * 1e-4;
            best = best.min(objective(&[p0, 0.2 - p0], 1e6, 0.0, &[2.0, 2.0], 1.0));
        }
        assert!(d.objective <= best + 1e-9 * best.abs());
    }

    #[test]
    fn zero_v_spends_budget() {
        let d = waterfill(1.0, 0.0, &[1e-9, 3e-9, 5e-12], 1e-12, 0.2).unwrap();
        assert!((d.total() - 0.2).abs() < 1e-15);
        assert!(kkt_residual(&d, 1.0, 0.0, &[1e-9, 3e-9, 5e-12], 1e-12, 0.2) < 1e-10);
    }

    #[test]
    fn weak_rb_left_dry() {
        let g = [1.0, 1e-3];
        let d = waterfill(LN_2, 1.0, &g, 0.5, 100.0).unwrap();
        assert!(d.p[0] > 0.0);
        assert_eq!(d.p[1], 0.0);
        assert!(kkt_residual(&d, LN_2, 1.0, &g, 0.5, 100.0) < 1e-12);
    }

    #[test]
    fn rate_target_reached_with_minimum_power() {
        let g = [1e-9, 2e-9];
        let c = 1e-12;
        let d = min_power_for_rate(1e6, 180e3, &g, c, 0.2).unwrap();
        assert!(d.reached);
        assert!((d.rate_bps - 1e6).abs() < 1e-3);
        // Any other split of the same power gives no more rate than the optimum.
        let total: f64 = d.p.iter().sum();
        for i in 1..100 {
            let p0 = total * i as f64 / 100.0;
            let r = 180e3 * ((p0 * g[0] / c).ln_1p() + ((total - p0) * g[1] / c).ln_1p()) / LN_2;
            assert!(r <= d.rate_bps * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rate_target_out_of_reach_uses_budget() {
        let g = [1e-12];
        let d = min_power_for_rate(1e9, 180e3, &g, 1e-12, 0.2).unwrap();
        assert!(!d.reached);
        assert!((d.p[0] - 0.2).abs() < 1e-15);
    }

    fn instance() -> impl Strategy<Value = (f64, f64, Vec<f64>, f64, f64)> {
        (
            0.0f64..1e3,
            0.0f64..10.0,
            prop::collection::vec(0.0f64..5.0, 1..6),
            0.05f64..2.0,
            0.01f64..3.0,
        )
    }

    proptest! {
        #[test]
        fn feasible_and_kkt((j, v, g, c, b) in instance()) {
            let d = waterfill(j, v, &g, c, b).unwrap();
            prop_assert!(d.p.iter().all(|&p| p >= 0.0));
            prop_assert!(d.total() <= b * (1.0 + 1e-12));
            if j > 0.0 {
                prop_assert!(kkt_residual(&d, j, v, &g, c, b) < 1e-9);
            }
        }

        #[test]
        fn total_power_monotone((j, v, g, c, b) in instance(), dj in 0.0f64..100.0, dv in 0.0f64..5.0) {
            let base = waterfill(j, v, &g, c, b).unwrap().total();
            prop_assert!(waterfill(j + dj, v, &g, c, b).unwrap().total() >= base - 1e-12);
            prop_assert!(waterfill(j, v + dv, &g, c, b).unwrap().total() <= base + 1e-12);
        }

        #[test]
        fn zero_power_threshold((j, v, g, c, b) in instance()) {
            let d = waterfill(j, v, &g, c, b).unwrap();
            let scale = v + d.eta;
            for (&p, &h) in d.p.iter().zip(&g) {
                let lead = j * h / (c * LN_2);
                if p == 0.0 {
                    prop_assert!(lead <= scale * (1.0 + 1e-9));
                } else {
                    prop_assert!(lead > scale * (1.0 - 1e-9));
                }
            }
        }

        #[test]
        fn weights_match_reference(qm in 0.0f64..1e6, qb in 0.0f64..1e12, q in 0.0f64..1e5, l in 0.0f64..5e3) {
            let vq = VirtualQueues { q_m: qm, q_b: qb };
            let x = q + l;
            let reference = 180e3 * 3e-3 * qm + 540.0 * (2.0 * qb + 1.0) * x + 540.0 * 2.0 * x.powi(3);
            let ours = weight_rsu(&vq, q, l, 180e3, 3e-3);
            prop_assert!((ours - reference).abs() <= 1e-12 * reference.abs().max(1.0));
            let evt_on = weight_evt(&vq, q, l, None, 180e3, 3e-3);
            prop_assert!((evt_on - (540.0 * x + reference)).abs() <= 1e-12 * reference.abs().max(1.0));
        }
    }
}
