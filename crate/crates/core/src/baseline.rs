//! Constant-rate baseline: effective-bandwidth tail exponent, the exponential
//! queue-length tail and the Gumbel statistics of the maximum over pairs.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::EULER_GAMMA;
use crate::queueing::ArrivalProcess;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Constant service rate, bits/s.
    pub r_c_bps: f64,
    /// Overrides the utilization as `Pr(Q > 0)`.
    pub p_busy: Option<f64>,
    /// Name of a scheme whose average throughput `r_c_bps` is tuned to match.
    pub match_scheme: Option<String>,
    /// Relative tolerance of the throughput match.
    pub match_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            r_c_bps: 1.0e6,
            p_busy: None,
            match_scheme: None,
            match_tol: 0.01,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_c_bps > 0.0) || !self.r_c_bps.is_finite() {
            return Err(Error::config("baseline.r_c_bps", "must be positive"));
        }
        if let Some(p) = self.p_busy {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::config("baseline.p_busy", "must lie in (0, 1]"));
            }
        }
        if !(self.match_tol > 0.0 && self.match_tol < 0.5) {
            return Err(Error::config("baseline.match_tol", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineModel {
    pub r_c: f64,
    pub theta: f64,
    pub p_busy: f64,
}

impl BaselineModel {
    /// Model for service rate `r_c`; `p_busy` defaults to the utilization.
    pub fn new(r_c: f64, lambda_avg: f64, p_busy: Option<f64>) -> Result<Self> {
        let theta = solve_theta(r_c, lambda_avg)?;
        let p_busy = p_busy.unwrap_or(lambda_avg / r_c);
        if !(p_busy > 0.0 && p_busy <= 1.0) {
            return Err(Error::config("baseline.p_busy", "must lie in (0, 1]"));
        }
        Ok(Self { r_c, theta, p_busy })
    }
}

/// `beta(theta) = lambda (e^theta - 1) / theta` for unit-bit Poisson arrivals.
pub fn effective_bandwidth(theta: f64, lambda_avg: f64) -> f64 {
    if theta.abs() < 1e-8 {
        lambda_avg * (1.0 + theta / 2.0 + theta * theta / 6.0)
    } else {
        lambda_avg * theta.exp_m1() / theta
    }
}

/// Tail exponent `theta` with `beta(theta) = r_c`.
pub fn solve_theta(r_c: f64, lambda_avg: f64) -> Result<f64> {
    if !(lambda_avg > 0.0) || !(r_c > lambda_avg) {
        return Err(Error::Unstable {
            service: r_c,
            arrival: lambda_avg,
        });
    }
    let target = r_c / lambda_avg;
    let f = |t: f64| effective_bandwidth(t, 1.0) - target;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Pr(Q > q) ~ p_busy e^{-theta q}`.
pub fn baseline_ccdf(q: f64, model: &BaselineModel) -> f64 {
    model.p_busy * (-model.theta * q).exp()
}

/// Gumbel mean and variance of the maximum queue over `k` pairs. The mean is
/// clamped at 0 when `k p_busy <= 1`.
pub fn baseline_max_stats(k: usize, model: &BaselineModel) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::domain(
            "baseline_max_stats",
            "need at least one pair",
        ));
    }
    let kp = k as f64 * model.p_busy;
    let mut mean = ((kp).ln() + EULER_GAMMA) / model.theta;
    if kp <= 1.0 {
        log::warn!("K * Pr(Q>0) = {kp} <= 1; clamping the Gumbel mean at 0");
        mean = mean.max(0.0);
    }
    let var = PI * PI / (6.0 * model.theta * model.theta);
    Ok((mean, var))
}

/// Statistics of independent constant-rate queues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantRateSample {
    pub mean_max: f64,
    pub var_max: f64,
    /// Fraction of (pair, slot) samples with a nonempty queue.
    pub busy_fraction: f64,
    /// Per-pair queue samples from the measurement window, ascending; empty
    /// unless requested.
    pub queue_sorted: Vec<f64>,
}

/// Simulates `k` queues with Poisson unit-bit arrivals of rate `lambda_avg`
/// drained by `r_c * t_c` bits per slot.
#[allow(clippy::too_many_arguments)]
pub fn simulate_constant_rate<R: Rng + ?Sized>(
    k: usize,
    lambda_avg: f64,
    r_c: f64,
    t_c: f64,
    warmup: usize,
    slots: usize,
    keep_samples: bool,
    rng: &mut R,
) -> Result<ConstantRateSample> {
    if k == 0 || slots == 0 {
        return Err(Error::Empty("simulate_constant_rate"));
    }
    let arrivals = ArrivalProcess::new(lambda_avg, t_c)?;
    let mut q = vec![0.0; k];
    let mut samples = Vec::with_capacity(if keep_samples { k * slots } else { 0 });
    let (mut s1, mut s2, mut busy) = (0.0, 0.0, 0usize);
    for t in 0..warmup + slots {
        let mut m: f64 = 0.0;
        for qk in q.iter_mut() {
            *qk = crate::queueing::update_queue(*qk, arrivals.sample(rng), r_c, t_c);
            m = m.max(*qk);
        }
        if t >= warmup {
            s1 += m;
            s2 += m * m;
            busy += q.iter().filter(|&&x| x > 0.0).count();
            if keep_samples {
                samples.extend_from_slice(&q);
            }
        }
    }
    samples.sort_by(f64::total_cmp);
    let n = slots as f64;
    let mean_max = s1 / n;
    Ok(ConstantRateSample {
        mean_max,
        var_max: (s2 / n - mean_max * mean_max).max(0.0),
        busy_fraction: busy as f64 / (n * k as f64),
        queue_sorted: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bandwidth_values() {
        assert!((effective_bandwidth(1e-12, 3.0) - 3.0).abs() < 1e-10);
        assert!((effective_bandwidth(2f64.ln(), 1.0) - 1.0 / 2f64.ln()).abs() < 1e-12);
        let mut last = 0.0;
        for i in 1..=100 {
            let b = effective_bandwidth(i as f64 * 0.05, 1.0);
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn theta_roots() {
        // Independent root check: (e^t - 1)/t = r by Newton from a different start.
        let newton = |r: f64| {
            let mut t: f64 = 5.0;
            for _ in 0..100 {
                let f = t.exp_m1() / t - r;
                let df = (t * t.exp() - t.exp_m1()) / (t * t);
                t -= f / df;
            }
            t
        };
        for r in [2.0, 10.0, 1.5] {
            let t = solve_theta(r * 0.5e6, 0.5e6).unwrap();
            assert!((t - newton(r)).abs() < 1e-9 * t);
        }
        assert!((solve_theta(1e6, 0.5e6).unwrap() - 1.2564).abs() < 1e-4);
        assert!((solve_theta(5e6, 0.5e6).unwrap() - 3.615).abs() < 1e-3);
        assert!(solve_theta(0.5e6 * (1.0 + 1e-6), 0.5e6).unwrap() < 1e-5);
        assert!(matches!(
            solve_theta(0.5e6, 0.5e6),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn ccdf_values() {
        let m = BaselineModel {
            r_c: 1.0,
            theta: 0.2,
            p_busy: 0.4,
        };
        assert_eq!(baseline_ccdf(0.0, &m), 0.4);
        assert!((baseline_ccdf(5.0, &m) - 0.4 / std::f64::consts::E).abs() < 1e-15);
        assert!(baseline_ccdf(1e6, &m) < 1e-300);
    }

    #[test]
    fn max_stats() {
        let m = BaselineModel {
            r_c: 1.0,
            theta: 1.0,
            p_busy: 1.0 / 80.0,
        };
        let (mean, var) = baseline_max_stats(80, &m).unwrap();
        assert!((mean - 0.57721).abs() < 1e-5);
        assert!((var - PI * PI / 6.0).abs() < 1e-12);
        let m2 = BaselineModel { theta: 2.0, ..m };
        assert!((baseline_max_stats(80, &m2).unwrap().1 - var / 4.0).abs() < 1e-15);
        let m3 = BaselineModel {
            r_c: 1.0,
            theta: 1e-4,
            p_busy: 0.5,
        };
        let (mean, _) = baseline_max_stats(80, &m3).unwrap();
        assert!((mean - (40f64.ln() + 0.57721) * 1e4).abs() < 1.0);
        let m4 = BaselineModel {
            r_c: 1.0,
            theta: 1.0,
            p_busy: 0.001,
        };
        assert_eq!(baseline_max_stats(80, &m4).unwrap().0, 0.0);
    }

    #[test]
    fn exponential_tail_gives_gumbel_shape() {
        use crate::evt::{estimate_gev, QueueHistory};
        let theta = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = QueueHistory::from_samples((0..200_000).map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / theta
        }));
        let fit = estimate_gev(&h, 0.01, 80, 20).unwrap();
        assert!(fit.gpd.xi.abs() < 0.05);
        assert!((fit.gpd.sigma_tilde * theta - 1.0).abs() < 0.05);
    }

    #[test]
    fn simulated_tail_slope() {
        // Fine slots approximate the fluid queue the exponent describes.
        let lambda = 0.5e6;
        let r_c = 1e6;
        let t_c = 1e-7;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s =
            simulate_constant_rate(4, lambda, r_c, t_c, 10_000, 500_000, true, &mut rng).unwrap();
        let theta = solve_theta(r_c, lambda).unwrap();
        let q = &s.queue_sorted;
        let at = |p: f64| q[((p * q.len() as f64) as usize).min(q.len() - 1)];
        let (lo, hi) = (at(0.8), at(0.999));
        let ccdf = |x: f64| q.len() as f64 - q.partition_point(|&y| y <= x) as f64;
        let slope = (ccdf(hi).ln() - ccdf(lo).ln()) / (hi - lo);
        assert!(
            (slope + theta).abs() / theta < 0.1,
            "slope {slope} theta {theta}"
        );
    }
}
