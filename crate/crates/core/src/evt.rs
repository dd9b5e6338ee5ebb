//! Peaks-over-threshold estimation of the maximal-queue distribution.
//!
//! A pair keeps the history of its own queue lengths. The excesses above a
//! high empirical quantile are summarized by their first two moments, mapped to
//! generalized Pareto parameters, and then to the GEV law of the maximum over
//! `K` pairs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this magnitude the shape is treated as zero (Gumbel / exponential).
pub const XI_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvtConfig {
    /// Exceedance probability defining the threshold `d`.
    pub psi: f64,
    pub min_exceedances: usize,
    /// Slots between re-estimates.
    pub recompute_period: u64,
    /// Keep only the most recent samples (sliding window) when set.
    pub window: Option<usize>,
}

impl Default for EvtConfig {
    fn default() -> Self {
        Self {
            psi: 1e-2,
            min_exceedances: 20,
            recompute_period: 1,
            window: None,
        }
    }
}

impl EvtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(Error::config("evt.psi", "must lie in (0, 1)"));
        }
        if self.min_exceedances < 2 {
            return Err(Error::config("evt.min_exceedances", "need at least 2"));
        }
        if self.recompute_period == 0 {
            return Err(Error::config("evt.recompute_period", "must be at least 1"));
        }
        if self.window == Some(0) {
            return Err(Error::config("evt.window", "must be positive when set"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub sigma_tilde: f64,
    pub xi: f64,
    pub threshold_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

/// Full fit: threshold excess model plus the implied GEV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GevFit {
    pub gev: GevParams,
    pub gpd: GpdParams,
    pub mean_excess: f64,
    pub second_moment_excess: f64,
    pub exceedances: usize,
    pub samples: usize,
}

/// Sorted sample log with optional sliding window.
#[derive(Debug, Clone, Default)]
pub struct QueueHistory {
    sorted: Vec<f64>,
    order: VecDeque<f64>,
    window: Option<usize>,
}

impl QueueHistory {
    pub fn new(window: Option<usize>) -> Self {
        Self {
            window,
            ..Self::default()
        }
    }

    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = samples.into_iter().collect();
        sorted.sort_by(f64::total_cmp);
        Self {
            sorted,
            order: VecDeque::new(),
            window: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn push(&mut self, x: f64) {
        let at = self.sorted.partition_point(|&y| y <= x);
        self.sorted.insert(at, x);
        if let Some(cap) = self.window {
            self.order.push_back(x);
            if self.order.len() > cap {
                let old = self.order.pop_front().expect("nonempty");
                let pos = self.sorted.partition_point(|&y| y < old);
                self.sorted.remove(pos);
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        empirical_quantile(&self.sorted, p)
    }

    /// Number of samples strictly above `d`, with the first two moments of the excesses.
    pub fn excess_moments(&self, d: f64) -> (usize, f64, f64) {
        let start = self.sorted.partition_point(|&y| y <= d);
        let tail = &self.sorted[start..];
        if tail.is_empty() {
            return (0, 0.0, 0.0);
        }
        let n = tail.len() as f64;
        let (s1, s2) = tail.iter().fold((0.0, 0.0), |(a, b), &x| {
            let e = x - d;
            (a + e, b + e * e)
        });
        (tail.len(), s1 / n, s2 / n)
    }

    pub fn merge(histories: &[QueueHistory]) -> QueueHistory {
        QueueHistory::from_samples(histories.iter().flat_map(|h| h.sorted.iter().copied()))
    }
}

/// Nearest-rank quantile of ascending `sorted`: the `ceil(p n)`-th order statistic.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("empirical_quantile"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "empirical_quantile",
            format!("p = {p} outside (0, 1)"),
        ));
    }
    let n = sorted.len();
    // Guard the product against rounding just above an integer.
    let raw = p * n as f64;
    let rank = if (raw - raw.round()).abs() < 1e-9 * raw.max(1.0) {
        raw.round() as usize
    } else {
        raw.ceil() as usize
    };
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Moment matching of a GPD to the excess mean `E[S]` and second moment `E[S^2]`.
pub fn gpd_from_moments(mean_excess: f64, second_moment_excess: f64) -> Result<(f64, f64)> {
    let denom = 2.0 * second_moment_excess - 2.0 * mean_excess * mean_excess;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateSample(format!(
            "excess variance not positive (E[S]={mean_excess}, E[S^2]={second_moment_excess})"
        )));
    }
    let xi = (second_moment_excess - 2.0 * mean_excess * mean_excess) / denom;
    let sigma_tilde = second_moment_excess * mean_excess / denom;
    if !(sigma_tilde > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "nonpositive GPD scale {sigma_tilde}"
        )));
    }
    Ok((sigma_tilde, xi))
}

/// Fits the GEV of the maximum over `k` pairs from one history.
pub fn estimate_gev(
    history: &QueueHistory,
    psi: f64,
    k: usize,
    min_exceedances: usize,
) -> Result<GevFit> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::domain(
            "estimate_gev",
            format!("psi = {psi} outside (0, 1)"),
        ));
    }
    if k < 2 {
        return Err(Error::domain("estimate_gev", "need at least 2 pairs"));
    }
    let d = history.quantile(1.0 - psi)?;
    let (count, c_m, c_v) = history.excess_moments(d);
    if count < min_exceedances {
        return Err(Error::EstimateUnavailable {
            have: count,
            need: min_exceedances,
        });
    }
    let (sigma_tilde, xi) = gpd_from_moments(c_m, c_v)?;
    let mu = history.quantile(1.0 - 1.0 / k as f64)?;
    let sigma = sigma_tilde + xi * (mu - d);
    if !(sigma > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "nonpositive GEV scale {sigma}"
        )));
    }
    Ok(GevFit {
        gev: GevParams { mu, sigma, xi },
        gpd: GpdParams {
            sigma_tilde,
            xi,
            threshold_d: d,
        },
        mean_excess: c_m,
        second_moment_excess: c_v,
        exceedances: count,
        samples: history.len(),
    })
}

/// Same estimator on the union of several histories.
pub fn estimate_gev_pooled(
    histories: &[QueueHistory],
    psi: f64,
    k: usize,
    min_exceedances: usize,
) -> Result<GevFit> {
    estimate_gev(&QueueHistory::merge(histories), psi, k, min_exceedances)
}

/// Whether `m` lies in the support `1 + xi (m - mu) / sigma >= 0`.
pub fn in_gev_support(m: f64, p: &GevParams) -> bool {
    p.xi.abs() < XI_ZERO || 1.0 + p.xi * (m - p.mu) / p.sigma >= 0.0
}

pub fn gev_cdf(m: f64, p: &GevParams) -> f64 {
    let z = (m - p.mu) / p.sigma;
    if p.xi.abs() < XI_ZERO {
        return (-(-z).exp()).exp();
    }
    let t = 1.0 + p.xi * z;
    if t <= 0.0 {
        // Below the lower edge for xi > 0, above the upper edge for xi < 0.
        return if p.xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-t.powf(-1.0 / p.xi)).exp()
}

pub fn gev_ccdf(m: f64, p: &GevParams) -> f64 {
    let z = (m - p.mu) / p.sigma;
    let u = if p.xi.abs() < XI_ZERO {
        (-z).exp()
    } else {
        let t = 1.0 + p.xi * z;
        if t <= 0.0 {
            return if p.xi > 0.0 { 1.0 } else { 0.0 };
        }
        t.powf(-1.0 / p.xi)
    };
    // 1 - exp(-u) without cancellation for small u.
    -(-u).exp_m1()
}

/// Inverse CDF, `u` in (0, 1).
pub fn gev_quantile(u: f64, p: &GevParams) -> f64 {
    let y = -u.ln();
    if p.xi.abs() < XI_ZERO {
        p.mu - p.sigma * y.ln()
    } else {
        p.mu + p.sigma * (y.powf(-p.xi) - 1.0) / p.xi
    }
}

/// Inverse CDF of the GPD excess, `u` in [0, 1).
pub fn gpd_quantile(u: f64, sigma_tilde: f64, xi: f64) -> f64 {
    if xi.abs() < XI_ZERO {
        -sigma_tilde * (-u).ln_1p()
    } else {
        sigma_tilde * ((1.0 - u).powf(-xi) - 1.0) / xi
    }
}

/// Mean and variance of the GEV.
pub fn gev_mean_var(p: &GevParams) -> Result<(f64, f64)> {
    if p.xi.abs() < XI_ZERO {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        return Ok((p.mu + p.sigma * EULER_GAMMA, pi2 * p.sigma * p.sigma / 6.0));
    }
    if p.xi >= 1.0 {
        return Err(Error::UndefinedMoment { order: 1, xi: p.xi });
    }
    if p.xi >= 0.5 {
        return Err(Error::UndefinedMoment { order: 2, xi: p.xi });
    }
    let g1 = gamma(1.0 - p.xi);
    let g2 = gamma(1.0 - 2.0 * p.xi);
    let mean = p.mu + p.sigma * (g1 - 1.0) / p.xi;
    let var = p.sigma * p.sigma * (g2 - g1 * g1) / (p.xi * p.xi);
    Ok((mean, var))
}
