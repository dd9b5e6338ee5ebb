//! Traffic arrivals, data queues and the virtual queues that enforce the
//! time-average mean and second-moment constraints on the maximal queue.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{in_gev_support, GevParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueueingConfig {
    pub lambda_avg_bps: f64,
    pub m_th_bits: f64,
    pub b_th_bits2: f64,
    /// Risk sensitivity; with `kappa` it overrides `b_th_bits2`.
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
}

impl Default for QueueingConfig {
    fn default() -> Self {
        Self {
            lambda_avg_bps: 0.5e6,
            m_th_bits: 225e3,
            b_th_bits2: 2.9e10,
            delta: None,
            kappa: None,
        }
    }
}

impl QueueingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_avg_bps >= 0.0) {
            return Err(Error::config(
                "queueing.lambda_avg_bps",
                "must be nonnegative",
            ));
        }
        if !(self.m_th_bits > 0.0) {
            return Err(Error::config("queueing.m_th_bits", "must be positive"));
        }
        if !(self.b_th_bits2 > 0.0) {
            return Err(Error::config("queueing.b_th_bits2", "must be positive"));
        }
        if self.delta.is_some() != self.kappa.is_some() {
            return Err(Error::config(
                "queueing.delta",
                "delta and kappa must be given together",
            ));
        }
        self.thresholds().map(|_| ())
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        let b_th = match (self.delta, self.kappa) {
            (Some(delta), Some(kappa)) => risk_to_thresholds(delta, kappa, self.m_th_bits)?,
            _ => self.b_th_bits2,
        };
        Ok(Thresholds {
            m_th: self.m_th_bits,
            b_th,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Bound on the time-average maximal queue, bits.
    pub m_th: f64,
    /// Bound on its time-average square, bits^2.
    pub b_th: f64,
}

/// Second-moment budget implied by an entropic-risk threshold `kappa` at small
/// sensitivity `delta`: `B_th = 2 (kappa - M_th) / delta`.
pub fn risk_to_thresholds(delta: f64, kappa: f64, m_th: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::config(
            "queueing.delta",
            "risk sensitivity must be positive",
        ));
    }
    if !(kappa > m_th) {
        return Err(Error::config(
            "queueing.kappa",
            "risk threshold must exceed m_th_bits",
        ));
    }
    Ok(2.0 * (kappa - m_th) / delta)
}

/// Poisson arrivals of unit-bit packets, mean `lambda_avg * t_c` bits per slot.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    mean: f64,
    dist: Option<Poisson<f64>>,
}

impl ArrivalProcess {
    pub fn new(lambda_avg: f64, t_c: f64) -> Result<Self> {
        let mean = lambda_avg * t_c;
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::config(
                "queueing.lambda_avg_bps",
                "arrival mean must be finite and >= 0",
            ));
        }
        let dist = if mean > 0.0 {
            Some(
                Poisson::new(mean)
                    .map_err(|e| Error::config("queueing.lambda_avg_bps", e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self { mean, dist })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.as_ref().map_or(0.0, |d| d.sample(rng))
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for a in out {
            *a = self.sample(rng);
        }
    }
}

/// Independent per-pair arrivals for one slot.
pub fn sample_arrivals<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    lambda_avg: f64,
    t_c: f64,
) -> Result<Vec<f64>> {
    let proc = ArrivalProcess::new(lambda_avg, t_c)?;
    let mut out = vec![0.0; k];
    proc.sample_into(rng, &mut out);
    Ok(out)
}

/// `max(q + arrivals - t_c * rate, 0)`.
pub fn update_queue(q: f64, arrivals: f64, rate_bps: f64, t_c: f64) -> f64 {
    (q + arrivals - t_c * rate_bps).max(0.0)
}

pub fn network_max(q: &[f64]) -> Result<f64> {
    q.iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::Empty("network_max"))
}

/// A pair of virtual queues tracking the mean and squared-maximum constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct VirtualQueues {
    /// Backlog against `M_th`, bits.
    pub q_m: f64,
    /// Backlog against `B_th`, bits^2.
    pub q_b: f64,
}

/// RSU-side update from the next-slot network maximum.
pub fn update_virtual_global(vq: VirtualQueues, m_next: f64, th: &Thresholds) -> VirtualQueues {
    VirtualQueues {
        q_m: (vq.q_m + m_next - th.m_th).max(0.0),
        q_b: (vq.q_b + m_next * m_next - th.b_th).max(0.0),
    }
}

/// Pair-local update: increments count only while `q_next` lies in the support
/// of the estimated maximal-queue GEV. Without an estimate the increment applies.
pub fn update_virtual_local(
    vq: VirtualQueues,
    q_next: f64,
    gev: Option<&GevParams>,
    th: &Thresholds,
) -> VirtualQueues {
    let on = gev.is_none_or(|g| in_gev_support(q_next, g));
    let mask = if on { 1.0 } else { 0.0 };
    VirtualQueues {
        q_m: (vq.q_m + (q_next - th.m_th) * mask).max(0.0),
        q_b: (vq.q_b + (q_next * q_next - th.b_th) * mask).max(0.0),
    }
}
