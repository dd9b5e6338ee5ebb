use std::f64::consts::LN_2;

use super::erfc::inv_erfc;
use crate::error::{Error, Result};

/// Sum over RBs of `W log2(1 + P h / (N0 W + I))`, in bits/s.
pub fn shannon_rate(
    powers: &[f64],
    gains: &[f64],
    noise_floor: f64,
    interference_const: f64,
    bandwidth_w: f64,
) -> f64 {
    let denom = noise_floor + interference_const;
    powers
        .iter()
        .zip(gains)
        .map(|(&p, &h)| bandwidth_w * (p * h / denom).ln_1p() / LN_2)
        .sum()
}

/// Exact-SINR variant: `interference[n]` is the aggregate co-channel power on RB `n`.
pub fn shannon_rate_sinr(
    powers: &[f64],
    gains: &[f64],
    noise_floor: f64,
    interference: &[f64],
    bandwidth_w: f64,
) -> f64 {
    powers
        .iter()
        .zip(gains)
        .zip(interference)
        .map(|((&p, &h), &i)| bandwidth_w * (p * h / (noise_floor + i)).ln_1p() / LN_2)
        .sum()
}

/// Normal-approximation rate at blocklength `l` and block error probability `eps`,
/// in bits/s/Hz, floored at zero.
pub fn finite_blocklength_rate(gamma: f64, l: f64, eps: f64) -> Result<f64> {
    Ok(FiniteBlocklength::new(l, eps)?.spectral_efficiency(gamma))
}

/// Per-link rate model with the dispersion coefficient precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteBlocklength {
    pub blocklength: f64,
    pub eps: f64,
    /// `erfc^-1(2 eps) / (sqrt(L) ln 2)`; zero at `eps = 0.5`.
    coeff: f64,
}

impl FiniteBlocklength {
    pub fn new(blocklength: f64, eps: f64) -> Result<Self> {
        if !(blocklength >= 1.0) {
            return Err(Error::domain(
                "finite_blocklength_rate",
                format!("blocklength {blocklength} < 1"),
            ));
        }
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::domain(
                "finite_blocklength_rate",
                format!("error probability {eps} outside (0, 0.5]"),
            ));
        }
        let coeff = inv_erfc(2.0 * eps)? / (blocklength.sqrt() * LN_2);
        Ok(Self {
            blocklength,
            eps,
            coeff,
        })
    }

    pub fn is_shannon(&self) -> bool {
        self.coeff == 0.0
    }

    pub fn spectral_efficiency(&self, gamma: f64) -> f64 {
        if !(gamma > 0.0) {
            return 0.0;
        }
        let capacity = gamma.ln_1p() / LN_2;
        if self.coeff == 0.0 {
            return capacity;
        }
        let dispersion = (2.0 * gamma * (gamma + 2.0)).sqrt() / (1.0 + gamma);
        (capacity - dispersion * self.coeff).max(0.0)
    }

    /// Sum-rate over RBs in bits/s.
    pub fn rate(
        &self,
        powers: &[f64],
        gains: &[f64],
        noise_floor: f64,
        interference_const: f64,
        bandwidth_w: f64,
    ) -> f64 {
        let denom = noise_floor + interference_const;
        powers
            .iter()
            .zip(gains)
            .map(|(&p, &h)| bandwidth_w * self.spectral_efficiency(p * h / denom))
            .sum()
    }
}
