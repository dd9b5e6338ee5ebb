//! Path loss by Manhattan geometry class, Rayleigh block fading and link rates.

mod erfc;
mod rate;

pub use erfc::{erfc, inv_erfc};
pub use rate::{finite_blocklength_rate, shannon_rate, shannon_rate_sinr, FiniteBlocklength};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::{Axis, Point, RoadNetwork, VehiclePair};

/// Tolerance used to decide whether a coordinate lies on a lane.
const LANE_TOL: f64 = 1e-6;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub l0_db: f64,
    pub l0p_db: f64,
    pub alpha: f64,
    pub delta_m: f64,
    pub n0_dbm_hz: f64,
    pub w_hz: f64,
    /// Constant aggregate co-channel interference `I`.
    pub interference_dbm: f64,
    /// Block error probability; 0.5 gives the Shannon rate.
    pub eps: f64,
    /// Near-field clamp on path-loss distances.
    pub min_distance_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            l0_db: -68.5,
            l0p_db: -54.5,
            alpha: 1.61,
            delta_m: 15.0,
            n0_dbm_hz: -174.0,
            w_hz: 180e3,
            interference_dbm: -81.0,
            eps: 0.5,
            min_distance_m: 1.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_hz > 0.0) {
            return Err(Error::config("channel.w_hz", "must be positive"));
        }
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::config("channel.eps", "must lie in (0, 0.5]"));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::config("channel.min_distance_m", "must be positive"));
        }
        if !self.interference_dbm.is_finite() || !self.n0_dbm_hz.is_finite() {
            return Err(Error::config("channel.interference_dbm", "must be finite"));
        }
        self.path_loss_params().map(|_| ())
    }

    pub fn path_loss_params(&self) -> Result<PathLossParams> {
        PathLossParams::new(
            db_to_linear(self.l0_db),
            db_to_linear(self.l0p_db),
            self.alpha,
            self.delta_m,
            self.min_distance_m,
        )
    }

    /// `N0 W` in watts.
    pub fn noise_floor(&self) -> f64 {
        dbm_to_watts(self.n0_dbm_hz) * self.w_hz
    }

    pub fn interference(&self) -> f64 {
        dbm_to_watts(self.interference_dbm)
    }

    /// Blocklength per RB tied to the coherence time: `round(W T_c)`.
    pub fn blocklength(&self, t_c: f64) -> f64 {
        (self.w_hz * t_c).round().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathLossParams {
    pub l0: f64,
    pub l0_prime: f64,
    pub alpha: f64,
    pub delta_intersection: f64,
    pub min_distance: f64,
}

impl PathLossParams {
    pub fn new(l0: f64, l0_prime: f64, alpha: f64, delta: f64, min_distance: f64) -> Result<Self> {
        if !(l0 > 0.0 && l0_prime > 0.0) {
            return Err(Error::config(
                "channel.l0_db",
                "path-loss constants must be positive",
            ));
        }
        if !(alpha > 0.0) {
            return Err(Error::config("channel.alpha", "must be positive"));
        }
        if !(delta > 0.0) {
            return Err(Error::config("channel.delta_m", "must be positive"));
        }
        if !(l0_prime < l0 * (delta / 2.0).powf(alpha)) {
            return Err(Error::config(
                "channel.l0p_db",
                "NLOS constant must satisfy l0' < l0 (delta/2)^alpha",
            ));
        }
        Ok(Self {
            l0,
            l0_prime,
            alpha,
            delta_intersection: delta,
            min_distance,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    SameLane,
    WeakLineOfSight,
    NonLineOfSight,
    NoPropagation,
}

/// Geometry class of the link between two on-lane points.
pub fn classify(tx: Point, rx: Point, network: &RoadNetwork, delta: f64) -> LinkClass {
    let tx_lanes = network.lanes_through(tx, LANE_TOL);
    let rx_lanes = network.lanes_through(rx, LANE_TOL);
    if tx_lanes.iter().any(|l| rx_lanes.contains(l)) {
        return LinkClass::SameLane;
    }
    for &(ta, tc) in &tx_lanes {
        for &(ra, rc) in &rx_lanes {
            if ra != ta.perpendicular() {
                continue;
            }
            let crossing = match ta {
                Axis::Horizontal => Point::new(rc, tc),
                Axis::Vertical => Point::new(tc, rc),
            };
            if tx.distance(&crossing) <= delta || rx.distance(&crossing) <= delta {
                return LinkClass::WeakLineOfSight;
            }
        }
    }
    let perpendicular = tx_lanes
        .iter()
        .any(|&(ta, _)| rx_lanes.iter().any(|&(ra, _)| ra == ta.perpendicular()));
    if perpendicular {
        LinkClass::NonLineOfSight
    } else {
        LinkClass::NoPropagation
    }
}

/// Linear path-loss gain between transmitter and receiver coordinates.
pub fn path_loss(tx: Point, rx: Point, network: &RoadNetwork, params: &PathLossParams) -> f64 {
    let dx = (tx.x - rx.x).abs();
    let dy = (tx.y - rx.y).abs();
    match classify(tx, rx, network, params.delta_intersection) {
        LinkClass::SameLane => {
            params.l0
                * tx.distance(&rx)
                    .max(params.min_distance)
                    .powf(-params.alpha)
        }
        LinkClass::WeakLineOfSight => {
            params.l0 * (dx + dy).max(params.min_distance).powf(-params.alpha)
        }
        LinkClass::NonLineOfSight => {
            let floor = params.min_distance * params.min_distance;
            params.l0_prime * (dx * dy).max(floor).powf(-params.alpha)
        }
        LinkClass::NoPropagation => 0.0,
    }
}

/// Channel gains for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub n_rb: usize,
    /// `direct[k][n]`: gain from transmitter `k` to its own receiver on RB `n`.
    pub direct: Vec<Vec<f64>>,
    /// `cross[k'][k][n]`: gain from transmitter `k'` to receiver `k`; the
    /// diagonal equals `direct`. Only populated by [`sample_link_gains`].
    pub cross: Option<Vec<Vec<Vec<f64>>>>,
    pub noise_floor: f64,
    pub interference_const: f64,
}

impl LinkState {
    /// Aggregate interference at receiver `k` per RB under the given powers.
    pub fn interference_at(&self, k: usize, powers: &[Vec<f64>]) -> Option<Vec<f64>> {
        let cross = self.cross.as_ref()?;
        let mut out = vec![0.0; self.n_rb];
        for (kp, p) in powers.iter().enumerate() {
            if kp == k {
                continue;
            }
            for n in 0..self.n_rb {
                out[n] += p[n] * cross[kp][k][n];
            }
        }
        Some(out)
    }
}

/// Full interferer-to-receiver gain tensor with i.i.d. unit-mean exponential
/// (Rayleigh power) fading per link, RB and slot.
pub fn sample_link_gains<R: Rng + ?Sized>(
    pairs: &[VehiclePair],
    network: &RoadNetwork,
    params: &PathLossParams,
    n_rb: usize,
    noise_floor: f64,
    interference_const: f64,
    rng: &mut R,
) -> LinkState {
    let cross: Vec<Vec<Vec<f64>>> = pairs
        .iter()
        .map(|from| {
            pairs
                .iter()
                .map(|to| {
                    let pl = path_loss(from.tx, to.rx, network, params);
                    (0..n_rb)
                        .map(|_| pl * <Exp1 as Distribution<f64>>::sample(&Exp1, rng))
                        .collect::<Vec<f64>>()
                })
                .collect()
        })
        .collect();
    let direct = (0..pairs.len()).map(|k| cross[k][k].clone()).collect();
    LinkState {
        n_rb,
        direct,
        cross: Some(cross),
        noise_floor,
        interference_const,
    }
}

/// Direct-link gains only, which is all the constant-interference rate model needs.
/// Draws exactly `K * n_rb` fading samples in pair-major order.
pub fn sample_direct_gains<R: Rng + ?Sized>(
    pairs: &[VehiclePair],
    network: &RoadNetwork,
    params: &PathLossParams,
    n_rb: usize,
    noise_floor: f64,
    interference_const: f64,
    rng: &mut R,
) -> LinkState {
    let direct = pairs
        .iter()
        .map(|p| {
            let pl = path_loss(p.tx, p.rx, network, params);
            (0..n_rb)
                .map(|_| pl * <Exp1 as Distribution<f64>>::sample(&Exp1, rng))
                .collect()
        })
        .collect();
    LinkState {
        n_rb,
        direct,
        cross: None,
        noise_floor,
        interference_const,
    }
}
