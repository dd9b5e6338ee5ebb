//! Experiment configuration: module sections, run length, scheme and sweeps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineConfig;
use crate::channel::ChannelConfig;
use crate::clustering::ClusteringConfig;
use crate::error::{Error, Result};
use crate::evt::EvtConfig;
use crate::mobility::MobilityConfig;
use crate::power::PowerConfig;
use crate::queueing::QueueingConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scheme: String,
    /// Measurement slots.
    pub slots: u64,
    /// Slots simulated before statistics start.
    pub warmup: u64,
    /// Slot length (coherence time), seconds.
    pub t_c_s: f64,
    pub mobility: MobilityConfig,
    pub channel: ChannelConfig,
    pub clustering: ClusteringConfig,
    pub queueing: QueueingConfig,
    pub evt: EvtConfig,
    pub power: PowerConfig,
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scheme: "rsu".to_owned(),
            slots: 20_000,
            warmup: 2_000,
            t_c_s: 3e-3,
            mobility: MobilityConfig::default(),
            channel: ChannelConfig::default(),
            clustering: ClusteringConfig::default(),
            queueing: QueueingConfig::default(),
            evt: EvtConfig::default(),
            power: PowerConfig::default(),
            baseline: BaselineConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Lists of values to sweep; the run grid is their Cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub v: Option<Vec<f64>>,
    pub k: Option<Vec<usize>>,
    /// Blocklengths; each sets the slot length to `L / W`.
    pub l: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    /// Pair distances, meters.
    pub distance: Option<Vec<f64>>,
    pub scheme: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Emit the throughput-ratio table relative to `eps = 0.5`.
    pub ratio_table: bool,
    /// Number of points in each CCDF file.
    pub ccdf_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            ratio_table: false,
            ccdf_points: 200,
        }
    }
}

/// One sweep coordinate assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub v: Option<f64>,
    pub k: Option<usize>,
    pub l: Option<f64>,
    pub eps: Option<f64>,
    pub distance: Option<f64>,
    pub scheme: Option<String>,
}

impl SweepPoint {
    /// Every point keeps the base seed, so points see common random numbers.
    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut c = base.clone();
        if let Some(v) = self.v {
            c.power.v = v;
        }
        if let Some(k) = self.k {
            c.mobility.k = k;
        }
        if let Some(l) = self.l {
            c.t_c_s = l / c.channel.w_hz;
        }
        if let Some(eps) = self.eps {
            c.channel.eps = eps;
        }
        if let Some(d) = self.distance {
            c.mobility.pair_distance_m = d;
        }
        if let Some(s) = &self.scheme {
            c.scheme = s.clone();
        }
        c.sweep = SweepConfig::default();
        c
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("sweep.v", self.v.as_ref().map(Vec::len)),
            ("sweep.k", self.k.as_ref().map(Vec::len)),
            ("sweep.l", self.l.as_ref().map(Vec::len)),
            ("sweep.eps", self.eps.as_ref().map(Vec::len)),
            ("sweep.distance", self.distance.as_ref().map(Vec::len)),
            ("sweep.scheme", self.scheme.as_ref().map(Vec::len)),
        ];
        for (field, len) in empty {
            if len == Some(0) {
                return Err(Error::config(
                    field,
                    "sweep list must be nonempty when given",
                ));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.points().len() == 1
    }

    /// Cartesian product in the order scheme, distance, k, l, eps, v (v fastest).
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Clone>(xs: &Option<Vec<T>>) -> Vec<Option<T>> {
            match xs {
                Some(v) if !v.is_empty() => v.iter().cloned().map(Some).collect(),
                _ => vec![None],
            }
        }
        let mut out = Vec::new();
        for scheme in axis(&self.scheme) {
            for distance in axis(&self.distance) {
                for k in axis(&self.k) {
                    for l in axis(&self.l) {
                        for eps in axis(&self.eps) {
                            for v in axis(&self.v) {
                                out.push(SweepPoint {
                                    index: out.len(),
                                    v,
                                    k,
                                    l,
                                    eps,
                                    distance,
                                    scheme: scheme.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Sets one list from `KEY=v1,v2,...`.
    pub fn set_from_str(&mut self, spec: &str) -> Result<()> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("sweep `{spec}` is not KEY=v1,v2,...")))?;
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(Error::Parse(format!("sweep `{key}` has no values")));
        }
        let floats = || -> Result<Vec<f64>> {
            items
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("sweep {key}: `{s}`: {e}")))
                })
                .collect()
        };
        match key.trim() {
            "v" => self.v = Some(floats()?),
            "l" => self.l = Some(floats()?),
            "eps" => self.eps = Some(floats()?),
            "distance" => self.distance = Some(floats()?),
            "k" => {
                self.k = Some(
                    items
                        .iter()
                        .map(|s| {
                            s.parse::<usize>()
                                .map_err(|e| Error::Parse(format!("sweep k: `{s}`: {e}")))
                        })
                        .collect::<Result<_>>()?,
                )
            }
            "scheme" => self.scheme = Some(items.iter().map(|s| s.to_string()).collect()),
            other => {
                return Err(Error::Parse(format!(
                    "unknown sweep key `{other}` (expected v, k, l, eps, distance, scheme)"
                )))
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scheme.trim().is_empty() {
            return Err(Error::config("scheme", "must name a scheme"));
        }
        if !(self.t_c_s > 0.0) || !self.t_c_s.is_finite() {
            return Err(Error::config("t_c_s", "must be positive"));
        }
        if self.output.ccdf_points < 2 {
            return Err(Error::config("output.ccdf_points", "need at least 2"));
        }
        self.mobility.validate()?;
        self.channel.validate()?;
        self.clustering.validate()?;
        self.queueing.validate()?;
        self.evt.validate()?;
        self.power.validate()?;
        self.baseline.validate()?;
        self.sweep.validate()?;
        for p in self.sweep.points() {
            let c = p.apply(self);
            c.mobility.validate()?;
            c.channel.validate()?;
            c.power.validate()?;
            if !(c.t_c_s > 0.0) {
                return Err(Error::config("sweep.l", "blocklength must be positive"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Blocklength per RB implied by the slot length.
    pub fn blocklength(&self) -> f64 {
        self.channel.blocklength(self.t_c_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.mobility.k, 80);
        assert_eq!(c.power.n_rb, 20);
        assert_eq!(c.clustering.t0, 100);
        assert_eq!(c.queueing.m_th_bits, 225e3);
        assert_eq!(c.blocklength(), 540.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml_str("foo = 1")
            .unwrap_err()
            .to_string();
        assert!(err.contains("foo"), "{err}");
        let err = ExperimentConfig::from_toml_str("[power]\nbar = 2")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bar"), "{err}");
    }

    #[test]
    fn zero_pairs_rejected() {
        let err = ExperimentConfig::from_toml_str("[mobility]\nk = 0").unwrap_err();
        assert!(
            matches!(
                err,
                Error::InvalidConfig {
                    field: "mobility.k",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.sweep.v = Some(vec![0.0, 1e4]);
        c.queueing.delta = Some(1e-5);
        c.queueing.kappa = Some(370e3);
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn sweep_grid() {
        let mut s = SweepConfig::default();
        assert!(s.is_empty());
        s.set_from_str("v=0,1e4").unwrap();
        s.set_from_str("k=20,80").unwrap();
        let pts = s.points();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].k, pts[1].v), (Some(20), Some(1e4)));
        let c = pts[3].apply(&ExperimentConfig::default());
        assert_eq!((c.mobility.k, c.power.v, c.seed), (80, 1e4, 1));
        assert!(s.set_from_str("w=1").is_err());
        assert!(s.set_from_str("v=").is_err());
    }

    #[test]
    fn blocklength_sweep_sets_slot_length() {
        let p = SweepPoint {
            l: Some(300.0),
            ..Default::default()
        };
        let c = p.apply(&ExperimentConfig::default());
        assert!((c.t_c_s - 300.0 / 180e3).abs() < 1e-15);
        assert_eq!(c.blocklength(), 300.0);
    }
}
