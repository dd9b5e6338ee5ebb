//! Power-allocation schemes behind a common trait, constructed by name.
//!
//! Each slot the engine calls [`PowerScheme::allocate`] once per pair with a
//! [`PairView`] holding only that pair's own state, then
//! [`PowerScheme::end_slot`] with the updated queues.

mod baseline;
mod evt;
mod rsu;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::baseline::BaselineModel;
use crate::error::{Error, Result};
use crate::evt::{EvtConfig, GevParams};
use crate::queueing::{Thresholds, VirtualQueues};

pub use self::baseline::BaselineConstantRate;
pub use self::evt::EvtDistributed;
pub use self::rsu::RsuAided;

/// Everything a scheme constructor may read.
#[derive(Debug, Clone)]
pub struct SchemeContext {
    pub k: usize,
    pub w_hz: f64,
    pub t_c: f64,
    pub v: f64,
    pub thresholds: Thresholds,
    pub evt: EvtConfig,
    pub lambda_avg: f64,
    pub r_c_bps: f64,
    pub p_busy: Option<f64>,
}

/// What a single pair knows when it picks its powers.
#[derive(Debug, Clone, Copy)]
pub struct PairView<'a> {
    pub k: usize,
    pub q: f64,
    /// Arrivals this slot, bits.
    pub arrivals: f64,
    /// Gains on the pair's own RBs.
    pub gains: &'a [f64],
    /// `N0 W + I`, watts.
    pub noise_plus_i: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Watts per RB, aligned with `PairView::gains`.
    pub p: Vec<f64>,
    pub weight: f64,
    /// Upper bound on the service rate, bits/s.
    pub rate_cap: Option<f64>,
    /// `Some(false)` when a GEV-support indicator switched the tail terms off.
    pub indicator: Option<bool>,
}

/// Scheme-internal state exposed for reporting.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SchemeState {
    pub global_vq: Option<VirtualQueues>,
    pub local_vq: Vec<VirtualQueues>,
    pub gev: Vec<Option<GevParams>>,
    pub baseline: Option<BaselineModel>,
}

pub trait PowerScheme: Send {
    fn name(&self) -> &'static str;

    /// Powers for one pair from its local view.
    fn allocate(&mut self, view: &PairView<'_>) -> Result<Allocation>;

    /// Queue lengths after service and arrivals, indexed by pair.
    fn end_slot(&mut self, t: u64, q_next: &[f64]) -> Result<()>;

    fn state(&self) -> SchemeState {
        SchemeState::default()
    }
}

pub type SchemeCtor = fn(&SchemeContext) -> Result<Box<dyn PowerScheme>>;

/// Name-to-constructor table.
#[derive(Clone)]
pub struct SchemeRegistry {
    entries: BTreeMap<String, SchemeCtor>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(RsuAided::NAME, |ctx| Ok(Box::new(RsuAided::new(ctx)?)));
        r.register(EvtDistributed::NAME, |ctx| {
            Ok(Box::new(EvtDistributed::new(ctx)?))
        });
        r.register(BaselineConstantRate::NAME, |ctx| {
            Ok(Box::new(BaselineConstantRate::new(ctx)?))
        });
        r
    }

    pub fn register(&mut self, name: &str, ctor: SchemeCtor) {
        self.entries.insert(name.to_owned(), ctor);
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn create(&self, name: &str, ctx: &SchemeContext) -> Result<Box<dyn PowerScheme>> {
        let ctor = self
            .entries
            .get(name)
            .ok_or_else(|| Error::UnknownScheme(name.to_owned(), self.names().join(", ")))?;
        ctor(ctx)
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl std::fmt::Debug for SchemeRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}
