use super::{Allocation, PairView, PowerScheme, SchemeContext, SchemeState};
use crate::error::{Error, Result};
use crate::evt::{estimate_gev, in_gev_support, EvtConfig, GevParams, QueueHistory};
use crate::power::{waterfill, weight_evt};
use crate::queueing::{update_virtual_local, Thresholds, VirtualQueues};

/// Per-pair state; nothing here is shared between pairs.
#[derive(Debug, Clone)]
struct LocalState {
    vq: VirtualQueues,
    history: QueueHistory,
    gev: Option<GevParams>,
}

/// Each pair estimates the GEV law of the network maximum from its own queue
/// history and keeps local virtual queues gated by the estimated support.
#[derive(Debug, Clone)]
pub struct EvtDistributed {
    local: Vec<LocalState>,
    thresholds: Thresholds,
    cfg: EvtConfig,
    k: usize,
    v: f64,
    w: f64,
    t_c: f64,
}

impl EvtDistributed {
    pub const NAME: &'static str = "evt";

    pub fn new(ctx: &SchemeContext) -> Result<Self> {
        ctx.evt.validate()?;
        let local = (0..ctx.k)
            .map(|_| LocalState {
                vq: VirtualQueues::default(),
                history: QueueHistory::new(ctx.evt.window),
                gev: None,
            })
            .collect();
        Ok(Self {
            local,
            thresholds: ctx.thresholds,
            cfg: ctx.evt,
            k: ctx.k,
            v: ctx.v,
            w: ctx.w_hz,
            t_c: ctx.t_c,
        })
    }

    fn refresh(&mut self, k: usize) -> Result<()> {
        let s = &mut self.local[k];
        s.gev = match estimate_gev(
            &s.history,
            self.cfg.psi,
            self.k.max(2),
            self.cfg.min_exceedances,
        ) {
            Ok(fit) => Some(fit.gev),
            Err(Error::EstimateUnavailable { .. } | Error::DegenerateSample(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(())
    }
}

impl PowerScheme for EvtDistributed {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn allocate(&mut self, view: &PairView<'_>) -> Result<Allocation> {
        let s = &self.local[view.k];
        let gev = s.gev.as_ref();
        let j = weight_evt(&s.vq, view.q, view.arrivals, gev, self.w, self.t_c);
        let indicator = gev.is_none_or(|g| in_gev_support(view.q + view.arrivals, g));
        let d = waterfill(j, self.v, view.gains, view.noise_plus_i, view.budget)?;
        Ok(Allocation {
            p: d.p,
            weight: j,
            rate_cap: None,
            indicator: Some(indicator),
        })
    }

    fn end_slot(&mut self, t: u64, q_next: &[f64]) -> Result<()> {
        let due = (t + 1).is_multiple_of(self.cfg.recompute_period);
        for (k, &q) in q_next.iter().enumerate() {
            let s = &mut self.local[k];
            s.vq = update_virtual_local(s.vq, q, s.gev.as_ref(), &self.thresholds);
            s.history.push(q);
            if due {
                self.refresh(k)?;
            }
        }
        Ok(())
    }

    fn state(&self) -> SchemeState {
        SchemeState {
            local_vq: self.local.iter().map(|s| s.vq).collect(),
            gev: self.local.iter().map(|s| s.gev).collect(),
            ..SchemeState::default()
        }
    }
}
