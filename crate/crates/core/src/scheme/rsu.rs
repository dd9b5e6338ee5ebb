use super::{Allocation, PairView, PowerScheme, SchemeContext, SchemeState};
use crate::error::Result;
use crate::power::{waterfill, weight_rsu};
use crate::queueing::{network_max, update_virtual_global, Thresholds, VirtualQueues};

/// Roadside unit collects every queue, tracks the network maximum in two global
/// virtual queues and feeds them back to all pairs.
#[derive(Debug, Clone)]
pub struct RsuAided {
    vq: VirtualQueues,
    thresholds: Thresholds,
    v: f64,
    w: f64,
    t_c: f64,
}

impl RsuAided {
    pub const NAME: &'static str = "rsu";

    pub fn new(ctx: &SchemeContext) -> Result<Self> {
        Ok(Self {
            vq: VirtualQueues::default(),
            thresholds: ctx.thresholds,
            v: ctx.v,
            w: ctx.w_hz,
            t_c: ctx.t_c,
        })
    }
}

impl PowerScheme for RsuAided {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn allocate(&mut self, view: &PairView<'_>) -> Result<Allocation> {
        let j = weight_rsu(&self.vq, view.q, view.arrivals, self.w, self.t_c);
        let d = waterfill(j, self.v, view.gains, view.noise_plus_i, view.budget)?;
        Ok(Allocation {
            p: d.p,
            weight: j,
            rate_cap: None,
            indicator: None,
        })
    }

    fn end_slot(&mut self, _t: u64, q_next: &[f64]) -> Result<()> {
        let m = network_max(q_next)?;
        self.vq = update_virtual_global(self.vq, m, &self.thresholds);
        Ok(())
    }

    fn state(&self) -> SchemeState {
        SchemeState {
            global_vq: Some(self.vq),
            ..SchemeState::default()
        }
    }
}
