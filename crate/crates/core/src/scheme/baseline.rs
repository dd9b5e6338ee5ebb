use super::{Allocation, PairView, PowerScheme, SchemeContext, SchemeState};
use crate::baseline::BaselineModel;
use crate::error::Result;
use crate::power::min_power_for_rate;

/// Fixed target rate `R_c`: each pair spends the least power reaching it, or
/// the whole budget when the channel cannot support it. Service never exceeds `R_c`.
#[derive(Debug, Clone)]
pub struct BaselineConstantRate {
    r_c: f64,
    w: f64,
    model: Option<BaselineModel>,
}

impl BaselineConstantRate {
    pub const NAME: &'static str = "baseline";

    pub fn new(ctx: &SchemeContext) -> Result<Self> {
        let model = if ctx.r_c_bps > ctx.lambda_avg {
            Some(BaselineModel::new(ctx.r_c_bps, ctx.lambda_avg, ctx.p_busy)?)
        } else {
            log::warn!(
                "baseline rate {} b/s does not exceed the arrival rate {} b/s; no tail model",
                ctx.r_c_bps,
                ctx.lambda_avg
            );
            None
        };
        Ok(Self {
            r_c: ctx.r_c_bps,
            w: ctx.w_hz,
            model,
        })
    }
}

impl PowerScheme for BaselineConstantRate {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn allocate(&mut self, view: &PairView<'_>) -> Result<Allocation> {
        let d = min_power_for_rate(self.r_c, self.w, view.gains, view.noise_plus_i, view.budget)?;
        Ok(Allocation {
            p: d.p,
            weight: 0.0,
            rate_cap: Some(self.r_c),
            indicator: None,
        })
    }

    fn end_slot(&mut self, _t: u64, _q_next: &[f64]) -> Result<()> {
        Ok(())
    }

    fn state(&self) -> SchemeState {
        SchemeState {
            baseline: self.model,
            ..SchemeState::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::ctx;
    use super::*;

    #[test]
    fn caps_service_at_target() {
        let mut s = BaselineConstantRate::new(&ctx()).unwrap();
        let view = PairView {
            k: 0,
            q: 0.0,
            arrivals: 0.0,
            gains: &[1e-9, 1e-9],
            noise_plus_i: 1e-12,
            budget: 0.2,
        };
        let a = s.allocate(&view).unwrap();
        assert_eq!(a.rate_cap, Some(1e6));
        assert!(a.p.iter().sum::<f64>() < 0.2);
        assert!(s.state().baseline.is_some());
    }
}
