//! Slotted simulation driver.
//!
//! Every slot runs, in order: re-clustering (every `T0` slots), mobility,
//! fading, arrivals, per-pair power decisions by the active scheme, service and
//! queue update, scheme bookkeeping (virtual queues, estimators), metrics.
//! Mobility, fading, arrivals and clustering draw from separate random streams,
//! so two schemes run with the same seed see the same positions, channels and
//! traffic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baseline::{baseline_max_stats, BaselineModel};
use crate::channel::{sample_direct_gains, FiniteBlocklength, PathLossParams};
use crate::clustering::{cluster_pairs, GroupAssignment};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::evt::{estimate_gev, gev_cdf, gev_mean_var, GevFit, GevParams, QueueHistory};
use crate::mobility::{init_topology, step_positions, RoadNetwork, VehiclePair};
use crate::queueing::{network_max, update_queue, ArrivalProcess, VirtualQueues};
use crate::scheme::{
    BaselineConstantRate, PairView, PowerScheme, SchemeContext, SchemeRegistry, SchemeState,
};
use crate::stats::{ks_distance, RunningMoments};

const STREAM_MOBILITY: u64 = 1;
const STREAM_FADING: u64 = 2;
const STREAM_ARRIVALS: u64 = 3;
const STREAM_CLUSTERING: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-slot record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotMetrics {
    pub t: u64,
    /// Sum of transmit powers over pairs and RBs, watts.
    pub total_power_w: f64,
    /// Rate each pair transmits at, bits/s.
    pub rates_bps: Vec<f64>,
    /// Bits actually drained from each queue.
    pub served_bits: Vec<f64>,
    /// Network-wide maximal queue after the update, bits.
    pub max_queue: f64,
    pub total_queue: f64,
    /// Pairs whose GEV-support indicator switched the tail terms off.
    pub indicator_off: usize,
    /// Pairs whose scheme reports an indicator at all.
    pub indicator_pairs: usize,
    pub global_vq: Option<VirtualQueues>,
}

pub struct Simulation {
    cfg: ExperimentConfig,
    network: RoadNetwork,
    pairs: Vec<VehiclePair>,
    assignment: Option<GroupAssignment>,
    scheme: Box<dyn PowerScheme>,
    q: Vec<f64>,
    t: u64,
    rng_mobility: ChaCha8Rng,
    rng_fading: ChaCha8Rng,
    rng_arrivals: ChaCha8Rng,
    rng_clustering: ChaCha8Rng,
    arrivals: ArrivalProcess,
    rate_model: FiniteBlocklength,
    path_loss: PathLossParams,
    noise_floor: f64,
    interference: f64,
    budget: f64,
}

pub fn scheme_context(cfg: &ExperimentConfig) -> Result<SchemeContext> {
    Ok(SchemeContext {
        k: cfg.mobility.k,
        w_hz: cfg.channel.w_hz,
        t_c: cfg.t_c_s,
        v: cfg.power.v,
        thresholds: cfg.queueing.thresholds()?,
        evt: cfg.evt,
        lambda_avg: cfg.queueing.lambda_avg_bps,
        r_c_bps: cfg.baseline.r_c_bps,
        p_busy: cfg.baseline.p_busy,
    })
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, registry: &SchemeRegistry) -> Result<Self> {
        cfg.validate()?;
        let scheme = registry.create(&cfg.scheme, &scheme_context(cfg)?)?;
        let mut rng_mobility = stream(cfg.seed, STREAM_MOBILITY);
        let (network, pairs) = init_topology(&cfg.mobility, &mut rng_mobility)?;
        Ok(Self {
            network,
            q: vec![0.0; pairs.len()],
            pairs,
            assignment: None,
            scheme,
            t: 0,
            rng_mobility,
            rng_fading: stream(cfg.seed, STREAM_FADING),
            rng_arrivals: stream(cfg.seed, STREAM_ARRIVALS),
            rng_clustering: stream(cfg.seed, STREAM_CLUSTERING),
            arrivals: ArrivalProcess::new(cfg.queueing.lambda_avg_bps, cfg.t_c_s)?,
            rate_model: FiniteBlocklength::new(cfg.blocklength(), cfg.channel.eps)?,
            path_loss: cfg.channel.path_loss_params()?,
            noise_floor: cfg.channel.noise_floor(),
            interference: cfg.channel.interference(),
            budget: cfg.power.budget_w(),
            cfg: cfg.clone(),
        })
    }

    pub fn queues(&self) -> &[f64] {
        &self.q
    }

    pub fn pairs(&self) -> &[VehiclePair] {
        &self.pairs
    }

    pub fn assignment(&self) -> Option<&GroupAssignment> {
        self.assignment.as_ref()
    }

    pub fn scheme_state(&self) -> SchemeState {
        self.scheme.state()
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self) -> Result<SlotMetrics> {
        let cfg = &self.cfg;
        let n_rb = cfg.power.n_rb;
        let k = self.pairs.len();

        if self.t.is_multiple_of(cfg.clustering.t0 as u64) || self.assignment.is_none() {
            self.assignment = Some(cluster_pairs(
                &self.pairs,
                &cfg.clustering,
                n_rb,
                &mut self.rng_clustering,
            )?);
        }
        let assignment = self.assignment.as_ref().expect("assigned above");

        step_positions(
            &mut self.pairs,
            &self.network,
            cfg.t_c_s,
            &mut self.rng_mobility,
        );

        let links = sample_direct_gains(
            &self.pairs,
            &self.network,
            &self.path_loss,
            n_rb,
            self.noise_floor,
            self.interference,
            &mut self.rng_fading,
        );

        let mut arrivals = vec![0.0; k];
        self.arrivals
            .sample_into(&mut self.rng_arrivals, &mut arrivals);

        let noise_plus_i = self.noise_floor + self.interference;
        let mut total_power = 0.0;
        let mut rates = vec![0.0; k];
        let mut served = vec![0.0; k];
        let mut q_next = vec![0.0; k];
        let (mut indicator_off, mut indicator_pairs) = (0, 0);
        for kk in 0..k {
            let rbs = &assignment.rb_sets[kk];
            let gains: Vec<f64> = rbs.iter().map(|&n| links.direct[kk][n]).collect();
            let view = PairView {
                k: kk,
                q: self.q[kk],
                arrivals: arrivals[kk],
                gains: &gains,
                noise_plus_i,
                budget: self.budget,
            };
            let alloc = self.scheme.allocate(&view)?;
            match alloc.indicator {
                Some(false) => {
                    indicator_off += 1;
                    indicator_pairs += 1;
                }
                Some(true) => indicator_pairs += 1,
                None => {}
            }
            let p_sum: f64 = alloc.p.iter().sum();
            total_power += p_sum;
            let mut r = self.rate_model.rate(
                &alloc.p,
                &gains,
                self.noise_floor,
                self.interference,
                cfg.channel.w_hz,
            );
            if let Some(cap) = alloc.rate_cap {
                r = r.min(cap);
            }
            rates[kk] = r;
            q_next[kk] = update_queue(self.q[kk], arrivals[kk], r, cfg.t_c_s);
            served[kk] = self.q[kk] + arrivals[kk] - q_next[kk];
        }

        self.scheme.end_slot(self.t, &q_next)?;
        let max_queue = network_max(&q_next)?;
        let total_queue = q_next.iter().sum();
        self.q = q_next;
        let metrics = SlotMetrics {
            t: self.t,
            total_power_w: total_power,
            rates_bps: rates,
            served_bits: served,
            max_queue,
            total_queue,
            indicator_off,
            indicator_pairs,
            global_vq: self.scheme.state().global_vq,
        };
        self.t += 1;
        Ok(metrics)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scheme: String,
    pub seed: u64,
    pub k: usize,
    pub v: f64,
    pub n_rb: usize,
    pub t_c_s: f64,
    pub blocklength: f64,
    pub eps: f64,
    pub pair_distance_m: f64,
    pub lambda_avg_bps: f64,
    pub warmup: u64,
    pub slots: u64,
    /// No measurement slots were run; statistics are NaN.
    pub empty: bool,
    /// Mean transmit power per pair, watts.
    pub avg_power_w: f64,
    /// Mean over slots of the summed power of all pairs, watts.
    pub avg_total_power_w: f64,
    /// Mean transmission rate per pair, bits/s.
    pub avg_throughput_bps: f64,
    /// Mean drained bits per pair per second.
    pub avg_served_bps: f64,
    pub mean_max_queue_bits: f64,
    pub var_max_queue_bits2: f64,
    pub avg_queue_bits: f64,
    /// Time-averaged total queue over `K lambda_avg`.
    pub avg_latency_s: f64,
    pub indicator_off_fraction: Option<f64>,
    /// GEV fitted on the pooled per-pair queue samples of the measurement window.
    pub gev_pooled: Option<GevFit>,
    pub gev_pooled_mean_var: Option<(f64, f64)>,
    /// KS distance between the empirical CDF of the maximal queue and the pooled GEV.
    pub ks_distance: Option<f64>,
    /// Each pair's own estimate at the end of the run (distributed scheme only).
    pub gev_per_pair: Vec<Option<GevParams>>,
    pub baseline: Option<BaselineModel>,
    /// Gumbel law of the maximum implied by the baseline tail.
    pub baseline_gev: Option<GevParams>,
    pub baseline_max_mean_var: Option<(f64, f64)>,
    pub final_global_vq: Option<VirtualQueues>,
    pub starved_pairs: usize,
    /// Ascending samples of the maximal queue over the measurement window.
    #[serde(skip)]
    pub max_queue_sorted: Vec<f64>,
}

impl RunReport {
    /// Fraction of measurement slots with `M > x`.
    pub fn max_queue_ccdf(&self, x: f64) -> f64 {
        crate::stats::empirical_ccdf(&self.max_queue_sorted, x)
    }
}

/// Baseline model used for the analytic reference columns.
fn baseline_reference(cfg: &ExperimentConfig, state: &SchemeState) -> Option<BaselineModel> {
    state.baseline.or_else(|| {
        BaselineModel::new(
            cfg.baseline.r_c_bps,
            cfg.queueing.lambda_avg_bps,
            cfg.baseline.p_busy,
        )
        .ok()
    })
}

/// Runs warm-up and measurement slots and summarizes them.
pub fn run_simulation(cfg: &ExperimentConfig, registry: &SchemeRegistry) -> Result<RunReport> {
    let mut sim = Simulation::new(cfg, registry)?;
    let k = cfg.mobility.k;
    let total = cfg.warmup + cfg.slots;

    let mut power = RunningMoments::default();
    let mut max_q = RunningMoments::default();
    let (mut rate_sum, mut served_sum, mut queue_sum, mut off) = (0.0, 0.0, 0.0, 0u64);
    let mut max_samples = Vec::with_capacity(cfg.slots as usize);
    let mut pooled = Vec::with_capacity(cfg.slots as usize * k);
    let mut saw_indicator = false;

    for t in 0..total {
        let m = sim.step()?;
        if t < cfg.warmup {
            continue;
        }
        power.push(m.total_power_w);
        max_q.push(m.max_queue);
        rate_sum += m.rates_bps.iter().sum::<f64>();
        served_sum += m.served_bits.iter().sum::<f64>();
        queue_sum += m.total_queue;
        off += m.indicator_off as u64;
        saw_indicator |= m.indicator_pairs > 0;
        max_samples.push(m.max_queue);
        pooled.extend_from_slice(sim.queues());
    }

    let n = cfg.slots as f64;
    let kf = k as f64;
    let empty = cfg.slots == 0;
    max_samples.sort_by(f64::total_cmp);

    let gev_pooled = if empty || k < 2 {
        None
    } else {
        estimate_gev(
            &QueueHistory::from_samples(pooled),
            cfg.evt.psi,
            k,
            cfg.evt.min_exceedances,
        )
        .ok()
    };
    let ks = gev_pooled
        .as_ref()
        .filter(|_| !max_samples.is_empty())
        .map(|f| ks_distance(&max_samples, |x| gev_cdf(x, &f.gev)));
    let gev_pooled_mean_var = gev_pooled.as_ref().and_then(|f| gev_mean_var(&f.gev).ok());

    let state = sim.scheme_state();
    let baseline = baseline_reference(cfg, &state);
    let baseline_gev = baseline.and_then(|b| {
        let kp = kf * b.p_busy;
        (kp > 1.0).then(|| GevParams {
            mu: kp.ln() / b.theta,
            sigma: 1.0 / b.theta,
            xi: 0.0,
        })
    });
    let baseline_max_mean_var = baseline.and_then(|b| baseline_max_stats(k, &b).ok());

    let nan_if_empty = |x: f64| if empty { f64::NAN } else { x };
    Ok(RunReport {
        scheme: cfg.scheme.clone(),
        seed: cfg.seed,
        k,
        v: cfg.power.v,
        n_rb: cfg.power.n_rb,
        t_c_s: cfg.t_c_s,
        blocklength: cfg.blocklength(),
        eps: cfg.channel.eps,
        pair_distance_m: cfg.mobility.pair_distance_m,
        lambda_avg_bps: cfg.queueing.lambda_avg_bps,
        warmup: cfg.warmup,
        slots: cfg.slots,
        empty,
        avg_power_w: nan_if_empty(power.mean() / kf),
        avg_total_power_w: power.mean(),
        avg_throughput_bps: nan_if_empty(rate_sum / (n * kf)),
        avg_served_bps: nan_if_empty(served_sum / (n * kf * cfg.t_c_s)),
        mean_max_queue_bits: max_q.mean(),
        var_max_queue_bits2: max_q.variance(),
        avg_queue_bits: nan_if_empty(queue_sum / (n * kf)),
        avg_latency_s: nan_if_empty(queue_sum / n / (kf * cfg.queueing.lambda_avg_bps)),
        indicator_off_fraction: (saw_indicator && !empty).then(|| off as f64 / (n * kf)),
        gev_pooled,
        gev_pooled_mean_var,
        ks_distance: ks,
        gev_per_pair: state.gev.clone(),
        baseline,
        baseline_gev,
        baseline_max_mean_var,
        final_global_vq: state.global_vq,
        starved_pairs: sim.assignment().map_or(0, |a| a.starved.len()),
        max_queue_sorted: max_samples,
    })
}

/// Finds the baseline rate whose average transmission rate matches
/// `target_bps` within relative `tol`, by bisection on `R_c`.
pub fn match_baseline_rate(
    cfg: &ExperimentConfig,
    registry: &SchemeRegistry,
    target_bps: f64,
    tol: f64,
) -> Result<RunReport> {
    let lambda = cfg.queueing.lambda_avg_bps;
    let run = |r_c: f64| -> Result<RunReport> {
        let mut c = cfg.clone();
        c.scheme = BaselineConstantRate::NAME.to_owned();
        c.baseline.r_c_bps = r_c;
        c.baseline.match_scheme = None;
        run_simulation(&c, registry)
    };
    let close = |r: &RunReport| (r.avg_throughput_bps - target_bps).abs() <= tol * target_bps;

    let mut lo = lambda.max(1.0) * (1.0 + 1e-6);
    let lo_report = run(lo)?;
    if close(&lo_report) || lo_report.avg_throughput_bps > target_bps {
        return Ok(lo_report);
    }
    let mut hi = target_bps.max(2.0 * lo);
    let mut hi_report = run(hi)?;
    let mut doublings = 0;
    while hi_report.avg_throughput_bps < target_bps * (1.0 - tol) {
        doublings += 1;
        if doublings > 40 {
            return Err(Error::domain(
                "match_baseline_rate",
                format!("target {target_bps} b/s exceeds what the channel supports"),
            ));
        }
        lo = hi;
        hi *= 2.0;
        hi_report = run(hi)?;
    }
    if close(&hi_report) {
        return Ok(hi_report);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let r = run(mid)?;
        if close(&r) {
            return Ok(r);
        }
        if r.avg_throughput_bps < target_bps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::domain(
        "match_baseline_rate",
        "bisection did not converge",
    ))
}

/// Runs the configured scheme; a baseline with `match_scheme` set first runs
/// that scheme and tunes `R_c` to its average throughput.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &SchemeRegistry) -> Result<RunReport> {
    match (&cfg.baseline.match_scheme, cfg.scheme.as_str()) {
        (Some(target), BaselineConstantRate::NAME) => {
            let mut reference = cfg.clone();
            reference.scheme = target.clone();
            let r = run_simulation(&reference, registry)?;
            match_baseline_rate(cfg, registry, r.avg_throughput_bps, cfg.baseline.match_tol)
        }
        _ => run_simulation(cfg, registry),
    }
}
