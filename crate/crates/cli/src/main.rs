use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use rayon::prelude::*;

use v2v_evt::config::ExperimentConfig;
use v2v_evt::report::emit_report;
use v2v_evt::{run_experiment, SchemeRegistry};

/// Run V2V power-allocation experiments and write CSV/JSON summaries.
#[derive(Debug, Parser)]
#[command(name = "v2v-evt", version)]
struct Args {
    /// TOML experiment file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Power-allocation scheme (see --list-schemes).
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Measurement slots.
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep list, e.g. `v=0,1e4,1e6`; repeat for a grid.
    #[arg(long = "sweep", value_name = "KEY=V1,V2,...")]
    sweeps: Vec<String>,
    /// Also write ratio.csv (throughput relative to eps = 0.5).
    #[arg(long)]
    ratio_table: bool,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    list_schemes: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Args::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(args: Args) -> Result<()> {
    let registry = SchemeRegistry::builtin();
    if args.list_schemes {
        for name in registry.names() {
            println!("{name}");
        }
        return Ok(());
    }

    let mut cfg = match &args.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.scheme {
        cfg.scheme = s;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.slots {
        cfg.slots = n;
    }
    if let Some(n) = args.warmup {
        cfg.warmup = n;
    }
    if let Some(dir) = args.out {
        cfg.output.dir = dir;
    }
    for s in &args.sweeps {
        cfg.sweep.set_from_str(s)?;
    }
    cfg.output.ratio_table |= args.ratio_table;
    cfg.validate()?;

    let points = cfg.sweep.points();
    for p in &points {
        let c = p.apply(&cfg);
        if !registry.contains(&c.scheme) {
            bail!(
                "unknown scheme `{}` (known: {})",
                c.scheme,
                registry.names().join(", ")
            );
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    log::info!("running {} sweep point(s)", points.len());
    let reports = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_experiment(&p.apply(&cfg), &registry))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let emitted = emit_report(
        &reports,
        &cfg.output.dir,
        cfg.output.ccdf_points,
        cfg.output.ratio_table,
    )?;
    for (i, r) in reports.iter().enumerate() {
        println!(
            "[{i}] scheme={} k={} v={} L={} eps={} d={}m power={:.4e}W throughput={:.4e}b/s E[M]={:.4e} Var(M)={:.4e} latency={:.4e}s",
            r.scheme,
            r.k,
            r.v,
            r.blocklength,
            r.eps,
            r.pair_distance_m,
            r.avg_power_w,
            r.avg_throughput_bps,
            r.mean_max_queue_bits,
            r.var_max_queue_bits2,
            r.avg_latency_s
        );
    }
    println!("wrote {}", emitted.summary_csv.display());
    Ok(())
}
