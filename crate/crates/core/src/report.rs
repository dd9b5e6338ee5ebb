//! CSV and JSON serialization of run reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::RunReport;
use crate::error::{Error, Result};
use crate::evt::gev_ccdf;

pub const SUMMARY_HEADER: [&str; 18] = [
    "index",
    "scheme",
    "seed",
    "k",
    "v",
    "n_rb",
    "t_c_s",
    "blocklength",
    "eps",
    "pair_distance_m",
    "avg_power_w",
    "avg_throughput_bps",
    "avg_served_bps",
    "mean_max_queue_bits",
    "var_max_queue_bits2",
    "avg_latency_s",
    "ks_distance",
    "indicator_off_fraction",
];

pub const CCDF_HEADER: [&str; 4] = ["m_bits", "empirical_ccdf", "gev_ccdf", "baseline_ccdf"];

pub const GEV_HEADER: [&str; 9] = [
    "index",
    "source",
    "mu_bits",
    "sigma_bits",
    "xi",
    "threshold_bits",
    "sigma_tilde_bits",
    "exceedances",
    "samples",
];

pub const RATIO_HEADER: [&str; 8] = [
    "scheme",
    "pair_distance_m",
    "k",
    "v",
    "blocklength",
    "eps",
    "avg_throughput_bps",
    "ratio_to_eps_half",
];

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_owned(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn summary_row(index: usize, r: &RunReport) -> Vec<String> {
    vec![
        index.to_string(),
        r.scheme.clone(),
        r.seed.to_string(),
        r.k.to_string(),
        num(r.v),
        r.n_rb.to_string(),
        num(r.t_c_s),
        num(r.blocklength),
        num(r.eps),
        num(r.pair_distance_m),
        num(r.avg_power_w),
        num(r.avg_throughput_bps),
        num(r.avg_served_bps),
        num(r.mean_max_queue_bits),
        num(r.var_max_queue_bits2),
        num(r.avg_latency_s),
        opt(r.ks_distance),
        opt(r.indicator_off_fraction),
    ]
}

/// One CCDF row per grid point on `[0, 1.1 max M]`.
pub fn ccdf_rows(r: &RunReport, points: usize) -> Result<Vec<[f64; 4]>> {
    let top = r.max_queue_sorted.last().copied().unwrap_or(0.0);
    let hi = if top > 0.0 { 1.1 * top } else { 1.0 };
    let rows: Vec<[f64; 4]> = (0..points)
        .map(|i| {
            let m = hi * i as f64 / (points - 1) as f64;
            [
                m,
                r.max_queue_ccdf(m),
                r.gev_pooled
                    .as_ref()
                    .map_or(f64::NAN, |f| gev_ccdf(m, &f.gev)),
                r.baseline_gev.as_ref().map_or(f64::NAN, |g| gev_ccdf(m, g)),
            ]
        })
        .collect();
    for col in 1..4 {
        let bad = rows
            .windows(2)
            .any(|w| !w[0][col].is_nan() && !w[1][col].is_nan() && w[1][col] > w[0][col]);
        if bad {
            return Err(Error::InvalidOutput(format!(
                "{} column increases",
                CCDF_HEADER[col]
            )));
        }
    }
    Ok(rows)
}

fn gev_rows(index: usize, r: &RunReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    if let Some(f) = &r.gev_pooled {
        rows.push(vec![
            index.to_string(),
            "pooled".to_owned(),
            num(f.gev.mu),
            num(f.gev.sigma),
            num(f.gev.xi),
            num(f.gpd.threshold_d),
            num(f.gpd.sigma_tilde),
            f.exceedances.to_string(),
            f.samples.to_string(),
        ]);
    }
    if let Some(b) = &r.baseline_gev {
        rows.push(vec![
            index.to_string(),
            "baseline".to_owned(),
            num(b.mu),
            num(b.sigma),
            num(b.xi),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    for (k, g) in r.gev_per_pair.iter().enumerate() {
        if let Some(g) = g {
            rows.push(vec![
                index.to_string(),
                format!("pair{k}"),
                num(g.mu),
                num(g.sigma),
                num(g.xi),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    }
    rows
}

/// Throughput of each report relative to the `eps = 0.5` report that shares
/// every other coordinate.
pub fn ratio_rows(reports: &[RunReport]) -> Result<Vec<Vec<String>>> {
    let same_point = |a: &RunReport, b: &RunReport| {
        a.scheme == b.scheme
            && a.pair_distance_m == b.pair_distance_m
            && a.k == b.k
            && a.v == b.v
            && a.blocklength == b.blocklength
    };
    let mut rows = Vec::new();
    for r in reports.iter().filter(|r| r.eps != 0.5) {
        let reference = reports
            .iter()
            .find(|o| o.eps == 0.5 && same_point(o, r))
            .ok_or_else(|| {
                Error::InvalidOutput(format!(
                    "no eps = 0.5 run for distance {} m, L = {}",
                    r.pair_distance_m, r.blocklength
                ))
            })?;
        rows.push(vec![
            r.scheme.clone(),
            num(r.pair_distance_m),
            r.k.to_string(),
            num(r.v),
            num(r.blocklength),
            num(r.eps),
            num(r.avg_throughput_bps),
            num(r.avg_throughput_bps / reference.avg_throughput_bps),
        ]);
    }
    Ok(rows)
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Emitted {
    pub summary_csv: PathBuf,
    pub ccdf_csv: Vec<PathBuf>,
    pub gev_csv: PathBuf,
    pub summary_json: PathBuf,
    pub ratio_csv: Option<PathBuf>,
}

/// Writes the summary table, one CCDF file per report, the fitted GEV
/// parameters, a JSON summary and optionally the throughput-ratio table.
pub fn emit_report(
    reports: &[RunReport],
    out_dir: &Path,
    ccdf_points: usize,
    ratio_table: bool,
) -> Result<Emitted> {
    if reports.is_empty() {
        return Err(Error::Empty("emit_report"));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let summary_csv = out_dir.join("summary.csv");
    let rows: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| summary_row(i, r))
        .collect();
    write_csv(&summary_csv, &SUMMARY_HEADER, &rows)?;

    let mut ccdf_csv = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let path = if reports.len() == 1 {
            out_dir.join("ccdf.csv")
        } else {
            out_dir.join(format!("ccdf_{i:03}.csv"))
        };
        let rows: Vec<Vec<String>> = ccdf_rows(r, ccdf_points)?
            .iter()
            .map(|row| row.iter().map(|&x| num(x)).collect())
            .collect();
        write_csv(&path, &CCDF_HEADER, &rows)?;
        ccdf_csv.push(path);
    }

    let gev_csv = out_dir.join("gev.csv");
    let rows: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .flat_map(|(i, r)| gev_rows(i, r))
        .collect();
    write_csv(&gev_csv, &GEV_HEADER, &rows)?;

    let summary_json = out_dir.join("summary.json");
    let json =
        serde_json::to_string_pretty(reports).map_err(|e| Error::InvalidOutput(e.to_string()))?;
    fs::write(&summary_json, json + "\n").map_err(io_err(&summary_json))?;

    let ratio_csv = if ratio_table {
        let path = out_dir.join("ratio.csv");
        write_csv(&path, &RATIO_HEADER, &ratio_rows(reports)?)?;
        Some(path)
    } else {
        None
    };

    Ok(Emitted {
        summary_csv,
        ccdf_csv,
        gev_csv,
        summary_json,
        ratio_csv,
    })
}
