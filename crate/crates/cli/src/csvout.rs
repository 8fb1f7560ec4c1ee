//! Plot-ready CSV emission. Schemas are fixed:
//!
//! * `smile.csv`: strike, price, se, ivol, ivol_se, moneyness
//! * `ht_scatter.csv`: gamma_t, ht_estimate, ht_oracle (blank without oracle)
//! * `metrics.csv`: method, k, n, m, total_sims, rmse_ht, rmse_ivol,
//!   wall_time_s, time_ratio
//!
//! Floats carry 17 significant digits. Header comment lines (starting `#`)
//! record the provenance (command, seed, config digest); wall-clock columns
//! are the only content that varies between identical runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vvix_core::error::{Error, Result};
use vvix_core::pricer::{MetricsReport, PricingOutcome, SmileReport};

use crate::config::ExperimentConfig;

/// 17 significant digits, enough to reconstruct the exact f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One-line provenance fingerprint: every model/budget field that affects the
/// numbers, in fixed order.
pub fn provenance_line(config: &ExperimentConfig) -> String {
    let model = &config.model;
    let mut s = String::new();
    let _ = write!(
        s,
        "method={} seed={} k={} n={} m={} hurst={} v0={} rho={} rho_s={} rho_v={} t={} delta={} n_d={}",
        config.method.label(),
        config.seed,
        config.k,
        config.n,
        config.m,
        model.hurst,
        model.v0,
        model.corr.rho,
        model.corr.rho_s,
        model.corr.rho_v,
        model.grid.t,
        model.grid.delta,
        model.grid.n_d,
    );
    match &model.vov {
        vvix_core::svm::VovSpec::Cir(p) => {
            let _ = write!(s, " vov=cir theta={} m={} delta={} gamma0={}", p.theta, p.m, p.delta, p.gamma0);
        }
        vvix_core::svm::VovSpec::Rough(p) => {
            let _ = write!(s, " vov=rough nu={} h_vov={} zeta0={}", p.nu, p.h_vov, p.zeta0);
        }
    }
    s
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| Error::ConfigError(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, content)
        .map_err(|e| Error::ConfigError(format!("cannot write {}: {e}", path.display())))
}

pub fn write_smile(path: &Path, config: &ExperimentConfig, report: &SmileReport) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# vvix smile {}", provenance_line(config));
    let _ = writeln!(
        out,
        "# forward={} forward_se={} expiry={}",
        fmt_f64(report.forward),
        fmt_f64(report.forward_se),
        fmt_f64(report.expiry)
    );
    for note in &report.notes {
        let _ = writeln!(out, "# note: {note}");
    }
    let _ = writeln!(out, "strike,price,se,ivol,ivol_se,moneyness");
    for i in 0..report.strikes.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(report.strikes[i]),
            fmt_f64(report.prices[i]),
            fmt_f64(report.price_ses[i]),
            fmt_opt(report.ivols[i]),
            fmt_opt(report.ivol_ses[i]),
            fmt_f64(report.moneyness[i]),
        );
    }
    write_file(path, &out)
}

/// Scatter of the h_T estimate at the reference grid point against Gamma_T,
/// with the closed-form value alongside when the configuration admits one.
pub fn write_ht_scatter(
    path: &Path,
    config: &ExperimentConfig,
    outcome: &PricingOutcome,
    oracle_ref: Option<&[f64]>,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# vvix ht-scatter {}", provenance_line(config));
    let _ = writeln!(
        out,
        "# u_ref_index={} (0-based inner grid index, about two thirds of the horizon)",
        outcome.u_ref_index
    );
    let _ = writeln!(out, "gamma_t,ht_estimate,ht_oracle");
    for (i, (g, h)) in outcome.gamma_ts.iter().zip(&outcome.ht_ref).enumerate() {
        let oracle = oracle_ref.map(|o| o[i]);
        let _ = writeln!(out, "{},{},{}", fmt_f64(*g), fmt_f64(*h), fmt_opt(oracle));
    }
    write_file(path, &out)
}

/// One metrics row per pricing run.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: String,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub report: MetricsReport,
    pub time_ratio: Option<f64>,
}

pub fn write_metrics(path: &Path, config: &ExperimentConfig, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# vvix metrics {}", provenance_line(config));
    let _ = writeln!(
        out,
        "# rmse columns compare against the Riccati benchmark and are blank when it does not apply"
    );
    let _ = writeln!(out, "method,k,n,m,total_sims,rmse_ht,rmse_ivol,wall_time_s,time_ratio");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.method,
            row.k,
            row.n,
            row.m,
            row.report.total_sims,
            fmt_opt(row.report.rmse_ht),
            fmt_opt(row.report.rmse_ivol),
            fmt_f64(row.report.wall_time_s),
            fmt_opt(row.time_ratio),
        );
    }
    write_file(path, &out)
}

/// Output file paths of one experiment.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub smile: PathBuf,
    pub ht_scatter: PathBuf,
    pub metrics: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            smile: dir.join("smile.csv"),
            ht_scatter: dir.join("ht_scatter.csv"),
            metrics: dir.join("metrics.csv"),
        }
    }
}
