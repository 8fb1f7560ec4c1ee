//! VIX computation and the three pricing pipelines: nested Monte Carlo,
//! least-squares Monte Carlo with a pluggable regression surface, and the
//! closed-form Riccati benchmark for the independent Markovian case.
//!
//! All pipelines share the same outer simulation for a given (config, seed),
//! so methods can be compared pathwise. Reductions use fixed-order pairwise
//! summation, making every figure reproducible across runs and thread counts.

pub mod black;
pub mod metrics;

pub use black::{black_call, black_vega, implied_vol, norm_cdf};
pub use metrics::{compute_metrics, rmse, rmse_rows, MetricsReport};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{derive_seed, mean, pairwise_sum, standard_error};
use crate::regress::{fit_regressor, stratified_sample, Regressor, RegressorKind, TrainingSet};
use crate::riccati::{solve_riccati, RiccatiSolution};
use crate::svm::{
    assemble_forward_curve, estimate_h0, inner_seed, simulate_inner, simulate_outer, ModelConfig,
    OuterState, VovSpec,
};

pub const STREAM_REGRESSION: u64 = 0x72656772; // "regr"

/// Riccati resolution used by the pricing oracle.
const ORACLE_ODE_STEPS: usize = 4000;

/// Scale applied to the regression target: the pipeline always predicts a
/// transform of log h_T and exponentiates after inversion, so predicted
/// curves stay positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetTransform {
    /// y = log h_T.
    Log,
    /// y = (log h_T)^3, the deliberately non-linear benchmark target.
    LogCubed,
}

impl TargetTransform {
    pub fn apply(&self, h: f64) -> f64 {
        match self {
            TargetTransform::Log => h.ln(),
            TargetTransform::LogCubed => h.ln().powi(3),
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match self {
            TargetTransform::Log => y.exp(),
            TargetTransform::LogCubed => y.cbrt().exp(),
        }
    }
}

/// Cross-pipeline knobs with the study defaults.
#[derive(Debug, Clone)]
pub struct PricingSettings {
    /// Strike grid as multiples of the Monte Carlo future.
    pub moneyness: Vec<f64>,
    /// Retain per-path forward curves in the sample.
    pub retain_curves: bool,
    /// Retain per-path h_T rows (needed for RMSE metrics).
    pub retain_ht: bool,
    pub target: TargetTransform,
    /// Stratification bins over the Gamma_T range.
    pub n_bins: usize,
    /// Minimum picks per nonempty bin; default is ceil(0.1 N / n_bins).
    pub per_bin_goal: Option<usize>,
}

impl Default for PricingSettings {
    fn default() -> Self {
        Self {
            moneyness: (7..=15).map(|i| i as f64 / 10.0).collect(),
            retain_curves: false,
            retain_ht: false,
            target: TargetTransform::Log,
            n_bins: 20,
            per_bin_goal: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Budget {
    pub k: usize,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub outer_s: f64,
    pub inner_s: f64,
    pub fit_s: f64,
    pub pricing_s: f64,
    pub total_s: f64,
}

/// Per-path VIX values (annualized volatility units).
#[derive(Debug, Clone)]
pub struct VixSample {
    pub vix: Vec<f64>,
    pub curves: Option<Vec<Vec<f64>>>,
}

/// Smile output of one pricing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmileReport {
    pub method: String,
    /// Monte Carlo VIX future with its standard error.
    pub forward: f64,
    pub forward_se: f64,
    /// Option expiry (the outer horizon T).
    pub expiry: f64,
    pub moneyness: Vec<f64>,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
    pub price_ses: Vec<f64>,
    /// Implied vols; a gap marks a price outside the arbitrage bounds.
    pub ivols: Vec<Option<f64>>,
    pub ivol_ses: Vec<Option<f64>>,
    pub budget: Budget,
    pub total_sims: u64,
    pub timings: StageTimings,
    pub notes: Vec<String>,
}

impl SmileReport {
    /// Implied vol at moneyness 1.0.
    pub fn atm_ivol(&self) -> Option<f64> {
        self.moneyness
            .iter()
            .position(|&m| (m - 1.0).abs() < 1e-12)
            .and_then(|i| self.ivols[i])
    }

    pub fn atm_ivol_se(&self) -> Option<f64> {
        self.moneyness
            .iter()
            .position(|&m| (m - 1.0).abs() < 1e-12)
            .and_then(|i| self.ivol_ses[i])
    }
}

/// Everything a pricing pipeline produces.
#[derive(Debug, Clone)]
pub struct PricingOutcome {
    pub sample: VixSample,
    pub report: SmileReport,
    /// Gamma_T per outer path (scatter diagnostics).
    pub gamma_ts: Vec<f64>,
    /// h_T estimate at the reference grid point, per outer path.
    pub ht_ref: Vec<f64>,
    /// 0-based inner-grid index of the reference point (about two thirds of
    /// the way between T and T + Delta).
    pub u_ref_index: usize,
    /// Full h_T rows when `retain_ht` is set.
    pub ht: Option<Vec<Vec<f64>>>,
    pub h0: Vec<f64>,
    /// The fitted regression surface (least-squares pipeline only).
    pub regressor: Option<Regressor>,
}

/// Reference inner-grid index for scatter diagnostics: ceil(2n/3), 0-based
/// (index 140 of 210 for the base grid, i.e. the 141st point).
pub fn u_ref_index(n_inner: usize) -> usize {
    (2 * n_inner).div_ceil(3)
}

/// VIX_T from the forward variance curve: the rectangle rule over the inner
/// grid with uniform weights delta/n, normalized by delta.
pub fn vix_from_curve(xi_t: &[f64], delta: f64) -> Result<f64> {
    if xi_t.is_empty() {
        return Err(Error::ShapeMismatch("empty forward curve".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::DomainError(format!("delta = {delta} must be > 0")));
    }
    for (j, &v) in xi_t.iter().enumerate() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::DomainError(format!("xi_T[{j}] = {v} must be nonnegative")));
        }
    }
    let w = delta / xi_t.len() as f64;
    Ok((pairwise_sum(xi_t) * w / delta).sqrt())
}

/// Shared pipeline tail: curves, VIX, futures, smile. Substituting oracle or
/// regressor h_T rows here is what makes the pricing methods pathwise
/// comparable on a common outer simulation.
pub fn price_from_curve_estimates(
    config: &ModelConfig,
    method: &str,
    states: &[OuterState],
    ht_rows: Vec<Vec<f64>>,
    h0: Option<Vec<f64>>,
    budget: Budget,
    total_sims: u64,
    settings: &PricingSettings,
) -> Result<PricingOutcome> {
    let h0 = match h0 {
        Some(v) => v,
        None => estimate_h0(states, &ht_rows)?,
    };
    finalize(
        config,
        method,
        states,
        ht_rows,
        h0,
        budget,
        total_sims,
        settings,
        StageTimings::default(),
        Instant::now(),
        Vec::new(),
    )
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    config: &ModelConfig,
    method: &str,
    states: &[OuterState],
    ht_rows: Vec<Vec<f64>>,
    h0: Vec<f64>,
    budget: Budget,
    total_sims: u64,
    settings: &PricingSettings,
    mut timings: StageTimings,
    started: Instant,
    mut notes: Vec<String>,
) -> Result<PricingOutcome> {
    let pricing_start = Instant::now();
    let xi0 = config.xi0_vector()?;
    let delta = config.grid.delta;
    let expiry = config.grid.t;

    let per_path: Vec<(f64, Option<Vec<f64>>)> = states
        .par_iter()
        .zip(&ht_rows)
        .map(|(s, ht)| {
            let xi_t = assemble_forward_curve(&xi0, &h0, &s.e0t, ht)?;
            let vix = vix_from_curve(&xi_t, delta)?;
            Ok((vix, if settings.retain_curves { Some(xi_t) } else { None }))
        })
        .collect::<Result<_>>()?;
    let vix: Vec<f64> = per_path.iter().map(|(v, _)| *v).collect();
    let curves = if settings.retain_curves {
        Some(per_path.into_iter().map(|(_, c)| c.unwrap()).collect())
    } else {
        None
    };

    let forward = mean(&vix);
    let forward_se = standard_error(&vix);
    let strikes: Vec<f64> = settings.moneyness.iter().map(|m| m * forward).collect();
    let mut prices = Vec::with_capacity(strikes.len());
    let mut price_ses = Vec::with_capacity(strikes.len());
    let mut ivols = Vec::with_capacity(strikes.len());
    let mut ivol_ses = Vec::with_capacity(strikes.len());
    for &k in &strikes {
        let payoffs: Vec<f64> = vix.iter().map(|v| (v - k).max(0.0)).collect();
        let price = mean(&payoffs);
        let se = standard_error(&payoffs);
        prices.push(price);
        price_ses.push(se);
        match implied_vol(price, forward, k, expiry) {
            Ok(iv) => {
                ivols.push(Some(iv));
                let vega = black_vega(forward, k, expiry, iv);
                ivol_ses.push(if vega > 0.0 { Some(se / vega) } else { None });
            }
            Err(_) => {
                notes.push(format!(
                    "strike {k:.6}: price outside arbitrage bounds, implied vol undefined"
                ));
                ivols.push(None);
                ivol_ses.push(None);
            }
        }
    }

    let n_inner = h0.len();
    let u_ref = u_ref_index(n_inner).min(n_inner - 1);
    let gamma_ts = states.iter().map(|s| s.gamma_t).collect();
    let ht_ref = ht_rows.iter().map(|h| h[u_ref]).collect();

    timings.pricing_s = pricing_start.elapsed().as_secs_f64();
    timings.total_s = started.elapsed().as_secs_f64();

    Ok(PricingOutcome {
        sample: VixSample { vix, curves },
        report: SmileReport {
            method: method.to_string(),
            forward,
            forward_se,
            expiry,
            moneyness: settings.moneyness.clone(),
            strikes,
            prices,
            price_ses,
            ivols,
            ivol_ses,
            budget,
            total_sims,
            timings,
            notes,
        },
        gamma_ts,
        ht_ref,
        u_ref_index: u_ref,
        ht: if settings.retain_ht { Some(ht_rows) } else { None },
        h0,
        regressor: None,
    })
}

/// Nested Monte Carlo: M inner simulations for each of the K outer paths.
pub fn price_nmc(
    config: &ModelConfig,
    seed: u64,
    k: usize,
    m: usize,
    settings: &PricingSettings,
) -> Result<PricingOutcome> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidBudget(format!("K = {k}, M = {m} must be positive")));
    }
    let started = Instant::now();
    let states = simulate_outer(config, seed, k)?;
    let outer_s = started.elapsed().as_secs_f64();

    let inner_start = Instant::now();
    let ht_rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| simulate_inner(config, &states[i], inner_seed(seed, i), m).map(|e| e.h))
        .collect::<Result<_>>()?;
    let inner_s = inner_start.elapsed().as_secs_f64();

    let h0 = estimate_h0(&states, &ht_rows)?;
    let timings = StageTimings { outer_s, inner_s, ..Default::default() };
    finalize(
        config,
        "nmc",
        &states,
        ht_rows,
        h0,
        Budget { k, n: k, m },
        (k * (1 + m)) as u64,
        settings,
        timings,
        started,
        Vec::new(),
    )
}

/// Least-squares Monte Carlo: inner simulations on a stratified subset of N
/// outer paths train a regression surface that predicts h_T on all K.
pub fn price_lsmc(
    config: &ModelConfig,
    seed: u64,
    k: usize,
    n: usize,
    m: usize,
    kind: &RegressorKind,
    settings: &PricingSettings,
) -> Result<PricingOutcome> {
    if k == 0 || m == 0 || n == 0 {
        return Err(Error::InvalidBudget(format!("K = {k}, N = {n}, M = {m} must be positive")));
    }
    if n > k {
        return Err(Error::InvalidBudget(format!("training size N = {n} exceeds K = {k}")));
    }
    if config.vov.is_rough() && !matches!(kind, RegressorKind::RandomForest { .. }) {
        return Err(Error::ConfigError(
            "rough vol-of-vol uses the curve zeta_T as predictor; the random-forest regressor is required".into(),
        ));
    }
    let started = Instant::now();
    let states = simulate_outer(config, seed, k)?;
    let outer_s = started.elapsed().as_secs_f64();

    let gamma_ts: Vec<f64> = states.iter().map(|s| s.gamma_t).collect();
    let goal = settings
        .per_bin_goal
        .unwrap_or_else(|| (0.1 * n as f64 / settings.n_bins as f64).ceil() as usize);
    let selected = stratified_sample(&gamma_ts, n, settings.n_bins, goal, seed)?;

    let inner_start = Instant::now();
    let training: Vec<Vec<f64>> = selected
        .par_iter()
        .map(|&i| simulate_inner(config, &states[i], inner_seed(seed, i), m).map(|e| e.h))
        .collect::<Result<_>>()?;
    let inner_s = inner_start.elapsed().as_secs_f64();

    let fit_start = Instant::now();
    let predictor_row = |s: &OuterState| -> Vec<f64> {
        match &config.vov {
            VovSpec::Cir(_) => vec![s.gamma_t],
            VovSpec::Rough(_) => s.zeta_t.clone().expect("rough outer state carries zeta_T"),
        }
    };
    let p = predictor_row(&states[selected[0]]).len();
    let mut x = Vec::with_capacity(selected.len() * p);
    let mut y = Vec::with_capacity(selected.len() * states[0].e0t.len());
    for (pos, &i) in selected.iter().enumerate() {
        x.extend(predictor_row(&states[i]));
        y.extend(training[pos].iter().map(|&h| settings.target.apply(h)));
    }
    let ts = TrainingSet::new(x, p, y, states[0].e0t.len())?;
    let regressor = fit_regressor(&ts, kind, derive_seed(seed, STREAM_REGRESSION, 0))?;

    let n_targets = regressor.n_targets();
    let ht_rows: Vec<Vec<f64>> = states
        .par_iter()
        .map(|s| {
            let pred = regressor.predict(&predictor_row(s))?;
            Ok(pred.iter().map(|&v| settings.target.invert(v)).collect())
        })
        .collect::<Result<_>>()?;
    debug_assert!(ht_rows.iter().all(|r| r.len() == n_targets));
    let fit_s = fit_start.elapsed().as_secs_f64();

    let h0 = estimate_h0(&states, &ht_rows)?;
    let timings = StageTimings { outer_s, inner_s, fit_s, ..Default::default() };
    let method = match kind {
        RegressorKind::Linear => "lsmc:linear",
        RegressorKind::Hermite { .. } => "lsmc:hermite",
        RegressorKind::RandomForest { .. } => "lsmc:rf",
    };
    let notes = vec![
        "LSMC standard errors reflect payoff dispersion only and exclude regression bias".into(),
    ];
    let mut outcome = finalize(
        config,
        method,
        &states,
        ht_rows,
        h0,
        Budget { k, n, m },
        (k + n * m) as u64,
        settings,
        timings,
        started,
        notes,
    )?;
    outcome.regressor = Some(regressor);
    Ok(outcome)
}

/// Closed-form benchmark: h_T and h_0 from the Riccati solution. Requires the
/// independent Markovian CIR configuration.
pub fn price_oracle(
    config: &ModelConfig,
    seed: u64,
    k: usize,
    settings: &PricingSettings,
) -> Result<PricingOutcome> {
    if k == 0 {
        return Err(Error::InvalidBudget("K must be positive".into()));
    }
    let cir = match (&config.vov, config.is_independent_markovian()) {
        (VovSpec::Cir(p), true) => *p,
        _ => {
            return Err(Error::ConfigError(
                "the Riccati benchmark needs Markovian CIR vol-of-vol independent of the variance driver (rho_v = 0)".into(),
            ))
        }
    };
    let started = Instant::now();
    let states = simulate_outer(config, seed, k)?;
    let outer_s = started.elapsed().as_secs_f64();

    let fit_start = Instant::now();
    let grid = config.grid.inner_grid()?;
    let sol = oracle_solution(config)?;
    let taus: Vec<f64> = grid.iter().map(|u| u - config.grid.t).collect();
    let ht_rows: Vec<Vec<f64>> = states
        .par_iter()
        .map(|s| taus.iter().map(|&tau| sol.oracle_h(s.gamma_t, tau)).collect())
        .collect::<Result<_>>()?;
    let h0 = grid
        .iter()
        .map(|&u| sol.oracle_h(cir.gamma0, u))
        .collect::<Result<Vec<f64>>>()?;
    let fit_s = fit_start.elapsed().as_secs_f64();

    let timings = StageTimings { outer_s, fit_s, ..Default::default() };
    finalize(
        config,
        "oracle",
        &states,
        ht_rows,
        h0,
        Budget { k, n: 0, m: 0 },
        k as u64,
        settings,
        timings,
        started,
        Vec::new(),
    )
}

/// Riccati solution covering tau in [0, T + Delta], as the pricing pipelines
/// use it (h_T needs [0, Delta], h_0 needs [0, T + Delta]).
pub fn oracle_solution(config: &ModelConfig) -> Result<RiccatiSolution> {
    let VovSpec::Cir(cir) = &config.vov else {
        return Err(Error::ConfigError("the Riccati oracle is defined for CIR vol-of-vol".into()));
    };
    solve_riccati(
        config.hurst,
        cir.theta,
        cir.m,
        cir.delta,
        config.grid.t + config.grid.delta,
        ORACLE_ODE_STEPS,
    )
}
