//! Experiment execution: dispatches the configured pricing pipeline, runs the
//! closed-form benchmark alongside it whenever the configuration admits one,
//! and emits the CSV reports.

use std::path::{Path, PathBuf};

use vvix_core::error::{Error, Result};
use vvix_core::pricer::{
    compute_metrics, price_from_curve_estimates, price_lsmc, price_nmc, price_oracle, Budget,
    PricingOutcome, PricingSettings,
};
use vvix_core::regress::Regressor;
use vvix_core::svm::simulate_outer;

use crate::config::{ExperimentConfig, MethodSpec};
use crate::csvout::{write_ht_scatter, write_metrics, write_smile, MetricsRow, OutputPaths};

#[derive(Debug)]
pub struct RunSummary {
    pub outcome: PricingOutcome,
    pub paths: OutputPaths,
}

fn settings_for(config: &ExperimentConfig, retain_ht: bool) -> PricingSettings {
    PricingSettings {
        moneyness: config.moneyness.clone(),
        retain_curves: false,
        retain_ht,
        target: config.target,
        n_bins: config.n_bins,
        per_bin_goal: config.per_bin_goal,
    }
}

fn dispatch(config: &ExperimentConfig, settings: &PricingSettings) -> Result<PricingOutcome> {
    match &config.method {
        MethodSpec::Nmc => price_nmc(&config.model, config.seed, config.k, config.m, settings),
        MethodSpec::Lsmc(kind) => price_lsmc(
            &config.model,
            config.seed,
            config.k,
            config.n,
            config.m,
            kind,
            settings,
        ),
        MethodSpec::Oracle => price_oracle(&config.model, config.seed, config.k, settings),
    }
}

/// Runs the configured pricer and writes smile.csv, ht_scatter.csv and
/// metrics.csv into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    run_experiment_with(config, None)
}

/// As [`run_experiment`], optionally substituting a previously fitted
/// regression surface for the inner-simulation + fit stages.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    loaded_model: Option<&Regressor>,
) -> Result<RunSummary> {
    config.validate()?;
    let benchmark_applies = config.model.is_independent_markovian();
    let retain_ht = benchmark_applies;
    let settings = settings_for(config, retain_ht);

    let outcome = match loaded_model {
        None => dispatch(config, &settings)?,
        Some(model) => price_with_model(config, model, &settings)?,
    };

    // closed-form companion run on the same outer paths
    let oracle = match (benchmark_applies, &config.method) {
        (true, MethodSpec::Nmc | MethodSpec::Lsmc(_)) => {
            Some(price_oracle(&config.model, config.seed, config.k, &settings)?)
        }
        _ => None,
    };

    let (rmse_pair, ivol_pair, oracle_ref) = match &oracle {
        Some(o) => (
            outcome.ht.as_deref().zip(o.ht.as_deref()),
            Some((outcome.report.ivols.as_slice(), o.report.ivols.as_slice())),
            Some(o.ht_ref.as_slice()),
        ),
        None => (None, None, None),
    };
    let metrics = compute_metrics(
        rmse_pair,
        ivol_pair,
        outcome.report.timings.total_s,
        outcome.report.total_sims,
    )?;

    let paths = OutputPaths::new(&config.out_dir);
    write_smile(&paths.smile, config, &outcome.report)?;
    write_ht_scatter(&paths.ht_scatter, config, &outcome, oracle_ref)?;
    let row = MetricsRow {
        method: outcome.report.method.clone(),
        k: outcome.report.budget.k,
        n: outcome.report.budget.n,
        m: outcome.report.budget.m,
        report: metrics,
        time_ratio: None,
    };
    write_metrics(&paths.metrics, config, &[row])?;
    Ok(RunSummary { outcome, paths })
}

/// Prices with a deserialized regression surface: outer simulation plus
/// prediction only, no inner simulations and no fit.
fn price_with_model(
    config: &ExperimentConfig,
    model: &Regressor,
    settings: &PricingSettings,
) -> Result<PricingOutcome> {
    let states = simulate_outer(&config.model, config.seed, config.k)?;
    let ht_rows: Vec<Vec<f64>> = states
        .iter()
        .map(|s| {
            let predictor = match &config.model.vov {
                vvix_core::svm::VovSpec::Cir(_) => vec![s.gamma_t],
                vvix_core::svm::VovSpec::Rough(_) => {
                    s.zeta_t.clone().ok_or_else(|| {
                        Error::ConfigError("rough outer state lacks zeta_T".into())
                    })?
                }
            };
            let pred = model.predict(&predictor)?;
            Ok(pred.iter().map(|&v| config.target.invert(v)).collect())
        })
        .collect::<Result<_>>()?;
    let method = "lsmc:loaded";
    price_from_curve_estimates(
        &config.model,
        method,
        &states,
        ht_rows,
        None,
        Budget { k: config.k, n: 0, m: 0 },
        config.k as u64,
        settings,
    )
}

/// Budget sweep: M in {10, 100, 1000} for the nested method and for each
/// least-squares regressor at the configured N, producing the convergence
/// table. The time-ratio column reports, for each least-squares row, the
/// wall time of the cheapest nested run that met the same implied-vol error,
/// divided by the row's wall time.
pub fn run_bench(config: &ExperimentConfig) -> Result<(Vec<MetricsRow>, PathBuf)> {
    config.validate()?;
    let benchmark_applies = config.model.is_independent_markovian();
    let settings = settings_for(config, benchmark_applies);
    let m_sweep = [10usize, 100, 1000];

    let oracle = if benchmark_applies {
        Some(price_oracle(&config.model, config.seed, config.k, &settings)?)
    } else {
        None
    };
    let metrics_of = |outcome: &PricingOutcome| -> Result<_> {
        let (rmse_pair, ivol_pair) = match &oracle {
            Some(o) => (
                outcome.ht.as_deref().zip(o.ht.as_deref()),
                Some((outcome.report.ivols.as_slice(), o.report.ivols.as_slice())),
            ),
            None => (None, None),
        };
        compute_metrics(
            rmse_pair,
            ivol_pair,
            outcome.report.timings.total_s,
            outcome.report.total_sims,
        )
    };

    let mut rows = Vec::new();
    for m in m_sweep {
        let outcome = price_nmc(&config.model, config.seed, config.k, m, &settings)?;
        rows.push(MetricsRow {
            method: outcome.report.method.clone(),
            k: config.k,
            n: config.k,
            m,
            report: metrics_of(&outcome)?,
            time_ratio: None,
        });
    }
    let nmc_rows = rows.clone();

    let regressors = crate::config::bench_regressors(config);
    for kind in &regressors {
        // the rough predictor is the whole curve; only the forest handles it
        if config.model.vov.is_rough()
            && !matches!(kind, vvix_core::regress::RegressorKind::RandomForest { .. })
        {
            continue;
        }
        for m in m_sweep {
            let outcome =
                price_lsmc(&config.model, config.seed, config.k, config.n, m, kind, &settings)?;
            let report = metrics_of(&outcome)?;
            // matched-error comparison against the nested sweep
            let time_ratio = report.rmse_ivol.and_then(|goal| {
                nmc_rows
                    .iter()
                    .filter(|r| r.report.rmse_ivol.is_some_and(|e| e <= goal))
                    .map(|r| r.report.wall_time_s)
                    .fold(None, |best: Option<f64>, t| {
                        Some(best.map_or(t, |b| b.min(t)))
                    })
                    .map(|t_nmc| t_nmc / report.wall_time_s)
            });
            rows.push(MetricsRow {
                method: outcome.report.method.clone(),
                k: config.k,
                n: config.n,
                m,
                report,
                time_ratio,
            });
        }
    }

    let path = config.out_dir.join("metrics.csv");
    write_metrics(&path, config, &rows)?;
    Ok((rows, path))
}

/// Serializes a fitted model next to the other outputs.
pub fn save_model(path: &Path, outcome: &PricingOutcome) -> Result<()> {
    let model = outcome.regressor.as_ref().ok_or_else(|| {
        Error::ConfigError("this pricing method does not fit a regression surface".into())
    })?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::ConfigError(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, model.to_json())
        .map_err(|e| Error::ConfigError(format!("cannot write {}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<Regressor> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigError(format!("cannot read {}: {e}", path.display())))?;
    Regressor::from_json(&text)
}
