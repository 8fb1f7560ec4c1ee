//! Experiment configuration: a TOML manifest with flag overrides. Every field
//! has a default matching the baseline study configuration, so an empty file
//! (or no file) describes the independent Markovian CIR setup.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use vvix_core::error::{Error, Result};
use vvix_core::paths::CorrelationSpec;
use vvix_core::pricer::TargetTransform;
use vvix_core::regress::RegressorKind;
use vvix_core::svm::{GridSpec, ModelConfig, VovSpec};
use vvix_core::vov::{CirParams, RoughVovParams};

/// Which pricing pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    Nmc,
    Lsmc(RegressorKind),
    Oracle,
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::Nmc => "nmc",
            MethodSpec::Lsmc(RegressorKind::Linear) => "lsmc:linear",
            MethodSpec::Lsmc(RegressorKind::Hermite { .. }) => "lsmc:hermite",
            MethodSpec::Lsmc(RegressorKind::RandomForest { .. }) => "lsmc:rf",
            MethodSpec::Oracle => "oracle",
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub method: MethodSpec,
    pub target: TargetTransform,
    pub moneyness: Vec<f64>,
    pub n_bins: usize,
    pub per_bin_goal: Option<usize>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k == 0 {
            return Err(Error::ConfigError("budget.k must be positive".into()));
        }
        if let MethodSpec::Lsmc(_) = self.method {
            if self.n == 0 || self.n > self.k {
                return Err(Error::InvalidBudget(format!(
                    "budget.n = {} must lie in 1..=k ({})",
                    self.n, self.k
                )));
            }
        }
        if matches!(self.method, MethodSpec::Nmc | MethodSpec::Lsmc(_)) && self.m == 0 {
            return Err(Error::ConfigError("budget.m must be positive".into()));
        }
        if self.moneyness.is_empty() || self.moneyness.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::ConfigError("method.moneyness must be positive".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::ConfigError("sampling.n_bins must be positive".into()));
        }
        Ok(())
    }
}

/// Regressor kinds exercised by the bench sweep; the configured variant
/// replaces its default-parameter twin.
pub fn bench_regressors(config: &ExperimentConfig) -> Vec<RegressorKind> {
    let mut out = vec![
        RegressorKind::Hermite { degree: 3 },
        RegressorKind::Linear,
        RegressorKind::RandomForest { n_trees: 100, max_depth: 5, min_leaf: 1 },
    ];
    if let MethodSpec::Lsmc(kind) = &config.method {
        for slot in out.iter_mut() {
            if std::mem::discriminant(slot) == std::mem::discriminant(kind) {
                *slot = *kind;
            }
        }
    }
    out
}

/// Command-line overrides layered on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<String>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub m: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<String>,
    #[serde(default)]
    model: FileModel,
    #[serde(default)]
    grid: FileGrid,
    #[serde(default)]
    budget: FileBudget,
    #[serde(default)]
    method: FileMethod,
    #[serde(default)]
    sampling: FileSampling,
    #[serde(default)]
    output: FileOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    hurst: Option<f64>,
    v0: Option<f64>,
    rho: Option<f64>,
    rho_s: Option<f64>,
    rho_v: Option<f64>,
    xi0_curve: Option<Vec<f64>>,
    vov: Option<String>,
    #[serde(default)]
    cir: FileCir,
    #[serde(default)]
    rough_vov: FileRough,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCir {
    theta: Option<f64>,
    m: Option<f64>,
    delta: Option<f64>,
    gamma0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRough {
    nu: Option<f64>,
    h_vov: Option<f64>,
    zeta0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileGrid {
    t_days: Option<f64>,
    delta_days: Option<f64>,
    n_d: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBudget {
    k: Option<usize>,
    n: Option<usize>,
    m: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMethod {
    kind: Option<String>,
    regressor: Option<String>,
    hermite_degree: Option<usize>,
    rf_trees: Option<usize>,
    rf_max_depth: Option<usize>,
    rf_min_leaf: Option<usize>,
    target: Option<String>,
    moneyness: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSampling {
    n_bins: Option<usize>,
    per_bin_goal: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    out_dir: Option<String>,
}

fn parse_method_string(
    s: &str,
    file: &FileMethod,
) -> Result<MethodSpec> {
    let (kind, reg) = match s.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (s, None),
    };
    let regressor_name = reg
        .map(str::to_string)
        .or_else(|| file.regressor.clone())
        .unwrap_or_else(|| "hermite".to_string());
    let regressor = match regressor_name.as_str() {
        "linear" => RegressorKind::Linear,
        "hermite" => RegressorKind::Hermite { degree: file.hermite_degree.unwrap_or(3) },
        "rf" | "random-forest" => RegressorKind::RandomForest {
            n_trees: file.rf_trees.unwrap_or(100),
            max_depth: file.rf_max_depth.unwrap_or(5),
            min_leaf: file.rf_min_leaf.unwrap_or(1),
        },
        other => {
            return Err(Error::ConfigError(format!(
                "method.regressor = {other:?} is not one of linear | hermite | rf"
            )))
        }
    };
    match kind {
        "nmc" => Ok(MethodSpec::Nmc),
        "lsmc" => Ok(MethodSpec::Lsmc(regressor)),
        "oracle" => Ok(MethodSpec::Oracle),
        other => Err(Error::ConfigError(format!(
            "method.kind = {other:?} is not one of nmc | lsmc | oracle"
        ))),
    }
}

/// Loads, resolves and validates the experiment configuration. Returns the
/// configuration plus non-fatal warnings (odd but usable combinations).
pub fn parse_config(
    path: Option<&Path>,
    overrides: &Overrides,
) -> Result<(ExperimentConfig, Vec<String>)> {
    let file: FileConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                Error::ConfigError(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| Error::ConfigError(format!("bad config {}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let mut warnings = Vec::new();

    let mode = file.mode.as_deref().unwrap_or("independent");
    let (mode_rho_s, mode_rho_v, mode_rough) = match mode {
        "independent" => (0.0, 0.0, false),
        "dependent" => (-0.9, 0.9, false),
        "rough" => (-0.9, 0.9, true),
        other => {
            return Err(Error::ConfigError(format!(
                "mode = {other:?} is not one of independent | dependent | rough"
            )))
        }
    };

    let base = ModelConfig::base();
    let corr = CorrelationSpec {
        rho: file.model.rho.unwrap_or(base.corr.rho),
        rho_s: file.model.rho_s.unwrap_or(mode_rho_s),
        rho_v: file.model.rho_v.unwrap_or(mode_rho_v),
    };
    if mode == "independent" && (file.model.rho_v.is_some() || file.model.rho_s.is_some()) {
        if corr.rho_v != 0.0 || corr.rho_s != 0.0 {
            warnings.push(format!(
                "correlations (rho_s = {}, rho_v = {}) set without dependent/rough mode; values are used in the correlation matrix",
                corr.rho_s, corr.rho_v
            ));
        }
    }

    let rough = match file.model.vov.as_deref() {
        None => mode_rough,
        Some("cir") => false,
        Some("rough") => true,
        Some(other) => {
            return Err(Error::ConfigError(format!(
                "model.vov = {other:?} is not one of cir | rough"
            )))
        }
    };
    let base_cir = match base.vov {
        VovSpec::Cir(p) => p,
        VovSpec::Rough(_) => unreachable!(),
    };
    let vov = if rough {
        VovSpec::Rough(RoughVovParams {
            nu: file.model.rough_vov.nu.unwrap_or(0.05),
            h_vov: file.model.rough_vov.h_vov.unwrap_or(0.1),
            zeta0: file.model.rough_vov.zeta0.unwrap_or(base_cir.gamma0),
        })
    } else {
        VovSpec::Cir(CirParams {
            theta: file.model.cir.theta.unwrap_or(base_cir.theta),
            m: file.model.cir.m.unwrap_or(base_cir.m),
            delta: file.model.cir.delta.unwrap_or(base_cir.delta),
            gamma0: file.model.cir.gamma0.unwrap_or(base_cir.gamma0),
        })
    };

    let grid = GridSpec {
        t: file.grid.t_days.unwrap_or(7.0) / 365.0,
        delta: file.grid.delta_days.unwrap_or(30.0) / 365.0,
        n_d: file.grid.n_d.unwrap_or(7),
    };

    let model = ModelConfig {
        hurst: file.model.hurst.unwrap_or(base.hurst),
        v0: file.model.v0.unwrap_or(base.v0),
        xi0_curve: file.model.xi0_curve.clone(),
        corr,
        vov,
        grid,
    };

    let method_string = overrides
        .method
        .clone()
        .or_else(|| file.method.kind.clone())
        .unwrap_or_else(|| "oracle".to_string());
    let method = parse_method_string(&method_string, &file.method)?;

    let target = match file.method.target.as_deref() {
        None | Some("log") => TargetTransform::Log,
        Some("log-cubed") => TargetTransform::LogCubed,
        Some(other) => {
            return Err(Error::ConfigError(format!(
                "method.target = {other:?} is not one of log | log-cubed"
            )))
        }
    };

    let config = ExperimentConfig {
        model,
        k: overrides.k.or(file.budget.k).unwrap_or(50_000),
        n: overrides.n.or(file.budget.n).unwrap_or(2_000),
        m: overrides.m.or(file.budget.m).unwrap_or(100),
        seed: overrides.seed.or(file.budget.seed).unwrap_or(42),
        method,
        target,
        moneyness: file
            .method
            .moneyness
            .unwrap_or_else(|| (7..=15).map(|i| i as f64 / 10.0).collect()),
        n_bins: file.sampling.n_bins.unwrap_or(20),
        per_bin_goal: file.sampling.per_bin_goal.filter(|&g| g > 0),
        out_dir: overrides
            .out_dir
            .clone()
            .or_else(|| file.output.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
        threads: overrides.threads,
    };
    config.validate()?;
    Ok((config, warnings))
}
