//! Multi-output regression surfaces mapping simulation state (the vol-of-vol
//! value, or the conditional-expectation curve) to the log conditional
//! expectation vector, plus the stratified sampler that selects training
//! paths. Fitted models serialize to a portable JSON layout (coefficient
//! tables / flattened tree arrays).

mod forest;
mod linear;
mod sample;

pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use linear::{fit_linear, hermite_basis, Basis, LinearModel};
pub use sample::stratified_sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression data: N rows of p predictors and n targets, row-major.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    x: Vec<f64>,
    y: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    n_targets: usize,
    weights: Option<Vec<f64>>,
}

impl TrainingSet {
    pub fn new(x: Vec<f64>, n_features: usize, y: Vec<f64>, n_targets: usize) -> Result<Self> {
        if n_features == 0 || n_targets == 0 {
            return Err(Error::ShapeMismatch("empty feature or target dimension".into()));
        }
        if x.len() % n_features != 0 || y.len() % n_targets != 0 {
            return Err(Error::ShapeMismatch(format!(
                "ragged data: |x| = {}, p = {n_features}, |y| = {}, n = {n_targets}",
                x.len(),
                y.len()
            )));
        }
        let n_rows = x.len() / n_features;
        if n_rows != y.len() / n_targets || n_rows == 0 {
            return Err(Error::ShapeMismatch(format!(
                "predictor rows {} != target rows {}",
                n_rows,
                y.len() / n_targets
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DomainError("training data contains non-finite entries".into()));
        }
        Ok(Self { x, y, n_rows, n_features, n_targets, weights: None })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} rows",
                weights.len(),
                self.n_rows
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DomainError("weights must be finite and nonnegative".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.n_targets..(i + 1) * self.n_targets]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Which regression surface to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegressorKind {
    Linear,
    Hermite { degree: usize },
    RandomForest { n_trees: usize, max_depth: usize, min_leaf: usize },
}

/// A fitted multi-output regression surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Regressor {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl Regressor {
    pub fn n_features(&self) -> usize {
        match self {
            Regressor::Linear(m) => m.n_features(),
            Regressor::Forest(m) => m.n_features(),
        }
    }

    pub fn n_targets(&self) -> usize {
        match self {
            Regressor::Linear(m) => m.n_targets(),
            Regressor::Forest(m) => m.n_targets(),
        }
    }

    /// Predicts the target vector for one predictor row.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::ShapeMismatch(format!(
                "predictor has {} entries, model fitted on {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(match self {
            Regressor::Linear(m) => m.predict(x),
            Regressor::Forest(m) => m.predict(x),
        })
    }

    /// Predicts row-by-row over a flat row-major batch.
    pub fn predict_batch(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.n_features();
        if x.len() % p != 0 {
            return Err(Error::ShapeMismatch(format!(
                "batch of {} values is not a multiple of {p} features",
                x.len()
            )));
        }
        let mut out = Vec::with_capacity(x.len() / p * self.n_targets());
        for row in x.chunks(p) {
            out.extend(self.predict(row)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("regressor serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::ConfigError(format!("bad model JSON: {e}")))
    }
}

/// Fits the requested regressor kind; `seed` drives the random forest only.
pub fn fit_regressor(ts: &TrainingSet, kind: &RegressorKind, seed: u64) -> Result<Regressor> {
    match kind {
        RegressorKind::Linear => Ok(Regressor::Linear(fit_linear(ts, Basis::Plain)?)),
        RegressorKind::Hermite { degree } => {
            Ok(Regressor::Linear(fit_linear(ts, Basis::Hermite(*degree))?))
        }
        RegressorKind::RandomForest { n_trees, max_depth, min_leaf } => {
            let params = ForestParams {
                n_trees: *n_trees,
                max_depth: *max_depth,
                min_leaf: *min_leaf,
                seed,
            };
            Ok(Regressor::Forest(fit_random_forest(ts, &params)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_set_rejects_non_finite() {
        let r = TrainingSet::new(vec![1.0, f64::NAN], 1, vec![0.0, 0.0], 1);
        assert!(matches!(r, Err(Error::DomainError(_))));
    }

    #[test]
    fn training_set_rejects_ragged_rows() {
        let r = TrainingSet::new(vec![1.0, 2.0, 3.0], 2, vec![0.0], 1);
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn serialization_round_trip_preserves_predictions() {
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = x.iter().flat_map(|v| [2.0 * v + 1.0, -v]).collect();
        let ts = TrainingSet::new(x, 1, y, 2).unwrap();
        for kind in [
            RegressorKind::Hermite { degree: 3 },
            RegressorKind::RandomForest { n_trees: 10, max_depth: 4, min_leaf: 1 },
        ] {
            let model = fit_regressor(&ts, &kind, 99).unwrap();
            let restored = Regressor::from_json(&model.to_json()).unwrap();
            for probe in [0.05, 0.31, 0.77] {
                assert_eq!(model.predict(&[probe]).unwrap(), restored.predict(&[probe]).unwrap());
            }
        }
    }
}
