//! Ordinary least squares on a shared design matrix, with an optional
//! probabilists' Hermite expansion of z-scored predictors. One factorization
//! serves all target columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::cholesky_lower;
use crate::regress::TrainingSet;

/// Design basis applied to standardized predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    /// Intercept plus raw (standardized) predictors.
    Plain,
    /// Intercept plus He_1..He_d per predictor.
    Hermite(usize),
}

/// Probabilists' Hermite values [He_0(x), ..., He_d(x)] via the recurrence
/// He_{k+1} = x He_k - k He_{k-1}.
pub fn hermite_basis(x: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree == 0 {
        return out;
    }
    out.push(x);
    for k in 1..degree {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Fitted least-squares surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    basis: Basis,
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Coefficients, row-major `n_targets x q`.
    coefs: Vec<f64>,
    q: usize,
    n_targets: usize,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Design-space coefficients for one target column.
    pub fn coefficients(&self, target: usize) -> &[f64] {
        &self.coefs[target * self.q..(target + 1) * self.q]
    }

    fn design_row(&self, x: &[f64], out: &mut Vec<f64>) {
        design_row(&self.basis, &self.means, &self.stds, x, out);
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.q);
        self.design_row(x, &mut row);
        (0..self.n_targets)
            .map(|t| {
                let c = self.coefficients(t);
                row.iter().zip(c).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

fn design_width(basis: &Basis, p: usize) -> usize {
    match basis {
        Basis::Plain => 1 + p,
        Basis::Hermite(d) => 1 + p * d,
    }
}

fn design_row(basis: &Basis, means: &[f64], stds: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    match basis {
        Basis::Plain => {
            for (i, &v) in x.iter().enumerate() {
                out.push(standardize(v, means[i], stds[i]));
            }
        }
        Basis::Hermite(d) => {
            for (i, &v) in x.iter().enumerate() {
                let z = standardize(v, means[i], stds[i]);
                let he = hermite_basis(z, *d);
                out.extend_from_slice(&he[1..]);
            }
        }
    }
}

fn standardize(v: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        (v - mean) / std
    } else {
        // degenerate column; the rank check below reports it
        0.0
    }
}

/// Per-target ordinary least squares with a shared design matrix. Predictors
/// are z-scored with the training moments before basis expansion; the
/// intercept is He_0.
pub fn fit_linear(ts: &TrainingSet, basis: Basis) -> Result<LinearModel> {
    let (n, p, m) = (ts.n_rows(), ts.n_features(), ts.n_targets());
    let q = design_width(&basis, p);
    if n < q {
        return Err(Error::RankDeficient(format!(
            "{n} rows cannot identify {q} design columns"
        )));
    }

    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for j in 0..p {
        let mut s = 0.0;
        for i in 0..n {
            s += ts.x_row(i)[j];
        }
        means[j] = s / n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let d = ts.x_row(i)[j] - means[j];
            ss += d * d;
        }
        stds[j] = (ss / (n as f64 - 1.0).max(1.0)).sqrt();
    }

    // normal equations: G = A^T W A, B = A^T W Y, accumulated streaming
    let mut g = vec![0.0; q * q];
    let mut b = vec![0.0; q * m];
    let mut row = Vec::with_capacity(q);
    for i in 0..n {
        design_row(&basis, &means, &stds, ts.x_row(i), &mut row);
        let w = ts.weights().map_or(1.0, |ws| ws[i]);
        for a in 0..q {
            let wa = w * row[a];
            for c in a..q {
                g[a * q + c] += wa * row[c];
            }
            let y = ts.y_row(i);
            for (t, &yv) in y.iter().enumerate() {
                b[a * m + t] += wa * yv;
            }
        }
    }
    for a in 0..q {
        for c in 0..a {
            g[a * q + c] = g[c * q + a];
        }
    }

    let l = cholesky_lower(q, &g)
        .ok_or_else(|| Error::RankDeficient("design matrix has collinear columns".into()))?;
    // a vanishing pivot relative to the largest marks near-collinearity
    let max_piv = (0..q).map(|i| l[i * q + i]).fold(0.0f64, f64::max);
    for i in 0..q {
        if l[i * q + i] < 1e-10 * max_piv {
            return Err(Error::RankDeficient(format!(
                "design column {i} is numerically degenerate"
            )));
        }
    }

    // one factorization, m right-hand sides
    let mut coefs = vec![0.0; m * q];
    let mut rhs = vec![0.0; q];
    for t in 0..m {
        for a in 0..q {
            rhs[a] = b[a * m + t];
        }
        for i in 0..q {
            for k in 0..i {
                rhs[i] = rhs[i] - l[i * q + k] * rhs[k];
            }
            rhs[i] /= l[i * q + i];
        }
        for i in (0..q).rev() {
            for k in i + 1..q {
                rhs[i] = rhs[i] - l[k * q + i] * rhs[k];
            }
            rhs[i] /= l[i * q + i];
        }
        coefs[t * q..(t + 1) * q].copy_from_slice(&rhs);
    }

    Ok(LinearModel { basis, means, stds, coefs, q, n_targets: m })
}
