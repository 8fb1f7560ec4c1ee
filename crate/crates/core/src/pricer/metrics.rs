//! Error and runtime metrics for comparing pricing methods against the
//! closed-form benchmark.

use crate::error::{Error, Result};
use crate::math::pairwise_sum;

/// Root mean squared difference of two aligned flat arrays.
pub fn rmse(estimates: &[f64], reference: &[f64]) -> Result<f64> {
    if estimates.len() != reference.len() || estimates.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "rmse over {} vs {} values",
            estimates.len(),
            reference.len()
        )));
    }
    let sq: Vec<f64> = estimates
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok((pairwise_sum(&sq) / sq.len() as f64).sqrt())
}

/// RMSE over rows of per-path vectors (paths x grid).
pub fn rmse_rows(estimates: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    if estimates.len() != reference.len() || estimates.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "rmse over {} vs {} rows",
            estimates.len(),
            reference.len()
        )));
    }
    let mut sq = Vec::with_capacity(estimates.len());
    let mut count = 0usize;
    for (e, r) in estimates.iter().zip(reference) {
        if e.len() != r.len() {
            return Err(Error::ShapeMismatch("ragged rmse rows".into()));
        }
        let row: Vec<f64> = e.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).collect();
        count += row.len();
        sq.push(pairwise_sum(&row));
    }
    Ok((pairwise_sum(&sq) / count as f64).sqrt())
}

#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    /// RMSE of h_T over paths x grid against the oracle, when available.
    pub rmse_ht: Option<f64>,
    /// RMSE of implied vol over the strike grid against the oracle smile.
    pub rmse_ivol: Option<f64>,
    pub wall_time_s: f64,
    /// Total simulated paths: K (1 + M) for nested, K + N M for least squares.
    pub total_sims: u64,
}

/// Assembles the report; implied-vol grids may carry gaps (undefined vols),
/// which are skipped pairwise.
pub fn compute_metrics(
    ht: Option<(&[Vec<f64>], &[Vec<f64>])>,
    ivol: Option<(&[Option<f64>], &[Option<f64>])>,
    wall_time_s: f64,
    total_sims: u64,
) -> Result<MetricsReport> {
    let rmse_ht = match ht {
        Some((est, oracle)) => Some(rmse_rows(est, oracle)?),
        None => None,
    };
    let rmse_ivol = match ivol {
        Some((est, oracle)) => {
            if est.len() != oracle.len() {
                return Err(Error::ShapeMismatch("implied vol grids disagree".into()));
            }
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (x, y) in est.iter().zip(oracle) {
                if let (Some(x), Some(y)) = (x, y) {
                    a.push(*x);
                    b.push(*y);
                }
            }
            if a.is_empty() {
                None
            } else {
                Some(rmse(&a, &b)?)
            }
        }
        None => None,
    };
    Ok(MetricsReport { rmse_ht, rmse_ivol, wall_time_s, total_sims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_inputs_give_zero() {
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(rmse(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_gives_the_offset() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b: Vec<f64> = a.iter().map(|v| v + 0.37).collect();
        assert!((rmse(&a, &b).unwrap() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn gaussian_noise_recovers_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let sigma = 0.23;
        let n = 10_000;
        let a = vec![1.5; n];
        let b: Vec<f64> = a
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        let got = rmse(&a, &b).unwrap();
        assert!((got - sigma).abs() / sigma < 0.05, "rmse {got} vs sigma {sigma}");
    }

    #[test]
    fn ivol_gaps_are_skipped() {
        let est = vec![Some(0.5), None, Some(0.7)];
        let oracle = vec![Some(0.5), Some(0.9), None];
        let report = compute_metrics(None, Some((&est, &oracle)), 1.0, 10).unwrap();
        assert_eq!(report.rmse_ivol, Some(0.0));
    }
}
