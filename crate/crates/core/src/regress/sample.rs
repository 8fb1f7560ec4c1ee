//! Stratified selection of regression training paths: evenly spaced bins over
//! the predictor range guarantee coverage of sparse tails, and the remaining
//! quota is drawn uniformly so the marginal distribution is preserved.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::derive_seed;

const SAMPLE_STREAM: u64 = 0x73747261; // "stra"

/// Selects `n` of the `values.len()` indices: each nonempty bin first
/// contributes up to `per_bin_goal` indices drawn without replacement, then
/// the remaining quota is drawn uniformly without replacement from the rest.
pub fn stratified_sample(
    values: &[f64],
    n: usize,
    n_bins: usize,
    per_bin_goal: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let k = values.len();
    if n > k {
        return Err(Error::InvalidBudget(format!("requested {n} of {k} available paths")));
    }
    if n_bins == 0 {
        return Err(Error::InvalidBudget("n_bins must be at least 1".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLE_STREAM, 0));

    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let width = hi - lo;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &v) in values.iter().enumerate() {
        let b = if width > 0.0 {
            (((v - lo) / width) * n_bins as f64).floor().min(n_bins as f64 - 1.0) as usize
        } else {
            0
        };
        bins[b].push(i);
    }

    let mut chosen = Vec::with_capacity(n);
    let mut taken = vec![false; k];
    for bin in bins.iter_mut() {
        if bin.is_empty() || per_bin_goal == 0 {
            continue;
        }
        bin.shuffle(&mut rng);
        for &idx in bin.iter().take(per_bin_goal) {
            chosen.push(idx);
            taken[idx] = true;
        }
    }
    // an oversized goal can overrun the budget; keep a uniform subset
    if chosen.len() > n {
        chosen.shuffle(&mut rng);
        for &idx in &chosen[n..] {
            taken[idx] = false;
        }
        chosen.truncate(n);
    }
    if chosen.len() < n {
        let mut rest: Vec<usize> = (0..k).filter(|&i| !taken[i]).collect();
        rest.shuffle(&mut rng);
        chosen.extend(rest.into_iter().take(n - chosen.len()));
    }
    Ok(chosen)
}
