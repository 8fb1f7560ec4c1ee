//! Small numeric utilities shared across the engine: deterministic reductions,
//! a dense Cholesky for low-dimensional covariance factors, and seed derivation.

/// Pairwise (cascade) summation. Fixed reduction order, so results are
/// reproducible across runs and thread counts, with O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n if n <= 32 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance (n-1 denominator).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

pub fn sample_correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = pairwise_sum(&prods) / (x.len() - 1) as f64;
    cov / (variance(x) * variance(y)).sqrt()
}

/// Dense Cholesky factorization of a symmetric positive definite matrix stored
/// row-major. Returns the lower factor, or `None` when a pivot is not strictly
/// positive.
pub fn cholesky_lower(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + j] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn solve_spd(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky_lower(n, a)?;
    let mut y = b.to_vec();
    // forward substitution L y = b
    for i in 0..n {
        for k in 0..i {
            y[i] = y[i] - l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    // back substitution L^T x = y
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] = y[i] - l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}

/// Streaming pairwise accumulator for vectors of fixed width: a binary-counter
/// merge tree, so the reduction order depends only on the insertion order and
/// memory stays at O(width log n). Level buffers are recycled; steady-state
/// pushes do not allocate.
#[derive(Debug, Clone)]
pub struct VecPairwise {
    levels: Vec<(bool, Vec<f64>)>,
    scratch: Vec<f64>,
    width: usize,
    count: usize,
}

impl VecPairwise {
    pub fn new(width: usize) -> Self {
        Self { levels: Vec::new(), scratch: vec![0.0; width], width, count: 0 }
    }

    pub fn push(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.width);
        self.scratch.copy_from_slice(v);
        let mut level = 0;
        loop {
            if level == self.levels.len() {
                self.levels.push((true, self.scratch.clone()));
                break;
            }
            let (occupied, buf) = &mut self.levels[level];
            if !*occupied {
                buf.copy_from_slice(&self.scratch);
                *occupied = true;
                break;
            }
            for (c, s) in self.scratch.iter_mut().zip(buf.iter()) {
                *c += s;
            }
            *occupied = false;
            level += 1;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Column sums, folding the open levels from fine to coarse.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (occupied, buf) in &self.levels {
            if *occupied {
                for (o, v) in out.iter_mut().zip(buf) {
                    *o += v;
                }
            }
        }
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = self.total();
        let inv = 1.0 / self.count as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
        out
    }
}

const MIX_STREAM: u64 = 0xA076_1D64_78BD_642F;
const MIX_INDEX: u64 = 0xE703_7ED1_A0B4_28DB;

/// SplitMix64 finalizer, the standard 64-bit avalanche mix.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based seed derivation: a pure function of (master, stream, index),
/// so per-path generators can be created in any order or in parallel.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let s = splitmix64(master ^ stream.wrapping_mul(MIX_STREAM));
    splitmix64(s ^ index.wrapping_mul(MIX_INDEX))
}
