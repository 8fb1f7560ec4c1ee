//! Correlated Gaussian driver generation.
//!
//! Produces, per path and per step, the Brownian increments (dB, dW, dZ) of the
//! price / volatility / vol-of-vol drivers together with the power-kernel
//! Wiener integral dW~ = int_{t_i}^{t_{i+1}} (t_{i+1}-s)^{H-1/2} dW_s that the
//! hybrid scheme pairs with dW. Everything is a pure function of
//! (seed, path index), so paths can be generated in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{cholesky_lower, derive_seed};

/// Correlation triple of the (B, W, Z) driver: price-vol, price-vol-of-vol,
/// vol-vol-of-vol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub rho: f64,
    pub rho_s: f64,
    pub rho_v: f64,
}

impl CorrelationSpec {
    pub fn independent() -> Self {
        Self { rho: 0.0, rho_s: 0.0, rho_v: 0.0 }
    }

    /// Determinant of the 3x3 correlation matrix.
    pub fn determinant(&self) -> f64 {
        1.0 - self.rho * self.rho
            - self.rho_s * self.rho_s
            - self.rho_v * self.rho_v
            + 2.0 * self.rho * self.rho_s * self.rho_v
    }
}

/// Lower-triangular factor L with L L^T equal to the 3x3 correlation matrix,
/// row order (B, W, Z).
#[derive(Debug, Clone)]
pub struct LowerTriangularFactor {
    l: [[f64; 3]; 3],
    spec: CorrelationSpec,
}

impl LowerTriangularFactor {
    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.l
    }

    pub fn spec(&self) -> &CorrelationSpec {
        &self.spec
    }
}

/// Factors the correlation matrix of `spec`, rejecting inadmissible triples.
pub fn build_correlation(spec: &CorrelationSpec) -> Result<LowerTriangularFactor> {
    for (name, v) in [("rho", spec.rho), ("rho_s", spec.rho_s), ("rho_v", spec.rho_v)] {
        if !v.is_finite() || v.abs() >= 1.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "{name} = {v} outside (-1, 1)"
            )));
        }
    }
    let det = spec.determinant();
    if det <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "determinant {det} <= 0 for (rho={}, rho_s={}, rho_v={})",
            spec.rho, spec.rho_s, spec.rho_v
        )));
    }
    let a = [
        1.0, spec.rho, spec.rho_s,
        spec.rho, 1.0, spec.rho_v,
        spec.rho_s, spec.rho_v, 1.0,
    ];
    let l = cholesky_lower(3, &a).ok_or_else(|| {
        Error::NotPositiveDefinite("correlation matrix failed Cholesky".to_string())
    })?;
    Ok(LowerTriangularFactor {
        l: [
            [l[0], 0.0, 0.0],
            [l[3], l[4], 0.0],
            [l[6], l[7], l[8]],
        ],
        spec: *spec,
    })
}

/// Gaussian drivers of a single path over a uniform grid: arrays of length
/// `n_steps`, entry `i` covering the step [t_i, t_{i+1}].
#[derive(Debug, Clone)]
pub struct PathDrivers {
    pub db: Vec<f64>,
    pub dw: Vec<f64>,
    pub dz: Vec<f64>,
    /// Hybrid pair of dW at Hurst H.
    pub w_tilde: Vec<f64>,
    /// Hybrid pair of dZ at the vol-of-vol Hurst, present only for rough
    /// vol-of-vol simulations.
    pub z_tilde: Option<Vec<f64>>,
}

/// A batch of paths with flat per-component storage; `slice(i)` of each
/// component array is the per-path view.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub db: Vec<f64>,
    pub dw: Vec<f64>,
    pub dz: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub z_tilde: Option<Vec<f64>>,
}

impl PathBatch {
    pub fn path_slice<'a>(&self, component: &'a [f64], path: usize) -> &'a [f64] {
        &component[path * self.n_steps..(path + 1) * self.n_steps]
    }
}

/// Seedable generator of correlated (dB, dW, dZ, dW~ [, dZ~]) step records.
///
/// The joint one-step law is exact: the factor below is the Cholesky of the
/// analytic covariance of the five Gaussian functionals, whose first three
/// rows coincide with sqrt(dt) times the 3x3 correlation factor and whose
/// dW~ row is the 2x2 conditional (hybrid) decomposition against dW.
#[derive(Debug, Clone)]
pub struct PathGenerator {
    seed: u64,
    stream: u64,
    n_steps: usize,
    dt: f64,
    dim: usize,
    factor: Vec<f64>,
    w_tilde_copies_dw: bool,
    has_z_tilde: bool,
    z_tilde_copies_dz: bool,
}

const STREAM_DEFAULT: u64 = 0x70617468; // "path"

fn power_cross_cov(dt: f64, h: f64) -> f64 {
    // Cov(dW, int (t-s)^{H-1/2} dW) over one step of length dt.
    dt.powf(h + 0.5) / (h + 0.5)
}

fn power_var(dt: f64, h: f64) -> f64 {
    dt.powf(2.0 * h) / (2.0 * h)
}

impl PathGenerator {
    /// `h` is the Hurst exponent of the dW~ pair; `h_vov`, when given, adds the
    /// dZ~ pair used by rough vol-of-vol simulation.
    pub fn new(
        seed: u64,
        n_steps: usize,
        dt: f64,
        h: f64,
        factor: &LowerTriangularFactor,
        h_vov: Option<f64>,
    ) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::DomainError(format!("dt = {dt} must be positive")));
        }
        if h <= 0.0 || h > 0.5 {
            return Err(Error::DomainError(format!("H = {h} outside (0, 1/2]")));
        }
        if let Some(hv) = h_vov {
            if hv <= 0.0 || hv > 0.5 {
                return Err(Error::DomainError(format!("H_vov = {hv} outside (0, 1/2]")));
            }
        }
        let spec = *factor.spec();
        let w_degenerate = h == 0.5;
        let z_degenerate = h_vov == Some(0.5);

        // Variable order: B, W, Z, then the non-degenerate power integrals.
        let mut dim = 3;
        let w_col = if w_degenerate { None } else { Some({ dim += 1; dim - 1 }) };
        let z_col = match h_vov {
            Some(_) if !z_degenerate => Some({ dim += 1; dim - 1 }),
            _ => None,
        };

        let mut cov = vec![0.0; dim * dim];
        let corr = [
            [1.0, spec.rho, spec.rho_s],
            [spec.rho, 1.0, spec.rho_v],
            [spec.rho_s, spec.rho_v, 1.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                cov[i * dim + j] = dt * corr[i][j];
            }
        }
        if let Some(wc) = w_col {
            let c = power_cross_cov(dt, h);
            // Cross-covariances with (dB, dZ) inherit the loadings of dW.
            let row = [spec.rho * c, c, spec.rho_v * c];
            for (j, v) in row.iter().enumerate() {
                cov[wc * dim + j] = *v;
                cov[j * dim + wc] = *v;
            }
            cov[wc * dim + wc] = power_var(dt, h);
        }
        if let Some(zc) = z_col {
            let hv = h_vov.unwrap();
            let c = power_cross_cov(dt, hv);
            let row = [spec.rho_s * c, spec.rho_v * c, c];
            for (j, v) in row.iter().enumerate() {
                cov[zc * dim + j] = *v;
                cov[j * dim + zc] = *v;
            }
            if let Some(wc) = w_col {
                let cross = spec.rho_v * dt.powf(h + hv) / (h + hv);
                cov[zc * dim + wc] = cross;
                cov[wc * dim + zc] = cross;
            }
            cov[zc * dim + zc] = power_var(dt, hv);
        }

        let factor = cholesky_lower(dim, &cov).ok_or_else(|| {
            Error::NotPositiveDefinite("joint step covariance failed Cholesky".to_string())
        })?;

        Ok(Self {
            seed,
            stream: STREAM_DEFAULT,
            n_steps,
            dt,
            dim,
            factor,
            w_tilde_copies_dw: w_degenerate,
            has_z_tilde: h_vov.is_some(),
            z_tilde_copies_dz: z_degenerate,
        })
    }

    /// Overrides the stream tag mixed into per-path seeds, separating e.g.
    /// outer and inner simulations that share a master seed.
    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Generates the drivers of path `index`. Pure function of
    /// (seed, stream, index); thread-safe.
    pub fn path(&self, index: u64) -> PathDrivers {
        let n = self.n_steps;
        let mut out = PathDrivers {
            db: vec![0.0; n],
            dw: vec![0.0; n],
            dz: vec![0.0; n],
            w_tilde: vec![0.0; n],
            z_tilde: if self.has_z_tilde { Some(vec![0.0; n]) } else { None },
        };
        self.path_into(index, &mut out);
        out
    }

    /// [`Self::path`] into caller-owned buffers (hot loops reuse them).
    pub fn path_into(&self, index: u64, drivers: &mut PathDrivers) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, self.stream, index));
        let n = self.n_steps;
        drivers.db.resize(n, 0.0);
        drivers.dw.resize(n, 0.0);
        drivers.dz.resize(n, 0.0);
        drivers.w_tilde.resize(n, 0.0);
        if self.has_z_tilde {
            drivers.z_tilde.get_or_insert_with(Vec::new).resize(n, 0.0);
        } else {
            drivers.z_tilde = None;
        }

        let dim = self.dim;
        let mut eps = [0.0f64; 5];
        let mut mixed = [0.0f64; 5];
        for i in 0..n {
            for e in eps.iter_mut().take(dim) {
                *e = StandardNormal.sample(&mut rng);
            }
            for r in 0..dim {
                let mut acc = 0.0;
                for c in 0..=r {
                    acc += self.factor[r * dim + c] * eps[c];
                }
                mixed[r] = acc;
            }
            drivers.db[i] = mixed[0];
            drivers.dw[i] = mixed[1];
            drivers.dz[i] = mixed[2];
            drivers.w_tilde[i] = if self.w_tilde_copies_dw { mixed[1] } else { mixed[3] };
            if let Some(zt) = drivers.z_tilde.as_mut() {
                zt[i] = if self.z_tilde_copies_dz { mixed[2] } else { mixed[dim - 1] };
            }
        }
    }
}

/// Materializes `n_paths` paths of correlated increments and hybrid pairs.
pub fn generate_batch(
    seed: u64,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    h: f64,
    factor: &LowerTriangularFactor,
) -> Result<PathBatch> {
    let gen = PathGenerator::new(seed, n_steps, dt, h, factor, None)?;
    let mut batch = PathBatch {
        n_paths,
        n_steps,
        dt,
        db: vec![0.0; n_paths * n_steps],
        dw: vec![0.0; n_paths * n_steps],
        dz: vec![0.0; n_paths * n_steps],
        w_tilde: vec![0.0; n_paths * n_steps],
        z_tilde: None,
    };
    for p in 0..n_paths {
        let drivers = gen.path(p as u64);
        let lo = p * n_steps;
        batch.db[lo..lo + n_steps].copy_from_slice(&drivers.db);
        batch.dw[lo..lo + n_steps].copy_from_slice(&drivers.dw);
        batch.dz[lo..lo + n_steps].copy_from_slice(&drivers.dz);
        batch.w_tilde[lo..lo + n_steps].copy_from_slice(&drivers.w_tilde);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::hybrid_cov;
    use crate::math::{mean, sample_correlation, standard_error, variance};

    #[test]
    fn identity_factor_for_zero_correlations() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((f.rows()[i][j] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dependent_triple_from_base_config_is_admissible() {
        // det = 1 - 0.9025 - 0.81 - 0.81 + 2(-0.95)(-0.9)(0.9) = 0.0165
        let spec = CorrelationSpec { rho: -0.95, rho_s: -0.9, rho_v: 0.9 };
        assert!((spec.determinant() - 0.0165).abs() < 1e-12);
        let f = build_correlation(&spec).unwrap();
        // reconstruct L L^T
        let l = f.rows();
        let mut sigma = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                sigma[i][j] = (0..3).map(|k| l[i][k] * l[j][k]).sum();
            }
        }
        assert!((sigma[0][1] - -0.95).abs() < 1e-12);
        assert!((sigma[0][2] - -0.9).abs() < 1e-12);
        assert!((sigma[1][2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn flipped_rho_v_is_rejected() {
        let spec = CorrelationSpec { rho: -0.95, rho_s: -0.9, rho_v: -0.9 };
        assert!(spec.determinant() < 0.0);
        match build_correlation(&spec) {
            Err(Error::NotPositiveDefinite(_)) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn entries_outside_open_interval_are_rejected() {
        let spec = CorrelationSpec { rho: 1.0, rho_s: 0.0, rho_v: 0.0 };
        assert!(matches!(build_correlation(&spec), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn same_seed_same_shape_is_bit_identical() {
        let f = build_correlation(&CorrelationSpec { rho: -0.5, rho_s: 0.2, rho_v: 0.3 }).unwrap();
        let a = generate_batch(7, 8, 16, 1.0 / 365.0, 0.1, &f).unwrap();
        let b = generate_batch(7, 8, 16, 1.0 / 365.0, 0.1, &f).unwrap();
        assert_eq!(a.dw, b.dw);
        assert_eq!(a.db, b.db);
        assert_eq!(a.dz, b.dz);
        assert_eq!(a.w_tilde, b.w_tilde);
        let c = generate_batch(8, 8, 16, 1.0 / 365.0, 0.1, &f).unwrap();
        assert_ne!(a.dw, c.dw);
    }

    #[test]
    fn paths_are_order_independent() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let gen = PathGenerator::new(3, 8, 0.01, 0.2, &f, None).unwrap();
        let p5 = gen.path(5);
        let p0 = gen.path(0);
        let p5_again = gen.path(5);
        assert_eq!(p5.dw, p5_again.dw);
        assert_ne!(p5.dw, p0.dw);
    }

    #[test]
    fn increment_variance_matches_dt() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let dt = 1.0 / 365.0;
        let batch = generate_batch(11, 100_000, 1, dt, 0.1, &f).unwrap();
        let var = variance(&batch.dw);
        // SE of the sample variance of a Gaussian: var * sqrt(2/(n-1))
        let se = var * (2.0 / (batch.dw.len() as f64 - 1.0)).sqrt();
        assert!(
            (var - dt).abs() < 3.0 * se,
            "Var(dW) = {var}, want {dt} +- {}",
            3.0 * se
        );
        assert!(mean(&batch.dw).abs() < 3.0 * standard_error(&batch.dw));
    }

    #[test]
    fn identity_factor_gives_uncorrelated_components() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let batch = generate_batch(13, 10_000, 1, 1.0 / 365.0, 0.1, &f).unwrap();
        let r = sample_correlation(&batch.dw, &batch.dz);
        // corr estimate SE ~ 1/sqrt(n)
        assert!(r.abs() < 3.0 / (batch.dw.len() as f64).sqrt(), "corr = {r}");
    }

    #[test]
    fn cross_correlations_converge_to_spec() {
        let spec = CorrelationSpec { rho: -0.95, rho_s: -0.9, rho_v: 0.9 };
        let f = build_correlation(&spec).unwrap();
        let batch = generate_batch(17, 20_000, 1, 1.0 / 365.0, 0.1, &f).unwrap();
        let n = batch.dw.len() as f64;
        for (x, y, want) in [
            (&batch.db, &batch.dw, spec.rho),
            (&batch.db, &batch.dz, spec.rho_s),
            (&batch.dw, &batch.dz, spec.rho_v),
        ] {
            let r = sample_correlation(x, y);
            // Fisher-style SE for a correlation estimate.
            let se = (1.0 - want * want) / n.sqrt();
            assert!((r - want).abs() < 3.0 * se, "corr = {r}, want {want} +- {}", 3.0 * se);
        }
    }

    #[test]
    fn hybrid_pair_covariance_matches_analytic() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let (dt, h) = (1.0 / 365.0, 0.1);
        let batch = generate_batch(19, 50_000, 1, dt, h, &f).unwrap();
        let cov_target = hybrid_cov(dt, h).unwrap();
        let prods: Vec<f64> = batch
            .dw
            .iter()
            .zip(&batch.w_tilde)
            .map(|(a, b)| a * b)
            .collect();
        let cov = mean(&prods);
        let se = standard_error(&prods);
        assert!(
            (cov - cov_target[0][1]).abs() < 3.0 * se,
            "Cov(dW, dW~) = {cov}, want {} +- {}",
            cov_target[0][1],
            3.0 * se
        );
        let var = variance(&batch.w_tilde);
        let se_var = var * (2.0 / (batch.w_tilde.len() as f64 - 1.0)).sqrt();
        assert!((var - cov_target[1][1]).abs() < 3.0 * se_var);
    }

    #[test]
    fn degenerate_hurst_copies_dw() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let batch = generate_batch(23, 4, 8, 0.01, 0.5, &f).unwrap();
        assert_eq!(batch.dw, batch.w_tilde);
    }

    #[test]
    fn rough_vov_pair_has_correct_cross_covariance() {
        let spec = CorrelationSpec { rho: -0.95, rho_s: -0.9, rho_v: 0.9 };
        let f = build_correlation(&spec).unwrap();
        let (dt, h, hv) = (1.0 / 365.0, 0.1, 0.2);
        let gen = PathGenerator::new(29, 1, dt, h, &f, Some(hv)).unwrap();
        let n = 50_000;
        let mut dz = Vec::with_capacity(n);
        let mut zt = Vec::with_capacity(n);
        let mut wt = Vec::with_capacity(n);
        for i in 0..n {
            let d = gen.path(i as u64);
            dz.push(d.dz[0]);
            wt.push(d.w_tilde[0]);
            zt.push(d.z_tilde.as_ref().unwrap()[0]);
        }
        // Cov(dZ, dZ~) = dt^{hv+1/2}/(hv+1/2)
        let want = dt.powf(hv + 0.5) / (hv + 0.5);
        let prods: Vec<f64> = dz.iter().zip(&zt).map(|(a, b)| a * b).collect();
        assert!((mean(&prods) - want).abs() < 3.0 * standard_error(&prods));
        // Cov(dW~, dZ~) = rho_v dt^{h+hv}/(h+hv)
        let want_cross = spec.rho_v * dt.powf(h + hv) / (h + hv);
        let prods2: Vec<f64> = wt.iter().zip(&zt).map(|(a, b)| a * b).collect();
        assert!((mean(&prods2) - want_cross).abs() < 3.0 * standard_error(&prods2));
    }
}
