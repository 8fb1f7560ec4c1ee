//! Rough kernel evaluation and simulation of the stochastic integral
//! X_u = int_0^u (u-s)^{H-1/2} sqrt(Gamma_s) dW_s.
//!
//! Two discretizations are used, mirroring the singular / smooth split of the
//! kernel:
//!
//! * on-diagonal values X_{t_i} (kernel singular at s = t_i) use the hybrid
//!   scheme with one exact near-singularity term: the most recent step is the
//!   exact power-kernel Wiener integral dW~, and earlier steps are Riemann
//!   terms evaluated at the optimal points b_k;
//! * the forward factors E_{p,q}(u) = exp(2 int_p^q (u-s)^{H-1/2} sqrt(Gamma_s) dW_s)
//!   for u > q, where the kernel is bounded, use plain left-point Riemann sums.

use crate::error::{Error, Result};

/// Power kernel g_u(s) = (u-s)^{H-1/2} with cached exponent.
#[derive(Debug, Clone, Copy)]
pub struct RoughKernel {
    h: f64,
    alpha: f64,
}

impl RoughKernel {
    /// `h` in (0, 1/2); `h = 1/2` is accepted as the degenerate Brownian case.
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::DomainError(format!("Hurst H = {h} outside (0, 1/2]")));
        }
        Ok(Self { h, alpha: h - 0.5 })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// H - 1/2, the kernel exponent.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, u: f64, s: f64) -> Result<f64> {
        kernel_g(u, s, self.h)
    }
}

/// g_u(s) = (u-s)^{H-1/2} for s < u.
pub fn kernel_g(u: f64, s: f64, h: f64) -> Result<f64> {
    if s >= u {
        return Err(Error::DomainError(format!("kernel requires s < u, got s={s}, u={u}")));
    }
    Ok((u - s).powf(h - 0.5))
}

/// Analytic covariance of the pair (dW, dW~) over a step of length `dt`:
/// [[dt, dt^{H+1/2}/(H+1/2)], [., dt^{2H}/(2H)]].
pub fn hybrid_cov(dt: f64, h: f64) -> Result<[[f64; 2]; 2]> {
    if dt <= 0.0 {
        return Err(Error::DomainError(format!("dt = {dt} must be positive")));
    }
    let c = dt.powf(h + 0.5) / (h + 0.5);
    Ok([[dt, c], [c, dt.powf(2.0 * h) / (2.0 * h)]])
}

/// Optimal kernel evaluation point for the k-th Riemann term of the hybrid
/// scheme: b_k = ((k^{a+1} - (k-1)^{a+1})/(a+1))^{1/a}, k >= 2.
pub fn hybrid_b(k: usize, alpha: f64) -> f64 {
    debug_assert!(k >= 2);
    debug_assert!(alpha > -0.5 && alpha < 0.0);
    let kf = k as f64;
    (((kf).powf(alpha + 1.0) - (kf - 1.0).powf(alpha + 1.0)) / (alpha + 1.0)).powf(1.0 / alpha)
}

/// Precomputed hybrid-scheme weights for a uniform grid: w[k] = g(b_k dt) for
/// k = 2..=n (index 0 and 1 unused). Immutable, shared across paths.
#[derive(Debug, Clone)]
pub struct HybridScheme {
    kernel: RoughKernel,
    dt: f64,
    weights: Vec<f64>,
}

impl HybridScheme {
    pub fn new(kernel: RoughKernel, dt: f64, n_steps: usize) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::DomainError(format!("dt = {dt} must be positive")));
        }
        let alpha = kernel.alpha();
        let mut weights = vec![0.0; n_steps + 1];
        for (k, w) in weights.iter_mut().enumerate().skip(2) {
            *w = if alpha == 0.0 { 1.0 } else { (hybrid_b(k, alpha) * dt).powf(alpha) };
        }
        Ok(Self { kernel, dt, weights })
    }

    pub fn kernel(&self) -> &RoughKernel {
        &self.kernel
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Allocation-free core of [`simulate_tbss`]: writes X_{t_i} into
    /// `x[i-1]` for i = 1..=n given sqrt(Gamma) at left endpoints.
    ///
    /// The Riemann tail is accumulated source-major (for each source step j,
    /// an axpy over all later evaluation times), which keeps both slices in
    /// ascending order for vectorization.
    pub fn convolve_into(&self, sqrt_gamma: &[f64], dw: &[f64], w_tilde: &[f64], x: &mut [f64]) {
        let n = dw.len();
        debug_assert!(sqrt_gamma.len() >= n);
        debug_assert_eq!(w_tilde.len(), n);
        debug_assert_eq!(x.len(), n);
        // exact near-singularity term
        for i in 0..n {
            x[i] = sqrt_gamma[i] * w_tilde[i];
        }
        // x[i-1] += sum_{k=2..=i} w_k sqrt_gamma[i-k] dw[i-k]
        for j in 0..n.saturating_sub(1) {
            let c = sqrt_gamma[j] * dw[j];
            let tail = &mut x[j + 1..n];
            let w = &self.weights[2..2 + tail.len()];
            for (xv, wv) in tail.iter_mut().zip(w) {
                *xv += c * wv;
            }
        }
    }
}

/// On-diagonal TBSS values on a uniform grid: grid point t_i = i dt carries
/// X at t_i and E = exp(2X).
#[derive(Debug, Clone)]
pub struct TbssPath {
    pub grid: Vec<f64>,
    pub x: Vec<f64>,
    pub e: Vec<f64>,
}

/// Hybrid-scheme simulation of X_{t_i} for i = 1..=n given the vol-of-vol path
/// on left endpoints and the driving increments with their hybrid pairs.
///
/// X_{t_i} = sqrt(Gamma_{t_{i-1}}) dW~_i
///         + sum_{k=2}^{i} g(b_k dt) sqrt(Gamma_{t_{i-k}}) dW_{i-k+1}.
pub fn simulate_tbss(
    gamma_path: &[f64],
    dw: &[f64],
    w_tilde: &[f64],
    scheme: &HybridScheme,
) -> Result<TbssPath> {
    let n = dw.len();
    if w_tilde.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "dW has {n} steps, dW~ has {}",
            w_tilde.len()
        )));
    }
    if gamma_path.len() < n {
        return Err(Error::ShapeMismatch(format!(
            "gamma path has {} values, need at least {n} left endpoints",
            gamma_path.len()
        )));
    }
    if scheme.weights.len() < n + 1 {
        return Err(Error::ShapeMismatch(format!(
            "hybrid scheme sized for {} steps, need {n}",
            scheme.weights.len().saturating_sub(1)
        )));
    }
    let dt = scheme.dt;
    let sqrt_gamma: Vec<f64> = gamma_path[..n].iter().map(|g| g.max(0.0).sqrt()).collect();
    let mut x = vec![0.0; n];
    scheme.convolve_into(&sqrt_gamma, dw, w_tilde, &mut x);
    let e = x.iter().map(|v| (2.0 * v).exp()).collect();
    let grid = (1..=n).map(|i| i as f64 * dt).collect();
    Ok(TbssPath { grid, x, e })
}

/// Left-point Riemann weights (u_j - t_i)^{H-1/2} for targets u_j beyond the
/// right end of the integration window [p, q]. Built once per grid and shared
/// across paths.
#[derive(Debug, Clone)]
pub struct ForwardFactorTable {
    n_steps: usize,
    targets: Vec<f64>,
    weights: Vec<f64>, // targets.len() x n_steps, row-major
}

impl ForwardFactorTable {
    /// Window [p, q] split into `n_steps` uniform steps; every target must
    /// exceed q.
    pub fn new(kernel: &RoughKernel, p: f64, q: f64, n_steps: usize, targets: &[f64]) -> Result<Self> {
        if !(q > p) || n_steps == 0 {
            return Err(Error::DomainError(format!(
                "integration window [{p}, {q}] with {n_steps} steps is empty"
            )));
        }
        let dt = (q - p) / n_steps as f64;
        let mut weights = vec![0.0; targets.len() * n_steps];
        for (j, &u) in targets.iter().enumerate() {
            if u <= q {
                return Err(Error::DomainError(format!(
                    "target u = {u} must exceed the window end q = {q}"
                )));
            }
            for i in 0..n_steps {
                let t_i = p + i as f64 * dt;
                weights[j * n_steps + i] = (u - t_i).powf(kernel.alpha());
            }
        }
        Ok(Self { n_steps, targets: targets.to_vec(), weights })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// E_{p,q}(u_j) = exp(2 sum_i (u_j - t_i)^{H-1/2} sqrt(Gamma_{t_i}) dW_{i+1})
    /// for one path. `gamma_path` holds left-endpoint values.
    pub fn e_factors(&self, gamma_path: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
        if dw.len() != self.n_steps || gamma_path.len() < self.n_steps {
            return Err(Error::ShapeMismatch(format!(
                "window has {} steps, got {} increments / {} gamma values",
                self.n_steps,
                dw.len(),
                gamma_path.len()
            )));
        }
        let integrand: Vec<f64> = (0..self.n_steps)
            .map(|i| gamma_path[i].max(0.0).sqrt() * dw[i])
            .collect();
        let mut out = vec![0.0; self.targets.len()];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights[j * self.n_steps..(j + 1) * self.n_steps];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(&integrand) {
                acc += w * v;
            }
            *o = (2.0 * acc).exp();
        }
        Ok(out)
    }
}

/// One-shot convenience over [`ForwardFactorTable`] for a single path.
pub fn riemann_e(
    kernel: &RoughKernel,
    gamma_path: &[f64],
    dw: &[f64],
    p: f64,
    q: f64,
    targets: &[f64],
) -> Result<Vec<f64>> {
    let table = ForwardFactorTable::new(kernel, p, q, dw.len(), targets)?;
    table.e_factors(gamma_path, dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean, standard_error, variance};
    use crate::paths::{build_correlation, CorrelationSpec, PathGenerator};

    fn flat_gamma(n: usize, level: f64) -> Vec<f64> {
        vec![level; n]
    }

    #[test]
    fn kernel_g_known_values() {
        assert!((kernel_g(3.0, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((kernel_g(2.0, 1.0, 0.1).unwrap() - 1.0).abs() < 1e-15);
        // 0.25^{-0.4}, evaluated independently to 12 digits
        assert!((kernel_g(1.0, 0.75, 0.1).unwrap() - 1.741101126592).abs() < 1e-9);
        assert!(matches!(kernel_g(1.0, 1.0, 0.1), Err(Error::DomainError(_))));
        assert!(matches!(kernel_g(1.0, 2.0, 0.1), Err(Error::DomainError(_))));
    }

    #[test]
    fn hybrid_cov_closed_forms() {
        let c = hybrid_cov(0.37, 0.5).unwrap();
        for row in &c {
            for v in row {
                assert!((v - 0.37).abs() < 1e-15);
            }
        }
        let c = hybrid_cov(1.0, 0.1).unwrap();
        assert!((c[1][1] - 5.0).abs() < 1e-12);
        assert!((c[0][1] - 1.0 / 0.6).abs() < 1e-12);
        assert!((c[0][1] - c[1][0]).abs() < 1e-15);
    }

    #[test]
    fn hybrid_cov_is_positive_semidefinite() {
        // 2x2 PSD iff trace >= 0 and det >= 0; scan a parameter grid.
        for &dt in &[1e-4, 1.0 / 2555.0, 1.0 / 365.0, 0.1, 1.0] {
            for &h in &[0.05, 0.1, 0.25, 0.4, 0.499, 0.5] {
                let c = hybrid_cov(dt, h).unwrap();
                let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
                assert!(c[0][0] + c[1][1] >= 0.0);
                assert!(det >= -1e-18, "det = {det} at dt={dt}, H={h}");
            }
        }
    }

    #[test]
    fn hybrid_b_frozen_values_and_bounds() {
        // direct evaluation of the closed formula, frozen at 12 digits
        assert!((hybrid_b(2, -0.4) - 1.459991809678).abs() < 1e-9);
        assert!((hybrid_b(2, -0.25) - 1.464317772453).abs() < 1e-9);
        assert!((hybrid_b(3, -0.4) - 2.476433702143).abs() < 1e-9);
        for &alpha in &[-0.45, -0.4, -0.25, -0.1, -0.01] {
            for k in 2..40 {
                let b = hybrid_b(k, alpha);
                assert!(b >= k as f64 - 1.0 && b <= k as f64, "b_{k}({alpha}) = {b}");
            }
        }
    }

    #[test]
    fn tbss_zero_gamma_gives_unit_factors() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let gen = PathGenerator::new(5, 32, 0.01, 0.1, &f, None).unwrap();
        let scheme = HybridScheme::new(RoughKernel::new(0.1).unwrap(), 0.01, 32).unwrap();
        let path = gen.path(0);
        let tbss = simulate_tbss(&flat_gamma(32, 0.0), &path.dw, &path.w_tilde, &scheme).unwrap();
        assert!(tbss.x.iter().all(|&v| v == 0.0));
        assert!(tbss.e.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tbss_degenerates_to_brownian_sums_at_half() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let gen = PathGenerator::new(6, 64, 0.01, 0.5, &f, None).unwrap();
        let scheme = HybridScheme::new(RoughKernel::new(0.5).unwrap(), 0.01, 64).unwrap();
        let gamma = 0.37;
        let path = gen.path(3);
        let tbss = simulate_tbss(&flat_gamma(64, gamma), &path.dw, &path.w_tilde, &scheme).unwrap();
        let mut w = 0.0;
        for i in 0..64 {
            w += path.dw[i];
            assert!(
                (tbss.x[i] - gamma.sqrt() * w).abs() < 1e-12,
                "exact Brownian equality fails at step {i}"
            );
        }
    }

    #[test]
    fn tbss_variance_matches_ito_isometry() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let (h, dt, n, gamma) = (0.1, 1.0 / 2555.0, 210usize, 0.05);
        let gen = PathGenerator::new(7, n, dt, h, &f, None).unwrap();
        let scheme = HybridScheme::new(RoughKernel::new(h).unwrap(), dt, n).unwrap();
        let n_paths = 10_000;
        let mut x_end = Vec::with_capacity(n_paths);
        let mut mid = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            let path = gen.path(p as u64);
            let tbss = simulate_tbss(&flat_gamma(n, gamma), &path.dw, &path.w_tilde, &scheme).unwrap();
            x_end.push(tbss.x[n - 1]);
            mid.push(tbss.x[n / 2 - 1]);
        }
        for (vals, i) in [(&x_end, n), (&mid, n / 2)] {
            let u = i as f64 * dt;
            let want = gamma * u.powf(2.0 * h) / (2.0 * h);
            let var = variance(vals);
            let se = var * (2.0 / (n_paths as f64 - 1.0)).sqrt();
            assert!(
                (var - want).abs() < 3.0 * se,
                "Var(X_u) = {var}, analytic {want} +- {}",
                3.0 * se
            );
        }
    }

    #[test]
    fn riemann_zero_gamma_and_single_step() {
        let kernel = RoughKernel::new(0.1).unwrap();
        let out = riemann_e(&kernel, &[0.0, 0.0], &[0.3, -0.2], 0.0, 0.02, &[0.05, 0.08]).unwrap();
        assert!(out.iter().all(|&v| v == 1.0));

        // single step: E = exp(2 sqrt(gamma) (u-p)^{H-1/2} dW)
        let (gamma, dw, p, q, u) = (0.25, 0.41, 0.0, 0.01, 0.05);
        let out = riemann_e(&kernel, &[gamma], &[dw], p, q, &[u]).unwrap();
        let want = (2.0 * gamma.sqrt() * (u - p).powf(-0.4) * dw).exp();
        assert!((out[0] - want).abs() < 1e-14);
    }

    #[test]
    fn riemann_rejects_targets_inside_window() {
        let kernel = RoughKernel::new(0.1).unwrap();
        let r = riemann_e(&kernel, &[0.1], &[0.0], 0.0, 0.01, &[0.01]);
        assert!(matches!(r, Err(Error::DomainError(_))));
        let r = riemann_e(&kernel, &[0.1], &[0.0], 0.0, 0.01, &[0.005]);
        assert!(matches!(r, Err(Error::DomainError(_))));
    }

    #[test]
    fn riemann_log_moments_match_gaussian_theory() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let (h, gamma) = (0.1, 0.05);
        let t = 7.0 / 365.0;
        let n = 49usize;
        let dt = t / n as f64;
        let u = t + 15.0 / 365.0;
        let kernel = RoughKernel::new(h).unwrap();
        let table = ForwardFactorTable::new(&kernel, 0.0, t, n, &[u]).unwrap();
        let gen = PathGenerator::new(11, n, dt, h, &f, None).unwrap();
        let n_paths = 20_000;
        let mut logs = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            let path = gen.path(p as u64);
            let e = table.e_factors(&flat_gamma(n, gamma), &path.dw).unwrap();
            logs.push(e[0].ln());
        }
        // mean 0
        assert!(mean(&logs).abs() < 3.0 * standard_error(&logs));
        // exact variance of the discrete sum: 4 gamma sum_i (u - t_i)^{2H-1} dt
        let mut disc = 0.0;
        for i in 0..n {
            let t_i = i as f64 * dt;
            disc += (u - t_i).powf(2.0 * h - 1.0) * dt;
        }
        let want_disc = 4.0 * gamma * disc;
        let var = variance(&logs);
        let se = var * (2.0 / (n_paths as f64 - 1.0)).sqrt();
        assert!(
            (var - want_disc).abs() < 3.0 * se,
            "Var(log E) = {var}, discrete oracle {want_disc} +- {}",
            3.0 * se
        );
        // and the continuous integral 4 gamma (u^{2H} - (u-T)^{2H})/(2H) is close
        let want_cont = 4.0 * gamma * (u.powf(2.0 * h) - (u - t).powf(2.0 * h)) / (2.0 * h);
        assert!((want_disc - want_cont).abs() / want_cont < 0.02);
    }

    #[test]
    fn riemann_degenerates_to_brownian_sum_at_half() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let kernel = RoughKernel::new(0.5).unwrap();
        let n = 16;
        let dt = 0.01;
        let gen = PathGenerator::new(13, n, dt, 0.5, &f, None).unwrap();
        let path = gen.path(0);
        let gamma = 0.6;
        let out = riemann_e(&kernel, &flat_gamma(n, gamma), &path.dw, 0.0, n as f64 * dt, &[0.5])
            .unwrap();
        let sum: f64 = path.dw.iter().sum();
        let want = (2.0 * gamma.sqrt() * sum).exp();
        assert!((out[0] - want).abs() < 1e-12 * want);
    }

    #[test]
    fn riemann_refinement_changes_at_first_order() {
        // halving dt should roughly halve the per-path refinement change
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let kernel = RoughKernel::new(0.1).unwrap();
        let t = 7.0 / 365.0;
        let u = t + 10.0 / 365.0;
        let gamma = 0.05;
        let n0 = 28usize;
        let n_paths = 4_000;
        let mut diffs = [Vec::new(), Vec::new()];
        let fine_steps = n0 * 4;
        let dt_fine = t / fine_steps as f64;
        let gen = PathGenerator::new(17, fine_steps, dt_fine, 0.1, &f, None).unwrap();
        for p in 0..n_paths {
            let fine = gen.path(p as u64);
            // aggregate increments to the two coarser grids
            let agg = |factor: usize| -> Vec<f64> {
                fine.dw.chunks(factor).map(|c| c.iter().sum()).collect()
            };
            let levels = [agg(4), agg(2), fine.dw.clone()];
            let mut es = Vec::new();
            for dw in &levels {
                let g = flat_gamma(dw.len(), gamma);
                let e = riemann_e(&kernel, &g, dw, 0.0, t, &[u]).unwrap();
                es.push(e[0].ln());
            }
            diffs[0].push(es[1] - es[0]);
            diffs[1].push(es[2] - es[1]);
        }
        let sd0 = variance(&diffs[0]).sqrt();
        let sd1 = variance(&diffs[1]).sqrt();
        let ratio = sd0 / sd1;
        assert!((1.4..3.0).contains(&ratio), "refinement ratio {ratio} not first order");
    }
}
