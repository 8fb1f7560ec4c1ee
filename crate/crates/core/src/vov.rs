//! Vol-of-vol simulation: the Markovian CIR square-root process and the
//! non-Markovian rough log-TBSS variant, including the conditional-expectation
//! curve zeta_T that carries all time-T information in the rough case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{simulate_tbss, HybridScheme, RoughKernel};

/// CIR parameters of d Gamma = theta (m - Gamma) dt + delta sqrt(Gamma) dZ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    /// Mean-reversion speed (1/years).
    pub theta: f64,
    /// Long-run mean.
    pub m: f64,
    /// Diffusion coefficient.
    pub delta: f64,
    /// Initial value Gamma_0.
    pub gamma0: f64,
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta", self.theta),
            ("m", self.m),
            ("delta", self.delta),
            ("gamma0", self.gamma0),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::ConfigError(format!("cir.{name} = {v} must be >= 0 and finite")));
            }
        }
        Ok(())
    }

    /// E[Gamma_t] = m + (gamma0 - m) e^{-theta t}.
    pub fn mean_at(&self, t: f64) -> f64 {
        self.m + (self.gamma0 - self.m) * (-self.theta * t).exp()
    }
}

/// Rough vol-of-vol parameters: Gamma is a normalized log-TBSS with constant
/// intermittency nu and Hurst exponent `h_vov`, started at the flat curve
/// level zeta0 so that E[Gamma_s] = zeta0 for all s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughVovParams {
    pub nu: f64,
    pub h_vov: f64,
    pub zeta0: f64,
}

impl RoughVovParams {
    pub fn validate(&self) -> Result<()> {
        if !self.nu.is_finite() || self.nu < 0.0 {
            return Err(Error::ConfigError(format!("rough.nu = {} must be >= 0", self.nu)));
        }
        if !(self.h_vov > 0.0 && self.h_vov <= 0.5) {
            return Err(Error::ConfigError(format!(
                "rough.h_vov = {} outside (0, 1/2]",
                self.h_vov
            )));
        }
        if !(self.zeta0 > 0.0) || !self.zeta0.is_finite() {
            return Err(Error::ConfigError(format!("rough.zeta0 = {} must be > 0", self.zeta0)));
        }
        Ok(())
    }

    /// Martingale normalizer c(s) = E[exp(2 sqrt(nu) int_0^s (s-t)^{H'-1/2} dZ_t)]
    /// = exp(2 nu s^{2H'} / (2H')).
    pub fn normalizer(&self, s: f64) -> f64 {
        (2.0 * self.nu * s.powf(2.0 * self.h_vov) / (2.0 * self.h_vov)).exp()
    }

    /// q_T(u) = exp(2 nu ((u-T)^{2H'} - u^{2H'}) / (2H')), the deterministic
    /// factor of the conditional-expectation update.
    pub fn q_factor(&self, t: f64, u: f64) -> Result<f64> {
        if u < t {
            return Err(Error::DomainError(format!("q_T(u) requires u >= T, got u={u}, T={t}")));
        }
        let two_h = 2.0 * self.h_vov;
        Ok((2.0 * self.nu * ((u - t).powf(two_h) - u.powf(two_h)) / two_h).exp())
    }
}

/// Full-truncation Euler for the CIR process: the raw state may go negative,
/// drift and diffusion see its positive part, and the reported path is the
/// positive part. Path starts at gamma0 and has `dz.len() + 1` points.
pub fn simulate_cir(params: &CirParams, dz: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(dz.len() + 1);
    let mut raw = params.gamma0;
    out.push(raw.max(0.0));
    for &z in dz {
        let plus = raw.max(0.0);
        raw += params.theta * (params.m - plus) * dt + params.delta * plus.sqrt() * z;
        out.push(raw.max(0.0));
    }
    out
}

/// zeta_T(u) = zeta0 q_T(u) I_{0,T}(u) for u >= T, where `i_0t` is the realized
/// multiplicative factor exp(2 sqrt(nu) int_0^T (u-s)^{H'-1/2} dZ_s).
pub fn zeta_update(params: &RoughVovParams, t: f64, u: f64, i_0t: f64) -> Result<f64> {
    Ok(params.zeta0 * params.q_factor(t, u)? * i_0t)
}

/// Rough vol-of-vol path over a uniform grid plus the conditional curve at T.
#[derive(Debug, Clone)]
pub struct RoughVovPath {
    /// Gamma at grid points 0, dt, ..., n dt (n+1 values).
    pub gamma: Vec<f64>,
    /// zeta_T(u_j) at the requested targets beyond T.
    pub zeta_t: Vec<f64>,
}

/// Simulates Gamma_s = zeta0 I_{0,s}(s) / c(s) on the grid spanned by the
/// (dZ, dZ~) drivers, together with zeta_T at `targets` (all > T), where
/// T = cond_steps * dt.
///
/// The on-diagonal factors I_{0,s}(s) come from the hybrid scheme applied to
/// Z with constant intermittency; I_{0,T}(u) for u > T uses left-point
/// Riemann sums on [0, T].
pub fn simulate_rough_vov(
    params: &RoughVovParams,
    dz: &[f64],
    z_tilde: &[f64],
    dt: f64,
    cond_steps: usize,
    targets: &[f64],
) -> Result<RoughVovPath> {
    params.validate()?;
    let n = dz.len();
    if cond_steps > n {
        return Err(Error::ShapeMismatch(format!(
            "conditioning step {cond_steps} beyond the {n}-step grid"
        )));
    }
    let kernel = RoughKernel::new(params.h_vov)?;
    let scheme = HybridScheme::new(kernel, dt, n)?;
    let nu_path = vec![params.nu; n];
    let tbss = simulate_tbss(&nu_path, dz, z_tilde, &scheme)?;

    let mut gamma = Vec::with_capacity(n + 1);
    gamma.push(params.zeta0);
    for i in 1..=n {
        let s = i as f64 * dt;
        gamma.push(params.zeta0 * tbss.e[i - 1] / params.normalizer(s));
    }

    let t_cond = cond_steps as f64 * dt;
    let zeta_t = if targets.is_empty() {
        Vec::new()
    } else if cond_steps == 0 {
        // no information at T = 0: the curve is flat at zeta0
        vec![params.zeta0; targets.len()]
    } else {
        let table = crate::kernel::ForwardFactorTable::new(&kernel, 0.0, t_cond, cond_steps, targets)?;
        let i_factors = table.e_factors(&nu_path[..cond_steps], &dz[..cond_steps])?;
        targets
            .iter()
            .zip(&i_factors)
            .map(|(&u, &i0t)| zeta_update(params, t_cond, u, i0t))
            .collect::<Result<Vec<f64>>>()?
    };

    Ok(RoughVovPath { gamma, zeta_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean, standard_error};
    use crate::paths::{build_correlation, CorrelationSpec, PathGenerator};

    fn base_cir() -> CirParams {
        CirParams { theta: 0.4, m: 0.8125, delta: 0.8, gamma0: 0.05 }
    }

    #[test]
    fn cir_with_zero_diffusion_tracks_the_ode() {
        let params = CirParams { delta: 0.0, ..base_cir() };
        let dt = 1.0 / 2555.0;
        let n = 49;
        let path = simulate_cir(&params, &vec![0.0; n], dt);
        for (i, &g) in path.iter().enumerate() {
            let exact = params.mean_at(i as f64 * dt);
            assert!(
                (g - exact).abs() < 5.0 * dt,
                "Euler drift error too large at step {i}: {g} vs {exact}"
            );
        }
    }

    #[test]
    fn cir_mean_matches_closed_form_at_one_week() {
        let params = base_cir();
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let dt = 1.0 / 2555.0;
        let n = 49;
        let gen = PathGenerator::new(31, n, dt, 0.1, &f, None).unwrap();
        let n_paths = 10_000;
        let mut terminal = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            let drivers = gen.path(p as u64);
            let path = simulate_cir(&params, &drivers.dz, dt);
            terminal.push(path[n]);
        }
        // closed-form CIR mean at t = 7/365, frozen from the analytic formula
        let want = 0.055826936599508;
        assert!((params.mean_at(7.0 / 365.0) - want).abs() < 1e-12);
        let m = mean(&terminal);
        let se = standard_error(&terminal);
        assert!((m - want).abs() < 3.0 * se, "mean {m}, want {want} +- {}", 3.0 * se);
    }

    #[test]
    fn cir_path_is_nonnegative_for_stress_parameters() {
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        // large delta forces frequent truncation
        let params = CirParams { theta: 0.4, m: 0.05, delta: 3.0, gamma0: 0.01 };
        let dt = 1.0 / 365.0;
        let gen = PathGenerator::new(37, 120, dt, 0.1, &f, None).unwrap();
        for p in 0..200 {
            let drivers = gen.path(p);
            let path = simulate_cir(&params, &drivers.dz, dt);
            assert!(path.iter().all(|&g| g >= 0.0));
        }
    }

    #[test]
    fn rough_vov_with_zero_nu_is_constant() {
        let params = RoughVovParams { nu: 0.0, h_vov: 0.1, zeta0: 0.05 };
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let n = 49;
        let dt = 1.0 / 2555.0;
        let gen = PathGenerator::new(41, n, dt, 0.1, &f, Some(0.1)).unwrap();
        let d = gen.path(0);
        let targets = [0.03, 0.05];
        let out = simulate_rough_vov(&params, &d.dz, d.z_tilde.as_ref().unwrap(), dt, n, &targets)
            .unwrap();
        assert!(out.gamma.iter().all(|&g| (g - 0.05).abs() < 1e-14));
        assert!(out.zeta_t.iter().all(|&z| (z - 0.05).abs() < 1e-14));
    }

    #[test]
    fn rough_vov_conditioning_at_zero_returns_flat_curve() {
        let params = RoughVovParams { nu: 0.3, h_vov: 0.1, zeta0: 0.05 };
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let dt = 1.0 / 2555.0;
        let gen = PathGenerator::new(43, 8, dt, 0.1, &f, Some(0.1)).unwrap();
        let d = gen.path(0);
        let out = simulate_rough_vov(&params, &d.dz, d.z_tilde.as_ref().unwrap(), dt, 0, &[0.01])
            .unwrap();
        assert!((out.zeta_t[0] - params.zeta0).abs() < 1e-15);
    }

    #[test]
    fn rough_vov_martingale_normalization() {
        // E[Gamma_u] = zeta0 at every grid point, and E[zeta_T(u)] = zeta0
        let params = RoughVovParams { nu: 0.05, h_vov: 0.1, zeta0: 0.05 };
        let f = build_correlation(&CorrelationSpec::independent()).unwrap();
        let n = 49;
        let dt = 1.0 / 2555.0;
        let t = n as f64 * dt;
        let gen = PathGenerator::new(47, n, dt, 0.1, &f, Some(params.h_vov)).unwrap();
        let n_paths = 10_000;
        let targets = [t + 10.0 / 365.0, t + 30.0 / 365.0];
        let mut gam_mid = Vec::with_capacity(n_paths);
        let mut gam_end = Vec::with_capacity(n_paths);
        let mut zetas = vec![Vec::with_capacity(n_paths); targets.len()];
        for p in 0..n_paths {
            let d = gen.path(p as u64);
            let out =
                simulate_rough_vov(&params, &d.dz, d.z_tilde.as_ref().unwrap(), dt, n, &targets)
                    .unwrap();
            gam_mid.push(out.gamma[n / 2]);
            gam_end.push(out.gamma[n]);
            for (j, z) in out.zeta_t.iter().enumerate() {
                zetas[j].push(*z);
            }
        }
        for vals in [&gam_mid, &gam_end, &zetas[0], &zetas[1]] {
            let m = mean(vals);
            let se = standard_error(vals);
            assert!(
                (m - params.zeta0).abs() < 3.0 * se,
                "tower property violated: mean {m} vs {} +- {}",
                params.zeta0,
                3.0 * se
            );
        }
    }

    #[test]
    fn q_factor_closed_forms() {
        let params = RoughVovParams { nu: 0.3, h_vov: 0.1, zeta0: 0.05 };
        // T = 0 and nu = 0 give q = 1
        assert!((params.q_factor(0.0, 0.07).unwrap() - 1.0).abs() < 1e-15);
        let p0 = RoughVovParams { nu: 0.0, ..params };
        assert!((p0.q_factor(0.02, 0.07).unwrap() - 1.0).abs() < 1e-15);
        // H' = 1/2: q = exp(-2 nu T) independent of u
        let ph = RoughVovParams { h_vov: 0.5, ..params };
        let t = 0.02;
        let want = (-2.0 * ph.nu * t).exp();
        for &u in &[0.03, 0.05, 0.5] {
            assert!((ph.q_factor(t, u).unwrap() - want).abs() < 1e-14);
        }
        assert!(matches!(params.q_factor(0.05, 0.01), Err(Error::DomainError(_))));
    }
}
