//! Outer and inner simulation of the stochastic Volterra model state that VIX
//! pricing needs, and assembly of the forward variance curve from the
//! multiplicative decomposition
//!
//!   xi_T(u_j) = xi_0(u_j) / h_0(u_j) * E_{0,T}(u_j) * h_T(u_j).
//!
//! An outer path carries (Gamma_T, E_{0,T}(u_j)) and, for rough vol-of-vol,
//! the conditional curve zeta_T(u_j). Inner paths estimate h_T(u_j) by
//! averaging E_{T,u_j}(u_j) over fresh simulations conditioned on that state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ForwardFactorTable, HybridScheme, RoughKernel};
use crate::math::{derive_seed, VecPairwise};
use crate::paths::{build_correlation, CorrelationSpec, PathGenerator};
use crate::vov::{simulate_cir, simulate_rough_vov, CirParams, RoughVovParams};

pub const STREAM_OUTER: u64 = 0x6f757465; // "oute"
pub const STREAM_INNER: u64 = 0x696e6e65; // "inne"
pub const STREAM_INNER_OF_OUTER: u64 = 0x6e657374; // "nest"

/// Simulation grid: option maturity T, VIX horizon Delta, and the per-day
/// resolution n_d. Both the outer grid on [0, T] and the inner grid
/// u_j = T + j/(365 n_d), j = 1..30 n_d, share the spacing 1/(365 n_d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Option maturity in years.
    pub t: f64,
    /// VIX horizon in years (30 days by convention).
    pub delta: f64,
    /// Grid points per day.
    pub n_d: usize,
}

impl GridSpec {
    pub fn base() -> Self {
        Self { t: 7.0 / 365.0, delta: 30.0 / 365.0, n_d: 7 }
    }

    pub fn dt(&self) -> f64 {
        1.0 / (365.0 * self.n_d as f64)
    }

    fn steps_of(&self, span: f64, name: &str) -> Result<usize> {
        let raw = span * 365.0 * self.n_d as f64;
        let rounded = raw.round();
        if rounded < 1.0 || (raw - rounded).abs() > 1e-6 {
            return Err(Error::ConfigError(format!(
                "{name} = {span} years is not a positive whole number of grid steps (steps = {raw})"
            )));
        }
        Ok(rounded as usize)
    }

    /// Steps of the outer grid on [0, T].
    pub fn n_outer(&self) -> Result<usize> {
        self.steps_of(self.t, "grid.t")
    }

    /// Points of the inner grid on (T, T + Delta].
    pub fn n_inner(&self) -> Result<usize> {
        self.steps_of(self.delta, "grid.delta")
    }

    /// u_j = T + j/(365 n_d) for j = 1..=n_inner; the last point is T + Delta.
    pub fn inner_grid(&self) -> Result<Vec<f64>> {
        let n = self.n_inner()?;
        let denom = 365.0 * self.n_d as f64;
        Ok((1..=n).map(|j| self.t + j as f64 / denom).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_d == 0 {
            return Err(Error::ConfigError("grid.n_d must be at least 1".into()));
        }
        self.n_outer()?;
        self.n_inner()?;
        Ok(())
    }
}

/// Vol-of-vol dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VovSpec {
    Cir(CirParams),
    Rough(RoughVovParams),
}

impl VovSpec {
    pub fn is_rough(&self) -> bool {
        matches!(self, VovSpec::Rough(_))
    }

    /// Initial vol-of-vol value.
    pub fn gamma0(&self) -> f64 {
        match self {
            VovSpec::Cir(p) => p.gamma0,
            VovSpec::Rough(p) => p.zeta0,
        }
    }
}

/// Model and grid parameters shared by every pricing pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hurst exponent of the variance driver.
    pub hurst: f64,
    /// Flat initial forward variance level xi_0.
    pub v0: f64,
    /// Optional tabulated initial curve over the inner grid, overriding `v0`.
    pub xi0_curve: Option<Vec<f64>>,
    pub corr: CorrelationSpec,
    pub vov: VovSpec,
    pub grid: GridSpec,
}

impl ModelConfig {
    /// Baseline independent Markovian configuration: H = 0.1, v0 = 0.013,
    /// rho = -0.95, CIR (theta 0.4, m 0.8125, delta 0.8, gamma0 0.05),
    /// T = 7 days, Delta = 30 days, n_d = 7.
    pub fn base() -> Self {
        Self {
            hurst: 0.1,
            v0: 0.013,
            xi0_curve: None,
            corr: CorrelationSpec { rho: -0.95, rho_s: 0.0, rho_v: 0.0 },
            vov: VovSpec::Cir(CirParams { theta: 0.4, m: 0.8125, delta: 0.8, gamma0: 0.05 }),
            grid: GridSpec::base(),
        }
    }

    /// The strongly dependent variant: rho_S = -0.9, rho_V = 0.9.
    pub fn dependent() -> Self {
        let mut c = Self::base();
        c.corr.rho_s = -0.9;
        c.corr.rho_v = 0.9;
        c
    }

    /// Rough vol-of-vol variant with the given intermittency parameters.
    pub fn rough(nu: f64, h_vov: f64, zeta0: f64) -> Self {
        let mut c = Self::dependent();
        c.vov = VovSpec::Rough(RoughVovParams { nu, h_vov, zeta0 });
        c
    }

    /// Whether the Riccati benchmark applies: Markovian CIR vol-of-vol
    /// independent of the variance driver.
    pub fn is_independent_markovian(&self) -> bool {
        !self.vov.is_rough() && self.corr.rho_v == 0.0
    }

    /// Initial forward variance at inner grid index j (0-based).
    pub fn xi0_at(&self, j: usize) -> f64 {
        match &self.xi0_curve {
            Some(curve) => curve[j],
            None => self.v0,
        }
    }

    pub fn xi0_vector(&self) -> Result<Vec<f64>> {
        let n = self.grid.n_inner()?;
        match &self.xi0_curve {
            Some(curve) if curve.len() != n => Err(Error::ConfigError(format!(
                "xi0 curve has {} points, inner grid has {n}",
                curve.len()
            ))),
            Some(curve) => Ok(curve.clone()),
            None => Ok(vec![self.v0; n]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst <= 0.5) {
            return Err(Error::ConfigError(format!(
                "model.hurst = {} outside (0, 1/2]",
                self.hurst
            )));
        }
        if !(self.v0 > 0.0) || !self.v0.is_finite() {
            return Err(Error::ConfigError(format!("model.v0 = {} must be > 0", self.v0)));
        }
        if let Some(curve) = &self.xi0_curve {
            if curve.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::ConfigError("xi0 curve must be strictly positive".into()));
            }
        }
        build_correlation(&self.corr)?;
        match &self.vov {
            VovSpec::Cir(p) => p.validate()?,
            VovSpec::Rough(p) => p.validate()?,
        }
        self.grid.validate()?;
        self.xi0_vector()?;
        Ok(())
    }
}

/// Time-T state of one outer path.
#[derive(Debug, Clone)]
pub struct OuterState {
    /// Vol-of-vol at T.
    pub gamma_t: f64,
    /// E_{0,T}(u_j) over the inner grid.
    pub e0t: Vec<f64>,
    /// zeta_T(u_j) in the rough vol-of-vol case.
    pub zeta_t: Option<Vec<f64>>,
}

/// Inner-simulation estimate of h_T(u_j) with its per-point standard error.
#[derive(Debug, Clone)]
pub struct InnerEstimate {
    pub h: Vec<f64>,
    pub se: Vec<f64>,
}

/// Simulates `k` outer paths of (Gamma on [0,T], E_{0,T}(u_j) [, zeta_T]).
/// Deterministic in (config, seed); paths are independent work items.
pub fn simulate_outer(config: &ModelConfig, seed: u64, k: usize) -> Result<Vec<OuterState>> {
    config.validate()?;
    let grid = &config.grid;
    let dt = grid.dt();
    let n_out = grid.n_outer()?;
    let targets = grid.inner_grid()?;
    let factor = build_correlation(&config.corr)?;
    let kernel = RoughKernel::new(config.hurst)?;
    let table = ForwardFactorTable::new(&kernel, 0.0, n_out as f64 * dt, n_out, &targets)?;
    let h_vov = match &config.vov {
        VovSpec::Rough(p) => Some(p.h_vov),
        VovSpec::Cir(_) => None,
    };
    let gen = PathGenerator::new(seed, n_out, dt, config.hurst, &factor, h_vov)?
        .with_stream(STREAM_OUTER);

    (0..k)
        .into_par_iter()
        .map(|i| {
            let d = gen.path(i as u64);
            match &config.vov {
                VovSpec::Cir(p) => {
                    let gamma = simulate_cir(p, &d.dz, dt);
                    let e0t = table.e_factors(&gamma, &d.dw)?;
                    Ok(OuterState { gamma_t: gamma[n_out], e0t, zeta_t: None })
                }
                VovSpec::Rough(p) => {
                    let z_tilde = d.z_tilde.as_ref().expect("rough drivers carry dZ~");
                    let rv = simulate_rough_vov(p, &d.dz, z_tilde, dt, n_out, &targets)?;
                    let e0t = table.e_factors(&rv.gamma, &d.dw)?;
                    Ok(OuterState { gamma_t: rv.gamma[n_out], e0t, zeta_t: Some(rv.zeta_t) })
                }
            }
        })
        .collect()
}

/// Runs `m` inner paths on [T, T+Delta] conditioned on `outer` and returns the
/// per-u_j average of E_{T,u_j}(u_j) with standard errors. Sequential; callers
/// parallelize across outer paths.
pub fn simulate_inner(
    config: &ModelConfig,
    outer: &OuterState,
    seed: u64,
    m: usize,
) -> Result<InnerEstimate> {
    if m == 0 {
        return Err(Error::InvalidBudget("inner budget M must be at least 1".into()));
    }
    let grid = &config.grid;
    let dt = grid.dt();
    let n_in = grid.n_inner()?;
    let factor = build_correlation(&config.corr)?;
    let kernel = RoughKernel::new(config.hurst)?;
    let scheme = HybridScheme::new(kernel, dt, n_in)?;
    let rough = match &config.vov {
        VovSpec::Rough(p) => {
            let zeta = outer.zeta_t.as_ref().ok_or_else(|| {
                Error::ConfigError("rough config requires zeta_T in the outer state".into())
            })?;
            if zeta.len() != n_in {
                return Err(Error::ShapeMismatch(format!(
                    "zeta_T has {} points, inner grid has {n_in}",
                    zeta.len()
                )));
            }
            Some((p, zeta, HybridScheme::new(RoughKernel::new(p.h_vov)?, dt, n_in)?))
        }
        VovSpec::Cir(_) => None,
    };
    let h_vov = rough.as_ref().map(|(p, ..)| p.h_vov);
    let gen = PathGenerator::new(seed, n_in, dt, config.hurst, &factor, h_vov)?
        .with_stream(STREAM_INNER);

    let mut sums = VecPairwise::new(n_in);
    let mut sq_sums = VecPairwise::new(n_in);
    let mut sq = vec![0.0; n_in];
    let mut e = vec![0.0; n_in];
    let mut x = vec![0.0; n_in];
    let mut sqrt_gamma = vec![0.0; n_in];
    let mut drivers = crate::paths::PathDrivers {
        db: Vec::new(),
        dw: Vec::new(),
        dz: Vec::new(),
        w_tilde: Vec::new(),
        z_tilde: None,
    };
    // precomputed rough-case tables: flat sqrt(nu) path and the per-step
    // inverse martingale normalizers
    let rough_tables = rough.as_ref().map(|(p, ..)| {
        let inv_norm: Vec<f64> =
            (1..=n_in).map(|i| 1.0 / p.normalizer(i as f64 * dt)).collect();
        (vec![p.nu.sqrt(); n_in], inv_norm)
    });

    for j in 0..m {
        gen.path_into(j as u64, &mut drivers);
        match &rough {
            None => {
                let VovSpec::Cir(p) = &config.vov else { unreachable!() };
                // full-truncation Euler, inlined over sqrt_gamma left endpoints
                let mut raw = outer.gamma_t;
                for (i, sg) in sqrt_gamma.iter_mut().enumerate() {
                    let plus = raw.max(0.0);
                    *sg = plus.sqrt();
                    raw += p.theta * (p.m - plus) * dt + p.delta * *sg * drivers.dz[i];
                }
            }
            Some((_, zeta, vov_scheme)) => {
                let z_tilde = drivers.z_tilde.as_ref().expect("rough drivers carry dZ~");
                let (nu_sqrt_path, inv_norm) = rough_tables.as_ref().unwrap();
                vov_scheme.convolve_into(nu_sqrt_path, &drivers.dz, z_tilde, &mut x);
                sqrt_gamma[0] = outer.gamma_t.max(0.0).sqrt();
                for i in 1..n_in {
                    let g = zeta[i - 1] * (2.0 * x[i - 1]).exp() * inv_norm[i - 1];
                    sqrt_gamma[i] = g.max(0.0).sqrt();
                }
            }
        }
        scheme.convolve_into(&sqrt_gamma, &drivers.dw, &drivers.w_tilde, &mut x);
        for ((ev, sv), xv) in e.iter_mut().zip(sq.iter_mut()).zip(&x) {
            *ev = (2.0 * xv).exp();
            *sv = *ev * *ev;
        }
        sums.push(&e);
        sq_sums.push(&sq);
    }

    let h = sums.mean();
    let mf = m as f64;
    let se = sq_sums
        .total()
        .iter()
        .zip(&h)
        .map(|(s2, mu)| {
            if m < 2 {
                return f64::INFINITY;
            }
            let var = (s2 - mf * mu * mu).max(0.0) / (mf - 1.0);
            (var / mf).sqrt()
        })
        .collect();
    Ok(InnerEstimate { h, se })
}

/// xi_T(u_j) = xi_0(u_j) E_{0,T}(u_j) h_T(u_j) / h_0(u_j), elementwise.
pub fn assemble_forward_curve(
    xi0: &[f64],
    h0: &[f64],
    e0t: &[f64],
    ht: &[f64],
) -> Result<Vec<f64>> {
    let n = xi0.len();
    if h0.len() != n || e0t.len() != n || ht.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "curve lengths disagree: xi0 {n}, h0 {}, E0T {}, hT {}",
            h0.len(),
            e0t.len(),
            ht.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        for (name, v) in [("xi0", xi0[j]), ("h0", h0[j]), ("E0T", e0t[j]), ("hT", ht[j])] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::DomainError(format!(
                    "{name}[{j}] = {v} must be strictly positive"
                )));
            }
        }
        out.push(xi0[j] * e0t[j] * ht[j] / h0[j]);
    }
    Ok(out)
}

/// h_0(u_j) estimated as the path average of E_{0,T}(u_j) h_T(u_j).
pub fn estimate_h0(states: &[OuterState], ht: &[Vec<f64>]) -> Result<Vec<f64>> {
    if states.is_empty() || states.len() != ht.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} outer states vs {} h_T rows",
            states.len(),
            ht.len()
        )));
    }
    let n = states[0].e0t.len();
    let mut acc = VecPairwise::new(n);
    let mut prod = vec![0.0; n];
    for (s, h) in states.iter().zip(ht) {
        if s.e0t.len() != n || h.len() != n {
            return Err(Error::ShapeMismatch("ragged E0T / h_T rows".into()));
        }
        for ((p, e), hv) in prod.iter_mut().zip(&s.e0t).zip(h) {
            *p = e * hv;
        }
        acc.push(&prod);
    }
    Ok(acc.mean())
}

/// Derives the inner-simulation master seed of outer path `i`.
pub fn inner_seed(master: u64, outer_index: usize) -> u64 {
    derive_seed(master, STREAM_INNER_OF_OUTER, outer_index as u64)
}
