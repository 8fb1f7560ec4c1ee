//! Monte Carlo pricing engine for VIX futures and options under stochastic
//! Volterra rough volatility models with stochastic (possibly rough)
//! vol-of-vol.
//!
//! The crate provides:
//!
//! * seedable correlated Gaussian drivers ([`paths`]);
//! * hybrid-scheme and Riemann-sum simulation of the rough variance driver
//!   ([`kernel`]);
//! * CIR and rough log-TBSS vol-of-vol processes ([`vov`]);
//! * outer/inner model simulation and forward-variance assembly ([`svm`]);
//! * the Riccati ODE benchmark for independent Markovian vol-of-vol
//!   ([`riccati`]);
//! * regression surrogates for the conditional expectation curve
//!   ([`regress`]);
//! * nested and least-squares Monte Carlo pricing pipelines ([`pricer`]).

pub mod error;
pub mod kernel;
pub mod math;
pub mod paths;
pub mod pricer;
pub mod regress;
pub mod riccati;
pub mod svm;
pub mod vov;

pub use error::{Error, Result};
