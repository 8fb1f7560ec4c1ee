//! Undiscounted Black-76 call valuation and implied volatility (zero-rate
//! convention throughout).

use crate::error::{Error, Result};

/// Standard normal CDF, double precision (Graeme West's rational / continued
/// fraction split, max relative error near 1e-15).
pub fn norm_cdf(x: f64) -> f64 {
    let z = x.abs();
    let c = if z > 37.0 {
        0.0
    } else {
        let e = (-z * z / 2.0).exp();
        if z < 7.071_067_811_865_475 {
            let b = ((((((3.526_249_659_989_11e-2 * z + 0.700_383_064_443_688) * z
                + 6.373_962_203_531_65)
                * z
                + 33.912_866_078_383)
                * z
                + 112.079_291_497_871)
                * z
                + 221.213_596_169_931)
                * z
                + 220.206_867_912_376)
                * e;
            let d = ((((((8.838_834_764_831_84e-2 * z + 1.755_667_163_182_64) * z
                + 16.064_177_579_207)
                * z
                + 86.780_732_202_946_1)
                * z
                + 296.564_248_779_674)
                * z
                + 637.333_633_378_831)
                * z
                + 793.826_512_519_948)
                * z
                + 440.413_735_824_752;
            b / d
        } else {
            let f = z + 1.0 / (z + 2.0 / (z + 3.0 / (z + 4.0 / (z + 0.65))));
            e / (f * 2.506_628_274_631_000_5)
        }
    };
    if x > 0.0 {
        1.0 - c
    } else {
        c
    }
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn check_fkt(f: f64, k: f64, t: f64) -> Result<()> {
    for (name, v) in [("forward", f), ("strike", k), ("expiry", t)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DomainError(format!("{name} = {v} must be > 0")));
        }
    }
    Ok(())
}

/// Undiscounted Black call price F N(d1) - K N(d2).
pub fn black_call(f: f64, k: f64, t: f64, sigma: f64) -> Result<f64> {
    check_fkt(f, k, t)?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::DomainError(format!("sigma = {sigma} must be >= 0")));
    }
    let st = sigma * t.sqrt();
    if st < 1e-14 {
        return Ok((f - k).max(0.0));
    }
    let d1 = ((f / k).ln() + 0.5 * st * st) / st;
    Ok(f * norm_cdf(d1) - k * norm_cdf(d1 - st))
}

/// dPrice/dSigma of the Black call.
pub fn black_vega(f: f64, k: f64, t: f64, sigma: f64) -> f64 {
    let st = sigma * t.sqrt();
    if st < 1e-14 {
        return 0.0;
    }
    let d1 = ((f / k).ln() + 0.5 * st * st) / st;
    f * norm_pdf(d1) * t.sqrt()
}

const PRICE_TOL_REL: f64 = 1e-10;
const MAX_ITER: usize = 200;

/// Inverts the undiscounted Black call by safeguarded Newton / bisection to
/// |price error| < 1e-10 F. Prices outside [(F-K)+, F) have no solution and
/// are reported, not clamped.
pub fn implied_vol(price: f64, f: f64, k: f64, t: f64) -> Result<f64> {
    check_fkt(f, k, t)?;
    if !price.is_finite() {
        return Err(Error::DomainError(format!("price = {price} must be finite")));
    }
    let intrinsic = (f - k).max(0.0);
    if price < intrinsic || price >= f {
        return Err(Error::NoSolution(format!(
            "price {price} outside the arbitrage bounds [{intrinsic}, {f})"
        )));
    }
    if price == intrinsic {
        return Ok(0.0);
    }
    let tol = PRICE_TOL_REL * f;

    // bracket the root
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..64 {
        if black_call(f, k, t, hi)? > price {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }

    // ATM-style starting guess, clamped into the bracket
    let mut sigma = ((2.0 * std::f64::consts::PI / t).sqrt() * price / f)
        .clamp(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo));
    for _ in 0..MAX_ITER {
        let diff = black_call(f, k, t, sigma)? - price;
        // keep sharpening the bracket past the price tolerance so low-vega
        // (far OTM) strikes still resolve sigma itself
        if diff.abs() < tol && hi - lo < 1e-9 * sigma.max(1e-2) {
            return Ok(sigma);
        }
        if diff > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = black_vega(f, k, t, sigma);
        let newton = sigma - diff / vega;
        sigma = if vega > 1e-300 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < f64::EPSILON * hi.max(1.0) {
            return Ok(sigma);
        }
    }
    Ok(sigma)
}
