//! Small least-squares helpers: straight-line fits, the two-parameter power
//! fit used to extract empirical growth exponents, and R² bookkeeping.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordinary least squares y ≈ intercept + slope·x.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals.
    pub ssr: f64,
    /// 1 − SSR/SST; defined as 1 when the data are constant and fit exactly.
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Domain("fit_line: mismatched lengths".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Domain("fit_line: need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain("fit_line: non-finite input".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("fit_line: regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else if ssr == 0.0 { 1.0 } else { 0.0 };
    Ok(LineFit { slope, intercept, ssr, r2 })
}

/// Least squares of y against x^ζ with ζ itself free: grid search over ζ
/// followed by local refinement, all deterministic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerFit {
    pub zeta: f64,
    pub slope: f64,
    pub intercept: f64,
    pub ssr: f64,
    pub r2: f64,
}

pub fn fit_power(xs: &[f64], ys: &[f64], zeta_lo: f64, zeta_hi: f64) -> Result<PowerFit> {
    if xs.len() < 3 {
        return Err(Error::Domain("fit_power: need at least three points".into()));
    }
    if xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::Domain("fit_power: regressor values must be positive".into()));
    }
    if !(zeta_lo > 0.0 && zeta_hi > zeta_lo) {
        return Err(Error::Domain(format!("fit_power: bad exponent range [{zeta_lo}, {zeta_hi}]")));
    }
    let eval = |zeta: f64| -> Result<LineFit> {
        let us: Vec<f64> = xs.iter().map(|x| x.powf(zeta)).collect();
        fit_line(&us, ys)
    };
    let mut lo = zeta_lo;
    let mut hi = zeta_hi;
    let mut best = (zeta_lo, eval(zeta_lo)?);
    // Three rounds of 64-point scans shrink the bracket ~30× per round.
    for _ in 0..3 {
        let steps = 64;
        let dz = (hi - lo) / steps as f64;
        for i in 0..=steps {
            let z = lo + dz * i as f64;
            let fit = eval(z)?;
            if fit.ssr < best.1.ssr {
                best = (z, fit);
            }
        }
        lo = (best.0 - dz).max(zeta_lo);
        hi = (best.0 + dz).min(zeta_hi);
    }
    let (zeta, line) = best;
    Ok(PowerFit { zeta, slope: line.slope, intercept: line.intercept, ssr: line.ssr, r2: line.r2 })
}
