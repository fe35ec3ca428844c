//! Accumulation radius and root-exponential rate fits.

use crate::error::{invalid, Error, Result};

/// Radius of the accumulation point of the image series for two unit
/// spheres a gap `delta` apart: `1 + delta/2 - sqrt(delta + delta^2/4)`.
pub fn r_acc(delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("separation must be finite and non-negative, got {delta}")));
    }
    let s = (delta + delta * delta / 4.0).sqrt();
    Ok(1.0 / (1.0 + delta / 2.0 + s))
}

/// Least-squares fit `ln(err) = intercept + slope * sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub intercept: f64,
    pub slope: f64,
    /// `exp(slope)`, the error reduction per unit of `sqrt(n)`.
    pub rate: f64,
    pub points_used: usize,
    /// Root-mean-square misfit in `ln(err)`.
    pub rms_misfit: f64,
}

/// Fits the leading run of points with `err >= floor` (points sorted by `n`).
///
/// Needs at least three usable points with non-constant errors.
pub fn fit_root_exponential(n: &[f64], err: &[f64], floor: f64) -> Result<RateFit> {
    if n.len() != err.len() {
        return Err(Error::DimensionMismatch { expected: n.len(), got: err.len() });
    }
    let mut idx: Vec<usize> = (0..n.len()).collect();
    idx.sort_by(|&a, &b| n[a].total_cmp(&n[b]));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in idx {
        let e = err[i];
        if !e.is_finite() || e <= 0.0 || e < floor {
            break;
        }
        xs.push(n[i].sqrt());
        ys.push(e.ln());
    }
    if xs.len() < 3 {
        return Err(Error::Validation(format!("degenerate data: {} usable points above the floor {floor:e}", xs.len())));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Validation("degenerate data: constant abscissae or errors".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(RateFit { intercept, slope, rate: slope.exp(), points_used: xs.len(), rms_misfit: rms })
}
