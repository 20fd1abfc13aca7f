//! Least-squares decay fits in log2 scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Line fitted through `(x, log2 y)` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Slope of `log2 y` per unit of `x`.
    pub slope: f64,
    /// Value of `log2 y` extrapolated to `x = 0`.
    pub intercept: f64,
    /// Coefficient of determination of the fit in log scale.
    pub r2: f64,
}

/// Least-squares fit of `log2 y` against `x`.
///
/// Requires at least three points, strictly positive finite `y`, finite
/// `x` with at least two distinct values. A degenerate spread of `log2 y`
/// (all values equal) yields `r2 = 1`.
pub fn fit_decay(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::DimMismatch {
            expected: format!("{} ordinates", xs.len()),
            found: format!("{}", ys.len()),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit_decay: need at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "fit_decay: abscissae must be finite".into(),
        ));
    }
    if ys.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::InvalidArgument(
            "fit_decay: ordinates must be positive and finite".into(),
        ));
    }
    let n = xs.len() as f64;
    let logs: Vec<f64> = ys.iter().map(|y| y.log2()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = logs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "fit_decay: need at least two distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&logs)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = logs.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&logs)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(FitResult {
        slope,
        intercept,
        r2,
    })
}
