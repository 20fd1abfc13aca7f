//! Derivative pairings along a lifted curve and their triangular reduction.
//!
//! For a covector `(tau, xi)` the pairings `y^j = <G^(j)(s), (tau, xi)>`
//! against the lifted curve `G = (1, gamma)` collect the time-frequency data
//! the decomposition acts on. The reduction rewrites them in a shifted
//! Taylor basis with ratio `omega = y^(N-1) / y^N`, which forces the
//! next-to-top coefficient to vanish; the expansion inverts it exactly.

use crate::curves::LiftedCurve;
use crate::curves::factorial;
use crate::error::{Error, Result};

/// Pairings `y^j = <G^(j)(s_center), (tau, xi)>` for `j = 0..n`.
///
/// Only `y^0` sees `tau` (the lift's higher derivatives have vanishing first
/// coordinate). Returns `n + 1` values.
pub fn y_coords(
    lifted: &LiftedCurve,
    s_center: f64,
    n: usize,
    tau: f64,
    xi: &[f64],
) -> Result<Vec<f64>> {
    let d = lifted.dim() - 1;
    if xi.len() != d {
        return Err(Error::DimMismatch {
            expected: format!("frequency vector of length {d}"),
            found: format!("length {}", xi.len()),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "y_coords: order must be >= 1".into(),
        ));
    }
    let mut cov = Vec::with_capacity(d + 1);
    cov.push(tau);
    cov.extend_from_slice(xi);
    Ok((0..=n)
        .map(|j| {
            let g = lifted.eval_deriv(s_center, j);
            g.iter().zip(&cov).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// Reduce pairings `y^0..y^N` to shifted coefficients `g^0..g^N` and the
/// ratio `omega = y^(N-1) / y^N`.
///
/// Defined by `g^N = y^N` and, descending,
/// `g^j = y^j - sum_{l=j+1}^{N} g^l omega^(l-j) / (l-j)!`.
/// By construction `g^(N-1)` vanishes (up to roundoff). Fails with
/// [`Error::DivisionByZero`] when the top pairing is zero.
pub fn reduce_pairings(y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len().checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| {
        Error::InvalidArgument("reduce_pairings: need at least two pairings".into())
    })?;
    let top = y[n];
    if top == 0.0 {
        return Err(Error::DivisionByZero(
            "reduce_pairings: top pairing vanishes".into(),
        ));
    }
    let omega = y[n - 1] / top;
    let mut g = vec![0.0; n + 1];
    g[n] = top;
    for j in (0..n).rev() {
        let mut correction = 0.0;
        for l in j + 1..=n {
            correction += g[l] * omega.powi((l - j) as i32) / factorial(l - j);
        }
        g[j] = y[j] - correction;
    }
    Ok((g, omega))
}

/// Invert [`reduce_pairings`]: `y^m = sum_{l=m}^{N} g^l omega^(l-m) / (l-m)!`.
pub fn expand_pairings(g: &[f64], omega: f64) -> Result<Vec<f64>> {
    if g.is_empty() {
        return Err(Error::InvalidArgument(
            "expand_pairings: empty coefficient vector".into(),
        ));
    }
    if !omega.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "expand_pairings: ratio must be finite, got {omega}"
        )));
    }
    let n = g.len() - 1;
    Ok((0..=n)
        .map(|m| {
            (m..=n)
                .map(|l| g[l] * omega.powi((l - m) as i32) / factorial(l - m))
                .sum()
        })
        .collect())
}
