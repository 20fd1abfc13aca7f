//! Sobolev exponent tables for the curve transforms.
//!
//! Two piecewise-smooth exponent curves describe the maximal smoothing
//! order of the transforms on `L^p`, one for the low range `1 <= p <= 2`
//! ([`alpha`]) and one for the high range `p >= 2` ([`alpha_tilde`]); both
//! are continuous across their break points ([`critical_p`],
//! [`critical_p_tilde`]). [`necessary_exponent`] is the ceiling imposed by
//! the witness families: focusing caps the order at `1 - 1/p`, dimensional
//! concentration at `1/(2d)`, and a type-`l` flat point at `1/(l p)`.

use crate::error::{Error, Result};

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "exponents: dimension must be >= 2, got {d}"
        )));
    }
    Ok(())
}

/// Break point of [`alpha`]: `2d / (2d - 1)`.
pub fn critical_p(d: usize) -> f64 {
    let d = d as f64;
    2.0 * d / (2.0 * d - 1.0)
}

/// Break point of [`alpha_tilde`]: `2(d - 1)`.
pub fn critical_p_tilde(d: usize) -> f64 {
    2.0 * (d as f64 - 1.0)
}

/// Smoothing order on the low range `1 <= p <= 2`:
/// `1 - 1/p` below [`critical_p`], then the constant `1/(2d)`.
pub fn alpha(d: usize, p: f64) -> Result<f64> {
    check_dim(d)?;
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "alpha: p must lie in [1, 2], got {p}"
        )));
    }
    Ok(if p < critical_p(d) {
        1.0 - 1.0 / p
    } else {
        1.0 / (2.0 * d as f64)
    })
}

/// Smoothing order on the high range `p >= 2`:
/// `(1/d)(1/2 + 1/p)` up to [`critical_p_tilde`], then `1/p`.
pub fn alpha_tilde(d: usize, p: f64) -> Result<f64> {
    check_dim(d)?;
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_tilde: p must be >= 2, got {p}"
        )));
    }
    Ok(if p <= critical_p_tilde(d) {
        (0.5 + 1.0 / p) / d as f64
    } else {
        1.0 / p
    })
}

/// Ceiling on the smoothing order forced by the witness families for a
/// type-`l` curve in dimension `d`:
/// `min(1 - 1/p, 1/(2d), 1/(l p))`.
pub fn necessary_exponent(d: usize, p: f64, l: usize) -> Result<f64> {
    check_dim(d)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "necessary_exponent: p must be >= 1, got {p}"
        )));
    }
    if l < d {
        return Err(Error::InvalidArgument(format!(
            "necessary_exponent: type must be >= dimension, got l = {l} < d = {d}"
        )));
    }
    let focusing = 1.0 - 1.0 / p;
    let concentration = 1.0 / (2.0 * d as f64);
    let flat_point = 1.0 / (l as f64 * p);
    Ok(focusing.min(concentration).min(flat_point))
}

/// One row of [`exponent_table`]: the exponents at a single `p`, with the
/// range-restricted entries absent outside their domain.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ExponentRow {
    pub d: usize,
    pub p: f64,
    pub l: usize,
    pub alpha: Option<f64>,
    pub alpha_tilde: Option<f64>,
    pub necessary: f64,
}

/// Tabulate the exponents of this module at each requested `p`.
pub fn exponent_table(d: usize, ps: &[f64], l: usize) -> Result<Vec<ExponentRow>> {
    check_dim(d)?;
    if ps.is_empty() {
        return Err(Error::InvalidArgument(
            "exponent_table: need at least one p".into(),
        ));
    }
    ps.iter()
        .map(|&p| {
            let necessary = necessary_exponent(d, p, l)?;
            Ok(ExponentRow {
                d,
                p,
                l,
                alpha: if (1.0..=2.0).contains(&p) {
                    Some(alpha(d, p)?)
                } else {
                    None
                },
                alpha_tilde: if p >= 2.0 {
                    Some(alpha_tilde(d, p)?)
                } else {
                    None
                },
                necessary,
            })
        })
        .collect()
}
