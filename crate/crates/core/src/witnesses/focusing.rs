//! Focusing witness: a field concentrated in a `1/lambda` ball around the
//! spatial origin and a `1/(lambda r0)` interval around a central time.
//!
//! Every curve translate `x + t gamma(s)` with `|x| <~ 1/lambda` and `t`
//! near the central time passes through the concentration ball, so the
//! forward transform keeps an `O(1/lambda)` amplitude on a `1/lambda`-thick
//! neighborhood of the curve `s -> -t0 gamma(s)` for *every* parameter `s`.
//! Counting volumes gives the model decay rates
//!
//! * `||f||_p ~ lambda^{-(d+1)/p}`              ([`focusing_f_slope`]),
//! * `||Rf||_p ~ lambda^{-1 - d/p}`             ([`focusing_rf_slope`]),
//!
//! so the ratio of Sobolev-weighted transform norm to input norm scales as
//! `lambda^{alpha - 1 + 1/p}`, flipping sign at the critical order
//! [`focusing_critical_alpha`]` = 1 - 1/p`.
//!
//! The spatial factor is the modulated band-limited bump of
//! [`crate::witnesses::profiles`] on each axis, so fields are assembled
//! exactly in frequency space and all spatial quadratures below are exact;
//! the time factor is a Gaussian, negligible at the time-interval ends.

use num_complex::Complex64;

use crate::curves::{Curve, PARAM_INTERVAL};
use crate::error::Result;
use crate::fields::{AuxKind, GridSpec, SobolevMode};
use crate::witnesses::profiles::{gauss, modulated_fejer_axis, tensor_spectral_field};
use crate::xray::{curve_reach, forward_xray, CutoffPair};

/// Grid sizes and parameter sweep for [`run_focusing`].
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocusingConfig {
    /// Concentration parameters; each must pass the axis band check.
    pub lambdas: Vec<f64>,
    /// Lebesgue exponents to report (each `>= 1`).
    pub ps: Vec<f64>,
    /// Sobolev order used for the weighted transform norm column.
    pub alpha: f64,
    /// Spatial grid points per axis.
    pub n_x: usize,
    /// Curve-parameter samples of the transform output.
    pub n_s: usize,
    /// Time-grid points of the input field.
    pub n_t: usize,
    /// Center of the time concentration, interior to the time interval.
    pub t_center: f64,
}

impl FocusingConfig {
    /// Full-scale sweep: `lambda` in `{8, 16, 32, 64}` on a `64^d` spatial
    /// grid with 513 time points.
    pub fn standard() -> Self {
        Self {
            lambdas: vec![8.0, 16.0, 32.0, 64.0],
            ps: vec![2.0, 4.0],
            alpha: 0.0,
            n_x: 64,
            n_s: 65,
            n_t: 513,
            t_center: 1.5,
        }
    }
}

impl Default for FocusingConfig {
    fn default() -> Self {
        Self::standard()
    }
}

/// Norms of one focusing witness at one `(lambda, p)`.
#[derive(Clone, Copy, Debug)]
pub struct FocusingRow {
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    pub norm_f: f64,
    pub norm_rf: f64,
    pub norm_rf_sobolev: f64,
}

/// Model slope of `log2 ||f||_p` per unit `log2 lambda`.
pub fn focusing_f_slope(d: usize, p: f64) -> f64 {
    -(d as f64 + 1.0) / p
}

/// Model slope of `log2 ||Rf||_p` per unit `log2 lambda`.
pub fn focusing_rf_slope(d: usize, p: f64) -> f64 {
    -1.0 - d as f64 / p
}

/// Sobolev order at which the weighted transform-to-input ratio of the
/// focusing family stops decaying: `1 - 1/p`.
pub fn focusing_critical_alpha(p: f64) -> f64 {
    1.0 - 1.0 / p
}

/// Run the focusing sweep for `curve`, producing one row per
/// `(lambda, p)` pair in configuration order.
pub fn run_focusing(
    curve: &Curve,
    cut: &CutoffPair,
    cfg: &FocusingConfig,
) -> Result<Vec<FocusingRow>> {
    let d = curve.dim();
    let grid = GridSpec::new(d, cfg.n_x, AuxKind::Time, cfg.n_t)?;
    let r0 = curve_reach(curve);
    let t0 = cfg.t_center;
    let mut rows = Vec::with_capacity(cfg.lambdas.len() * cfg.ps.len());
    for &lambda in &cfg.lambdas {
        let axis = modulated_fejer_axis(lambda)?;
        let axes = vec![axis; d];
        let hat = tensor_spectral_field(&grid, &axes, |t| {
            Complex64::new(gauss(lambda * r0 * (t - t0)), 0.0)
        })?;
        let rf = forward_xray(&hat, curve, cut, PARAM_INTERVAL, cfg.n_s)?;
        let f = hat.to_physical()?;
        for &p in &cfg.ps {
            rows.push(FocusingRow {
                lambda,
                p,
                alpha: cfg.alpha,
                norm_f: f.lp_norm(p)?,
                norm_rf: rf.lp_norm(p)?,
                norm_rf_sobolev: rf.sobolev_norm(p, cfg.alpha, SobolevMode::SpatialOnly)?,
            });
        }
    }
    Ok(rows)
}
