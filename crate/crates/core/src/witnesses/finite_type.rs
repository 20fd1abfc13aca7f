//! Finite-type witness: an anisotropic wave packet adapted to a model
//! curve with coordinates `s^{a_1}/a_1!, ..., s^{a_d}/a_d!`.
//!
//! With `L = a_d` the largest exponent, the packet concentrates on the box
//! `|x_j| <~ kappa_j lambda^{-a_j/L}` and is modulated at frequency
//! `mod_freq * lambda` along the last axis, so each coordinate of the box
//! matches how fast the curve coordinate `s^{a_j}/a_j!` traverses it. The
//! volume count gives `||f||_p ~ lambda^{-|a|/(L p)}` with
//! `|a| = a_1 + ... + a_d` ([`finite_type_f_slope`]), and the averages
//! along the curve stay bounded below on a shrinking parameter window
//! `|s| <~ lambda^{-1/L}` (the `e_min` statistics), which together force
//! the smoothing-order ceiling `alpha <= 1/(L p)`
//! ([`finite_type_critical_alpha`]).
//!
//! Axis envelopes are Gaussians: their frequency tables stay dense on the
//! lattice at every dilation, so the anisotropic scaling survives
//! periodization at desk-scale `lambda` (a compactly band-limited envelope
//! on a `lambda^{-a_j/L}`-width axis would keep only its zero mode until
//! `lambda` is in the thousands).

use num_complex::Complex64;

use crate::curves::{factorial, finite_type_model, PARAM_INTERVAL};
use crate::error::{Error, Result};
use crate::fields::{AuxKind, GridSpec, SobolevMode};
use crate::witnesses::profiles::{tensor_spectral_field, AxisProfile, Envelope};
use crate::xray::{forward_xray, CutoffPair};

/// Sweep configuration for [`run_finite_type`].
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteTypeConfig {
    /// Strictly increasing contact orders `a_1 < ... < a_d`; the curve is
    /// the model with coordinates `s^{a_j}/a_j!`.
    pub exponents: Vec<usize>,
    /// Concentration parameters swept.
    pub lambdas: Vec<f64>,
    /// Lebesgue exponents evaluated per lambda.
    pub ps: Vec<f64>,
    /// Smoothing order of the weighted output norm.
    pub alpha: f64,
    /// Spatial grid points per axis (power of two).
    pub n_x: usize,
    /// Curve-parameter samples of the forward transform.
    pub n_s: usize,
    /// Time samples of the input grid.
    pub n_t: usize,
    /// Per-axis width constants `kappa_j` (axis `j` has width
    /// `kappa_j lambda^{-a_j/L}`).
    pub widths: Vec<f64>,
    /// Modulation frequency of the last axis, per unit `lambda`.
    pub mod_freq: f64,
}

impl FiniteTypeConfig {
    /// Full-scale sweep for the contact orders `(1, 2, 4)`.
    pub fn standard() -> Self {
        Self {
            exponents: vec![1, 2, 4],
            lambdas: vec![8.0, 16.0, 32.0],
            ps: vec![2.0, 4.0],
            alpha: 0.0,
            n_x: 64,
            n_s: 65,
            n_t: 129,
            widths: vec![0.3, 0.5, 2.0],
            mod_freq: 9.0 / 8.0,
        }
    }
}

impl Default for FiniteTypeConfig {
    fn default() -> Self {
        Self::standard()
    }
}

/// Measurements at one `(lambda, p)` pair.
#[derive(Clone, Copy, Debug)]
pub struct FiniteTypeRow {
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    /// Input norm `||f||_p`.
    pub norm_f: f64,
    /// Output norm `||F f||_p` of the forward transform.
    pub norm_rf: f64,
    /// Output norm weighted by `(1 + |xi|^2)^{alpha/2}`.
    pub norm_rf_sobolev: f64,
    /// Minimum of `|F f|` over the concentration window (same for all `p`).
    pub e_min: f64,
    /// Number of grid points inside the concentration window.
    pub e_count: usize,
}

/// Sum of the contact orders, `|a|`.
fn exponent_sum(exponents: &[usize]) -> f64 {
    exponents.iter().map(|&a| a as f64).sum()
}

/// Model slope of `log2 ||f||_p` per unit `log2 lambda`: `-|a| / (L p)`.
pub fn finite_type_f_slope(exponents: &[usize], p: f64) -> f64 {
    let l = *exponents.last().expect("nonempty exponents") as f64;
    -exponent_sum(exponents) / (l * p)
}

/// Largest smoothing order compatible with the witness family:
/// `1 / (L p)` for largest contact order `L`.
pub fn finite_type_critical_alpha(exponents: &[usize], p: f64) -> f64 {
    let l = *exponents.last().expect("nonempty exponents") as f64;
    1.0 / (l * p)
}

fn validate(cfg: &FiniteTypeConfig) -> Result<()> {
    let d = cfg.exponents.len();
    if d < 2 {
        return Err(Error::InvalidArgument(
            "run_finite_type: need at least two contact orders".into(),
        ));
    }
    if cfg.widths.len() != d {
        return Err(Error::DimMismatch {
            expected: format!("{d} width constants"),
            found: format!("{}", cfg.widths.len()),
        });
    }
    if cfg.widths.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidArgument(
            "run_finite_type: width constants must be positive and finite".into(),
        ));
    }
    if cfg.lambdas.is_empty() || cfg.lambdas.iter().any(|&l| !(l >= 1.0)) {
        return Err(Error::InvalidArgument(
            "run_finite_type: need lambdas >= 1".into(),
        ));
    }
    if cfg.ps.is_empty() || cfg.ps.iter().any(|&p| !(p >= 1.0)) {
        return Err(Error::InvalidArgument(
            "run_finite_type: need exponents p >= 1".into(),
        ));
    }
    if !(cfg.mod_freq > 0.0) || !cfg.mod_freq.is_finite() {
        return Err(Error::InvalidArgument(
            "run_finite_type: modulation frequency must be positive".into(),
        ));
    }
    if cfg.n_s < 3 {
        return Err(Error::InvalidArgument(
            "run_finite_type: need at least 3 parameter samples".into(),
        ));
    }
    Ok(())
}

/// Half-width of the parameter window on which the averages are sampled,
/// in units of `lambda^{-1/L}`: the largest `c` such that every envelope
/// argument `scale_j * (x_j + t gamma_j(s))` stays below 1 on the window,
/// i.e. `min_j (kappa_j a_j! / 4)^{1/a_j}`.
fn window_constant(exponents: &[usize], widths: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(widths)
        .map(|(&a, &k)| (k * factorial(a) / 4.0).powf(1.0 / a as f64))
        .fold(f64::INFINITY, f64::min)
}

/// Run the sweep: one row per `(lambda, p)`, and per-lambda minimum
/// statistics of `|F f|` over the concentration window.
pub fn run_finite_type(cut: &CutoffPair, cfg: &FiniteTypeConfig) -> Result<Vec<FiniteTypeRow>> {
    validate(cfg)?;
    let d = cfg.exponents.len();
    let curve = finite_type_model(&cfg.exponents)?;
    let l = *cfg.exponents.last().expect("nonempty") as f64;
    let grid = GridSpec::new(d, cfg.n_x, AuxKind::Time, cfg.n_t)?;
    let c_s = window_constant(&cfg.exponents, &cfg.widths);
    let mut rows = Vec::with_capacity(cfg.lambdas.len() * cfg.ps.len());
    for &lambda in &cfg.lambdas {
        let axes: Vec<AxisProfile> = cfg
            .exponents
            .iter()
            .zip(&cfg.widths)
            .enumerate()
            .map(|(j, (&a, &kappa))| {
                let scale = lambda.powf(a as f64 / l) / kappa;
                let freq = if j == d - 1 { cfg.mod_freq * lambda } else { 0.0 };
                AxisProfile::new(Envelope::Gauss, scale, freq)
            })
            .collect::<Result<_>>()?;
        let hat = tensor_spectral_field(&grid, &axes, |t| Complex64::new(cut.chi(t), 0.0))?;
        let rf = forward_xray(&hat, &curve, cut, PARAM_INTERVAL, cfg.n_s)?;
        let f = hat.to_physical()?;
        drop(hat);
        let (e_min, e_count) = window_min(&rf, lambda, c_s, &cfg.exponents, &cfg.widths)?;
        for &p in &cfg.ps {
            rows.push(FiniteTypeRow {
                lambda,
                p,
                alpha: cfg.alpha,
                norm_f: f.lp_norm(p)?,
                norm_rf: rf.lp_norm(p)?,
                norm_rf_sobolev: rf.sobolev_norm(p, cfg.alpha, SobolevMode::SpatialOnly)?,
                e_min,
                e_count,
            });
        }
    }
    Ok(rows)
}

/// Minimum of `|F f|` over grid points with `|x_j| <= kappa_j
/// lambda^{-a_j/L} / 2` and `|s| <= c_s lambda^{-1/L}`, plus the point
/// count. The window always contains `x = 0, s = 0`.
fn window_min(
    rf: &crate::fields::SampledField,
    lambda: f64,
    c_s: f64,
    exponents: &[usize],
    widths: &[f64],
) -> Result<(f64, usize)> {
    let grid = rf.grid();
    let d = grid.d;
    let l = *exponents.last().expect("nonempty") as f64;
    let x_pts = grid.x_points();
    let mut axis_ids: Vec<Vec<usize>> = Vec::with_capacity(d);
    for (&a, &kappa) in exponents.iter().zip(widths) {
        let half = kappa * lambda.powf(-(a as f64) / l) / 2.0;
        let ids: Vec<usize> = (0..grid.n_x)
            .filter(|&i| x_pts[i].abs() <= half + 1e-12)
            .collect();
        axis_ids.push(ids);
    }
    let s_half = c_s * lambda.powf(-1.0 / l);
    let s_ids: Vec<usize> = grid
        .aux_points()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.abs() <= s_half + 1e-12)
        .map(|(i, _)| i)
        .collect();
    if axis_ids.iter().any(|ids| ids.is_empty()) || s_ids.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "window_min: concentration window at lambda = {lambda} contains \
             no grid points; refine the grid"
        )));
    }
    let values = rf.values();
    let mut idx = vec![0usize; d + 1];
    let mut cursor = vec![0usize; d];
    let mut e_min = f64::INFINITY;
    let mut count = 0usize;
    'outer: loop {
        for (j, &c) in cursor.iter().enumerate() {
            idx[j] = axis_ids[j][c];
        }
        for &si in &s_ids {
            idx[d] = si;
            let v = values[idx.as_slice()].norm();
            e_min = e_min.min(v);
            count += 1;
        }
        // Odometer over the per-axis admissible index lists.
        for j in (0..d).rev() {
            cursor[j] += 1;
            if cursor[j] < axis_ids[j].len() {
                continue 'outer;
            }
            cursor[j] = 0;
        }
        break;
    }
    Ok((e_min, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fit_decay;

    /// Contact orders `(1, 2)` give the parabola, where the whole sweep is
    /// cheap; the input-norm slope must match the volume count
    /// `-|a|/(L p) = -3/(2 p)` and the window minimum must stay
    /// bounded below.
    #[test]
    fn parabola_input_norms_match_the_volume_count() {
        let cut = CutoffPair::standard();
        let cfg = FiniteTypeConfig {
            exponents: vec![1, 2],
            lambdas: vec![8.0, 16.0, 32.0],
            ps: vec![2.0],
            alpha: 0.0,
            n_x: 64,
            n_s: 65,
            n_t: 257,
            widths: vec![0.3, 2.0],
            mod_freq: 9.0 / 8.0,
        };
        let rows = run_finite_type(&cut, &cfg).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| r.lambda.log2()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.norm_f).collect();
        let fit = fit_decay(&xs, &ys).unwrap();
        let model = finite_type_f_slope(&cfg.exponents, 2.0);
        println!("parabola input slope {:.4} vs model {model}", fit.slope);
        assert!(
            (fit.slope - model).abs() <= 0.12,
            "input slope {} vs model {model}",
            fit.slope
        );
        for r in &rows {
            println!(
                "lambda {:>4}: e_min {:.4} over {} window points, |Ff|_2 {:.4}",
                r.lambda, r.e_min, r.e_count, r.norm_rf
            );
            assert!(r.e_count >= 1);
            assert!(r.e_min > 0.05, "window minimum collapsed: {}", r.e_min);
        }
    }

    /// Contact orders `(1, 2, 4)` at two lambdas: the window minimum must
    /// be stable (no decay in lambda beyond a factor 2).
    #[test]
    fn window_minimum_is_stable_for_orders_one_two_four() {
        let cut = CutoffPair::standard();
        let cfg = FiniteTypeConfig {
            exponents: vec![1, 2, 4],
            lambdas: vec![8.0, 16.0],
            ps: vec![2.0],
            alpha: 0.0,
            n_x: 32,
            n_s: 65,
            n_t: 129,
            widths: vec![0.3, 0.5, 2.0],
            mod_freq: 9.0 / 8.0,
        };
        let rows = run_finite_type(&cut, &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            println!(
                "lambda {:>4}: e_min {:.4} over {} window points",
                r.lambda, r.e_min, r.e_count
            );
            assert!(r.e_count >= 1);
            assert!(r.e_min > 0.05, "window minimum collapsed: {}", r.e_min);
        }
        let ratio = rows[0].e_min / rows[1].e_min;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "window minimum unstable: ratio {ratio}"
        );
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let cut = CutoffPair::standard();
        let base = FiniteTypeConfig::standard();
        for bad in [
            FiniteTypeConfig { exponents: vec![3], ..base.clone() },
            FiniteTypeConfig { widths: vec![0.3, 0.5], ..base.clone() },
            FiniteTypeConfig { widths: vec![0.3, 0.5, -1.0], ..base.clone() },
            FiniteTypeConfig { lambdas: vec![], ..base.clone() },
            FiniteTypeConfig { lambdas: vec![0.5], ..base.clone() },
            FiniteTypeConfig { ps: vec![0.5], ..base.clone() },
            FiniteTypeConfig { mod_freq: 0.0, ..base.clone() },
            FiniteTypeConfig { n_s: 2, ..base.clone() },
            // Non-increasing contact orders are refused by the model curve.
            FiniteTypeConfig { exponents: vec![2, 2, 4], ..base.clone() },
        ] {
            assert!(run_finite_type(&cut, &bad).is_err(), "accepted {bad:?}");
        }
        // Oversized lambda must fail the band check rather than alias.
        let oversized = FiniteTypeConfig {
            lambdas: vec![64.0],
            ..FiniteTypeConfig::standard()
        };
        assert!(matches!(
            run_finite_type(&cut, &oversized),
            Err(Error::Aliasing { .. })
        ));
    }
}
