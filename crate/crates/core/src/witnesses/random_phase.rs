//! Random-phase witness: a sum of plane waves conormal to the curve at
//! separated parameter anchors, evaluated entirely without a spatial grid.
//!
//! At each anchor `s_l` the lifted curve `(1, gamma(s))` has a
//! one-dimensional conormal line annihilating its derivatives of order
//! `< d`; scaling that unit covector by `lambda` gives a time-space
//! frequency `(omega_l, xi_l)` whose phase `omega_l t + gamma(s) . xi_l`
//! is flat of order `d` at `s_l`. The witness is
//!
//! `f(x, t) = sum_l chi(t) exp(i (xi_l . x + omega_l t + theta_l))`
//!
//! with independent uniform phases `theta_l`, the spatial frequencies
//! snapped to the `2 pi Z^d` lattice of the periodic box.
//!
//! Norms are computed exactly from the coefficients:
//!
//! * `||f||_2^2 = L ||chi||_2^2` — distinct lattice modes are orthogonal,
//! * `||f||_4^4 = int chi(t)^4 sum_q |c_q(t)|^2 dt` where `c_q` collects
//!   the ordered mode pairs with frequency sum `q` (Parseval applied to
//!   `f^2` on the box), grouped once and reused across Monte Carlo draws.
//!
//! The expected fourth moment grows like `L^2`, and with the standard
//! anchor count `L ~ lambda^{1/d}` the model slope of
//! `E ||f||_p^p` in `log2 lambda` is `p/(2d)`
//! ([`random_phase_moment_slope`]).

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curves::{Curve, LiftedCurve};
use crate::error::{Error, Result};
use crate::xray::CutoffPair;

/// Sweep configuration for [`run_random_phase`].
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomPhaseConfig {
    /// Frequency magnitudes; anchors are `rho * lambda^{-1/d}`-separated.
    pub lambdas: Vec<f64>,
    /// Anchor separation in units of `lambda^{-1/d}`.
    pub rho: f64,
    /// Anchor count; `None` selects `floor(0.8 lambda^{1/d}) + 1`.
    pub l_count: Option<usize>,
    /// Moment order: 2 (exact, deterministic) or 4 (Monte Carlo).
    pub p: f64,
    /// Monte Carlo draws averaged per `lambda`.
    pub n_draws: usize,
    /// Base seed; draw `k` reads stream `k + 1` of this seed.
    pub seed: u64,
    /// Trapezoid nodes for time integrals.
    pub n_quad: usize,
}

impl RandomPhaseConfig {
    /// Full-scale fourth-moment sweep: `lambda` in `{64, ..., 512}`,
    /// separation 2, 64 draws.
    pub fn standard() -> Self {
        Self {
            lambdas: vec![64.0, 128.0, 256.0, 512.0],
            rho: 2.0,
            l_count: None,
            p: 4.0,
            n_draws: 64,
            seed: 17,
            n_quad: 4097,
        }
    }
}

impl Default for RandomPhaseConfig {
    fn default() -> Self {
        Self::standard()
    }
}

/// Moment statistics at one `lambda`.
#[derive(Clone, Copy, Debug)]
pub struct RandomPhaseRow {
    pub lambda: f64,
    /// Number of conormal modes in the sum.
    pub l_count: usize,
    pub p: f64,
    /// Sample mean of `||f||_p^p` over the draws.
    pub moment_mean: f64,
    /// Sample standard deviation of `||f||_p^p` over the draws.
    pub moment_std: f64,
}

/// Model slope of `log2 E ||f||_p^p` per unit `log2 lambda` under the
/// standard anchor count: `p / (2d)`.
pub fn random_phase_moment_slope(d: usize, p: f64) -> f64 {
    p / (2.0 * d as f64)
}

/// Anchor parameters: `l_count` points spaced `rho * lambda^{-1/d}` apart,
/// centered in the parameter interval; the default count
/// `floor(0.8 lambda^{1/d}) + 1` exactly fills `[-0.8, 0.8]` at `rho = 2`.
pub fn anchor_points(
    lambda: f64,
    rho: f64,
    d: usize,
    l_count: Option<usize>,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "anchor_points: need lambda > 0 and rho > 0, got {lambda}, {rho}"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "anchor_points: dimension must be >= 2, got {d}"
        )));
    }
    let inv_d = 1.0 / d as f64;
    let l = l_count.unwrap_or_else(|| (0.8 * lambda.powf(inv_d)).floor() as usize + 1);
    if l == 0 {
        return Err(Error::InvalidArgument(
            "anchor_points: need at least one anchor".into(),
        ));
    }
    let sep = rho * lambda.powf(-inv_d);
    let span = sep * (l - 1) as f64;
    if span > 1.6 + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "anchor_points: {l} anchors at separation {sep:.4} span {span:.3}, \
             exceeding the interval [-0.8, 0.8]"
        )));
    }
    Ok((0..l).map(|i| -span / 2.0 + i as f64 * sep).collect())
}

/// Conormal mode at each anchor: time frequency `omega = lambda * v_0` and
/// lattice spatial mode `k = round(lambda * v_x / 2 pi)`, where `v` is the
/// unit conormal of the lifted curve. Fails if two anchors snap to the same
/// spatial mode, which would break the exact orthogonality used by the
/// norm formulas.
pub fn conormal_modes(
    curve: &Curve,
    lambda: f64,
    anchors: &[f64],
) -> Result<Vec<(f64, Vec<i64>)>> {
    let lifted = LiftedCurve::new(curve.clone());
    let mut modes = Vec::with_capacity(anchors.len());
    for &s in anchors {
        let v = lifted.normal_direction(s)?;
        let omega = lambda * v[0];
        let k: Vec<i64> = v[1..]
            .iter()
            .map(|&c| (lambda * c / TAU).round() as i64)
            .collect();
        modes.push((omega, k));
    }
    let mut seen: Vec<&Vec<i64>> = modes.iter().map(|(_, k)| k).collect();
    seen.sort();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "conormal_modes: spatial modes collide at lambda = {lambda}; \
             increase lambda or the separation"
        )));
    }
    Ok(modes)
}

/// Uniform phases used by draw `draw`: stream `draw + 1` of the base seed,
/// one value in `[0, 2 pi)` per mode, in anchor order. Exposed so that
/// grid-based oracles can rebuild the exact same field.
pub fn draw_phases(seed: u64, draw: usize, l_count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64 + 1);
    (0..l_count).map(|_| TAU * rng.gen::<f64>()).collect()
}

fn trapezoid_nodes(interval: (f64, f64), n: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = interval;
    let dt = (hi - lo) / (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|i| lo + i as f64 * dt).collect();
    let mut ws = vec![dt; n];
    ws[0] = dt / 2.0;
    ws[n - 1] = dt / 2.0;
    (ts, ws)
}

/// Run the sweep: one row per `lambda`, with `||f||_p^p` statistics over
/// the Monte Carlo draws (the `p = 2` moment is deterministic).
pub fn run_random_phase(
    curve: &Curve,
    cut: &CutoffPair,
    cfg: &RandomPhaseConfig,
) -> Result<Vec<RandomPhaseRow>> {
    if cfg.p != 2.0 && cfg.p != 4.0 {
        return Err(Error::InvalidArgument(format!(
            "run_random_phase: moment order must be 2 or 4, got {}",
            cfg.p
        )));
    }
    if cfg.n_draws == 0 || cfg.n_quad < 3 || cfg.lambdas.is_empty() {
        return Err(Error::InvalidArgument(
            "run_random_phase: need draws >= 1, quadrature nodes >= 3, \
             and at least one lambda"
                .into(),
        ));
    }
    let d = curve.dim();
    let (ts, ws) = trapezoid_nodes(cut.chi_support(), cfg.n_quad);
    let chi: Vec<f64> = ts.iter().map(|&t| cut.chi(t)).collect();
    let mut rows = Vec::with_capacity(cfg.lambdas.len());
    for &lambda in &cfg.lambdas {
        let anchors = anchor_points(lambda, cfg.rho, d, cfg.l_count)?;
        let modes = conormal_modes(curve, lambda, &anchors)?;
        let l = modes.len();
        let (mean, std) = if cfg.p == 2.0 {
            // Distinct lattice modes are orthogonal on the box, so the
            // squared norm is exactly the mode count times the squared
            // time-profile norm, independent of the phases.
            let chi2: f64 = chi.iter().zip(&ws).map(|(c, w)| c * c * w).sum();
            (l as f64 * chi2, 0.0)
        } else {
            fourth_moment_stats(&modes, &ts, &ws, &chi, cfg)?
        };
        rows.push(RandomPhaseRow {
            lambda,
            l_count: l,
            p: cfg.p,
            moment_mean: mean,
            moment_std: std,
        });
    }
    Ok(rows)
}

/// Monte Carlo statistics of `||f||_4^4` via the pair-sum identity.
fn fourth_moment_stats(
    modes: &[(f64, Vec<i64>)],
    ts: &[f64],
    ws: &[f64],
    chi: &[f64],
    cfg: &RandomPhaseConfig,
) -> Result<(f64, f64)> {
    let l = modes.len();
    // Group ordered pairs by spatial frequency sum; a BTreeMap keeps the
    // accumulation order (and therefore the emitted floats) reproducible.
    let mut groups: BTreeMap<Vec<i64>, Vec<(usize, usize)>> = BTreeMap::new();
    for a in 0..l {
        for b in 0..l {
            let q: Vec<i64> = modes[a]
                .1
                .iter()
                .zip(&modes[b].1)
                .map(|(x, y)| x + y)
                .collect();
            groups.entry(q).or_default().push((a, b));
        }
    }
    let groups: Vec<Vec<(usize, usize)>> = groups.into_values().collect();
    let weights: Vec<f64> = chi
        .iter()
        .zip(ws)
        .map(|(c, w)| c.powi(4) * w)
        .collect();
    let mut samples = Vec::with_capacity(cfg.n_draws);
    let mut phasors = vec![Complex64::new(0.0, 0.0); l];
    for draw in 0..cfg.n_draws {
        let thetas = draw_phases(cfg.seed, draw, l);
        let mut integral = 0.0;
        for (i, (&t, &w4)) in ts.iter().zip(&weights).enumerate() {
            if w4 == 0.0 && i != 0 && i != ts.len() - 1 {
                continue;
            }
            for (ph, ((omega, _), theta)) in
                phasors.iter_mut().zip(modes.iter().zip(&thetas))
            {
                *ph = Complex64::from_polar(1.0, omega * t + theta);
            }
            let mut shell_sum = 0.0;
            for group in &groups {
                let mut c = Complex64::new(0.0, 0.0);
                for &(a, b) in group {
                    c += phasors[a] * phasors[b];
                }
                shell_sum += c.norm_sqr();
            }
            integral += w4 * shell_sum;
        }
        samples.push(integral);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((mean, std))
}
