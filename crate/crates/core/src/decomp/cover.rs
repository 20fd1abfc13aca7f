//! Model-space cover blocks and the frequency-to-block coordinate map.
//!
//! The model space is `R^(n+1)` paired against derivatives of the moment
//! curve `u -> (u, u^2/2!, ..., u^(n+1)/(n+1)!)`. A cover block at center
//! `c` and scale `delta` collects the points whose `j`-th derivative
//! pairings at `c` are below `delta^(n+1-j)` while the top pairing (the
//! constant `(n+1)`-st derivative) stays comparable to one. The reverse
//! cover walks centers across the parameter interval at spacing `delta/2`
//! so that every admissible point is caught by its nearest center.
//!
//! [`block_coordinates`] produces the linear map sending a frequency point
//! `(tau, xi)` to model coordinates in which the pairings against the
//! moment curve reproduce (up to a Taylor truncation) the rescaled pairings
//! against the lifted curve at a chosen parameter window.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curves::{factorial, Curve, LiftedCurve};
use crate::error::{Error, Result};
use crate::symbols::SupportSample;

use super::frame::{complement_basis, shift_scale_matrix};
use super::split::GaugePiece;

/// Fraction of each unit bound the admissible sampler fills. Recentering a
/// point to the nearest cover center (at most `delta/4` away) grows each
/// pairing by at most a factor `sum_a 4^-a / a! = e^(1/4) ~ 1.284`, and
/// `0.77 * 1.284 < 1`, so sampled points stay inside their nearest block.
pub(crate) const ADMISSIBLE_MARGIN: f64 = 0.77;

/// Pairing of `pt` against the `j`-th derivative of the moment curve in
/// `pt.len()` coordinates, evaluated at parameter `c`.
fn moment_pairing(j: usize, c: f64, pt: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (idx, &p) in pt.iter().enumerate() {
        let m = idx + 1;
        if m >= j {
            sum += c.powi((m - j) as i32) / factorial(m - j) * p;
        }
    }
    sum
}

/// One block of the model-space cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverBlock {
    /// Parameter center of the block.
    pub center: f64,
    /// Scale of the block.
    pub delta: f64,
    /// Derivative order: the block lives in `R^(n+1)`.
    pub n: usize,
}

impl CoverBlock {
    /// Whether `pt` (in `R^(n+1)`) belongs to this block: the top pairing
    /// is comparable to one and every lower derivative pairing at the
    /// center is below the scale power matching its order.
    pub fn contains(&self, pt: &[f64]) -> bool {
        if pt.len() != self.n + 1 {
            return false;
        }
        let top = pt[self.n].abs();
        if !(0.5..=1.0).contains(&top) {
            return false;
        }
        for j in 1..=self.n {
            let bound = self.delta.powi((self.n + 1 - j) as i32);
            if moment_pairing(j, self.center, pt).abs() > bound {
                return false;
            }
        }
        true
    }
}

/// The full cover at scale `delta`: centers spaced `delta/2` across the
/// parameter interval, so every admissible point has a center within
/// `delta/4`.
pub fn reverse_cover(delta: f64, n: usize) -> Result<Vec<CoverBlock>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "reverse_cover: scale must lie in (0, 1], got {delta}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "reverse_cover: order must be >= 2, got {n}"
        )));
    }
    let steps = (4.0 / delta).ceil() as usize;
    Ok((0..=steps)
        .map(|j| CoverBlock {
            center: -1.0 + j as f64 * delta / 2.0,
            delta,
            n,
        })
        .collect())
}

/// Index of the first block containing `pt`, if any.
pub fn covering_block(blocks: &[CoverBlock], pt: &[f64]) -> Option<usize> {
    blocks.iter().position(|b| b.contains(pt))
}

/// A sampled admissible model point together with the parameter at which
/// its pairings were prescribed.
#[derive(Debug, Clone)]
pub struct AdmissiblePoint {
    /// Parameter where the pairings were set.
    pub s: f64,
    /// The point in `R^(n+1)`.
    pub point: Vec<f64>,
}

/// Draw points that satisfy the block inequalities at a random parameter
/// with margin [`ADMISSIBLE_MARGIN`]: prescribe the derivative pairings
/// directly and solve the (unit-determinant) moment derivative system.
pub fn sample_admissible_points(
    delta: f64,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<AdmissiblePoint>> {
    if !(delta > 0.0 && delta <= 1.0) || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample_admissible_points: need 0 < delta <= 1 and order >= 2, got {delta}, {n}"
        )));
    }
    let dim = n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let s: f64 = rng.gen_range(-1.0..1.0);
        let mut q = DVector::zeros(dim);
        for j in 1..=n {
            q[j - 1] = rng.gen_range(-1.0..1.0)
                * ADMISSIBLE_MARGIN
                * delta.powi((n + 1 - j) as i32);
        }
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        q[n] = sign * rng.gen_range(0.5..ADMISSIBLE_MARGIN);
        let a = DMatrix::from_fn(dim, dim, |row, col| {
            // Row `row` is the (row+1)-st moment derivative at `s`.
            let (j, m) = (row + 1, col + 1);
            if m >= j {
                s.powi((m - j) as i32) / factorial(m - j)
            } else {
                0.0
            }
        });
        let pt = a
            .lu()
            .solve(&q)
            .ok_or_else(|| Error::DegenerateFrame("moment derivative system is singular".into()))?;
        out.push(AdmissiblePoint {
            s,
            point: pt.iter().copied().collect(),
        });
    }
    Ok(out)
}

/// Linear change of variables from frequency points `(tau, xi)` to model
/// coordinates adapted to the parameter window `mu` at scale `delta0`.
///
/// The first `n + 1` output coordinates `z` satisfy, for `j = 1..=n+1`,
/// `<model_deriv_j(u), z> = 2^-k delta0^(j-n-2) * T_(j-1)(delta0 u)` where
/// `T_i(v)` is the degree-`(n+1-i)` Taylor truncation at the window center
/// of the `i`-th derivative pairing `<lifted_deriv_i(center + v), (tau, xi)>`.
/// The remaining rows complete the map with directions transverse to the
/// first `n` spatial derivatives, making it invertible.
#[derive(Debug, Clone)]
pub struct BlockMap {
    /// Forward map, `(d+1) x (d+1)`.
    pub mat: DMatrix<f64>,
    /// Inverse map.
    pub inv: DMatrix<f64>,
    /// Derivative order of the model.
    pub n: usize,
    /// Frequency scale exponent.
    pub k: i32,
    /// Parameter window scale.
    pub delta0: f64,
    /// Parameter window index.
    pub mu: i64,
}

impl BlockMap {
    /// Apply the forward map to a frequency point.
    pub fn apply(&self, tau: f64, xi: &[f64]) -> Result<Vec<f64>> {
        let d = self.mat.nrows() - 1;
        if xi.len() != d {
            return Err(Error::DimMismatch {
                expected: format!("frequency vector of length {d}"),
                found: format!("length {}", xi.len()),
            });
        }
        let mut w = DVector::zeros(d + 1);
        w[0] = tau;
        for (i, &x) in xi.iter().enumerate() {
            w[i + 1] = x;
        }
        Ok((&self.mat * w).iter().copied().collect())
    }

    /// The model part (first `n + 1` coordinates) of the forward image.
    pub fn model_coords(&self, tau: f64, xi: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.apply(tau, xi)?;
        z.truncate(self.n + 1);
        Ok(z)
    }
}

/// Build the [`BlockMap`] for window `mu` at scale `delta0`, frequency
/// scale `2^k`, derivative order `n`.
pub fn block_coordinates(
    curve: &Curve,
    mu: i64,
    delta0: f64,
    k: i32,
    n: usize,
) -> Result<BlockMap> {
    let d = curve.dim();
    if n < 2 || n > d {
        return Err(Error::InvalidArgument(format!(
            "block_coordinates: order must lie in [2, {d}], got {n}"
        )));
    }
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "block_coordinates: scale must lie in (0, 1], got {delta0}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidArgument(format!(
            "block_coordinates: frequency exponent must be >= 1, got {k}"
        )));
    }
    let s0 = delta0 * mu as f64;
    let lifted = LiftedCurve::new(curve.clone());

    // Pairing rows: derivatives 0..=n of the lifted curve at the center.
    let mut g_rows = DMatrix::zeros(n + 1, d + 1);
    for j in 0..=n {
        let row = lifted.eval_deriv(s0, j);
        for (c, &v) in row.iter().enumerate() {
            g_rows[(j, c)] = v;
        }
    }
    let shift = shift_scale_matrix(-s0, delta0, n);
    let scale = (-(k as f64)).exp2() * delta0.powi(-(n as i32 + 1));
    let top = scale * shift.transpose() * g_rows;

    let mut mat = DMatrix::zeros(d + 1, d + 1);
    mat.view_mut((0, 0), (n + 1, d + 1)).copy_from(&top);
    if n < d {
        let derivs: Vec<DVector<f64>> = (1..=n)
            .map(|j| DVector::from_vec(curve.eval_deriv(s0, j)))
            .collect();
        let transverse = complement_basis(&derivs, d)?;
        for (i, v) in transverse.iter().enumerate() {
            for c in 0..d {
                mat[(n + 1 + i, c + 1)] = v[c];
            }
        }
    }
    let inv = mat.clone().try_inverse().ok_or_else(|| {
        Error::DegenerateFrame("block coordinate map is singular".into())
    })?;
    Ok(BlockMap {
        mat,
        inv,
        n,
        k,
        delta0,
        mu,
    })
}

/// Measured block-assignment quality for one shell piece: how far its
/// support spreads inside the assigned model block.
#[derive(Debug, Clone, Serialize)]
pub struct BlockAssignment {
    /// Shell index of the checked piece.
    pub n_shell: usize,
    /// Window index of the checked piece.
    pub nu: i64,
    /// Max over probes of `|<model_deriv_j(center), z>| / scale^(n+1-j)`
    /// for `j = 1..=n`, at the piece's model center and block scale.
    pub max_ratio: Vec<f64>,
    /// Range of the top pairing `|z_(n+1)|` over the probes.
    pub top_range: (f64, f64),
    /// Probes that landed on the piece.
    pub n_samples: usize,
}

/// Measure how the support of `piece` sits inside its assigned block under
/// `map`. Probes where the piece vanishes are skipped.
pub fn block_assignment_check(
    map: &BlockMap,
    piece: &GaugePiece,
    samples: &[SupportSample],
) -> Result<BlockAssignment> {
    let n = map.n;
    let center = piece.scale * piece.nu as f64 / map.delta0;
    let delta_blk = piece.scale / map.delta0;
    let mut max_ratio = vec![0.0_f64; n];
    let mut top_lo = f64::INFINITY;
    let mut top_hi = f64::NEG_INFINITY;
    let mut n_samples = 0;
    for p in samples {
        if piece.symbol.eval(p.s, p.t, p.tau, &p.xi) == 0.0 {
            continue;
        }
        n_samples += 1;
        let z = map.model_coords(p.tau, &p.xi)?;
        for j in 1..=n {
            let ratio =
                moment_pairing(j, center, &z).abs() / delta_blk.powi((n + 1 - j) as i32);
            max_ratio[j - 1] = max_ratio[j - 1].max(ratio);
        }
        let top = z[n].abs();
        top_lo = top_lo.min(top);
        top_hi = top_hi.max(top);
    }
    Ok(BlockAssignment {
        n_shell: piece.n_shell,
        nu: piece.nu,
        max_ratio,
        top_range: (top_lo, top_hi),
        n_samples,
    })
}
