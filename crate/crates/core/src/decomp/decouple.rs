//! Decoupling diagnostics: how the `L^p` norm of a sum of
//! frequency-localized pieces compares to the square function of the
//! pieces' norms, on sampled grids and in a grid-free Monte Carlo model.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::SampledField;

use super::cover::reverse_cover;

/// Relative squared-mass tolerance for frequency leakage outside a piece's
/// declared support.
const LEAKAGE_TOL: f64 = 1e-8;

/// Membership test for a piece's frequency support. Receives the grid
/// frequency vector (entries are `2 pi` times signed integers).
pub type SupportPredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Ratios of the norm of a sum against the square function of its pieces.
#[derive(Debug, Clone, Serialize)]
pub struct DecouplingRatios {
    /// `||sum||_2 / (sum_b ||f_b||_2^2)^(1/2)`; equals 1 for pieces with
    /// pairwise orthogonal supports.
    pub ratio_l2: f64,
    /// `||sum||_p / (sum_b ||f_b||_p^2)^(1/2)`.
    pub ratio_lp: f64,
    /// Number of pieces entering the sum.
    pub n_pieces: usize,
}

/// Measure [`DecouplingRatios`] for sampled pieces at exponent `p`.
///
/// Every piece must be in physical representation on a common grid and
/// hold at least `1 - 1e-8` of its squared frequency mass inside its
/// declared support; otherwise the measurement would silently compare
/// overlapping pieces and the call fails with a support violation.
pub fn decoupling_ratio(
    pieces: &[SampledField],
    supports: &[SupportPredicate],
    p: f64,
) -> Result<DecouplingRatios> {
    if pieces.is_empty() {
        return Err(Error::InvalidArgument(
            "decoupling_ratio: need at least one piece".into(),
        ));
    }
    if pieces.len() != supports.len() {
        return Err(Error::InvalidArgument(format!(
            "decoupling_ratio: {} pieces but {} support predicates",
            pieces.len(),
            supports.len()
        )));
    }
    let grid = pieces[0].grid().clone();
    for piece in &pieces[1..] {
        if *piece.grid() != grid {
            return Err(Error::DimMismatch {
                expected: format!("{grid:?}"),
                found: format!("{:?}", piece.grid()),
            });
        }
    }

    for (piece, support) in pieces.iter().zip(supports) {
        let hat = piece.to_fourier()?;
        let mut total = 0.0;
        let mut outside = 0.0;
        for (idx, v) in hat.values().indexed_iter() {
            let mass = v.norm_sqr();
            total += mass;
            let full: Vec<usize> = (0..grid.d).map(|a| idx[a]).collect();
            let xi = grid.xi_of(&full);
            if !support(&xi) {
                outside += mass;
            }
        }
        if total > 0.0 && outside / total > LEAKAGE_TOL {
            return Err(Error::SupportViolation {
                mass_outside: outside / total,
            });
        }
    }

    let mut sum = pieces[0].clone();
    for piece in &pieces[1..] {
        for (acc, v) in sum.values_mut().iter_mut().zip(piece.values().iter()) {
            *acc += *v;
        }
    }

    let mut sq_l2 = 0.0;
    let mut sq_lp = 0.0;
    for piece in pieces {
        sq_l2 += piece.lp_norm(2.0)?.powi(2);
        sq_lp += piece.lp_norm(p)?.powi(2);
    }
    if sq_l2 == 0.0 {
        return Err(Error::InvalidArgument(
            "decoupling_ratio: every piece vanishes".into(),
        ));
    }
    Ok(DecouplingRatios {
        ratio_l2: sum.lp_norm(2.0)? / sq_l2.sqrt(),
        ratio_lp: sum.lp_norm(p)? / sq_lp.sqrt(),
        n_pieces: pieces.len(),
    })
}

/// Grid-free Monte Carlo decoupling ratios for the model cover at scale
/// `delta`: one unit-modulus exponential per cover block, oscillating at
/// the block's distinguished interior frequency (the point whose
/// derivative pairings at the block center are `(0, ..., 0, 3/4)`), with
/// an independent uniform random phase per draw.
///
/// Each draw estimates the norms by `n_mc` uniform samples from a huge box,
/// where every per-block exponential has exact unit `L^p` norm, so the
/// square-function denominator is `sqrt(#blocks)` exactly. Draws use
/// independent, stream-separated generators and are evaluated in parallel
/// in a deterministic order.
pub fn mc_decoupling_ratio(
    delta: f64,
    n: usize,
    p: f64,
    n_mc: usize,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<DecouplingRatios>> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "mc_decoupling_ratio: exponent must be >= 2, got {p}"
        )));
    }
    if n_mc == 0 || n_draws == 0 {
        return Err(Error::InvalidArgument(
            "mc_decoupling_ratio: need at least one sample and one draw".into(),
        ));
    }
    let blocks = reverse_cover(delta, n)?;
    let dim = n + 1;
    let omegas: Vec<Vec<f64>> = blocks
        .iter()
        .map(|blk| {
            let mut q = nalgebra::DVector::zeros(dim);
            q[dim - 1] = 0.75;
            let a = nalgebra::DMatrix::from_fn(dim, dim, |row, col| {
                let (j, m) = (row + 1, col + 1);
                if m >= j {
                    blk.center.powi((m - j) as i32) / crate::curves::factorial(m - j)
                } else {
                    0.0
                }
            });
            let w = a.lu().solve(&q).ok_or_else(|| {
                Error::DegenerateFrame("moment derivative system is singular".into())
            })?;
            Ok(w.iter().copied().collect())
        })
        .collect::<Result<_>>()?;
    let b = omegas.len();

    let ratios = (0..n_draws)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(draw as u64 + 1);
            let phases: Vec<f64> = (0..b)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            let mut mean_p = 0.0;
            let mut mean_2 = 0.0;
            let mut z = vec![0.0; dim];
            for _ in 0..n_mc {
                for zc in z.iter_mut() {
                    *zc = rng.gen_range(0.0..1e6);
                }
                let mut s = Complex64::new(0.0, 0.0);
                for (omega, phase) in omegas.iter().zip(&phases) {
                    let arg: f64 =
                        omega.iter().zip(&z).map(|(o, zc)| o * zc).sum::<f64>() + phase;
                    s += Complex64::new(0.0, arg).exp();
                }
                let m2 = s.norm_sqr();
                mean_2 += m2;
                mean_p += m2.powf(p / 2.0);
            }
            mean_2 /= n_mc as f64;
            mean_p /= n_mc as f64;
            let denom = (b as f64).sqrt();
            DecouplingRatios {
                ratio_l2: mean_2.sqrt() / denom,
                ratio_lp: mean_p.powf(1.0 / p) / denom,
                n_pieces: b,
            }
        })
        .collect();
    Ok(ratios)
}
