//! Splitting a frequency-windowed symbol into parameter windows and
//! gauge shells, and separating the leading reduced coefficient.
//!
//! Stage one multiplies by a translated partition of unity in `s` at scale
//! `delta0` (the `mu` pieces). Stage two grades each `mu` piece by the size
//! functional: shell `n` collects the set where the gauge is comparable to
//! `(2^n delta1)^(2 n!)`, windowed smoothly so the shells telescope back to
//! the piece exactly, and re-localizes `s` at the shell scale `2^n delta1`
//! (the `nu` windows). Stage three splits a shell piece into the part where
//! the zeroth reduced coefficient is dominated by the remaining gauge terms
//! and the complementary part.

use std::sync::Arc;

use serde::Serialize;

use crate::bumps::{plateau_log2, zeta};
use crate::curves::{factorial, Curve};
use crate::error::{Error, Result};
use crate::symbols::{Symbol, SymbolForm, SupportSample, TauSupport};

use super::gauge::GaugeContext;

/// Largest number of gauge shells a split will produce.
const MAX_SHELLS: usize = 64;

/// One gauge-shell piece of a split symbol.
#[derive(Debug, Clone)]
pub struct GaugePiece {
    /// The piece as an evaluable symbol.
    pub symbol: Symbol,
    /// Index of the parameter window at scale `delta0`.
    pub mu: i64,
    /// Gauge shell index (`0` is the innermost shell).
    pub n_shell: usize,
    /// Index of the parameter window at the shell scale.
    pub nu: i64,
    /// The shell's parameter scale `2^n_shell delta1`.
    pub scale: f64,
}

/// Index range (inclusive) of parameter windows at scale `delta0` that
/// meet the declared `s`-support of `base`.
pub fn mu_range(base: &Symbol, delta0: f64) -> Result<(i64, i64)> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mu_range: scale must lie in (0, 1], got {delta0}"
        )));
    }
    let (s_lo, s_hi) = base.support().s_interval;
    let lo = (s_lo / delta0 - 1.0).floor() as i64 + 1;
    let hi = (s_hi / delta0 + 1.0).ceil() as i64 - 1;
    Ok((lo, hi))
}

/// Window `base` to the `mu`-th translated partition-of-unity piece at
/// scale `delta0` in the parameter variable.
pub fn mu_piece(base: &Symbol, delta0: f64, mu: i64) -> Result<Symbol> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mu_piece: scale must lie in (0, 1], got {delta0}"
        )));
    }
    let inner = base.clone();
    let mut support = base.support().clone();
    let lo = delta0 * (mu - 1) as f64;
    let hi = delta0 * (mu + 1) as f64;
    support.s_interval = (support.s_interval.0.max(lo), support.s_interval.1.min(hi));
    let name = format!("{}|mu={mu}", base.name());
    Ok(Symbol::new(
        name,
        SymbolForm::General4 {
            f: Arc::new(move |s, t, tau, xi: &[f64]| {
                let z = zeta(s / delta0 - mu as f64);
                if z == 0.0 {
                    return 0.0;
                }
                inner.eval(s, t, tau, xi) * z
            }),
        },
        support,
        base.class_bound(),
        false,
    ))
}

/// Split a parameter-windowed piece into gauge shells.
///
/// Requirements:
/// * the declared `tau`-support of `base` is bounded (a stationary-frequency
///   window or an absolute bound) so the gauge is bounded on the support;
/// * the scales are ordered: `2^(3d) b delta0^((n+1)/n) <= delta1 <= delta0`
///   and `delta0 <= 2^(-3dn) b^(-n)`.
///
/// The shell count is the smallest that closes the telescoping sum on the
/// supplied support probes (with a margin), floored by the deterministic
/// bound for the parameter-distance term and capped at 64. Shell windows
/// with empty parameter support are dropped. The returned pieces sum to
/// `base` pointwise on the support wherever the probes bounded the gauge.
#[allow(clippy::too_many_arguments)]
pub fn split_by_gauge(
    base: &Symbol,
    curve: &Curve,
    k: i32,
    n: usize,
    mu: i64,
    delta0: f64,
    delta1: f64,
    b: f64,
    samples: &[SupportSample],
) -> Result<Vec<GaugePiece>> {
    let d = curve.dim();
    if !matches!(
        base.support().tau,
        TauSupport::GammaWindow { .. } | TauSupport::AbsBound { .. }
    ) {
        return Err(Error::InvalidArgument(
            "split_by_gauge: base symbol must declare a bounded tau-support".into(),
        ));
    }
    if b < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "split_by_gauge: regularity constant must be >= 1, got {b}"
        )));
    }
    if !(delta1 > 0.0 && delta1 <= delta0 && delta0 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split_by_gauge: need 0 < delta1 <= delta0 <= 1, got {delta1}, {delta0}"
        )));
    }
    let log2_d0 = delta0.log2();
    let log2_d1 = delta1.log2();
    let slack = 1e-9;
    if log2_d0 > -(n as f64) * (3.0 * d as f64 + b.log2()) + slack {
        return Err(Error::InvalidArgument(format!(
            "split_by_gauge: coarse scale {delta0} exceeds the admissible bound"
        )));
    }
    if 3.0 * d as f64 + b.log2() + (n as f64 + 1.0) / n as f64 * log2_d0 > log2_d1 + slack {
        return Err(Error::InvalidArgument(format!(
            "split_by_gauge: fine scale {delta1} below the cascade step of {delta0}"
        )));
    }

    let s_center = delta0 * mu as f64;
    let ctx = GaugeContext::new(curve, s_center, k, n)?;
    let two_nfact = 2.0 * factorial(n);

    // Shell count: close the telescoping window on the sampled support,
    // with a margin, floored by the worst case of the parameter-distance
    // term alone (|s - sigma| <= 2).
    let mut l_max = f64::NEG_INFINITY;
    for p in samples {
        if let Ok(l) = ctx.gauge_log2(p.s, p.tau, &p.xi) {
            l_max = l_max.max(l);
        }
    }
    let sampled_shells = if l_max == f64::NEG_INFINITY {
        0
    } else {
        ((l_max + 1.0) / two_nfact - log2_d1).ceil().max(0.0) as usize
    };
    let floor_shells = ((1.2 - log2_d1).ceil().max(0.0)) as usize;
    let n_max = (sampled_shells.max(floor_shells) + 2).min(MAX_SHELLS);

    let (base_lo, base_hi) = base.support().s_interval;
    let mut pieces = Vec::new();
    for shell in 0..=n_max {
        let scale = (shell as f64).exp2() * delta1;
        // nu windows meeting the mu window: |scale nu - delta0 mu| <=
        // delta0 + scale (the shell window must reach every point where the
        // translated partition of unity at the shell scale is active).
        let nu_lo = ((delta0 * mu as f64 - delta0 - scale) / scale - 1e-9).ceil() as i64;
        let nu_hi = ((delta0 * mu as f64 + delta0 + scale) / scale + 1e-9).floor() as i64;
        for nu in nu_lo..=nu_hi {
            let lo = base_lo.max(scale * (nu - 1) as f64);
            let hi = base_hi.min(scale * (nu + 1) as f64);
            if lo >= hi {
                continue;
            }
            let e_cur = two_nfact * (shell as f64 + log2_d1);
            let e_prev = (shell > 0).then(|| two_nfact * (shell as f64 - 1.0 + log2_d1));
            let f = {
                let inner = base.clone();
                let ctx = ctx.clone();
                Arc::new(move |s: f64, t: f64, tau: f64, xi: &[f64]| {
                    let v = inner.eval(s, t, tau, xi);
                    if v == 0.0 {
                        return 0.0;
                    }
                    let z = zeta(s / scale - nu as f64);
                    if z == 0.0 {
                        return 0.0;
                    }
                    let l = match ctx.gauge_log2(s, tau, xi) {
                        Ok(l) => l,
                        Err(_) => return 0.0,
                    };
                    let w = match e_prev {
                        None => plateau_log2(l - e_cur),
                        Some(ep) => plateau_log2(l - e_cur) - plateau_log2(l - ep),
                    };
                    if w == 0.0 {
                        return 0.0;
                    }
                    v * z * w
                })
            };
            let mut support = base.support().clone();
            support.s_interval = (lo, hi);
            let symbol = Symbol::new(
                format!("{}|shell={shell},nu={nu}", base.name()),
                SymbolForm::General4 { f },
                support,
                base.class_bound(),
                false,
            );
            pieces.push(GaugePiece {
                symbol,
                mu,
                n_shell: shell,
                nu,
                scale,
            });
        }
    }
    Ok(pieces)
}

/// Split a shell piece into the part where the zeroth reduced coefficient
/// is dominated by the remaining gauge terms (first return) and the
/// complementary part (second return). The two summands recombine to the
/// piece exactly up to rounding: the second is evaluated as a literal
/// difference.
///
/// `c0` sets the comparison threshold and must be at least `2^(3d) 100 b`.
pub fn split_by_leading_coefficient(
    piece: &Symbol,
    curve: &Curve,
    k: i32,
    n: usize,
    s_center: f64,
    c0: f64,
    b: f64,
) -> Result<(Symbol, Symbol)> {
    let d = curve.dim();
    let c0_min = (3.0 * d as f64).exp2() * 100.0 * b;
    if c0 < c0_min {
        return Err(Error::InvalidArgument(format!(
            "split_by_leading_coefficient: threshold {c0} below the required {c0_min}"
        )));
    }
    let ctx = GaugeContext::new(curve, s_center, k, n)?;
    let two_nfact = 2.0 * factorial(n);
    let two_nm1fact = 2.0 * factorial(n - 1);
    let log2_c0 = c0.log2();

    let factor = {
        let ctx = ctx.clone();
        move |s: f64, tau: f64, xi: &[f64]| -> f64 {
            let g0 = match ctx.reduced(tau, xi) {
                Ok((g, _)) => g[0],
                Err(_) => return 0.0,
            };
            let num = two_nm1fact * (g0.abs().log2() - k as f64);
            if num == f64::NEG_INFINITY {
                // No zeroth coefficient: the whole piece is the first part.
                return 1.0;
            }
            let rest = match ctx.gauge_reduced_log2(s, tau, xi) {
                Ok(l) => l,
                Err(_) => return 0.0,
            };
            if rest == f64::NEG_INFINITY {
                // The zeroth coefficient alone carries the gauge.
                return 0.0;
            }
            plateau_log2(num - (two_nfact * log2_c0 + rest))
        }
    };

    let lead = {
        let inner = piece.clone();
        let factor = factor.clone();
        Arc::new(move |s: f64, t: f64, tau: f64, xi: &[f64]| {
            let v = inner.eval(s, t, tau, xi);
            if v == 0.0 {
                return 0.0;
            }
            v * factor(s, tau, xi)
        })
    };
    let rest = {
        let inner = piece.clone();
        Arc::new(move |s: f64, t: f64, tau: f64, xi: &[f64]| {
            let v = inner.eval(s, t, tau, xi);
            if v == 0.0 {
                return 0.0;
            }
            v - v * factor(s, tau, xi)
        })
    };
    let first = Symbol::new(
        format!("{}|coef-dominated", piece.name()),
        SymbolForm::General4 { f: lead },
        piece.support().clone(),
        piece.class_bound(),
        false,
    );
    let second = Symbol::new(
        format!("{}|coef-leading", piece.name()),
        SymbolForm::General4 { f: rest },
        piece.support().clone(),
        piece.class_bound(),
        false,
    );
    Ok((first, second))
}

/// Measured lower bounds justifying the leading-coefficient split.
///
/// On the support of the first part the scaled tangential pairing sum
/// should be comparable to the frequency scale; on the support of the
/// second part the scaled stationary-frequency offset should be.
#[derive(Debug, Clone, Serialize)]
pub struct LeadingBounds {
    /// `inf` over first-part support of
    /// `sum_j scale^-(n-j) |<gamma^(j)(s), xi>| / 2^k`.
    pub inf_tangent_sum_ratio: f64,
    /// `inf` over second-part support of `scale^-n |tau + gamma(s).xi| / 2^k`.
    pub inf_phase_offset_ratio: f64,
    /// Probes that landed in the first part.
    pub n_first: usize,
    /// Probes that landed in the second part.
    pub n_second: usize,
}

/// Measure [`LeadingBounds`] on the given probes (typically support samples
/// of the parent shell piece).
#[allow(clippy::too_many_arguments)]
pub fn leading_split_bounds(
    first: &Symbol,
    second: &Symbol,
    curve: &Curve,
    k: i32,
    n: usize,
    scale: f64,
    samples: &[SupportSample],
) -> LeadingBounds {
    let k2 = (k as f64).exp2();
    let mut inf1 = f64::INFINITY;
    let mut inf2 = f64::INFINITY;
    let mut n_first = 0;
    let mut n_second = 0;
    for p in samples {
        if first.eval(p.s, p.t, p.tau, &p.xi) != 0.0 {
            let mut sum = 0.0;
            for j in 1..n {
                let pairing: f64 = curve
                    .eval_deriv(p.s, j)
                    .iter()
                    .zip(&p.xi)
                    .map(|(g, x)| g * x)
                    .sum();
                sum += scale.powi(-((n - j) as i32)) * pairing.abs();
            }
            inf1 = inf1.min(sum / k2);
            n_first += 1;
        }
        if second.eval(p.s, p.t, p.tau, &p.xi) != 0.0 {
            let theta: f64 = curve.eval(p.s).iter().zip(&p.xi).map(|(g, x)| g * x).sum();
            let offset = scale.powi(-(n as i32)) * (p.tau + theta).abs();
            inf2 = inf2.min(offset / k2);
            n_second += 1;
        }
    }
    LeadingBounds {
        inf_tangent_sum_ratio: inf1,
        inf_phase_offset_ratio: inf2,
        n_first,
        n_second,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::moment_curve;
    use crate::symbols::{
        psi_chi_ring, sample_localized_support, tau_window, top_order_localize,
    };
    use crate::xray::CutoffPair;

    /// Honest-scale configuration for d = 2, order 2: the scale ordering
    /// requires delta0 <= 2^-12, so desk-size scales are inadmissible.
    struct SplitConfig {
        curve: Curve,
        piece: Symbol,
        samples: Vec<SupportSample>,
        k: i32,
        n: usize,
        delta0: f64,
        delta1: f64,
    }

    fn order_two_config() -> SplitConfig {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let (k, n) = (40, 2usize);
        let delta0 = 2.0_f64.powi(-14);
        let delta1 = 2.0_f64.powi(-15);
        let b = 1.0;
        let local = top_order_localize(psi_chi_ring(&cut, k), &curve, n, delta0, b).unwrap();
        let gain = 100.0 * 2.0 * b * delta0.powi(-2);
        let windowed = tau_window(local, &curve, k, n, delta0).unwrap();
        let piece = mu_piece(&windowed, delta0, 0).unwrap();
        let samples =
            sample_localized_support(&piece, &curve, n, gain, (-delta0, delta0), 600, 17)
                .unwrap();
        SplitConfig {
            curve,
            piece,
            samples,
            k,
            n,
            delta0,
            delta1,
        }
    }

    #[test]
    fn parameter_windows_partition_base() {
        // The translated partition of unity recombines to the base symbol.
        let cfg = order_two_config();
        let windows: Vec<Symbol> = (-2..=2)
            .map(|m| mu_piece(&cfg.piece, cfg.delta0, m).unwrap())
            .collect();
        for p in cfg.samples.iter().take(100) {
            let total: f64 = windows
                .iter()
                .map(|w| w.eval(p.s, p.t, p.tau, &p.xi))
                .sum();
            let want = cfg.piece.eval(p.s, p.t, p.tau, &p.xi);
            assert!(
                (total - want).abs() <= 1e-12 * want.abs(),
                "partition of unity broke: {total} vs {want}"
            );
        }
    }

    #[test]
    fn window_index_range_covers_support() {
        // Full parameter interval (-1, 1) at scale 1/4.
        let cut = CutoffPair::standard();
        let base = crate::symbols::psi_chi(&cut);
        let (lo, hi) = mu_range(&base, 0.25).unwrap();
        assert_eq!((lo, hi), (-4, 4));
        // A window just outside the range misses the open interval.
        assert!(0.25 * (hi as f64 - 1.0) < 1.0);
        assert!(0.25 * (hi as f64 + 1.0) >= 1.0);
    }

    #[test]
    fn gauge_shells_partition_the_piece() {
        let cfg = order_two_config();
        let pieces = split_by_gauge(
            &cfg.piece,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0,
            cfg.delta0,
            cfg.delta1,
            1.0,
            &cfg.samples,
        )
        .unwrap();
        assert!(!pieces.is_empty());

        // Several distinct shells must genuinely activate.
        let mut active_shells = std::collections::BTreeSet::new();
        let mut worst = 0.0_f64;
        for p in &cfg.samples {
            let want = cfg.piece.eval(p.s, p.t, p.tau, &p.xi);
            assert!(want != 0.0, "probe fell off the support");
            let mut total = 0.0;
            for gp in &pieces {
                let v = gp.symbol.eval(p.s, p.t, p.tau, &p.xi);
                if v != 0.0 {
                    active_shells.insert(gp.n_shell);
                }
                total += v;
            }
            worst = worst.max((total - want).abs() / want.abs());
        }
        assert!(
            worst <= 1e-10,
            "shell partition residual {worst:.3e} exceeds 1e-10"
        );
        assert!(
            active_shells.len() >= 2,
            "split degenerated to shells {active_shells:?}"
        );
    }

    #[test]
    fn shell_window_counts_are_bounded() {
        let cfg = order_two_config();
        let pieces = split_by_gauge(
            &cfg.piece,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0,
            cfg.delta0,
            cfg.delta1,
            1.0,
            &cfg.samples,
        )
        .unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for gp in &pieces {
            *counts.entry(gp.n_shell).or_insert(0usize) += 1;
        }
        for (shell, count) in counts {
            let scale = (shell as f64).exp2() * cfg.delta1;
            let bound = 2.0 * cfg.delta0 / scale + 3.0;
            assert!(
                (count as f64) <= bound,
                "shell {shell} holds {count} windows, bound {bound}"
            );
        }
    }

    #[test]
    fn unbounded_window_is_rejected() {
        let cfg = order_two_config();
        let cut = CutoffPair::standard();
        let plain = psi_chi_ring(&cut, cfg.k);
        assert!(matches!(
            split_by_gauge(
                &plain,
                &cfg.curve,
                cfg.k,
                cfg.n,
                0,
                cfg.delta0,
                cfg.delta1,
                1.0,
                &[],
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn scale_ordering_is_validated() {
        let cfg = order_two_config();
        // delta1 above delta0.
        assert!(split_by_gauge(
            &cfg.piece,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0,
            cfg.delta0,
            2.0 * cfg.delta0,
            1.0,
            &[],
        )
        .is_err());
        // delta1 below the cascade step of delta0.
        assert!(split_by_gauge(
            &cfg.piece,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0,
            cfg.delta0,
            2.0_f64.powi(-40),
            1.0,
            &[],
        )
        .is_err());
        // Desk-size coarse scale violates the admissibility bound.
        assert!(split_by_gauge(
            &cfg.piece,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0,
            0.25,
            0.01,
            1.0,
            &[],
        )
        .is_err());
    }

    #[test]
    fn leading_coefficient_split_recombines() {
        let cfg = order_two_config();
        let pieces = split_by_gauge(
            &cfg.piece,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0,
            cfg.delta0,
            cfg.delta1,
            1.0,
            &cfg.samples,
        )
        .unwrap();
        // Pick the piece holding the most probes.
        let best = pieces
            .iter()
            .max_by_key(|gp| {
                cfg.samples
                    .iter()
                    .filter(|p| gp.symbol.eval(p.s, p.t, p.tau, &p.xi) != 0.0)
                    .count()
            })
            .unwrap();
        let c0 = (3.0 * 2.0_f64).exp2() * 100.0;
        let (first, second) = split_by_leading_coefficient(
            &best.symbol,
            &cfg.curve,
            cfg.k,
            cfg.n,
            0.0,
            c0,
            1.0,
        )
        .unwrap();
        let mut n_hit = 0;
        for p in &cfg.samples {
            let v = best.symbol.eval(p.s, p.t, p.tau, &p.xi);
            if v == 0.0 {
                continue;
            }
            n_hit += 1;
            let a = first.eval(p.s, p.t, p.tau, &p.xi);
            let b = second.eval(p.s, p.t, p.tau, &p.xi);
            assert!(
                (a + b - v).abs() <= 1e-13 * v.abs(),
                "recombination broke: {a} + {b} vs {v}"
            );
        }
        assert!(n_hit > 50, "only {n_hit} probes on the chosen piece");

        let bounds = leading_split_bounds(
            &first,
            &second,
            &cfg.curve,
            cfg.k,
            cfg.n,
            best.scale,
            &cfg.samples,
        );
        assert!(bounds.n_first + bounds.n_second > 0);
        if bounds.n_first > 0 {
            assert!(bounds.inf_tangent_sum_ratio.is_finite());
        }
        println!(
            "leading split bounds: tangent {:.3e} ({} probes), offset {:.3e} ({} probes)",
            bounds.inf_tangent_sum_ratio,
            bounds.n_first,
            bounds.inf_phase_offset_ratio,
            bounds.n_second
        );
    }

    #[test]
    fn low_threshold_is_rejected() {
        let cfg = order_two_config();
        assert!(split_by_leading_coefficient(
            &cfg.piece, &cfg.curve, cfg.k, cfg.n, 0.0, 100.0, 1.0,
        )
        .is_err());
    }
}
