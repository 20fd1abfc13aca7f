//! Smooth cutoff functions with exact partition-of-unity structure.
//!
//! Everything here is built from the classical `exp(-1/u)` transition, so all
//! functions are infinitely differentiable with genuinely compact support.
//! The three partition families used throughout the crate are
//!
//! * dyadic shells: `sum_k shell(r / 2^k) = 1` for every `r > 0`,
//! * integer translates: `sum_n zeta(x - n) = 1` for every real `x`,
//! * telescoping gauge windows at an arbitrary dyadic ratio
//!   ([`plateau_log2`] evaluates the window stably from a base-2 logarithm,
//!   which keeps very high-power gauges inside floating-point range).
//!
//! The partition identities hold up to a few ulps, not merely up to an
//! analytic error term: each family telescopes term by term.

/// `exp(-1/u)` for `u > 0`, and `0` otherwise.
///
/// The elementary flat-at-zero building block; underflows gracefully to `0`
/// for tiny positive `u`.
fn flat_exp(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step: `0` for `u <= 0`, `1` for `u >= 1`, and a strictly
/// increasing C-infinity transition in between.
///
/// Satisfies `smooth_step(u) + smooth_step(1 - u) = 1` up to rounding.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = flat_exp(u);
        let b = flat_exp(1.0 - u);
        a / (a + b)
    }
}

/// Even plateau cutoff: `1` for `|x| <= 1/2`, `0` for `|x| >= 1`, smooth and
/// monotone on each side in between.
pub fn plateau(x: f64) -> f64 {
    smooth_step(2.0 - 2.0 * x.abs())
}

/// [`plateau`] evaluated at `x = 2^log2_x`, computed without forming `x`.
///
/// Useful when `x` is an extreme power (e.g. a gauge raised to exponent
/// `2 * N!`) that would overflow or underflow `f64`. `-inf` maps to `1`
/// (the argument `0`), `+inf` to `0`.
pub fn plateau_log2(log2_x: f64) -> f64 {
    if log2_x <= -1.0 {
        1.0
    } else if log2_x >= 0.0 {
        0.0
    } else {
        plateau(log2_x.exp2())
    }
}

/// Dyadic shell: `plateau(r/2) - plateau(r)`, supported in `(1/2, 2)` with
/// values in `[0, 1]`.
///
/// The rescalings `shell(r / 2^k)` over all integers `k` form an exact
/// partition of unity on `r > 0`.
pub fn shell(r: f64) -> f64 {
    plateau(0.5 * r) - plateau(r)
}

/// Integer-translate window: supported in `(-1, 1)`, equal to `1` at `0`,
/// with `sum_n zeta(x - n) = 1` for every real `x`.
pub fn zeta(x: f64) -> f64 {
    smooth_step(x + 1.0) - smooth_step(x)
}

/// Smooth window for the interval `[lo, hi]`: equal to `1` on
/// `[lo + margin, hi - margin]`, supported in `(lo, hi)`.
///
/// # Panics
///
/// Panics if the interval is empty or the margin exceeds half its length.
pub fn interval_bump(s: f64, lo: f64, hi: f64, margin: f64) -> f64 {
    assert!(
        hi > lo && margin > 0.0 && 2.0 * margin <= hi - lo,
        "interval_bump: need lo < hi and 0 < margin <= (hi - lo)/2"
    );
    smooth_step((s - lo) / margin) * smooth_step((hi - s) / margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smooth_step_endpoints_and_symmetry() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let s = smooth_step(u) + smooth_step(1.0 - u);
            assert!((s - 1.0).abs() < 1e-14, "u={u}: {s}");
        }
    }

    #[test]
    fn plateau_plateau_region_and_support() {
        for i in 0..=50 {
            let x = i as f64 / 100.0; // [0, 1/2]
            assert_eq!(plateau(x), 1.0);
            assert_eq!(plateau(-x), 1.0);
        }
        assert_eq!(plateau(1.0), 0.0);
        assert_eq!(plateau(-1.3), 0.0);
        let v = plateau(0.75);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn plateau_log2_matches_plateau() {
        for i in 1..400 {
            let x = i as f64 / 100.0;
            let direct = plateau(x);
            let vialog = plateau_log2(x.log2());
            assert!(
                (direct - vialog).abs() < 1e-14,
                "x={x}: {direct} vs {vialog}"
            );
        }
        assert_eq!(plateau_log2(f64::NEG_INFINITY), 1.0);
        assert_eq!(plateau_log2(f64::INFINITY), 0.0);
        assert_eq!(plateau_log2(1e6), 0.0);
        assert_eq!(plateau_log2(-1e6), 1.0);
    }

    #[test]
    fn shell_support() {
        assert_eq!(shell(0.5), 0.0);
        assert_eq!(shell(2.0), 0.0);
        assert_eq!(shell(0.1), 0.0);
        assert_eq!(shell(5.0), 0.0);
        assert!((shell(1.0) - 1.0).abs() < 1e-15); // plateau(1/2)=1, plateau(1)=0
        assert!(shell(0.7) > 0.0 && shell(1.7) > 0.0);
    }

    fn dyadic_partition_sum(r: f64) -> f64 {
        // Shells outside the window [log2 r - 2, log2 r + 2] vanish.
        let k0 = r.log2().floor() as i32;
        ((k0 - 3)..=(k0 + 3)).map(|k| shell(r / (k as f64).exp2())).sum()
    }

    #[test]
    fn shell_partition_of_unity() {
        for &r in &[1e-6, 0.03, 0.5, 1.0, 1.5, 2.0, 7.3, 1e3, 1e12] {
            let s = dyadic_partition_sum(r);
            assert!((s - 1.0).abs() < 1e-13, "r={r}: sum={s}");
        }
    }

    #[test]
    fn zeta_partition_of_unity() {
        assert_eq!(zeta(0.0), 1.0);
        assert_eq!(zeta(1.0), 0.0);
        assert_eq!(zeta(-1.0), 0.0);
        for i in -30..=30 {
            let x = i as f64 * 0.37 + 0.11;
            let n0 = x.floor() as i64;
            let s: f64 = ((n0 - 2)..=(n0 + 2)).map(|n| zeta(x - n as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x}: sum={s}");
        }
    }

    #[test]
    fn interval_bump_plateau_and_support() {
        let (lo, hi, m) = (1.0, 2.0, 0.1);
        assert_eq!(interval_bump(1.0, lo, hi, m), 0.0);
        assert_eq!(interval_bump(2.0, lo, hi, m), 0.0);
        assert_eq!(interval_bump(0.5, lo, hi, m), 0.0);
        assert_eq!(interval_bump(1.5, lo, hi, m), 1.0);
        assert_eq!(interval_bump(1.1, lo, hi, m), 1.0);
        assert_eq!(interval_bump(1.9, lo, hi, m), 1.0);
        assert!(interval_bump(1.05, lo, hi, m) < 1.0);
    }

    proptest! {
        #[test]
        fn prop_shell_partition(log_r in -20.0f64..20.0) {
            let r = log_r.exp2();
            let s = dyadic_partition_sum(r);
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn prop_zeta_partition(x in -50.0f64..50.0) {
            let n0 = x.floor() as i64;
            let s: f64 = ((n0 - 2)..=(n0 + 2)).map(|n| zeta(x - n as f64)).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn prop_smooth_step_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(smooth_step(lo) <= smooth_step(hi) + 1e-15);
        }

        #[test]
        fn prop_range(x in -3.0f64..3.0) {
            for v in [smooth_step(x), plateau(x), shell(x.abs()), zeta(x)] {
                prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            }
        }
    }
}
