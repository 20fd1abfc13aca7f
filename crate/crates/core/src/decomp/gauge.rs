//! The graded size functional that drives the shell splitting.
//!
//! At frequency scale `2^k` and order `n`, the functional combines the
//! reduced pairing coefficients `g^0..g^(n-2)` and the distance of `s` from
//! the critical parameter `sigma(xi)`:
//!
//! `sum_j (2^-k |g^j|)^(2 n! / (n - j)) + |s - sigma(xi)|^(2 n!)`.
//!
//! The exponents reach 120 at order 5, far beyond what direct `powf`
//! arithmetic can hold without underflow, so everything is computed and
//! combined in base-2 logarithms.

use crate::curves::{factorial, Curve, LiftedCurve};
use crate::error::{Error, Result};
use crate::symbols::solve_critical_s;

use super::recursion::{reduce_pairings, y_coords};

/// Exponent of the `j`-th coefficient term, `2 n! / (n - j)` (an integer
/// for all `j <= n - 2`, `n <= 5`).
pub fn term_exponent(n: usize, j: usize) -> f64 {
    2.0 * factorial(n) / (n - j) as f64
}

/// Base-2 logs of the individual gauge terms: one per coefficient
/// `j = 0..n-2` and the parameter-distance term last.
///
/// `g` must hold the `n + 1` reduced coefficients; vanishing inputs yield
/// `-inf` entries (the term is zero).
pub fn gauge_terms_log2(k: i32, n: usize, g: &[f64], s_minus_sigma: f64) -> Vec<f64> {
    let mut terms = Vec::with_capacity(n);
    for (j, gj) in g.iter().enumerate().take(n - 1) {
        terms.push(term_exponent(n, j) * (gj.abs().log2() - k as f64));
    }
    terms.push(2.0 * factorial(n) * s_minus_sigma.abs().log2());
    terms
}

/// log2 of a sum of nonnegative quantities given by their base-2 logs
/// (log-sum-exp in base 2). Empty input or all `-inf` gives `-inf`.
pub fn combine_log2(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|t| (t - m).exp2()).sum();
    m + sum.log2()
}

/// Evaluation context for the size functional of a curve at a center
/// parameter and frequency scale.
#[derive(Debug, Clone)]
pub struct GaugeContext {
    curve: Curve,
    lifted: LiftedCurve,
    /// Parameter point the pairings are taken at.
    pub s_center: f64,
    /// Dyadic frequency-scale exponent.
    pub k: i32,
    /// Order of the grading.
    pub n: usize,
}

impl GaugeContext {
    /// Build a context; requires order >= 2 and a positive frequency scale.
    pub fn new(curve: &Curve, s_center: f64, k: i32, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "GaugeContext: order must be >= 2, got {n}"
            )));
        }
        if k < 1 {
            return Err(Error::InvalidArgument(format!(
                "GaugeContext: frequency exponent must be >= 1, got {k}"
            )));
        }
        Ok(Self {
            curve: curve.clone(),
            lifted: LiftedCurve::new(curve.clone()),
            s_center,
            k,
            n,
        })
    }

    /// The underlying curve.
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    /// Pairings `y^0..y^n` of `(tau, xi)` at the center.
    pub fn pairings(&self, tau: f64, xi: &[f64]) -> Result<Vec<f64>> {
        y_coords(&self.lifted, self.s_center, self.n, tau, xi)
    }

    /// Reduced coefficients and ratio at the center.
    pub fn reduced(&self, tau: f64, xi: &[f64]) -> Result<(Vec<f64>, f64)> {
        reduce_pairings(&self.pairings(tau, xi)?)
    }

    /// log2 of the full size functional at `(s, tau, xi)`.
    pub fn gauge_log2(&self, s: f64, tau: f64, xi: &[f64]) -> Result<f64> {
        let (g, _) = self.reduced(tau, xi)?;
        let sigma = solve_critical_s(&self.curve, self.n, xi)?;
        Ok(combine_log2(&gauge_terms_log2(
            self.k,
            self.n,
            &g,
            s - sigma,
        )))
    }

    /// log2 of the size functional with the `j = 0` coefficient term
    /// removed (the leading-coefficient comparison denominator).
    pub fn gauge_reduced_log2(&self, s: f64, tau: f64, xi: &[f64]) -> Result<f64> {
        let (g, _) = self.reduced(tau, xi)?;
        let sigma = solve_critical_s(&self.curve, self.n, xi)?;
        let terms = gauge_terms_log2(self.k, self.n, &g, s - sigma);
        Ok(combine_log2(&terms[1..]))
    }

    /// The size functional itself (may underflow to 0 at high order; use
    /// [`GaugeContext::gauge_log2`] where that matters).
    pub fn gauge(&self, s: f64, tau: f64, xi: &[f64]) -> Result<f64> {
        Ok(self.gauge_log2(s, tau, xi)?.exp2())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::moment_curve;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn combiner_matches_direct_sum() {
        let terms = [-3.0, -1.5, -7.25];
        let got = combine_log2(&terms);
        let want = terms.iter().map(|t| t.exp2()).sum::<f64>().log2();
        assert_relative_eq!(got, want, epsilon = 1e-14);
        assert_eq!(combine_log2(&[]), f64::NEG_INFINITY);
        assert_eq!(
            combine_log2(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        assert_relative_eq!(
            combine_log2(&[2.5, f64::NEG_INFINITY]),
            2.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gauge_matches_direct_powers_at_low_order() {
        // Orders 2 and 3 stay within f64 range, so the log-space value must
        // agree with the direct powf sum.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, n) in [(2usize, 2usize), (3, 3)] {
            let curve = moment_curve(d).unwrap();
            let ctx = GaugeContext::new(&curve, 0.0, 6, n).unwrap();
            for _ in 0..200 {
                // Keep the critical parameter inside the interval: the root
                // of the next-to-top pairing is -xi_{n-1}/xi_n for this curve.
                let mut xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                xi[d - 1] = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                xi[d - 2] = rng.gen_range(-0.9..0.9) * xi[d - 1];
                let xi: Vec<f64> = xi.iter().map(|x| x * 64.0).collect();
                let tau = rng.gen_range(-64.0..64.0);
                let s = rng.gen_range(-0.9..0.9);

                let (g, _) = ctx.reduced(tau, &xi).unwrap();
                let sigma = solve_critical_s(&curve, n, &xi).unwrap();
                let mut direct = 0.0;
                for j in 0..=n - 2 {
                    direct +=
                        ((-(6.0_f64)).exp2() * g[j].abs()).powf(term_exponent(n, j));
                }
                direct += (s - sigma).abs().powf(2.0 * factorial(n));
                let got = ctx.gauge(s, tau, &xi).unwrap();
                assert_relative_eq!(got, direct, max_relative = 1e-12, epsilon = 1e-300);

                let mut reduced_direct = (s - sigma).abs().powf(2.0 * factorial(n));
                for j in 1..=n - 2 {
                    reduced_direct +=
                        ((-(6.0_f64)).exp2() * g[j].abs()).powf(term_exponent(n, j));
                }
                let got_reduced = ctx.gauge_reduced_log2(s, tau, &xi).unwrap().exp2();
                assert_relative_eq!(
                    got_reduced,
                    reduced_direct,
                    max_relative = 1e-12,
                    epsilon = 1e-300
                );
            }
        }
    }

    #[test]
    fn doubling_scales_each_term_by_its_exponent() {
        // Doubling a coefficient multiplies its term by 2^(2 n!/(n-j));
        // doubling the parameter distance multiplies the last term by 2^(2 n!).
        for n in 2..=5 {
            let g: Vec<f64> = (0..=n).map(|j| 0.3 + 0.1 * j as f64).collect();
            let g2: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
            let base = gauge_terms_log2(10, n, &g, 0.25);
            let doubled = gauge_terms_log2(10, n, &g2, 0.5);
            for j in 0..=n - 2 {
                assert_relative_eq!(
                    doubled[j] - base[j],
                    term_exponent(n, j),
                    epsilon = 1e-9
                );
            }
            let last = base.len() - 1;
            assert_relative_eq!(
                doubled[last] - base[last],
                2.0 * factorial(n),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn high_order_values_survive_only_in_log_space() {
        // Order 5: with coefficients ~2^-10 at k = 20 the smallest term is
        // 2^-3600 and even the largest contribution sits near 2^-1200,
        // below the subnormal floor. The log-space value is exact while the
        // direct value underflows to zero.
        let n = 5;
        let k = 20;
        let g = vec![2.0_f64.powi(-10); n + 1];
        let s_minus_sigma = 2.0_f64.powi(-5);
        let terms = gauge_terms_log2(k, n, &g, s_minus_sigma);
        let expected = [-1440.0, -1800.0, -2400.0, -3600.0, -1200.0];
        for (got, want) in terms.iter().zip(expected) {
            assert_relative_eq!(got, &want, epsilon = 1e-9);
        }
        let combined = combine_log2(&terms);
        assert_relative_eq!(combined, -1200.0, epsilon = 1e-9);
        assert_eq!(combined.exp2(), 0.0);
    }

    #[test]
    fn gauge_vanishes_exactly_on_the_critical_set() {
        // d = n = 2, frequency along the second axis: the critical
        // parameter is 0, the tangent pairing vanishes, and the zeroth
        // coefficient equals tau. So the gauge is zero iff tau = 0, s = 0.
        let curve = moment_curve(2).unwrap();
        let ctx = GaugeContext::new(&curve, 0.0, 4, 2).unwrap();
        let xi = [0.0, 16.0];
        assert_eq!(ctx.gauge(0.0, 0.0, &xi).unwrap(), 0.0);
        assert!(ctx.gauge(0.0, 0.5, &xi).unwrap() > 0.0);
        assert!(ctx.gauge(0.25, 0.0, &xi).unwrap() > 0.0);
    }

    #[test]
    fn context_rejects_bad_orders() {
        let curve = moment_curve(2).unwrap();
        assert!(GaugeContext::new(&curve, 0.0, 4, 1).is_err());
        assert!(GaugeContext::new(&curve, 0.0, 0, 2).is_err());
    }
}
