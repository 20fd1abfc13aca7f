//! Interpolation tables for weighted exponential sums.
//!
//! The fiber operators repeatedly evaluate 1-D functions of the form
//! `u -> sum_i c_i exp(i sign t_i u)` with real coefficients `c_i` and
//! nodes `t_i` in `[1, 2]`. A cubic Hermite table (values plus analytic
//! derivatives on a uniform grid) reduces each evaluation to O(1) with
//! interpolation error around `1e-10` at step `0.01`, since the fourth
//! derivative of such a sum is bounded by `16 * sum |c_i|`.

use num_complex::Complex64;
use rayon::prelude::*;

/// Cubic Hermite interpolant on a uniform grid.
pub(crate) struct HermiteTable {
    lo: f64,
    step: f64,
    vals: Vec<Complex64>,
    ders: Vec<Complex64>,
}

impl HermiteTable {
    /// Tabulate `f` (value, derivative) over `[lo, hi]` at the given step.
    pub(crate) fn build(
        lo: f64,
        hi: f64,
        step: f64,
        f: impl Fn(f64) -> (Complex64, Complex64) + Sync,
    ) -> Self {
        assert!(hi > lo && step > 0.0, "HermiteTable: bad range");
        let n = ((hi - lo) / step).ceil() as usize + 2;
        let pairs: Vec<(Complex64, Complex64)> = (0..n)
            .into_par_iter()
            .map(|i| f(lo + i as f64 * step))
            .collect();
        let vals = pairs.iter().map(|p| p.0).collect();
        let ders = pairs.iter().map(|p| p.1).collect();
        Self {
            lo,
            step,
            vals,
            ders,
        }
    }

    /// Interpolated value; `u` must lie inside the tabulated range.
    pub(crate) fn eval(&self, u: f64) -> Complex64 {
        let x = (u - self.lo) / self.step;
        debug_assert!(x >= -1e-9 && x <= (self.vals.len() - 1) as f64 + 1e-9);
        let i = (x.floor().max(0.0) as usize).min(self.vals.len() - 2);
        let t = x - i as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        self.vals[i] * h00
            + self.ders[i] * (h10 * self.step)
            + self.vals[i + 1] * h01
            + self.ders[i + 1] * (h11 * self.step)
    }
}

/// Table for a conjugate-symmetric function (`f(-u) = conj f(u)`), stored
/// on `u >= 0` only.
pub(crate) struct ConjSymTable {
    inner: HermiteTable,
}

impl ConjSymTable {
    /// Tabulate `u -> sum_i c_i exp(i sign t_i u)` for `u` in `[0, hi]`.
    pub(crate) fn build(nodes: &[f64], coefs: &[f64], sign: f64, hi: f64, step: f64) -> Self {
        let nodes = nodes.to_vec();
        let coefs = coefs.to_vec();
        let inner = HermiteTable::build(0.0, hi, step, move |u| {
            let mut v = Complex64::new(0.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            for (&t, &c) in nodes.iter().zip(&coefs) {
                let ph = Complex64::from_polar(1.0, sign * t * u);
                v += ph * c;
                d += ph * Complex64::new(0.0, sign * t) * c;
            }
            (v, d)
        });
        Self { inner }
    }

    /// Interpolated value at any `u` with `|u|` inside the tabulated range.
    pub(crate) fn eval(&self, u: f64) -> Complex64 {
        if u >= 0.0 {
            self.inner.eval(u)
        } else {
            self.inner.eval(-u).conj()
        }
    }
}
