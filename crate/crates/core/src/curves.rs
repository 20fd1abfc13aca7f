//! Curve families on `I = [-1, 1]` with high-order derivative evaluation,
//! plus nondegeneracy and contact-order diagnostics.
//!
//! Built-in families (moment curves, finite-type model curves, perturbed
//! moment curves, anisotropic rescalings of any of these) evaluate all
//! derivatives analytically; only user-supplied closures fall back to
//! finite differences. Exact derivatives matter downstream: decay-rate fits
//! and frame constructions are sensitive to derivative noise at orders well
//! beyond what finite differences can deliver.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// The fixed parameter interval for all curves.
pub const PARAM_INTERVAL: (f64, f64) = (-1.0, 1.0);

/// Finite-difference step for user-supplied curves.
const FD_STEP: f64 = 1e-4;

/// Default number of parameter samples for interval scans.
const DEFAULT_SCAN_SAMPLES: usize = 201;

/// `n!` as a float (exact for `n <= 170`).
pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Binomial coefficient `C(n, k)` as a float.
fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// A scalar smooth function with closed-form derivatives of every order.
///
/// Used as the coordinate factor in finite-type curves and as additive
/// perturbations; keeping the representation symbolic keeps all curve
/// derivatives exact.
#[derive(Debug, Clone)]
pub enum SmoothFn {
    /// Constant function.
    Const(f64),
    /// Polynomial with ascending coefficients `c[0] + c[1] s + ...`.
    Poly(Vec<f64>),
    /// `amp * sin(freq * s + phase)`.
    Sin {
        /// Amplitude.
        amp: f64,
        /// Angular frequency.
        freq: f64,
        /// Phase offset.
        phase: f64,
    },
}

impl SmoothFn {
    /// j-th derivative at `s`.
    pub fn eval_deriv(&self, s: f64, j: usize) -> f64 {
        match self {
            SmoothFn::Const(c) => {
                if j == 0 {
                    *c
                } else {
                    0.0
                }
            }
            SmoothFn::Poly(coeffs) => {
                let mut acc = 0.0;
                for (m, &c) in coeffs.iter().enumerate().skip(j) {
                    // d^j/ds^j s^m = m!/(m-j)! s^{m-j}
                    acc += c * (factorial(m) / factorial(m - j)) * s.powi((m - j) as i32);
                }
                acc
            }
            SmoothFn::Sin { amp, freq, phase } => {
                amp * freq.powi(j as i32)
                    * (freq * s + phase + j as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
        }
    }
}

/// Shared handle for user-supplied curve maps.
pub type CurveMap = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Internal representation of how a curve evaluates its derivatives.
#[derive(Clone)]
enum CurveKind {
    /// `(s, s^2/2!, ..., s^d/d!)`.
    Moment,
    /// Coordinates `s^{a_j} * phi_j(s)` with exact Leibniz derivatives.
    FiniteType {
        exponents: Vec<usize>,
        factors: Vec<SmoothFn>,
    },
    /// Moment curve plus a smooth additive perturbation per coordinate.
    PerturbedMoment { perturbations: Vec<SmoothFn> },
    /// Anisotropically rescaled image of another curve:
    /// `s -> mt * (base(delta * s + s0) - base(s0))`.
    Rescaled {
        base: Box<Curve>,
        s0: f64,
        delta: f64,
        mt: DMatrix<f64>,
    },
    /// User closure; derivatives via Richardson-extrapolated central
    /// differences.
    Custom { map: CurveMap },
}

/// A smooth curve `I -> R^d` with derivative evaluation up to order
/// `3d + 1` (and beyond, for the analytic families).
#[derive(Clone)]
pub struct Curve {
    dim: usize,
    label: String,
    kind: CurveKind,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

/// Central-difference first derivative with one Richardson step (O(h^4)).
fn richardson_diff(f: &dyn Fn(f64) -> Vec<f64>, s: f64, h: f64, dim: usize) -> Vec<f64> {
    let quot = |step: f64| -> Vec<f64> {
        let plus = f(s + step);
        let minus = f(s - step);
        (0..dim)
            .map(|c| (plus[c] - minus[c]) / (2.0 * step))
            .collect()
    };
    let coarse = quot(h);
    let fine = quot(0.5 * h);
    (0..dim)
        .map(|c| (4.0 * fine[c] - coarse[c]) / 3.0)
        .collect()
}

impl Curve {
    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Human-readable label (also used by the harness registry).
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Highest derivative order the diagnostics are allowed to request.
    pub fn deriv_cap(&self) -> usize {
        3 * self.dim + 1
    }

    /// `gamma(s)`.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        self.eval_deriv(s, 0)
    }

    /// j-th derivative `gamma^(j)(s)` as a vector in `R^d`.
    ///
    /// Analytic families are exact for every `j`; user closures use
    /// Richardson-extrapolated central differences recursively, which is
    /// only trustworthy for small `j`.
    pub fn eval_deriv(&self, s: f64, j: usize) -> Vec<f64> {
        match &self.kind {
            CurveKind::Moment => (1..=self.dim)
                .map(|m| {
                    if m >= j {
                        s.powi((m - j) as i32) / factorial(m - j)
                    } else {
                        0.0
                    }
                })
                .collect(),
            CurveKind::FiniteType { exponents, factors } => exponents
                .iter()
                .zip(factors)
                .map(|(&a, phi)| {
                    // Leibniz on s^a * phi(s); (s^a)^(i) = a!/(a-i)! s^{a-i}.
                    let mut acc = 0.0;
                    for i in 0..=j.min(a) {
                        let power = (factorial(a) / factorial(a - i)) * s.powi((a - i) as i32);
                        acc += binom(j, i) * power * phi.eval_deriv(s, j - i);
                    }
                    acc
                })
                .collect(),
            CurveKind::PerturbedMoment { perturbations } => (1..=self.dim)
                .map(|m| {
                    let base = if m >= j {
                        s.powi((m - j) as i32) / factorial(m - j)
                    } else {
                        0.0
                    };
                    base + perturbations[m - 1].eval_deriv(s, j)
                })
                .collect(),
            CurveKind::Rescaled {
                base,
                s0,
                delta,
                mt,
            } => {
                let inner = delta * s + s0;
                let v = if j == 0 {
                    let g = base.eval(inner);
                    let g0 = base.eval(*s0);
                    DVector::from_iterator(base.dim, g.iter().zip(&g0).map(|(a, b)| a - b))
                } else {
                    DVector::from_vec(base.eval_deriv(inner, j))
                };
                let out = mt * v * delta.powi(j as i32);
                out.iter().copied().collect()
            }
            CurveKind::Custom { map } => {
                if j == 0 {
                    let v = map(s);
                    assert_eq!(v.len(), self.dim, "custom curve map returned wrong dim");
                    v
                } else {
                    let lower = |u: f64| self.eval_deriv(u, j - 1);
                    richardson_diff(&lower, s, FD_STEP, self.dim)
                }
            }
        }
    }
}

/// The nondegenerate model curve `(s, s^2/2!, ..., s^d/d!)`.
pub fn moment_curve(d: usize) -> Result<Curve> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "moment_curve: dimension must be >= 2, got {d}"
        )));
    }
    Ok(Curve {
        dim: d,
        label: format!("moment(d={d})"),
        kind: CurveKind::Moment,
    })
}

/// Curve with coordinates `s^{a_j} * phi_j(s)` for strictly increasing
/// exponents `1 <= a_1 < ... < a_d`.
pub fn finite_type_curve(exponents: &[usize], factors: Vec<SmoothFn>) -> Result<Curve> {
    if exponents.len() < 2 {
        return Err(Error::InvalidArgument(
            "finite_type_curve: need at least 2 coordinates".into(),
        ));
    }
    if exponents.len() != factors.len() {
        return Err(Error::DimMismatch {
            expected: format!("{} factors", exponents.len()),
            found: format!("{}", factors.len()),
        });
    }
    if exponents[0] < 1 || exponents.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "finite_type_curve: exponents must satisfy 1 <= a_1 < ... < a_d, got {exponents:?}"
        )));
    }
    Ok(Curve {
        dim: exponents.len(),
        label: format!("finite_type({exponents:?})"),
        kind: CurveKind::FiniteType {
            exponents: exponents.to_vec(),
            factors,
        },
    })
}

/// Finite-type model curve with the canonical factors `phi_j = 1/a_j!`,
/// i.e. coordinates `s^{a_j} / a_j!`.
pub fn finite_type_model(exponents: &[usize]) -> Result<Curve> {
    let factors = exponents
        .iter()
        .map(|&a| SmoothFn::Const(1.0 / factorial(a)))
        .collect();
    finite_type_curve(exponents, factors)
}

/// Moment curve plus `eps * sin((3 + m) s + 0.7 m)` in coordinate `m`.
///
/// Small `eps` keeps the curve nondegenerate while breaking the polynomial
/// structure; derivatives remain exact.
pub fn perturbed_moment_curve(d: usize, eps: f64) -> Result<Curve> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "perturbed_moment_curve: dimension must be >= 2, got {d}"
        )));
    }
    if !eps.is_finite() {
        return Err(Error::InvalidArgument(
            "perturbed_moment_curve: eps must be finite".into(),
        ));
    }
    let perturbations = (1..=d)
        .map(|m| SmoothFn::Sin {
            amp: eps,
            freq: 3.0 + m as f64,
            phase: 0.7 * m as f64,
        })
        .collect();
    Ok(Curve {
        dim: d,
        label: format!("perturbed_moment(d={d},eps={eps})"),
        kind: CurveKind::PerturbedMoment { perturbations },
    })
}

/// Anisotropically rescaled curve `s -> mt * (base(delta s + s0) - base(s0))`.
///
/// `mt` must be a square `d x d` matrix. Derivatives follow by the chain
/// rule and stay exact when the base curve is analytic.
pub fn rescaled_curve(base: Curve, s0: f64, delta: f64, mt: DMatrix<f64>) -> Result<Curve> {
    let d = base.dim;
    if mt.nrows() != d || mt.ncols() != d {
        return Err(Error::DimMismatch {
            expected: format!("{d}x{d} matrix"),
            found: format!("{}x{}", mt.nrows(), mt.ncols()),
        });
    }
    if delta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rescaled_curve: delta must be positive, got {delta}"
        )));
    }
    let label = format!("rescaled({},s0={s0},delta={delta})", base.label);
    Ok(Curve {
        dim: d,
        label,
        kind: CurveKind::Rescaled {
            base: Box::new(base),
            s0,
            delta,
            mt,
        },
    })
}

/// Curve from a user-supplied closure; derivatives via finite differences.
pub fn custom_curve(dim: usize, label: impl Into<String>, map: CurveMap) -> Result<Curve> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "custom_curve: dimension must be >= 2, got {dim}"
        )));
    }
    Ok(Curve {
        dim,
        label: label.into(),
        kind: CurveKind::Custom { map },
    })
}

/// The lifted curve `s -> (1, gamma(s))` in `R^{d+1}`.
///
/// Derivatives of order >= 1 have first coordinate exactly 0.
#[derive(Debug, Clone)]
pub struct LiftedCurve {
    base: Curve,
}

impl LiftedCurve {
    /// Lift a curve to `R^{d+1}` by prepending the constant coordinate 1.
    pub fn new(base: Curve) -> Self {
        Self { base }
    }

    /// The underlying curve.
    pub fn base(&self) -> &Curve {
        &self.base
    }

    /// Ambient dimension of the lift (`d + 1`).
    pub fn dim(&self) -> usize {
        self.base.dim + 1
    }

    /// j-th derivative of the lift at `s`.
    pub fn eval_deriv(&self, s: f64, j: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.base.dim + 1);
        v.push(if j == 0 { 1.0 } else { 0.0 });
        v.extend(self.base.eval_deriv(s, j));
        v
    }

    /// Unit vector orthogonal to the first `d` lifted derivatives
    /// (orders `0..d-1`) at `s`, with the first nonzero coordinate positive.
    ///
    /// The `d` constraint rows are linearly independent for nondegenerate
    /// curves, so the kernel is one-dimensional; fails with a degenerate
    /// frame error otherwise.
    pub fn normal_direction(&self, s: f64) -> Result<Vec<f64>> {
        let d = self.base.dim;
        let rows: Vec<Vec<f64>> = (0..d).map(|j| self.eval_deriv(s, j)).collect();
        // Generalized cross product: coordinate c is the signed maximal
        // minor with column c deleted, so the dot with any row is a
        // determinant with a duplicated row and vanishes identically.
        let mut v: Vec<f64> = (0..=d)
            .map(|c| {
                let minor = DMatrix::from_fn(d, d, |i, j| {
                    let col = if j < c { j } else { j + 1 };
                    rows[i][col]
                });
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * minor.determinant()
            })
            .collect();
        let scale: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let row_scale: f64 = rows
            .iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(1.0, f64::max);
        if !(scale > 1e-10 * row_scale.powi(d as i32)) {
            return Err(Error::DegenerateFrame(format!(
                "lifted derivative rows nearly dependent at s = {s} \
                 (cross-product norm {scale:.3e})"
            )));
        }
        for x in &mut v {
            *x /= scale;
        }
        // Verify orthogonality of the extracted kernel vector.
        for (j, row) in rows.iter().enumerate() {
            let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            let scale: f64 = row.iter().map(|a| a * a).sum::<f64>().sqrt();
            if dot.abs() > 1e-8 * scale.max(1.0) {
                return Err(Error::DegenerateFrame(format!(
                    "kernel vector not orthogonal to lifted derivative {j} at s = {s}"
                )));
            }
        }
        let lead = v.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
        if lead < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        Ok(v)
    }
}

/// Smallest admissible regularity constant for a curve: the least `B >= 1`
/// with `sum_{j=0}^{3d+1} |gamma^(j)(s)| <= B / 100` over the sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityBound {
    /// The constant `B`.
    pub b: f64,
}

/// Volume of the parallelepiped spanned by `L <= d` vectors in `R^d`,
/// computed as `sqrt(det(V^T V))`.
pub fn vol_parallelepiped(vectors: &[Vec<f64>]) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument(
            "vol_parallelepiped: need at least one vector".into(),
        ));
    }
    let d = vectors[0].len();
    let l = vectors.len();
    if l > d {
        return Err(Error::InvalidArgument(format!(
            "vol_parallelepiped: {l} vectors exceed ambient dimension {d}"
        )));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::DimMismatch {
            expected: format!("vectors of length {d}"),
            found: "mixed lengths".into(),
        });
    }
    let v = DMatrix::from_fn(d, l, |i, j| vectors[j][i]);
    let gram = v.transpose() * &v;
    let det = gram.determinant();
    Ok(det.max(0.0).sqrt())
}

/// Determinant of the `d x d` matrix of derivatives of orders `1..d` at `s`.
pub fn wronskian_det(curve: &Curve, s: f64) -> f64 {
    let d = curve.dim;
    let cols: Vec<Vec<f64>> = (1..=d).map(|j| curve.eval_deriv(s, j)).collect();
    DMatrix::from_fn(d, d, |i, j| cols[j][i]).determinant()
}

/// Scan `|wronskian_det|` over a uniform grid on `interval`; returns whether
/// the minimum is strictly positive, together with that minimum.
pub fn check_nondegenerate(
    curve: &Curve,
    interval: (f64, f64),
    n_samples: usize,
) -> (bool, f64) {
    assert!(n_samples >= 2, "check_nondegenerate: need >= 2 samples");
    let (lo, hi) = interval;
    let mut min_abs = f64::INFINITY;
    for i in 0..n_samples {
        let s = lo + (hi - lo) * i as f64 / (n_samples - 1) as f64;
        min_abs = min_abs.min(wronskian_det(curve, s).abs());
    }
    (min_abs > 0.0, min_abs)
}

/// Smallest `L(s)` with `span{gamma^(1)(s), ..., gamma^(L)(s)} = R^d` at a
/// single parameter, by incremental rank scan.
fn type_at(curve: &Curve, s: f64, rel_tol: f64) -> Result<usize> {
    let d = curve.dim;
    let cap = curve.deriv_cap();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for l in 1..=cap {
        cols.push(curve.eval_deriv(s, l));
        if cols.len() < d {
            continue;
        }
        let mat = DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i]);
        let sv = mat.svd(false, false).singular_values;
        let top = sv.max();
        let rank = sv.iter().filter(|&&x| x > rel_tol * top).count();
        if rank == d {
            return Ok(l);
        }
    }
    Err(Error::TypeUndetermined { s, cap })
}

/// Maximal contact order over a sampled interval: for each sample, the
/// smallest `L` whose derivative span has full numerical rank, maximized
/// over the grid.
pub fn max_type(
    curve: &Curve,
    interval: (f64, f64),
    n_samples: usize,
    rel_tol: f64,
) -> Result<usize> {
    assert!(n_samples >= 2, "max_type: need >= 2 samples");
    let (lo, hi) = interval;
    let mut worst = 0;
    for i in 0..n_samples {
        let s = lo + (hi - lo) * i as f64 / (n_samples - 1) as f64;
        worst = worst.max(type_at(curve, s, rel_tol)?);
    }
    Ok(worst)
}

/// [`max_type`] with the default grid density and rank tolerance
/// (`1e-8` relative singular-value threshold).
pub fn max_type_default(curve: &Curve, interval: (f64, f64)) -> Result<usize> {
    max_type(curve, interval, DEFAULT_SCAN_SAMPLES, 1e-8)
}

/// Smallest `B >= 1` such that the summed derivative norms up to order
/// `3d + 1` stay below `B / 100` on a uniform grid over `I`.
pub fn curve_bound(curve: &Curve, n_samples: usize) -> RegularityBound {
    assert!(n_samples >= 2, "curve_bound: need >= 2 samples");
    let (lo, hi) = PARAM_INTERVAL;
    let cap = curve.deriv_cap();
    let mut max_sum: f64 = 0.0;
    for i in 0..n_samples {
        let s = lo + (hi - lo) * i as f64 / (n_samples - 1) as f64;
        let sum: f64 = (0..=cap)
            .map(|j| {
                let v = curve.eval_deriv(s, j);
                v.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .sum();
        max_sum = max_sum.max(sum);
    }
    RegularityBound {
        b: (100.0 * max_sum).max(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn moment_taylor_basis_at_zero() {
        let c = moment_curve(3).unwrap();
        for j in 1..=3 {
            let v = c.eval_deriv(0.0, j);
            for (m, &x) in v.iter().enumerate() {
                let expect = if m + 1 == j { 1.0 } else { 0.0 };
                assert_eq!(x, expect, "j={j}, coord {m}");
            }
        }
    }

    #[test]
    fn moment_second_derivative_d2() {
        let c = moment_curve(2).unwrap();
        assert_eq!(c.eval_deriv(0.5, 2), vec![0.0, 1.0]);
    }

    #[test]
    fn moment_derivatives_beyond_degree_vanish() {
        let c = moment_curve(4).unwrap();
        for &s in &[-0.7, 0.0, 0.3, 1.0] {
            assert!(c.eval_deriv(s, 5).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn finite_type_model_coincides_with_moment() {
        let ft = finite_type_model(&[1, 2, 3]).unwrap();
        let mc = moment_curve(3).unwrap();
        for i in 0..=20 {
            let s = -1.0 + 0.1 * i as f64;
            for j in 0..=10 {
                let a = ft.eval_deriv(s, j);
                let b = mc.eval_deriv(s, j);
                for (x, y) in a.iter().zip(&b) {
                    assert_relative_eq!(x, y, max_relative = 1e-12, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn finite_type_third_derivative_vanishes_at_zero() {
        let c = finite_type_model(&[1, 2, 4]).unwrap();
        assert_eq!(c.eval_deriv(0.0, 3), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn finite_type_rejects_bad_exponents() {
        assert!(finite_type_model(&[2, 2, 3]).is_err());
        assert!(finite_type_model(&[0, 1, 2]).is_err());
        assert!(moment_curve(1).is_err());
    }

    /// Centered finite differences of eval_deriv(., j) must converge to
    /// eval_deriv(., j+1) at rate O(h^2) on analytic families.
    #[test]
    fn derivative_consistency_order_h2() {
        let curves = [
            moment_curve(3).unwrap(),
            finite_type_model(&[1, 2, 4]).unwrap(),
            perturbed_moment_curve(2, 0.05).unwrap(),
        ];
        for c in &curves {
            for j in 0..4 {
                let s = 0.31;
                let err = |h: f64| -> f64 {
                    let plus = c.eval_deriv(s + h, j);
                    let minus = c.eval_deriv(s - h, j);
                    let exact = c.eval_deriv(s, j + 1);
                    (0..c.dim())
                        .map(|m| ((plus[m] - minus[m]) / (2.0 * h) - exact[m]).abs())
                        .fold(0.0, f64::max)
                };
                let e1 = err(1e-3);
                let e2 = err(5e-4);
                // Quartic ratio would be 4; allow slack for tiny errors.
                assert!(
                    e2 < e1 / 2.5 || e1 < 1e-10,
                    "{}: j={j}, e1={e1:.3e}, e2={e2:.3e}",
                    c.label()
                );
            }
        }
    }

    #[test]
    fn custom_curve_finite_differences_match() {
        let map: CurveMap = Arc::new(|s: f64| vec![s.sin(), s.cos()]);
        let c = custom_curve(2, "sin_cos", map).unwrap();
        let v = c.eval_deriv(0.4, 1);
        assert_relative_eq!(v[0], 0.4f64.cos(), epsilon = 1e-10);
        assert_relative_eq!(v[1], -(0.4f64.sin()), epsilon = 1e-10);
        let v2 = c.eval_deriv(0.4, 2);
        assert_relative_eq!(v2[0], -(0.4f64.sin()), epsilon = 1e-6);
    }

    #[test]
    fn vol_examples() {
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0];
        assert_relative_eq!(
            vol_parallelepiped(&[e1.clone(), e2]).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let v = vec![1.0, 0.0];
        let w = vec![2.0, 0.0];
        assert!(vol_parallelepiped(&[v, w]).unwrap() < 1e-12);
        // Derivatives of the moment curve span a unit-volume frame.
        let c = moment_curve(3).unwrap();
        let cols: Vec<_> = (1..=3).map(|j| c.eval_deriv(0.3, j)).collect();
        assert_relative_eq!(vol_parallelepiped(&cols).unwrap(), 1.0, epsilon = 1e-12);
        // Too many vectors.
        assert!(vol_parallelepiped(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn wronskian_moment_is_one() {
        for d in 2..=5 {
            let c = moment_curve(d).unwrap();
            for i in 0..=10 {
                let s = -1.0 + 0.2 * i as f64;
                assert_relative_eq!(wronskian_det(&c, s), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wronskian_finite_type_degenerates_at_origin() {
        let c = finite_type_model(&[1, 2, 4]).unwrap();
        assert_eq!(wronskian_det(&c, 0.0), 0.0);
        // Away from 0 compare against a finite-difference oracle.
        let s = 0.5;
        let h = 1e-4;
        let fd_col = |j: usize| -> Vec<f64> {
            // Central difference of order j applied to eval (j small here).
            match j {
                1 => {
                    let p = c.eval(s + h);
                    let m = c.eval(s - h);
                    (0..3).map(|i| (p[i] - m[i]) / (2.0 * h)).collect()
                }
                2 => {
                    let p = c.eval(s + h);
                    let z = c.eval(s);
                    let m = c.eval(s - h);
                    (0..3).map(|i| (p[i] - 2.0 * z[i] + m[i]) / (h * h)).collect()
                }
                3 => {
                    let p2 = c.eval(s + 2.0 * h);
                    let p = c.eval(s + h);
                    let m = c.eval(s - h);
                    let m2 = c.eval(s - 2.0 * h);
                    (0..3)
                        .map(|i| {
                            (p2[i] - 2.0 * p[i] + 2.0 * m[i] - m2[i]) / (2.0 * h * h * h)
                        })
                        .collect()
                }
                _ => unreachable!(),
            }
        };
        let cols: Vec<_> = (1..=3).map(fd_col).collect();
        let oracle = DMatrix::from_fn(3, 3, |i, j| cols[j][i]).determinant();
        assert_relative_eq!(wronskian_det(&c, s), oracle, epsilon = 1e-6);
    }

    #[test]
    fn nondegeneracy_scan() {
        let c = moment_curve(3).unwrap();
        let (ok, min) = check_nondegenerate(&c, PARAM_INTERVAL, 101);
        assert!(ok);
        assert_relative_eq!(min, 1.0, epsilon = 1e-12);

        let ft = finite_type_model(&[1, 2, 4]).unwrap();
        let (ok, min) = check_nondegenerate(&ft, PARAM_INTERVAL, 101);
        assert!(!ok);
        assert_eq!(min, 0.0);

        let c5 = moment_curve(5).unwrap();
        let (ok, min) = check_nondegenerate(&c5, PARAM_INTERVAL, 101);
        assert!(ok);
        assert_relative_eq!(min, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn max_type_examples() {
        for d in 2..=6 {
            let c = moment_curve(d).unwrap();
            assert_eq!(max_type_default(&c, PARAM_INTERVAL).unwrap(), d);
        }
        let ft = finite_type_model(&[1, 2, 4]).unwrap();
        assert_eq!(max_type_default(&ft, (-0.5, 0.5)).unwrap(), 4);
        let ft2 = finite_type_model(&[2, 3, 4]).unwrap();
        assert_eq!(max_type_default(&ft2, (-0.5, 0.5)).unwrap(), 4);
    }

    #[test]
    fn curve_bound_properties() {
        let c = moment_curve(2).unwrap();
        let b = curve_bound(&c, 101).b;
        // Direct oracle over the same grid.
        let mut oracle: f64 = 0.0;
        for i in 0..101 {
            let s = -1.0 + 0.02 * i as f64;
            let sum: f64 = (0..=7)
                .map(|j| {
                    let v = c.eval_deriv(s, j);
                    v.iter().map(|x| x * x).sum::<f64>().sqrt()
                })
                .sum();
            oracle = oracle.max(sum);
        }
        assert_relative_eq!(b, 100.0 * oracle, epsilon = 1e-12);
        assert!(b >= 1.0);

        // Doubling the curve doubles the (unclamped) bound.
        let single = finite_type_curve(&[1, 2], vec![SmoothFn::Const(1.0), SmoothFn::Const(0.5)])
            .unwrap();
        let double = finite_type_curve(&[1, 2], vec![SmoothFn::Const(2.0), SmoothFn::Const(1.0)])
            .unwrap();
        let b1 = curve_bound(&single, 51).b;
        let b2 = curve_bound(&double, 51).b;
        assert_relative_eq!(b2, 2.0 * b1, max_relative = 1e-12);
    }

    #[test]
    fn lifted_curve_structure() {
        let c = moment_curve(3).unwrap();
        let lift = LiftedCurve::new(c);
        for j in 0..=5 {
            let v = lift.eval_deriv(0.37, j);
            assert_eq!(v.len(), 4);
            assert_eq!(v[0], if j == 0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn lifted_normal_direction() {
        let lift = LiftedCurve::new(moment_curve(2).unwrap());
        let s = 0.4;
        let xi = lift.normal_direction(s).unwrap();
        let norm: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        for j in 0..2 {
            let g = lift.eval_deriv(s, j);
            let dot: f64 = g.iter().zip(&xi).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-10, "j={j}: {dot}");
        }
        // Must pair nontrivially with the d-th derivative.
        let gd = lift.eval_deriv(s, 2);
        let dot: f64 = gd.iter().zip(&xi).map(|(a, b)| a * b).sum();
        assert!(dot.abs() > 0.1);
        // Analytic kernel for the planar moment lift: (s^2/2, -s, 1) normalized.
        let raw = [s * s / 2.0, -s, 1.0];
        let rn: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (a, b) in xi.iter().zip(raw.iter()) {
            assert_relative_eq!(*a, b / rn, epsilon = 1e-10);
        }
    }

    #[test]
    fn rescaled_curve_chain_rule() {
        let base = moment_curve(2).unwrap();
        let mt = DMatrix::identity(2, 2);
        let r = rescaled_curve(base.clone(), 0.2, 0.1, mt).unwrap();
        // Value: gamma(0.1 s + 0.2) - gamma(0.2).
        let v = r.eval(0.5);
        let expect0 = base.eval(0.25);
        let off = base.eval(0.2);
        assert_relative_eq!(v[0], expect0[0] - off[0], epsilon = 1e-14);
        assert_relative_eq!(v[1], expect0[1] - off[1], epsilon = 1e-14);
        // First derivative: 0.1 * gamma'(0.25).
        let d1 = r.eval_deriv(0.5, 1);
        let g1 = base.eval_deriv(0.25, 1);
        assert_relative_eq!(d1[0], 0.1 * g1[0], epsilon = 1e-14);
        assert_relative_eq!(d1[1], 0.1 * g1[1], epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn prop_hadamard(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = rng.gen_range(2..5usize);
            let l = rng.gen_range(1..=d);
            let vecs: Vec<Vec<f64>> = (0..l)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let vol = vol_parallelepiped(&vecs).unwrap();
            let prod: f64 = vecs
                .iter()
                .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
                .product();
            prop_assert!(vol <= prod * (1.0 + 1e-10) + 1e-12);
        }

        #[test]
        fn prop_vol_permutation_invariant(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vecs: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let v1 = vol_parallelepiped(&vecs).unwrap();
            let swapped = vec![vecs[2].clone(), vecs[0].clone(), vecs[1].clone()];
            let v2 = vol_parallelepiped(&swapped).unwrap();
            prop_assert!((v1 - v2).abs() <= 1e-12 * (1.0 + v1.abs()));
        }
    }
}
