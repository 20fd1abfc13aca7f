//! Fiberwise singular-value machinery.
//!
//! After the unitary spatial DFT, every operator in this crate acts
//! mode-by-mode: the restriction to one frequency `xi` is a small dense
//! matrix mapping samples along the curve parameter to samples along the
//! integration time. With the quadrature weights folded in symmetrically,
//! the largest singular value of that matrix is the discrete
//! `L^2 -> L^2` norm of the fiber, and the supremum over modes in the
//! symbol's declared support is the operator norm of the full multiplier.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::symbols::{Symbol, SymbolForm, XiSupport};

use super::tables::ConjSymTable;

/// Integration-time interval.
pub const T_INTERVAL: (f64, f64) = (1.0, 2.0);

/// Step of the interpolation table for weighted exponential sums.
const P_TABLE_STEP: f64 = 0.01;

/// Dense matrices up to this element count go through full SVD; larger
/// fibers use the iterative largest-eigenvalue solver on the Gram matrix.
const DENSE_SVD_LIMIT: usize = 200_000;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn trapezoid(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let pts = (0..n).map(|i| lo + i as f64 * h).collect();
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    (pts, w)
}

/// Discretization shared by the fiberwise computations: the spatial
/// frequency lattice size together with inclusive trapezoid grids for the
/// curve parameter and the integration time.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberGrid {
    d: usize,
    n_x: usize,
    s_interval: (f64, f64),
    n_s: usize,
    n_t: usize,
}

impl FiberGrid {
    /// Validated constructor.
    pub fn new(
        d: usize,
        n_x: usize,
        s_interval: (f64, f64),
        n_s: usize,
        n_t: usize,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("FiberGrid: d must be >= 1".into()));
        }
        if n_x < 2 || !n_x.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "FiberGrid: n_x must be a power of two >= 2, got {n_x}"
            )));
        }
        if n_s < 2 || n_t < 2 {
            return Err(Error::InvalidArgument(format!(
                "FiberGrid: need n_s >= 2 and n_t >= 2, got {n_s}, {n_t}"
            )));
        }
        if !(s_interval.1 > s_interval.0) {
            return Err(Error::InvalidArgument(format!(
                "FiberGrid: empty parameter interval [{}, {}]",
                s_interval.0, s_interval.1
            )));
        }
        Ok(Self {
            d,
            n_x,
            s_interval,
            n_s,
            n_t,
        })
    }

    /// Default resolution: full parameter interval, 129 parameter samples,
    /// 65 time samples.
    pub fn standard(d: usize, n_x: usize) -> Result<Self> {
        Self::new(d, n_x, (-1.0, 1.0), 129, 65)
    }

    /// Spatial dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Samples per spatial axis.
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// Curve-parameter interval.
    pub fn s_interval(&self) -> (f64, f64) {
        self.s_interval
    }

    /// Number of curve-parameter samples.
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Number of time samples.
    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Curve-parameter sample points (inclusive endpoints).
    pub fn s_points(&self) -> Vec<f64> {
        trapezoid(self.s_interval.0, self.s_interval.1, self.n_s).0
    }

    /// Trapezoid weights for the parameter axis.
    pub fn s_weights(&self) -> Vec<f64> {
        trapezoid(self.s_interval.0, self.s_interval.1, self.n_s).1
    }

    /// Time sample points (inclusive endpoints).
    pub fn t_points(&self) -> Vec<f64> {
        trapezoid(T_INTERVAL.0, T_INTERVAL.1, self.n_t).0
    }

    /// Trapezoid weights for the time axis.
    pub fn t_weights(&self) -> Vec<f64> {
        trapezoid(T_INTERVAL.0, T_INTERVAL.1, self.n_t).1
    }

    /// Time step.
    pub fn delta_t(&self) -> f64 {
        (T_INTERVAL.1 - T_INTERVAL.0) / (self.n_t - 1) as f64
    }

    /// Total number of spatial frequency modes.
    pub fn n_modes(&self) -> usize {
        self.n_x.pow(self.d as u32)
    }

    /// Signed integer frequency indices of a flat (row-major) mode index.
    pub fn signed_index_of_flat(&self, mut m: usize) -> Vec<i64> {
        let mut idx = vec![0i64; self.d];
        for c in (0..self.d).rev() {
            let i = m % self.n_x;
            m /= self.n_x;
            idx[c] = if i < self.n_x / 2 {
                i as i64
            } else {
                i as i64 - self.n_x as i64
            };
        }
        idx
    }

    /// Frequency vector `2 pi m` of a flat mode index.
    pub fn xi_of_flat(&self, m: usize) -> Vec<f64> {
        self.signed_index_of_flat(m)
            .iter()
            .map(|&c| 2.0 * std::f64::consts::PI * c as f64)
            .collect()
    }

    /// Largest dyadic-shell index whose outer radius `2^{k+1}` stays within
    /// the per-axis Nyquist bound `pi * n_x`.
    pub fn max_resolved_shell(&self) -> i32 {
        let nyquist = std::f64::consts::PI * self.n_x as f64;
        let mut k = 0;
        while ((k + 2) as f64).exp2() <= nyquist {
            k += 1;
        }
        k
    }
}

/// The weighted fiber matrix of a `tau`-independent symbol at one frequency:
/// `M[i, j] = sqrt(wt_i) * exp(-i t_i theta_j) * a(s_j, t_i, xi) * sqrt(ws_j)`
/// with `theta_j = gamma(s_j) . xi`. Its largest singular value is the
/// weighted-quadrature `L^2(s) -> L^2(t)` norm of the fiber operator.
#[derive(Debug, Clone)]
pub struct FiberMatrix {
    mat: DMatrix<Complex64>,
}

impl FiberMatrix {
    /// Build the fiber matrix; `Ok(None)` means the symbol vanishes
    /// identically on this fiber.
    pub fn build(a: &Symbol, curve: &Curve, fg: &FiberGrid, xi: &[f64]) -> Result<Option<Self>> {
        if a.is_tau_dependent() {
            return Err(Error::InvalidArgument(format!(
                "FiberMatrix: symbol {} depends on tau",
                a.name()
            )));
        }
        if curve.dim() != fg.d() || xi.len() != fg.d() {
            return Err(Error::DimMismatch {
                expected: format!("dimension {}", fg.d()),
                found: format!("curve {}, xi {}", curve.dim(), xi.len()),
            });
        }
        Ok(Self::build_validated(a, curve, fg, xi))
    }

    fn build_validated(a: &Symbol, curve: &Curve, fg: &FiberGrid, xi: &[f64]) -> Option<Self> {
        let s_pts = fg.s_points();
        let ws = fg.s_weights();
        let t_pts = fg.t_points();
        let wt = fg.t_weights();
        let dt = fg.delta_t();
        let mut mat = DMatrix::<Complex64>::zeros(fg.n_t(), fg.n_s());
        let mut any = false;
        for (j, &s) in s_pts.iter().enumerate() {
            let theta = dot(&curve.eval(s), xi);
            let mut ph = Complex64::from_polar(1.0, -t_pts[0] * theta);
            let step = Complex64::from_polar(1.0, -dt * theta);
            let sw = ws[j].sqrt();
            for (i, &t) in t_pts.iter().enumerate() {
                let v = a.eval3(s, t, xi);
                if v != 0.0 {
                    mat[(i, j)] = ph * (wt[i].sqrt() * v * sw);
                    any = true;
                }
                ph *= step;
            }
        }
        any.then_some(Self { mat })
    }

    /// Matrix dimensions `(n_t, n_s)`.
    pub fn shape(&self) -> (usize, usize) {
        self.mat.shape()
    }

    /// Read-only access to the weighted matrix.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Largest singular value.
    pub fn opnorm(&self) -> f64 {
        let (r, c) = self.mat.shape();
        if r * c <= DENSE_SVD_LIMIT {
            SVD::new(self.mat.clone(), false, false).singular_values.max()
        } else {
            let lam = lanczos_largest_hermitian(
                c,
                |v| self.mat.ad_mul(&(&self.mat * v)),
                1e-11,
                300,
            );
            lam.max(0.0).sqrt()
        }
    }
}

/// Largest eigenvalue of a Hermitian positive-semidefinite operator given
/// by its matrix-vector product, via the Lanczos iteration with full
/// reorthogonalization and a deterministic start vector.
pub(crate) fn lanczos_largest_hermitian(
    n: usize,
    matvec: impl Fn(&DVector<Complex64>) -> DVector<Complex64>,
    rel_tol: f64,
    max_iter: usize,
) -> f64 {
    assert!(n > 0, "lanczos_largest_hermitian: empty space");
    let mut v = DVector::from_fn(n, |j, _| {
        Complex64::new(1.0 + 0.01 * (1.7 * j as f64).sin(), 0.0)
    });
    let _ = v.normalize_mut();
    let mut basis: Vec<DVector<Complex64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    let mut lam_prev = f64::NEG_INFINITY;
    for iter in 0..max_iter {
        let vk = basis.last().expect("nonempty basis");
        let mut w = matvec(vk);
        alphas.push(vk.dotc(&w).re);
        // Two projection sweeps against the whole basis subtract the
        // alpha/beta components and restore orthogonality lost to rounding.
        for _ in 0..2 {
            for u in &basis {
                let c = u.dotc(&w);
                w.axpy(-c, u, one);
            }
        }
        let beta = w.norm();
        let k = alphas.len();
        let mut tri = DMatrix::<f64>::zeros(k, k);
        for (i, &a) in alphas.iter().enumerate() {
            tri[(i, i)] = a;
        }
        for (i, &b) in betas.iter().enumerate() {
            tri[(i, i + 1)] = b;
            tri[(i + 1, i)] = b;
        }
        let lam = SymmetricEigen::new(tri).eigenvalues.max();
        if k == n {
            // Krylov space exhausted: the tridiagonal spectrum is exact.
            return lam;
        }
        let scale = alphas
            .iter()
            .chain(betas.iter())
            .fold(1e-300_f64, |m, &x| m.max(x.abs()));
        if beta <= 1e-13 * scale {
            return lam;
        }
        if iter >= 2 && (lam - lam_prev).abs() <= rel_tol * lam.abs().max(1e-300) {
            return lam;
        }
        lam_prev = lam;
        betas.push(beta);
        basis.push(w.unscale(beta));
    }
    lam_prev
}

/// Flat indices of the frequency modes a singular-value sweep must visit:
/// the modes inside the symbol's declared frequency support, reduced to one
/// representative per conjugate pair when the symbol is even in `xi`.
fn enumerate_modes(fg: &FiberGrid, a: &Symbol) -> Result<Vec<usize>> {
    let support = &a.support().xi;
    match support {
        XiSupport::Annulus { k } | XiSupport::AnnulusCone { k, .. } => {
            if *k < 0 {
                return Err(Error::InvalidArgument(format!(
                    "shell index must be >= 0, got {k}"
                )));
            }
            if *k > fg.max_resolved_shell() {
                return Err(Error::AnnulusOutOfRange {
                    k: *k,
                    n_x: fg.n_x(),
                });
            }
        }
        XiSupport::All => {}
    }
    let even = a.even_in_xi();
    let half = (fg.n_x() / 2) as i64;
    let mut out = Vec::new();
    for m in 0..fg.n_modes() {
        if even {
            let signed = fg.signed_index_of_flat(m);
            // Keep one mode of each conjugate pair {xi, -xi}; modes with a
            // component at the unpaired Nyquist index -n_x/2 have no lattice
            // negative and are always kept.
            if !signed.iter().any(|&c| c == -half) {
                if let Some(&first) = signed.iter().find(|&&c| c != 0) {
                    if first < 0 {
                        continue;
                    }
                }
            }
        }
        let xi = fg.xi_of_flat(m);
        if support.contains(&xi) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Fiber norm of a `t`-separable symbol from its Gram matrix
/// `G[j, j'] = b_j b_j' P(theta_j - theta_j')`, where
/// `P(u) = sum_i wt_i t_profile(t_i)^2 exp(i u t_i)` and
/// `b_j = sqrt(ws_j) * s_xi(s_j, xi)`. The largest singular value is
/// `sqrt(lambda_max(G))`.
fn separable_fiber_opnorm(b: &[f64], theta: &[f64], table: &ConjSymTable, p0: f64) -> f64 {
    let n = b.len();
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return b[0].abs() * p0.sqrt();
    }
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for jp in j..n {
            let val = table.eval(theta[j] - theta[jp]) * (b[j] * b[jp]);
            g[(j, jp)] = val;
            g[(jp, j)] = val.conj();
        }
    }
    let lam = lanczos_largest_hermitian(n, |v| &g * v, 1e-11, 300);
    lam.max(0.0).sqrt()
}

/// Largest weighted fiber singular value over all frequency modes in the
/// symbol's declared support: the discrete `L^2(x, s) -> L^2(x, t)` operator
/// norm of the symbol operator on the given grid.
///
/// `t`-separable symbols go through a Gram-matrix fast path with an
/// interpolation table for the shared exponential sum; other forms assemble
/// each fiber matrix densely.
pub fn l2_fiber_opnorm(a: &Symbol, curve: &Curve, fg: &FiberGrid) -> Result<f64> {
    if a.is_tau_dependent() {
        return Err(Error::InvalidArgument(format!(
            "l2_fiber_opnorm: symbol {} depends on tau; use the frequency-resolved operator",
            a.name()
        )));
    }
    if curve.dim() != fg.d() {
        return Err(Error::DimMismatch {
            expected: format!("curve of dimension {}", fg.d()),
            found: format!("{}", curve.dim()),
        });
    }
    let modes = enumerate_modes(fg, a)?;
    if modes.is_empty() {
        return Ok(0.0);
    }
    let s_pts = fg.s_points();
    let ws = fg.s_weights();
    let gammas: Vec<Vec<f64>> = s_pts.iter().map(|&s| curve.eval(s)).collect();
    match a.form() {
        SymbolForm::SeparableT { t_profile, s_xi } => {
            let t_pts = fg.t_points();
            let w2: Vec<f64> = t_pts
                .iter()
                .zip(fg.t_weights())
                .map(|(&t, w)| {
                    let tp = t_profile(t);
                    w * tp * tp
                })
                .collect();
            let p0: f64 = w2.iter().sum();
            if p0 <= 0.0 {
                return Ok(0.0);
            }
            let gamma_max = gammas.iter().map(|g| norm2(g)).fold(0.0, f64::max);
            let xi_max = modes
                .iter()
                .map(|&m| norm2(&fg.xi_of_flat(m)))
                .fold(0.0, f64::max);
            let range = 2.0 * gamma_max * xi_max + 1.0;
            let table = ConjSymTable::build(&t_pts, &w2, 1.0, range, P_TABLE_STEP);
            let best = modes
                .par_iter()
                .map(|&m| {
                    let xi = fg.xi_of_flat(m);
                    let mut b = Vec::with_capacity(s_pts.len());
                    let mut th = Vec::with_capacity(s_pts.len());
                    for (j, &s) in s_pts.iter().enumerate() {
                        let amp = s_xi(s, &xi);
                        if amp != 0.0 {
                            b.push(ws[j].sqrt() * amp);
                            th.push(dot(&gammas[j], &xi));
                        }
                    }
                    separable_fiber_opnorm(&b, &th, &table, p0)
                })
                .reduce(|| 0.0, f64::max);
            Ok(best)
        }
        _ => {
            let best = modes
                .par_iter()
                .map(|&m| {
                    let xi = fg.xi_of_flat(m);
                    FiberMatrix::build_validated(a, curve, fg, &xi)
                        .map(|fm| fm.opnorm())
                        .unwrap_or(0.0)
                })
                .reduce(|| 0.0, f64::max);
            Ok(best)
        }
    }
}
