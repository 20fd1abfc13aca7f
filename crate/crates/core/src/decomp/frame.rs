//! Anisotropic linear frames for rescaling a curve about a parameter point.
//!
//! A frame at `(s, delta)` of order `n` collects the matrices that turn the
//! curve germ at `s` into a unit-scale model: a spatial matrix that contracts
//! the first `n - 1` derivative directions by powers of `delta` while fixing
//! the orthogonal complement, its lift to time-frequency space, and the
//! lower-triangular Taylor-shift matrix of the order-`n` moment curve.

use nalgebra::{DMatrix, DVector};

use crate::curves::{self, Curve, PARAM_INTERVAL};
use crate::error::{Error, Result};

/// Where and how strongly a frame rescales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeta {
    /// Curve parameter the frame is centered at.
    pub s: f64,
    /// Contraction scale in `(0, 1]`.
    pub delta: f64,
    /// Order of the frame (number of derivative directions handled is `n - 1`).
    pub n: usize,
}

/// The matrices of an anisotropic rescaling frame.
///
/// Invariants (up to numerical tolerance):
/// * `ltilde^T gamma^(j)(s) = delta^(n-j) gamma^(j)(s)` for `j = 1..n-1`,
/// * `ltilde^T v = v` for `v` orthogonal to those derivatives,
/// * `(tau - gamma(s) . (m xi), m xi) = delta^(-n) lfull (tau, xi)`.
#[derive(Debug, Clone)]
pub struct LinearFrame {
    /// `d x d` spatial frame matrix with eigenvalues `delta^(n-1)..delta, 1..1`.
    pub ltilde: DMatrix<f64>,
    /// `(d+1) x (d+1)` lift acting on `(tau, xi)`.
    pub lfull: DMatrix<f64>,
    /// Normalized spatial matrix `m = delta^(-n) ltilde`.
    pub m: DMatrix<f64>,
    /// `(n+1) x (n+1)` Taylor-shift matrix of the order-`n` moment curve.
    pub d_mat: DMatrix<f64>,
    /// Center, scale, and order of the frame.
    pub meta: FrameMeta,
}

/// Relative tolerance for declaring a derivative system degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

/// Orthonormal basis of the span of `vectors` via modified Gram-Schmidt.
///
/// Returns an error if the vectors are (numerically) linearly dependent.
pub(crate) fn orthonormalize(vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = v.norm();
        let mut w = v.clone();
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        // Re-orthogonalize once: a single sweep loses accuracy when the
        // input directions are nearly parallel.
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let r = w.norm();
        if r <= DEGENERACY_TOL * scale.max(1.0) {
            return Err(Error::DegenerateFrame(format!(
                "derivative system is linearly dependent (residual {r:.3e})"
            )));
        }
        basis.push(w / r);
    }
    Ok(basis)
}

/// Orthonormal basis of the orthogonal complement of `span`, built by
/// projecting the standard basis vectors in index order and keeping the
/// first `dim - span.len()` that survive.
pub(crate) fn complement_basis(span: &[DVector<f64>], dim: usize) -> Result<Vec<DVector<f64>>> {
    let want = dim - span.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(want);
    for i in 0..dim {
        if basis.len() == want {
            break;
        }
        let mut w = DVector::zeros(dim);
        w[i] = 1.0;
        for q in span.iter().chain(basis.iter()) {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        for q in span.iter().chain(basis.iter()) {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let r = w.norm();
        if r > 1e-6 {
            basis.push(w / r);
        }
    }
    if basis.len() != want {
        return Err(Error::DegenerateFrame(format!(
            "complement basis incomplete: found {} of {want} vectors",
            basis.len()
        )));
    }
    Ok(basis)
}

/// Lower-triangular Taylor-shift matrix of the order-`n` moment curve.
///
/// The `(n+1) x (n+1)` matrix whose column `j - 1` is
/// `delta^j gammam^(j)(s)` for `j = 1..n+1`, where `gammam` is
/// `moment_curve(n + 1)`. It satisfies the exact shift identities
/// `D gammam(u) = gammam(s + delta u) - gammam(s)` and
/// `D gammam^(j)(u) = delta^j gammam^(j)(s + delta u)`.
pub fn shift_scale_matrix(s: f64, delta: f64, n: usize) -> DMatrix<f64> {
    assert!(delta > 0.0, "shift_scale_matrix: delta must be positive");
    assert!(n >= 1, "shift_scale_matrix: order must be >= 1");
    let size = n + 1;
    DMatrix::from_fn(size, size, |r, c| {
        if r < c {
            0.0
        } else {
            delta.powi(c as i32 + 1) * s.powi((r - c) as i32) / curves::factorial(r - c)
        }
    })
}

/// Build the rescaling frame of order `n` for `curve` at `(s, delta)`.
///
/// Requires `2 <= n <= d`, `delta` in `(0, 1]`, and linearly independent
/// derivatives `gamma^(1)(s), .., gamma^(n-1)(s)` (otherwise
/// [`Error::DegenerateFrame`]).
pub fn scaling_frame(curve: &Curve, s: f64, delta: f64, n: usize) -> Result<LinearFrame> {
    let d = curve.dim();
    if n < 2 || n > d {
        return Err(Error::InvalidArgument(format!(
            "scaling_frame: order must satisfy 2 <= n <= dim (= {d}), got {n}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "scaling_frame: scale must lie in (0, 1], got {delta}"
        )));
    }

    let derivs: Vec<DVector<f64>> = (1..n)
        .map(|j| DVector::from_vec(curve.eval_deriv(s, j)))
        .collect();
    let ortho = orthonormalize(&derivs)?;
    let comp = complement_basis(&ortho, d)?;

    // Q holds the raw derivatives (eigenvectors with eigenvalue delta^(n-j))
    // followed by the orthonormal complement (eigenvalue 1). ltilde^T is the
    // similarity Q Lambda Q^{-1}; because the complement block is an
    // orthonormal basis of the full orthogonal complement, ltilde^T fixes
    // every vector orthogonal to the derivative span.
    let mut q = DMatrix::zeros(d, d);
    for (c, v) in derivs.iter().chain(comp.iter()).enumerate() {
        q.set_column(c, v);
    }
    let q_inv = q.clone().try_inverse().ok_or_else(|| {
        Error::DegenerateFrame("frame eigenvector matrix is singular".into())
    })?;
    let mut lambda = DMatrix::zeros(d, d);
    for j in 1..n {
        lambda[(j - 1, j - 1)] = delta.powi((n - j) as i32);
    }
    for c in n - 1..d {
        lambda[(c, c)] = 1.0;
    }
    let ltilde_t = &q * lambda * q_inv;
    let ltilde = ltilde_t.transpose();
    let m = &ltilde / delta.powi(n as i32);

    // Lift to (tau, xi): first row delta^n tau - (ltilde^T gamma(s)) . xi,
    // remaining rows ltilde xi.
    let gamma_s = DVector::from_vec(curve.eval(s));
    let lg = &ltilde_t * &gamma_s;
    let mut lfull = DMatrix::zeros(d + 1, d + 1);
    lfull[(0, 0)] = delta.powi(n as i32);
    for c in 0..d {
        lfull[(0, 1 + c)] = -lg[c];
        for r in 0..d {
            lfull[(1 + r, 1 + c)] = ltilde[(r, c)];
        }
    }

    Ok(LinearFrame {
        ltilde,
        lfull,
        m,
        d_mat: shift_scale_matrix(s, delta, n),
        meta: FrameMeta { s, delta, n },
    })
}

/// Rescale `curve` about `s0` at scale `delta` using the order-`n` frame:
/// `s -> m^T (curve(delta s + s0) - curve(s0))`.
///
/// Requires `[s0 - delta, s0 + delta]` to fit inside the standard parameter
/// interval so the rescaled curve is defined on all of it.
pub fn rescale_at(curve: &Curve, s0: f64, delta: f64, n: usize) -> Result<Curve> {
    let (lo, hi) = PARAM_INTERVAL;
    if s0 - delta < lo || s0 + delta > hi {
        return Err(Error::InvalidArgument(format!(
            "rescale_at: window [{}, {}] exceeds the parameter interval ({lo}, {hi})",
            s0 - delta,
            s0 + delta
        )));
    }
    let frame = scaling_frame(curve, s0, delta, n)?;
    curves::rescaled_curve(curve.clone(), s0, delta, frame.m.transpose())
}
