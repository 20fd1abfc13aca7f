//! Curve-integral transforms and their symbol calculus on the periodic box.
//!
//! The forward transform averages a time-dependent field along translates of
//! a curve; the dual transform spreads a parameter-dependent field back along
//! the curve. Both act fiberwise on spatial frequencies, which is how every
//! routine here is implemented: transform, multiply each frequency fiber by a
//! small dense kernel, transform back.
//!
//! Symbol operators come in two flavors. [`apply_symbol`] handles amplitudes
//! `a(s, t, xi)`; [`apply_symbol_tau`] additionally resolves the time axis in
//! frequency, replacing the `tau`-integral by the exact lattice sum attached
//! to the time grid, and is the reference realization for amplitudes
//! `a(s, t, tau, xi)`. For `tau`-independent amplitudes the two agree exactly
//! whenever the time profile vanishes at both ends of the time interval.
//! [`kernel_eval`] samples the convolution kernel of the frequency-resolved
//! operator, fiber-consistently with [`apply_symbol_tau`].

mod fiber;
mod tables;

pub use fiber::{l2_fiber_opnorm, FiberGrid, FiberMatrix, T_INTERVAL};

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bumps::{interval_bump, plateau};
use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::fields::{fft, AuxKind, GridSpec, Rep, SampledField};
use crate::symbols::{SXiFn, ScalarFn, Symbol, SymbolForm, TauSupport};

use fiber::{dot, lanczos_largest_hermitian, norm2, trapezoid};
use tables::ConjSymTable;

/// The pair of smooth cutoffs every transform carries: `psi` localizing the
/// curve parameter and `chi` localizing the integration time.
#[derive(Clone)]
pub struct CutoffPair {
    psi: ScalarFn,
    chi: ScalarFn,
    psi_support: (f64, f64),
    chi_support: (f64, f64),
}

impl fmt::Debug for CutoffPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CutoffPair")
            .field("psi_support", &self.psi_support)
            .field("chi_support", &self.chi_support)
            .finish()
    }
}

impl CutoffPair {
    /// Assemble from explicit cutoff functions and their supports.
    pub fn new(
        psi: ScalarFn,
        psi_support: (f64, f64),
        chi: ScalarFn,
        chi_support: (f64, f64),
    ) -> Self {
        Self {
            psi,
            chi,
            psi_support,
            chi_support,
        }
    }

    /// Default cutoffs: `psi` equals 1 on `[-0.8, 0.8]` and vanishes outside
    /// `(-1, 1)`; `chi` equals 1 on `[1.25, 1.75]` and vanishes outside
    /// `(1, 2)`. Both vanish at their interval endpoints, which makes the
    /// trapezoid quadratures spectrally accurate and the lattice resolution
    /// of the time-frequency integral exact for `tau`-independent symbols.
    pub fn standard() -> Self {
        Self {
            psi: Arc::new(|s| interval_bump(s, -1.0, 1.0, 0.2)),
            chi: Arc::new(|t| interval_bump(t, 1.0, 2.0, 0.25)),
            psi_support: (-1.0, 1.0),
            chi_support: (1.0, 2.0),
        }
    }

    /// Parameter cutoff value.
    pub fn psi(&self, s: f64) -> f64 {
        (self.psi)(s)
    }

    /// Time cutoff value.
    pub fn chi(&self, t: f64) -> f64 {
        (self.chi)(t)
    }

    /// Shared handle to the parameter cutoff.
    pub fn psi_fn(&self) -> ScalarFn {
        self.psi.clone()
    }

    /// Shared handle to the time cutoff.
    pub fn chi_fn(&self) -> ScalarFn {
        self.chi.clone()
    }

    /// Declared support of the parameter cutoff.
    pub fn psi_support(&self) -> (f64, f64) {
        self.psi_support
    }

    /// Declared support of the time cutoff.
    pub fn chi_support(&self) -> (f64, f64) {
        self.chi_support
    }
}

/// `1 + sup_s |gamma(s)|` over the parameter interval (sampled): fields
/// supported in a ball of this radius see every curve translate.
pub fn curve_reach(curve: &Curve) -> f64 {
    let n = 512;
    1.0 + (0..n)
        .map(|i| {
            let s = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            norm2(&curve.eval(s))
        })
        .fold(0.0, f64::max)
}

/// `1 + sup_s |gamma'(s)|` over the parameter interval (sampled).
pub fn curve_slope_reach(curve: &Curve) -> f64 {
    let n = 512;
    1.0 + (0..n)
        .map(|i| {
            let s = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            norm2(&curve.eval_deriv(s, 1))
        })
        .fold(0.0, f64::max)
}

fn param_interval(g: &GridSpec, what: &str) -> Result<(f64, f64)> {
    match g.aux_kind {
        AuxKind::Param { lo, hi } => Ok((lo, hi)),
        AuxKind::Time => Err(Error::InvalidArgument(format!(
            "{what}: input must live on a curve-parameter grid"
        ))),
    }
}

fn check_curve_dim(g: &GridSpec, curve: &Curve, what: &str) -> Result<()> {
    if curve.dim() != g.d {
        return Err(Error::DimMismatch {
            expected: format!("{what}: grid dimension {}", g.d),
            found: format!("curve dimension {}", curve.dim()),
        });
    }
    Ok(())
}

fn is_zero(c: Complex64) -> bool {
    c.re == 0.0 && c.im == 0.0
}

fn fourier_side(f: &SampledField) -> Result<SampledField> {
    match f.rep() {
        Rep::Physical => f.to_fourier(),
        Rep::Fourier => Ok(f.clone()),
    }
}

/// Forward transform: average the time-dependent field over the curve,
/// `out(x, s) = psi(s) * sum_i wt_i chi(t_i) f(x + t_i gamma(s), t_i)`,
/// realized fiberwise as `out^(xi, s) = psi(s) sum_i wt_i chi(t_i)
/// exp(+i t_i gamma(s).xi) f^(xi, t_i)`.
///
/// The input must live on the time grid; the physical-space output lives on
/// the parameter grid over `s_interval` with `n_s` samples.
pub fn forward_xray(
    f: &SampledField,
    curve: &Curve,
    cut: &CutoffPair,
    s_interval: (f64, f64),
    n_s: usize,
) -> Result<SampledField> {
    let g = f.grid().clone();
    if !matches!(g.aux_kind, AuxKind::Time) {
        return Err(Error::InvalidArgument(
            "forward_xray: input must live on the time grid".into(),
        ));
    }
    check_curve_dim(&g, curve, "forward_xray")?;
    let fgrid = FiberGrid::new(g.d, g.n_x, s_interval, n_s, g.n_aux)?;
    let hat = fourier_side(f)?;
    let s_pts = fgrid.s_points();
    let t_pts = fgrid.t_points();
    let dt = fgrid.delta_t();
    let psi: Vec<f64> = s_pts.iter().map(|&s| cut.psi(s)).collect();
    let chiw: Vec<f64> = t_pts
        .iter()
        .zip(fgrid.t_weights())
        .map(|(&t, w)| w * cut.chi(t))
        .collect();
    let gammas: Vec<Vec<f64>> = s_pts.iter().map(|&s| curve.eval(s)).collect();
    let out_grid = GridSpec::new(
        g.d,
        g.n_x,
        AuxKind::Param {
            lo: s_interval.0,
            hi: s_interval.1,
        },
        n_s,
    )?;
    let mut out = SampledField::zeros(out_grid, Rep::Fourier);
    let hat_std = hat.values().as_standard_layout();
    let in_slice = hat_std.as_slice().expect("standard layout");
    out.values_mut()
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n_s)
        .zip(in_slice.par_chunks(g.n_aux))
        .enumerate()
        .for_each(|(m, (out_chunk, in_chunk))| {
            if in_chunk.iter().all(|&c| is_zero(c)) {
                return;
            }
            let xi = fgrid.xi_of_flat(m);
            for (j, gj) in gammas.iter().enumerate() {
                if psi[j] == 0.0 {
                    continue;
                }
                let theta = dot(gj, &xi);
                let mut ph = Complex64::from_polar(1.0, t_pts[0] * theta);
                let step = Complex64::from_polar(1.0, dt * theta);
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &cw) in chiw.iter().enumerate() {
                    if cw != 0.0 {
                        acc += ph * (in_chunk[i] * cw);
                    }
                    ph *= step;
                }
                out_chunk[j] = acc * psi[j];
            }
        });
    out.to_physical()
}

/// Dual transform: spread the parameter-dependent field along the curve,
/// `out(x, t) = chi(t) * sum_j ws_j psi(s_j) f(x - t gamma(s_j), s_j)`,
/// realized fiberwise with the phase `exp(-i t gamma(s).xi)`. It is the
/// exact quadrature adjoint of [`forward_xray`].
pub fn dual_xray(
    f: &SampledField,
    curve: &Curve,
    cut: &CutoffPair,
    n_t: usize,
) -> Result<SampledField> {
    let g = f.grid().clone();
    let s_interval = param_interval(&g, "dual_xray")?;
    check_curve_dim(&g, curve, "dual_xray")?;
    let fgrid = FiberGrid::new(g.d, g.n_x, s_interval, g.n_aux, n_t)?;
    let hat = fourier_side(f)?;
    let s_pts = fgrid.s_points();
    let t_pts = fgrid.t_points();
    let dt = fgrid.delta_t();
    let psiw: Vec<f64> = s_pts
        .iter()
        .zip(fgrid.s_weights())
        .map(|(&s, w)| w * cut.psi(s))
        .collect();
    let chi: Vec<f64> = t_pts.iter().map(|&t| cut.chi(t)).collect();
    let gammas: Vec<Vec<f64>> = s_pts.iter().map(|&s| curve.eval(s)).collect();
    let out_grid = GridSpec::new(g.d, g.n_x, AuxKind::Time, n_t)?;
    let mut out = SampledField::zeros(out_grid, Rep::Fourier);
    let hat_std = hat.values().as_standard_layout();
    let in_slice = hat_std.as_slice().expect("standard layout");
    out.values_mut()
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n_t)
        .zip(in_slice.par_chunks(g.n_aux))
        .enumerate()
        .for_each(|(m, (out_chunk, in_chunk))| {
            if in_chunk.iter().all(|&c| is_zero(c)) {
                return;
            }
            let xi = fgrid.xi_of_flat(m);
            for (j, gj) in gammas.iter().enumerate() {
                let coef = in_chunk[j] * psiw[j];
                if is_zero(coef) {
                    continue;
                }
                let theta = dot(gj, &xi);
                let mut ph = Complex64::from_polar(1.0, -t_pts[0] * theta);
                let step = Complex64::from_polar(1.0, -dt * theta);
                for o in out_chunk.iter_mut() {
                    *o += coef * ph;
                    ph *= step;
                }
            }
            for (o, &c) in out_chunk.iter_mut().zip(&chi) {
                *o *= c;
            }
        });
    out.to_physical()
}

/// Symbol operator for a `tau`-independent amplitude:
/// `out^(xi, t_i) = sum_j ws_j exp(-i t_i gamma(s_j).xi) a(s_j, t_i, xi)
/// f^(xi, s_j)`. With `a = psi(s) chi(t)` this is exactly [`dual_xray`].
pub fn apply_symbol(
    f: &SampledField,
    a: &Symbol,
    curve: &Curve,
    n_t: usize,
) -> Result<SampledField> {
    if a.is_tau_dependent() {
        return Err(Error::InvalidArgument(format!(
            "apply_symbol: symbol {} depends on tau; use apply_symbol_tau",
            a.name()
        )));
    }
    let g = f.grid().clone();
    let s_interval = param_interval(&g, "apply_symbol")?;
    check_curve_dim(&g, curve, "apply_symbol")?;
    let fgrid = FiberGrid::new(g.d, g.n_x, s_interval, g.n_aux, n_t)?;
    let hat = fourier_side(f)?;
    let s_pts = fgrid.s_points();
    let ws = fgrid.s_weights();
    let t_pts = fgrid.t_points();
    let dt = fgrid.delta_t();
    let gammas: Vec<Vec<f64>> = s_pts.iter().map(|&s| curve.eval(s)).collect();
    let support = a.support().clone();
    let out_grid = GridSpec::new(g.d, g.n_x, AuxKind::Time, n_t)?;
    let mut out = SampledField::zeros(out_grid, Rep::Fourier);
    let hat_std = hat.values().as_standard_layout();
    let in_slice = hat_std.as_slice().expect("standard layout");
    out.values_mut()
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n_t)
        .zip(in_slice.par_chunks(g.n_aux))
        .enumerate()
        .for_each(|(m, (out_chunk, in_chunk))| {
            if in_chunk.iter().all(|&c| is_zero(c)) {
                return;
            }
            let xi = fgrid.xi_of_flat(m);
            if !support.xi.contains(&xi) {
                return;
            }
            match a.form() {
                SymbolForm::SeparableT { t_profile, s_xi } => {
                    let mut acc = vec![Complex64::new(0.0, 0.0); n_t];
                    let mut any = false;
                    for (j, gj) in gammas.iter().enumerate() {
                        if is_zero(in_chunk[j]) {
                            continue;
                        }
                        let amp = s_xi(s_pts[j], &xi);
                        if amp == 0.0 {
                            continue;
                        }
                        any = true;
                        let coef = in_chunk[j] * (ws[j] * amp);
                        let theta = dot(gj, &xi);
                        let mut ph = Complex64::from_polar(1.0, -t_pts[0] * theta);
                        let step = Complex64::from_polar(1.0, -dt * theta);
                        for av in acc.iter_mut() {
                            *av += coef * ph;
                            ph *= step;
                        }
                    }
                    if any {
                        for (o, (av, &t)) in out_chunk.iter_mut().zip(acc.iter().zip(&t_pts)) {
                            *o = av * t_profile(t);
                        }
                    }
                }
                _ => {
                    for (j, gj) in gammas.iter().enumerate() {
                        if is_zero(in_chunk[j]) {
                            continue;
                        }
                        let coef = in_chunk[j] * ws[j];
                        let theta = dot(gj, &xi);
                        let mut ph = Complex64::from_polar(1.0, -t_pts[0] * theta);
                        let step = Complex64::from_polar(1.0, -dt * theta);
                        for (o, &t) in out_chunk.iter_mut().zip(&t_pts) {
                            let av = a.eval3(s_pts[j], t, &xi);
                            if av != 0.0 {
                                *o += coef * ph * av;
                            }
                            ph *= step;
                        }
                    }
                }
            }
        });
    out.to_physical()
}

/// Time-frequency lattice attached to an inclusive time grid: the DFT
/// frequencies of the `n_t`-point periodization with period `n_t * dt`.
struct TauLattice {
    tau: Vec<f64>,
    tau_max: f64,
    period: f64,
}

fn tau_lattice(n_t: usize, dt: f64) -> TauLattice {
    let period = n_t as f64 * dt;
    let tau = (0..n_t)
        .map(|q| {
            let m = if q < n_t.div_ceil(2) {
                q as i64
            } else {
                q as i64 - n_t as i64
            };
            2.0 * std::f64::consts::PI * m as f64 / period
        })
        .collect();
    let tau_max = 2.0 * std::f64::consts::PI * ((n_t - 1) / 2) as f64 / period;
    TauLattice {
        tau,
        tau_max,
        period,
    }
}

/// Structural fast path of the frequency-resolved operator.
enum TauPath<'a> {
    /// Smooth window in `tau + gamma_w(s).xi` times a `t`-separable base.
    Windowed {
        t_profile: &'a ScalarFn,
        s_xi: &'a SXiFn,
        scale: f64,
        complement: bool,
        wcurve: &'a Curve,
    },
    /// Everything else: evaluate the amplitude pointwise.
    Generic,
}

fn tau_path(a: &Symbol) -> TauPath<'_> {
    if let SymbolForm::FreqWindowed {
        base,
        scale,
        curve,
        complement,
    } = a.form()
    {
        if let SymbolForm::SeparableT { t_profile, s_xi } = base.form() {
            return TauPath::Windowed {
                t_profile,
                s_xi,
                scale: *scale,
                complement: *complement,
                wcurve: curve,
            };
        }
    }
    TauPath::Generic
}

fn window_val(scale: f64, complement: bool, u_raw: f64) -> f64 {
    let u = scale * u_raw;
    let w = plateau(u * u);
    if complement {
        1.0 - w
    } else {
        w
    }
}

/// Evaluator for the weighted time-profile sum
/// `c(u) = sum_i wt_i t_profile(t_i) exp(-i t_i u)`: direct on small time
/// grids, cubic-Hermite table on large ones.
enum CEval {
    Direct { nodes: Vec<f64>, coefs: Vec<f64> },
    Table(ConjSymTable),
}

impl CEval {
    fn new(nodes: Vec<f64>, coefs: Vec<f64>, range: f64) -> Self {
        if nodes.len() >= 128 {
            CEval::Table(ConjSymTable::build(&nodes, &coefs, -1.0, range, 0.01))
        } else {
            CEval::Direct { nodes, coefs }
        }
    }

    fn eval(&self, u: f64) -> Complex64 {
        match self {
            CEval::Direct { nodes, coefs } => nodes
                .iter()
                .zip(coefs)
                .map(|(&t, &c)| Complex64::from_polar(c, -t * u))
                .sum(),
            CEval::Table(t) => t.eval(u),
        }
    }
}

/// Reject frequency content the `tau` lattice cannot represent. Only
/// declared *bounded* `tau`-supports are checked; window complements are
/// realized lattice-canonically as `base - window` and carry no check.
fn check_tau_representable(tau_sup: &TauSupport, theta_abs_max: f64, tau_max: f64) -> Result<()> {
    match tau_sup {
        TauSupport::GammaWindow { halfwidth } => {
            let need = theta_abs_max + halfwidth;
            if need > tau_max {
                return Err(Error::Aliasing {
                    lo: -need,
                    hi: need,
                    nyquist: tau_max,
                });
            }
        }
        TauSupport::AbsBound { bound } => {
            if *bound > tau_max {
                return Err(Error::Aliasing {
                    lo: -bound,
                    hi: *bound,
                    nyquist: tau_max,
                });
            }
        }
        TauSupport::None | TauSupport::GammaComplement { .. } => {}
    }
    Ok(())
}

/// Frequency-resolved symbol operator: resolves the time axis on the DFT
/// lattice of the output time grid,
/// `out^(xi, t_i) = (1/(n_t dt)) sum_q exp(+i tau_q t_i) sum_j ws_j
/// f^(xi, s_j) sum_i' wt_i' exp(-i t_i' (tau_q + theta_j))
/// a(s_j, t_i', tau_q, xi)`.
///
/// This is the reference realization for `tau`-dependent amplitudes; for
/// `tau`-independent ones it reproduces [`apply_symbol`] exactly whenever the
/// amplitude vanishes at the time-interval endpoints. Amplitudes declaring a
/// bounded `tau`-support are checked fiberwise against the lattice Nyquist
/// bound and rejected with [`Error::Aliasing`] if they do not fit.
pub fn apply_symbol_tau(
    f: &SampledField,
    a: &Symbol,
    curve: &Curve,
    n_t: usize,
) -> Result<SampledField> {
    let g = f.grid().clone();
    let s_interval = param_interval(&g, "apply_symbol_tau")?;
    check_curve_dim(&g, curve, "apply_symbol_tau")?;
    let fgrid = FiberGrid::new(g.d, g.n_x, s_interval, g.n_aux, n_t)?;
    let hat = fourier_side(f)?;
    let n_s = g.n_aux;
    let s_pts = fgrid.s_points();
    let ws = fgrid.s_weights();
    let t_pts = fgrid.t_points();
    let wt = fgrid.t_weights();
    let dt = fgrid.delta_t();
    let lat = tau_lattice(n_t, dt);
    let gammas: Vec<Vec<f64>> = s_pts.iter().map(|&s| curve.eval(s)).collect();
    let path = tau_path(a);
    let wgammas: Option<Vec<Vec<f64>>> = match &path {
        TauPath::Windowed { wcurve, .. } => {
            check_curve_dim(&g, wcurve, "apply_symbol_tau (window curve)")?;
            Some(s_pts.iter().map(|&s| wcurve.eval(s)).collect())
        }
        TauPath::Generic => None,
    };
    let support = a.support().clone();
    let hat_std = hat.values().as_standard_layout();
    let in_slice = hat_std.as_slice().expect("standard layout");

    // Pass 1: find active fibers and the frequency range the time-profile
    // table must cover.
    let n_modes = fgrid.n_modes();
    let mut active = vec![false; n_modes];
    let mut xi_abs_max = 0.0f64;
    for (m, flag) in active.iter_mut().enumerate() {
        let chunk = &in_slice[m * n_s..(m + 1) * n_s];
        if chunk.iter().all(|&c| is_zero(c)) {
            continue;
        }
        let xi = fgrid.xi_of_flat(m);
        if !support.xi.contains(&xi) {
            continue;
        }
        *flag = true;
        xi_abs_max = xi_abs_max.max(norm2(&xi));
    }
    let gamma_max = gammas
        .iter()
        .chain(wgammas.iter().flatten())
        .map(|gm| norm2(gm))
        .fold(0.0, f64::max);
    let ceval: Option<CEval> = match &path {
        TauPath::Windowed { t_profile, .. } => {
            let coefs: Vec<f64> = t_pts
                .iter()
                .zip(&wt)
                .map(|(&t, &w)| w * t_profile(t))
                .collect();
            Some(CEval::new(
                t_pts.clone(),
                coefs,
                lat.tau_max + gamma_max * xi_abs_max + 1.0,
            ))
        }
        TauPath::Generic => None,
    };

    let out_grid = GridSpec::new(g.d, g.n_x, AuxKind::Time, n_t)?;
    let mut out = SampledField::zeros(out_grid, Rep::Fourier);
    out.values_mut()
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n_t)
        .zip(in_slice.par_chunks(n_s))
        .enumerate()
        .try_for_each(|(m, (out_chunk, in_chunk))| -> Result<()> {
            if !active[m] {
                return Ok(());
            }
            let xi = fgrid.xi_of_flat(m);
            let thetas: Vec<f64> = gammas.iter().map(|gm| dot(gm, &xi)).collect();
            let mut acc = vec![Complex64::new(0.0, 0.0); n_t];
            match &path {
                TauPath::Windowed {
                    s_xi,
                    scale,
                    complement,
                    ..
                } => {
                    let wth = wgammas.as_ref().expect("window curve positions");
                    let mut nodes: Vec<(Complex64, f64, f64)> = Vec::new();
                    let mut th_max = 0.0f64;
                    for j in 0..n_s {
                        if is_zero(in_chunk[j]) {
                            continue;
                        }
                        let amp = s_xi(s_pts[j], &xi);
                        if amp == 0.0 {
                            continue;
                        }
                        let thw = dot(&wth[j], &xi);
                        nodes.push((in_chunk[j] * (ws[j] * amp), thetas[j], thw));
                        th_max = th_max.max(thetas[j].abs()).max(thw.abs());
                    }
                    if nodes.is_empty() {
                        return Ok(());
                    }
                    check_tau_representable(&support.tau, th_max, lat.tau_max)?;
                    let ce = ceval.as_ref().expect("time-profile evaluator");
                    for (aq, &tq) in acc.iter_mut().zip(&lat.tau) {
                        let mut sum = Complex64::new(0.0, 0.0);
                        for &(coef, th, thw) in &nodes {
                            let wv = window_val(*scale, *complement, tq + thw);
                            if wv != 0.0 {
                                sum += coef * ce.eval(tq + th) * wv;
                            }
                        }
                        *aq = sum;
                    }
                }
                TauPath::Generic => {
                    let mut th_max = 0.0f64;
                    for j in 0..n_s {
                        if !is_zero(in_chunk[j]) {
                            th_max = th_max.max(thetas[j].abs());
                        }
                    }
                    check_tau_representable(&support.tau, th_max, lat.tau_max)?;
                    for (aq, &tq) in acc.iter_mut().zip(&lat.tau) {
                        let mut sum = Complex64::new(0.0, 0.0);
                        for j in 0..n_s {
                            if is_zero(in_chunk[j]) {
                                continue;
                            }
                            let u = tq + thetas[j];
                            let mut ph = Complex64::from_polar(1.0, -t_pts[0] * u);
                            let step = Complex64::from_polar(1.0, -dt * u);
                            let mut inner = Complex64::new(0.0, 0.0);
                            for (i2, &t2) in t_pts.iter().enumerate() {
                                let av = a.eval(s_pts[j], t2, tq, &xi);
                                if av != 0.0 {
                                    inner += ph * (wt[i2] * av);
                                }
                                ph *= step;
                            }
                            sum += in_chunk[j] * inner * ws[j];
                        }
                        *aq = sum;
                    }
                }
            }
            let inv = 1.0 / lat.period;
            for (aq, &tq) in acc.iter().zip(&lat.tau) {
                if is_zero(*aq) {
                    continue;
                }
                let mut ph = Complex64::from_polar(inv, tq * t_pts[0]);
                let step = Complex64::from_polar(1.0, tq * dt);
                for o in out_chunk.iter_mut() {
                    *o += *aq * ph;
                    ph *= step;
                }
            }
            Ok(())
        })?;
    out.to_physical()
}

/// Sample the convolution kernel of the frequency-resolved operator at fixed
/// `(s, t)`: returns `K` on the spatial grid (shape `[n_x; d]`) such that the
/// operator output is `sum_j ws_j (K_{s_j, t} * f(., s_j))(x)` with periodic
/// convolution `(K * h)(x) = integral K(x - y) h(y) dy`. Its spatial Fourier
/// coefficients are exactly the fiber multipliers of [`apply_symbol_tau`].
pub fn kernel_eval(
    a: &Symbol,
    curve: &Curve,
    s: f64,
    t: f64,
    n_x: usize,
    n_t: usize,
) -> Result<ArrayD<Complex64>> {
    let d = curve.dim();
    if n_x < 2 || !n_x.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "kernel_eval: n_x must be a power of two >= 2, got {n_x}"
        )));
    }
    if n_t < 2 {
        return Err(Error::InvalidArgument(format!(
            "kernel_eval: n_t must be >= 2, got {n_t}"
        )));
    }
    let (t_pts, wt) = trapezoid(T_INTERVAL.0, T_INTERVAL.1, n_t);
    let dt = (T_INTERVAL.1 - T_INTERVAL.0) / (n_t - 1) as f64;
    let lat = tau_lattice(n_t, dt);
    let gamma = curve.eval(s);
    let path = tau_path(a);
    let wgamma: Option<Vec<f64>> = match &path {
        TauPath::Windowed { wcurve, .. } => Some(wcurve.eval(s)),
        TauPath::Generic => None,
    };
    let fgeo = FiberGrid::new(d, n_x, (-1.0, 1.0), 2, n_t)?;
    let n_modes = fgeo.n_modes();
    let support = a.support().clone();
    let mut xi_abs_max = 0.0f64;
    let mut act = vec![false; n_modes];
    for (m, flag) in act.iter_mut().enumerate() {
        let xi = fgeo.xi_of_flat(m);
        if support.xi.contains(&xi) {
            *flag = true;
            xi_abs_max = xi_abs_max.max(norm2(&xi));
        }
    }
    let gnorm = norm2(&gamma).max(wgamma.as_ref().map(|w| norm2(w)).unwrap_or(0.0));
    let ceval: Option<CEval> = match &path {
        TauPath::Windowed { t_profile, .. } => {
            let coefs: Vec<f64> = t_pts
                .iter()
                .zip(&wt)
                .map(|(&tp, &w)| w * t_profile(tp))
                .collect();
            Some(CEval::new(
                t_pts.clone(),
                coefs,
                lat.tau_max + gnorm * xi_abs_max + 1.0,
            ))
        }
        TauPath::Generic => None,
    };
    let mults: Vec<Complex64> = (0..n_modes)
        .into_par_iter()
        .map(|m| -> Result<Complex64> {
            if !act[m] {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let xi = fgeo.xi_of_flat(m);
            let th = dot(&gamma, &xi);
            match &path {
                TauPath::Windowed {
                    s_xi,
                    scale,
                    complement,
                    ..
                } => {
                    let amp = s_xi(s, &xi);
                    if amp == 0.0 {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    let thw = dot(wgamma.as_ref().expect("window curve position"), &xi);
                    check_tau_representable(&support.tau, th.abs().max(thw.abs()), lat.tau_max)?;
                    let ce = ceval.as_ref().expect("time-profile evaluator");
                    let mut sum = Complex64::new(0.0, 0.0);
                    for &tq in &lat.tau {
                        let wv = window_val(*scale, *complement, tq + thw);
                        if wv != 0.0 {
                            sum += Complex64::from_polar(wv, tq * t) * ce.eval(tq + th);
                        }
                    }
                    Ok(sum * (amp / lat.period))
                }
                TauPath::Generic => {
                    check_tau_representable(&support.tau, th.abs(), lat.tau_max)?;
                    let mut sum = Complex64::new(0.0, 0.0);
                    for &tq in &lat.tau {
                        let u = tq + th;
                        let mut ph = Complex64::from_polar(1.0, -t_pts[0] * u);
                        let step = Complex64::from_polar(1.0, -dt * u);
                        let mut inner = Complex64::new(0.0, 0.0);
                        for (i2, &t2) in t_pts.iter().enumerate() {
                            let av = a.eval(s, t2, tq, &xi);
                            if av != 0.0 {
                                inner += ph * (wt[i2] * av);
                            }
                            ph *= step;
                        }
                        if !is_zero(inner) {
                            sum += Complex64::from_polar(1.0, tq * t) * inner;
                        }
                    }
                    Ok(sum / lat.period)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    // Spectral synthesis: a unit-amplitude plane wave exp(i xi_m . x) sampled
    // on the offset grid has unitary-DFT coefficient n_x^{d/2} (-1)^{sum of
    // array digits} at mode m, so scale, sign, and invert.
    let root = (n_x as f64).powi(d as i32).sqrt();
    let mut arr = ArrayD::<Complex64>::zeros(IxDyn(&vec![n_x; d]));
    {
        let slice = arr.as_slice_mut().expect("standard layout");
        for (m, &mu) in mults.iter().enumerate() {
            if is_zero(mu) {
                continue;
            }
            let mut mm = m;
            let mut digit_sum = 0usize;
            for _ in 0..d {
                digit_sum += mm % n_x;
                mm /= n_x;
            }
            let sgn = if digit_sum % 2 == 0 { 1.0 } else { -1.0 };
            slice[m] = mu * (root * sgn);
        }
    }
    fft::dft_spatial(&mut arr, d, true);
    Ok(arr)
}

/// `L^1` norm of a sampled kernel over the unit-volume torus: the mean of
/// `|K|` over grid cells.
pub fn kernel_l1_norm(kernel: &ArrayD<Complex64>) -> f64 {
    if kernel.is_empty() {
        return 0.0;
    }
    kernel.iter().map(|v| v.norm()).sum::<f64>() / kernel.len() as f64
}

/// Operator norm of an arbitrary field-to-field map between weighted
/// quadrature `L^2` spaces, by assembling its dense matrix column by column
/// in the weighted bases. Small grids only: the matrix has
/// `(n_x^d n_aux)^2` entries.
pub fn assembled_opnorm(
    op: impl Fn(&SampledField) -> Result<SampledField> + Sync,
    in_grid: &GridSpec,
) -> Result<f64> {
    let w_in = in_grid.aux_weights();
    let n_aux_in = in_grid.n_aux;
    let n_in: usize = in_grid.shape().iter().product();
    let column = |b: usize| -> Result<Vec<Complex64>> {
        let mut e = SampledField::zeros(in_grid.clone(), Rep::Physical);
        let amp = 1.0 / w_in[b % n_aux_in].sqrt();
        e.values_mut().as_slice_mut().expect("standard layout")[b] = Complex64::new(amp, 0.0);
        let img = op(&e)?;
        let w_out = img.grid().aux_weights();
        let n_aux_out = img.grid().n_aux;
        let img_std = img.values().as_standard_layout();
        Ok(img_std
            .as_slice()
            .expect("standard layout")
            .iter()
            .enumerate()
            .map(|(r, v)| v * w_out[r % n_aux_out].sqrt())
            .collect())
    };
    let cols: Vec<Vec<Complex64>> = (0..n_in)
        .into_par_iter()
        .map(column)
        .collect::<Result<Vec<_>>>()?;
    let n_out = cols[0].len();
    if cols.iter().any(|c| c.len() != n_out) {
        return Err(Error::DimMismatch {
            expected: format!("all columns of length {n_out}"),
            found: "op returned inconsistent output shapes".into(),
        });
    }
    let bmat = DMatrix::from_fn(n_out, n_in, |r, c| cols[c][r]);
    let lam = lanczos_largest_hermitian(n_in, |v| bmat.ad_mul(&(&bmat * v)), 1e-11, 400);
    Ok(lam.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::moment_curve;
    use crate::symbols::{psi_chi, psi_chi_ring, tau_window, tau_window_complement};
    use approx::assert_relative_eq;
    use ndarray::IxDyn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn time_grid(n_x: usize, n_t: usize) -> GridSpec {
        GridSpec::new(2, n_x, AuxKind::Time, n_t).unwrap()
    }

    fn param_grid(n_x: usize, n_s: usize) -> GridSpec {
        GridSpec::new(
            2,
            n_x,
            AuxKind::Param { lo: -1.0, hi: 1.0 },
            n_s,
        )
        .unwrap()
    }

    fn random_field(grid: GridSpec, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SampledField::zeros(grid, Rep::Physical);
        for v in f.values_mut().iter_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f
    }

    fn max_abs(f: &SampledField) -> f64 {
        f.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn max_diff(a: &SampledField, b: &SampledField) -> f64 {
        a.values()
            .iter()
            .zip(b.values().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Band-limited closed-form field: periodic in x by construction, so the
    /// physical-space translation oracle can evaluate it anywhere.
    fn oracle_field(x: &[f64], t: f64) -> Complex64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let w1 = (t - 1.0) * (2.0 - t);
        let w2 = (std::f64::consts::PI * t).sin();
        Complex64::from_polar(1.0, two_pi * (x[0] - x[1])) * w1
            + Complex64::from_polar(0.5, two_pi * 2.0 * x[1]) * w2
    }

    #[test]
    fn forward_matches_translation_oracle() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let grid = time_grid(8, 9);
        let f = SampledField::from_fn(grid.clone(), |x, t| oracle_field(x, t));
        let n_s = 7;
        let out = forward_xray(&f, &curve, &cut, (-1.0, 1.0), n_s).unwrap();
        assert_eq!(out.rep(), Rep::Physical);
        let t_pts = grid.aux_points();
        let wt = grid.aux_weights();
        let s_pts = out.grid().aux_points();
        let xs = out.grid().x_points();
        for (idx, v) in out.values().indexed_iter() {
            let x = [xs[idx[0]], xs[idx[1]]];
            let s = s_pts[idx[2]];
            let gamma = curve.eval(s);
            let mut expect = Complex64::new(0.0, 0.0);
            for (&t, &w) in t_pts.iter().zip(&wt) {
                let y = [x[0] + t * gamma[0], x[1] + t * gamma[1]];
                expect += oracle_field(&y, t) * (w * cut.chi(t));
            }
            expect *= cut.psi(s);
            assert!(
                (v - expect).norm() < 1e-10,
                "mismatch at {idx:?}: {v} vs {expect}"
            );
        }
    }

    #[test]
    fn forward_and_dual_are_adjoint() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        for seed in 0..5u64 {
            let f = random_field(time_grid(8, 9), 100 + seed);
            let g = random_field(param_grid(8, 7), 200 + seed);
            let rf = forward_xray(&f, &curve, &cut, (-1.0, 1.0), 7).unwrap();
            let rsg = dual_xray(&g, &curve, &cut, 9).unwrap();
            let lhs = rf.inner(&g).unwrap();
            let rhs = f.inner(&rsg).unwrap();
            let scale = f.lp_norm(2.0).unwrap() * g.lp_norm(2.0).unwrap();
            assert!(
                (lhs - rhs).norm() <= 1e-12 * scale.max(1.0),
                "adjointness violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn dual_equals_symbol_operator_with_plain_cutoffs() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let g = random_field(param_grid(8, 7), 3);
        let via_dual = dual_xray(&g, &curve, &cut, 9).unwrap();
        let via_symbol = apply_symbol(&g, &psi_chi(&cut), &curve, 9).unwrap();
        assert!(max_diff(&via_dual, &via_symbol) < 1e-13 * max_abs(&via_dual).max(1.0));
    }

    #[test]
    fn symbol_operator_preserves_single_mode_fibers() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let grid = param_grid(8, 7);
        let two_pi = 2.0 * std::f64::consts::PI;
        let f = SampledField::from_fn(grid, |x, s| {
            Complex64::from_polar(1.0 - 0.5 * s * s, two_pi * (2.0 * x[0] + x[1]) + 0.7 * s)
        });
        let out = apply_symbol(&f, &psi_chi_ring(&cut, 3), &curve, 9).unwrap();
        let hat = out.to_fourier().unwrap();
        let peak = hat.values()[IxDyn(&[2, 1, 4])].norm();
        assert!(peak > 1e-6, "expected energy in the driven fiber");
        for (idx, v) in hat.values().indexed_iter() {
            if !(idx[0] == 2 && idx[1] == 1) {
                assert!(
                    v.norm() <= 1e-12 * peak,
                    "leak into fiber {idx:?}: {}",
                    v.norm()
                );
            }
        }
    }

    #[test]
    fn lattice_path_reproduces_plain_operator() {
        // For a tau-independent amplitude vanishing at the time endpoints the
        // frequency-resolved operator collapses to the plain one exactly.
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let sym = psi_chi_ring(&cut, 3);
        let f = random_field(param_grid(8, 9), 11);
        let plain = apply_symbol(&f, &sym, &curve, 9).unwrap();
        let lattice = apply_symbol_tau(&f, &sym, &curve, 9).unwrap();
        assert!(max_diff(&plain, &lattice) <= 1e-11 * max_abs(&plain).max(1.0));
    }

    #[test]
    fn window_and_complement_recombine_to_plain_operator() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let base = psi_chi_ring(&cut, 3);
        let w = tau_window(base.clone(), &curve, 3, 2, 0.5).unwrap();
        let c = tau_window_complement(base.clone(), &curve, 3, 2, 0.5).unwrap();
        let f = random_field(param_grid(8, 9), 12);
        let n_t = 17;
        let part_w = apply_symbol_tau(&f, &w, &curve, n_t).unwrap();
        let part_c = apply_symbol_tau(&f, &c, &curve, n_t).unwrap();
        let whole = apply_symbol(&f, &base, &curve, n_t).unwrap();
        let mut sum = part_w.clone();
        for (s, v) in sum.values_mut().iter_mut().zip(part_c.values().iter()) {
            *s += v;
        }
        assert!(max_diff(&sum, &whole) <= 1e-11 * max_abs(&whole).max(1.0));
    }

    #[test]
    fn windowed_fast_path_matches_generic_evaluation() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let base = psi_chi_ring(&cut, 3);
        let w = tau_window(base, &curve, 3, 2, 0.5).unwrap();
        // Same amplitude, forced through the generic pointwise path; the
        // large time grid also exercises the interpolation table.
        let w_inner = w.clone();
        let generic = Symbol::new(
            "generic_twin",
            SymbolForm::General4 {
                f: Arc::new(move |s, t, tau, xi: &[f64]| w_inner.eval(s, t, tau, xi)),
            },
            w.support().clone(),
            w.class_bound(),
            false,
        );
        let f = random_field(param_grid(8, 9), 13);
        let n_t = 129;
        let fast = apply_symbol_tau(&f, &w, &curve, n_t).unwrap();
        let slow = apply_symbol_tau(&f, &generic, &curve, n_t).unwrap();
        assert!(max_diff(&fast, &slow) <= 1e-8 * max_abs(&fast).max(1.0));
    }

    #[test]
    fn unrepresentable_window_is_rejected() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let base = psi_chi_ring(&cut, 3);
        // Half-width 2^5 = 32 on a 9-point time grid: tau_max ~ 22.3, and the
        // contributing fibers reach |theta| ~ 11, so 11 + 32 does not fit.
        let w = tau_window(base, &curve, 5, 1, 1.0).unwrap();
        let f = random_field(param_grid(8, 9), 14);
        assert!(matches!(
            apply_symbol_tau(&f, &w, &curve, 9),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn kernel_multipliers_match_operator_fibers() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let base = psi_chi_ring(&cut, 3);
        let sym = tau_window(base, &curve, 3, 2, 0.5).unwrap();
        let n_x = 8;
        let n_s = 7;
        let n_t = 17;
        let grid = param_grid(n_x, n_s);
        let two_pi = 2.0 * std::f64::consts::PI;
        // Single spatial mode (1, 1) with an s-dependent profile.
        let f = SampledField::from_fn(grid.clone(), |x, s| {
            Complex64::from_polar(1.0 - 0.4 * s * s, two_pi * (x[0] + x[1]) + 0.3 * s)
        });
        let out = apply_symbol_tau(&f, &sym, &curve, n_t).unwrap();
        let out_hat = out.to_fourier().unwrap();
        let in_hat = f.to_fourier().unwrap();
        let s_pts = grid.aux_points();
        let ws = grid.aux_weights();
        let root = (n_x as f64).powi(2).sqrt();
        // Fiber multiplier at mode (1, 1), read back from sampled kernels.
        let mode = [1usize, 1usize];
        let digit_sign = -1.0; // (-1)^{1 + 1 + ...} with digits 1 and 1 -> +1
        let _ = digit_sign;
        for i in [0usize, 4, 8, 12, 16] {
            let t = 1.0 + 0.0625 * i as f64;
            let mut expect = Complex64::new(0.0, 0.0);
            for (j, &s) in s_pts.iter().enumerate() {
                let kern = kernel_eval(&sym, &curve, s, t, n_x, n_t).unwrap();
                let mut khat = kern.clone();
                fft::dft_spatial(&mut khat, 2, false);
                let sgn = if (mode[0] + mode[1]) % 2 == 0 { 1.0 } else { -1.0 };
                let mult = khat[IxDyn(&mode)] * (sgn / root);
                expect += in_hat.values()[IxDyn(&[mode[0], mode[1], j])] * mult * ws[j];
            }
            let got = out_hat.values()[IxDyn(&[mode[0], mode[1], i])];
            assert!(
                (got - expect).norm() <= 1e-9 * expect.norm().max(1e-6),
                "t-index {i}: {got} vs {expect}"
            );
        }
        // The kernel has usable mass.
        let kern = kernel_eval(&sym, &curve, 0.0, 1.5, n_x, n_t).unwrap();
        assert!(kernel_l1_norm(&kern) > 0.0);
    }

    #[test]
    fn assembled_norm_matches_fiberwise_norm() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let sym = psi_chi(&cut);
        let n_x = 4;
        let n_s = 5;
        let n_t = 5;
        let in_grid = GridSpec::new(2, n_x, AuxKind::Param { lo: -1.0, hi: 1.0 }, n_s).unwrap();
        let assembled = assembled_opnorm(
            |e| apply_symbol(e, &sym, &curve, n_t),
            &in_grid,
        )
        .unwrap();
        let fg = FiberGrid::new(2, n_x, (-1.0, 1.0), n_s, n_t).unwrap();
        let fiberwise = l2_fiber_opnorm(&sym, &curve, &fg).unwrap();
        assert_relative_eq!(assembled, fiberwise, max_relative = 1e-8);
    }

    #[test]
    fn reach_constants_for_the_parabola() {
        let curve = moment_curve(2).unwrap();
        // sup |gamma| = sqrt(1 + 1/4) at s = +-1; sup |gamma'| = sqrt(2).
        assert_relative_eq!(curve_reach(&curve), 1.0 + 1.25f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(
            curve_slope_reach(&curve),
            1.0 + 2.0f64.sqrt(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn grid_kind_validation() {
        let curve = moment_curve(2).unwrap();
        let cut = CutoffPair::standard();
        let f_time = random_field(time_grid(8, 9), 21);
        let f_param = random_field(param_grid(8, 9), 22);
        assert!(forward_xray(&f_param, &curve, &cut, (-1.0, 1.0), 7).is_err());
        assert!(dual_xray(&f_time, &curve, &cut, 9).is_err());
        assert!(apply_symbol(&f_time, &psi_chi(&cut), &curve, 9).is_err());
        let curve3 = moment_curve(3).unwrap();
        assert!(forward_xray(&f_time, &curve3, &cut, (-1.0, 1.0), 7).is_err());
        // tau-dependent symbols are rejected by the plain operator.
        let w = tau_window(psi_chi(&cut), &curve, 3, 2, 0.5).unwrap();
        assert!(apply_symbol(&f_param, &w, &curve, 9).is_err());
    }
}
