//! Band-limited and Gaussian axis profiles for building witness fields
//! spectrally.
//!
//! Witness families need periodic fields whose continuum scaling in the
//! concentration parameter `lambda` is exact. Building them in frequency
//! space does that: the Fourier coefficients of the periodization of a
//! profile `g(x)` are the continuum transform `g^(2 pi k)`, so a field
//! assembled from those coefficients *is* the periodized profile, with no
//! sampling or aliasing error beyond the declared band truncation.
//!
//! Two envelope shapes cover every witness:
//!
//! * [`Envelope::Fejer`]: the squared-sinc bump, whose transform is an exact
//!   triangle on `[-7/8, 7/8]` — compactly supported in frequency, so
//!   spectral assembly is exact;
//! * [`Envelope::Gauss`]: the unit Gaussian, whose transform decays so fast
//!   that truncating it eight widths out changes nothing at `f64` precision
//!   while keeping coefficient tables sparse.
//!
//! An [`AxisProfile`] dilates an envelope and adds a modulation
//! `exp(i freq x)`, shifting its frequency support to `freq +
//! scale * [band]`. [`tensor_spectral_field`] assembles a product of axis
//! profiles times an auxiliary-axis profile into a Fourier-representation
//! [`SampledField`].

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::fields::{GridSpec, Rep, SampledField};

/// Sharpness of the squared-sinc envelope: `fejer_bump(u) =
/// sinc^2(FEJER_A u) / sinc^2(FEJER_A)`, normalized to 1 at `u = 1`.
pub const FEJER_A: f64 = 7.0 / 16.0;

/// Half-width of the frequency support of [`fejer_bump`]: `2 * FEJER_A`.
pub const FEJER_BAND: f64 = 7.0 / 8.0;

/// Modulation frequency (per unit scale) used by the focusing witness:
/// shifts the Fejer band to `[11/8, 25/8]`, strictly positive.
pub const MOD_FREQ: f64 = 9.0 / 4.0;

/// Width (in standard deviations) at which Gaussian frequency tables are
/// truncated to exact zero; the discarded mass is below `1e-13`.
pub const GAUSS_BAND: f64 = 8.0;

/// `sin(y)/y`, continuous at zero.
pub fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-8 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

fn fejer_norm() -> f64 {
    let s = sinc(FEJER_A);
    s * s
}

/// Squared-sinc bump `sinc^2(FEJER_A u) / sinc^2(FEJER_A)`: positive, equal
/// to 1 at `|u| = 1`, with `O(u^{-2})` tails.
pub fn fejer_bump(u: f64) -> f64 {
    let s = sinc(FEJER_A * u);
    s * s / fejer_norm()
}

/// Continuum Fourier transform of [`fejer_bump`]: the triangle
/// `(pi / FEJER_A) * (1 - |xi| / FEJER_BAND)_+ / sinc^2(FEJER_A)`,
/// supported exactly on `[-FEJER_BAND, FEJER_BAND]`.
pub fn fejer_bump_ft(xi: f64) -> f64 {
    let tri = (1.0 - (xi / FEJER_BAND).abs()).max(0.0);
    (PI / FEJER_A) * tri / fejer_norm()
}

/// Unit Gaussian `exp(-u^2/2)`.
pub fn gauss(u: f64) -> f64 {
    (-u * u / 2.0).exp()
}

/// Continuum Fourier transform of [`gauss`]: `sqrt(2 pi) exp(-xi^2/2)`.
pub fn gauss_ft(xi: f64) -> f64 {
    TAU.sqrt() * (-xi * xi / 2.0).exp()
}

/// Envelope shape of an axis profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Envelope {
    /// Squared-sinc bump with exactly compact frequency support.
    Fejer,
    /// Unit Gaussian, truncated in frequency at [`GAUSS_BAND`] widths.
    Gauss,
}

impl Envelope {
    fn eval(self, u: f64) -> f64 {
        match self {
            Envelope::Fejer => fejer_bump(u),
            Envelope::Gauss => gauss(u),
        }
    }

    fn ft(self, xi: f64) -> f64 {
        match self {
            Envelope::Fejer => fejer_bump_ft(xi),
            Envelope::Gauss => {
                if xi.abs() > GAUSS_BAND {
                    0.0
                } else {
                    gauss_ft(xi)
                }
            }
        }
    }

    fn band_halfwidth(self) -> f64 {
        match self {
            Envelope::Fejer => FEJER_BAND,
            Envelope::Gauss => GAUSS_BAND,
        }
    }
}

/// One spatial axis of a witness profile: `envelope(scale * x) *
/// exp(i freq x)`, concentrated on `|x| <~ 1/scale` with frequency support
/// `freq + scale * [-w, w]`.
#[derive(Clone, Copy, Debug)]
pub struct AxisProfile {
    env: Envelope,
    scale: f64,
    freq: f64,
}

impl AxisProfile {
    /// Dilated, modulated envelope; `scale` must be positive and finite.
    pub fn new(env: Envelope, scale: f64, freq: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !freq.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "AxisProfile: need finite scale > 0 and finite freq, got scale = {scale}, freq = {freq}"
            )));
        }
        Ok(Self { env, scale, freq })
    }

    /// Envelope shape.
    pub fn envelope(&self) -> Envelope {
        self.env
    }

    /// Dilation factor (inverse concentration width).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Modulation frequency.
    pub fn freq(&self) -> f64 {
        self.freq
    }

    /// Profile value at `x`.
    pub fn eval(&self, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.freq * x) * self.env.eval(self.scale * x)
    }

    /// Continuum Fourier transform at `xi`:
    /// `envelope_ft((xi - freq)/scale) / scale`. Real because the envelopes
    /// are even.
    pub fn ft(&self, xi: f64) -> f64 {
        self.env.ft((xi - self.freq) / self.scale) / self.scale
    }

    /// Frequency interval outside which [`Self::ft`] vanishes identically.
    pub fn band(&self) -> (f64, f64) {
        let w = self.env.band_halfwidth() * self.scale;
        (self.freq - w, self.freq + w)
    }

    /// Check that every lattice mode the `n_x`-point axis cannot represent
    /// carries no energy: the band must lie strictly inside
    /// `(-pi n_x, pi n_x)`, so the coefficient at any `|k| >= n_x/2`
    /// vanishes identically.
    pub fn band_check(&self, n_x: usize) -> Result<()> {
        let nyquist = PI * n_x as f64;
        let (lo, hi) = self.band();
        if hi >= nyquist || lo <= -nyquist {
            return Err(Error::Aliasing { lo, hi, nyquist });
        }
        Ok(())
    }
}

/// Focusing-style axis: a Fejer envelope at dilation `lambda`, modulated to
/// the strictly positive band `lambda * [11/8, 25/8]`.
pub fn modulated_fejer_axis(lambda: f64) -> Result<AxisProfile> {
    AxisProfile::new(Envelope::Fejer, lambda, MOD_FREQ * lambda)
}

/// Lattice Fourier coefficient table for one axis: entry `bin` holds the
/// continuum transform at `xi = 2 pi k` (with `k` the signed mode of `bin`)
/// times the `sqrt(n) * (-1)^k` factor that converts continuum coefficients
/// to the unitary index-space DFT values used by [`SampledField`]; the sign
/// accounts for the grid origin at `x = -1/2`.
fn axis_table(profile: &AxisProfile, grid: &GridSpec) -> Vec<f64> {
    let n = grid.n_x;
    let root_n = (n as f64).sqrt();
    (0..n)
        .map(|bin| {
            let k = grid.freq_index(bin);
            let c = profile.ft(TAU * k as f64);
            let sign = if k & 1 == 0 { 1.0 } else { -1.0 };
            c * root_n * sign
        })
        .collect()
}

/// Assemble the Fourier-representation field
/// `f(x, t) = prod_j profile_j(x_j) * aux(t)` on `grid`, where each factor
/// is the exact periodization of its continuum profile.
///
/// Fails with an aliasing error if any axis band does not fit the lattice.
pub fn tensor_spectral_field(
    grid: &GridSpec,
    axes: &[AxisProfile],
    aux: impl Fn(f64) -> Complex64,
) -> Result<SampledField> {
    if axes.len() != grid.d {
        return Err(Error::DimMismatch {
            expected: format!("{} axis profiles", grid.d),
            found: format!("{}", axes.len()),
        });
    }
    for profile in axes {
        profile.band_check(grid.n_x)?;
    }
    let tables: Vec<Vec<f64>> = axes.iter().map(|p| axis_table(p, grid)).collect();
    let aux_table: Vec<Complex64> = grid.aux_points().iter().map(|&t| aux(t)).collect();
    let d = grid.d;
    let n_x = grid.n_x;
    let n_aux = grid.n_aux;
    let mut out = SampledField::zeros(grid.clone(), Rep::Fourier);
    let slice = out
        .values_mut()
        .as_slice_mut()
        .expect("standard layout");
    for (site, chunk) in slice.chunks_mut(n_aux).enumerate() {
        let mut rem = site;
        let mut prod = 1.0;
        for a in (0..d).rev() {
            prod *= tables[a][rem % n_x];
            rem /= n_x;
        }
        if prod == 0.0 {
            continue;
        }
        for (v, &c) in chunk.iter_mut().zip(&aux_table) {
            *v = c * prod;
        }
    }
    Ok(out)
}
