//! Periodic sampled fields on `[-1/2, 1/2)^d` times a non-periodic auxiliary
//! axis, with unitary spatial DFTs, `L^p`/Sobolev norms, and dyadic-shell
//! frequency projections.
//!
//! The spatial torus has period 1, so the frequency lattice is
//! `2 * pi * {-n_x/2, ..., n_x/2 - 1}^d` in standard FFT ordering. The
//! auxiliary axis (time `t` in `[1, 2]` or a curve-parameter subinterval)
//! is sampled inclusively at both endpoints and integrated by the composite
//! trapezoid rule; all integrands of interest vanish at the endpoints, so
//! the quadrature is spectrally accurate.

pub(crate) mod fft;
mod io;

pub use io::{export_axis_csv, read_field, write_field};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bumps::{plateau, shell};
use crate::error::{Error, Result};

/// Which quantity the auxiliary axis samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxKind {
    /// Time `t` in `[1, 2]`.
    Time,
    /// Curve parameter `s` in a subinterval of `[-1, 1]`.
    Param {
        /// Lower endpoint.
        lo: f64,
        /// Upper endpoint.
        hi: f64,
    },
}

impl AuxKind {
    /// Closed interval covered by the axis.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            AuxKind::Time => (1.0, 2.0),
            AuxKind::Param { lo, hi } => (*lo, *hi),
        }
    }

    /// Length of the interval.
    pub fn span(&self) -> f64 {
        let (lo, hi) = self.bounds();
        hi - lo
    }
}

/// Geometry of a sampled field: spatial grid plus auxiliary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension `d`.
    pub d: usize,
    /// Samples per spatial axis (power of two).
    pub n_x: usize,
    /// What the auxiliary axis parameterizes.
    pub aux_kind: AuxKind,
    /// Samples along the auxiliary axis (inclusive of both endpoints).
    pub n_aux: usize,
}

impl GridSpec {
    /// Validated constructor.
    pub fn new(d: usize, n_x: usize, aux_kind: AuxKind, n_aux: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("GridSpec: d must be >= 1".into()));
        }
        if n_x < 2 || !n_x.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "GridSpec: n_x must be a power of two >= 2, got {n_x}"
            )));
        }
        if n_aux < 2 {
            return Err(Error::InvalidArgument(format!(
                "GridSpec: n_aux must be >= 2, got {n_aux}"
            )));
        }
        let (lo, hi) = aux_kind.bounds();
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "GridSpec: empty auxiliary interval [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            d,
            n_x,
            aux_kind,
            n_aux,
        })
    }

    /// Array shape: `d` spatial axes then the auxiliary axis.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.n_x; self.d];
        s.push(self.n_aux);
        s
    }

    /// Volume of one spatial cell (the box has unit volume).
    pub fn cellvol(&self) -> f64 {
        (self.n_x as f64).powi(-(self.d as i32))
    }

    /// Auxiliary step size.
    pub fn aux_delta(&self) -> f64 {
        self.aux_kind.span() / (self.n_aux - 1) as f64
    }

    /// Auxiliary sample points (inclusive endpoints).
    pub fn aux_points(&self) -> Vec<f64> {
        let (lo, _) = self.aux_kind.bounds();
        let dt = self.aux_delta();
        (0..self.n_aux).map(|i| lo + dt * i as f64).collect()
    }

    /// Composite-trapezoid quadrature weights for the auxiliary axis.
    pub fn aux_weights(&self) -> Vec<f64> {
        let dt = self.aux_delta();
        (0..self.n_aux)
            .map(|i| {
                if i == 0 || i == self.n_aux - 1 {
                    0.5 * dt
                } else {
                    dt
                }
            })
            .collect()
    }

    /// Spatial sample points along one axis: `-1/2 + i / n_x`.
    pub fn x_points(&self) -> Vec<f64> {
        (0..self.n_x)
            .map(|i| -0.5 + i as f64 / self.n_x as f64)
            .collect()
    }

    /// Signed integer frequency for array position `i` (FFT ordering).
    pub fn freq_index(&self, i: usize) -> i64 {
        if i < self.n_x / 2 {
            i as i64
        } else {
            i as i64 - self.n_x as i64
        }
    }

    /// Frequency value `2 pi m` for every position along one spatial axis.
    pub fn xi_axis(&self) -> Vec<f64> {
        (0..self.n_x)
            .map(|i| 2.0 * std::f64::consts::PI * self.freq_index(i) as f64)
            .collect()
    }

    /// Frequency vector at a full array index (ignores the aux position).
    pub fn xi_of(&self, idx: &[usize]) -> Vec<f64> {
        let axis = self.xi_axis();
        idx[..self.d].iter().map(|&i| axis[i]).collect()
    }

    /// Largest dyadic-shell index `k` whose outer radius `2^{k+1}` stays
    /// within the per-axis Nyquist bound `pi * n_x`.
    pub fn max_resolved_shell(&self) -> i32 {
        let nyquist = std::f64::consts::PI * self.n_x as f64;
        let mut k = 0;
        while ((k + 2) as f64).exp2() <= nyquist {
            k += 1;
        }
        k
    }
}

/// Which representation the stored values are in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rep {
    /// Point samples on the spatial grid.
    Physical,
    /// Unitary spatial DFT coefficients (aux axis untouched).
    Fourier,
}

impl Rep {
    fn name(self) -> &'static str {
        match self {
            Rep::Physical => "physical",
            Rep::Fourier => "fourier",
        }
    }
}

/// Whether a Sobolev multiplier acts on spatial frequencies only or on the
/// product of spatial and auxiliary frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevMode {
    /// Bessel weight `(1 + |xi|^2)^{alpha/2}` on the spatial lattice.
    SpatialOnly,
    /// Bessel weight `(1 + |xi|^2 + tau^2)^{alpha/2}`; the auxiliary axis is
    /// transformed with a periodic unitary DFT, which is accurate for data
    /// vanishing at the axis endpoints.
    Full,
}

/// A complex field sampled on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct SampledField {
    grid: GridSpec,
    rep: Rep,
    values: ArrayD<Complex64>,
}

impl SampledField {
    /// All-zero field in the given representation.
    pub fn zeros(grid: GridSpec, rep: Rep) -> Self {
        let shape = grid.shape();
        Self {
            grid,
            rep,
            values: ArrayD::zeros(IxDyn(&shape)),
        }
    }

    /// Physical-space field from a pointwise map `(x, aux) -> value`.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64], f64) -> Complex64) -> Self {
        let xs = grid.x_points();
        let aux = grid.aux_points();
        let d = grid.d;
        let mut out = Self::zeros(grid, Rep::Physical);
        let mut xbuf = vec![0.0; d];
        for (idx, v) in out.values.indexed_iter_mut() {
            for a in 0..d {
                xbuf[a] = xs[idx[a]];
            }
            *v = f(&xbuf, aux[idx[d]]);
        }
        out
    }

    /// Wrap raw values (shape must match the grid).
    pub fn from_values(grid: GridSpec, rep: Rep, values: ArrayD<Complex64>) -> Result<Self> {
        if values.shape() != grid.shape().as_slice() {
            return Err(Error::DimMismatch {
                expected: format!("{:?}", grid.shape()),
                found: format!("{:?}", values.shape()),
            });
        }
        Ok(Self { grid, rep, values })
    }

    /// Grid geometry.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Current representation.
    pub fn rep(&self) -> Rep {
        self.rep
    }

    /// Read-only view of the values.
    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    /// Mutable view of the values (representation is the caller's contract).
    pub fn values_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.values
    }

    fn expect_rep(&self, want: Rep) -> Result<()> {
        if self.rep == want {
            Ok(())
        } else {
            Err(Error::WrongRepresentation {
                expected: want.name(),
                found: self.rep.name(),
            })
        }
    }

    /// Unitary spatial DFT (physical to Fourier).
    pub fn to_fourier(&self) -> Result<Self> {
        self.expect_rep(Rep::Physical)?;
        let mut values = self.values.clone();
        fft::dft_spatial(&mut values, self.grid.d, false);
        Ok(Self {
            grid: self.grid.clone(),
            rep: Rep::Fourier,
            values,
        })
    }

    /// Unitary inverse spatial DFT (Fourier to physical).
    pub fn to_physical(&self) -> Result<Self> {
        self.expect_rep(Rep::Fourier)?;
        let mut values = self.values.clone();
        fft::dft_spatial(&mut values, self.grid.d, true);
        Ok(Self {
            grid: self.grid.clone(),
            rep: Rep::Physical,
            values,
        })
    }

    /// Quadrature `L^p` norm with spatial cell volume and trapezoid
    /// auxiliary weights; `p = inf` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        self.expect_rep(Rep::Physical)?;
        if p.is_infinite() && p > 0.0 {
            return Ok(self
                .values
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lp_norm: p must be >= 1 or +inf, got {p}"
            )));
        }
        let w = self.grid.aux_weights();
        let cellvol = self.grid.cellvol();
        let d = self.grid.d;
        let mut acc = 0.0;
        for (idx, v) in self.values.indexed_iter() {
            acc += v.norm().powf(p) * w[idx[d]];
        }
        Ok((acc * cellvol).powf(1.0 / p))
    }

    /// Integral `sum cellvol * w_aux * u * conj(v)` of two physical fields.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.expect_rep(Rep::Physical)?;
        other.expect_rep(Rep::Physical)?;
        if self.grid != other.grid {
            return Err(Error::DimMismatch {
                expected: format!("{:?}", self.grid),
                found: format!("{:?}", other.grid),
            });
        }
        let w = self.grid.aux_weights();
        let cellvol = self.grid.cellvol();
        let d = self.grid.d;
        let mut acc = Complex64::new(0.0, 0.0);
        for ((idx, u), v) in self.values.indexed_iter().zip(other.values.iter()) {
            acc += u * v.conj() * w[idx[d]];
        }
        Ok(acc * cellvol)
    }

    /// Bessel-potential norm: multiplier `(1 + |frequencies|^2)^{alpha/2}`
    /// followed by [`Self::lp_norm`].
    pub fn sobolev_norm(&self, p: f64, alpha: f64, mode: SobolevMode) -> Result<f64> {
        self.expect_rep(Rep::Physical)?;
        let mut hat = self.to_fourier()?;
        let xi_axis = hat.grid.xi_axis();
        let d = hat.grid.d;
        match mode {
            SobolevMode::SpatialOnly => {
                for (idx, v) in hat.values.indexed_iter_mut() {
                    let xi2: f64 = (0..d).map(|a| xi_axis[idx[a]] * xi_axis[idx[a]]).sum();
                    *v *= (1.0 + xi2).powf(alpha / 2.0);
                }
            }
            SobolevMode::Full => {
                fft::dft_aux(&mut hat.values, false);
                let n_aux = hat.grid.n_aux;
                let period = hat.grid.aux_delta() * n_aux as f64;
                let tau_axis: Vec<f64> = (0..n_aux)
                    .map(|q| {
                        let m = if q < n_aux.div_ceil(2) {
                            q as i64
                        } else {
                            q as i64 - n_aux as i64
                        };
                        2.0 * std::f64::consts::PI * m as f64 / period
                    })
                    .collect();
                for (idx, v) in hat.values.indexed_iter_mut() {
                    let xi2: f64 = (0..d).map(|a| xi_axis[idx[a]] * xi_axis[idx[a]]).sum();
                    let tau = tau_axis[idx[d]];
                    *v *= (1.0 + xi2 + tau * tau).powf(alpha / 2.0);
                }
                fft::dft_aux(&mut hat.values, true);
            }
        }
        hat.to_physical()?.lp_norm(p)
    }

    /// Apply a scalar multiplier `m(|xi|)` on the spatial frequency lattice,
    /// preserving the input representation.
    fn radial_multiplier(&self, m: impl Fn(f64) -> f64) -> Result<Self> {
        let mut hat = match self.rep {
            Rep::Physical => self.to_fourier()?,
            Rep::Fourier => self.clone(),
        };
        let xi_axis = hat.grid.xi_axis();
        let d = hat.grid.d;
        for (idx, v) in hat.values.indexed_iter_mut() {
            let xi2: f64 = (0..d).map(|a| xi_axis[idx[a]] * xi_axis[idx[a]]).sum();
            *v *= m(xi2.sqrt());
        }
        match self.rep {
            Rep::Physical => hat.to_physical(),
            Rep::Fourier => Ok(hat),
        }
    }

    /// Dyadic-shell (Littlewood–Paley) projection: multiplies the spatial
    /// spectrum by the smooth shell window at radius `2^k`, so the output
    /// spectrum lives in the annulus `2^{k-1} <= |xi| <= 2^{k+1}`.
    pub fn ring_project(&self, k: i32) -> Result<Self> {
        let annulus = FrequencyAnnulus::new(k, &self.grid)?;
        let scale = (-(annulus.k as f64)).exp2();
        self.radial_multiplier(|r| shell(scale * r))
    }

    /// Smooth low-pass companion of [`Self::ring_project`]: multiplier
    /// `plateau(2^{-k} |xi|)`, equal to 1 for `|xi| <= 2^{k-1}` and
    /// vanishing for `|xi| >= 2^{k+1}`.
    ///
    /// Together these telescope exactly:
    /// `low_pass(k0) + sum_{k=k0..K} ring_project(k) = low_pass at K+1`.
    pub fn low_pass(&self, k: i32) -> Result<Self> {
        let scale = (-(k as f64)).exp2();
        self.radial_multiplier(|r| plateau(scale * r))
    }
}

/// The dyadic frequency annulus `2^{k-1} <= |xi| <= 2^{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyAnnulus {
    /// Shell index.
    pub k: i32,
}

impl FrequencyAnnulus {
    /// Construct, checking that the annulus is resolved by the grid.
    pub fn new(k: i32, grid: &GridSpec) -> Result<Self> {
        if k < 0 {
            return Err(Error::InvalidArgument(format!(
                "FrequencyAnnulus: k must be >= 0, got {k}"
            )));
        }
        if k > grid.max_resolved_shell() {
            return Err(Error::AnnulusOutOfRange { k, n_x: grid.n_x });
        }
        Ok(Self { k })
    }

    /// Whether a frequency vector lies in the annulus.
    pub fn contains(&self, xi: &[f64]) -> bool {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        ((self.k - 1) as f64).exp2() <= r && r <= ((self.k + 1) as f64).exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> GridSpec {
        GridSpec::new(2, 16, AuxKind::Time, 9).unwrap()
    }

    fn random_field(grid: GridSpec, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SampledField::zeros(grid, Rep::Physical);
        for v in f.values_mut().iter_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(2, 12, AuxKind::Time, 9).is_err());
        assert!(GridSpec::new(2, 16, AuxKind::Time, 1).is_err());
        assert!(GridSpec::new(0, 16, AuxKind::Time, 9).is_err());
        assert!(GridSpec::new(2, 16, AuxKind::Param { lo: 0.5, hi: 0.5 }, 9).is_err());
    }

    #[test]
    fn aux_weights_sum_to_span() {
        let g = GridSpec::new(1, 4, AuxKind::Param { lo: -0.3, hi: 0.9 }, 17).unwrap();
        let total: f64 = g.aux_weights().iter().sum();
        assert_relative_eq!(total, 1.2, epsilon = 1e-14);
        assert_eq!(g.aux_points().len(), 17);
        assert_relative_eq!(g.aux_points()[0], -0.3);
        assert_relative_eq!(g.aux_points()[16], 0.9);
    }

    #[test]
    fn constant_field_fourier_mass_at_zero() {
        let g = small_grid();
        let f = SampledField::from_fn(g.clone(), |_, _| Complex64::new(1.0, 0.0));
        let hat = f.to_fourier().unwrap();
        let expect = (g.n_x as f64).powi(g.d as i32).sqrt();
        for (idx, v) in hat.values().indexed_iter() {
            if idx[0] == 0 && idx[1] == 0 {
                assert_relative_eq!(v.re, expect, epsilon = 1e-10);
                assert!(v.im.abs() < 1e-10);
            } else {
                assert!(v.norm() < 1e-10, "leakage at {idx:?}");
            }
        }
    }

    #[test]
    fn single_mode_single_coefficient() {
        let g = small_grid();
        let f = SampledField::from_fn(g, |x, _| {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x[0])
        });
        let hat = f.to_fourier().unwrap();
        let mut nonzero = 0;
        for (idx, v) in hat.values().indexed_iter() {
            if v.norm() > 1e-9 {
                assert_eq!((idx[0], idx[1]), (1, 0));
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, hat.grid().n_aux);
    }

    #[test]
    fn round_trip_identity() {
        let f = random_field(small_grid(), 7);
        let back = f.to_fourier().unwrap().to_physical().unwrap();
        for (a, b) in f.values().iter().zip(back.values().iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn wrong_rep_is_an_error() {
        let f = random_field(small_grid(), 8);
        let hat = f.to_fourier().unwrap();
        assert!(matches!(
            hat.to_fourier(),
            Err(Error::WrongRepresentation { .. })
        ));
        assert!(hat.lp_norm(2.0).is_err());
    }

    #[test]
    fn half_indicator_l1() {
        let g = GridSpec::new(1, 8, AuxKind::Time, 5).unwrap();
        let f = SampledField::from_fn(g, |x, _| {
            if x[0] < 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert_relative_eq!(f.lp_norm(1.0).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn norm_homogeneity_and_invalid_p() {
        let f = random_field(small_grid(), 9);
        let mut g = f.clone();
        for v in g.values_mut().iter_mut() {
            *v *= 2.0;
        }
        for &p in &[1.0, 2.0, 4.0, f64::INFINITY] {
            assert_relative_eq!(
                g.lp_norm(p).unwrap(),
                2.0 * f.lp_norm(p).unwrap(),
                max_relative = 1e-12
            );
        }
        assert!(f.lp_norm(0.5).is_err());
    }

    #[test]
    fn parseval() {
        let f = random_field(small_grid(), 10);
        let phys = f.lp_norm(2.0).unwrap();
        let hat = f.to_fourier().unwrap();
        let w = hat.grid().aux_weights();
        let cellvol = hat.grid().cellvol();
        let d = hat.grid().d;
        let mut acc = 0.0;
        for (idx, v) in hat.values().indexed_iter() {
            acc += v.norm_sqr() * w[idx[d]];
        }
        assert_relative_eq!(phys, (acc * cellvol).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn sobolev_alpha_zero_is_lp() {
        let f = random_field(small_grid(), 11);
        for &p in &[1.5, 2.0, 4.0] {
            assert_relative_eq!(
                f.sobolev_norm(p, 0.0, SobolevMode::SpatialOnly).unwrap(),
                f.lp_norm(p).unwrap(),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                f.sobolev_norm(p, 0.0, SobolevMode::Full).unwrap(),
                f.lp_norm(p).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn sobolev_single_mode_scalar_action() {
        let g = GridSpec::new(2, 32, AuxKind::Time, 5).unwrap();
        // Mode with m = (4, 0): |xi| = 8 pi.
        let f = SampledField::from_fn(g, |x, _| {
            Complex64::from_polar(1.0, 8.0 * std::f64::consts::PI * x[0])
        });
        let alpha = 0.7;
        let xi2 = (8.0 * std::f64::consts::PI).powi(2);
        let expect = (1.0 + xi2).powf(alpha / 2.0) * f.lp_norm(2.0).unwrap();
        assert_relative_eq!(
            f.sobolev_norm(2.0, alpha, SobolevMode::SpatialOnly).unwrap(),
            expect,
            max_relative = 1e-10
        );
    }

    #[test]
    fn sobolev_annulus_bounds_and_monotonicity() {
        let g = GridSpec::new(2, 32, AuxKind::Time, 5).unwrap();
        let k = 4;
        let f = random_field(g, 12).ring_project(k).unwrap();
        let alpha = 0.6;
        let ratio = f.sobolev_norm(2.0, alpha, SobolevMode::SpatialOnly).unwrap()
            / f.lp_norm(2.0).unwrap();
        let lo = (1.0 + (2.0f64).powi(2 * k - 2)).powf(alpha / 2.0);
        let hi = (1.0 + (2.0f64).powi(2 * k + 2)).powf(alpha / 2.0);
        assert!(ratio >= lo - 1e-9 && ratio <= hi + 1e-9, "{lo} {ratio} {hi}");
        let weaker = f.sobolev_norm(2.0, 0.3, SobolevMode::SpatialOnly).unwrap();
        assert!(weaker <= f.sobolev_norm(2.0, alpha, SobolevMode::SpatialOnly).unwrap());
    }

    #[test]
    fn ring_partition_reconstructs_band_limited() {
        let g = GridSpec::new(2, 32, AuxKind::Time, 3).unwrap();
        let f = random_field(g.clone(), 13).low_pass(4).unwrap();
        // low_pass(2) + rings 2..5 = low_pass(6) = identity on supp f.
        let mut sum = f.low_pass(2).unwrap();
        for k in 2..=5 {
            let part = f.ring_project(k).unwrap();
            for (s, p) in sum.values_mut().iter_mut().zip(part.values().iter()) {
                *s += p;
            }
        }
        for (a, b) in sum.values().iter().zip(f.values().iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn ring_output_membership() {
        let g = GridSpec::new(2, 32, AuxKind::Time, 3).unwrap();
        let k = 4;
        let proj = random_field(g.clone(), 14)
            .to_fourier()
            .unwrap()
            .ring_project(k)
            .unwrap();
        let ann = FrequencyAnnulus::new(k, &g).unwrap();
        assert_eq!(proj.rep(), Rep::Fourier);
        let ndim = proj.values().ndim();
        for (idx, v) in proj.values().indexed_iter() {
            if v.norm() > 0.0 {
                let full: Vec<usize> = (0..ndim).map(|a| idx[a]).collect();
                let xi = proj.grid().xi_of(&full);
                assert!(ann.contains(&xi), "coefficient outside annulus at {idx:?}");
            }
        }
    }

    #[test]
    fn ring_composition_vanishes_when_separated() {
        let g = GridSpec::new(2, 64, AuxKind::Time, 3).unwrap();
        let f = random_field(g, 15);
        let twice = f.ring_project(3).unwrap().ring_project(5).unwrap();
        let norm = twice.lp_norm(2.0).unwrap();
        assert!(norm < 1e-12, "{norm}");
    }

    #[test]
    fn annulus_resolution_check() {
        let g = GridSpec::new(2, 16, AuxKind::Time, 3).unwrap();
        // pi * 16 ~ 50.3; 2^{k+1} <= 50.3 allows k <= 4.
        assert_eq!(g.max_resolved_shell(), 4);
        assert!(FrequencyAnnulus::new(4, &g).is_ok());
        assert!(matches!(
            FrequencyAnnulus::new(5, &g),
            Err(Error::AnnulusOutOfRange { .. })
        ));
        assert!(FrequencyAnnulus::new(-1, &g).is_err());
    }

    #[test]
    fn norms_translation_invariant() {
        let f = random_field(small_grid(), 16);
        // Roll by 5 cells along the first spatial axis.
        let mut rolled = f.clone();
        let n = f.grid().n_x;
        let ndim = f.values().ndim();
        for (idx, v) in f.values().indexed_iter() {
            let mut j: Vec<usize> = (0..ndim).map(|a| idx[a]).collect();
            j[0] = (j[0] + 5) % n;
            rolled.values_mut()[IxDyn(&j)] = *v;
        }
        for &p in &[1.0, 2.0, f64::INFINITY] {
            assert_relative_eq!(
                rolled.lp_norm(p).unwrap(),
                f.lp_norm(p).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn inner_product_matches_norm() {
        let f = random_field(small_grid(), 17);
        let ip = f.inner(&f).unwrap();
        assert_relative_eq!(ip.re.sqrt(), f.lp_norm(2.0).unwrap(), max_relative = 1e-12);
        assert!(ip.im.abs() < 1e-14);
    }
}
