//! Frame-adapted frequency projection: a smooth low-pass in the
//! anisotropically rescaled frequency variable of a scaling frame.

use nalgebra::DVector;

use crate::bumps::plateau;
use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::fields::{Rep, SampledField};

use super::frame::scaling_frame;

/// Multiply each spatial Fourier mode of `f` by
/// `plateau(|Ltilde^-1 xi| / (c0 2^k))`, where `Ltilde` is the linear part
/// of the scaling frame at `(s_tilde, delta)` of order `n`: the pass band
/// keeps the frequencies that the frame maps inside the ball of radius
/// `c0 2^k / 2` and removes everything beyond twice that. The auxiliary
/// axis is untouched and the input representation is preserved.
pub fn frame_projection(
    f: &SampledField,
    curve: &Curve,
    s_tilde: f64,
    delta: f64,
    n: usize,
    c0: f64,
    k: i32,
) -> Result<SampledField> {
    if !(c0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frame_projection: threshold must be positive, got {c0}"
        )));
    }
    if k < 0 {
        return Err(Error::InvalidArgument(format!(
            "frame_projection: frequency exponent must be >= 0, got {k}"
        )));
    }
    let d = curve.dim();
    if f.grid().d != d {
        return Err(Error::DimMismatch {
            expected: format!("field of spatial dimension {d}"),
            found: format!("dimension {}", f.grid().d),
        });
    }
    let frame = scaling_frame(curve, s_tilde, delta, n)?;
    let lu = frame.ltilde.clone().lu();
    let radius = c0 * (k as f64).exp2();

    let was_physical = f.rep() == Rep::Physical;
    let mut hat = if was_physical {
        f.to_fourier()?
    } else {
        f.clone()
    };
    let grid = hat.grid().clone();
    for (idx, v) in hat.values_mut().indexed_iter_mut() {
        let full: Vec<usize> = (0..d).map(|a| idx[a]).collect();
        let xi = grid.xi_of(&full);
        let w = lu.solve(&DVector::from_vec(xi)).ok_or_else(|| {
            Error::DegenerateFrame("frame_projection: frame matrix is singular".into())
        })?;
        *v *= plateau(w.norm() / radius);
    }
    if was_physical {
        hat.to_physical()
    } else {
        Ok(hat)
    }
}

/// Ratio `(sum_c ||P_c f||_p^p)^(1/p) / ||f||_p` of the projections of `f`
/// at the given frame centers against `f` itself. A bounded ratio over a
/// family of centers witnesses the almost-orthogonality of the family.
#[allow(clippy::too_many_arguments)]
pub fn projection_sum_ratio(
    f: &SampledField,
    curve: &Curve,
    centers: &[f64],
    delta: f64,
    n: usize,
    c0: f64,
    k: i32,
    p: f64,
) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument(
            "projection_sum_ratio: need at least one center".into(),
        ));
    }
    let denom = f.lp_norm(p)?;
    if denom == 0.0 {
        return Err(Error::DivisionByZero(
            "projection_sum_ratio: the field vanishes".into(),
        ));
    }
    let mut acc = 0.0;
    for &c in centers {
        let proj = frame_projection(f, curve, c, delta, n, c0, k)?;
        acc += proj.lp_norm(p)?.powf(p);
    }
    Ok(acc.powf(1.0 / p) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::moment_curve;
    use crate::fields::{AuxKind, GridSpec};
    use num_complex::Complex64;

    fn grid(n_x: usize) -> GridSpec {
        GridSpec::new(2, n_x, AuxKind::Time, 3).unwrap()
    }

    fn plane_wave(g: &GridSpec, modes: &[(i64, i64)]) -> SampledField {
        let modes = modes.to_vec();
        SampledField::from_fn(g.clone(), move |x, _| {
            modes
                .iter()
                .map(|&(m1, m2)| {
                    let arg = std::f64::consts::TAU * (m1 as f64 * x[0] + m2 as f64 * x[1]);
                    Complex64::new(0.0, arg).exp()
                })
                .sum()
        })
    }

    #[test]
    fn band_limited_fourier_input_is_fixed_exactly() {
        let curve = moment_curve(2).unwrap();
        let g = grid(16);
        // Exact single-mode spectrum: mode (1,1) has |xi| ~ 8.9, well
        // inside the inner plateau of radius 16, where the multiplier is
        // exactly one.
        let mut hat = SampledField::zeros(g, Rep::Fourier);
        for a in 0..3 {
            hat.values_mut()[[1, 1, a]] = Complex64::new(0.3 + a as f64, -1.25);
        }
        let out = frame_projection(&hat, &curve, 0.0, 1.0, 2, 4.0, 3).unwrap();
        assert_eq!(out.rep(), Rep::Fourier);
        for (a, b) in out.values().iter().zip(hat.values().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn physical_representation_is_preserved() {
        let curve = moment_curve(2).unwrap();
        let g = grid(16);
        let f = plane_wave(&g, &[(1, 1)]);
        let out = frame_projection(&f, &curve, 0.0, 1.0, 2, 4.0, 3).unwrap();
        assert_eq!(out.rep(), Rep::Physical);
        let norm = f.lp_norm(2.0).unwrap();
        let mut worst = 0.0_f64;
        for (a, b) in out.values().iter().zip(f.values().iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst <= 1e-12 * norm, "round trip drifted by {worst}");
    }

    #[test]
    fn modes_beyond_the_band_are_removed_idempotently() {
        let curve = moment_curve(2).unwrap();
        let g = grid(32);
        // Radius 16: mode (1,0) has |xi| ~ 6.3, inside the inner plateau
        // (ratio 0.39, kept exactly); (7,7) has |xi| ~ 62 (killed).
        let f = plane_wave(&g, &[(1, 0), (7, 7)]);
        let kept = plane_wave(&g, &[(1, 0)]);
        let once = frame_projection(&f, &curve, 0.0, 1.0, 2, 2.0, 3).unwrap();
        let twice = frame_projection(&once, &curve, 0.0, 1.0, 2, 2.0, 3).unwrap();
        let scale = kept.lp_norm(2.0).unwrap();
        for (a, b) in once.values().iter().zip(kept.values().iter()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
        for (a, b) in twice.values().iter().zip(once.values().iter()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn frame_stretches_the_tangent_direction() {
        let curve = moment_curve(2).unwrap();
        let g = grid(32);
        // Order-two frame at the origin scales the tangent (first axis)
        // by delta = 1/4, so its inverse stretches xi_1 by 4. Radius 32:
        // mode (2, 0) stretches to ~50 (killed), (0, 2) stays ~12.6 (kept).
        let f = plane_wave(&g, &[(2, 0), (0, 2)]);
        let kept = plane_wave(&g, &[(0, 2)]);
        let out = frame_projection(&f, &curve, 0.0, 0.25, 2, 4.0, 3).unwrap();
        let scale = kept.lp_norm(2.0).unwrap();
        for (a, b) in out.values().iter().zip(kept.values().iter()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let curve = moment_curve(3).unwrap();
        let g = grid(16);
        let f = plane_wave(&g, &[(1, 1)]);
        // Dimension mismatch: 3-dimensional curve, 2-dimensional field.
        assert!(frame_projection(&f, &curve, 0.0, 1.0, 2, 1.0, 3).is_err());
        let curve2 = moment_curve(2).unwrap();
        assert!(frame_projection(&f, &curve2, 0.0, 1.0, 2, 0.0, 3).is_err());
        assert!(frame_projection(&f, &curve2, 0.0, 1.0, 2, 1.0, -1).is_err());
        assert!(projection_sum_ratio(&f, &curve2, &[], 1.0, 2, 1.0, 3, 2.0).is_err());
    }

    #[test]
    fn projection_family_sum_is_controlled() {
        let curve = moment_curve(2).unwrap();
        let g = grid(64);
        // Modes of comparable radius and spread directions, so each
        // passes only the frames whose stretched tangent misses it.
        let f = plane_wave(
            &g,
            &[
                (16, 0),
                (15, 4),
                (13, 8),
                (11, 11),
                (8, 13),
                (4, 15),
                (0, 16),
                (-4, 15),
                (-8, 13),
            ],
        );
        let delta = 0.25;
        let centers: Vec<f64> = (0..=16).map(|j| -1.0 + j as f64 * delta / 2.0).collect();
        for &p in &[2.0, 6.0] {
            let ratio =
                projection_sum_ratio(&f, &curve, &centers, delta, 2, 1.0, 7, p).unwrap();
            println!("projection sum ratio at p={p}: {ratio:.4}");
            // The family is almost orthogonal: the sum stays bounded
            // instead of growing like the number of centers (17).
            assert!(
                ratio > 0.01 && ratio <= 6.0,
                "sum ratio {ratio} out of range at p={p}"
            );
        }
    }
}
