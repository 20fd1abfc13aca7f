//! Unitary in-place DFT helpers for multi-axis fields.
//!
//! The transforms scale by `n^{-1/2}` in both directions, so forward and
//! inverse are exact adjoints and a round trip is the identity up to
//! rounding.

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Apply the unitary DFT along one array axis, lane by lane.
fn dft_axis(values: &mut ArrayD<Complex64>, axis: usize, inverse: bool) {
    let n = values.shape()[axis];
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let scale = 1.0 / (n as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in values.lanes_mut(Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = b * scale;
        }
    }
}

/// Unitary DFT over all `d` spatial axes (the leading axes).
pub fn dft_spatial(values: &mut ArrayD<Complex64>, d: usize, inverse: bool) {
    for axis in 0..d {
        dft_axis(values, axis, inverse);
    }
}

/// Unitary DFT along the auxiliary axis (the last axis).
pub fn dft_aux(values: &mut ArrayD<Complex64>, inverse: bool) {
    let last = values.ndim() - 1;
    dft_axis(values, last, inverse);
}
