//! Exact-arithmetic cascades of contraction scales.
//!
//! A schedule starts at a coarse scale `delta_0` and repeatedly applies
//! `delta -> 2^(3d) * B * delta^((n+1)/n)` until it reaches the terminal
//! scale `2^(-k/n)`, which is appended as the final entry. All scales are
//! kept as exact base-2 logarithms (rationals), so the defining inequalities
//! between consecutive scales can be checked without rounding.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Exact base-2 logarithm of a scale.
pub type Log2Scale = Ratio<i128>;

/// Magnitude guard for exact-rational numerators/denominators; reaching it
/// means the cascade parameters are far outside any sensible range.
const MAG_LIMIT: i128 = 1 << 90;

/// Hard cap on cascade length, far above the provable `10 log2 k` bound.
const MAX_STEPS: usize = 512;

/// A strictly decreasing cascade of scales, stored as exact log2 values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSchedule {
    log2_deltas: Vec<Log2Scale>,
    /// Curve order the cascade contracts against.
    pub n: usize,
    /// Ambient dimension.
    pub d: usize,
    /// log2 of the regularity constant (an integer, so steps stay dyadic).
    pub b_log2: i64,
    /// Frequency-scale exponent the cascade terminates at.
    pub k: u32,
}

impl ScaleSchedule {
    /// Exact log2 of each scale, coarsest first.
    pub fn log2_deltas(&self) -> &[Log2Scale] {
        &self.log2_deltas
    }

    /// The scales as floats, coarsest first.
    pub fn deltas(&self) -> Vec<f64> {
        self.log2_deltas.iter().map(|x| exp2_ratio(x)).collect()
    }

    /// Number of scales in the cascade (`J + 1` entries for final index `J`).
    pub fn len(&self) -> usize {
        self.log2_deltas.len()
    }

    /// True when the cascade holds no scales (never produced by the builder).
    pub fn is_empty(&self) -> bool {
        self.log2_deltas.is_empty()
    }

    /// Verify, in exact arithmetic, that every consecutive pair satisfies
    /// `2^(3d) B delta_j^((n+1)/n) <= delta_{j+1} <= delta_j` with the first
    /// inequality strict between distinct entries' governing step, i.e. the
    /// log-form `(3d + b) + (n+1)/n * x_j <= x_{j+1} <= x_j`.
    pub fn check_consecutive(&self) -> bool {
        let c = Ratio::from_integer(3 * self.d as i128 + self.b_log2 as i128);
        let q = Ratio::new(self.n as i128 + 1, self.n as i128);
        self.log2_deltas.windows(2).all(|w| {
            let lower = c + q * w[0];
            lower <= w[1] && w[1] <= w[0]
        })
    }
}

fn exp2_ratio(x: &Log2Scale) -> f64 {
    (*x.numer() as f64 / *x.denom() as f64).exp2()
}

fn magnitude_ok(x: &Log2Scale) -> bool {
    x.numer().abs() < MAG_LIMIT && x.denom().abs() < MAG_LIMIT
}

/// Build the cascade of scales from `delta_0` (given as exact log2) down to
/// the terminal scale `2^(-k/n)`.
///
/// Requirements, checked exactly:
/// * `n >= 2`, `d >= 2`, `k >= 1`, `b_log2 >= 0`;
/// * `2^(-k/n) <= delta_0 <= 2^(-3dn) B^(-n)`, i.e.
///   `-k/n <= log2(delta_0) <= -n (3d + b_log2)`;
/// * every step strictly decreases the scale (fails exactly when `delta_0`
///   sits on the upper admissibility boundary).
pub fn delta_schedule(
    log2_delta0: Log2Scale,
    b_log2: i64,
    n: usize,
    k: u32,
    d: usize,
) -> Result<ScaleSchedule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "delta_schedule: order must be >= 2, got {n}"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "delta_schedule: dimension must be >= 2, got {d}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument(
            "delta_schedule: frequency exponent must be >= 1".into(),
        ));
    }
    if b_log2 < 0 {
        return Err(Error::InvalidArgument(format!(
            "delta_schedule: regularity log2 must be >= 0, got {b_log2}"
        )));
    }
    let target = Ratio::new(-(k as i128), n as i128);
    let upper = Ratio::from_integer(-(n as i128) * (3 * d as i128 + b_log2 as i128));
    if log2_delta0 < target {
        return Err(Error::InvalidArgument(format!(
            "delta_schedule: initial scale 2^{log2_delta0} lies below the terminal scale 2^{target}"
        )));
    }
    if log2_delta0 > upper {
        return Err(Error::InvalidArgument(format!(
            "delta_schedule: initial scale 2^{log2_delta0} exceeds the admissible bound 2^{upper}"
        )));
    }

    let c = Ratio::from_integer(3 * d as i128 + b_log2 as i128);
    let q = Ratio::new(n as i128 + 1, n as i128);
    let mut log2_deltas = vec![log2_delta0];
    let mut cur = log2_delta0;
    while cur != target {
        if log2_deltas.len() > MAX_STEPS {
            return Err(Error::InvalidArgument(
                "delta_schedule: cascade failed to terminate".into(),
            ));
        }
        if !magnitude_ok(&cur) {
            return Err(Error::InvalidArgument(
                "delta_schedule: exact arithmetic out of range".into(),
            ));
        }
        let next = c + q * cur;
        if next >= cur {
            return Err(Error::InvalidArgument(format!(
                "delta_schedule: step does not decrease (2^{cur} -> 2^{next}); \
                 the initial scale sits on the admissibility boundary"
            )));
        }
        if next <= target {
            log2_deltas.push(target);
            break;
        }
        log2_deltas.push(next);
        cur = next;
    }

    Ok(ScaleSchedule {
        log2_deltas,
        n,
        d,
        b_log2,
        k,
    })
}
