//! Witness families that exhibit the sharpness of the mapping bounds:
//! concentrated wave packets ([`focusing`]), anisotropic packets adapted to
//! degenerate model curves ([`finite_type`]), and random conormal-mode sums
//! ([`random_phase`]), plus the exponent formulas their measured slopes are
//! compared against ([`exponents`]) and the spectral profile machinery they
//! are built from ([`profiles`]).

pub mod exponents;
pub mod finite_type;
pub mod focusing;
pub mod profiles;
pub mod random_phase;

pub use exponents::{
    alpha, alpha_tilde, critical_p, critical_p_tilde, exponent_table, necessary_exponent,
    ExponentRow,
};
pub use finite_type::{
    finite_type_critical_alpha, finite_type_f_slope, run_finite_type, FiniteTypeConfig,
    FiniteTypeRow,
};
pub use focusing::{
    focusing_critical_alpha, focusing_f_slope, focusing_rf_slope, run_focusing, FocusingConfig,
    FocusingRow,
};
pub use profiles::{
    fejer_bump, fejer_bump_ft, gauss, gauss_ft, modulated_fejer_axis, sinc, tensor_spectral_field,
    AxisProfile, Envelope,
};
pub use random_phase::{
    anchor_points, conormal_modes, draw_phases, random_phase_moment_slope, run_random_phase,
    RandomPhaseConfig, RandomPhaseRow,
};

use serde::{Deserialize, Serialize};

/// One row of the witness report series, uniform across families.
///
/// Focusing and finite-type rows carry input and output norms; random-phase
/// rows store the `p`-th root of the sampled moment as the input norm and
/// record the seed that reproduces the draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    /// Family tag: `focusing`, `finite_type`, or `random_phase`.
    pub family: String,
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    pub norm_f: f64,
    #[serde(rename = "norm_Rf")]
    pub norm_rf: Option<f64>,
    #[serde(rename = "norm_Rf_sobolev")]
    pub norm_rf_sobolev: Option<f64>,
    pub seed: Option<u64>,
}

impl WitnessRecord {
    pub fn from_focusing(row: &FocusingRow) -> Self {
        Self {
            family: "focusing".into(),
            lambda: row.lambda,
            p: row.p,
            alpha: row.alpha,
            norm_f: row.norm_f,
            norm_rf: Some(row.norm_rf),
            norm_rf_sobolev: Some(row.norm_rf_sobolev),
            seed: None,
        }
    }

    pub fn from_finite_type(row: &FiniteTypeRow) -> Self {
        Self {
            family: "finite_type".into(),
            lambda: row.lambda,
            p: row.p,
            alpha: row.alpha,
            norm_f: row.norm_f,
            norm_rf: Some(row.norm_rf),
            norm_rf_sobolev: Some(row.norm_rf_sobolev),
            seed: None,
        }
    }

    pub fn from_random_phase(row: &RandomPhaseRow, seed: u64) -> Self {
        Self {
            family: "random_phase".into(),
            lambda: row.lambda,
            p: row.p,
            alpha: 0.0,
            norm_f: row.moment_mean.powf(1.0 / row.p),
            norm_rf: None,
            norm_rf_sobolev: None,
            seed: Some(seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_constructors_tag_their_family() {
        let fr = FocusingRow {
            lambda: 8.0,
            p: 2.0,
            alpha: 0.5,
            norm_f: 1.0,
            norm_rf: 0.5,
            norm_rf_sobolev: 0.7,
        };
        let rec = WitnessRecord::from_focusing(&fr);
        assert_eq!(rec.family, "focusing");
        assert_eq!(rec.norm_rf, Some(0.5));
        assert_eq!(rec.seed, None);

        let rr = RandomPhaseRow {
            lambda: 64.0,
            l_count: 7,
            p: 4.0,
            moment_mean: 16.0,
            moment_std: 1.0,
        };
        let rec = WitnessRecord::from_random_phase(&rr, 17);
        assert_eq!(rec.family, "random_phase");
        assert!((rec.norm_f - 2.0).abs() < 1e-12);
        assert_eq!(rec.seed, Some(17));
        assert_eq!(rec.norm_rf, None);
    }

    #[test]
    fn records_roundtrip_through_csv_with_the_pinned_header() {
        let rec = WitnessRecord {
            family: "finite_type".into(),
            lambda: 16.0,
            p: 4.0,
            alpha: 0.125,
            norm_f: 0.25,
            norm_rf: Some(0.125),
            norm_rf_sobolev: Some(0.2),
            seed: None,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&rec).unwrap();
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "family,lambda,p,alpha,norm_f,norm_Rf,norm_Rf_sobolev,seed"
        );
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let back: WitnessRecord = r.deserialize().next().unwrap().unwrap();
        assert_eq!(back, rec);
    }
}
