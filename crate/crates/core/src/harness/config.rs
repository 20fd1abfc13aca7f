//! JSON experiment configurations.
//!
//! A configuration file holds one experiment: a `kind` tag selecting the
//! experiment family and a `params` object whose fields all have defaults,
//! so `{"schema_version": 1, "experiment": {"kind": "l2_decay", "params":
//! {}}}` runs the full-scale frequency-decay sweep. Optional top-level
//! `seed` and `threads` override the per-experiment seeds and the worker
//! pool size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::witnesses::{FiniteTypeConfig, FocusingConfig, RandomPhaseConfig};

/// Version of the configuration (and report) layout this build reads.
pub const SCHEMA_VERSION: u32 = 1;

/// One experiment run: schema version, optional global overrides, and the
/// tagged experiment parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must equal [`SCHEMA_VERSION`].
    pub schema_version: u32,
    /// When set, replaces every per-experiment seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Worker threads; unset keeps the process-wide default pool.
    #[serde(default)]
    pub threads: Option<usize>,
    /// The experiment to run.
    pub experiment: Experiment,
}

impl ExperimentConfig {
    /// Parse and validate a JSON configuration.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("configuration parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check the schema version and cheap structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported schema_version {} (this build reads {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        if let Some(0) = self.threads {
            return Err(Error::InvalidArgument(
                "threads must be >= 1 when set".into(),
            ));
        }
        Ok(())
    }

    /// Wrap an experiment with the current schema version and no overrides.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: None,
            threads: None,
            experiment,
        }
    }

    /// Stable name of the contained experiment (used for output folders).
    pub fn name(&self) -> &'static str {
        self.experiment.name()
    }
}

/// The experiment families the harness can run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Experiment {
    /// Operator-norm decay of shell-localized symbol operators across
    /// frequency octaves, fitted against the half-power-per-octave model.
    L2Decay(L2DecayParams),
    /// Concentration-family norm sweeps compared to their scaling models.
    Witness(WitnessParams),
    /// Monte Carlo decoupling ratios of the model block cover across
    /// scales, with a one-sided growth-exponent bound.
    Decoupling(DecouplingParams),
    /// Exact-arithmetic contraction cascades plus the pointwise partition
    /// residual of the gauge-shell symbol splitting.
    Schedule(ScheduleParams),
    /// Block assignment of shell pieces under the model coordinate map and
    /// full coverage of admissible points by the reverse cover.
    CoverCheck(CoverCheckParams),
    /// Round trips of the pairing reduction and the critical-parameter
    /// solver, against exact closed forms.
    RecursionCheck(RecursionCheckParams),
    /// Frequency-window kernel mass and sup-norm ratios across octaves.
    KernelCheck(KernelCheckParams),
    /// Scaled-class support and derivative verification of a localized,
    /// frequency-windowed symbol piece.
    ClassCheck(ClassCheckParams),
}

impl Experiment {
    /// Stable snake_case name, identical to the JSON `kind` tag.
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::L2Decay(_) => "l2_decay",
            Experiment::Witness(_) => "witness",
            Experiment::Decoupling(_) => "decoupling",
            Experiment::Schedule(_) => "schedule",
            Experiment::CoverCheck(_) => "cover_check",
            Experiment::RecursionCheck(_) => "recursion_check",
            Experiment::KernelCheck(_) => "kernel_check",
            Experiment::ClassCheck(_) => "class_check",
        }
    }

    /// One-line description for the experiment listing.
    pub fn describe(name: &str) -> Option<&'static str> {
        Some(match name {
            "l2_decay" => "fit the operator-norm decay of shell symbols across octaves",
            "witness" => "run a concentration witness family and check its norm slopes",
            "decoupling" => "Monte Carlo block decoupling ratios with a growth-exponent bound",
            "schedule" => "exact contraction cascades and the gauge-split partition residual",
            "cover_check" => "block assignment of shell pieces and reverse-cover completeness",
            "recursion_check" => "pairing-reduction round trips and the critical-parameter solver",
            "kernel_check" => "frequency-window kernel mass and sup-norm uniformity across octaves",
            "class_check" => "scaled-class support/derivative verification of a windowed piece",
            _ => return None,
        })
    }

    /// All experiment names, in listing order.
    pub fn all_names() -> &'static [&'static str] {
        &[
            "l2_decay",
            "witness",
            "decoupling",
            "schedule",
            "cover_check",
            "recursion_check",
            "kernel_check",
            "class_check",
        ]
    }
}

/// Shell-symbol shape for the decay sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SymbolChoice {
    /// Radial dyadic-shell symbol.
    Ring,
    /// Dyadic shell localized to directions within `half_sin` (in sine of
    /// the angle) of the plane orthogonal to the curve tangent at the
    /// interval center.
    Cone {
        /// Half-width of the angular window, measured in `sin(angle)`.
        half_sin: f64,
    },
}

/// Parameters of the operator-norm decay sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct L2DecayParams {
    /// Ambient dimension of the moment curve.
    pub d: usize,
    /// Spatial grid points per axis.
    pub n_x: usize,
    /// Curve-parameter quadrature nodes.
    pub n_s: usize,
    /// Time quadrature nodes.
    pub n_t: usize,
    /// Frequency octaves swept.
    pub ks: Vec<i32>,
    /// Shell symbol used at each octave.
    pub symbol: SymbolChoice,
    /// Allowed deviation of the fitted slope from the model value `-1/2`.
    pub slope_tol: f64,
    /// Minimum coefficient of determination of the fit.
    pub r2_min: f64,
}

impl Default for L2DecayParams {
    fn default() -> Self {
        Self {
            d: 2,
            n_x: 512,
            n_s: 129,
            n_t: 257,
            ks: vec![4, 5, 6, 7, 8],
            symbol: SymbolChoice::Cone { half_sin: 0.5 },
            slope_tol: 0.15,
            r2_min: 0.98,
        }
    }
}

/// Witness family selector plus its pass criteria.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WitnessParams {
    /// Fields concentrating on a shrinking tube around one curve point.
    Focusing(FocusingWitnessParams),
    /// Concentration adapted to prescribed contact orders.
    FiniteType(FiniteTypeWitnessParams),
    /// Random-phase superpositions of curve-anchored plane waves.
    RandomPhase(RandomPhaseWitnessParams),
}

/// Focusing witness sweep and slope tolerances.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FocusingWitnessParams {
    /// Ambient dimension of the moment curve.
    pub d: usize,
    /// Grid and sweep sizes.
    pub config: FocusingConfig,
    /// Allowed deviation of the input-norm slope from `-(d + 1) / p`.
    pub slope_tol_f: f64,
    /// Allowed deviation of the transform-norm slope from `-1 - d / p`.
    pub slope_tol_rf: f64,
}

impl Default for FocusingWitnessParams {
    fn default() -> Self {
        Self {
            d: 2,
            config: FocusingConfig::standard(),
            slope_tol_f: 0.1,
            slope_tol_rf: 0.15,
        }
    }
}

/// Finite-type witness sweep and slope tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FiniteTypeWitnessParams {
    /// Contact orders, grid sizes, and envelope widths.
    pub config: FiniteTypeConfig,
    /// Allowed deviation of the input-norm slope from
    /// `-(sum of orders) / (top order * p)`.
    pub slope_tol: f64,
    /// The minimum of the transform modulus over the concentration window
    /// must stay above this floor at every swept scale.
    pub min_window_floor: f64,
}

impl Default for FiniteTypeWitnessParams {
    fn default() -> Self {
        Self {
            config: FiniteTypeConfig::standard(),
            slope_tol: 0.1,
            min_window_floor: 0.05,
        }
    }
}

/// Random-phase witness sweep and slope tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomPhaseWitnessParams {
    /// Ambient dimension of the moment curve.
    pub d: usize,
    /// Anchors, draws, and quadrature sizes.
    pub config: RandomPhaseConfig,
    /// Allowed relative deviation of the moment slope from `p / (2 d)`.
    pub slope_rel_tol: f64,
}

impl Default for RandomPhaseWitnessParams {
    fn default() -> Self {
        Self {
            d: 2,
            config: RandomPhaseConfig::standard(),
            slope_rel_tol: 0.1,
        }
    }
}

/// Parameters of the Monte Carlo decoupling sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DecouplingParams {
    /// Derivative order of the model cover.
    pub n: usize,
    /// Lebesgue exponent of the measured ratio (at least 2).
    pub p: f64,
    /// Base-2 logarithms of the cover scales swept (negative integers).
    pub log2_deltas: Vec<i32>,
    /// Uniform samples per Monte Carlo norm estimate.
    pub n_mc: usize,
    /// Independent phase draws averaged per scale.
    pub n_draws: usize,
    /// Base seed of the stream-separated draws.
    pub seed: u64,
    /// Slack added to the model growth exponent `1/2 - 1/p`.
    pub exponent_margin: f64,
}

impl Default for DecouplingParams {
    fn default() -> Self {
        Self {
            n: 2,
            p: 6.0,
            log2_deltas: vec![-2, -3, -4, -5, -6],
            n_mc: 2048,
            n_draws: 32,
            seed: 29,
            exponent_margin: 0.1,
        }
    }
}

/// Parameters of the exact cascade and split-partition experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleParams {
    /// Ambient dimension.
    pub d: usize,
    /// Contraction order.
    pub n: usize,
    /// Frequency exponent the cascade terminates at.
    pub k: u32,
    /// Base-2 logarithm of the regularity constant.
    pub b_log2: i64,
    /// Exact `log2` of the starting scale, as `(numerator, denominator)`.
    pub log2_delta0: (i64, i64),
    /// Also sweep a grid of admissible cascades and check each exactly.
    pub sweep: bool,
    /// Support probes for the gauge-split partition residual.
    pub split_samples: usize,
    /// Seed of the support sampler.
    pub split_seed: u64,
    /// Exact `log2` of the split's child scale.
    pub log2_delta1: (i64, i64),
    /// Largest allowed relative partition residual.
    pub residual_tol: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            d: 2,
            n: 2,
            k: 40,
            b_log2: 0,
            log2_delta0: (-14, 1),
            sweep: true,
            split_samples: 10_000,
            split_seed: 17,
            log2_delta1: (-15, 1),
            residual_tol: 1e-10,
        }
    }
}

/// Parameters of the block-assignment and reverse-cover experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverCheckParams {
    /// Ambient dimension of the moment curve.
    pub d: usize,
    /// Derivative order of the blocks.
    pub n: usize,
    /// Frequency exponent of the shell piece.
    pub k: i32,
    /// Exact `log2` of the window scale.
    pub log2_delta0: (i64, i64),
    /// Exact `log2` of the shell child scale.
    pub log2_delta1: (i64, i64),
    /// Regularity constant of the localization.
    pub b: f64,
    /// Conditioned support probes required.
    pub samples: usize,
    /// Probes requested per sampling batch.
    pub batch: usize,
    /// First seed of the batch sampler (each batch increments it).
    pub seed: u64,
    /// Keep probes whose order-`n` pairing at the window center is at
    /// least this fraction of the frequency radius.
    pub min_top_frac: f64,
    /// Largest allowed centered-pairing ratio inside a block.
    pub ratio_max: f64,
    /// Required range of the top model coordinate over the probes.
    pub top_lo: f64,
    /// Required range of the top model coordinate over the probes.
    pub top_hi: f64,
    /// Scale of the reverse cover tested for completeness.
    pub admissible_delta: f64,
    /// Admissible points drawn against the reverse cover.
    pub admissible_samples: usize,
    /// Seed of the admissible-point sampler.
    pub admissible_seed: u64,
}

impl Default for CoverCheckParams {
    fn default() -> Self {
        Self {
            d: 3,
            n: 2,
            k: 56,
            log2_delta0: (-20, 1),
            log2_delta1: (-41, 2),
            b: 1.0,
            samples: 10_000,
            batch: 2_000,
            seed: 1000,
            min_top_frac: 0.1,
            ratio_max: 4.0,
            top_lo: 0.05,
            top_hi: 4.0,
            admissible_delta: 0.0625,
            admissible_samples: 10_000,
            admissible_seed: 11,
        }
    }
}

/// Parameters of the pairing-reduction and critical-parameter experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RecursionCheckParams {
    /// Orders checked; each draws its own input batch.
    pub n_values: Vec<usize>,
    /// Random reduction inputs per order.
    pub samples: usize,
    /// Seed of the input generator.
    pub seed: u64,
    /// Largest allowed relative round-trip error.
    pub rel_tol: f64,
    /// Random frequency vectors per order for the critical-parameter
    /// solver.
    pub sigma_samples: usize,
    /// Seed of the frequency generator.
    pub sigma_seed: u64,
    /// Largest allowed solver residual, relative to the frequency radius.
    pub sigma_residual_tol: f64,
    /// Largest allowed deviation from the exact linear-pairing root.
    pub sigma_closed_form_tol: f64,
}

impl Default for RecursionCheckParams {
    fn default() -> Self {
        Self {
            n_values: vec![2, 3, 4, 5],
            samples: 100_000,
            seed: 101,
            rel_tol: 1e-12,
            sigma_samples: 1000,
            sigma_seed: 7,
            sigma_residual_tol: 1e-10,
            sigma_closed_form_tol: 1e-12,
        }
    }
}

/// Parameters of the kernel-uniformity experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelCheckParams {
    /// Frequency octaves swept (plane case, order 2).
    pub ks: Vec<i32>,
    /// Derivative order of the frequency window.
    pub n: usize,
    /// Window scale; the window half-width is `delta0^n 2^k`.
    pub delta0: f64,
    /// Spatial grid points per axis for kernel sampling (power of two).
    pub n_x_kernel: usize,
    /// Spatial grid points per axis for the operator sup-norm probe.
    pub n_x_op: usize,
    /// Curve-parameter nodes of the probe field.
    pub n_s: usize,
    /// Time-lattice points of the frequency resolution.
    pub n_t: usize,
    /// Curve parameters where kernels are sampled (inside the cutoff
    /// plateau).
    pub s_samples: Vec<f64>,
    /// Times where kernels are sampled (inside the cutoff plateau).
    pub t_samples: Vec<f64>,
    /// Shell modes per octave in the probe field.
    pub modes_per_ring: usize,
    /// Largest allowed max/min ratio across the pooled samples.
    pub ratio_max: f64,
}

impl Default for KernelCheckParams {
    fn default() -> Self {
        Self {
            ks: vec![4, 5, 6, 7, 8],
            n: 2,
            delta0: 1.0,
            n_x_kernel: 256,
            n_x_op: 128,
            n_s: 33,
            n_t: 257,
            s_samples: vec![-0.4, 0.0, 0.4],
            t_samples: vec![1.3, 1.5, 1.7],
            modes_per_ring: 8,
            ratio_max: 4.0,
        }
    }
}

/// Parameters of the scaled-class verification experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassCheckParams {
    /// Frequency exponent of the shell piece.
    pub k: i32,
    /// Derivative order of the localization and window.
    pub n: usize,
    /// Parameter-window scale.
    pub delta0: f64,
    /// Regularity constant of the localization.
    pub b: f64,
    /// Claimed bound for the scaled-derivative comparison.
    pub bound_b: f64,
    /// Support probes requested.
    pub samples: usize,
    /// Seed of the support sampler.
    pub seed: u64,
    /// Minimum probes that must land on the support.
    pub min_hits: usize,
}

impl Default for ClassCheckParams {
    fn default() -> Self {
        Self {
            k: 6,
            n: 2,
            delta0: 0.25,
            b: 1.0,
            bound_b: 4.0,
            samples: 400,
            seed: 21,
            min_hits: 300,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse_with_defaults() {
        for kind in Experiment::all_names() {
            let text = format!(
                "{{\"schema_version\":1,\"experiment\":{{\"kind\":\"{kind}\",\"params\":{}}}}}",
                if *kind == "witness" {
                    "{\"family\":\"focusing\"}"
                } else {
                    "{}"
                }
            );
            let cfg = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(cfg.name(), *kind);
            assert!(cfg.seed.is_none() && cfg.threads.is_none());
        }
    }

    #[test]
    fn overrides_and_witness_families_parse() {
        let text = r#"{
            "schema_version": 1,
            "seed": 99,
            "threads": 2,
            "experiment": {
                "kind": "witness",
                "params": {
                    "family": "random_phase",
                    "d": 2,
                    "config": { "lambdas": [64.0, 128.0], "n_draws": 4 }
                }
            }
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.seed, Some(99));
        assert_eq!(cfg.threads, Some(2));
        match cfg.experiment {
            Experiment::Witness(WitnessParams::RandomPhase(w)) => {
                assert_eq!(w.config.lambdas, vec![64.0, 128.0]);
                assert_eq!(w.config.n_draws, 4);
                // Untouched fields keep their defaults.
                assert_eq!(w.config.seed, RandomPhaseConfig::standard().seed);
            }
            other => panic!("wrong experiment parsed: {other:?}"),
        }
    }

    #[test]
    fn bad_configurations_are_rejected() {
        // Wrong schema version.
        assert!(ExperimentConfig::from_json(
            r#"{"schema_version":2,"experiment":{"kind":"l2_decay","params":{}}}"#
        )
        .is_err());
        // Unknown top-level key.
        assert!(ExperimentConfig::from_json(
            r#"{"schema_version":1,"extra":true,"experiment":{"kind":"l2_decay","params":{}}}"#
        )
        .is_err());
        // Unknown experiment kind.
        assert!(ExperimentConfig::from_json(
            r#"{"schema_version":1,"experiment":{"kind":"nope","params":{}}}"#
        )
        .is_err());
        // Zero threads.
        assert!(ExperimentConfig::from_json(
            r#"{"schema_version":1,"threads":0,"experiment":{"kind":"l2_decay","params":{}}}"#
        )
        .is_err());
    }

    #[test]
    fn configs_roundtrip_through_json() {
        let cfg = ExperimentConfig::new(Experiment::Decoupling(DecouplingParams::default()));
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.name(), "decoupling");
        match back.experiment {
            Experiment::Decoupling(p) => {
                assert_eq!(p.log2_deltas, vec![-2, -3, -4, -5, -6]);
                assert_eq!(p.n_draws, 32);
            }
            other => panic!("wrong experiment parsed: {other:?}"),
        }
    }

    #[test]
    fn every_experiment_name_has_a_description() {
        for name in Experiment::all_names() {
            assert!(Experiment::describe(name).is_some(), "missing: {name}");
        }
        assert!(Experiment::describe("unknown").is_none());
    }
}
