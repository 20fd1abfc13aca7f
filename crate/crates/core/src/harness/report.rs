//! Experiment reports: measured series, fits, predictions, and a verdict.
//!
//! A report is the single JSON artifact of one experiment run. Slope-style
//! experiments carry one least-squares [`FitResult`] plus the [`Prediction`]
//! it is judged against; every judgement — slope windows, exact identities,
//! coverage counts — is also recorded as a named [`CheckLine`], and the
//! verdict is the conjunction of all check lines.

use serde::{Deserialize, Serialize};

use crate::harness::fit::FitResult;
use crate::harness::config::SCHEMA_VERSION;

/// The model value a fitted slope is compared against.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prediction {
    /// Model slope (per octave, unless the experiment states otherwise).
    pub slope: f64,
    /// Allowed deviation; for one-sided predictions, allowed overshoot.
    pub tolerance: f64,
    /// Required goodness of fit, when the comparison is two-sided.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2_min: Option<f64>,
    /// When true, only `fit.slope <= slope + tolerance` is required.
    #[serde(default)]
    pub one_sided: bool,
    /// Short mechanism label explaining where the model value comes from.
    pub source: String,
}

impl Prediction {
    /// Judge a fit against this prediction.
    pub fn accepts(&self, fit: &FitResult) -> bool {
        if self.one_sided {
            fit.slope <= self.slope + self.tolerance
        } else {
            (fit.slope - self.slope).abs() <= self.tolerance
                && self.r2_min.map_or(true, |r| fit.r2 >= r)
        }
    }

    /// Human-readable comparison of a fit against this prediction.
    pub fn describe(&self, fit: &FitResult) -> String {
        if self.one_sided {
            format!(
                "slope {:.4} <= {:.4} + {:.3} (r2 {:.4})",
                fit.slope, self.slope, self.tolerance, fit.r2
            )
        } else {
            format!(
                "slope {:.4} vs {:.4} +- {:.3}{} (r2 {:.4})",
                fit.slope,
                self.slope,
                self.tolerance,
                self.r2_min
                    .map_or(String::new(), |r| format!(", r2 >= {r}")),
                fit.r2
            )
        }
    }
}

/// One named pass/fail judgement with its measured evidence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckLine {
    /// Stable snake_case identifier of the judgement.
    pub name: String,
    /// Whether the judgement passed.
    pub passed: bool,
    /// Measured numbers backing the judgement.
    pub detail: String,
}

/// Reproducibility context of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    /// Global seed override, when one was supplied.
    pub seed: Option<u64>,
    /// Worker threads used.
    pub threads: usize,
    /// Wall-clock duration of the run in seconds.
    pub wall_time_s: f64,
    /// Version of this package.
    pub package_version: String,
}

/// The full result of one experiment run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Layout version, equal to the configuration schema version.
    pub schema_version: u32,
    /// Experiment name (the configuration `kind` tag).
    pub experiment: String,
    /// Measured rows, one JSON object per row.
    pub series: serde_json::Value,
    /// Least-squares fit of the primary series, when one is defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    /// Model value the fit is judged against, when one is defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    /// All judgements of the run.
    pub checks: Vec<CheckLine>,
    /// Conjunction of all checks.
    pub verdict: bool,
    /// Reproducibility context.
    pub environment: Environment,
}

impl ExperimentReport {
    /// Assemble a report; the verdict is recomputed from the checks.
    pub fn new(
        experiment: &str,
        series: serde_json::Value,
        fit: Option<FitResult>,
        prediction: Option<Prediction>,
        checks: Vec<CheckLine>,
        environment: Environment,
    ) -> Self {
        let verdict = !checks.is_empty() && checks.iter().all(|c| c.passed);
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            series,
            fit,
            prediction,
            checks,
            verdict,
            environment,
        }
    }

    /// Terminal rendering: one line per check plus the verdict.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "[{tag}] {} :: {} — {}\n",
                self.experiment, c.name, c.detail
            ));
        }
        out.push_str(&format!(
            "verdict: {} ({} in {:.1}s)\n",
            if self.verdict { "PASS" } else { "FAIL" },
            self.experiment,
            self.environment.wall_time_s
        ));
        out
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json_pretty(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization is infallible");
        text.push('\n');
        text
    }
}

/// Build a check line comparing a fit to a prediction.
pub fn slope_check(name: &str, fit: &FitResult, prediction: &Prediction) -> CheckLine {
    CheckLine {
        name: name.to_string(),
        passed: prediction.accepts(fit),
        detail: prediction.describe(fit),
    }
}
