//! Experiment dispatch and deterministic output files.
//!
//! [`run_experiment`] executes one configured experiment and, unless
//! disabled, writes three artifacts under
//! `<out_root>/<experiment>/<timestamp>/`: `report.json` (the full
//! [`ExperimentReport`]), `series.csv` (the measured rows), and `plot.dat`
//! (a two-column extract ready for plotting). Runs are deterministic given
//! the seeds: parallel reductions happen in a fixed order, so repeated runs
//! emit byte-identical series files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::curves::{moment_curve, Curve, PARAM_INTERVAL};
use crate::decomp::{
    block_assignment_check, block_coordinates, covering_block, delta_schedule, expand_pairings,
    mc_decoupling_ratio, mu_piece, reduce_pairings, reverse_cover, sample_admissible_points,
    split_by_gauge, Log2Scale,
};
use crate::error::{Error, Result};
use crate::fields::{AuxKind, GridSpec, SampledField};
use crate::harness::config::{
    ClassCheckParams, CoverCheckParams, DecouplingParams, Experiment, ExperimentConfig,
    KernelCheckParams, L2DecayParams, RecursionCheckParams, ScheduleParams, SymbolChoice,
    WitnessParams,
};
use crate::harness::fit::{fit_decay, FitResult};
use crate::harness::report::{
    slope_check, CheckLine, Environment, ExperimentReport, Prediction,
};
use crate::symbols::{
    psi_chi_cone, psi_chi_ring, sample_localized_support, solve_critical_s, symbol_class_verify,
    tau_window, top_order_localize, SupportSample, Symbol,
};
use crate::witnesses::{
    finite_type_f_slope, focusing_f_slope, focusing_rf_slope, random_phase_moment_slope,
    run_finite_type, run_focusing, run_random_phase,
};
use crate::xray::{
    apply_symbol_tau, kernel_eval, kernel_l1_norm, l2_fiber_opnorm, CutoffPair, FiberGrid,
};

/// Environment variable consulted for the worker-pool size when neither the
/// command line nor the configuration sets one.
pub const THREADS_ENV: &str = "XRAY_SHARP_THREADS";

/// How an experiment run is executed and where its artifacts go.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Root of the output tree.
    pub out_root: PathBuf,
    /// Suppress per-check terminal lines.
    pub quiet: bool,
    /// Seed override; wins over the configuration's override.
    pub seed: Option<u64>,
    /// Thread override; wins over the configuration's value.
    pub threads: Option<usize>,
    /// Write `report.json` / `series.csv` / `plot.dat`.
    pub write_outputs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_root: PathBuf::from("out"),
            quiet: false,
            seed: None,
            threads: None,
            write_outputs: true,
        }
    }
}

/// A finished run: the report plus the directory it was written to.
#[derive(Debug)]
pub struct RunArtifacts {
    /// The full report (also serialized to `report.json`).
    pub report: ExperimentReport,
    /// Output directory, when artifacts were written.
    pub out_dir: Option<PathBuf>,
}

/// Everything an experiment hands back to the dispatcher.
pub struct ExperimentOutput {
    /// Column names of the series table.
    pub series_header: Vec<&'static str>,
    /// Formatted series cells, row-major.
    pub series_rows: Vec<Vec<String>>,
    /// The same rows as JSON objects.
    pub series_json: serde_json::Value,
    /// Primary least-squares fit, when the experiment defines one.
    pub fit: Option<FitResult>,
    /// Model value judged against the primary fit.
    pub prediction: Option<Prediction>,
    /// All judgements.
    pub checks: Vec<CheckLine>,
    /// Two-column extract for `plot.dat`.
    pub plot: Vec<(f64, f64)>,
}

/// Execute one experiment with the given options.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    cfg.validate()?;
    let seed = opts.seed.or(cfg.seed);
    let threads = opts
        .threads
        .or(cfg.threads)
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(0) = threads {
        return Err(Error::InvalidArgument(
            "thread override must be >= 1".into(),
        ));
    }

    let started = Instant::now();
    let output = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
            pool.install(|| dispatch(&cfg.experiment, seed))?
        }
        None => dispatch(&cfg.experiment, seed)?,
    };
    let wall_time_s = started.elapsed().as_secs_f64();

    let environment = Environment {
        seed,
        threads: threads.unwrap_or_else(rayon::current_num_threads),
        wall_time_s,
        package_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let report = ExperimentReport::new(
        cfg.name(),
        output.series_json.clone(),
        output.fit,
        output.prediction.clone(),
        output.checks.clone(),
        environment,
    );

    let out_dir = if opts.write_outputs {
        let dir = allocate_out_dir(&opts.out_root, cfg.name())?;
        fs::write(dir.join("report.json"), report.to_json_pretty())?;
        fs::write(
            dir.join("series.csv"),
            render_csv(&output.series_header, &output.series_rows),
        )?;
        fs::write(dir.join("plot.dat"), render_plot(&output.plot))?;
        Some(dir)
    } else {
        None
    };

    if !opts.quiet {
        print!("{}", report.render_text());
        if let Some(dir) = &out_dir {
            println!("artifacts: {}", dir.display());
        }
    }
    Ok(RunArtifacts { report, out_dir })
}

/// Pick `<root>/<name>/<unix-seconds>[-<n>]`, never reusing a directory.
fn allocate_out_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let base = root.join(name);
    fs::create_dir_all(&base)?;
    let mut dir = base.join(secs.to_string());
    let mut tag = 0u32;
    while dir.exists() {
        tag += 1;
        dir = base.join(format!("{secs}-{tag}"));
    }
    fs::create_dir(&dir)?;
    Ok(dir)
}

fn render_csv(header: &[&'static str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn render_plot(points: &[(f64, f64)]) -> String {
    let mut out = String::from("# x y\n");
    for (x, y) in points {
        out.push_str(&format!("{x} {y}\n"));
    }
    out
}

/// Shortest-roundtrip decimal rendering, identical across runs.
fn fmt(v: f64) -> String {
    format!("{v}")
}

fn dispatch(experiment: &Experiment, seed: Option<u64>) -> Result<ExperimentOutput> {
    match experiment {
        Experiment::L2Decay(p) => run_l2_decay(p),
        Experiment::Witness(p) => run_witness(p, seed),
        Experiment::Decoupling(p) => run_decoupling(p, seed),
        Experiment::Schedule(p) => run_schedule(p, seed),
        Experiment::CoverCheck(p) => run_cover_check(p, seed),
        Experiment::RecursionCheck(p) => run_recursion_check(p, seed),
        Experiment::KernelCheck(p) => run_kernel_check(p),
        Experiment::ClassCheck(p) => run_class_check(p, seed),
    }
}

// --- operator-norm decay ---------------------------------------------------

fn run_l2_decay(p: &L2DecayParams) -> Result<ExperimentOutput> {
    if p.ks.len() < 3 {
        return Err(Error::InvalidArgument(
            "l2_decay: need at least 3 octaves to fit a slope".into(),
        ));
    }
    let curve = moment_curve(p.d)?;
    let cut = CutoffPair::standard();
    let fg = FiberGrid::new(p.d, p.n_x, PARAM_INTERVAL, p.n_s, p.n_t)?;
    let mut xs = Vec::with_capacity(p.ks.len());
    let mut ys = Vec::with_capacity(p.ks.len());
    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    for &k in &p.ks {
        let sym = match &p.symbol {
            SymbolChoice::Ring => psi_chi_ring(&cut, k),
            SymbolChoice::Cone { half_sin } => psi_chi_cone(&cut, p.d, k, *half_sin),
        };
        let norm = l2_fiber_opnorm(&sym, &curve, &fg)?;
        xs.push(k as f64);
        ys.push(norm);
        rows.push(vec![k.to_string(), fmt(norm)]);
        rows_json.push(json!({ "k": k, "opnorm": norm }));
    }
    let fit = fit_decay(&xs, &ys)?;
    let prediction = Prediction {
        slope: -0.5,
        tolerance: p.slope_tol,
        r2_min: Some(p.r2_min),
        one_sided: false,
        source: "stationary fiber width halves per frequency octave".into(),
    };
    let checks = vec![slope_check("decay_slope", &fit, &prediction)];
    Ok(ExperimentOutput {
        series_header: vec!["k", "opnorm"],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: Some(fit),
        prediction: Some(prediction),
        checks,
        plot: xs.into_iter().zip(ys).collect(),
    })
}

// --- witnesses --------------------------------------------------------------

fn run_witness(w: &WitnessParams, seed: Option<u64>) -> Result<ExperimentOutput> {
    let cut = CutoffPair::standard();
    match w {
        WitnessParams::Focusing(fp) => {
            let curve = moment_curve(fp.d)?;
            let rows = run_focusing(&curve, &cut, &fp.config)?;
            let mut out_rows = Vec::new();
            let mut rows_json = Vec::new();
            for r in &rows {
                out_rows.push(vec![
                    fmt(r.lambda),
                    fmt(r.p),
                    fmt(r.norm_f),
                    fmt(r.norm_rf),
                    fmt(r.norm_rf_sobolev),
                ]);
                rows_json.push(json!({
                    "lambda": r.lambda, "p": r.p, "norm_f": r.norm_f,
                    "norm_rf": r.norm_rf, "norm_rf_sobolev": r.norm_rf_sobolev,
                }));
            }
            let mut checks = Vec::new();
            let mut plot = Vec::new();
            for (i, &pv) in fp.config.ps.iter().enumerate() {
                let sel: Vec<_> = rows.iter().filter(|r| r.p == pv).collect();
                let xs: Vec<f64> = sel.iter().map(|r| r.lambda.log2()).collect();
                let ys_f: Vec<f64> = sel.iter().map(|r| r.norm_f).collect();
                let ys_rf: Vec<f64> = sel.iter().map(|r| r.norm_rf).collect();
                let fit_f = fit_decay(&xs, &ys_f)?;
                let fit_rf = fit_decay(&xs, &ys_rf)?;
                let pred_f = Prediction {
                    slope: focusing_f_slope(fp.d, pv),
                    tolerance: fp.slope_tol_f,
                    r2_min: None,
                    one_sided: false,
                    source: "volume count of the shrinking concentration tube".into(),
                };
                let pred_rf = Prediction {
                    slope: focusing_rf_slope(fp.d, pv),
                    tolerance: fp.slope_tol_rf,
                    r2_min: None,
                    one_sided: false,
                    source: "tube volume transported along the curve".into(),
                };
                checks.push(slope_check(
                    &format!("input_norm_slope_p{pv}"),
                    &fit_f,
                    &pred_f,
                ));
                checks.push(slope_check(
                    &format!("transform_norm_slope_p{pv}"),
                    &fit_rf,
                    &pred_rf,
                ));
                if i == 0 {
                    plot = xs.into_iter().zip(ys_f).collect();
                }
            }
            Ok(ExperimentOutput {
                series_header: vec!["lambda", "p", "norm_f", "norm_rf", "norm_rf_sobolev"],
                series_rows: out_rows,
                series_json: serde_json::Value::Array(rows_json),
                fit: None,
                prediction: None,
                checks,
                plot,
            })
        }
        WitnessParams::FiniteType(fp) => {
            let rows = run_finite_type(&cut, &fp.config)?;
            let mut out_rows = Vec::new();
            let mut rows_json = Vec::new();
            for r in &rows {
                out_rows.push(vec![
                    fmt(r.lambda),
                    fmt(r.p),
                    fmt(r.norm_f),
                    fmt(r.norm_rf),
                    fmt(r.e_min),
                    r.e_count.to_string(),
                ]);
                rows_json.push(json!({
                    "lambda": r.lambda, "p": r.p, "norm_f": r.norm_f,
                    "norm_rf": r.norm_rf, "e_min": r.e_min, "e_count": r.e_count,
                }));
            }
            let mut checks = Vec::new();
            let mut plot = Vec::new();
            for (i, &pv) in fp.config.ps.iter().enumerate() {
                let sel: Vec<_> = rows.iter().filter(|r| r.p == pv).collect();
                let xs: Vec<f64> = sel.iter().map(|r| r.lambda.log2()).collect();
                let ys: Vec<f64> = sel.iter().map(|r| r.norm_f).collect();
                let fit_f = fit_decay(&xs, &ys)?;
                let pred = Prediction {
                    slope: finite_type_f_slope(&fp.config.exponents, pv),
                    tolerance: fp.slope_tol,
                    r2_min: None,
                    one_sided: false,
                    source: "per-axis window volume under the contact orders".into(),
                };
                checks.push(slope_check(
                    &format!("input_norm_slope_p{pv}"),
                    &fit_f,
                    &pred,
                ));
                if i == 0 {
                    plot = xs.into_iter().zip(ys).collect();
                }
            }
            let e_worst = rows
                .iter()
                .map(|r| r.e_min)
                .fold(f64::INFINITY, f64::min);
            let counts_ok = rows.iter().all(|r| r.e_count >= 1);
            checks.push(CheckLine {
                name: "window_min_floor".into(),
                passed: e_worst >= fp.min_window_floor && counts_ok,
                detail: format!(
                    "min |transform| over the window >= {:.4} (floor {}), every window nonempty: {}",
                    e_worst, fp.min_window_floor, counts_ok
                ),
            });
            Ok(ExperimentOutput {
                series_header: vec!["lambda", "p", "norm_f", "norm_rf", "e_min", "e_count"],
                series_rows: out_rows,
                series_json: serde_json::Value::Array(rows_json),
                fit: None,
                prediction: None,
                checks,
                plot,
            })
        }
        WitnessParams::RandomPhase(rp) => {
            let mut config = rp.config.clone();
            if let Some(s) = seed {
                config.seed = s;
            }
            let curve = moment_curve(rp.d)?;
            let rows = run_random_phase(&curve, &cut, &config)?;
            let mut out_rows = Vec::new();
            let mut rows_json = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in &rows {
                out_rows.push(vec![
                    fmt(r.lambda),
                    r.l_count.to_string(),
                    fmt(r.p),
                    fmt(r.moment_mean),
                    fmt(r.moment_std),
                ]);
                rows_json.push(json!({
                    "lambda": r.lambda, "l_count": r.l_count, "p": r.p,
                    "moment_mean": r.moment_mean, "moment_std": r.moment_std,
                }));
                xs.push(r.lambda.log2());
                ys.push(r.moment_mean);
            }
            let fit = fit_decay(&xs, &ys)?;
            let model = random_phase_moment_slope(rp.d, config.p);
            let prediction = Prediction {
                slope: model,
                tolerance: rp.slope_rel_tol * model.abs(),
                r2_min: None,
                one_sided: false,
                source: "pair counting of the anchored-phase moments".into(),
            };
            let checks = vec![slope_check("moment_slope", &fit, &prediction)];
            Ok(ExperimentOutput {
                series_header: vec!["lambda", "l_count", "p", "moment_mean", "moment_std"],
                series_rows: out_rows,
                series_json: serde_json::Value::Array(rows_json),
                fit: Some(fit),
                prediction: Some(prediction),
                checks,
                plot: xs.into_iter().zip(ys).collect(),
            })
        }
    }
}

// --- decoupling -------------------------------------------------------------

fn run_decoupling(p: &DecouplingParams, seed: Option<u64>) -> Result<ExperimentOutput> {
    if p.log2_deltas.len() < 3 {
        return Err(Error::InvalidArgument(
            "decoupling: need at least 3 scales to fit a growth exponent".into(),
        ));
    }
    if p.log2_deltas.iter().any(|&e| e >= 0) {
        return Err(Error::InvalidArgument(
            "decoupling: scales must satisfy log2(delta) < 0".into(),
        ));
    }
    let seed = seed.unwrap_or(p.seed);
    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut l2_means = Vec::new();
    for &e in &p.log2_deltas {
        let delta = (e as f64).exp2();
        let draws = mc_decoupling_ratio(delta, p.n, p.p, p.n_mc, p.n_draws, seed)?;
        let nd = draws.len() as f64;
        let mean_lp = draws.iter().map(|d| d.ratio_lp).sum::<f64>() / nd;
        let mean_l2 = draws.iter().map(|d| d.ratio_l2).sum::<f64>() / nd;
        let var_lp = draws
            .iter()
            .map(|d| (d.ratio_lp - mean_lp).powi(2))
            .sum::<f64>()
            / (nd - 1.0).max(1.0);
        let n_pieces = draws.first().map_or(0, |d| d.n_pieces);
        xs.push(-(e as f64));
        ys.push(mean_lp);
        l2_means.push(mean_l2);
        rows.push(vec![
            e.to_string(),
            n_pieces.to_string(),
            fmt(mean_lp),
            fmt(var_lp.sqrt()),
            fmt(mean_l2),
        ]);
        rows_json.push(json!({
            "log2_delta": e, "n_pieces": n_pieces, "mean_ratio_lp": mean_lp,
            "std_ratio_lp": var_lp.sqrt(), "mean_ratio_l2": mean_l2,
        }));
    }
    let fit = fit_decay(&xs, &ys)?;
    let prediction = Prediction {
        slope: 0.5 - 1.0 / p.p,
        tolerance: p.exponent_margin,
        r2_min: None,
        one_sided: true,
        source: "square-function loss of pairwise-separated blocks".into(),
    };
    let mut checks = vec![slope_check("lp_growth_exponent", &fit, &prediction)];
    let l2_worst = l2_means
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine {
        name: "l2_ratio_near_one".into(),
        passed: l2_worst <= 0.2,
        detail: format!("max |mean ratio_l2 - 1| = {l2_worst:.4} (orthogonality control)"),
    });
    Ok(ExperimentOutput {
        series_header: vec![
            "log2_delta",
            "n_pieces",
            "mean_ratio_lp",
            "std_ratio_lp",
            "mean_ratio_l2",
        ],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: Some(fit),
        prediction: Some(prediction),
        checks,
        plot: xs.into_iter().zip(ys).collect(),
    })
}

// --- schedule + split partition ----------------------------------------------

/// Exact rational from an `(numerator, denominator)` pair.
fn ratio_of(pair: (i64, i64)) -> Result<Log2Scale> {
    if pair.1 == 0 {
        return Err(Error::InvalidArgument(
            "log2 scale denominator must be nonzero".into(),
        ));
    }
    Ok(Ratio::new(pair.0 as i128, pair.1 as i128))
}

/// The localized, frequency-windowed center piece used by the split,
/// cover, and class experiments.
fn windowed_center_piece(
    curve: &Curve,
    k: i32,
    n: usize,
    delta0: f64,
    b: f64,
) -> Result<Symbol> {
    let cut = CutoffPair::standard();
    let local = top_order_localize(psi_chi_ring(&cut, k), curve, n, delta0, b)?;
    let windowed = tau_window(local, curve, k, n, delta0)?;
    mu_piece(&windowed, delta0, 0)
}

/// Gain passed to the constructive support sampler: the reciprocal of the
/// relative localization width.
fn localization_gain(d: usize, b: f64, delta0: f64, n: usize) -> f64 {
    100.0 * d as f64 * b * delta0.powi(-(n as i32))
}

fn run_schedule(p: &ScheduleParams, seed: Option<u64>) -> Result<ExperimentOutput> {
    let log2_d0 = ratio_of(p.log2_delta0)?;
    let schedule = delta_schedule(log2_d0, p.b_log2, p.n, p.k, p.d)?;
    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    for (j, x) in schedule.log2_deltas().iter().enumerate() {
        rows.push(vec![
            j.to_string(),
            x.numer().to_string(),
            x.denom().to_string(),
            fmt((*x.numer() as f64 / *x.denom() as f64).exp2()),
        ]);
        rows_json.push(json!({
            "step": j,
            "log2_delta_num": x.numer().to_string(),
            "log2_delta_den": x.denom().to_string(),
        }));
    }
    let mut checks = Vec::new();
    let consecutive = schedule.check_consecutive();
    checks.push(CheckLine {
        name: "consecutive_contraction_exact".into(),
        passed: consecutive,
        detail: format!(
            "{} scales from 2^({}) down to 2^(-{}/{}), every pair checked in exact arithmetic",
            schedule.len(),
            log2_d0,
            p.k,
            p.n
        ),
    });
    let terminal = Ratio::new(-(p.k as i128), p.n as i128);
    let terminal_ok = schedule.log2_deltas().last() == Some(&terminal);
    checks.push(CheckLine {
        name: "terminal_scale_exact".into(),
        passed: terminal_ok,
        detail: format!("last scale equals 2^(-{}/{}): {terminal_ok}", p.k, p.n),
    });

    if p.sweep {
        let mut count = 0usize;
        let mut failures = 0usize;
        for d in 2..=4usize {
            for n in 2..=3usize {
                for k in [40u32, 160, 400] {
                    for b_log2 in [0i64, 1] {
                        let hi = Ratio::from_integer(-((n as i128) * (3 * d as i128 + b_log2 as i128)));
                        let lo = Ratio::new(-(k as i128), n as i128);
                        if lo > hi {
                            continue;
                        }
                        let mid = (lo + hi) / 2;
                        let sched = delta_schedule(mid, b_log2, n, k, d)?;
                        count += 1;
                        if !sched.check_consecutive()
                            || sched.log2_deltas().last() != Some(&lo)
                        {
                            failures += 1;
                        }
                    }
                }
            }
        }
        checks.push(CheckLine {
            name: "cascade_sweep_exact".into(),
            passed: failures == 0 && count > 0,
            detail: format!("{count} admissible cascades built, {failures} failed the exact check"),
        });
    }

    // Pointwise partition residual of the gauge split at the first cascade
    // step.
    let delta0 = (p.log2_delta0.0 as f64 / p.log2_delta0.1 as f64).exp2();
    let delta1 = (p.log2_delta1.0 as f64 / p.log2_delta1.1 as f64).exp2();
    let b = (p.b_log2 as f64).exp2();
    let curve = moment_curve(p.d)?;
    let k_split = i32::try_from(p.k)
        .map_err(|_| Error::InvalidArgument(format!("schedule: k = {} too large", p.k)))?;
    let piece = windowed_center_piece(&curve, k_split, p.n, delta0, b)?;
    let gain = localization_gain(p.d, b, delta0, p.n);
    let samples = sample_localized_support(
        &piece,
        &curve,
        p.n,
        gain,
        (-delta0, delta0),
        p.split_samples,
        seed.unwrap_or(p.split_seed),
    )?;
    let pieces = split_by_gauge(
        &piece, &curve, k_split, p.n, 0, delta0, delta1, b, &samples,
    )?;
    let mut worst = 0.0f64;
    for s in &samples {
        let want = piece.eval(s.s, s.t, s.tau, &s.xi);
        if want == 0.0 {
            continue;
        }
        let total: f64 = pieces
            .iter()
            .map(|gp| gp.symbol.eval(s.s, s.t, s.tau, &s.xi))
            .sum();
        worst = worst.max((total - want).abs() / want.abs());
    }
    checks.push(CheckLine {
        name: "split_partition_residual".into(),
        passed: worst <= p.residual_tol && !samples.is_empty(),
        detail: format!(
            "worst relative residual {:.3e} over {} probes, {} shell pieces (tol {:.1e})",
            worst,
            samples.len(),
            pieces.len(),
            p.residual_tol
        ),
    });

    let plot = schedule
        .log2_deltas()
        .iter()
        .enumerate()
        .map(|(j, x)| (j as f64, *x.numer() as f64 / *x.denom() as f64))
        .collect();
    Ok(ExperimentOutput {
        series_header: vec!["step", "log2_delta_num", "log2_delta_den", "delta"],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: None,
        prediction: None,
        checks,
        plot,
    })
}

// --- cover check --------------------------------------------------------------

fn run_cover_check(p: &CoverCheckParams, seed: Option<u64>) -> Result<ExperimentOutput> {
    let curve = moment_curve(p.d)?;
    let delta0 = (p.log2_delta0.0 as f64 / p.log2_delta0.1 as f64).exp2();
    let delta1 = (p.log2_delta1.0 as f64 / p.log2_delta1.1 as f64).exp2();
    let piece = windowed_center_piece(&curve, p.k, p.n, delta0, p.b)?;
    let gain = localization_gain(p.d, p.b, delta0, p.n);

    // Condition the probes on an order-n pairing comparable to the
    // frequency radius, so the top model coordinate stays away from zero.
    let gn = curve.eval_deriv(0.0, p.n);
    let mut samples: Vec<SupportSample> = Vec::with_capacity(p.samples);
    let mut batch_seed = seed.unwrap_or(p.seed);
    let last_seed = batch_seed + 400;
    while samples.len() < p.samples {
        let batch = sample_localized_support(
            &piece,
            &curve,
            p.n,
            gain,
            (-delta0, delta0),
            p.batch,
            batch_seed,
        )?;
        samples.extend(batch.into_iter().filter(|s| {
            let pair: f64 = gn.iter().zip(&s.xi).map(|(a, b)| a * b).sum();
            let r = s.xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            pair.abs() >= p.min_top_frac * r
        }));
        batch_seed += 1;
        if batch_seed >= last_seed {
            return Err(Error::InvalidArgument(format!(
                "cover_check: conditioned sampling stalled at {} of {} probes",
                samples.len(),
                p.samples
            )));
        }
    }
    samples.truncate(p.samples);

    let pieces = split_by_gauge(
        &piece, &curve, p.k, p.n, 0, delta0, delta1, p.b, &samples,
    )?;
    let map = block_coordinates(&curve, 0, delta0, p.k, p.n)?;

    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    let mut assigned = 0usize;
    let mut worst_ratio = vec![0.0f64; p.n];
    let mut top_lo = f64::INFINITY;
    let mut top_hi = f64::NEG_INFINITY;
    for gp in &pieces {
        let rep = block_assignment_check(&map, gp, &samples)?;
        if rep.n_samples == 0 {
            continue;
        }
        assigned += rep.n_samples;
        for (w, r) in worst_ratio.iter_mut().zip(&rep.max_ratio) {
            *w = w.max(*r);
        }
        top_lo = top_lo.min(rep.top_range.0);
        top_hi = top_hi.max(rep.top_range.1);
        rows.push(vec![
            rep.n_shell.to_string(),
            rep.nu.to_string(),
            rep.n_samples.to_string(),
            fmt(rep.max_ratio[0]),
            fmt(*rep.max_ratio.last().expect("order >= 2")),
            fmt(rep.top_range.0),
            fmt(rep.top_range.1),
        ]);
        rows_json.push(json!({
            "shell": rep.n_shell, "nu": rep.nu, "n_samples": rep.n_samples,
            "max_ratio": rep.max_ratio, "top_lo": rep.top_range.0, "top_hi": rep.top_range.1,
        }));
    }

    let mut checks = Vec::new();
    checks.push(CheckLine {
        name: "all_probes_assigned".into(),
        passed: assigned >= p.samples,
        detail: format!(
            "{assigned} piece assignments over {} probes, {} shell pieces",
            p.samples,
            pieces.len()
        ),
    });
    let ratios_ok = worst_ratio.iter().all(|&r| r <= p.ratio_max);
    checks.push(CheckLine {
        name: "pairing_ratios_bounded".into(),
        passed: ratios_ok,
        detail: format!(
            "worst centered-pairing ratios {:?} (bound {})",
            worst_ratio, p.ratio_max
        ),
    });
    checks.push(CheckLine {
        name: "top_coordinate_in_band".into(),
        passed: top_lo >= p.top_lo && top_hi <= p.top_hi,
        detail: format!(
            "top model coordinate in [{:.4}, {:.4}] (band [{}, {}])",
            top_lo, top_hi, p.top_lo, p.top_hi
        ),
    });

    let blocks = reverse_cover(p.admissible_delta, p.n)?;
    let pts = sample_admissible_points(
        p.admissible_delta,
        p.n,
        p.admissible_samples,
        seed.unwrap_or(p.admissible_seed),
    )?;
    let missed = pts
        .iter()
        .filter(|ap| covering_block(&blocks, &ap.point).is_none())
        .count();
    checks.push(CheckLine {
        name: "reverse_cover_complete".into(),
        passed: missed == 0,
        detail: format!(
            "{missed} of {} admissible points escaped the {}-block cover at scale {}",
            pts.len(),
            blocks.len(),
            p.admissible_delta
        ),
    });

    let plot = rows_json
        .iter()
        .map(|r| {
            (
                r["shell"].as_u64().unwrap_or(0) as f64,
                r["n_samples"].as_u64().unwrap_or(0) as f64,
            )
        })
        .collect();
    Ok(ExperimentOutput {
        series_header: vec![
            "shell",
            "nu",
            "n_samples",
            "max_ratio_1",
            "max_ratio_n",
            "top_lo",
            "top_hi",
        ],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: None,
        prediction: None,
        checks,
        plot,
    })
}

// --- recursion / critical parameter -------------------------------------------

fn run_recursion_check(p: &RecursionCheckParams, seed: Option<u64>) -> Result<ExperimentOutput> {
    if p.n_values.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "recursion_check: orders must be >= 2".into(),
        ));
    }
    let base_seed = seed.unwrap_or(p.seed);
    let sigma_seed = seed.unwrap_or(p.sigma_seed);
    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    let mut checks = Vec::new();
    let mut plot = Vec::new();
    for &n in &p.n_values {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(n as u64);
        let mut worst_rt = 0.0f64;
        let mut worst_g = 0.0f64;
        for _ in 0..p.samples {
            let mut y: Vec<f64> = (0..=n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mag = rng.gen_range(0.25..4.0);
            y[n] = if rng.gen_bool(0.5) { mag } else { -mag };
            let scale = rng.gen_range(-10.0f64..20.0).exp2();
            for v in &mut y {
                *v *= scale;
            }
            let (g, omega) = reduce_pairings(&y)?;
            let g_sup = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if g_sup > 0.0 {
                worst_g = worst_g.max(g[n - 1].abs() / g_sup);
            }
            let back = expand_pairings(&g, omega)?;
            let y_sup = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = y
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            worst_rt = worst_rt.max(err / y_sup);
        }
        checks.push(CheckLine {
            name: format!("roundtrip_rel_n{n}"),
            passed: worst_rt <= p.rel_tol,
            detail: format!(
                "worst relative round-trip error {:.3e} over {} inputs (tol {:.1e})",
                worst_rt, p.samples, p.rel_tol
            ),
        });
        checks.push(CheckLine {
            name: format!("next_to_top_vanishes_n{n}"),
            passed: worst_g <= p.rel_tol,
            detail: format!(
                "worst relative next-to-top coefficient {:.3e} (tol {:.1e})",
                worst_g, p.rel_tol
            ),
        });

        // Critical parameter: on the order-n moment curve the defining
        // pairing is linear, so the solver must match the exact root.
        let curve = moment_curve(n)?;
        let mut rng2 = ChaCha8Rng::seed_from_u64(sigma_seed);
        rng2.set_stream(n as u64);
        let mut worst_res = 0.0f64;
        let mut worst_cf = 0.0f64;
        for _ in 0..p.sigma_samples {
            let target = rng2.gen_range(-0.9..0.9);
            let mag = rng2.gen_range(0.5..2.0);
            let top = if rng2.gen_bool(0.5) { mag } else { -mag };
            let mut xi = vec![0.0f64; n];
            for v in xi.iter_mut().take(n.saturating_sub(2)) {
                *v = rng2.gen_range(-1.0..1.0);
            }
            xi[n - 1] = top;
            xi[n - 2] = -target * top;
            let scale = rng2.gen_range(0.0f64..20.0).exp2();
            for v in &mut xi {
                *v *= scale;
            }
            let sigma = solve_critical_s(&curve, n, &xi)?;
            let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            let res = (xi[n - 2] + xi[n - 1] * sigma).abs();
            worst_res = worst_res.max(res / r);
            worst_cf = worst_cf.max((sigma - (-xi[n - 2] / xi[n - 1])).abs());
        }
        checks.push(CheckLine {
            name: format!("critical_residual_n{n}"),
            passed: worst_res <= p.sigma_residual_tol,
            detail: format!(
                "worst residual {:.3e} of the frequency radius over {} draws (tol {:.1e})",
                worst_res, p.sigma_samples, p.sigma_residual_tol
            ),
        });
        checks.push(CheckLine {
            name: format!("critical_closed_form_n{n}"),
            passed: worst_cf <= p.sigma_closed_form_tol,
            detail: format!(
                "worst deviation {:.3e} from the exact linear root (tol {:.1e})",
                worst_cf, p.sigma_closed_form_tol
            ),
        });
        rows.push(vec![
            n.to_string(),
            fmt(worst_rt),
            fmt(worst_g),
            fmt(worst_res),
            fmt(worst_cf),
        ]);
        rows_json.push(json!({
            "n": n, "worst_roundtrip": worst_rt, "worst_next_to_top": worst_g,
            "worst_residual": worst_res, "worst_closed_form": worst_cf,
        }));
        plot.push((n as f64, worst_rt));
    }
    Ok(ExperimentOutput {
        series_header: vec![
            "n",
            "worst_roundtrip",
            "worst_next_to_top",
            "worst_residual",
            "worst_closed_form",
        ],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: None,
        prediction: None,
        checks,
        plot,
    })
}

// --- kernel uniformity ----------------------------------------------------------

/// Lattice modes whose scaled radius sits well inside the dyadic shell,
/// spread evenly in angle.
fn ring_probe_modes(n_x: usize, k: i32, count: usize) -> Result<Vec<[i64; 2]>> {
    let h = (n_x / 2) as i64 - 1;
    let scale = (-(k as f64)).exp2();
    let two_pi = std::f64::consts::TAU;
    let mut cands: Vec<[i64; 2]> = Vec::new();
    for m0 in -h..=h {
        for m1 in -h..=h {
            if m0 == 0 && m1 == 0 {
                continue;
            }
            let r = two_pi * ((m0 * m0 + m1 * m1) as f64).sqrt();
            let u = scale * r;
            if (0.67..=1.5).contains(&u) {
                cands.push([m0, m1]);
            }
        }
    }
    if cands.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "ring_probe_modes: no lattice modes in shell {k} on a {n_x}-point axis"
        )));
    }
    cands.sort_by(|a, b| {
        let aa = (a[1] as f64).atan2(a[0] as f64);
        let bb = (b[1] as f64).atan2(b[0] as f64);
        aa.partial_cmp(&bb).expect("angles are finite").then(a.cmp(b))
    });
    if cands.len() <= count {
        return Ok(cands);
    }
    Ok((0..count)
        .map(|i| cands[i * cands.len() / count])
        .collect())
}

fn run_kernel_check(p: &KernelCheckParams) -> Result<ExperimentOutput> {
    if p.ks.is_empty() || p.s_samples.is_empty() || p.t_samples.is_empty() {
        return Err(Error::InvalidArgument(
            "kernel_check: need octaves and sample points".into(),
        ));
    }
    let curve = moment_curve(2)?;
    let cut = CutoffPair::standard();
    let two_pi = std::f64::consts::TAU;
    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    let mut l1_min = f64::INFINITY;
    let mut l1_max = f64::NEG_INFINITY;
    let mut sup_min = f64::INFINITY;
    let mut sup_max = f64::NEG_INFINITY;
    let mut plot = Vec::new();
    for &k in &p.ks {
        let sym = tau_window(psi_chi_ring(&cut, k), &curve, k, p.n, p.delta0)?;
        let mut l1_mean = 0.0;
        for &s in &p.s_samples {
            for &t in &p.t_samples {
                let kern = kernel_eval(&sym, &curve, s, t, p.n_x_kernel, p.n_t)?;
                let l1 = kernel_l1_norm(&kern);
                l1_min = l1_min.min(l1);
                l1_max = l1_max.max(l1);
                l1_mean += l1;
                rows.push(vec![
                    "kernel_l1".into(),
                    k.to_string(),
                    fmt(s),
                    fmt(t),
                    fmt(l1),
                ]);
                rows_json.push(json!({
                    "kind": "kernel_l1", "k": k, "s": s, "t": t, "value": l1,
                }));
            }
        }
        l1_mean /= (p.s_samples.len() * p.t_samples.len()) as f64;
        plot.push((k as f64, l1_mean));

        let modes = ring_probe_modes(p.n_x_op, k, p.modes_per_ring)?;
        let grid = GridSpec::new(
            2,
            p.n_x_op,
            AuxKind::Param {
                lo: PARAM_INTERVAL.0,
                hi: PARAM_INTERVAL.1,
            },
            p.n_s,
        )?;
        let f = SampledField::from_fn(grid, |x, s| {
            let prof = (0.5 * std::f64::consts::PI * s).cos();
            let mut acc = Complex64::new(0.0, 0.0);
            for m in &modes {
                let phase = two_pi * (m[0] as f64 * x[0] + m[1] as f64 * x[1]);
                acc += Complex64::from_polar(prof, phase);
            }
            acc
        });
        let out = apply_symbol_tau(&f, &sym, &curve, p.n_t)?;
        let sup_in = f.lp_norm(f64::INFINITY)?;
        let sup_out = out.lp_norm(f64::INFINITY)?;
        let ratio = sup_out / (p.delta0 * sup_in);
        sup_min = sup_min.min(ratio);
        sup_max = sup_max.max(ratio);
        rows.push(vec![
            "sup_ratio".into(),
            k.to_string(),
            String::new(),
            String::new(),
            fmt(ratio),
        ]);
        rows_json.push(json!({
            "kind": "sup_ratio", "k": k, "value": ratio, "modes": modes.len(),
        }));
    }
    let l1_ratio = l1_max / l1_min;
    let sup_ratio = sup_max / sup_min;
    let checks = vec![
        CheckLine {
            name: "kernel_mass_uniform".into(),
            passed: l1_min > 0.0 && l1_ratio <= p.ratio_max,
            detail: format!(
                "sampled kernel mass in [{:.4}, {:.4}], max/min {:.3} (bound {})",
                l1_min, l1_max, l1_ratio, p.ratio_max
            ),
        },
        CheckLine {
            name: "sup_ratio_uniform".into(),
            passed: sup_min > 0.0 && sup_ratio <= p.ratio_max,
            detail: format!(
                "scaled sup-norm ratio in [{:.4}, {:.4}], max/min {:.3} (bound {})",
                sup_min, sup_max, sup_ratio, p.ratio_max
            ),
        },
    ];
    Ok(ExperimentOutput {
        series_header: vec!["kind", "k", "s", "t", "value"],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: None,
        prediction: None,
        checks,
        plot,
    })
}

// --- scaled-class verification -----------------------------------------------

fn run_class_check(p: &ClassCheckParams, seed: Option<u64>) -> Result<ExperimentOutput> {
    let curve = moment_curve(2)?;
    let piece = windowed_center_piece(&curve, p.k, p.n, p.delta0, p.b)?;
    let gain = localization_gain(2, p.b, p.delta0, p.n);
    let samples = sample_localized_support(
        &piece,
        &curve,
        p.n,
        gain,
        (-p.delta0, p.delta0),
        p.samples,
        seed.unwrap_or(p.seed),
    )?;
    let report = symbol_class_verify(&piece, &curve, p.delta0, 0.0, p.n, p.bound_b, &samples)?;
    let checks = vec![
        CheckLine {
            name: "enough_support_hits".into(),
            passed: samples.len() >= p.min_hits,
            detail: format!(
                "{} of {} requested probes landed on the support (need {})",
                samples.len(),
                p.samples,
                p.min_hits
            ),
        },
        CheckLine {
            name: "support_claim".into(),
            passed: report.support_ok,
            detail: format!(
                "{} probes inside the window, time interval, and frequency slab",
                report.n_checked
            ),
        },
        CheckLine {
            name: "derivative_claim".into(),
            passed: report.derivative_ok,
            detail: format!(
                "worst scaled-derivative ratio {:.4} against bound {}",
                report.worst_ratio, p.bound_b
            ),
        },
    ];
    let rows = vec![vec![
        samples.len().to_string(),
        report.n_checked.to_string(),
        fmt(report.worst_ratio),
        report.support_ok.to_string(),
        report.derivative_ok.to_string(),
    ]];
    let rows_json = vec![json!({
        "hits": samples.len(), "n_checked": report.n_checked,
        "worst_ratio": report.worst_ratio, "support_ok": report.support_ok,
        "derivative_ok": report.derivative_ok,
    })];
    Ok(ExperimentOutput {
        series_header: vec![
            "hits",
            "n_checked",
            "worst_ratio",
            "support_ok",
            "derivative_ok",
        ],
        series_rows: rows,
        series_json: serde_json::Value::Array(rows_json),
        fit: None,
        prediction: None,
        checks,
        plot: vec![(samples.len() as f64, report.worst_ratio)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{RecursionCheckParams, ScheduleParams};

    fn quiet_opts(dir: &Path) -> RunOptions {
        RunOptions {
            out_root: dir.to_path_buf(),
            quiet: true,
            seed: None,
            threads: None,
            write_outputs: true,
        }
    }

    #[test]
    fn recursion_check_passes_and_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new(Experiment::RecursionCheck(RecursionCheckParams {
            n_values: vec![2, 3],
            samples: 2000,
            sigma_samples: 100,
            ..RecursionCheckParams::default()
        }));
        let art = run_experiment(&cfg, &quiet_opts(tmp.path())).unwrap();
        assert!(art.report.verdict, "{:#?}", art.report.checks);
        let dir = art.out_dir.unwrap();
        for name in ["report.json", "series.csv", "plot.dat"] {
            assert!(dir.join(name).is_file(), "missing {name}");
        }
        let csv = std::fs::read_to_string(dir.join("series.csv")).unwrap();
        assert!(csv.starts_with("n,worst_roundtrip"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn schedule_smoke_run_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new(Experiment::Schedule(ScheduleParams {
            sweep: false,
            split_samples: 300,
            ..ScheduleParams::default()
        }));
        let a = run_experiment(&cfg, &quiet_opts(tmp.path())).unwrap();
        let b = run_experiment(&cfg, &quiet_opts(tmp.path())).unwrap();
        assert!(a.report.verdict, "{:#?}", a.report.checks);
        let csv_a = std::fs::read_to_string(a.out_dir.unwrap().join("series.csv")).unwrap();
        let csv_b = std::fs::read_to_string(b.out_dir.unwrap().join("series.csv")).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn global_seed_reaches_the_sampler() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(Experiment::Schedule(ScheduleParams {
            sweep: false,
            split_samples: 150,
            ..ScheduleParams::default()
        }));
        cfg.seed = Some(4242);
        let opts = RunOptions {
            write_outputs: false,
            quiet: true,
            ..quiet_opts(tmp.path())
        };
        let art = run_experiment(&cfg, &opts).unwrap();
        assert_eq!(art.report.environment.seed, Some(4242));
        assert!(art.out_dir.is_none());
    }

    #[test]
    fn ring_probe_modes_stay_in_shell_and_spread() {
        let modes = ring_probe_modes(128, 8, 8).unwrap();
        assert_eq!(modes.len(), 8);
        let scale = (-8.0f64).exp2();
        for m in &modes {
            let r = std::f64::consts::TAU * ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            let u = scale * r;
            assert!((0.67..=1.5).contains(&u), "mode {m:?} left the shell: {u}");
        }
        // All four half-plane signs appear among the angles.
        assert!(modes.iter().any(|m| m[0] > 0));
        assert!(modes.iter().any(|m| m[0] < 0));
        assert!(modes.iter().any(|m| m[1] > 0));
        assert!(modes.iter().any(|m| m[1] < 0));
    }
}
