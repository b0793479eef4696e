//! Experiment execution: sweep expansion into a run grid, concurrent
//! execution with one RNG stream per grid point, trace persistence, and the
//! summary report.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use saddle_mirror::dynamics::{apt_distance, DynamicsConfig, Scheme};
use saddle_mirror::solvers::{run_sspmd, run_szspmd, RunConfig, StepSchedule, Trace};
use saddle_mirror::zeroth_order::SmoothingSchedule;

use crate::config::{ResolvedSpec, SweepSpec};
use crate::trace_io::{read_trace_csv, write_trace_csv};
use crate::CliError;

/// Weyl increment from splitmix64. Grid point k without an explicit seed
/// sweep runs on stream `base + k·Δ`; Δ is odd, so the map is injective.
const STREAM_DELTA: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn stream_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add((k as u64).wrapping_mul(STREAM_DELTA))
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct RunVariant {
    pub index: usize,
    /// Human-readable override list, e.g. `a=0.5,seed=3`; `base` when empty.
    pub label: String,
    pub config: RunConfig,
}

/// Expands the sweep block into the cartesian grid, outermost key first
/// (schedule.a, schedule.p, smoothing.mu, seed). Explicitly swept seeds are
/// used verbatim, so runs that differ only in another key share a stream and
/// are directly comparable; without a seed sweep each grid point gets its own
/// derived stream.
pub fn expand_grid(resolved: &ResolvedSpec) -> Vec<RunVariant> {
    let empty = SweepSpec { schedule_a: None, schedule_p: None, smoothing_mu: None, seed: None };
    let sweep = resolved.spec.sweep.as_ref().unwrap_or(&empty);
    let axis_f = |v: &Option<Vec<f64>>| -> Vec<Option<f64>> {
        match v {
            Some(list) => list.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    };
    let a_axis = axis_f(&sweep.schedule_a);
    let p_axis = axis_f(&sweep.schedule_p);
    let mu_axis = axis_f(&sweep.smoothing_mu);
    let seed_axis: Vec<Option<u64>> = match &sweep.seed {
        Some(list) => list.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut variants =
        Vec::with_capacity(a_axis.len() * p_axis.len() * mu_axis.len() * seed_axis.len());
    for &a in &a_axis {
        for &p in &p_axis {
            for &mu in &mu_axis {
                for &seed in &seed_axis {
                    let index = variants.len();
                    let mut config = resolved.base.clone();
                    let mut parts = Vec::new();
                    if a.is_some() || p.is_some() {
                        let (base_a, base_p) = match config.schedule {
                            StepSchedule::Polynomial { a, p } => (a, p),
                            // Sweeping a/p over a constant schedule is
                            // rejected during validation.
                            StepSchedule::Constant { .. } => unreachable!("validated spec"),
                        };
                        config.schedule =
                            StepSchedule::polynomial(a.unwrap_or(base_a), p.unwrap_or(base_p))
                                .expect("sweep values validated");
                    }
                    if let Some(a) = a {
                        parts.push(format!("a={a}"));
                    }
                    if let Some(p) = p {
                        parts.push(format!("p={p}"));
                    }
                    if let Some(mu) = mu {
                        config.smoothing = Some(match config.smoothing {
                            Some(SmoothingSchedule::Constant { .. }) => {
                                SmoothingSchedule::constant(mu).expect("sweep values validated")
                            }
                            Some(SmoothingSchedule::Geometric { decay, .. }) => {
                                SmoothingSchedule::geometric(mu, decay)
                                    .expect("sweep values validated")
                            }
                            None => unreachable!("validated spec"),
                        });
                        parts.push(format!("mu={mu}"));
                    }
                    config.seed = match seed {
                        Some(s) => {
                            parts.push(format!("seed={s}"));
                            s
                        }
                        None => stream_seed(resolved.base.seed, index),
                    };
                    let label = if parts.is_empty() { "base".to_string() } else { parts.join(",") };
                    variants.push(RunVariant { index, label, config });
                }
            }
        }
    }
    variants
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One entry of the verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub index: usize,
    pub label: String,
    pub seed: u64,
    /// Trace filename relative to the output directory; absent if the run failed.
    pub trace_file: Option<String>,
    pub config_digest: Option<String>,
    pub rows: Option<usize>,
    pub final_gap: Option<f64>,
    pub final_v_star: Option<f64>,
    pub final_dist_euclid: Option<f64>,
    /// Pseudotrajectory distance over the last unit of algorithmic time,
    /// against tangent-scheme dynamics at h = 1e-3 (only with the apt flag).
    pub apt: Option<f64>,
    pub error: Option<String>,
}

/// Medians and interquartile ranges of the final diagnostics across the
/// successful runs (linear-interpolation quantiles).
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub completed_runs: usize,
    pub failed_runs: usize,
    pub median_final_gap: Option<f64>,
    pub iqr_final_gap: Option<f64>,
    pub median_final_v_star: Option<f64>,
    pub iqr_final_v_star: Option<f64>,
    pub median_final_dist_euclid: Option<f64>,
    pub iqr_final_dist_euclid: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub name: String,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
    pub checks: Vec<CheckResult>,
}

impl SummaryReport {
    pub fn failed_checks(&self) -> usize {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count()
    }
}

/// Command-line overrides applied on top of the spec.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Replaces the base seed and drops any seed sweep.
    pub seed: Option<u64>,
    pub quiet: bool,
}

pub fn apply_overrides(mut resolved: ResolvedSpec, opts: &RunOptions) -> ResolvedSpec {
    if let Some(seed) = opts.seed {
        resolved.base.seed = seed;
        resolved.spec.run.seed = seed;
        if let Some(sweep) = &mut resolved.spec.sweep {
            sweep.seed = None;
            if sweep.is_empty() {
                resolved.spec.sweep = None;
            }
        }
    }
    if let Some(dir) = &opts.out_dir {
        resolved.spec.outputs = dir.clone();
    }
    resolved
}

/// Linear-interpolation quantile of an unsorted, finite sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level must lie in [0, 1]");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

fn aggregate_option(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        (None, None)
    } else {
        (Some(median(&present)), Some(iqr(&present)))
    }
}

/// Executes every grid point, writes one CSV per completed run plus
/// `{name}_summary.json`, and returns the report. Solver failures are
/// recorded per run and do not abort the grid.
pub fn run_experiment(
    resolved: &ResolvedSpec,
    opts: &RunOptions,
) -> Result<SummaryReport, CliError> {
    let resolved = apply_overrides(resolved.clone(), opts);
    let out_dir = resolved.spec.outputs.clone();
    fs::create_dir_all(&out_dir)?;

    let variants = expand_grid(&resolved);
    let zeroth_order = resolved.zeroth_order;
    let outcomes: Vec<Result<Trace, saddle_mirror::Error>> = variants
        .par_iter()
        .map(|v| if zeroth_order { run_szspmd(&v.config) } else { run_sspmd(&v.config) })
        .collect();

    let report = summarize(&resolved, &variants, outcomes, &out_dir, opts.quiet)?;
    let summary_path = out_dir.join(format!("{}_summary.json", resolved.spec.name));
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    fs::write(&summary_path, json)?;
    if !opts.quiet {
        println!("wrote {}", summary_path.display());
    }
    Ok(report)
}

fn summarize(
    resolved: &ResolvedSpec,
    variants: &[RunVariant],
    outcomes: Vec<Result<Trace, saddle_mirror::Error>>,
    out_dir: &Path,
    quiet: bool,
) -> Result<SummaryReport, CliError> {
    let diag = resolved.spec.diagnostics;
    let mut runs = Vec::with_capacity(variants.len());
    for (variant, outcome) in variants.iter().zip(outcomes) {
        let run = match outcome {
            Err(e) => {
                if !quiet {
                    eprintln!("run {:04} ({}) failed: {e}", variant.index, variant.label);
                }
                RunResult {
                    index: variant.index,
                    label: variant.label.clone(),
                    seed: variant.config.seed,
                    trace_file: None,
                    config_digest: None,
                    rows: None,
                    final_gap: None,
                    final_v_star: None,
                    final_dist_euclid: None,
                    apt: None,
                    error: Some(e.to_string()),
                }
            }
            Ok(mut trace) => {
                if !diag.gap || !diag.v_star || !diag.dist {
                    for r in &mut trace.records {
                        if !diag.gap {
                            r.gap = None;
                        }
                        if !diag.v_star {
                            r.v_star = None;
                        }
                        if !diag.dist {
                            r.dist_euclid = None;
                        }
                    }
                }
                let file_name = format!("{}_run{:04}.csv", resolved.spec.name, variant.index);
                let path = out_dir.join(&file_name);
                write_trace_csv(&path, &trace)?;
                let rows = read_trace_csv(&path)?.len();
                if rows != trace.records.len() {
                    return Err(CliError::Runtime(format!(
                        "{}: wrote {} records but read {rows} back",
                        path.display(),
                        trace.records.len()
                    )));
                }
                let apt = if diag.apt { apt_over_final_window(resolved, &trace) } else { None };
                let last = trace.records.last().expect("runs record at least n = 0");
                if !quiet {
                    println!(
                        "run {:04} ({}) seed={} rows={rows} -> {file_name}",
                        variant.index, variant.label, variant.config.seed
                    );
                }
                RunResult {
                    index: variant.index,
                    label: variant.label.clone(),
                    seed: variant.config.seed,
                    trace_file: Some(file_name),
                    config_digest: Some(trace.config_digest.clone()),
                    rows: Some(rows),
                    final_gap: last.gap,
                    final_v_star: last.v_star,
                    final_dist_euclid: last.dist_euclid,
                    apt,
                    error: None,
                }
            }
        };
        runs.push(run);
    }

    let completed = runs.iter().filter(|r| r.error.is_none()).count();
    let (median_final_gap, iqr_final_gap) =
        aggregate_option(&runs.iter().map(|r| r.final_gap).collect::<Vec<_>>());
    let (median_final_v_star, iqr_final_v_star) =
        aggregate_option(&runs.iter().map(|r| r.final_v_star).collect::<Vec<_>>());
    let (median_final_dist_euclid, iqr_final_dist_euclid) =
        aggregate_option(&runs.iter().map(|r| r.final_dist_euclid).collect::<Vec<_>>());
    let aggregate = Aggregate {
        completed_runs: completed,
        failed_runs: runs.len() - completed,
        median_final_gap,
        iqr_final_gap,
        median_final_v_star,
        iqr_final_v_star,
        median_final_dist_euclid,
        iqr_final_dist_euclid,
    };
    Ok(SummaryReport { name: resolved.spec.name.clone(), runs, aggregate, checks: Vec::new() })
}

/// Pseudotrajectory distance over the trailing time unit of the trace,
/// measured against the tangent-scheme flow at h = 1e-3. `None` when the
/// trace spans less than the window.
fn apt_over_final_window(resolved: &ResolvedSpec, trace: &Trace) -> Option<f64> {
    let first = trace.records.first()?;
    let last = trace.records.last()?;
    let window = 1.0_f64.min((last.t - first.t) / 2.0);
    if !(window > 0.0) {
        return None;
    }
    let dyncfg = DynamicsConfig {
        problem: resolved.base.problem.clone(),
        x_map: resolved.base.x_map.clone(),
        y_map: resolved.base.y_map.clone(),
        scheme: Scheme::TangentEuler,
        step: 1e-3,
        horizon: window,
    };
    apt_distance(trace, &dyncfg, last.t - window, window).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;

    fn pennies_spec(extra: &str) -> ResolvedSpec {
        let text = format!(
            r#"{{
                "name": "pennies",
                "run": {{ "problem": {{ "kind": "matching_pennies" }}, "max_iters": 50, "record_every": 10 }}{extra}
            }}"#
        );
        parse_spec(&text).unwrap()
    }

    #[test]
    fn seed_sweep_expands_verbatim() {
        let resolved = pennies_spec(r#", "sweep": { "seed": [4, 9, 2] }"#);
        let grid = expand_grid(&resolved);
        assert_eq!(grid.len(), 3);
        assert_eq!(
            grid.iter().map(|v| v.config.seed).collect::<Vec<_>>(),
            vec![4, 9, 2],
            "explicit seeds are stream selectors and must be used verbatim"
        );
        assert_eq!(grid[1].label, "seed=9");
    }

    #[test]
    fn cartesian_order_is_a_then_p_then_seed() {
        let resolved = pennies_spec(r#", "sweep": { "schedule_a": [1.0, 2.0], "seed": [0, 1] }"#);
        let labels: Vec<String> = expand_grid(&resolved).into_iter().map(|v| v.label).collect();
        assert_eq!(labels, ["a=1,seed=0", "a=1,seed=1", "a=2,seed=0", "a=2,seed=1"]);
    }

    #[test]
    fn unswept_seeds_get_distinct_streams() {
        let resolved = pennies_spec(r#", "sweep": { "schedule_a": [1.0, 0.5, 0.25] }"#);
        let grid = expand_grid(&resolved);
        let seeds: Vec<u64> = grid.iter().map(|v| v.config.seed).collect();
        assert_eq!(seeds[0], 0, "grid point 0 keeps the base seed");
        assert_eq!(seeds.len(), 3);
        assert!(seeds[0] != seeds[1] && seeds[1] != seeds[2] && seeds[0] != seeds[2]);
    }

    #[test]
    fn no_sweep_is_a_single_base_run() {
        let grid = expand_grid(&pennies_spec(""));
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].label, "base");
        assert_eq!(grid[0].config.seed, 0);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let values = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&values), 2.5);
        assert_eq!(quantile(&values, 0.25), 1.75);
        assert_eq!(quantile(&values, 0.75), 3.25);
        assert_eq!(iqr(&values), 1.5);
        assert_eq!(median(&[7.0]), 7.0);
        assert_eq!(iqr(&[7.0]), 0.0);
    }

    #[test]
    fn run_experiment_writes_csv_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let resolved = pennies_spec("");
        let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), seed: None, quiet: true };
        let report = run_experiment(&resolved, &opts).unwrap();
        assert_eq!(report.runs.len(), 1);
        let run = &report.runs[0];
        assert_eq!(run.trace_file.as_deref(), Some("pennies_run0000.csv"));
        assert_eq!(run.rows, Some(6), "n = 0 plus records at 10, 20, 30, 40, 50");
        assert!(run.error.is_none());
        assert!(run.final_dist_euclid.is_some(), "pennies ships a reference saddle");
        assert!(dir.path().join("pennies_run0000.csv").exists());
        assert!(dir.path().join("pennies_summary.json").exists());
        assert_eq!(report.aggregate.completed_runs, 1);
        assert_eq!(report.aggregate.failed_runs, 0);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let resolved = pennies_spec(r#", "sweep": { "seed": [0, 1] }"#);
        for dir in [&dir_a, &dir_b] {
            let opts =
                RunOptions { out_dir: Some(dir.path().to_path_buf()), seed: None, quiet: true };
            run_experiment(&resolved, &opts).unwrap();
        }
        for file in ["pennies_run0000.csv", "pennies_run0001.csv", "pennies_summary.json"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} must not depend on where or when it was produced");
        }
    }

    #[test]
    fn seed_override_drops_seed_sweep() {
        let resolved = pennies_spec(r#", "sweep": { "seed": [0, 1, 2] }"#);
        let opts = RunOptions { out_dir: None, seed: Some(42), quiet: true };
        let overridden = apply_overrides(resolved, &opts);
        assert!(overridden.spec.sweep.is_none());
        assert_eq!(overridden.base.seed, 42);
        let grid = expand_grid(&overridden);
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].config.seed, 42);
    }

    #[test]
    fn failed_runs_are_flagged_without_aborting() {
        let dir = tempfile::tempdir().unwrap();
        let resolved = pennies_spec(r#", "sweep": { "seed": [0, 1] }"#);
        let variants = expand_grid(&resolved);
        let good = run_sspmd(&variants[1].config).unwrap();
        let outcomes =
            vec![Err(saddle_mirror::Error::Validation("injected failure".to_string())), Ok(good)];
        let report = summarize(&resolved, &variants, outcomes, dir.path(), true).unwrap();
        assert_eq!(report.aggregate.failed_runs, 1);
        assert_eq!(report.aggregate.completed_runs, 1);
        assert_eq!(report.runs[0].error.as_deref(), Some("validation error: injected failure"));
        assert!(report.runs[0].trace_file.is_none());
        assert!(report.runs[1].trace_file.is_some());
        assert!(
            report.aggregate.median_final_dist_euclid.is_some(),
            "aggregates cover the completed runs"
        );
    }

    #[test]
    fn diagnostics_flags_blank_columns() {
        let dir = tempfile::tempdir().unwrap();
        let resolved = pennies_spec(r#", "diagnostics": { "gap": false, "v_star": false }"#);
        let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), seed: None, quiet: true };
        let report = run_experiment(&resolved, &opts).unwrap();
        assert!(report.runs[0].final_gap.is_none());
        assert!(report.runs[0].final_v_star.is_none());
        assert!(report.runs[0].final_dist_euclid.is_some(), "dist stays on by default");
        let rows = read_trace_csv(&dir.path().join("pennies_run0000.csv")).unwrap();
        assert!(rows.iter().all(|r| r.gap.is_none() && r.v_star.is_none()));
    }
}
