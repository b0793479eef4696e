//! Self-checking property suite: geometry identities, oracle consistency,
//! solver viability and descent, and dynamics cross-validation, all run
//! against a spec (or a built-in default) with deterministic sampling.
//!
//! Checks that need data the spec cannot provide (reference saddles) report
//! `skipped`, not `fail`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saddle_mirror::dynamics::{apt_distance, integrate, DynamicsConfig, Scheme};
use saddle_mirror::geometry::{gateaux_check, ConstraintSet};
use saddle_mirror::problems::{NoiseKind, SaddleProblem, FEASIBILITY_TOL};
use saddle_mirror::solvers::{
    run_sspmd, run_szspmd, IterateRecord, RunConfig, StepSchedule, Trace,
};
use saddle_mirror::zeroth_order::bias_second_moment_probe;

use crate::config::{parse_spec, ResolvedSpec};
use crate::experiment::{Aggregate, CheckResult, CheckStatus, SummaryReport};
use crate::CliError;

/// Seed for every sampled point and direction in the suite; fixed so that a
/// verification verdict is reproducible.
pub const VERIFY_SEED: u64 = 0x5add_1e00_caf3_0002;

/// Iteration cap for the internal diagnostic run, so verification stays fast
/// even for specs that request long experiments.
const VERIFY_MAX_ITERS: u64 = 2_000;

/// The spec used by `verify` when none is given: a short deterministic run
/// on the built-in matching-pennies game, which ships a reference saddle so
/// every check is exercised.
pub fn default_verification_spec() -> ResolvedSpec {
    parse_spec(
        r#"{
            "name": "verification",
            "run": {
                "problem": { "kind": "matching_pennies" },
                "max_iters": 2000,
                "record_every": 10
            }
        }"#,
    )
    .expect("the built-in verification spec is valid")
}

/// Runs the full property suite against the spec and returns a report whose
/// `checks` block carries one pass/fail/skipped row per property.
pub fn verify(resolved: &ResolvedSpec) -> Result<SummaryReport, CliError> {
    let base = &resolved.base;
    let problem = &base.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);

    let mut checks = Vec::new();
    checks.push(run_check("geometry_gateaux", || gateaux(base, &mut rng)));
    checks.push(run_check("geometry_moreau", || moreau(base, &mut rng)));
    checks.push(run_check("problem_gradients", || gradient_probe(problem, &mut rng)));
    checks.push(run_check("estimator_bias", || bias_probe(problem, &mut rng)));

    // One capped diagnostic run feeds the solver- and trajectory-level checks.
    let mut capped = base.clone();
    capped.max_iters = capped.max_iters.min(VERIFY_MAX_ITERS);
    let trace = if resolved.zeroth_order { run_szspmd(&capped) } else { run_sspmd(&capped) };
    match &trace {
        Err(e) => {
            let detail = format!("diagnostic run failed: {e}");
            for name in ["solver_viability", "solver_lyapunov", "dist_consistency"] {
                checks.push(CheckResult {
                    name: name.to_string(),
                    status: CheckStatus::Fail,
                    detail: detail.clone(),
                });
            }
        }
        Ok(trace) => {
            checks.push(run_check("solver_viability", || viability(&capped, trace)));
            checks.push(run_check("solver_lyapunov", || lyapunov(resolved, &capped, trace)));
            checks.push(run_check("dist_consistency", || dist_consistency(&capped, trace)));
        }
    }
    checks.push(run_check("dynamics_equivalence", || equivalence(base, &mut rng)));
    match &trace {
        Err(e) => checks.push(CheckResult {
            name: "dynamics_apt".to_string(),
            status: CheckStatus::Fail,
            detail: format!("diagnostic run failed: {e}"),
        }),
        Ok(trace) => checks.push(run_check("dynamics_apt", || apt(base, trace))),
    }

    Ok(SummaryReport {
        name: resolved.spec.name.clone(),
        runs: Vec::new(),
        aggregate: Aggregate {
            completed_runs: 0,
            failed_runs: 0,
            median_final_gap: None,
            iqr_final_gap: None,
            median_final_v_star: None,
            iqr_final_v_star: None,
            median_final_dist_euclid: None,
            iqr_final_dist_euclid: None,
        },
        checks,
    })
}

fn run_check(
    name: &str,
    body: impl FnOnce() -> Result<(CheckStatus, String), saddle_mirror::Error>,
) -> CheckResult {
    match body() {
        Ok((status, detail)) => CheckResult { name: name.to_string(), status, detail },
        Err(e) => CheckResult {
            name: name.to_string(),
            status: CheckStatus::Fail,
            detail: format!("errored: {e}"),
        },
    }
}

/// An interior point of the set: half barycenter, half random sample, so the
/// metric weights stay moderate near simplex vertices.
fn blended_sample<R: Rng + ?Sized>(set: &ConstraintSet, rng: &mut R) -> Vec<f64> {
    let bary = set.barycenter();
    let s = set.sample(rng);
    bary.iter().zip(&s).map(|(&b, &v)| 0.5 * b + 0.5 * v).collect()
}

fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn joint_dist(ax: &[f64], ay: &[f64], bx: &[f64], by: &[f64]) -> f64 {
    let mut sq = 0.0;
    for (a, b) in ax.iter().zip(bx).chain(ay.iter().zip(by)) {
        sq += (a - b) * (a - b);
    }
    sq.sqrt()
}

/// The rescaled mirror step converges to the tangent-projected direction:
/// deviation at α = 1e-4 stays below 1e-3 at sampled points and directions.
fn gateaux(
    base: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    let sides = [(&base.x_map, base.problem.x_set()), (&base.y_map, base.problem.y_set())];
    let mut worst = 0.0f64;
    for (map, set) in sides {
        for _ in 0..5 {
            let x = blended_sample(set, rng);
            let d = random_direction(set.dim(), rng);
            let devs = gateaux_check(map, set, &x, &d, &[1e-4])?;
            worst = worst.max(devs[0].1);
        }
    }
    let ok = worst <= 1e-3;
    let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok((status, format!("max deviation {worst:.3e} at alpha=1e-4 (tolerance 1e-3)")))
}

/// Metric tangent projections decompose v = ν + η with ⟨ν, η⟩_W = 0, η in
/// the polar cone, and P idempotent; residuals at 1e-10.
fn moreau(
    base: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    let sides = [(&base.x_map, base.problem.x_set()), (&base.y_map, base.problem.y_set())];
    let mut worst = 0.0f64;
    for (map, set) in sides {
        for _ in 0..20 {
            let x = blended_sample(set, rng);
            let v = random_direction(set.dim(), rng);
            let w = map.hessian_diag(&x)?;
            let nu = set.tangent_project(&x, &v, &w)?;
            let eta: Vec<f64> = v.iter().zip(&nu).map(|(&a, &b)| a - b).collect();
            worst = worst.max(w.inner(&nu, &eta).abs());
            let again = set.tangent_project(&x, &nu, &w)?;
            let idem = nu.iter().zip(&again).map(|(&a, &b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            worst = worst.max(idem);
            for _ in 0..4 {
                let probe = random_direction(set.dim(), rng);
                let zeta = set.tangent_project(&x, &probe, &w)?;
                worst = worst.max(w.inner(&eta, &zeta));
            }
        }
    }
    let ok = worst <= 1e-10;
    let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok((status, format!("max decomposition residual {worst:.3e} (tolerance 1e-10)")))
}

/// Central finite differences of the bifunction reproduce the oracle
/// gradients (the bifunction is polynomial, so 1e-5 offsets are exact to
/// well below the tolerance).
fn gradient_probe(
    problem: &SaddleProblem,
    rng: &mut ChaCha8Rng,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = blended_sample(problem.x_set(), rng);
        let y = blended_sample(problem.y_set(), rng);
        let (g_x, g_y) = problem.gradients(&x, &y)?;
        for i in 0..x.len() {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd =
                (problem.eval_l_unchecked(&hi, &y) - problem.eval_l_unchecked(&lo, &y)) / (2.0 * h);
            worst = worst.max((fd - g_x[i]).abs());
        }
        for j in 0..y.len() {
            let mut hi = y.clone();
            let mut lo = y.clone();
            hi[j] += h;
            lo[j] -= h;
            let fd =
                (problem.eval_l_unchecked(&x, &hi) - problem.eval_l_unchecked(&x, &lo)) / (2.0 * h);
            worst = worst.max((fd - g_y[j]).abs());
        }
    }
    let scale = 1.0 + problem.g_bound();
    let ok = worst <= 1e-6 * scale;
    let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok((status, format!("max |finite difference - gradient| = {worst:.3e}")))
}

/// The value-based estimator's bias does not grow when the smoothing radius
/// shrinks (up to Monte-Carlo bands), and its second moment stays bounded as
/// the radius shrinks. The bound is one-sided: at points with small exact
/// gradients the large-radius moment is dominated by the O(μ²) remainder and
/// legitimately exceeds the small-radius one by large factors.
fn bias_probe(
    problem: &SaddleProblem,
    rng: &mut ChaCha8Rng,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    let samples = 4_000;
    let x = problem.x_set().barycenter();
    let y = problem.y_set().barycenter();
    let (bias_large, m2_large) = bias_second_moment_probe(problem, &x, &y, 0.1, samples, rng)?;
    let (bias_small, m2_small) = bias_second_moment_probe(problem, &x, &y, 0.01, samples, rng)?;
    let band = |m2: f64| 3.0 * (m2 / samples as f64).sqrt();
    let bias_ok = bias_small <= bias_large + band(m2_large) + band(m2_small);
    let m2_ok = m2_small <= 2.0 * m2_large + 1e-9;
    let status = if bias_ok && m2_ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok((
        status,
        format!(
            "bias {bias_large:.3e} (mu=0.1) vs {bias_small:.3e} (mu=0.01), second moments {m2_large:.3e} vs {m2_small:.3e}"
        ),
    ))
}

/// Every recorded iterate is feasible and the trace bookkeeping (record
/// protocol, step sizes, cumulative time, gap sign) matches the schedules.
fn viability(
    config: &RunConfig,
    trace: &Trace,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    let mut issues: Vec<String> = Vec::new();
    let records = &trace.records;
    if records.first().map(|r| r.n) != Some(0) {
        issues.push("first record is not n = 0".to_string());
    }
    if records.last().map(|r| r.n) != Some(config.max_iters) {
        issues.push("last record is not the final iterate".to_string());
    }
    let mut t_expected = 0.0;
    let mut next_n = 0u64;
    for r in records {
        if !config.problem.x_set().contains(&r.x, FEASIBILITY_TOL)
            || !config.problem.y_set().contains(&r.y, FEASIBILITY_TOL)
        {
            issues.push(format!("iterate at n = {} is infeasible", r.n));
            break;
        }
        if r.n > 0 && !(r.n % config.record_every == 0 || r.n == config.max_iters) {
            issues.push(format!("record at n = {} violates the record cadence", r.n));
        }
        if r.alpha != config.schedule.value(r.n) {
            issues.push(format!("alpha at n = {} differs from the schedule", r.n));
        }
        match (&config.smoothing, r.mu) {
            (Some(s), Some(mu)) if mu == s.mu(r.n) => {}
            (Some(_), _) => issues.push(format!("mu at n = {} differs from the schedule", r.n)),
            (None, Some(_)) => issues.push(format!("unexpected mu at n = {}", r.n)),
            (None, None) => {}
        }
        while next_n < r.n {
            t_expected += config.schedule.value(next_n);
            next_n += 1;
        }
        if (r.t - t_expected).abs() > 1e-9 * (1.0 + t_expected) {
            issues.push(format!("t at n = {} drifts from the partial step sums", r.n));
        }
        if let Some(gap) = r.gap {
            if gap < 0.0 {
                issues.push(format!("negative gap at n = {}", r.n));
            }
        }
    }
    if issues.is_empty() {
        Ok((
            CheckStatus::Pass,
            format!("{} records feasible and protocol-consistent", records.len()),
        ))
    } else {
        Ok((CheckStatus::Fail, issues.join("; ")))
    }
}

/// Window-by-window descent violations of the recorded V* against the slack
/// budget `slack · Σ α(j)²` (the discrete descent inequality; exact-oracle
/// runs only, where it holds per realization up to the quadratic remainder).
pub fn lyapunov_descent_violations(
    records: &[IterateRecord],
    schedule: &StepSchedule,
    slack: f64,
) -> Vec<String> {
    let mut violations = Vec::new();
    for pair in records.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let (Some(v0), Some(v1)) = (prev.v_star, next.v_star) else { continue };
        let mut budget = 0.0;
        for j in prev.n..next.n {
            let a = schedule.value(j);
            budget += a * a;
        }
        if v1 > v0 + slack * budget + 1e-12 {
            violations.push(format!(
                "V* rose from {v0:.6e} (n = {}) to {v1:.6e} (n = {}), budget {:.3e}",
                prev.n,
                next.n,
                slack * budget
            ));
        }
    }
    violations
}

fn lyapunov(
    resolved: &ResolvedSpec,
    config: &RunConfig,
    trace: &Trace,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    if config.problem.reference_saddles().is_empty() {
        return Ok((CheckStatus::Skipped, "no reference saddles".to_string()));
    }
    if resolved.zeroth_order || !matches!(config.noise.kind(), NoiseKind::None) {
        return Ok((
            CheckStatus::Skipped,
            "stochastic run: descent holds in expectation, not per realization".to_string(),
        ));
    }
    let slack = 5.0 * config.noise.second_moment_bound.max(1.0);
    let violations = lyapunov_descent_violations(&trace.records, &config.schedule, slack);
    if violations.is_empty() {
        Ok((
            CheckStatus::Pass,
            format!(
                "V* descends within slack {slack:.2} x sum(alpha^2) across {} windows",
                trace.records.len().saturating_sub(1)
            ),
        ))
    } else {
        Ok((CheckStatus::Fail, violations.join("; ")))
    }
}

/// Recorded distance diagnostics agree with recomputation and with the
/// strong-convexity inequality V* ≥ (σ_R/2)·dist².
fn dist_consistency(
    config: &RunConfig,
    trace: &Trace,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    if config.problem.reference_saddles().is_empty() {
        return Ok((CheckStatus::Skipped, "no reference saddles".to_string()));
    }
    let sigma = config.x_map.sigma_r.min(config.y_map.sigma_r);
    let mut issues = Vec::new();
    for r in &trace.records {
        let (Some(v_star), Some(dist)) = (r.v_star, r.dist_euclid) else { continue };
        if v_star + 1e-12 < 0.5 * sigma * dist * dist {
            issues.push(format!("V* < (sigma/2) dist^2 at n = {}", r.n));
        }
    }
    if let Some(last) = trace.records.last() {
        let (dist, v_star) = config.problem.distance_to_saddle_set(
            &config.x_map,
            &config.y_map,
            &last.x,
            &last.y,
        )?;
        if (Some(dist) != last.dist_euclid) || (Some(v_star) != last.v_star) {
            issues.push("final record disagrees with recomputed distances".to_string());
        }
    }
    if issues.is_empty() {
        Ok((
            CheckStatus::Pass,
            "recorded distances match recomputation and the norm bound".to_string(),
        ))
    } else {
        Ok((CheckStatus::Fail, issues.join("; ")))
    }
}

/// Tangent-scheme and mirror-scheme integrations converge to each other as
/// the step shrinks: halving h at least multiplies their endpoint
/// disagreement by 0.75 (or both already coincide).
fn equivalence(
    base: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    let x0 =
        base.x_map.interior_clip(base.problem.x_set(), blended_sample(base.problem.x_set(), rng));
    let y0 =
        base.y_map.interior_clip(base.problem.y_set(), blended_sample(base.problem.y_set(), rng));
    let dev_at = |h: f64| -> Result<f64, saddle_mirror::Error> {
        let mut cfg = DynamicsConfig {
            problem: base.problem.clone(),
            x_map: base.x_map.clone(),
            y_map: base.y_map.clone(),
            step: h,
            horizon: 0.5,
            scheme: Scheme::TangentEuler,
        };
        let tangent = integrate(&cfg, &x0, &y0)?;
        cfg.scheme = Scheme::MirrorEuler;
        let mirror = integrate(&cfg, &x0, &y0)?;
        let a = tangent.last().expect("integration samples");
        let b = mirror.last().expect("integration samples");
        Ok(joint_dist(&a.x, &a.y, &b.x, &b.y))
    };
    let dev_coarse = dev_at(1e-3)?;
    let dev_fine = dev_at(5e-4)?;
    let ok = dev_fine <= 0.75 * dev_coarse + 1e-10;
    let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok((
        status,
        format!("scheme disagreement {dev_coarse:.3e} at h=1e-3, {dev_fine:.3e} at h=5e-4"),
    ))
}

/// The discrete trace shadows the continuous flow over its trailing time
/// window, within a bound set by the local step sizes.
fn apt(base: &RunConfig, trace: &Trace) -> Result<(CheckStatus, String), saddle_mirror::Error> {
    if base.problem.reference_saddles().is_empty() {
        return Ok((CheckStatus::Skipped, "no reference saddles".to_string()));
    }
    let Some(first) = trace.records.first() else {
        return Ok((CheckStatus::Skipped, "empty trace".to_string()));
    };
    let last = trace.records.last().expect("nonempty");
    let window = 1.0f64.min((last.t - first.t) / 2.0);
    if !(window > 0.0) {
        return Ok((CheckStatus::Skipped, "trace spans no algorithmic time".to_string()));
    }
    let t_start = last.t - window;
    let h = 1e-3;
    let dyncfg = DynamicsConfig {
        problem: base.problem.clone(),
        x_map: base.x_map.clone(),
        y_map: base.y_map.clone(),
        step: h,
        horizon: window,
        scheme: Scheme::TangentEuler,
    };
    let d = apt_distance(trace, &dyncfg, t_start, window)?;
    let alpha_max = trace
        .records
        .iter()
        .filter(|r| r.t >= t_start - 1e-12)
        .map(|r| r.alpha)
        .fold(0.0f64, f64::max);
    let bound = 0.2 + 20.0 * (alpha_max + h);
    let ok = d.is_finite() && d <= bound;
    let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok((
        status,
        format!(
            "pseudotrajectory distance {d:.3e} over [{t_start:.2}, {:.2}], bound {bound:.3e}",
            t_start + window
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_passes_every_check() {
        let resolved = default_verification_spec();
        let report = verify(&resolved).unwrap();
        assert_eq!(report.checks.len(), 9);
        for check in &report.checks {
            assert_eq!(
                check.status,
                CheckStatus::Pass,
                "check {} did not pass: {}",
                check.name,
                check.detail
            );
        }
    }

    #[test]
    fn check_names_are_stable() {
        let report = verify(&default_verification_spec()).unwrap();
        let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "geometry_gateaux",
                "geometry_moreau",
                "problem_gradients",
                "estimator_bias",
                "solver_viability",
                "solver_lyapunov",
                "dist_consistency",
                "dynamics_equivalence",
                "dynamics_apt"
            ]
        );
    }

    #[test]
    fn missing_references_skip_rather_than_fail() {
        let resolved = parse_spec(
            r#"{
                "name": "norefs",
                "run": {
                    "problem": { "kind": "matrix_game", "payoff": [[1.0, -1.0], [-1.0, 1.0]] },
                    "max_iters": 200,
                    "record_every": 10
                }
            }"#,
        )
        .unwrap();
        let report = verify(&resolved).unwrap();
        let status =
            |name: &str| report.checks.iter().find(|c| c.name == name).map(|c| c.status).unwrap();
        assert_eq!(status("solver_lyapunov"), CheckStatus::Skipped);
        assert_eq!(status("dist_consistency"), CheckStatus::Skipped);
        assert_eq!(status("dynamics_apt"), CheckStatus::Skipped);
        assert_eq!(report.failed_checks(), 0, "skips must not count as failures");
    }

    #[test]
    fn zeroth_order_specs_skip_the_descent_check() {
        let resolved = parse_spec(
            r#"{
                "name": "z",
                "run": {
                    "problem": { "kind": "matching_pennies" },
                    "smoothing": { "kind": "constant", "mu": 0.01 },
                    "max_iters": 300,
                    "record_every": 10
                }
            }"#,
        )
        .unwrap();
        let report = verify(&resolved).unwrap();
        let lyap = report.checks.iter().find(|c| c.name == "solver_lyapunov").unwrap();
        assert_eq!(lyap.status, CheckStatus::Skipped);
        assert_eq!(report.failed_checks(), 0, "{:?}", report.checks);
    }

    #[test]
    fn descent_check_catches_a_rising_lyapunov_sequence() {
        let schedule = StepSchedule::polynomial(1.0, 1.0).unwrap();
        let record = |n: u64, v: f64| IterateRecord {
            n,
            t: 0.0,
            x: vec![0.5, 0.5],
            y: vec![0.5, 0.5],
            alpha: schedule.value(n),
            mu: None,
            gap: None,
            v_star: Some(v),
            dist_euclid: None,
        };
        // A dual-ascent sign flip turns the saddle into a repeller: V* grows
        // roughly linearly, far beyond any sum-of-squares budget.
        let rising: Vec<IterateRecord> =
            (0..10).map(|k| record(k * 100, 0.01 + 0.05 * k as f64)).collect();
        let violations = lyapunov_descent_violations(&rising, &schedule, 10.0);
        assert!(!violations.is_empty(), "a rising V* sequence must be flagged");

        let flat: Vec<IterateRecord> = (0..10).map(|k| record(k * 100, 0.01)).collect();
        assert!(lyapunov_descent_violations(&flat, &schedule, 10.0).is_empty());

        // Increases inside the slack budget are tolerated.
        let wiggle: Vec<IterateRecord> = (0..5)
            .map(|k| {
                let n = k * 10;
                let budget: f64 = (0..n).map(|j| schedule.value(j) * schedule.value(j)).sum();
                record(n, 0.01 + 5.0 * budget)
            })
            .collect();
        assert!(lyapunov_descent_violations(&wiggle, &schedule, 10.0).is_empty());
    }
}
