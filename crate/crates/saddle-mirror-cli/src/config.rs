//! JSON experiment specs: a fixed, diff-able schema with no includes and no
//! expressions. Unknown keys are rejected, and validation collects every
//! violated invariant instead of stopping at the first.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use saddle_mirror::geometry::{ConstraintSet, MirrorMap, SetKind};
use saddle_mirror::linalg::Matrix;
use saddle_mirror::problems::{NoiseModel, SaddleProblem};
use saddle_mirror::solvers::{InitPoint, RunConfig, StepSchedule};
use saddle_mirror::zeroth_order::SmoothingSchedule;

use crate::CliError;

/// Top-level spec file. `smoothing` in the run block selects the
/// zeroth-order solver; without it the exact-oracle solver runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Output directory for trace CSVs and the summary JSON.
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

fn default_outputs() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    /// Mirror map for the primal side; defaults to entropic on simplices and
    /// quadratic elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_map: Option<MapSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingSpec>,
    #[serde(default)]
    pub seed: u64,
    pub max_iters: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub init: InitSpec,
}

fn default_record_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// The built-in 2×2 game with payoff [[1, −1], [−1, 1]].
    MatchingPennies,
    MatrixGame {
        payoff: Vec<Vec<f64>>,
        #[serde(default)]
        reference_saddles: Vec<SaddlePointSpec>,
    },
    QuadraticSaddle {
        p: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        c_mat: Vec<Vec<f64>>,
        c_vec: Vec<f64>,
        d_vec: Vec<f64>,
        x_set: SetSpec,
        y_set: SetSpec,
        #[serde(default)]
        reference_saddles: Vec<SaddlePointSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddlePointSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Simplex { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSpec {
    Entropic,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    AdditiveGaussian {
        std: f64,
    },
    ColumnSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Polynomial { a: f64, p: f64 },
    Constant { alpha: f64 },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Polynomial { a: 1.0, p: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothingSpec {
    Constant { mu: f64 },
    Geometric { mu0: f64, decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitSpec {
    /// The string "barycenter".
    Named(String),
    Point {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Named("barycenter".to_string())
    }
}

/// Parameter grid: the cartesian product over the present lists. Keys mirror
/// the run fields they override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Vec<u64>>,
}

impl SweepSpec {
    pub fn is_empty(&self) -> bool {
        self.schedule_a.is_none()
            && self.schedule_p.is_none()
            && self.smoothing_mu.is_none()
            && self.seed.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "default_true")]
    pub gap: bool,
    #[serde(default = "default_true")]
    pub v_star: bool,
    #[serde(default = "default_true")]
    pub dist: bool,
    #[serde(default)]
    pub apt: bool,
}

fn default_true() -> bool {
    true
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec { gap: true, v_star: true, dist: true, apt: false }
    }
}

/// A spec resolved against the solver types: base run config plus the solver
/// selection implied by the smoothing block.
#[derive(Debug, Clone)]
pub struct ResolvedSpec {
    pub spec: ExperimentSpec,
    pub base: RunConfig,
    pub zeroth_order: bool,
}

/// Reads and validates a spec file. Parse failures carry the JSON path of
/// the offending key; validation failures list every violated invariant.
pub fn load_spec(path: &Path) -> Result<ResolvedSpec, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    parse_spec(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses and validates spec text (see [`load_spec`]).
pub fn parse_spec(text: &str) -> Result<ResolvedSpec, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ExperimentSpec = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Parse(format!("at {}: {}", e.path(), e.inner())))?;
    resolve_spec(spec)
}

/// Validates a parsed spec and builds the base [`RunConfig`].
pub fn resolve_spec(spec: ExperimentSpec) -> Result<ResolvedSpec, CliError> {
    let mut violations: Vec<String> = Vec::new();

    let problem = build_problem(&spec.run.problem, &mut violations);
    let schedule = match spec.run.schedule {
        ScheduleSpec::Polynomial { a, p } => StepSchedule::polynomial(a, p),
        ScheduleSpec::Constant { alpha } => StepSchedule::constant(alpha),
    }
    .map_err(|e| e.to_string());
    if let Err(e) = &schedule {
        violations.push(e.clone());
    }
    let smoothing = match &spec.run.smoothing {
        None => Ok(None),
        Some(SmoothingSpec::Constant { mu }) => SmoothingSchedule::constant(*mu).map(Some),
        Some(SmoothingSpec::Geometric { mu0, decay }) => {
            SmoothingSchedule::geometric(*mu0, *decay).map(Some)
        }
    }
    .map_err(|e| e.to_string());
    if let Err(e) = &smoothing {
        violations.push(e.clone());
    }

    if spec.name.is_empty() {
        violations.push("name must not be empty".to_string());
    } else if !spec.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        violations.push(format!(
            "name {:?} may only contain ASCII letters, digits, '-' and '_' (it names the output files)",
            spec.name
        ));
    }
    if let Some(sweep) = &spec.sweep {
        for (key, len) in [
            ("sweep.schedule_a", sweep.schedule_a.as_ref().map(Vec::len)),
            ("sweep.schedule_p", sweep.schedule_p.as_ref().map(Vec::len)),
            ("sweep.smoothing_mu", sweep.smoothing_mu.as_ref().map(Vec::len)),
            ("sweep.seed", sweep.seed.as_ref().map(Vec::len)),
        ] {
            if len == Some(0) {
                violations.push(format!("{key} must list at least one value"));
            }
        }
        if sweep.smoothing_mu.is_some() && spec.run.smoothing.is_none() {
            violations.push(
                "sweep.smoothing_mu requires a smoothing schedule in the run block".to_string(),
            );
        }
        if (sweep.schedule_a.is_some() || sweep.schedule_p.is_some())
            && matches!(spec.run.schedule, ScheduleSpec::Constant { .. })
        {
            violations.push(
                "sweep.schedule_a / sweep.schedule_p require a polynomial step schedule"
                    .to_string(),
            );
        }
        if let Some(ps) = &sweep.schedule_p {
            for &p in ps {
                if let Err(e) = StepSchedule::polynomial(1.0, p) {
                    violations.push(format!("sweep.schedule_p value {p}: {e}"));
                }
            }
        }
        if let Some(avals) = &sweep.schedule_a {
            for &a in avals {
                if let Err(e) = StepSchedule::polynomial(a, 1.0) {
                    violations.push(format!("sweep.schedule_a value {a}: {e}"));
                }
            }
        }
        if let Some(mus) = &sweep.smoothing_mu {
            for &mu in mus {
                if !(mu.is_finite() && mu > 0.0) {
                    violations.push(format!(
                        "sweep.smoothing_mu value {mu}: smoothing radius must be finite and > 0"
                    ));
                }
            }
        }
    }

    let Some(problem) = problem else {
        return Err(CliError::Validation(violations.join("; ")));
    };

    let pick_map = |choice: &Option<MapSpec>, set: &ConstraintSet| match choice {
        Some(MapSpec::Entropic) => MirrorMap::entropic(),
        Some(MapSpec::Quadratic) => MirrorMap::quadratic(),
        None => match set.kind() {
            SetKind::Simplex => MirrorMap::entropic(),
            _ => MirrorMap::quadratic(),
        },
    };
    let x_map = pick_map(&spec.run.x_map, problem.x_set());
    let y_map = pick_map(&spec.run.y_map, problem.y_set());

    let noise = match spec.run.noise {
        NoiseSpec::None => Ok(NoiseModel::none(&problem)),
        NoiseSpec::AdditiveGaussian { std } => NoiseModel::additive_gaussian(&problem, std),
        NoiseSpec::ColumnSampling => NoiseModel::column_sampling(&problem),
    };
    let noise = match noise {
        Ok(n) => Some(n),
        Err(e) => {
            violations.push(e.to_string());
            None
        }
    };

    let init = match &spec.run.init {
        InitSpec::Named(s) if s == "barycenter" => Some(InitPoint::Barycenter),
        InitSpec::Named(s) => {
            violations.push(format!("init must be \"barycenter\" or a point, got \"{s}\""));
            None
        }
        InitSpec::Point { x, y } => Some(InitPoint::Point { x: x.clone(), y: y.clone() }),
    };

    if spec.run.smoothing.is_some() && !matches!(spec.run.noise, NoiseSpec::None) {
        violations.push(
            "the zeroth-order solver estimates gradients from bifunction values; noise must be \"none\""
                .to_string(),
        );
    }

    // Broken components get innocuous placeholders so the remaining run
    // invariants are still checked; any constructor failure above already
    // guarantees an error return below.
    let noise = noise.unwrap_or_else(|| NoiseModel::none(&problem));
    let schedule =
        schedule.unwrap_or_else(|_| StepSchedule::constant(1.0).expect("placeholder schedule"));
    let smoothing = smoothing.unwrap_or(None);
    let init = init.unwrap_or(InitPoint::Barycenter);

    let base = RunConfig {
        problem,
        x_map,
        y_map,
        noise,
        schedule,
        smoothing,
        seed: spec.run.seed,
        max_iters: spec.run.max_iters,
        record_every: spec.run.record_every,
        init,
    };
    violations.extend(base.violations());
    if !violations.is_empty() {
        return Err(CliError::Validation(violations.join("; ")));
    }
    let zeroth_order = base.smoothing.is_some();
    Ok(ResolvedSpec { spec, base, zeroth_order })
}

fn build_problem(spec: &ProblemSpec, violations: &mut Vec<String>) -> Option<SaddleProblem> {
    let refs = |list: &[SaddlePointSpec]| -> Vec<(Vec<f64>, Vec<f64>)> {
        list.iter().map(|s| (s.x.clone(), s.y.clone())).collect()
    };
    let matrix = |rows: &[Vec<f64>], name: &str, violations: &mut Vec<String>| -> Option<Matrix> {
        match Matrix::from_rows(rows) {
            Ok(m) => Some(m),
            Err(e) => {
                violations.push(format!("{name}: {e}"));
                None
            }
        }
    };
    let set = |s: &SetSpec, name: &str, violations: &mut Vec<String>| -> Option<ConstraintSet> {
        let built = match s {
            SetSpec::Simplex { dim } => ConstraintSet::simplex(*dim),
            SetSpec::Box { lower, upper } => ConstraintSet::box_set(lower.clone(), upper.clone()),
            SetSpec::Ball { center, radius } => ConstraintSet::ball(center.clone(), *radius),
        };
        match built {
            Ok(c) => Some(c),
            Err(e) => {
                violations.push(format!("{name}: {e}"));
                None
            }
        }
    };
    match spec {
        ProblemSpec::MatchingPennies => Some(SaddleProblem::matching_pennies()),
        ProblemSpec::MatrixGame { payoff, reference_saddles } => {
            let a = matrix(payoff, "payoff", violations)?;
            match SaddleProblem::matrix_game(a, refs(reference_saddles)) {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(e.to_string());
                    None
                }
            }
        }
        ProblemSpec::QuadraticSaddle {
            p,
            q,
            c_mat,
            c_vec,
            d_vec,
            x_set,
            y_set,
            reference_saddles,
        } => {
            let pm = matrix(p, "p", violations);
            let qm = matrix(q, "q", violations);
            let cm = matrix(c_mat, "c_mat", violations);
            let xs = set(x_set, "x_set", violations);
            let ys = set(y_set, "y_set", violations);
            let (Some(pm), Some(qm), Some(cm), Some(xs), Some(ys)) = (pm, qm, cm, xs, ys) else {
                return None;
            };
            match SaddleProblem::quadratic_saddle(
                pm,
                qm,
                cm,
                c_vec.clone(),
                d_vec.clone(),
                xs,
                ys,
                refs(reference_saddles),
            ) {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(e.to_string());
                    None
                }
            }
        }
    }
}
