//! The SSPMD and SZSPMD iteration loops, step schedules, and trace
//! recording.
//!
//! One iteration of stochastic saddle-point mirror descent (SSPMD) is
//!
//! ```text
//! x(n+1) = ∇R̄ₓ*( ∇Rₓ(x(n)) − α(n)·Gₓ(n) )        descent in x
//! γ(n+1) = ∇R̄_γ*( ∇R_γ(γ(n)) + α(n)·G_γ(n) )      ascent in γ
//! ```
//!
//! with (Gₓ, G_γ) a stochastic oracle sample. The zeroth-order variant
//! (SZSPMD) replaces the oracle by the Gaussian-smoothing estimate with
//! radius μ(n). Robbins-Monro schedules α(n) = a/(n+1)^p, p ∈ (0.5, 1],
//! satisfy Σα = ∞ and Σα² < ∞; constant steps are accepted for diagnostics
//! only and are flagged as such.
//!
//! A run is strictly sequential; determinism is part of the contract. All
//! randomness flows from one ChaCha8 stream seeded by `RunConfig::seed`, so
//! identical configs produce identical traces.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::geometry::{ConstraintSet, MapKind, MirrorMap, SetKind};
use crate::problems::{NoiseModel, OracleSample, SaddleProblem};
use crate::zeroth_order::{gaussian_estimate, SmoothingSchedule};

/// Step-size sequence α(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepSchedule {
    /// α(n) = a/(n+1)^p with p ∈ (0.5, 1]; Robbins-Monro by construction.
    Polynomial { a: f64, p: f64 },
    /// α(n) = α; violates Σα(n)² < ∞, allowed for diagnostics only.
    Constant { alpha: f64 },
}

impl StepSchedule {
    pub fn polynomial(a: f64, p: f64) -> Result<Self, Error> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Validation(String::from("step scale a must be finite and > 0")));
        }
        if !(p > 0.5 && p <= 1.0) {
            return Err(Error::Validation(format!(
                "step exponent p = {p} violates the Robbins-Monro window (0.5, 1]: Σα(n) = ∞ and Σα(n)² < ∞ require 0.5 < p ≤ 1"
            )));
        }
        Ok(StepSchedule::Polynomial { a, p })
    }

    pub fn constant(alpha: f64) -> Result<Self, Error> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Validation(String::from("constant step must be finite and > 0")));
        }
        Ok(StepSchedule::Constant { alpha })
    }

    /// α(n).
    pub fn value(&self, n: u64) -> f64 {
        match *self {
            StepSchedule::Polynomial { a, p } => a / crate::math::pow(n as f64 + 1.0, p),
            StepSchedule::Constant { alpha } => alpha,
        }
    }

    /// Whether the schedule satisfies Σα(n) = ∞ and Σα(n)² < ∞.
    pub fn is_robbins_monro(&self) -> bool {
        matches!(self, StepSchedule::Polynomial { .. })
    }
}

/// Initial iterate of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitPoint {
    /// Uniform simplex point / box center / ball center on each side.
    Barycenter,
    /// An explicit feasible pair.
    Point { x: Vec<f64>, y: Vec<f64> },
}

/// Everything a solver run depends on. Two runs with equal configs produce
/// identical traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: SaddleProblem,
    pub x_map: MirrorMap,
    pub y_map: MirrorMap,
    pub noise: NoiseModel,
    pub schedule: StepSchedule,
    /// Smoothing radius schedule; required by the zeroth-order solver and
    /// rejected by the exact-oracle one.
    pub smoothing: Option<SmoothingSchedule>,
    pub seed: u64,
    pub max_iters: u64,
    pub record_every: u64,
    pub init: InitPoint,
}

impl RunConfig {
    /// Exact-oracle defaults: entropic maps on simplices, quadratic
    /// otherwise, no noise, α(n) = 1/(n+1), barycenter start.
    pub fn defaults(problem: SaddleProblem, seed: u64, max_iters: u64) -> Self {
        let pick = |set: &ConstraintSet| match set.kind() {
            SetKind::Simplex => MirrorMap::entropic(),
            _ => MirrorMap::quadratic(),
        };
        let x_map = pick(problem.x_set());
        let y_map = pick(problem.y_set());
        let noise = NoiseModel::none(&problem);
        RunConfig {
            problem,
            x_map,
            y_map,
            noise,
            schedule: StepSchedule::polynomial(1.0, 1.0).expect("static schedule"),
            smoothing: None,
            seed,
            max_iters,
            record_every: 1,
            init: InitPoint::Barycenter,
        }
    }

    /// Collects every violated invariant; empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_iters < 1 {
            out.push(String::from("max_iters must be ≥ 1"));
        }
        if self.record_every < 1 {
            out.push(String::from("record_every must be ≥ 1"));
        }
        if matches!(self.x_map.kind(), MapKind::Entropic)
            && !matches!(self.problem.x_set().kind(), SetKind::Simplex)
        {
            out.push(String::from("entropic x-map requires a simplex primal set"));
        }
        if matches!(self.y_map.kind(), MapKind::Entropic)
            && !matches!(self.problem.y_set().kind(), SetKind::Simplex)
        {
            out.push(String::from("entropic γ-map requires a simplex dual set"));
        }
        if let InitPoint::Point { x, y } = &self.init {
            if !self.problem.x_set().contains(x, crate::problems::FEASIBILITY_TOL) {
                out.push(String::from("init.x is infeasible"));
            }
            if !self.problem.y_set().contains(y, crate::problems::FEASIBILITY_TOL) {
                out.push(String::from("init.y is infeasible"));
            }
        }
        out
    }

    fn validated(&self, needs_smoothing: bool) -> Result<(), Error> {
        let mut violations = self.violations();
        if needs_smoothing && self.smoothing.is_none() {
            violations.push(String::from("the zeroth-order solver requires a smoothing schedule"));
        }
        if !needs_smoothing && self.smoothing.is_some() {
            violations.push(String::from(
                "a smoothing schedule was supplied but the exact-oracle solver does not use one",
            ));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations.join("; ")))
        }
    }

    fn initial_point(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.init {
            InitPoint::Barycenter => {
                (self.problem.x_set().barycenter(), self.problem.y_set().barycenter())
            }
            InitPoint::Point { x, y } => (x.clone(), y.clone()),
        }
    }
}

/// One recorded iterate with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    /// Iteration index.
    pub n: u64,
    /// Cumulative time t(n) = Σ_{k<n} α(k).
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// α(n), the step the schedule assigns to this index.
    pub alpha: f64,
    /// μ(n) for zeroth-order runs; `None` for exact-oracle runs.
    pub mu: Option<f64>,
    /// Duality gap; `None` when no exact inner solve exists.
    pub gap: Option<f64>,
    /// Bregman distance to the reference saddle set; `None` without references.
    pub v_star: Option<f64>,
    /// Euclidean distance to the reference saddle set; `None` without references.
    pub dist_euclid: Option<f64>,
}

/// A completed run: ordered records, a content hash of the config, and the
/// wall time (0 when the crate is built without `std`; excluded from
/// reproducibility comparisons).
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub records: Vec<IterateRecord>,
    pub config_digest: String,
    pub wall_time: f64,
    /// α-weighted running average of the iterates, for context only; the
    /// convergence statements concern the iterates themselves.
    pub ergodic_x: Vec<f64>,
    pub ergodic_y: Vec<f64>,
}

/// SHA-256 of the solver tag and the JSON form of the config.
fn config_digest(tag: &str, config: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update(b":");
    hasher.update(serde_json::to_vec(config).expect("config serializes"));
    let bytes = hasher.finalize();
    use core::fmt::Write;
    let mut hex = String::with_capacity(64);
    for b in bytes {
        write!(hex, "{b:02x}").expect("hex into string");
    }
    hex
}

/// One SSPMD step: mirror descent in x, mirror ascent in γ, one oracle call.
pub fn sspmd_step<R: rand::Rng + ?Sized>(
    problem: &SaddleProblem,
    x_map: &MirrorMap,
    y_map: &MirrorMap,
    noise: &NoiseModel,
    x: &[f64],
    y: &[f64],
    alpha: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, OracleSample), Error> {
    let sample = problem.stochastic_gradients(noise, x, y, rng)?;
    let descent: Vec<f64> = sample.g_x.iter().map(|&g| -g).collect();
    let x_next = x_map.mirror_update(problem.x_set(), x, &descent, alpha)?;
    let y_next = y_map.mirror_update(problem.y_set(), y, &sample.g_y, alpha)?;
    Ok((x_next, y_next, sample))
}

/// One SZSPMD step: the oracle is the Gaussian-smoothing estimate at μ.
pub fn szspmd_step<R: rand::Rng + ?Sized>(
    problem: &SaddleProblem,
    x_map: &MirrorMap,
    y_map: &MirrorMap,
    x: &[f64],
    y: &[f64],
    alpha: f64,
    mu: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let (g_x, g_y) = gaussian_estimate(problem, x, y, mu, rng)?;
    let descent: Vec<f64> = g_x.iter().map(|&g| -g).collect();
    let x_next = x_map.mirror_update(problem.x_set(), x, &descent, alpha)?;
    let y_next = y_map.mirror_update(problem.y_set(), y, &g_y, alpha)?;
    Ok((x_next, y_next))
}

enum Oracle {
    Exact,
    ZerothOrder,
}

/// Full SSPMD run; deterministic in the config.
pub fn run_sspmd(config: &RunConfig) -> Result<Trace, Error> {
    config.validated(false)?;
    run_loop(config, Oracle::Exact, "sspmd")
}

/// Full SZSPMD run; deterministic in the config, records μ(n) per record.
pub fn run_szspmd(config: &RunConfig) -> Result<Trace, Error> {
    config.validated(true)?;
    run_loop(config, Oracle::ZerothOrder, "szspmd")
}

fn run_loop(config: &RunConfig, oracle: Oracle, tag: &str) -> Result<Trace, Error> {
    #[cfg(feature = "std")]
    let started = std::time::Instant::now();
    let digest = config_digest(tag, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let problem = &config.problem;
    let (mut x, mut y) = config.initial_point();
    let mut t = 0.0;
    let mut records: Vec<IterateRecord> = Vec::new();
    let mut ergodic_x = alloc::vec![0.0; x.len()];
    let mut ergodic_y = alloc::vec![0.0; y.len()];
    let mut weight = 0.0;

    let record = |n: u64,
                  t: f64,
                  x: &[f64],
                  y: &[f64],
                  records: &mut Vec<IterateRecord>|
     -> Result<(), Error> {
        let gap = match problem.saddle_gap(x, y) {
            Ok(g) => Some(g),
            Err(Error::UnsupportedInnerSolve(_)) => None,
            Err(e) => return Err(e),
        };
        let (dist_euclid, v_star) =
            match problem.distance_to_saddle_set(&config.x_map, &config.y_map, x, y) {
                Ok((d, v)) => (Some(d), Some(v)),
                Err(Error::NoReferenceSaddle) => (None, None),
                Err(e) => return Err(e),
            };
        records.push(IterateRecord {
            n,
            t,
            x: x.to_vec(),
            y: y.to_vec(),
            alpha: config.schedule.value(n),
            mu: config.smoothing.as_ref().map(|s| s.mu(n)),
            gap,
            v_star,
            dist_euclid,
        });
        Ok(())
    };

    record(0, t, &x, &y, &mut records)?;
    for n in 0..config.max_iters {
        let alpha = config.schedule.value(n);
        weight += alpha;
        for (acc, &v) in ergodic_x.iter_mut().zip(&x) {
            *acc += alpha * (v - *acc) / weight;
        }
        for (acc, &v) in ergodic_y.iter_mut().zip(&y) {
            *acc += alpha * (v - *acc) / weight;
        }
        let (x_next, y_next) = match oracle {
            Oracle::Exact => {
                let (xn, yn, _) = sspmd_step(
                    problem,
                    &config.x_map,
                    &config.y_map,
                    &config.noise,
                    &x,
                    &y,
                    alpha,
                    &mut rng,
                )?;
                (xn, yn)
            }
            Oracle::ZerothOrder => {
                let mu = config.smoothing.as_ref().expect("validated").mu(n);
                szspmd_step(problem, &config.x_map, &config.y_map, &x, &y, alpha, mu, &mut rng)?
            }
        };
        debug_assert!(
            problem.x_set().contains(&x_next, 1e-10) && problem.y_set().contains(&y_next, 1e-10),
            "iterate left the feasible set at step {n}"
        );
        x = x_next;
        y = y_next;
        t += alpha;
        let done = n + 1;
        if done % config.record_every == 0 || done == config.max_iters {
            record(done, t, &x, &y, &mut records)?;
        }
    }

    #[cfg(feature = "std")]
    let wall_time = started.elapsed().as_secs_f64();
    #[cfg(not(feature = "std"))]
    let wall_time = 0.0;
    Ok(Trace { records, config_digest: digest, wall_time, ergodic_x, ergodic_y })
}
