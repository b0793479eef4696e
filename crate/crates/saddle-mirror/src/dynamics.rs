//! Continuous-time projected saddle-point mirror-descent dynamics.
//!
//! The flow moves each side along the metric-projected steepest
//! descent/ascent direction of the bifunction,
//!
//! ```text
//! ẋ = Π_{T(x)}( −Hₓ(x)⁻¹ gₓ(x, γ) )         Hₓ = ∇²Rₓ, projection in ⟨·,·⟩_Hₓ
//! γ̇ = Π_{T(γ)}( +H_γ(γ)⁻¹ g_γ(x, γ) )
//! ```
//!
//! equivalently ẋ = −Hₓ⁻¹(gₓ + η̃) for a normal-cone selection η̃ recovered by
//! Moreau decomposition in the metric inner product. Equilibria coincide
//! with the saddle set, and V(x, γ) = D_{Rx}(x*, x) + D_{Rγ}(γ*, γ) is the
//! matching Lyapunov function.
//!
//! Two one-step discretizations are provided: `tangent-euler` takes the
//! explicit Euler step along the projected field and restores feasibility by
//! Euclidean projection (the explicit step can exit a curved or affine set
//! at second order), while `mirror-euler` takes one noise-free mirror step
//! with α = h. The schemes agree to first order; their gap contracts
//! linearly in h.
//!
//! [`interpolate_trace`] and [`apt_distance`] connect discrete solver traces
//! to the flow: a trace is read as a piecewise-linear path in its cumulative
//! time t(n) = Σ α(k), and compared over a window against the flow started
//! from the interpolated point.

use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::Error;
use crate::geometry::{ConstraintSet, MirrorMap};
use crate::math;
use crate::problems::SaddleProblem;
use crate::solvers::Trace;

/// One sample of an integrated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    /// Flow time.
    pub s: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Lyapunov value w.r.t. the first reference saddle; `None` without references.
    pub v: Option<f64>,
    /// Minimum Lyapunov value over all reference saddles; `None` without references.
    pub v_star: Option<f64>,
}

/// Discretization scheme for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Explicit Euler on the projected field, then Euclidean feasibility
    /// restoration.
    TangentEuler,
    /// One noise-free mirror step with α = h per component.
    MirrorEuler,
}

/// Integration setup: problem, geometry, step h, horizon T, scheme.
#[derive(Debug, Clone)]
pub struct DynamicsConfig {
    pub problem: SaddleProblem,
    pub x_map: MirrorMap,
    pub y_map: MirrorMap,
    pub step: f64,
    pub horizon: f64,
    pub scheme: Scheme,
}

impl DynamicsConfig {
    fn validated(&self) -> Result<(), Error> {
        let mut issues: Vec<String> = Vec::new();
        if !(self.step.is_finite() && self.step > 0.0) {
            issues.push(String::from("integration step h must be finite and > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            issues.push(String::from("horizon T must be finite and > 0"));
        }
        if self.step.is_finite() && self.horizon.is_finite() && self.step > self.horizon {
            issues.push(String::from("integration step h must not exceed the horizon T"));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues.join("; ")))
        }
    }
}

/// Right-hand side of the projected dynamics at a feasible point.
pub fn pds_rhs(
    problem: &SaddleProblem,
    x_map: &MirrorMap,
    y_map: &MirrorMap,
    x: &[f64],
    y: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let (g_x, g_y) = problem.gradients(x, y)?;
    let wx = x_map.hessian_diag(x)?;
    let wy = y_map.hessian_diag(y)?;
    let vx: Vec<f64> = g_x.iter().zip(wx.diag.iter()).map(|(&g, &w)| -g / w).collect();
    let vy: Vec<f64> = g_y.iter().zip(wy.diag.iter()).map(|(&g, &w)| g / w).collect();
    let xdot = problem.x_set().tangent_project(x, &vx, &wx)?;
    let ydot = problem.y_set().tangent_project(y, &vy, &wy)?;
    Ok((xdot, ydot))
}

/// Lyapunov value V = D_{Rx}(x*, x) + D_{Rγ}(γ*, γ) for one reference saddle.
pub fn lyapunov_v(
    x_map: &MirrorMap,
    y_map: &MirrorMap,
    ref_saddle: &(Vec<f64>, Vec<f64>),
    x: &[f64],
    y: &[f64],
) -> Result<f64, Error> {
    let v = x_map.bregman(&ref_saddle.0, x)? + y_map.bregman(&ref_saddle.1, y)?;
    debug_assert!(
        v + 1e-12
            >= 0.5 * x_map.sigma_r * math::sq(math::dist2(x, &ref_saddle.0))
                + 0.5 * y_map.sigma_r * math::sq(math::dist2(y, &ref_saddle.1)),
        "strong convexity lower bound violated: V = {v}"
    );
    Ok(v)
}

/// V* = min over the reference list of [`lyapunov_v`].
pub fn lyapunov_v_star(
    x_map: &MirrorMap,
    y_map: &MirrorMap,
    saddles: &[(Vec<f64>, Vec<f64>)],
    x: &[f64],
    y: &[f64],
) -> Result<f64, Error> {
    if saddles.is_empty() {
        return Err(Error::NoReferenceSaddle);
    }
    let mut best = f64::INFINITY;
    for s in saddles {
        best = best.min(lyapunov_v(x_map, y_map, s, x, y)?);
    }
    Ok(best)
}

/// ‖(ẋ, γ̇)‖₂ of the projected field; zero exactly on the saddle set.
pub fn equilibrium_residual(
    problem: &SaddleProblem,
    x_map: &MirrorMap,
    y_map: &MirrorMap,
    x: &[f64],
    y: &[f64],
) -> Result<f64, Error> {
    let (xdot, ydot) = pds_rhs(problem, x_map, y_map, x, y)?;
    let mut sq = 0.0;
    for v in xdot.iter().chain(ydot.iter()) {
        sq += v * v;
    }
    Ok(math::sqrt(sq))
}

fn restore(map: &MirrorMap, set: &ConstraintSet, z: Vec<f64>) -> Vec<f64> {
    map.interior_clip(set, set.euclidean_project(&z))
}

/// Integrates the projected dynamics from a feasible start, sampling every
/// step. Returns round(T/h) + 1 samples including the initial condition.
pub fn integrate(
    dyncfg: &DynamicsConfig,
    x0: &[f64],
    y0: &[f64],
) -> Result<Vec<TrajectorySample>, Error> {
    dyncfg.validated()?;
    let problem = &dyncfg.problem;
    if !problem.x_set().contains(x0, crate::problems::FEASIBILITY_TOL)
        || !problem.y_set().contains(y0, crate::problems::FEASIBILITY_TOL)
    {
        return Err(Error::Feasibility(String::from("initial condition is infeasible")));
    }
    let h = dyncfg.step;
    let n_steps = libm::round(dyncfg.horizon / h) as u64;
    let n_steps = n_steps.max(1);
    let mut x = restore(&dyncfg.x_map, problem.x_set(), x0.to_vec());
    let mut y = restore(&dyncfg.y_map, problem.y_set(), y0.to_vec());
    let refs = problem.reference_saddles();
    let sample = |s: f64, x: &[f64], y: &[f64]| -> Result<TrajectorySample, Error> {
        let (v, v_star) = if refs.is_empty() {
            (None, None)
        } else {
            let v = lyapunov_v(&dyncfg.x_map, &dyncfg.y_map, &refs[0], x, y)?;
            let vs = lyapunov_v_star(&dyncfg.x_map, &dyncfg.y_map, refs, x, y)?;
            (Some(v), Some(vs))
        };
        Ok(TrajectorySample { s, x: x.to_vec(), y: y.to_vec(), v, v_star })
    };
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    out.push(sample(0.0, &x, &y)?);
    for k in 0..n_steps {
        match dyncfg.scheme {
            Scheme::TangentEuler => {
                let (xdot, ydot) = pds_rhs(problem, &dyncfg.x_map, &dyncfg.y_map, &x, &y)?;
                let xs: Vec<f64> = x.iter().zip(&xdot).map(|(&a, &d)| a + h * d).collect();
                let ys: Vec<f64> = y.iter().zip(&ydot).map(|(&a, &d)| a + h * d).collect();
                x = restore(&dyncfg.x_map, problem.x_set(), xs);
                y = restore(&dyncfg.y_map, problem.y_set(), ys);
            }
            Scheme::MirrorEuler => {
                let (g_x, g_y) = problem.gradients(&x, &y)?;
                let descent: Vec<f64> = g_x.iter().map(|&g| -g).collect();
                x = dyncfg.x_map.mirror_update(problem.x_set(), &x, &descent, h)?;
                y = dyncfg.y_map.mirror_update(problem.y_set(), &y, &g_y, h)?;
            }
        }
        debug_assert!(
            problem.x_set().contains(&x, 1e-10) && problem.y_set().contains(&y, 1e-10),
            "trajectory left the feasible set at step {k}"
        );
        out.push(sample((k + 1) as f64 * h, &x, &y)?);
    }
    Ok(out)
}

/// A solver trace read as a piecewise-linear path over cumulative time.
pub struct InterpolatedPath {
    ts: Vec<f64>,
    xs: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
}

impl InterpolatedPath {
    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        self.ts[self.ts.len() - 1]
    }

    /// Knot times of the underlying trace.
    pub fn knots(&self) -> &[f64] {
        &self.ts
    }

    /// (x̂(t), ŷ(t)) by linear interpolation between the bracketing records.
    pub fn at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), Error> {
        if !t.is_finite() || t < self.t_start() || t > self.t_end() {
            return Err(Error::OutOfRange(alloc::format!(
                "t = {t} outside the trace's time range [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        let idx = match self.ts.iter().position(|&k| k >= t) {
            Some(0) => return Ok((self.xs[0].clone(), self.ys[0].clone())),
            Some(i) => i,
            None => {
                return Ok((self.xs[self.xs.len() - 1].clone(), self.ys[self.ys.len() - 1].clone()))
            }
        };
        if self.ts[idx] == t {
            return Ok((self.xs[idx].clone(), self.ys[idx].clone()));
        }
        let (t0, t1) = (self.ts[idx - 1], self.ts[idx]);
        let theta = (t - t0) / (t1 - t0);
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(&p, &q)| p + theta * (q - p)).collect()
        };
        Ok((lerp(&self.xs[idx - 1], &self.xs[idx]), lerp(&self.ys[idx - 1], &self.ys[idx])))
    }
}

/// Reads a trace as the piecewise-linear interpolation in rescaled time,
/// x̂(t) = x(n) + (t − t(n))/(t(n+1) − t(n))·(x(n+1) − x(n)) on each segment.
pub fn interpolate_trace(trace: &Trace) -> Result<InterpolatedPath, Error> {
    if trace.records.len() < 2 {
        return Err(Error::Validation(String::from("interpolation needs at least two records")));
    }
    let ts: Vec<f64> = trace.records.iter().map(|r| r.t).collect();
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(String::from("record times must be strictly increasing")));
    }
    Ok(InterpolatedPath {
        ts,
        xs: trace.records.iter().map(|r| r.x.clone()).collect(),
        ys: trace.records.iter().map(|r| r.y.clone()).collect(),
    })
}

/// Pseudotrajectory deviation: restart the flow from the interpolated trace
/// point at `t_start` and take the sup, over trace knots within the window,
/// of the Euclidean distance between the interpolated trace and the flow.
pub fn apt_distance(
    trace: &Trace,
    dyncfg: &DynamicsConfig,
    t_start: f64,
    window: f64,
) -> Result<f64, Error> {
    if !(window.is_finite() && window >= 0.0) {
        return Err(Error::OutOfRange(String::from("window must be finite and ≥ 0")));
    }
    let path = interpolate_trace(trace)?;
    let t_end = t_start + window;
    if t_start < path.t_start() || t_end > path.t_end() {
        return Err(Error::OutOfRange(alloc::format!(
            "window [{t_start}, {t_end}] outside the trace's time range [{}, {}]",
            path.t_start(),
            path.t_end()
        )));
    }
    if window == 0.0 {
        return Ok(0.0);
    }
    let (x0, y0) = path.at(t_start)?;
    let flow_cfg = DynamicsConfig { horizon: window, ..dyncfg.clone() };
    let flow = integrate(&flow_cfg, &x0, &y0)?;
    let flow_at = |s: f64| -> (Vec<f64>, Vec<f64>) {
        // The flow grid is uniform in h; clamp against round-off at the ends.
        let h = flow_cfg.step;
        let pos = s / h;
        let idx = (libm::floor(pos) as usize).min(flow.len() - 2);
        let theta = (pos - idx as f64).clamp(0.0, 1.0);
        let a = &flow[idx];
        let b = &flow[idx + 1];
        let lerp = |p: &[f64], q: &[f64]| -> Vec<f64> {
            p.iter().zip(q).map(|(&u, &v)| u + theta * (v - u)).collect()
        };
        (lerp(&a.x, &b.x), lerp(&a.y, &b.y))
    };
    let mut sup = 0.0f64;
    for &knot in path.knots() {
        if knot < t_start || knot > t_end {
            continue;
        }
        let (tx, ty) = path.at(knot)?;
        let (fx, fy) = flow_at(knot - t_start);
        let d = math::sqrt(math::sq(math::dist2(&tx, &fx)) + math::sq(math::dist2(&ty, &fy)));
        sup = sup.max(d);
    }
    Ok(sup)
}
