//! Convex-concave saddle problems with deterministic and stochastic
//! gradient oracles, reference saddle sets, and exact gap computation.
//!
//! Two built-in families:
//!
//! ```text
//! matrix game        L(x, γ) = xᵀAγ                          on simplex × simplex
//! quadratic saddle   L(x, γ) = ½xᵀPx + cᵀx + xᵀCγ − ½γᵀQγ − dᵀγ,   P, Q ⪰ 0
//! ```
//!
//! Both are differentiable, so the (sub/super)differentials are singletons:
//! gₓ = Aγ (resp. Px + c + Cγ) and g_γ = Aᵀx (resp. Cᵀx − Qγ − d). A
//! reference saddle (x*, γ*) satisfies L(x*, γ) ≤ L(x*, γ*) ≤ L(x, γ*) for
//! all feasible (x, γ); shipped references are validated against a feasible
//! sample at construction.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};
use serde::Serialize;

use crate::error::Error;
use crate::geometry::{ConstraintSet, MirrorMap, SetKind};
use crate::linalg::{self, Matrix};
use crate::math;

/// Feasibility tolerance for oracle and gap evaluations.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Tolerance to which reference saddles must satisfy the saddle inequality
/// over the construction-time sample.
pub const SADDLE_VALIDATION_TOL: f64 = 1e-8;

/// Seed of the RNG used for construction-time sampling (gradient-bound
/// estimation and reference-saddle validation). Fixed so that problem
/// constants, and therefore config digests and traces, are identical across
/// runs and platforms.
const CONSTRUCTION_SEED: u64 = 0x5add_1e00_caf3_0001;

/// Number of feasible samples behind the gradient bound G.
const GRADIENT_BOUND_SAMPLES: usize = 10_000;

/// Number of feasible samples behind reference-saddle validation.
const SADDLE_VALIDATION_SAMPLES: usize = 100;

/// The bifunction family of a [`SaddleProblem`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProblemKind {
    /// L(x, γ) = xᵀAγ on a pair of probability simplices.
    MatrixGame { a: Matrix },
    /// L(x, γ) = ½xᵀPx + cᵀx + xᵀCγ − ½γᵀQγ − dᵀγ with P, Q ⪰ 0.
    QuadraticSaddle { p: Matrix, q: Matrix, c_mat: Matrix, c_vec: Vec<f64>, d_vec: Vec<f64> },
}

/// A constrained convex-concave saddle problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleProblem {
    kind: ProblemKind,
    x_set: ConstraintSet,
    y_set: ConstraintSet,
    /// Uniform bound on ‖gₓ‖₂ and ‖g_γ‖₂ over the feasible set, estimated at
    /// construction as 1.1× the max over a feasible sample.
    g_bound: f64,
    reference_saddles: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SaddleProblem {
    /// Bilinear game on matching simplices.
    pub fn matrix_game(
        a: Matrix,
        reference_saddles: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self, Error> {
        let x_set = ConstraintSet::simplex(a.rows())?;
        let y_set = ConstraintSet::simplex(a.cols())?;
        let mut problem = SaddleProblem {
            kind: ProblemKind::MatrixGame { a },
            x_set,
            y_set,
            g_bound: 0.0,
            reference_saddles,
        };
        problem.finish_construction()?;
        Ok(problem)
    }

    /// Quadratic saddle ½xᵀPx + cᵀx + xᵀCγ − ½γᵀQγ − dᵀγ; P and Q must be
    /// symmetric positive semidefinite.
    pub fn quadratic_saddle(
        p: Matrix,
        q: Matrix,
        c_mat: Matrix,
        c_vec: Vec<f64>,
        d_vec: Vec<f64>,
        x_set: ConstraintSet,
        y_set: ConstraintSet,
        reference_saddles: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self, Error> {
        let n = x_set.dim();
        let m = y_set.dim();
        let mut issues: Vec<String> = Vec::new();
        if p.rows() != n || p.cols() != n {
            issues.push(format!("P must be {n}×{n}, got {}×{}", p.rows(), p.cols()));
        }
        if q.rows() != m || q.cols() != m {
            issues.push(format!("Q must be {m}×{m}, got {}×{}", q.rows(), q.cols()));
        }
        if c_mat.rows() != n || c_mat.cols() != m {
            issues.push(format!("C must be {n}×{m}, got {}×{}", c_mat.rows(), c_mat.cols()));
        }
        if c_vec.len() != n {
            issues.push(format!("c must have length {n}, got {}", c_vec.len()));
        }
        if d_vec.len() != m {
            issues.push(format!("d must have length {m}, got {}", d_vec.len()));
        }
        if issues.is_empty() && !p.is_psd(1e-10) {
            issues.push("P must be symmetric positive semidefinite".to_string());
        }
        if issues.is_empty() && !q.is_psd(1e-10) {
            issues.push("Q must be symmetric positive semidefinite".to_string());
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues.join("; ")));
        }
        let mut problem = SaddleProblem {
            kind: ProblemKind::QuadraticSaddle { p, q, c_mat, c_vec, d_vec },
            x_set,
            y_set,
            g_bound: 0.0,
            reference_saddles,
        };
        problem.finish_construction()?;
        Ok(problem)
    }

    /// The 2×2 zero-sum game with payoff [[1, −1], [−1, 1]] and its unique
    /// mixed saddle ((½, ½), (½, ½)).
    pub fn matching_pennies() -> Self {
        let a = Matrix::from_rows(&[alloc::vec![1.0, -1.0], alloc::vec![-1.0, 1.0]])
            .expect("static matrix");
        SaddleProblem::matrix_game(a, alloc::vec![(alloc::vec![0.5, 0.5], alloc::vec![0.5, 0.5])])
            .expect("matching pennies is a valid game")
    }

    fn finish_construction(&mut self) -> Result<(), Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
        self.validate_reference_saddles(&mut rng)?;
        self.g_bound = self.estimate_gradient_bound(&mut rng);
        Ok(())
    }

    fn validate_reference_saddles(&self, rng: &mut ChaCha8Rng) -> Result<(), Error> {
        let mut issues: Vec<String> = Vec::new();
        for (idx, (xs, ys)) in self.reference_saddles.iter().enumerate() {
            if !self.x_set.contains(xs, FEASIBILITY_TOL)
                || !self.y_set.contains(ys, FEASIBILITY_TOL)
            {
                issues.push(format!("reference saddle {idx} is infeasible"));
                continue;
            }
            let l_star = self.eval_l_unchecked(xs, ys);
            for _ in 0..SADDLE_VALIDATION_SAMPLES {
                let x = self.x_set.sample(rng);
                let y = self.y_set.sample(rng);
                let upper = self.eval_l_unchecked(xs, &y);
                let lower = self.eval_l_unchecked(&x, ys);
                if upper > l_star + SADDLE_VALIDATION_TOL || lower < l_star - SADDLE_VALIDATION_TOL
                {
                    issues.push(format!(
                        "reference saddle {idx} violates the saddle inequality: L(x*,γ)={upper}, L(x*,γ*)={l_star}, L(x,γ*)={lower}"
                    ));
                    break;
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues.join("; ")))
        }
    }

    fn estimate_gradient_bound(&self, rng: &mut ChaCha8Rng) -> f64 {
        let mut max_norm: f64 = 0.0;
        for _ in 0..GRADIENT_BOUND_SAMPLES {
            let x = self.x_set.sample(rng);
            let y = self.y_set.sample(rng);
            let (gx, gy) = self.gradients_unchecked(&x, &y);
            max_norm = max_norm.max(math::norm2(&gx)).max(math::norm2(&gy));
        }
        1.1 * max_norm
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn x_set(&self) -> &ConstraintSet {
        &self.x_set
    }

    pub fn y_set(&self) -> &ConstraintSet {
        &self.y_set
    }

    /// Uniform gradient bound G over the feasible set.
    pub fn g_bound(&self) -> f64 {
        self.g_bound
    }

    pub fn reference_saddles(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.reference_saddles
    }

    fn check_feasible(&self, x: &[f64], y: &[f64]) -> Result<(), Error> {
        if !self.x_set.contains(x, FEASIBILITY_TOL) {
            return Err(Error::Feasibility("x violates the primal feasible set".into()));
        }
        if !self.y_set.contains(y, FEASIBILITY_TOL) {
            return Err(Error::Feasibility("γ violates the dual feasible set".into()));
        }
        Ok(())
    }

    /// The bifunction L(x, γ); errors on infeasible arguments.
    pub fn eval_l(&self, x: &[f64], y: &[f64]) -> Result<f64, Error> {
        self.check_feasible(x, y)?;
        Ok(self.eval_l_unchecked(x, y))
    }

    /// The bifunction formula evaluated without any feasibility check; both
    /// families are globally defined polynomials, which is what the
    /// zeroth-order estimator's off-set perturbations rely on.
    pub fn eval_l_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            ProblemKind::MatrixGame { a } => math::dot(x, &a.matvec(y)),
            ProblemKind::QuadraticSaddle { p, q, c_mat, c_vec, d_vec } => {
                0.5 * math::dot(x, &p.matvec(x))
                    + math::dot(c_vec, x)
                    + math::dot(x, &c_mat.matvec(y))
                    - 0.5 * math::dot(y, &q.matvec(y))
                    - math::dot(d_vec, y)
            }
        }
    }

    /// Exact (sub/super)gradients (gₓ, g_γ); singletons for both families.
    pub fn gradients(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), Error> {
        self.check_feasible(x, y)?;
        Ok(self.gradients_unchecked(x, y))
    }

    fn gradients_unchecked(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            ProblemKind::MatrixGame { a } => (a.matvec(y), a.matvec_t(x)),
            ProblemKind::QuadraticSaddle { p, q, c_mat, c_vec, d_vec } => {
                let mut gx = p.matvec(x);
                let cy = c_mat.matvec(y);
                for i in 0..gx.len() {
                    gx[i] += c_vec[i] + cy[i];
                }
                let mut gy = c_mat.matvec_t(x);
                let qy = q.matvec(y);
                for j in 0..gy.len() {
                    gy[j] -= qy[j] + d_vec[j];
                }
                (gx, gy)
            }
        }
    }

    /// Draws an unbiased stochastic oracle sample per the noise model.
    pub fn stochastic_gradients<R: Rng + ?Sized>(
        &self,
        noise: &NoiseModel,
        x: &[f64],
        y: &[f64],
        rng: &mut R,
    ) -> Result<OracleSample, Error> {
        self.check_feasible(x, y)?;
        match &noise.kind {
            NoiseKind::None => {
                let (g_x, g_y) = self.gradients_unchecked(x, y);
                Ok(OracleSample { g_x, g_y, noise_draws: 0 })
            }
            NoiseKind::AdditiveGaussian { std } => {
                let (mut g_x, mut g_y) = self.gradients_unchecked(x, y);
                let mut draws = 0;
                for v in g_x.iter_mut().chain(g_y.iter_mut()) {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += std * z;
                    draws += 1;
                }
                Ok(OracleSample { g_x, g_y, noise_draws: draws })
            }
            NoiseKind::ColumnSampling => {
                let a = match &self.kind {
                    ProblemKind::MatrixGame { a } => a,
                    ProblemKind::QuadraticSaddle { .. } => {
                        return Err(Error::Validation(
                            "column-sampling noise applies to matrix games only".into(),
                        ))
                    }
                };
                // E[A e_j] = Aγ when j ~ γ, and E[Aᵀ e_i] = Aᵀx when i ~ x,
                // so single columns/rows are already unbiased.
                let j = sample_index(y, rng);
                let i = sample_index(x, rng);
                Ok(OracleSample { g_x: a.column(j), g_y: a.row(i), noise_draws: 2 })
            }
        }
    }

    /// Duality gap max_{γ'} L(x, γ') − min_{x'} L(x', γ); zero exactly on the
    /// saddle set.
    ///
    /// Matrix games reduce to vertex enumeration and are exact. Quadratic
    /// problems run an exact-tolerance projected gradient when the relevant
    /// curvature matrix is positive definite, and fall back to active-set /
    /// support / trust-region enumeration in dimension ≤ 3 otherwise.
    pub fn saddle_gap(&self, x: &[f64], y: &[f64]) -> Result<f64, Error> {
        self.check_feasible(x, y)?;
        let gap = match &self.kind {
            ProblemKind::MatrixGame { a } => {
                let ax = a.matvec_t(x);
                let ay = a.matvec(y);
                let best_response = ax.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let worst_response = ay.iter().fold(f64::INFINITY, |m, &v| m.min(v));
                best_response - worst_response
            }
            ProblemKind::QuadraticSaddle { p, q, c_mat, c_vec, d_vec } => {
                // max_{γ'} L(x, γ') = ½xᵀPx + cᵀx − min_{γ'} (½γ'ᵀQγ' − (Cᵀx − d)ᵀγ')
                let ctx = c_mat.matvec_t(x);
                let b_y: Vec<f64> = ctx.iter().zip(d_vec).map(|(&v, &d)| d - v).collect();
                let upper = 0.5 * math::dot(x, &p.matvec(x)) + math::dot(c_vec, x)
                    - min_quadratic_over_set(q, &b_y, &self.y_set)?;
                // min_{x'} L(x', γ) = min_{x'} (½x'ᵀPx' + (c + Cγ)ᵀx') − ½γᵀQγ − dᵀγ
                let cy = c_mat.matvec(y);
                let b_x: Vec<f64> = cy.iter().zip(c_vec).map(|(&v, &c)| v + c).collect();
                let lower = min_quadratic_over_set(p, &b_x, &self.x_set)?
                    - 0.5 * math::dot(y, &q.matvec(y))
                    - math::dot(d_vec, y);
                upper - lower
            }
        };
        // The inner solves bracket the gap from below, so tiny negatives at
        // exact saddles are solver round-off.
        if gap < 0.0 && gap > -FEASIBILITY_TOL {
            Ok(0.0)
        } else {
            Ok(gap)
        }
    }

    /// Distance of (x, γ) to the reference saddle set: the Euclidean minimum
    /// together with the Bregman variant V*(x, γ) = min over references of
    /// D_{Rx}(x*, x) + D_{Rγ}(γ*, y).
    pub fn distance_to_saddle_set(
        &self,
        x_map: &MirrorMap,
        y_map: &MirrorMap,
        x: &[f64],
        y: &[f64],
    ) -> Result<(f64, f64), Error> {
        if self.reference_saddles.is_empty() {
            return Err(Error::NoReferenceSaddle);
        }
        let mut best_euclid = f64::INFINITY;
        let mut best_bregman = f64::INFINITY;
        for (xs, ys) in &self.reference_saddles {
            let d2 = math::sq(math::dist2(x, xs)) + math::sq(math::dist2(y, ys));
            best_euclid = best_euclid.min(math::sqrt(d2));
            let v = x_map.bregman(xs, x)? + y_map.bregman(ys, y)?;
            best_bregman = best_bregman.min(v);
        }
        Ok((best_euclid, best_bregman))
    }
}

/// Draws an index from the categorical distribution given by a probability
/// vector (tiny negative entries from feasibility slack are treated as 0).
fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().map(|&w| w.max(0.0)).sum();
    let u: f64 = StandardUniform.sample(rng);
    let target = u * total;
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w.max(0.0);
        if cum >= target {
            return i;
        }
    }
    weights.len() - 1
}

/// One stochastic oracle draw.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    /// Stochastic subgradient in x.
    pub g_x: Vec<f64>,
    /// Stochastic supergradient in γ.
    pub g_y: Vec<f64>,
    /// Number of RNG consumptions behind this sample, for replay bookkeeping.
    pub noise_draws: u32,
}

/// How the stochastic oracle perturbs the exact gradients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NoiseKind {
    /// The oracle returns the exact gradients.
    None,
    /// Independent N(0, std²) noise added to every coordinate.
    AdditiveGaussian { std: f64 },
    /// Matrix games only: gₓ is a single column A e_j with j ~ γ, and g_γ a
    /// single row Aᵀe_i with i ~ x; unbiased by construction.
    ColumnSampling,
}

/// A stochastic oracle model with its second-moment bound
/// K ≥ E[‖sample‖² | iterate] over the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseModel {
    kind: NoiseKind,
    /// Bound K on the conditional second moment of oracle samples.
    pub second_moment_bound: f64,
}

impl NoiseModel {
    /// Degenerate noise: the oracle is the exact gradient map; K = G².
    pub fn none(problem: &SaddleProblem) -> Self {
        NoiseModel { kind: NoiseKind::None, second_moment_bound: math::sq(problem.g_bound()) }
    }

    /// Additive Gaussian noise with per-coordinate deviation `std`;
    /// K = G² + std²·max(n, m).
    pub fn additive_gaussian(problem: &SaddleProblem, std: f64) -> Result<Self, Error> {
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::Validation("gaussian noise needs finite std ≥ 0".into()));
        }
        let dim = problem.x_set().dim().max(problem.y_set().dim()) as f64;
        Ok(NoiseModel {
            kind: NoiseKind::AdditiveGaussian { std },
            second_moment_bound: math::sq(problem.g_bound()) + std * std * dim,
        })
    }

    /// Single-column/row estimates for matrix games;
    /// K = max over the columns of A of ‖Ae_j‖² and rows of ‖Aᵀe_i‖².
    pub fn column_sampling(problem: &SaddleProblem) -> Result<Self, Error> {
        let a = match problem.kind() {
            ProblemKind::MatrixGame { a } => a,
            ProblemKind::QuadraticSaddle { .. } => {
                return Err(Error::Validation(
                    "column-sampling noise applies to matrix games only".into(),
                ))
            }
        };
        let mut k: f64 = 0.0;
        for j in 0..a.cols() {
            let col = a.column(j);
            k = k.max(math::dot(&col, &col));
        }
        for i in 0..a.rows() {
            let row = a.row(i);
            k = k.max(math::dot(&row, &row));
        }
        Ok(NoiseModel { kind: NoiseKind::ColumnSampling, second_moment_bound: k })
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }
}

/// Exact minimum of ½zᵀMz + bᵀz over the set.
///
/// M ≻ 0: projected gradient with step 1/L (L a Gershgorin bound on λmax),
/// run to movement ≤ 1e−13 with a 10⁵ iteration cap. M singular PSD:
/// exhaustive active-set / support / trust-region enumeration, exact but
/// only available in dimension ≤ 3.
fn min_quadratic_over_set(m: &Matrix, b: &[f64], set: &ConstraintSet) -> Result<f64, Error> {
    let dim = set.dim();
    let objective = |z: &[f64]| 0.5 * math::dot(z, &m.matvec(z)) + math::dot(b, z);
    if m.is_pd(1e-10) {
        let mut lipschitz: f64 = 0.0;
        for i in 0..dim {
            let row_sum: f64 = (0..dim).map(|j| math::abs(m.get(i, j))).sum();
            lipschitz = lipschitz.max(row_sum);
        }
        let step = 1.0 / lipschitz;
        let mut z = set.barycenter();
        for _ in 0..100_000 {
            let grad = {
                let mut g = m.matvec(&z);
                for (gi, &bi) in g.iter_mut().zip(b) {
                    *gi += bi;
                }
                g
            };
            let moved: Vec<f64> = z.iter().zip(&grad).map(|(&zi, &gi)| zi - step * gi).collect();
            let next = set.euclidean_project(&moved);
            let movement = math::dist2(&next, &z);
            z = next;
            if movement <= 1e-13 {
                break;
            }
        }
        return Ok(objective(&z));
    }
    if dim > 3 {
        return Err(Error::UnsupportedInnerSolve(format!(
            "exact inner solve needs positive definite curvature or dimension ≤ 3, got singular curvature in dimension {dim}"
        )));
    }
    match set.kind() {
        SetKind::Box { lower, upper } => {
            let mut best = f64::INFINITY;
            // Ternary activity pattern per coordinate: free / at lower / at upper.
            let patterns = 3usize.pow(dim as u32);
            for code in 0..patterns {
                let mut c = code;
                let mut fixed = alloc::vec![None; dim];
                let mut free_idx: Vec<usize> = Vec::new();
                for i in 0..dim {
                    match c % 3 {
                        0 => free_idx.push(i),
                        1 => fixed[i] = Some(lower[i]),
                        _ => fixed[i] = Some(upper[i]),
                    }
                    c /= 3;
                }
                let z = if free_idx.is_empty() {
                    fixed.iter().map(|v| v.unwrap()).collect::<Vec<f64>>()
                } else {
                    // Reduced stationarity M_FF z_F = −(b_F + M_FA z_A).
                    let k = free_idx.len();
                    let mut sub = Matrix::zeros(k, k);
                    let mut rhs = alloc::vec![0.0; k];
                    for (r, &i) in free_idx.iter().enumerate() {
                        let mut acc = b[i];
                        for jj in 0..dim {
                            if let Some(val) = fixed[jj] {
                                acc += m.get(i, jj) * val;
                            }
                        }
                        rhs[r] = -acc;
                        for (s, &j) in free_idx.iter().enumerate() {
                            sub.set(r, s, m.get(i, j));
                        }
                    }
                    match linalg::solve(&sub, &rhs) {
                        // Singular faces are flat along some direction; their
                        // minima reappear on sub-faces with more coordinates
                        // fixed, so skipping loses nothing.
                        None => continue,
                        Some(zf) => {
                            let mut z = alloc::vec![0.0; dim];
                            let mut ok = true;
                            for (r, &i) in free_idx.iter().enumerate() {
                                if zf[r] < lower[i] - 1e-10 || zf[r] > upper[i] + 1e-10 {
                                    ok = false;
                                    break;
                                }
                                z[i] = zf[r].clamp(lower[i], upper[i]);
                            }
                            if !ok {
                                continue;
                            }
                            for i in 0..dim {
                                if let Some(val) = fixed[i] {
                                    z[i] = val;
                                }
                            }
                            z
                        }
                    }
                };
                best = best.min(objective(&z));
            }
            Ok(best)
        }
        SetKind::Simplex => {
            let mut best = f64::INFINITY;
            // Support enumeration: KKT stationarity on each candidate support.
            for mask in 1usize..(1 << dim) {
                let support: Vec<usize> = (0..dim).filter(|i| mask & (1 << i) != 0).collect();
                let k = support.len();
                let mut kkt = Matrix::zeros(k + 1, k + 1);
                let mut rhs = alloc::vec![0.0; k + 1];
                for (r, &i) in support.iter().enumerate() {
                    for (s, &j) in support.iter().enumerate() {
                        kkt.set(r, s, m.get(i, j));
                    }
                    kkt.set(r, k, -1.0);
                    rhs[r] = -b[i];
                }
                for s in 0..k {
                    kkt.set(k, s, 1.0);
                }
                rhs[k] = 1.0;
                let Some(sol) = linalg::solve(&kkt, &rhs) else { continue };
                if sol[..k].iter().any(|&v| v < -1e-10) {
                    continue;
                }
                let mut z = alloc::vec![0.0; dim];
                for (r, &i) in support.iter().enumerate() {
                    z[i] = sol[r].max(0.0);
                }
                best = best.min(objective(&z));
            }
            Ok(best)
        }
        SetKind::Ball { center, radius } => {
            // Diagonalize and solve the trust-region stationarity condition
            // (Λ + μI)w = −β on w = Vᵀ(z − center).
            let (evals, vecs) = linalg::sym_eigen(m);
            let mc = m.matvec(center);
            let shifted: Vec<f64> = mc.iter().zip(b).map(|(&a, &bi)| a + bi).collect();
            let beta = vecs.matvec_t(&shifted);
            let scale = evals.iter().fold(1.0f64, |s, &l| s.max(math::abs(l)));
            let eig_tol = 1e-12 * scale;
            let beta_tol = 1e-12 * (1.0 + math::norm2(&beta));
            let mut stationary_ok = true;
            let mut w: Vec<f64> = alloc::vec![0.0; dim];
            for i in 0..dim {
                if evals[i] > eig_tol {
                    w[i] = -beta[i] / evals[i];
                } else if math::abs(beta[i]) > beta_tol {
                    stationary_ok = false;
                } else {
                    w[i] = 0.0;
                }
            }
            if !(stationary_ok && math::norm2(&w) <= *radius) {
                // Boundary solution: bisect Σ βᵢ²/(λᵢ+μ)² = r² on μ ∈ (0, ‖β‖/r].
                let mut lo = 0.0;
                let mut hi = math::norm2(&beta) / radius;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let phi: f64 = (0..dim)
                        .map(|i| {
                            let denom = evals[i].max(0.0) + mid;
                            (beta[i] / denom) * (beta[i] / denom)
                        })
                        .sum();
                    if phi > radius * radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let mu = 0.5 * (lo + hi);
                for i in 0..dim {
                    w[i] = -beta[i] / (evals[i].max(0.0) + mu);
                }
            }
            let z: Vec<f64> = (0..dim)
                .map(|i| {
                    let mut zi = center[i];
                    for j in 0..dim {
                        zi += vecs.get(i, j) * w[j];
                    }
                    zi
                })
                .collect();
            Ok(objective(&set.euclidean_project(&z)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pennies() -> SaddleProblem {
        SaddleProblem::matching_pennies()
    }

    /// ½x² − ½γ² on [-1,1] balls; saddle at the origin.
    fn scalar_quadratic() -> SaddleProblem {
        SaddleProblem::quadratic_saddle(
            Matrix::identity(1),
            Matrix::identity(1),
            Matrix::zeros(1, 1),
            vec![0.0],
            vec![0.0],
            ConstraintSet::ball(vec![0.0], 1.0).unwrap(),
            ConstraintSet::ball(vec![0.0], 1.0).unwrap(),
            vec![(vec![0.0], vec![0.0])],
        )
        .unwrap()
    }

    #[test]
    fn eval_l_values() {
        let p = pennies();
        assert_eq!(p.eval_l(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(p.eval_l(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        let q = scalar_quadratic();
        let v = q.eval_l(&[0.3], &[0.4]).unwrap();
        assert!((v + 0.035).abs() < 1e-15, "½·0.09 − ½·0.16 = −0.035, got {v}");
        assert!(matches!(p.eval_l(&[2.0, -1.0], &[0.5, 0.5]), Err(Error::Feasibility(_))));
    }

    #[test]
    fn gradient_values() {
        let p = pennies();
        let (gx, gy) = p.gradients(&[0.5, 0.5], &[0.6, 0.4]).unwrap();
        assert!((gx[0] - 0.2).abs() < 1e-15 && (gx[1] + 0.2).abs() < 1e-15);
        assert!(gy[0].abs() < 1e-15 && gy[1].abs() < 1e-15);
        let (gx, gy) = p.gradients(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!(gx.iter().chain(&gy).all(|v| v.abs() < 1e-15), "saddle has zero gradients");
        let q = scalar_quadratic();
        let (gx, gy) = q.gradients(&[0.3], &[0.4]).unwrap();
        assert!((gx[0] - 0.3).abs() < 1e-15 && (gy[0] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let q = SaddleProblem::quadratic_saddle(
            Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            Matrix::identity(2),
            Matrix::from_rows(&[vec![0.5, -0.2], vec![0.1, 0.3]]).unwrap(),
            vec![0.1, -0.05],
            vec![0.02, 0.08],
            ConstraintSet::ball(vec![0.0, 0.0], 2.0).unwrap(),
            ConstraintSet::ball(vec![0.0, 0.0], 2.0).unwrap(),
            vec![],
        )
        .unwrap();
        let x = [0.3, -0.1];
        let y = [0.2, 0.4];
        let (gx, gy) = q.gradients(&x, &y).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (q.eval_l_unchecked(&xp, &y) - q.eval_l_unchecked(&xm, &y)) / (2.0 * h);
            assert!(
                (fd - gx[i]).abs() <= 1e-6 * (1.0 + gx[i].abs()),
                "∂L/∂x{i}: fd {fd} vs exact {}",
                gx[i]
            );
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[i] += h;
            ym[i] -= h;
            let fd = (q.eval_l_unchecked(&x, &yp) - q.eval_l_unchecked(&x, &ym)) / (2.0 * h);
            assert!(
                (fd - gy[i]).abs() <= 1e-6 * (1.0 + gy[i].abs()),
                "∂L/∂γ{i}: fd {fd} vs exact {}",
                gy[i]
            );
        }
    }

    #[test]
    fn psd_validation_rejects_indefinite_curvature() {
        let err = SaddleProblem::quadratic_saddle(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap(),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            vec![],
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn reference_saddle_validation_rejects_non_saddles() {
        let a = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let err = SaddleProblem::matrix_game(a, vec![(vec![1.0, 0.0], vec![1.0, 0.0])]);
        assert!(
            matches!(err, Err(Error::Validation(_))),
            "(e₁, e₁) is not a saddle of matching pennies"
        );
    }

    #[test]
    fn stochastic_gradients_none_equals_exact() {
        let p = pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = NoiseModel::none(&p);
        let s = p.stochastic_gradients(&noise, &[0.5, 0.5], &[0.6, 0.4], &mut rng).unwrap();
        let (gx, gy) = p.gradients(&[0.5, 0.5], &[0.6, 0.4]).unwrap();
        assert_eq!((s.g_x, s.g_y, s.noise_draws), (gx, gy, 0));
    }

    #[test]
    fn gaussian_noise_is_unbiased() {
        let p = pennies();
        let noise = NoiseModel::additive_gaussian(&p, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (gx, _) = p.gradients(&[0.5, 0.5], &[0.6, 0.4]).unwrap();
        let trials = 1_000_000usize;
        let mut mean = vec![0.0; 2];
        for _ in 0..trials {
            let s = p.stochastic_gradients(&noise, &[0.5, 0.5], &[0.6, 0.4], &mut rng).unwrap();
            for (m, v) in mean.iter_mut().zip(&s.g_x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= trials as f64;
        }
        let band = 3.0 * 0.1 / (trials as f64).sqrt();
        for (m, g) in mean.iter().zip(&gx) {
            assert!((m - g).abs() <= band, "empirical mean {m} strays from {g} beyond ±{band}");
        }
    }

    #[test]
    fn column_sampling_degenerate_distribution() {
        let p = pennies();
        let noise = NoiseModel::column_sampling(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = p.stochastic_gradients(&noise, &[0.5, 0.5], &[1.0, 0.0], &mut rng).unwrap();
            assert_eq!(s.g_x, vec![1.0, -1.0], "γ = e₁ forces column 1 of A");
            assert_eq!(s.noise_draws, 2);
        }
        assert!((noise.second_moment_bound - 2.0).abs() < 1e-12, "columns of A all have norm² = 2");
    }

    #[test]
    fn column_sampling_rejects_quadratic_problems() {
        let q = scalar_quadratic();
        assert!(matches!(NoiseModel::column_sampling(&q), Err(Error::Validation(_))));
    }

    #[test]
    fn saddle_gap_values() {
        let p = pennies();
        assert_eq!(p.saddle_gap(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(p.saddle_gap(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
        let q = scalar_quadratic();
        let gap = q.saddle_gap(&[0.3], &[0.4]).unwrap();
        assert!((gap - 0.125).abs() < 1e-9, "½(0.09 + 0.16) = 0.125, got {gap}");
    }

    #[test]
    fn saddle_gap_singular_enumeration_paths() {
        // Singular P on a box: L = ½x₁² + x·(−1,−1)ᵀ-like linear part via c.
        let boxy = SaddleProblem::quadratic_saddle(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            vec![-1.0, -1.0],
            vec![0.0, 0.0],
            ConstraintSet::box_set(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            vec![],
        )
        .unwrap();
        // min over the box of ½x₁² − x₁ − x₂ is attained at (1, 1) = −1.5;
        // the γ inner problem is strongly concave with max 0 at γ = 0.
        let gap = boxy.saddle_gap(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((gap - 1.5).abs() < 1e-9, "gap should be 0 − (−1.5) = 1.5, got {gap}");

        // Singular Q on a simplex: linear maximization picks the best vertex.
        let simp = SaddleProblem::quadratic_saddle(
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 2),
            vec![0.0, 0.0],
            vec![-0.3, -0.7],
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            ConstraintSet::simplex(2).unwrap(),
            vec![],
        )
        .unwrap();
        // max_γ (−dᵀγ) over the simplex = 0.7 at e₂, while
        // min_x L(x, γ) = 0 − dᵀγ = 0.5 at x = 0.
        let gap = simp.saddle_gap(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        let expected = 0.7 - 0.5;
        assert!(
            (gap - expected).abs() < 1e-9,
            "vertex enumeration should give {expected}, got {gap}"
        );

        // Singular curvature on a ball: minimize a linear form exactly.
        let bally = SaddleProblem::quadratic_saddle(
            Matrix::zeros(2, 2),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            vec![3.0, 4.0],
            vec![0.0, 0.0],
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            vec![],
        )
        .unwrap();
        // min over the unit ball of (3,4)ᵀx = −5.
        let gap = bally.saddle_gap(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((gap - 5.0).abs() < 1e-9, "trust-region enumeration should give 5, got {gap}");
    }

    #[test]
    fn saddle_gap_unsupported_in_high_singular_dimension() {
        let dim = 4;
        let problem = SaddleProblem::quadratic_saddle(
            Matrix::zeros(dim, dim),
            Matrix::identity(dim),
            Matrix::zeros(dim, dim),
            vec![1.0; dim],
            vec![0.0; dim],
            ConstraintSet::ball(vec![0.0; dim], 1.0).unwrap(),
            ConstraintSet::ball(vec![0.0; dim], 1.0).unwrap(),
            vec![],
        )
        .unwrap();
        let x = vec![0.0; dim];
        assert!(matches!(problem.saddle_gap(&x, &x), Err(Error::UnsupportedInnerSolve(_))));
    }

    #[test]
    fn distance_values() {
        let p = pennies();
        let quad = MirrorMap::quadratic();
        let ent = MirrorMap::entropic();
        let (d0, v0) = p.distance_to_saddle_set(&quad, &quad, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!((d0, v0), (0.0, 0.0));
        let (d, v) = p.distance_to_saddle_set(&quad, &quad, &[0.6, 0.4], &[0.5, 0.5]).unwrap();
        assert!((d - 0.14142135623730953).abs() < 1e-12, "‖(0.1, −0.1)‖ expected, got {d}");
        assert!((v - 0.01).abs() < 1e-14, "½‖Δ‖² = 0.01 expected, got {v}");
        let (_, kl) = p.distance_to_saddle_set(&ent, &ent, &[0.6, 0.4], &[0.5, 0.5]).unwrap();
        assert!(
            (kl - 0.020410997260127586).abs() < 1e-12,
            "KL((½,½)‖(0.6,0.4)) expected, got {kl}"
        );
        let no_refs = SaddleProblem::matrix_game(
            Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap(),
            vec![],
        )
        .unwrap();
        assert!(matches!(
            no_refs.distance_to_saddle_set(&quad, &quad, &[0.5, 0.5], &[0.5, 0.5]),
            Err(Error::NoReferenceSaddle)
        ));
    }

    #[test]
    fn gradient_bound_covers_samples() {
        let p = pennies();
        // ‖Aγ‖ ≤ √2 on the simplex, so G sits between √2·something ≤ 1.1·√2.
        assert!(
            p.g_bound() > 1.0 && p.g_bound() <= 1.1 * core::f64::consts::SQRT_2 + 1e-12,
            "G = {} outside the expected range",
            p.g_bound()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let x = p.x_set().sample(&mut rng);
            let y = p.y_set().sample(&mut rng);
            let (gx, gy) = p.gradients(&x, &y).unwrap();
            assert!(math::norm2(&gx) <= p.g_bound() && math::norm2(&gy) <= p.g_bound());
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = pennies();
        let b = pennies();
        assert_eq!(a, b, "fixed construction seed must give identical problems");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bifunction_is_convex_concave(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = pennies();
            let x1 = p.x_set().sample(&mut rng);
            let x2 = p.x_set().sample(&mut rng);
            let y1 = p.y_set().sample(&mut rng);
            let y2 = p.y_set().sample(&mut rng);
            let theta: f64 = StandardUniform.sample(&mut rng);
            let xm: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            let ym: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            let lhs = p.eval_l(&xm, &y1).unwrap();
            let rhs = theta * p.eval_l(&x1, &y1).unwrap() + (1.0 - theta) * p.eval_l(&x2, &y1).unwrap();
            prop_assert!(lhs <= rhs + 1e-10, "convexity in x violated: {lhs} > {rhs}");
            let lhs = p.eval_l(&x1, &ym).unwrap();
            let rhs = theta * p.eval_l(&x1, &y1).unwrap() + (1.0 - theta) * p.eval_l(&x1, &y2).unwrap();
            prop_assert!(lhs >= rhs - 1e-10, "concavity in γ violated: {lhs} < {rhs}");
        }

        #[test]
        fn gap_nonnegative_at_random_points(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = pennies();
            let x = p.x_set().sample(&mut rng);
            let y = p.y_set().sample(&mut rng);
            prop_assert!(p.saddle_gap(&x, &y).unwrap() >= 0.0);
        }
    }
}
