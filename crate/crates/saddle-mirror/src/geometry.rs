//! Mirror maps, Bregman divergences, and cone projections in the Riemannian
//! metric ⟨u, v⟩_x = uᵀ∇²R(x)v.
//!
//! A mirror map is a strongly convex generator R whose gradient ∇R and
//! constrained conjugate ∇R̄*(y) = argmax_{z ∈ Z} ⟨z, y⟩ − R(z) define the
//! geometry of a descent step: x₁ = ∇R̄*(∇R(x) + α d). Two separable
//! generators are provided,
//!
//! ```text
//! entropic   R(x) = Σᵢ xᵢ ln xᵢ        (simplex only, ∇²R = diag(1/xᵢ))
//! quadratic  R(x) = ½‖x‖₂²             (any set,      ∇²R = I)
//! ```
//!
//! Diagonal Hessians keep every metric projection here either closed-form or
//! an exact piecewise-linear solve; nothing in this module iterates to a
//! tolerance.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StandardUniform};
use serde::Serialize;

use crate::error::Error;
use crate::math;

/// Tolerance at which conjugate-step and projection outputs satisfy set
/// membership.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// A coordinate or face counts as active when within this distance of its
/// bound.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Feasibility tolerance applied to caller-supplied anchor points.
pub const DOMAIN_TOL: f64 = 1e-8;

/// The shape of a compact convex feasible set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SetKind {
    /// Probability simplex {x : xᵢ ≥ 0, Σ xᵢ = 1}.
    Simplex,
    /// Axis-aligned box {x : lowerᵢ ≤ xᵢ ≤ upperᵢ}.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball {x : ‖x − center‖₂ ≤ radius}.
    Ball { center: Vec<f64>, radius: f64 },
}

/// A nonempty compact convex feasible set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSet {
    kind: SetKind,
    dim: usize,
}

impl ConstraintSet {
    /// Probability simplex of the given dimension.
    pub fn simplex(dim: usize) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::Validation("simplex dimension must be positive".into()));
        }
        Ok(ConstraintSet { kind: SetKind::Simplex, dim })
    }

    /// Axis-aligned box; requires lower ≤ upper componentwise.
    pub fn box_set(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, Error> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Validation(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::Validation(format!(
                    "box bound {i} violates lower ≤ upper (finite): [{l}, {u}]"
                )));
            }
        }
        let dim = lower.len();
        Ok(ConstraintSet { kind: SetKind::Box { lower, upper }, dim })
    }

    /// Euclidean ball; requires radius > 0.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, Error> {
        if center.is_empty() {
            return Err(Error::Validation("ball center must be nonempty".into()));
        }
        if !(radius.is_finite() && radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("ball needs finite center and radius > 0".into()));
        }
        let dim = center.len();
        Ok(ConstraintSet { kind: SetKind::Ball { center, radius }, dim })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Membership test with tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.kind {
            SetKind::Simplex => {
                let sum: f64 = x.iter().sum();
                x.iter().all(|&v| v >= -tol) && math::abs(sum - 1.0) <= tol
            }
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol),
            SetKind::Ball { center, radius } => math::dist2(x, center) <= radius + tol,
        }
    }

    /// Canonical interior point: uniform simplex point, box midpoint, or ball
    /// center.
    pub fn barycenter(&self) -> Vec<f64> {
        match &self.kind {
            SetKind::Simplex => vec![1.0 / self.dim as f64; self.dim],
            SetKind::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(&l, &u)| 0.5 * (l + u)).collect()
            }
            SetKind::Ball { center, .. } => center.clone(),
        }
    }

    /// Draws a feasible point: flat Dirichlet on the simplex, uniform on a
    /// box, uniform in a ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SetKind::Simplex => {
                let mut e: Vec<f64> = (0..self.dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                for v in &mut e {
                    *v /= s;
                }
                e
            }
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| {
                    let t: f64 = StandardUniform.sample(rng);
                    l + t * (u - l)
                })
                .collect(),
            SetKind::Ball { center, radius } => {
                let g: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = math::norm2(&g);
                if norm < 1e-300 {
                    return center.clone();
                }
                let u: f64 = StandardUniform.sample(rng);
                let scale = radius * math::pow(u, 1.0 / self.dim as f64) / norm;
                center.iter().zip(&g).map(|(&c, &gi)| c + scale * gi).collect()
            }
        }
    }

    /// Nearest point of the set in ‖·‖₂: sort-and-threshold on the simplex,
    /// clamping on a box, radial scaling on a ball.
    pub fn euclidean_project(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.dim, "projection dimension mismatch");
        match &self.kind {
            SetKind::Simplex => {
                let mut sorted = p.to_vec();
                sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite entries"));
                let mut cumsum = 0.0;
                let mut tau = 0.0;
                for (k, &v) in sorted.iter().enumerate() {
                    cumsum += v;
                    let candidate = (cumsum - 1.0) / (k + 1) as f64;
                    if v - candidate > 0.0 {
                        tau = candidate;
                    }
                }
                p.iter().map(|&v| (v - tau).max(0.0)).collect()
            }
            SetKind::Box { lower, upper } => {
                p.iter().zip(lower.iter().zip(upper)).map(|(&v, (&l, &u))| v.clamp(l, u)).collect()
            }
            SetKind::Ball { center, radius } => {
                let dist = math::dist2(p, center);
                if dist <= *radius {
                    p.to_vec()
                } else {
                    let scale = radius / dist;
                    center.iter().zip(p).map(|(&c, &v)| c + scale * (v - c)).collect()
                }
            }
        }
    }

    /// Metric projection of `v` onto the tangent cone T(x): the minimizer of
    /// Σᵢ weightsᵢ (νᵢ − vᵢ)² over feasible directions ν at `x`.
    ///
    /// Simplex: T(x) = {ν : Σνᵢ = 0, νᵢ ≥ 0 where xᵢ is active}; solved
    /// exactly by walking the breakpoints of the piecewise-linear KKT
    /// stationarity condition. Box: componentwise clamping at active faces
    /// (the diagonal metric decouples coordinates). Ball: identity in the
    /// interior; on the boundary, removal of a positive outward component in
    /// the weighted metric.
    pub fn tangent_project(
        &self,
        x: &[f64],
        v: &[f64],
        weights: &MetricWeights,
    ) -> Result<Vec<f64>, Error> {
        if x.len() != self.dim || v.len() != self.dim || weights.diag.len() != self.dim {
            return Err(Error::Validation(format!(
                "tangent_project dimension mismatch: set dim {}, x {}, v {}, weights {}",
                self.dim,
                x.len(),
                v.len(),
                weights.diag.len()
            )));
        }
        if !self.contains(x, DOMAIN_TOL) {
            return Err(Error::Domain("tangent cone anchor lies outside the set".into()));
        }
        match &self.kind {
            SetKind::Simplex => Ok(simplex_tangent_project(x, v, &weights.diag)),
            SetKind::Box { lower, upper } => {
                let nu = x
                    .iter()
                    .zip(v)
                    .zip(lower.iter().zip(upper))
                    .zip(&weights.diag)
                    .map(|(((&xi, &vi), (&l, &u)), _w)| {
                        let at_lower = xi <= l + ACTIVE_TOL;
                        let at_upper = xi >= u - ACTIVE_TOL;
                        match (at_lower, at_upper) {
                            (true, true) => 0.0,
                            (true, false) => vi.max(0.0),
                            (false, true) => vi.min(0.0),
                            (false, false) => vi,
                        }
                    })
                    .collect();
                Ok(nu)
            }
            SetKind::Ball { center, radius } => {
                let dist = math::dist2(x, center);
                if dist < radius - ACTIVE_TOL {
                    return Ok(v.to_vec());
                }
                let normal: Vec<f64> = x.iter().zip(center).map(|(&a, &c)| a - c).collect();
                let s = math::dot(&normal, v);
                if s <= 0.0 {
                    return Ok(v.to_vec());
                }
                // ν = v − (⟨n, v⟩ / ⟨n, W⁻¹n⟩) W⁻¹n removes the outward
                // component in the weighted metric.
                let winv_n: Vec<f64> =
                    normal.iter().zip(&weights.diag).map(|(&n, &w)| n / w).collect();
                let denom = math::dot(&normal, &winv_n);
                let t = s / denom;
                Ok(v.iter().zip(&winv_n).map(|(&vi, &wn)| vi - t * wn).collect())
            }
        }
    }
}

/// Exact weighted projection onto {ν : Σν = 0, νᵢ ≥ 0 for active i}.
///
/// Stationarity gives νᵢ = vᵢ − λ/wᵢ on free coordinates and
/// νᵢ = max(0, vᵢ − λ/wᵢ) on active ones; g(λ) = Σνᵢ(λ) is strictly
/// decreasing (at least one coordinate is always free since Σx = 1), so the
/// unique root is found by descending through the breakpoints λᵢ = wᵢvᵢ.
fn simplex_tangent_project(x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let mut sum_v = 0.0;
    let mut sum_winv = 0.0;
    let mut breakpoints: Vec<(f64, usize)> = Vec::new();
    for i in 0..dim {
        if x[i] <= ACTIVE_TOL {
            breakpoints.push((w[i] * v[i], i));
        } else {
            sum_v += v[i];
            sum_winv += 1.0 / w[i];
        }
    }
    breakpoints.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).expect("finite breakpoints"));
    let mut lambda = sum_v / sum_winv;
    for &(bp, i) in &breakpoints {
        if lambda >= bp {
            break;
        }
        sum_v += v[i];
        sum_winv += 1.0 / w[i];
        lambda = sum_v / sum_winv;
    }
    (0..dim)
        .map(|i| {
            let step = v[i] - lambda / w[i];
            if x[i] <= ACTIVE_TOL {
                step.max(0.0)
            } else {
                step
            }
        })
        .collect()
}

/// Which strongly convex generator a [`MirrorMap`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MapKind {
    /// R(x) = Σ xᵢ ln xᵢ, paired with the probability simplex only.
    Entropic,
    /// R(x) = ½‖x‖₂², paired with any constraint set.
    Quadratic,
}

/// A strongly convex generator R together with its curvature bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirrorMap {
    kind: MapKind,
    /// Strong-convexity modulus of R w.r.t. ‖·‖₂ on the paired set.
    pub sigma_r: f64,
    /// Smoothness modulus of R; for the entropic map this is the finite
    /// bound 1/interior_floor induced by boundary clipping.
    pub rho_r: f64,
    /// Entropic iterates are floored at interior_floor and renormalized to
    /// guard against floating-point underflow at the simplex boundary; after
    /// renormalization entries stay ≥ interior_floor/(1 + dim·interior_floor).
    pub interior_floor: f64,
}

impl MirrorMap {
    /// Negative entropy on the simplex. σ_R = 1 w.r.t. ‖·‖₂ because the
    /// Hessian entries 1/xᵢ are ≥ 1 there; ρ_R is the clipped bound 1/ε.
    pub fn entropic() -> Self {
        let floor = 1e-12;
        MirrorMap {
            kind: MapKind::Entropic,
            sigma_r: 1.0,
            rho_r: 1.0 / floor,
            interior_floor: floor,
        }
    }

    /// Half squared Euclidean norm; σ_R = ρ_R = 1 on any set.
    pub fn quadratic() -> Self {
        MirrorMap { kind: MapKind::Quadratic, sigma_r: 1.0, rho_r: 1.0, interior_floor: 0.0 }
    }

    /// Replaces the entropic boundary clip; ε = 0 disables clipping and
    /// makes ρ_R infinite.
    pub fn with_interior_floor(mut self, eps: f64) -> Result<Self, Error> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Validation("interior_floor must be finite and ≥ 0".into()));
        }
        self.interior_floor = eps;
        if self.kind == MapKind::Entropic {
            self.rho_r = if eps > 0.0 { 1.0 / eps } else { f64::INFINITY };
        }
        Ok(self)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    /// ∇R(x): entropic (1 + ln xᵢ)ᵢ, quadratic x.
    pub fn grad_r(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        match self.kind {
            MapKind::Entropic => x
                .iter()
                .map(|&v| {
                    if v <= 0.0 {
                        Err(Error::Domain(format!("entropic gradient needs xᵢ > 0, got {v}")))
                    } else {
                        Ok(1.0 + math::ln(v))
                    }
                })
                .collect(),
            MapKind::Quadratic => Ok(x.to_vec()),
        }
    }

    /// Diagonal of ∇²R(x): entropic (1/xᵢ)ᵢ, quadratic all ones.
    pub fn hessian_diag(&self, x: &[f64]) -> Result<MetricWeights, Error> {
        match self.kind {
            MapKind::Entropic => {
                let diag: Result<Vec<f64>, Error> = x
                    .iter()
                    .map(|&v| {
                        if v <= 0.0 {
                            Err(Error::Domain(format!("entropic Hessian needs xᵢ > 0, got {v}")))
                        } else {
                            Ok(1.0 / v)
                        }
                    })
                    .collect();
                Ok(MetricWeights { diag: diag? })
            }
            MapKind::Quadratic => Ok(MetricWeights { diag: vec![1.0; x.len()] }),
        }
    }

    /// Constrained conjugate gradient ∇R̄*(y) = argmax_{z ∈ set} ⟨z, y⟩ − R(z).
    ///
    /// Entropic/simplex: softmax of y (shifted by max for overflow safety),
    /// then clipped to the interior floor. Quadratic/any set: the Euclidean
    /// projection of y.
    pub fn conjugate_step(&self, set: &ConstraintSet, y: &[f64]) -> Result<Vec<f64>, Error> {
        if y.len() != set.dim() {
            return Err(Error::Validation(format!(
                "conjugate_step dimension mismatch: set dim {}, y {}",
                set.dim(),
                y.len()
            )));
        }
        match (self.kind, set.kind()) {
            (MapKind::Entropic, SetKind::Simplex) => {
                let shift = y.iter().fold(f64::NEG_INFINITY, |m, &v| if v > m { v } else { m });
                let mut z: Vec<f64> = y.iter().map(|&v| math::exp(v - shift)).collect();
                let s: f64 = z.iter().sum();
                for zi in &mut z {
                    *zi /= s;
                }
                Ok(self.interior_clip(set, z))
            }
            (MapKind::Quadratic, _) => Ok(set.euclidean_project(y)),
            (MapKind::Entropic, _) => Err(Error::UnsupportedPairing(
                "the entropic map pairs only with the probability simplex".into(),
            )),
        }
    }

    /// One mirror step x₁ = ∇R̄*(∇R(x) + α d). α = 0 reproduces x up to one
    /// conjugate round-trip (within 1e−12).
    pub fn mirror_update(
        &self,
        set: &ConstraintSet,
        x: &[f64],
        d: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>, Error> {
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::Validation(format!("mirror step needs finite α ≥ 0, got {alpha}")));
        }
        if d.len() != x.len() {
            return Err(Error::Validation("direction and point dimensions differ".into()));
        }
        let theta = self.grad_r(x)?;
        let shifted: Vec<f64> = theta.iter().zip(d).map(|(&t, &di)| t + alpha * di).collect();
        self.conjugate_step(set, &shifted)
    }

    /// Bregman divergence D_R(ref, x) = R(ref) − R(x) − ⟨∇R(x), ref − x⟩.
    ///
    /// The reference may touch the entropic boundary (0 ln 0 = 0); x must be
    /// strictly interior.
    pub fn bregman(&self, ref_point: &[f64], x: &[f64]) -> Result<f64, Error> {
        if ref_point.len() != x.len() {
            return Err(Error::Validation("bregman operands differ in dimension".into()));
        }
        match self.kind {
            MapKind::Entropic => {
                let mut d = 0.0;
                for (&r, &xi) in ref_point.iter().zip(x) {
                    if xi <= 0.0 {
                        return Err(Error::Domain(format!(
                            "bregman needs xᵢ > 0 for the entropic map, got {xi}"
                        )));
                    }
                    if r < 0.0 {
                        return Err(Error::Domain(format!(
                            "bregman reference needs refᵢ ≥ 0 for the entropic map, got {r}"
                        )));
                    }
                    let r_ln_r = if r == 0.0 { 0.0 } else { r * math::ln(r) };
                    d += r_ln_r - xi * math::ln(xi) - (1.0 + math::ln(xi)) * (r - xi);
                }
                Ok(d)
            }
            MapKind::Quadratic => {
                let diff: f64 = ref_point.iter().zip(x).map(|(&r, &xi)| (r - xi) * (r - xi)).sum();
                Ok(0.5 * diff)
            }
        }
    }

    /// Clips an entropic/simplex point into {xᵢ ≥ interior_floor} and
    /// renormalizes; a no-op for every other pairing or when the floor is 0.
    pub fn interior_clip(&self, set: &ConstraintSet, mut z: Vec<f64>) -> Vec<f64> {
        if self.kind != MapKind::Entropic
            || self.interior_floor <= 0.0
            || !matches!(set.kind(), SetKind::Simplex)
        {
            return z;
        }
        let floor = self.interior_floor;
        if z.iter().all(|&v| v >= floor) {
            return z;
        }
        for v in &mut z {
            if *v < floor {
                *v = floor;
            }
        }
        let s: f64 = z.iter().sum();
        for v in &mut z {
            *v /= s;
        }
        z
    }
}

/// Strictly positive diagonal of ∇²R at a point; the weights of the local
/// metric ⟨u, v⟩_x = Σᵢ diagᵢ uᵢvᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricWeights {
    pub diag: Vec<f64>,
}

impl MetricWeights {
    /// Validating constructor; entries must be strictly positive and finite.
    pub fn new(diag: Vec<f64>) -> Result<Self, Error> {
        if diag.is_empty() || diag.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::Validation(
                "metric weights must be finite and strictly positive".into(),
            ));
        }
        Ok(MetricWeights { diag })
    }

    /// ⟨u, v⟩_W = Σ wᵢ uᵢ vᵢ.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.diag.iter().zip(u.iter().zip(v)).map(|(&w, (&a, &b))| w * a * b).sum()
    }

    /// ‖u‖_W = √⟨u, u⟩_W.
    pub fn norm(&self, u: &[f64]) -> f64 {
        math::sqrt(self.inner(u, u))
    }
}

/// Deviation of the rescaled mirror step from its tangent-projected limit:
/// for each α, ‖(∇R̄*(∇R(x) + αd) − x)/α − P_T(∇²R(x)⁻¹ d)‖₂.
///
/// As α ↓ 0 the quotient converges to the metric projection of ∇²R(x)⁻¹d
/// onto the tangent cone, so the deviations shrink with α.
pub fn gateaux_check(
    map: &MirrorMap,
    set: &ConstraintSet,
    x: &[f64],
    d: &[f64],
    alphas: &[f64],
) -> Result<Vec<(f64, f64)>, Error> {
    if alphas.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(Error::Validation("gateaux_check needs strictly positive step sizes".into()));
    }
    let weights = map.hessian_diag(x)?;
    let scaled: Vec<f64> = d.iter().zip(&weights.diag).map(|(&di, &w)| di / w).collect();
    let target = set.tangent_project(x, &scaled, &weights)?;
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let x1 = map.mirror_update(set, x, d, alpha)?;
        let quotient: Vec<f64> = x1.iter().zip(x).map(|(&a, &b)| (a - b) / alpha).collect();
        let dev = math::dist2(&quotient, &target);
        out.push((alpha, dev));
    }
    Ok(out)
}

/// Estimates the equivalence constants between ‖·‖_x and ‖·‖₂ over the set:
/// returns (κ₁, κ₂) with κ₂‖u‖₂ ≤ ‖u‖ₓ ≤ κ₁‖u‖₂, computed as the square
/// roots of the extreme Hessian-diagonal entries over sampled points.
///
/// The first sampled point is always the set's barycenter; the remaining
/// `sample_count − 1` are drawn from `rng` and clipped to the map's interior
/// floor, so for the entropic map κ₁² never exceeds 1/interior_floor.
pub fn norm_equivalence_bounds<R: Rng + ?Sized>(
    map: &MirrorMap,
    set: &ConstraintSet,
    sample_count: usize,
    rng: &mut R,
) -> (f64, f64) {
    let count = sample_count.max(1);
    let mut max_entry = f64::NEG_INFINITY;
    let mut min_entry = f64::INFINITY;
    for k in 0..count {
        let point = if k == 0 { set.barycenter() } else { map.interior_clip(set, set.sample(rng)) };
        let weights = map.hessian_diag(&point).expect("sampled points are interior");
        for &w in &weights.diag {
            if w > max_entry {
                max_entry = w;
            }
            if w < min_entry {
                min_entry = w;
            }
        }
    }
    (math::sqrt(max_entry), math::sqrt(min_entry))
}

/// Human-readable tag used in a couple of diagnostics; avoids `Debug` noise.
pub fn set_kind_name(set: &ConstraintSet) -> String {
    match set.kind() {
        SetKind::Simplex => "simplex".into(),
        SetKind::Box { .. } => "box".into(),
        SetKind::Ball { .. } => "ball".into(),
    }
}
