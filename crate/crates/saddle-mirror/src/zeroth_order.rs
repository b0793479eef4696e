//! Gaussian-smoothing gradient estimation from bifunction values only.
//!
//! One joint draw u = (uₓ, u_γ) ~ N(0, I_{n+m}) turns two evaluations of L
//! into the estimator
//!
//! ```text
//! s = (L((x,γ) + μu) − L(x,γ)) / μ,      ĝ = s·u = (s·uₓ, s·u_γ)
//! ```
//!
//! which is the forward-difference form of Nesterov's Gaussian smoothing.
//! The scalar s alone has the wrong shape to stand in for a gradient; the
//! bias and second-moment guarantees hold for the s·u product, so that is
//! what [`gaussian_estimate`] returns. Perturbed points may leave the
//! feasible set; the built-in bifunctions are polynomials, so the formula is
//! evaluated there directly rather than projecting (projection would bias
//! the estimate).
//!
//! For the built-in families L is at most quadratic in (x, γ). Gaussian odd
//! moments vanish, so the estimator is exactly unbiased at every μ, not
//! merely up to the usual O(μ) smoothing bias; the probes below still report
//! the bias against a Monte-Carlo band so that non-polynomial extensions get
//! a meaningful check.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Error;
use crate::math;
use crate::problems::SaddleProblem;

/// Smoothing radius μ(n) as a function of the iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SmoothingSchedule {
    /// μ(n) = μ for all n.
    Constant { mu: f64 },
    /// μ(n) = μ₀·ρⁿ with ρ ∈ (0, 1).
    Geometric { mu0: f64, decay: f64 },
}

impl SmoothingSchedule {
    pub fn constant(mu: f64) -> Result<Self, Error> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Validation(String::from("smoothing radius must be finite and > 0")));
        }
        Ok(SmoothingSchedule::Constant { mu })
    }

    pub fn geometric(mu0: f64, decay: f64) -> Result<Self, Error> {
        if !(mu0.is_finite() && mu0 > 0.0) {
            return Err(Error::Validation(String::from(
                "initial smoothing radius must be finite and > 0",
            )));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::Validation(String::from("smoothing decay must lie in (0, 1)")));
        }
        Ok(SmoothingSchedule::Geometric { mu0, decay })
    }

    /// μ(n); strictly positive for every n.
    pub fn mu(&self, n: u64) -> f64 {
        match *self {
            SmoothingSchedule::Constant { mu } => mu,
            SmoothingSchedule::Geometric { mu0, decay } => mu0 * math::pow(decay, n as f64),
        }
    }
}

/// Single-sample Gaussian-smoothing estimate of (gₓ, g_γ) at (x, γ).
///
/// Consumes exactly n+m standard normal draws, x-block first; replaying the
/// RNG replays the estimate bit-for-bit. Callers average if they want
/// batches.
pub fn gaussian_estimate<R: Rng + ?Sized>(
    problem: &SaddleProblem,
    x: &[f64],
    y: &[f64],
    mu: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Validation(String::from("smoothing radius must be finite and > 0")));
    }
    let u_x: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(rng)).collect();
    let u_y: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(rng)).collect();
    let xp: Vec<f64> = x.iter().zip(&u_x).map(|(&v, &u)| v + mu * u).collect();
    let yp: Vec<f64> = y.iter().zip(&u_y).map(|(&v, &u)| v + mu * u).collect();
    let s = (problem.eval_l_unchecked(&xp, &yp) - problem.eval_l_unchecked(x, y)) / mu;
    Ok((u_x.iter().map(|&u| s * u).collect(), u_y.iter().map(|&u| s * u).collect()))
}

/// Monte-Carlo probe of the estimator at a fixed feasible point.
///
/// Returns `(bias_norm, second_moment)` where `bias_norm` is the Euclidean
/// distance between the empirical mean of `samples` estimates and the exact
/// gradients, and `second_moment` is the empirical mean of ‖(ĝₓ, ĝ_γ)‖₂².
/// The Monte-Carlo band 3·√(second_moment/samples) bounds the sampling error
/// of the mean, so `bias_norm` beyond the band signals genuine bias.
pub fn bias_second_moment_probe<R: Rng + ?Sized>(
    problem: &SaddleProblem,
    x: &[f64],
    y: &[f64],
    mu: f64,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64), Error> {
    if samples < 1_000 {
        return Err(Error::Validation(String::from(
            "probe needs at least 1000 samples for a meaningful Monte-Carlo band",
        )));
    }
    let (gx, gy) = problem.gradients(x, y)?;
    let n = x.len();
    let mut mean = alloc::vec![0.0; n + y.len()];
    let mut sq_sum = 0.0;
    for _ in 0..samples {
        let (ex, ey) = gaussian_estimate(problem, x, y, mu, rng)?;
        let mut sq = 0.0;
        for (i, &v) in ex.iter().enumerate() {
            mean[i] += v;
            sq += v * v;
        }
        for (j, &v) in ey.iter().enumerate() {
            mean[n + j] += v;
            sq += v * v;
        }
        sq_sum += sq;
    }
    let inv = 1.0 / samples as f64;
    let mut bias_sq = 0.0;
    for (i, m) in mean.iter().enumerate() {
        let target = if i < n { gx[i] } else { gy[i - n] };
        let d = m * inv - target;
        bias_sq += d * d;
    }
    Ok((math::sqrt(bias_sq), sq_sum * inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConstraintSet;
    use crate::linalg::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pennies() -> SaddleProblem {
        SaddleProblem::matching_pennies()
    }

    fn symmetric_quadratic() -> SaddleProblem {
        SaddleProblem::quadratic_saddle(
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            vec![(vec![0.0, 0.0], vec![0.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn schedule_values() {
        let c = SmoothingSchedule::constant(0.05).unwrap();
        assert_eq!(c.mu(0), 0.05);
        assert_eq!(c.mu(1_000_000), 0.05);
        let g = SmoothingSchedule::geometric(1e-3, 0.99995).unwrap();
        assert_eq!(g.mu(0), 1e-3);
        let late = g.mu(100_000);
        assert!(late > 6.5e-6 && late < 7.0e-6, "1e-3·0.99995^1e5 ≈ 6.74e-6, got {late}");
        assert!(g.mu(10) < g.mu(9), "geometric schedule must decay");
    }

    #[test]
    fn schedule_validation() {
        assert!(matches!(SmoothingSchedule::constant(0.0), Err(Error::Validation(_))));
        assert!(matches!(SmoothingSchedule::constant(-1.0), Err(Error::Validation(_))));
        assert!(matches!(SmoothingSchedule::geometric(1e-3, 1.0), Err(Error::Validation(_))));
        assert!(matches!(SmoothingSchedule::geometric(-1e-3, 0.5), Err(Error::Validation(_))));
    }

    #[test]
    fn estimate_rejects_bad_mu() {
        let p = pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gaussian_estimate(&p, &[0.5, 0.5], &[0.5, 0.5], 0.0, &mut rng),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn estimate_replays_bit_for_bit() {
        let p = pennies();
        let a = gaussian_estimate(
            &p,
            &[0.6, 0.4],
            &[0.3, 0.7],
            0.01,
            &mut ChaCha8Rng::seed_from_u64(7),
        )
        .unwrap();
        let b = gaussian_estimate(
            &p,
            &[0.6, 0.4],
            &[0.3, 0.7],
            0.01,
            &mut ChaCha8Rng::seed_from_u64(7),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_matches_gradient_for_bilinear_l() {
        // With γ frozen at a vertex the x-gradient is a fixed column of A;
        // the estimator mean must hit it within the per-coordinate 3σ band.
        let p = pennies();
        let x = [0.5, 0.5];
        let y = [1.0, 0.0];
        let (gx, gy) = p.gradients(&x, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 1_000_000usize;
        let mut mean = [0.0f64; 4];
        let mut sq = [0.0f64; 4];
        for _ in 0..trials {
            let (ex, ey) = gaussian_estimate(&p, &x, &y, 0.01, &mut rng).unwrap();
            for (k, &v) in ex.iter().chain(ey.iter()).enumerate() {
                mean[k] += v;
                sq[k] += v * v;
            }
        }
        let target = [gx[0], gx[1], gy[0], gy[1]];
        for k in 0..4 {
            let m = mean[k] / trials as f64;
            let var = sq[k] / trials as f64 - m * m;
            let band = 3.0 * (var / trials as f64).sqrt();
            assert!(
                (m - target[k]).abs() <= band,
                "coordinate {k}: mean {m} vs exact {} beyond ±{band}",
                target[k]
            );
        }
    }

    #[test]
    fn mean_vanishes_at_symmetric_quadratic_origin() {
        let q = symmetric_quadratic();
        let x = [0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 200_000usize;
        let mut mean = [0.0f64; 4];
        let mut sq = [0.0f64; 4];
        for _ in 0..trials {
            let (ex, ey) = gaussian_estimate(&q, &x, &x, 0.1, &mut rng).unwrap();
            for (k, &v) in ex.iter().chain(ey.iter()).enumerate() {
                mean[k] += v;
                sq[k] += v * v;
            }
        }
        for k in 0..4 {
            let m = mean[k] / trials as f64;
            let var = sq[k] / trials as f64 - m * m;
            let band = 3.0 * (var / trials as f64).sqrt();
            assert!(m.abs() <= band, "coordinate {k}: mean {m} not within ±{band} of 0");
        }
    }

    #[test]
    fn bias_vanishes_for_quadratic_bifunctions_at_both_radii() {
        // L is quadratic, so the smoothing remainder has zero odd Gaussian
        // moments and the estimator is exactly unbiased at every μ. Both
        // radii must land inside their own Monte-Carlo bands; the textbook
        // O(μ) bias ratio is unobservable here.
        let q = symmetric_quadratic();
        let x = [0.3, -0.2];
        let y = [0.1, 0.4];
        for (seed, mu) in [(17u64, 0.1f64), (19u64, 0.01f64)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (bias, second) =
                bias_second_moment_probe(&q, &x, &y, mu, 200_000, &mut rng).unwrap();
            let band = 3.0 * (second / 200_000.0).sqrt();
            assert!(bias <= band, "μ = {mu}: bias {bias} exceeds Monte-Carlo band {band}");
        }
    }

    #[test]
    fn probe_rejects_small_sample_counts() {
        let p = pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            bias_second_moment_probe(&p, &[0.5, 0.5], &[0.5, 0.5], 0.1, 999, &mut rng),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn probe_bias_near_zero_for_bilinear_l() {
        let p = pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (bias, second) =
            bias_second_moment_probe(&p, &[0.4, 0.6], &[0.7, 0.3], 0.05, 100_000, &mut rng)
                .unwrap();
        let band = 3.0 * (second / 100_000.0).sqrt();
        assert!(bias <= band, "bilinear L: bias {bias} exceeds band {band}");
    }

    #[test]
    fn second_moment_stable_across_radii() {
        let p = pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (_, m_coarse) =
            bias_second_moment_probe(&p, &[0.4, 0.6], &[0.7, 0.3], 0.1, 50_000, &mut rng).unwrap();
        let (_, m_fine) =
            bias_second_moment_probe(&p, &[0.4, 0.6], &[0.7, 0.3], 0.01, 50_000, &mut rng).unwrap();
        let ratio = m_coarse / m_fine;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "second moments {m_coarse} vs {m_fine} differ by more than 2×"
        );
    }

    #[test]
    fn bias_monotone_up_to_band_as_mu_shrinks() {
        let q = symmetric_quadratic();
        let x = [0.3, -0.2];
        let y = [0.1, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut prev: Option<(f64, f64)> = None;
        for mu in [0.5, 0.05, 0.005] {
            let (bias, second) =
                bias_second_moment_probe(&q, &x, &y, mu, 100_000, &mut rng).unwrap();
            let band = 3.0 * (second / 100_000.0).sqrt();
            if let Some((pb, pband)) = prev {
                assert!(
                    bias <= pb + pband + band,
                    "bias {bias} at μ = {mu} rose above previous {pb} beyond the bands"
                );
            }
            prev = Some((bias, band));
        }
    }

    #[test]
    fn second_moment_finite_over_feasible_sample() {
        let p = pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = p.x_set().sample(&mut rng);
            let y = p.y_set().sample(&mut rng);
            let (_, second) = bias_second_moment_probe(&p, &x, &y, 0.05, 1_000, &mut rng).unwrap();
            assert!(second.is_finite(), "second moment diverged at x={x:?}, γ={y:?}");
            worst = worst.max(second);
        }
        assert!(
            worst.is_finite() && worst > 0.0,
            "uniform second-moment cap: empirical max {worst}"
        );
    }
}
