//! Constrained convex-concave saddle-point solvers built on mirror-descent
//! geometry, together with the continuous-time projected dynamics they
//! discretize.
//!
//! The problem class is
//!
//! ```text
//! min over x ∈ X   max over γ ∈ Y   L(x, γ)
//! ```
//!
//! with X, Y compact convex sets (probability simplices, boxes, Euclidean
//! balls) and L convex in x, concave in γ. The crate is organized in layers:
//!
//! * [`geometry`]: mirror maps R, Bregman divergences D_R, and tangent-cone
//!   projections taken in the Riemannian metric ⟨u, v⟩_x = uᵀ∇²R(x)v.
//! * [`problems`]: matrix games and quadratic saddle problems with exact
//!   gradients, stochastic oracles, duality gaps, and reference saddles.
//! * [`zeroth_order`]: Gaussian-smoothing gradient estimation from function
//!   values only, with bias and second-moment probes.
//! * [`solvers`]: the stochastic saddle-point mirror-descent loop (SSPMD)
//!   and its zeroth-order variant (SZSPMD), producing replayable traces.
//! * [`dynamics`]: the projected saddle-point flow
//!   ẋ = P_{T_X(x)}(−∇²R(x)⁻¹ gₓ), viable integrators, Lyapunov
//!   diagnostics, and pseudotrajectory comparison of traces against the flow.
//!
//! Randomness is always caller-supplied and all floating-point math routes
//! through [`libm`], so identical seeds give bit-identical results with and
//! without the `std` feature. `std` (default) only adds wall-clock timing on
//! solver traces; the crate otherwise works on `no_std` targets with `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
mod math;
pub mod problems;
pub mod solvers;
pub mod zeroth_order;

pub use error::Error;
