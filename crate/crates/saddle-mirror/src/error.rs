//! Error type shared by every layer of the crate.

use alloc::string::String;

/// Failure modes of geometry, problem, solver, and dynamics operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A point lies outside the domain an operation requires (e.g. an
    /// entropic gradient at a boundary point, or a cone projection anchored
    /// at an infeasible point).
    Domain(String),
    /// The mirror map cannot be combined with the given constraint set.
    UnsupportedPairing(String),
    /// A point violates problem feasibility beyond tolerance.
    Feasibility(String),
    /// The exact inner optimization behind a duality-gap evaluation is not
    /// available for this problem (singular curvature in dimension > 3).
    UnsupportedInnerSolve(String),
    /// The problem carries no reference saddles, so saddle-relative
    /// diagnostics cannot be computed.
    NoReferenceSaddle,
    /// A configuration value violates its contract; the message lists every
    /// violation found.
    Validation(String),
    /// A query time falls outside the range covered by an interpolated
    /// trajectory.
    OutOfRange(String),
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::UnsupportedPairing(msg) => write!(f, "unsupported pairing: {msg}"),
            Error::Feasibility(msg) => write!(f, "feasibility error: {msg}"),
            Error::UnsupportedInnerSolve(msg) => write!(f, "unsupported inner solve: {msg}"),
            Error::NoReferenceSaddle => write!(f, "problem has no reference saddles"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
