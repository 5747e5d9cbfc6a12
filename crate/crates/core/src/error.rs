use num_complex::Complex64;
use thiserror::Error;

use crate::roots::RootSweep;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The root finder did not meet its residual tolerance.
    #[error("root finder did not converge after {iterations} iterations (worst relative residual {residual:.3e})")]
    RootFinding {
        iterations: usize,
        residual: f64,
        best: Vec<Complex64>,
    },

    /// `tau * s + 1 = 0`: the evaluation point sits on the filter pole.
    #[error("filter pole: tau*s + 1 vanishes at s = {s}, tau = {tau}")]
    FilterPole { s: Complex64, tau: f64 },

    /// `H(s, tau) = 0`: the evaluation point is a closed-loop pole.
    #[error("closed-loop pole: H vanishes at s = {s}, tau = {tau}")]
    Pole { s: Complex64, tau: f64 },

    /// The locus ODE denominator vanishes (stationary point of H in s).
    #[error(
        "bifurcation: locus denominator {denominator:.3e} is singular at s = {s}, tau = {tau}"
    )]
    Bifurcation {
        s: Complex64,
        tau: f64,
        denominator: f64,
    },

    #[error("numerator degree dropped to {got} at tau = {tau} (expected {expected})")]
    DegreeDrop {
        tau: f64,
        expected: usize,
        got: usize,
    },

    /// A frequency-grid point is a closed-loop pole or filter pole.
    #[error("frequency response is singular at omega = {omega} (tau = {tau})")]
    SingularFrequency { omega: f64, tau: f64 },

    #[error("Routh-Hurwitz test inconclusive: {0}")]
    Inconclusive(String),

    #[error("contour degenerate: |N| = {magnitude:.3e} at s = {point}; choose a different radius")]
    ContourDegenerate { point: Complex64, magnitude: f64 },

    #[error("accumulated argument {turns} turns is not close to an integer")]
    NonIntegerWinding { turns: f64 },

    #[error("continuity refinement exceeded depth {depth} near tau = {tau}")]
    SweepDepth {
        tau: f64,
        depth: usize,
        partial: Box<RootSweep>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the caller's input rather than numerics.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, Error::InvalidInput(_))
    }
}
