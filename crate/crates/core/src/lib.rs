//! Pole deformation under dirty derivatives.
//!
//! A plant `p(s)` stabilized by polynomial state feedback `k` has closed-loop
//! poles at the zeros of `p(s) - k(s)`. Replacing each exact derivative `s` by
//! the filtered `delta = s / (tau s + 1)` gives
//!
//! ```text
//! H(s, tau) = p(s) - k(delta)
//! ```
//!
//! whose zeros are the roots of the polynomial numerator
//! `N(s, tau) = (tau s + 1)^m p(s) - sum k_i s^i (tau s + 1)^(m - i)`.
//! The `n` roots of `p - k` move continuously as `tau` grows from 0, and `m`
//! extra parasitic roots come in from infinity near `-1 / tau`.
//!
//! Modules:
//!
//! - [`poly`]: real and bivariate polynomials, Aberth root finding.
//! - [`closedloop`]: problem validation and evaluation of `H` and `N`.
//! - [`roots`]: root sweeps with continuity tracking, stability, critical `tau`.
//! - [`locus`]: level-set tracing of `H(s, tau) = z` by an ODE in `tau`.
//! - [`freq`]: `tau`-sensitivity of the frequency response, winding numbers.
//! - [`cli`]: the `dirtylocus` command-line front end.

pub mod cli;
pub mod closedloop;
pub mod error;
pub mod freq;
pub mod locus;
pub mod poly;
pub mod roots;

pub use closedloop::{build_problem, DirtyClosedLoop, FeedbackSpec, PlantSpec};
pub use error::{Error, Result};
pub use poly::{BiPoly, RealPoly};
