//! Level-set curves `s(tau)` with `H(s(tau), tau) = z` held constant.
//!
//! Differentiating `H(s, tau) = p(s) - k(delta(s, tau))` along such a curve
//! and solving for `ds/dtau` gives
//!
//! ```text
//! ds/dtau = -k'(delta) s^2 / ((tau s + 1)^2 p'(s) - k'(delta))
//! ```
//!
//! The curve branches where the denominator vanishes, i.e. at stationary
//! points of `H(., tau)`. [`RhsForm::WithoutSquare`] drops the `s^2` factor;
//! it does not keep `H` constant and exists only to demonstrate that.
//!
//! The tracer integrates the ODE with classical RK4 under step doubling and
//! pulls every accepted point back onto the level set with Newton's method.

use num_complex::Complex64;

use crate::closedloop::{delta_eval, DirtyClosedLoop};
use crate::error::{Error, Result};

/// Level-set residual tolerance, relative to `1 + |z|`.
pub const CORRECTOR_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 25;
const NEWTON_STEP_TOL: f64 = 1e-12;
/// Relative local-error target of the predictor.
pub const LOCAL_ERROR_TOL: f64 = 1e-8;
const INITIAL_STEP_FRACTION: f64 = 1e-2;
const MIN_STEP_FRACTION: f64 = 1e-14;
/// A corrector move larger than this (relative to `1 + |s|`) is treated as a
/// jump to another branch and the step is rejected.
const MAX_CORRECTION: f64 = 0.1;
/// Singularity threshold for the ODE denominator, relative to
/// `1 + |p'(s)| |tau s + 1|^2`.
pub const SINGULARITY_TOL: f64 = 1e-8;
/// A step underflow within this distance (relative to `1 + |s|`) of a
/// stationary point of `H(., tau)` counts as a bifurcation. Near a fold the
/// level set is only resolved to about `sqrt(eps)`, so the denominator test
/// alone can miss it.
pub const FOLD_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsForm {
    /// `-k'(delta) s^2 / ((tau s + 1)^2 p'(s) - k'(delta))`.
    #[default]
    Corrected,
    /// The same expression without the `s^2` factor; does not preserve `H`.
    WithoutSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    pub rhs: RhsForm,
    /// Apply the Newton corrector after each accepted step.
    pub correct: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            rhs: RhsForm::Corrected,
            correct: true,
        }
    }
}

/// `(tau s + 1)^2 p'(s) - k'(delta)`.
pub fn locus_denominator(cl: &DirtyClosedLoop, s: Complex64, tau: f64) -> Result<Complex64> {
    let delta = delta_eval(s, tau)?;
    let f = s * tau + 1.0;
    Ok(f * f * cl.p_deriv().eval(s) - cl.k_deriv().eval(delta))
}

/// Right-hand side `ds/dtau` of the level-set ODE.
pub fn locus_rhs(cl: &DirtyClosedLoop, s: Complex64, tau: f64, form: RhsForm) -> Result<Complex64> {
    let delta = delta_eval(s, tau)?;
    let f = s * tau + 1.0;
    let p_prime = cl.p_deriv().eval(s);
    let k_prime = cl.k_deriv().eval(delta);
    let den = f * f * p_prime - k_prime;
    let threshold = SINGULARITY_TOL * (1.0 + p_prime.norm() * f.norm_sqr());
    if den.norm() <= threshold {
        return Err(Error::Bifurcation {
            s,
            tau,
            denominator: den.norm(),
        });
    }
    let num = match form {
        RhsForm::Corrected => -k_prime * s * s,
        RhsForm::WithoutSquare => -k_prime,
    };
    Ok(num / den)
}

/// `dH/ds = p'(s) - k'(delta) / (tau s + 1)^2`.
fn dh_ds(cl: &DirtyClosedLoop, s: Complex64, tau: f64) -> Result<Complex64> {
    let delta = delta_eval(s, tau)?;
    let f = s * tau + 1.0;
    Ok(cl.p_deriv().eval(s) - cl.k_deriv().eval(delta) / (f * f))
}

/// `d2H/ds2 = p''(s) - k''(delta) / (tau s + 1)^4 + 2 tau k'(delta) / (tau s + 1)^3`.
fn d2h_ds2(cl: &DirtyClosedLoop, s: Complex64, tau: f64) -> Result<Complex64> {
    let delta = delta_eval(s, tau)?;
    let f = s * tau + 1.0;
    let f2 = f * f;
    Ok(
        cl.p_deriv().derivative().eval(s) - cl.k_deriv().derivative().eval(delta) / (f2 * f2)
            + cl.k_deriv().eval(delta) * (2.0 * tau) / (f2 * f),
    )
}

/// Newton distance `|H_s / H_ss|` from `s` to the nearest stationary point of
/// `H(., tau)`.
pub fn fold_distance(cl: &DirtyClosedLoop, s: Complex64, tau: f64) -> Result<f64> {
    Ok((dh_ds(cl, s, tau)? / d2h_ds2(cl, s, tau)?).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    Completed,
    Bifurcation,
    StepFailure,
}

impl TraceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Completed => "completed",
            TraceStatus::Bifurcation => "bifurcation",
            TraceStatus::StepFailure => "step-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocusPoint {
    pub tau: f64,
    pub s: Complex64,
    /// `|H(s, tau) - z|` at the accepted point.
    pub residual: f64,
    /// `|H - z|` of the predictor output before correction.
    pub drift: f64,
    /// `|(tau s + 1)^2 p'(s) - k'(delta)|`.
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopInfo {
    pub message: String,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocusTrace {
    pub level: Complex64,
    pub points: Vec<LocusPoint>,
    pub status: TraceStatus,
    pub stop_info: StopInfo,
}

impl LocusTrace {
    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    pub fn max_drift(&self) -> f64 {
        self.points.iter().map(|p| p.drift).fold(0.0, f64::max)
    }

    pub fn last(&self) -> &LocusPoint {
        self.points
            .last()
            .expect("a trace always holds its start point")
    }
}

/// Tolerance on `|H - z|`, floored at the rounding level of evaluating `H`.
fn level_tol(cl: &DirtyClosedLoop, s: Complex64, tau: f64, z: Complex64) -> f64 {
    let scale = cl.numerator().eval_abs(s.norm(), tau) / (s * tau + 1.0).norm().powi(cl.m() as i32);
    CORRECTOR_TOL * (1.0 + z.norm()) + 16.0 * f64::EPSILON * scale
}

fn newton_correct(
    cl: &DirtyClosedLoop,
    start: Complex64,
    tau: f64,
    z: Complex64,
) -> Option<(Complex64, f64)> {
    let mut s = start;
    for _ in 0..NEWTON_MAX_ITER {
        let g = cl.eval_h(s, tau).ok()? - z;
        let slope = dh_ds(cl, s, tau).ok()?;
        let step = g / slope;
        if !step.is_finite() {
            return None;
        }
        s -= step;
        if step.norm() <= NEWTON_STEP_TOL * (1.0 + s.norm()) {
            let residual = (cl.eval_h(s, tau).ok()? - z).norm();
            if residual > level_tol(cl, s, tau, z) {
                return None;
            }
            if (s - start).norm() > MAX_CORRECTION * (1.0 + start.norm()) {
                return None;
            }
            return Some((s, residual));
        }
    }
    None
}

fn rk4_step(
    cl: &DirtyClosedLoop,
    s: Complex64,
    tau: f64,
    h: f64,
    form: RhsForm,
) -> Result<Complex64> {
    let k1 = locus_rhs(cl, s, tau, form)?;
    let k2 = locus_rhs(cl, s + k1 * (h / 2.0), tau + h / 2.0, form)?;
    let k3 = locus_rhs(cl, s + k2 * (h / 2.0), tau + h / 2.0, form)?;
    let k4 = locus_rhs(cl, s + k3 * h, tau + h, form)?;
    Ok(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Follows the level set `H(s, tau) = z` from `(s0, tau0)` to `tau1`.
///
/// Singular ODE denominators end the trace with status `Bifurcation`, as does
/// a step controller underflow next to a stationary point of `H`; any other
/// underflow ends it with `StepFailure`. Every stop is reported in the
/// returned trace, not as errors.
pub fn trace_locus(
    cl: &DirtyClosedLoop,
    s0: Complex64,
    tau0: f64,
    tau1: f64,
    z: Complex64,
    options: TraceOptions,
) -> Result<LocusTrace> {
    for (name, t) in [("tau0", tau0), ("tau1", tau1)] {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid(format!(
                "{name} must be finite and >= 0, got {t}"
            )));
        }
    }
    if tau0 == tau1 {
        return Err(Error::invalid("tau0 and tau1 must differ"));
    }
    if !(s0.is_finite() && z.is_finite()) {
        return Err(Error::invalid("start point and level must be finite"));
    }
    let h0 = cl.eval_h(s0, tau0)?;
    let residual0 = (h0 - z).norm();
    if residual0 > level_tol(cl, s0, tau0, z) {
        return Err(Error::invalid(format!(
            "start point is off the level set: |H(s0, tau0) - z| = {residual0:.3e}"
        )));
    }

    let span = tau1 - tau0;
    let min_step = MIN_STEP_FRACTION * span.abs();
    let mut points = vec![LocusPoint {
        tau: tau0,
        s: s0,
        residual: residual0,
        drift: residual0,
        denominator: locus_denominator(cl, s0, tau0)?.norm(),
    }];

    let mut tau = tau0;
    let mut s = s0;
    let mut h = span * INITIAL_STEP_FRACTION;
    let stop = |status, message: String, denominator| {
        (
            status,
            StopInfo {
                message,
                denominator,
            },
        )
    };

    let (status, stop_info) = loop {
        if (tau1 - tau) * span.signum() <= 0.0 {
            let den = points[points.len() - 1].denominator;
            break stop(TraceStatus::Completed, "reached tau1".into(), den);
        }
        let last_step = (tau1 - tau).abs() <= h.abs();
        if last_step {
            h = tau1 - tau;
        }
        if h.abs() < min_step {
            let den = points[points.len() - 1].denominator;
            let fold = fold_distance(cl, s, tau).unwrap_or(f64::INFINITY);
            if fold <= FOLD_RADIUS * (1.0 + s.norm()) {
                break stop(
                    TraceStatus::Bifurcation,
                    format!("step size underflow {fold:.3e} from a stationary point at s = {s}, tau = {tau}"),
                    den,
                );
            }
            break stop(
                TraceStatus::StepFailure,
                format!("step size {h:.3e} below minimum at tau = {tau}"),
                den,
            );
        }

        let attempt = rk4_step(cl, s, tau, h, options.rhs).and_then(|full| {
            let half = rk4_step(cl, s, tau, h / 2.0, options.rhs)?;
            let two_half = rk4_step(cl, half, tau + h / 2.0, h / 2.0, options.rhs)?;
            Ok((full, two_half))
        });
        let (full, two_half) = match attempt {
            Ok(v) => v,
            Err(Error::Bifurcation {
                s: bs,
                tau: bt,
                denominator,
            }) => {
                break stop(
                    TraceStatus::Bifurcation,
                    format!("singular locus denominator at s = {bs}, tau = {bt}"),
                    denominator,
                );
            }
            Err(_) => {
                h /= 2.0;
                continue;
            }
        };

        let err = (two_half - full).norm() / 15.0;
        let tol = LOCAL_ERROR_TOL * (1.0 + s.norm());
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        if err > tol {
            h *= factor;
            continue;
        }

        let tau_new = if last_step { tau1 } else { tau + h };
        let s_pred = two_half;
        let drift = match cl.eval_h(s_pred, tau_new) {
            Ok(v) => (v - z).norm(),
            Err(_) => {
                h /= 2.0;
                continue;
            }
        };
        let (s_new, residual) = if options.correct {
            match newton_correct(cl, s_pred, tau_new, z) {
                Some(v) => v,
                None => {
                    h /= 2.0;
                    continue;
                }
            }
        } else {
            (s_pred, drift)
        };
        let denominator = match locus_denominator(cl, s_new, tau_new) {
            Ok(d) => d.norm(),
            Err(_) => {
                h /= 2.0;
                continue;
            }
        };
        points.push(LocusPoint {
            tau: tau_new,
            s: s_new,
            residual,
            drift,
            denominator,
        });
        tau = tau_new;
        s = s_new;
        h *= factor.max(1.0);
    };

    Ok(LocusTrace {
        level: z,
        points,
        status,
        stop_info,
    })
}

/// Axis-aligned rectangle in the s-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldCell {
    pub s: Complex64,
    /// `None` where the ODE denominator or the filter is singular.
    pub value: Option<Complex64>,
}

/// Direction field sampled on an `nx x ny` grid; `cells` is row-major with
/// the imaginary part varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldScan {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<FieldCell>,
}

impl FieldScan {
    pub fn at(&self, ix: usize, iy: usize) -> &FieldCell {
        &self.cells[iy * self.nx + ix]
    }
}

/// Samples [`locus_rhs`] on a grid spanning `region` corner to corner.
pub fn locus_field_scan(
    cl: &DirtyClosedLoop,
    region: Region,
    tau: f64,
    nx: usize,
    ny: usize,
    form: RhsForm,
) -> Result<FieldScan> {
    if nx < 2 || ny < 2 {
        return Err(Error::invalid(format!(
            "field grid must be at least 2x2, got {nx}x{ny}"
        )));
    }
    if !(region.re_min < region.re_max && region.im_min < region.im_max) {
        return Err(Error::invalid("region bounds must satisfy min < max"));
    }
    let lerp = |lo: f64, hi: f64, i: usize, n: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let cells = (0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| {
            let s = Complex64::new(
                lerp(region.re_min, region.re_max, ix, nx),
                lerp(region.im_min, region.im_max, iy, ny),
            );
            FieldCell {
                s,
                value: locus_rhs(cl, s, tau, form).ok(),
            }
        })
        .collect();
    Ok(FieldScan { nx, ny, cells })
}
