//! Frequency-domain view of the dirty-derivative deformation.
//!
//! `H` is differentiable in `tau` with
//!
//! ```text
//! dH/dtau = k'(delta) s^2 / (tau s + 1)^2
//! ```
//!
//! so the Nyquist curve `H(j omega, tau)` deforms continuously. The log-magnitude
//! sensitivity is `d/dtau log|H|^2 = 2 Re(conj(H) dH/dtau) / |H|^2`, which is
//! real for every complex `s`.
//!
//! Stability is read off with the argument principle applied to the
//! polynomial numerator `N(., tau)`: it has no poles, so its winding number
//! around the right half-disc equals the count of right-half-plane zeros.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::closedloop::{delta_eval, DirtyClosedLoop};
use crate::error::{Error, Result};
use crate::poly::RealPoly;

pub const DEFAULT_OMEGA_MIN: f64 = 1e-3;
pub const DEFAULT_OMEGA_MAX: f64 = 1e3;
pub const DEFAULT_POINTS_PER_DECADE: usize = 200;
pub const DEFAULT_SAMPLES_PER_UNIT: usize = 8;

/// `|N| < CONTOUR_TOL * sum |c_i| |s|^i` on the contour is treated as a zero.
const CONTOUR_TOL: f64 = 1e-9;
/// Contour segments whose phase turns more than this are subdivided.
const MAX_PHASE_STEP: f64 = PI / 8.0;
const MAX_SUBDIVISION: usize = 48;
const ARC_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqSample {
    pub omega: f64,
    pub h: Complex64,
    pub dh_dtau: Complex64,
    pub log_mag_sensitivity: f64,
}

impl FreqSample {
    fn conj(&self) -> FreqSample {
        FreqSample {
            omega: -self.omega,
            h: self.h.conj(),
            dh_dtau: self.dh_dtau.conj(),
            log_mag_sensitivity: self.log_mag_sensitivity,
        }
    }
}

/// `dH/dtau = k'(delta) s^2 / (tau s + 1)^2`.
pub fn dh_dtau(cl: &DirtyClosedLoop, s: Complex64, tau: f64) -> Result<Complex64> {
    let delta = delta_eval(s, tau)?;
    let f = s * tau + 1.0;
    Ok(cl.k_deriv().eval(delta) * s * s / (f * f))
}

/// `d/dtau log|H(s, tau)|^2`.
pub fn log_mag_sensitivity(cl: &DirtyClosedLoop, s: Complex64, tau: f64) -> Result<f64> {
    let h = cl.eval_h(s, tau)?;
    if cl.is_pole(s, tau) {
        return Err(Error::Pole { s, tau });
    }
    let dh = dh_dtau(cl, s, tau)?;
    Ok(2.0 * (h.conj() * dh).re / h.norm_sqr())
}

fn sample(cl: &DirtyClosedLoop, omega: f64, tau: f64) -> Result<FreqSample> {
    let s = Complex64::new(0.0, omega);
    let singular = |_| Error::SingularFrequency { omega, tau };
    let h = cl.eval_h(s, tau).map_err(singular)?;
    let dh = dh_dtau(cl, s, tau).map_err(singular)?;
    let sens = log_mag_sensitivity(cl, s, tau).map_err(singular)?;
    Ok(FreqSample {
        omega,
        h,
        dh_dtau: dh,
        log_mag_sensitivity: sens,
    })
}

/// `H`, `dH/dtau` and the log-magnitude sensitivity at `s = j omega`.
pub fn nyquist_samples(cl: &DirtyClosedLoop, tau: f64, omegas: &[f64]) -> Result<Vec<FreqSample>> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    if let Some(bad) = omegas.iter().find(|w| !w.is_finite()) {
        return Err(Error::invalid(format!("non-finite frequency {bad}")));
    }
    omegas.par_iter().map(|&w| sample(cl, w, tau)).collect()
}

/// Logarithmically spaced frequencies from `min` to `max` inclusive.
pub fn log_omega_grid(min: f64, max: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && max.is_finite()) {
        return Err(Error::invalid(format!(
            "frequency range must satisfy 0 < min < max, got [{min}, {max}]"
        )));
    }
    if points_per_decade == 0 {
        return Err(Error::invalid("points per decade must be at least 1"));
    }
    let intervals = ((max / min).log10() * points_per_decade as f64)
        .round()
        .max(1.0) as usize;
    let ratio = max / min;
    Ok((0..=intervals)
        .map(|k| match k {
            0 => min,
            k if k == intervals => max,
            k => min * ratio.powf(k as f64 / intervals as f64),
        })
        .collect())
}

/// Samples over `-max..-min, 0, min..max`; negative frequencies are the
/// conjugates of the positive ones.
pub fn nyquist_curve(
    cl: &DirtyClosedLoop,
    tau: f64,
    omega_min: f64,
    omega_max: f64,
    points_per_decade: usize,
) -> Result<Vec<FreqSample>> {
    let grid = log_omega_grid(omega_min, omega_max, points_per_decade)?;
    let positive = nyquist_samples(cl, tau, &grid)?;
    let dc = nyquist_samples(cl, tau, &[0.0])?;
    let mut out: Vec<FreqSample> = positive.iter().rev().map(FreqSample::conj).collect();
    out.extend(dc);
    out.extend(positive);
    Ok(out)
}

/// Limits of `dH/dtau`: coefficient of `s^2` as `s -> 0`, and value as `|s| -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticLimits {
    /// `k'(0)`: `dH/dtau ~ k'(0) s^2` near `s = 0`.
    pub small_s: f64,
    /// `k'(1/tau) / tau^2`: `delta -> 1/tau` and `s^2/(tau s + 1)^2 -> 1/tau^2`.
    pub large_s: f64,
}

pub fn asymptotic_limits(cl: &DirtyClosedLoop, tau: f64) -> Result<AsymptoticLimits> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!(
            "asymptotic limits need tau > 0, got {tau}"
        )));
    }
    let kp = cl.k_deriv();
    Ok(AsymptoticLimits {
        small_s: kp.coeff(0),
        large_s: kp.eval_real(1.0 / tau) / (tau * tau),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NyquistResult {
    pub tau: f64,
    pub contour_radius: f64,
    /// Contour points with the value of `N` there, in traversal order.
    pub samples: Vec<(Complex64, Complex64)>,
    pub winding_number: i64,
}

/// Fujiwara bound on the root magnitudes of `a`.
fn root_bound(a: &RealPoly) -> f64 {
    let c = a.coeffs();
    let d = a.degree();
    let lead = a.leading();
    (1..=d)
        .map(|i| {
            let mut ratio = (c[d - i] / lead).abs();
            if i == d {
                ratio /= 2.0;
            }
            ratio.powf(1.0 / i as f64)
        })
        .fold(0.0, f64::max)
        * 2.0
}

/// Smallest admissible contour radius, `2 (1 + bound)` for the Fujiwara root bound.
pub fn min_contour_radius(cl: &DirtyClosedLoop, tau: f64) -> f64 {
    2.0 * (1.0 + root_bound(&cl.numerator_at(tau)))
}

struct Tracer<'a> {
    poly: &'a RealPoly,
    samples: Vec<(Complex64, Complex64)>,
}

impl Tracer<'_> {
    fn value(&self, s: Complex64) -> Result<Complex64> {
        let v = self.poly.eval(s);
        let magnitude = v.norm();
        if magnitude < CONTOUR_TOL * self.poly.eval_abs(s.norm()) {
            return Err(Error::ContourDegenerate {
                point: s,
                magnitude,
            });
        }
        Ok(v)
    }

    /// Accumulated `arg(g)` along `path(t)` for `t` in `[0, 1]`, where
    /// `g = N / reference`.
    fn accumulate(
        &mut self,
        path: &dyn Fn(f64) -> Complex64,
        reference: &dyn Fn(Complex64) -> Complex64,
        segments: usize,
    ) -> Result<f64> {
        let mut total = 0.0;
        let mut t_prev = 0.0;
        let s_prev = path(0.0);
        let mut n_prev = self.value(s_prev)?;
        self.samples.push((s_prev, n_prev));
        let mut g_prev = n_prev / reference(s_prev);
        for i in 1..=segments {
            let t = i as f64 / segments as f64;
            let s = path(t);
            let n = self.value(s)?;
            let g = n / reference(s);
            total += self.refine(path, reference, (t_prev, g_prev), (t, g), 0)?;
            self.samples.push((s, n));
            t_prev = t;
            n_prev = n;
            g_prev = g;
        }
        let _ = n_prev;
        Ok(total)
    }

    fn refine(
        &mut self,
        path: &dyn Fn(f64) -> Complex64,
        reference: &dyn Fn(Complex64) -> Complex64,
        (ta, ga): (f64, Complex64),
        (tb, gb): (f64, Complex64),
        depth: usize,
    ) -> Result<f64> {
        let step = (gb / ga).arg();
        if step.abs() <= MAX_PHASE_STEP || depth >= MAX_SUBDIVISION {
            return Ok(step);
        }
        let tm = 0.5 * (ta + tb);
        let sm = path(tm);
        let nm = self.value(sm)?;
        let gm = nm / reference(sm);
        let left = self.refine(path, reference, (ta, ga), (tm, gm), depth + 1)?;
        self.samples.push((sm, nm));
        let right = self.refine(path, reference, (tm, gm), (tb, gb), depth + 1)?;
        Ok(left + right)
    }
}

/// Counts right-half-plane zeros of `N(., tau)` by the argument principle.
///
/// The contour runs down the imaginary axis from `+jR` to `-jR` and back
/// through the right half circle, counterclockwise around the right half
/// disc. On the arc the leading term `c_d s^d` contributes exactly `d * pi`;
/// only the bounded correction `N / (c_d s^d)` is sampled there.
pub fn winding_number(
    cl: &DirtyClosedLoop,
    tau: f64,
    radius: f64,
    samples_per_unit: usize,
) -> Result<NyquistResult> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    if samples_per_unit == 0 {
        return Err(Error::invalid("samples per unit must be at least 1"));
    }
    let min_radius = min_contour_radius(cl, tau);
    if !(radius.is_finite() && radius >= min_radius) {
        return Err(Error::invalid(format!(
            "contour radius {radius} must be at least {min_radius} (twice one plus the root bound)"
        )));
    }
    let poly = cl.numerator_at(tau);
    let degree = poly.degree();
    let lead = poly.leading();
    let mut tracer = Tracer {
        poly: &poly,
        samples: Vec::new(),
    };

    let axis_segments = ((2.0 * radius * samples_per_unit as f64).ceil() as usize).max(16);
    let axis = |t: f64| Complex64::new(0.0, radius * (1.0 - 2.0 * t));
    let unit = |_: Complex64| Complex64::new(1.0, 0.0);
    let axis_turn = tracer.accumulate(&axis, &unit, axis_segments)?;

    let arc = |t: f64| Complex64::from_polar(radius, -PI / 2.0 + PI * t);
    let leading = |s: Complex64| s.powu(degree as u32) * lead;
    let arc_turn = tracer.accumulate(&arc, &leading, ARC_SAMPLES)? + degree as f64 * PI;

    let turns = (axis_turn + arc_turn) / (2.0 * PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.01 {
        return Err(Error::NonIntegerWinding { turns });
    }
    Ok(NyquistResult {
        tau,
        contour_radius: radius,
        samples: tracer.samples,
        winding_number: rounded as i64,
    })
}
