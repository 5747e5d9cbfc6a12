//! Closed-loop assembly for state feedback through dirty derivatives.
//!
//! A plant in controller normal form satisfies `p(s) Y = U` with `p` monic of
//! degree `n`. Feedback `U = k(s) Y - V` gives `Y/V = 1 / (p - k)`. Replacing
//! every derivative by the filtered `delta = s / (tau s + 1)` turns the
//! characteristic function into
//!
//! ```text
//! H(s, tau) = p(s) - k(delta(s, tau)) = N(s, tau) / (tau s + 1)^m
//! ```
//!
//! with `m = deg k`. `tau = 0` recovers the exact-derivative loop; the filter
//! bandwidth is `sigma = 1 / tau`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{BiPoly, RealPoly};

/// `|tau s + 1|` at or below this (relative to `1 + |tau s|`) counts as the filter pole.
const FILTER_POLE_TOL: f64 = 1e-12;
/// `|N(s, tau)|` at or below this times its rounding scale counts as a zero of H.
const POLE_TOL: f64 = 1e-13;

/// Open-loop characteristic polynomial `p(s) = s^n - q(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    p: RealPoly,
}

impl PlantSpec {
    pub fn new(p: RealPoly) -> Result<Self> {
        if p.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "plant polynomial p has non-finite coefficients",
            ));
        }
        if p.degree() < 1 {
            return Err(Error::invalid("plant polynomial p must have degree >= 1"));
        }
        if p.leading() != 1.0 {
            return Err(Error::invalid(format!(
                "plant polynomial p must be monic (leading coefficient is {})",
                p.leading()
            )));
        }
        Ok(PlantSpec { p })
    }

    pub fn p(&self) -> &RealPoly {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.degree()
    }
}

/// Feedback polynomial `k(s)`; the zero polynomial is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSpec {
    k: RealPoly,
}

impl FeedbackSpec {
    pub fn new(k: RealPoly) -> Result<Self> {
        if k.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "feedback polynomial k has non-finite coefficients",
            ));
        }
        Ok(FeedbackSpec { k })
    }

    pub fn k(&self) -> &RealPoly {
        &self.k
    }

    /// `deg k`, the power of the filter denominator.
    pub fn m(&self) -> usize {
        self.k.degree()
    }
}

/// A validated `(p, k)` pair with its assembled numerator `N(s, tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirtyClosedLoop {
    plant: PlantSpec,
    feedback: FeedbackSpec,
    numerator: BiPoly,
    p_deriv: RealPoly,
    k_deriv: RealPoly,
}

/// Validates ascending coefficient lists and assembles the closed loop.
pub fn build_problem(p_coeffs: &[f64], k_coeffs: &[f64]) -> Result<DirtyClosedLoop> {
    if p_coeffs.is_empty() {
        return Err(Error::invalid("p coefficient list is empty"));
    }
    if k_coeffs.is_empty() {
        return Err(Error::invalid("k coefficient list is empty"));
    }
    if p_coeffs[p_coeffs.len() - 1] != 1.0 {
        return Err(Error::invalid(format!(
            "plant polynomial p must be monic: highest listed coefficient is {}, expected 1",
            p_coeffs[p_coeffs.len() - 1]
        )));
    }
    let plant = PlantSpec::new(RealPoly::new(p_coeffs.to_vec()))?;
    let feedback = FeedbackSpec::new(RealPoly::new(k_coeffs.to_vec()))?;
    DirtyClosedLoop::new(plant, feedback)
}

impl DirtyClosedLoop {
    pub fn new(plant: PlantSpec, feedback: FeedbackSpec) -> Result<Self> {
        if !feedback.k().is_zero() && feedback.m() + 1 > plant.n() {
            return Err(Error::invalid(format!(
                "feedback degree {} must be at most n - 1 = {}",
                feedback.m(),
                plant.n() - 1
            )));
        }
        let numerator = assemble_numerator(&plant, &feedback);
        Ok(DirtyClosedLoop {
            p_deriv: plant.p().derivative(),
            k_deriv: feedback.k().derivative(),
            plant,
            feedback,
            numerator,
        })
    }

    pub fn plant(&self) -> &PlantSpec {
        &self.plant
    }

    pub fn feedback(&self) -> &FeedbackSpec {
        &self.feedback
    }

    pub fn p(&self) -> &RealPoly {
        self.plant.p()
    }

    pub fn k(&self) -> &RealPoly {
        self.feedback.k()
    }

    pub fn p_deriv(&self) -> &RealPoly {
        &self.p_deriv
    }

    pub fn k_deriv(&self) -> &RealPoly {
        &self.k_deriv
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn m(&self) -> usize {
        self.feedback.m()
    }

    pub fn numerator(&self) -> &BiPoly {
        &self.numerator
    }

    /// The exact-derivative characteristic polynomial `p - k`.
    pub fn baseline(&self) -> RealPoly {
        self.p() - self.k()
    }

    /// `N(., tau)` as a polynomial in `s`.
    pub fn numerator_at(&self, tau: f64) -> RealPoly {
        self.numerator.at_tau(tau)
    }

    /// `(tau s + 1)^m`, erroring on the filter pole.
    pub fn denominator(&self, s: Complex64, tau: f64) -> Result<Complex64> {
        Ok(filter_factor(s, tau)?.powu(self.m() as u32))
    }

    /// Characteristic function `H(s, tau) = N(s, tau) / (tau s + 1)^m`.
    pub fn eval_h(&self, s: Complex64, tau: f64) -> Result<Complex64> {
        let den = self.denominator(s, tau)?;
        Ok(self.numerator.eval(s, tau) / den)
    }

    /// Closed-loop transfer function `G = 1 / H`.
    pub fn eval_g(&self, s: Complex64, tau: f64) -> Result<Complex64> {
        let den = self.denominator(s, tau)?;
        let num = self.numerator.eval(s, tau);
        if num.norm() <= POLE_TOL * self.numerator.eval_abs(s.norm(), tau) {
            return Err(Error::Pole { s, tau });
        }
        Ok(den / num)
    }

    /// `H(s, tau)` computed as `p(s) - k(delta)` without the assembled numerator.
    pub fn eval_h_direct(&self, s: Complex64, tau: f64) -> Result<Complex64> {
        Ok(self.p().eval(s) - self.k().eval(delta_eval(s, tau)?))
    }

    /// True when `H(s, tau)` vanishes to rounding accuracy.
    pub fn is_pole(&self, s: Complex64, tau: f64) -> bool {
        self.numerator.eval(s, tau).norm() <= POLE_TOL * self.numerator.eval_abs(s.norm(), tau)
    }
}

fn filter_factor(s: Complex64, tau: f64) -> Result<Complex64> {
    if tau == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let ts = s * tau;
    let f = ts + 1.0;
    if f.norm() <= FILTER_POLE_TOL * (1.0 + ts.norm()) {
        return Err(Error::FilterPole { s, tau });
    }
    Ok(f)
}

/// The dirty derivative `delta = s / (tau s + 1)`; exactly `s` at `tau = 0`.
pub fn delta_eval(s: Complex64, tau: f64) -> Result<Complex64> {
    if tau == 0.0 {
        return Ok(s);
    }
    Ok(s / filter_factor(s, tau)?)
}

/// `N(s, tau) = (tau s + 1)^m p(s) - sum_i k_i s^i (tau s + 1)^(m - i)`.
///
/// Exact over the integers for integer-valued inputs; column `tau^0` is `p - k`.
pub fn assemble_numerator(plant: &PlantSpec, feedback: &FeedbackSpec) -> BiPoly {
    let m = feedback.m();
    let p = BiPoly::from_s_poly(plant.p());
    let mut n = &linear(m) * &p;
    for (i, &ki) in feedback.k().coeffs().iter().enumerate() {
        if ki == 0.0 {
            continue;
        }
        let term = linear(m - i).shift_s(i).scale(ki);
        n = &n - &term;
    }
    n
}

fn linear(power: usize) -> BiPoly {
    BiPoly::linear_power(1.0, 1.0, power as i64).expect("non-negative power")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn worked() -> DirtyClosedLoop {
        build_problem(&[0.0, 0.0, 1.0], &[-2.0, -3.0]).unwrap()
    }

    #[test]
    fn build_problem_examples() {
        let cl = worked();
        assert_eq!(cl.n(), 2);
        assert_eq!(cl.m(), 1);
        assert_eq!(cl.baseline().coeffs(), &[2.0, 3.0, 1.0]);

        let cl = build_problem(&[0.0, -3.0, 1.0], &[-1.0, -5.0]).unwrap();
        assert_eq!(cl.baseline().coeffs(), &[1.0, 2.0, 1.0]);

        let err = build_problem(&[0.0, 0.0, 1.0], &[0.0, 0.0, 5.0]).unwrap_err();
        assert!(err.is_invalid_input());
    }

    #[test]
    fn build_problem_rejects_bad_input() {
        let err = build_problem(&[0.0, 0.0, 2.0], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("monic"), "{err}");
        assert!(build_problem(&[], &[1.0]).unwrap_err().is_invalid_input());
        assert!(build_problem(&[1.0, 1.0], &[])
            .unwrap_err()
            .is_invalid_input());
        assert!(build_problem(&[1.0], &[0.0])
            .unwrap_err()
            .is_invalid_input());
        assert!(build_problem(&[f64::NAN, 1.0], &[0.0])
            .unwrap_err()
            .is_invalid_input());
        assert!(build_problem(&[0.0, 0.0, 1.0, 0.0], &[0.0])
            .unwrap_err()
            .is_invalid_input());
    }

    #[test]
    fn zero_feedback_is_allowed() {
        let cl = build_problem(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(cl.m(), 0);
        assert_eq!(cl.numerator().rows(), &[vec![1.0], vec![1.0]]);
    }

    #[test]
    fn delta_examples() {
        let s = c(0.3, -2.0);
        assert_eq!(delta_eval(s, 0.0).unwrap(), s);
        let d = delta_eval(c(0.0, 1.0), 1.0).unwrap();
        assert!((d - c(0.5, 0.5)).norm() < 1e-15);
        for tau in [0.3, 1.0, 7.0] {
            let err = delta_eval(c(-1.0 / tau, 0.0), tau).unwrap_err();
            assert!(matches!(err, Error::FilterPole { .. }));
        }
    }

    #[test]
    fn numerator_examples_are_exact() {
        let n = worked().numerator().clone();
        let expected = BiPoly::new(vec![
            vec![2.0, 0.0],
            vec![3.0, 2.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ]);
        assert_eq!(n, expected);

        let n = build_problem(&[0.0, -3.0, 1.0], &[-1.0, -5.0])
            .unwrap()
            .numerator()
            .clone();
        let expected = BiPoly::new(vec![
            vec![1.0, 0.0],
            vec![2.0, 1.0],
            vec![1.0, -3.0],
            vec![0.0, 1.0],
        ]);
        assert_eq!(n, expected);

        let cl = build_problem(&[4.0, 1.0, 1.0], &[2.5]).unwrap();
        assert_eq!(cl.numerator().deg_tau(), 0);
        assert_eq!(cl.numerator().at_tau(0.0).coeffs(), &[1.5, 1.0, 1.0]);
    }

    #[test]
    fn eval_h_examples() {
        let cl = worked();
        assert_eq!(cl.eval_h(c(-1.0, 0.0), 0.0).unwrap(), c(0.0, 0.0));
        let h = cl.eval_h(c(1.0, 0.0), 1.0).unwrap();
        assert_eq!(h, c(4.5, 0.0));
        let err = cl.eval_h(c(-2.0, 0.0), 0.5).unwrap_err();
        assert!(matches!(err, Error::FilterPole { .. }));
    }

    #[test]
    fn eval_g_examples() {
        let cl = worked();
        let g = cl.eval_g(c(1.0, 0.0), 1.0).unwrap();
        assert!((g.re - 1.0 / 4.5).abs() < 1e-15);
        let err = cl.eval_g(c(-2.0, 0.0), 0.0).unwrap_err();
        assert!(matches!(err, Error::Pole { .. }));
        let s = c(0.4, 1.3);
        let g0 = cl.eval_g(s, 0.0).unwrap();
        assert!((g0 - cl.baseline().eval(s).inv()).norm() < 1e-15);
    }

    #[test]
    fn filter_pole_is_not_cancelled() {
        let cl = worked();
        for tau in [0.01, 0.5, 3.0] {
            let s = c(-1.0 / tau, 0.0);
            let n = cl.numerator().eval(s, tau);
            // N(-1/tau, tau) = -k_m (-1/tau)^m
            let expected = 3.0 * (-1.0 / tau);
            assert!((n.re - expected).abs() <= 1e-10 * expected.abs());
        }
    }
}
