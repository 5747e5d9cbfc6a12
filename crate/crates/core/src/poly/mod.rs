//! Dense real polynomials in `s` and in `(s, tau)`.
//!
//! Coefficients are stored in ascending order: `coeffs[i]` multiplies `s^i`.
//! Both types keep a canonical trimmed form so that the stored degree is the
//! true degree.

mod aberth;

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative residual tolerance used when no explicit one is given.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// A univariate real polynomial in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPoly {
    coeffs: Vec<f64>,
}

impl RealPoly {
    /// Builds a polynomial, trimming trailing zero coefficients.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        RealPoly { coeffs }
    }

    pub fn zero() -> Self {
        RealPoly { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        RealPoly::new(vec![c])
    }

    /// `c * s^power`.
    pub fn monomial(c: f64, power: usize) -> Self {
        let mut coeffs = vec![0.0; power + 1];
        coeffs[power] = c;
        RealPoly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn scale(&self, factor: f64) -> RealPoly {
        RealPoly::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn derivative(&self) -> RealPoly {
        if self.coeffs.len() == 1 {
            return RealPoly::zero();
        }
        RealPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
        )
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `sum |c_i| r^i`, the natural rounding scale of an evaluation at `|s| = r`.
    pub fn eval_abs(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// All `degree()` complex roots, with multiplicity.
    ///
    /// Every returned root `z` satisfies `|a(z)| <= tol * sum |c_i| |z|^i`.
    /// Roots of a real polynomial come back closed under conjugation.
    pub fn roots(&self, tol: f64) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::invalid("cannot find roots of the zero polynomial"));
        }
        if self.degree() == 0 {
            return Err(Error::invalid("cannot find roots of a constant polynomial"));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("polynomial has non-finite coefficients"));
        }
        aberth::roots(&self.coeffs, tol)
    }
}

impl Add for &RealPoly {
    type Output = RealPoly;

    fn add(self, rhs: &RealPoly) -> RealPoly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        RealPoly::new((0..len).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &RealPoly {
    type Output = RealPoly;

    fn sub(self, rhs: &RealPoly) -> RealPoly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        RealPoly::new((0..len).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &RealPoly {
    type Output = RealPoly;

    fn mul(self, rhs: &RealPoly) -> RealPoly {
        if self.is_zero() || rhs.is_zero() {
            return RealPoly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RealPoly::new(out)
    }
}

impl Neg for &RealPoly {
    type Output = RealPoly;

    fn neg(self) -> RealPoly {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned_binop {
    ($ty:ty, $tr:ident, $method:ident) => {
        impl $tr for $ty {
            type Output = $ty;

            fn $method(self, rhs: $ty) -> $ty {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(RealPoly, Add, add);
forward_owned_binop!(RealPoly, Sub, sub);
forward_owned_binop!(RealPoly, Mul, mul);

/// A real polynomial in `(s, tau)`; `coeff(i, j)` multiplies `s^i tau^j`.
///
/// Storage is rectangular and trimmed so that the last row and the last
/// column each hold a nonzero entry.
#[derive(Debug, Clone, PartialEq)]
pub struct BiPoly {
    rows: Vec<Vec<f64>>,
}

impl BiPoly {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, 0.0);
                r
            })
            .collect();
        while rows.len() > 1 && rows[rows.len() - 1].iter().all(|&c| c == 0.0) {
            rows.pop();
        }
        if rows.is_empty() {
            rows.push(vec![0.0; width]);
        }
        let mut width = width;
        while width > 1 && rows.iter().all(|r| r[width - 1] == 0.0) {
            width -= 1;
        }
        for r in &mut rows {
            r.truncate(width);
        }
        BiPoly { rows }
    }

    pub fn zero() -> Self {
        BiPoly {
            rows: vec![vec![0.0]],
        }
    }

    /// Embeds a polynomial in `s` as a `tau`-independent bivariate one.
    pub fn from_s_poly(p: &RealPoly) -> Self {
        BiPoly::new(p.coeffs().iter().map(|&c| vec![c]).collect())
    }

    /// Expands `(a * tau * s + b)^m` by the binomial theorem.
    pub fn linear_power(a: f64, b: f64, m: i64) -> Result<Self> {
        if m < 0 {
            return Err(Error::invalid(format!("negative exponent {m}")));
        }
        let m = m as usize;
        let mut rows = vec![vec![0.0; m + 1]; m + 1];
        let mut binom = 1.0;
        for (r, row) in rows.iter_mut().enumerate() {
            row[r] = binom * a.powi(r as i32) * b.powi((m - r) as i32);
            binom = binom * (m - r) as f64 / (r + 1) as f64;
        }
        Ok(BiPoly::new(rows))
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.rows
            .get(i)
            .and_then(|r| r.get(j))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn deg_s(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn deg_tau(&self) -> usize {
        self.rows[0].len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.rows.len() == 1 && self.rows[0].iter().all(|&c| c == 0.0)
    }

    /// Coefficients in `s` at a fixed `tau`, untrimmed.
    fn s_coeffs_at(&self, tau: f64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().rev().fold(0.0, |acc, &c| acc * tau + c))
            .collect()
    }

    /// Freezes `tau`, giving a polynomial in `s`.
    ///
    /// Coefficients below `1e-300` times the largest one are dropped, so the
    /// degree may fall (it does at `tau = 0` whenever the feedback is dynamic).
    pub fn at_tau(&self, tau: f64) -> RealPoly {
        let mut coeffs = self.s_coeffs_at(tau);
        let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1].abs() <= 1e-300 * scale {
            coeffs.pop();
        }
        RealPoly::new(coeffs)
    }

    pub fn eval(&self, s: Complex64, tau: f64) -> Complex64 {
        self.s_coeffs_at(tau)
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// `sum |c_ij| r^i |tau|^j`.
    pub fn eval_abs(&self, r: f64, tau: f64) -> f64 {
        let t = tau.abs();
        self.rows.iter().rev().fold(0.0, |acc, row| {
            acc * r + row.iter().rev().fold(0.0, |a, &c| a * t + c.abs())
        })
    }

    pub fn scale(&self, factor: f64) -> BiPoly {
        BiPoly::new(
            self.rows
                .iter()
                .map(|r| r.iter().map(|c| c * factor).collect())
                .collect(),
        )
    }

    /// Multiplies by `s^k`.
    pub fn shift_s(&self, k: usize) -> BiPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut rows = vec![vec![0.0; self.rows[0].len()]; k];
        rows.extend(self.rows.iter().cloned());
        BiPoly::new(rows)
    }

    pub fn d_ds(&self) -> BiPoly {
        if self.rows.len() == 1 {
            return BiPoly::zero();
        }
        BiPoly::new(
            self.rows
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, r)| r.iter().map(|c| i as f64 * c).collect())
                .collect(),
        )
    }

    pub fn d_dtau(&self) -> BiPoly {
        BiPoly::new(
            self.rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .skip(1)
                        .map(|(j, c)| j as f64 * c)
                        .collect()
                })
                .collect(),
        )
    }

    fn zip_with(&self, rhs: &BiPoly, op: impl Fn(f64, f64) -> f64) -> BiPoly {
        let n_rows = self.rows.len().max(rhs.rows.len());
        let n_cols = self.rows[0].len().max(rhs.rows[0].len());
        BiPoly::new(
            (0..n_rows)
                .map(|i| {
                    (0..n_cols)
                        .map(|j| op(self.coeff(i, j), rhs.coeff(i, j)))
                        .collect()
                })
                .collect(),
        )
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;

    fn add(self, rhs: &BiPoly) -> BiPoly {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;

    fn sub(self, rhs: &BiPoly) -> BiPoly {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;

    fn mul(self, rhs: &BiPoly) -> BiPoly {
        if self.is_zero() || rhs.is_zero() {
            return BiPoly::zero();
        }
        let n_rows = self.rows.len() + rhs.rows.len() - 1;
        let n_cols = self.rows[0].len() + rhs.rows[0].len() - 1;
        let mut out = vec![vec![0.0; n_cols]; n_rows];
        for (i1, r1) in self.rows.iter().enumerate() {
            for (j1, &a) in r1.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (i2, r2) in rhs.rows.iter().enumerate() {
                    for (j2, &b) in r2.iter().enumerate() {
                        out[i1 + i2][j1 + j2] += a * b;
                    }
                }
            }
        }
        BiPoly::new(out)
    }
}

forward_owned_binop!(BiPoly, Add, add);
forward_owned_binop!(BiPoly, Sub, sub);
forward_owned_binop!(BiPoly, Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted_by_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn add_identity_cancellation_and_sum() {
        let a = RealPoly::new(vec![1.0, 1.0]);
        assert_eq!(&a + &RealPoly::zero(), a);
        let sq = RealPoly::monomial(1.0, 2);
        let diff = &sq + &RealPoly::monomial(-1.0, 2);
        assert!(diff.is_zero());
        assert_eq!(diff.coeffs(), &[0.0]);
        let sum = RealPoly::new(vec![2.0, 3.0]) + RealPoly::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(sum.coeffs(), &[3.0, 4.0, 1.0]);
    }

    #[test]
    fn mul_examples() {
        let a = RealPoly::new(vec![1.0, 1.0]);
        let b = RealPoly::new(vec![2.0, 1.0]);
        assert_eq!((&a * &b).coeffs(), &[2.0, 3.0, 1.0]);
        assert!((&a * &RealPoly::zero()).is_zero());
        assert_eq!((&a * &a).coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(
            RealPoly::monomial(1.0, 2).derivative().coeffs(),
            &[0.0, 2.0]
        );
        assert!(RealPoly::constant(7.0).derivative().is_zero());
        assert_eq!(
            RealPoly::new(vec![-1.0, -5.0]).derivative().coeffs(),
            &[-5.0]
        );
    }

    #[test]
    fn eval_examples() {
        let p = RealPoly::new(vec![2.0, 3.0, 1.0]);
        assert_eq!(p.eval(c(-1.0, 0.0)), c(0.0, 0.0));
        assert_eq!(p.eval(c(0.0, 0.0)), c(2.0, 0.0));
        assert_eq!(RealPoly::monomial(1.0, 2).eval(c(0.0, 1.0)), c(-1.0, 0.0));
    }

    #[test]
    fn linear_power_examples() {
        assert_eq!(
            BiPoly::linear_power(1.0, 1.0, 0).unwrap().rows(),
            &[vec![1.0]]
        );
        let l1 = BiPoly::linear_power(1.0, 1.0, 1).unwrap();
        assert_eq!(l1.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l2 = BiPoly::linear_power(1.0, 1.0, 2).unwrap();
        assert_eq!(l2.coeff(0, 0), 1.0);
        assert_eq!(l2.coeff(1, 1), 2.0);
        assert_eq!(l2.coeff(2, 2), 1.0);
        assert_eq!(l2.deg_s(), 2);
        assert_eq!(l2.deg_tau(), 2);
        assert!(BiPoly::linear_power(1.0, 1.0, -1)
            .unwrap_err()
            .is_invalid_input());
    }

    #[test]
    fn bipoly_trims_rows_and_columns() {
        let b = BiPoly::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        assert_eq!(b.rows(), &[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(BiPoly::new(vec![]).is_zero());
    }

    fn worked_numerator() -> BiPoly {
        // tau s^3 + s^2 + (2 tau + 3) s + 2
        BiPoly::new(vec![
            vec![2.0, 0.0],
            vec![3.0, 2.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
    }

    #[test]
    fn at_tau_examples() {
        let n = worked_numerator();
        assert_eq!(n.at_tau(0.0).coeffs(), &[2.0, 3.0, 1.0]);
        assert_eq!(n.at_tau(1.0).coeffs(), &[2.0, 5.0, 1.0, 1.0]);
        assert!(BiPoly::zero().at_tau(0.7).is_zero());
    }

    #[test]
    fn bipoly_partials() {
        let n = worked_numerator();
        // dN/ds = 3 tau s^2 + 2 s + 2 tau + 3 ; dN/dtau = s^3 + 2 s
        let ds = n.d_ds();
        assert_eq!(ds.coeff(0, 0), 3.0);
        assert_eq!(ds.coeff(0, 1), 2.0);
        assert_eq!(ds.coeff(1, 0), 2.0);
        assert_eq!(ds.coeff(2, 1), 3.0);
        let dt = n.d_dtau();
        assert_eq!(dt.rows(), &[vec![0.0], vec![2.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn roots_of_simple_quadratics() {
        let r = sorted_by_re(RealPoly::new(vec![2.0, 3.0, 1.0]).roots(1e-12).unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(-1.0, 0.0)).norm() < 1e-12);

        let mut r = RealPoly::new(vec![1.0, 0.0, 1.0]).roots(1e-12).unwrap();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-12);
        assert_eq!(r[0], r[1].conj());
    }

    #[test]
    fn roots_reject_degenerate_input() {
        assert!(RealPoly::zero()
            .roots(1e-10)
            .unwrap_err()
            .is_invalid_input());
        assert!(RealPoly::constant(3.0)
            .roots(1e-10)
            .unwrap_err()
            .is_invalid_input());
    }

    #[test]
    fn roots_with_exact_zero_roots() {
        let r = RealPoly::new(vec![0.0, 0.0, 1.0, 1.0])
            .roots(1e-12)
            .unwrap();
        assert_eq!(r.iter().filter(|z| **z == c(0.0, 0.0)).count(), 2);
        assert!(r.iter().any(|z| (z - c(-1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn small_tau_numerator_roots() {
        let tau = 0.01;
        let p = worked_numerator().at_tau(tau);
        let r = sorted_by_re(p.roots(1e-10).unwrap());
        assert_eq!(r.len(), 3);
        let sum: Complex64 = r.iter().sum();
        // Vieta: sum of roots = -c2/c3 = -1/tau
        assert!((sum.re + 1.0 / tau).abs() < 1e-9 / tau);
        assert!((r[0] - c(-97.0, 0.0)).norm() < 5.0);
        // First-order shifts ds/dtau = -k'(s) s^2 / (p'(s) - k'(s)): -12 at -2, +3 at -1.
        assert!((r[1] - c(-2.0 - 12.0 * tau, 0.0)).norm() < 0.01);
        assert!((r[2] - c(-1.0 + 3.0 * tau, 0.0)).norm() < 0.01);
    }

    #[test]
    fn repeated_roots_meet_residual_tolerance() {
        // (s + 1)^4
        let p = RealPoly::new(vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        let r = p.roots(1e-10).unwrap();
        assert_eq!(r.len(), 4);
        for z in &r {
            assert!((z - c(-1.0, 0.0)).norm() < 1e-3);
        }
    }

    #[test]
    fn widely_separated_scales() {
        // (1e-8 s + 1)^4 (s + 1)(s + 2): four roots near -1e8 and two small ones.
        let l = BiPoly::linear_power(1.0, 1.0, 4).unwrap().at_tau(1e-8);
        let p = &l * &RealPoly::new(vec![2.0, 3.0, 1.0]);
        let r = sorted_by_re(p.roots(1e-10).unwrap());
        assert_eq!(r.len(), 6);
        assert!((r[4] - c(-2.0, 0.0)).norm() < 1e-8);
        assert!((r[5] - c(-1.0, 0.0)).norm() < 1e-8);
        for z in &r[..4] {
            assert!((z.norm() - 1e8).abs() < 1e6);
        }
    }
}
