//! Aberth-Ehrlich simultaneous root iteration.
//!
//! Initial guesses are placed on circles whose radii come from the upper
//! convex hull of `(i, log|c_i|)` (the Newton polygon). That puts guesses at
//! the right magnitude even when the roots span many orders of magnitude,
//! e.g. `tau = 1e-8` numerators with parasitic roots near `-1e8`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-13;
const ANGLE_OFFSET: f64 = 0.7;

/// Roots of the polynomial with ascending coefficients `coeffs`.
///
/// `coeffs` must have a nonzero last entry and length at least 2.
pub(super) fn roots(coeffs: &[f64], tol: f64) -> Result<Vec<Complex64>> {
    let zero_roots = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut out = vec![Complex64::new(0.0, 0.0); zero_roots];

    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let c: Vec<f64> = coeffs[zero_roots..].iter().map(|x| x / scale).collect();
    let degree = c.len() - 1;
    match degree {
        0 => return Ok(out),
        1 => {
            out.push(Complex64::new(-c[0] / c[1], 0.0));
            return Ok(out);
        }
        _ => {}
    }

    let mut z = initial_guesses(&c);
    let mut converged = vec![false; degree];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && converged.iter().any(|done| !done) {
        iterations += 1;
        for i in 0..degree {
            if converged[i] {
                continue;
            }
            let (ratio, residual) = newton_ratio(&c, z[i]);
            if residual <= 2.0 * degree as f64 * f64::EPSILON || !ratio.is_finite() {
                converged[i] = residual.is_finite();
                continue;
            }
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[i] -= step;
            if step.norm() <= STEP_TOL * z[i].norm() {
                converged[i] = true;
            }
        }
    }

    for zi in z.iter_mut() {
        let (ratio, before) = newton_ratio(&c, *zi);
        if ratio.is_finite() {
            let candidate = *zi - ratio;
            let (_, after) = newton_ratio(&c, candidate);
            if after < before {
                *zi = candidate;
            }
        }
    }

    symmetrize_conjugates(&mut z);

    let worst = z
        .iter()
        .map(|&zi| newton_ratio(&c, zi).1)
        .fold(0.0_f64, f64::max);
    out.extend(z);
    // NaN residuals fail too.
    if worst.is_nan() || worst > tol {
        return Err(Error::RootFinding {
            iterations,
            residual: worst,
            best: out,
        });
    }
    Ok(out)
}

/// Returns `p(z) / p'(z)` and the relative residual `|p(z)| / sum |c_i| |z|^i`.
///
/// For `|z| > 1` the reversed polynomial in `1/z` is used so large roots do
/// not overflow.
fn newton_ratio(c: &[f64], z: Complex64) -> (Complex64, f64) {
    let d = c.len() - 1;
    if z.norm() <= 1.0 {
        let mut p = Complex64::new(c[d], 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        let mut abs = c[d].abs();
        let r = z.norm();
        for &ci in c[..d].iter().rev() {
            dp = dp * z + p;
            p = p * z + ci;
            abs = abs * r + ci.abs();
        }
        (p / dp, p.norm() / abs)
    } else {
        let w = z.inv();
        let r = w.norm();
        let mut q = Complex64::new(c[0], 0.0);
        let mut dq = Complex64::new(0.0, 0.0);
        let mut abs = c[0].abs();
        for &ci in c[1..].iter() {
            dq = dq * w + q;
            q = q * w + ci;
            abs = abs * r + ci.abs();
        }
        let ratio = z * q / (q * d as f64 - w * dq);
        (ratio, q.norm() / abs)
    }
}

fn initial_guesses(c: &[f64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    let points: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, x)| (i, x.abs().ln()))
        .collect();

    let mut hull: Vec<(usize, f64)> = Vec::with_capacity(points.len());
    for &pt in &points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross =
                (a.0 as f64 - o.0 as f64) * (pt.1 - o.1) - (a.1 - o.1) * (pt.0 as f64 - o.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }

    let mut guesses = Vec::with_capacity(d);
    for (edge, pair) in hull.windows(2).enumerate() {
        let (lo, hi) = (pair[0], pair[1]);
        let count = hi.0 - lo.0;
        let radius = ((lo.1 - hi.1) / count as f64).exp();
        for j in 0..count {
            let theta = 2.0 * PI * j as f64 / count as f64
                + 2.0 * PI * edge as f64 / d as f64
                + ANGLE_OFFSET;
            guesses.push(Complex64::from_polar(radius, theta));
        }
    }
    guesses
}

/// Pairs each root with its nearest conjugate partner and makes the pairing
/// exact: self-paired roots become real, pairs become exact conjugates.
fn symmetrize_conjugates(z: &mut [Complex64]) {
    let n = z.len();
    let mut candidates = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            candidates.push(((z[i] - z[j].conj()).norm(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; n];
    for (cost, i, j) in candidates {
        if used[i] || used[j] {
            continue;
        }
        if cost > 1e-6 * (1.0 + z[i].norm()) {
            continue;
        }
        used[i] = true;
        used[j] = true;
        if i == j {
            z[i].im = 0.0;
        } else {
            let avg = (z[i] + z[j].conj()) * 0.5;
            z[i] = avg;
            z[j] = avg.conj();
        }
    }
}
