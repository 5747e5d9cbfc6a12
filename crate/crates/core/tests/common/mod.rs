//! Shared oracles and instance generators for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use dirtylocus::{build_problem, DirtyClosedLoop};

/// `p = s^2`, `k = -2 - 3s`: baseline `(s + 1)(s + 2)`, stable for all `tau`.
pub fn worked_stable() -> DirtyClosedLoop {
    build_problem(&[0.0, 0.0, 1.0], &[-2.0, -3.0]).unwrap()
}

/// `p = s^2 - 3s`, `k = -1 - 5s`: baseline `(s + 1)^2`, unstable past
/// `tau = (sqrt(60) - 6) / 6`.
pub fn worked_destabilizing() -> DirtyClosedLoop {
    build_problem(&[0.0, -3.0, 1.0], &[-1.0, -5.0]).unwrap()
}

pub fn critical_tau_exact() -> f64 {
    (60f64.sqrt() - 6.0) / 6.0
}

/// Coefficients (ascending) of `prod (s - r)` for a conjugate-closed root set.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

/// A random stable target closed loop with separated roots, and a random
/// monic plant; the feedback is `k = p - target`.
pub struct HurwitzInstance {
    pub target_roots: Vec<Complex64>,
    pub p: Vec<f64>,
    pub k: Vec<f64>,
}

/// Minimum distance between target roots. First-order root motion is
/// `tau * k'(s) s^2 / (p - k)'(s)`, so near-coincident roots amplify it.
pub const MIN_ROOT_SEPARATION: f64 = 0.05;

pub fn random_hurwitz_instance(rng: &mut ChaCha8Rng, max_degree: usize) -> HurwitzInstance {
    let n = rng.gen_range(1..=max_degree);
    let roots = loop {
        let mut roots = Vec::with_capacity(n);
        while roots.len() < n {
            let re = rng.gen_range(-3.0..-0.2);
            if n - roots.len() >= 2 && rng.gen_bool(0.4) {
                let im = rng.gen_range(0.1..3.0);
                roots.push(Complex64::new(re, im));
                roots.push(Complex64::new(re, -im));
            } else {
                roots.push(Complex64::new(re, 0.0));
            }
        }
        let separated = roots.iter().enumerate().all(|(i, a)| {
            roots[i + 1..]
                .iter()
                .all(|b| (a - b).norm() >= MIN_ROOT_SEPARATION)
        });
        if separated {
            break roots;
        }
    };
    let target = poly_from_roots(&roots);
    let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    p.push(1.0);
    let k: Vec<f64> = p[..n].iter().zip(&target).map(|(a, b)| a - b).collect();
    HurwitzInstance {
        target_roots: roots,
        p,
        k,
    }
}

fn eval_real_poly(c: &[f64], s: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * s + ci)
}

fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &ci)| i as f64 * ci)
        .collect()
}

/// First-order root motion `tau * |k'(r) r^2 / (p - k)'(r)|`, maximised over
/// the target roots, with `(p - k)'(r) = prod_{j != i} (r - r_j)` taken from
/// the exact roots.
pub fn first_order_displacement(inst: &HurwitzInstance, tau: f64) -> f64 {
    let kd = derivative_coeffs(&inst.k);
    inst.target_roots
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let slope: Complex64 = inst
                .target_roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &rj)| r - rj)
                .product();
            tau * (eval_real_poly(&kd, r) * r * r / slope).norm()
        })
        .fold(0.0, f64::max)
}

/// Central difference of `H` in `tau` without forming `H(tau + h) - H(tau - h)`
/// by subtraction: the `p` terms cancel exactly and
/// `delta+^i - delta-^i = (delta+ - delta-) sum delta+^(i-1-j) delta-^j`
/// with `delta+ - delta- = -(tau+ - tau-) s^2 / ((tau+ s + 1)(tau- s + 1))`.
/// Returns `(H(tau+) - H(tau-), tau+ - tau-, H(tau+), H(tau-))`.
pub fn h_difference(
    cl: &DirtyClosedLoop,
    s: Complex64,
    tau: f64,
    h: f64,
) -> (Complex64, f64, Complex64, Complex64) {
    let (tp, tm) = (tau + h, tau - h);
    let width = tp - tm;
    let dp = s / (s * tp + 1.0);
    let dm = s / (s * tm + 1.0);
    let gap = -s * s * width / ((s * tp + 1.0) * (s * tm + 1.0));
    let k = cl.k().coeffs();
    let mut diff = Complex64::new(0.0, 0.0);
    for (i, &ki) in k.iter().enumerate().skip(1) {
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..i {
            sum += dp.powu((i - 1 - j) as u32) * dm.powu(j as u32);
        }
        diff -= gap * sum * ki;
    }
    let hp = cl.eval_h(s, tp).unwrap();
    let hm = cl.eval_h(s, tm).unwrap();
    (diff, width, hp, hm)
}

pub fn fd_dh_dtau(cl: &DirtyClosedLoop, s: Complex64, tau: f64, h: f64) -> Complex64 {
    let (diff, width, _, _) = h_difference(cl, s, tau, h);
    diff / width
}

/// Central difference of `log |H|^2` in `tau`, via
/// `|H+|^2 - |H-|^2 = Re((H+ - H-) conj(H+ + H-))`.
pub fn fd_log_mag(cl: &DirtyClosedLoop, s: Complex64, tau: f64, h: f64) -> f64 {
    let (diff, width, hp, hm) = h_difference(cl, s, tau, h);
    let ratio = (diff * (hp + hm).conj()).re / hm.norm_sqr();
    ratio.ln_1p() / width
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Distance from `target` to the nearest entry of `roots`.
pub fn nearest(roots: &[Complex64], target: Complex64) -> f64 {
    roots
        .iter()
        .map(|z| (z - target).norm())
        .fold(f64::INFINITY, f64::min)
}

pub fn rel_err(got: Complex64, want: Complex64) -> f64 {
    (got - want).norm() / want.norm().max(f64::MIN_POSITIVE)
}
