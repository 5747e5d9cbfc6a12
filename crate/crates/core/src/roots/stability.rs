//! Hurwitz tests, the critical filter time constant, and epsilon certificates.

use num_complex::Complex64;
use serde::Serialize;

use crate::closedloop::DirtyClosedLoop;
use crate::error::{Error, Result};
use crate::poly::{RealPoly, DEFAULT_ROOT_TOL};

use super::{roots_at_tau, sweep};

/// Relative stability margin: a root `z` counts as stable when
/// `Re z < -STABILITY_MARGIN * (1 + |z|)`.
pub const STABILITY_MARGIN: f64 = 1e-9;
/// Geometric samples in the coarse scan of [`critical_tau`].
pub const COARSE_SAMPLES: usize = 64;
/// Decades below `tau_max` covered by the coarse scan of [`critical_tau`].
const COARSE_DECADES: f64 = 9.0;
/// Decades below `tau_max` covered by [`certify_epsilon`].
pub const CERTIFY_DECADES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMethod {
    RootBased,
    RouthHurwitz,
    Winding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub tau: Option<f64>,
    pub roots: Vec<Complex64>,
    pub max_real_part: f64,
    pub stable: bool,
    pub method: StabilityMethod,
}

/// Root-based Hurwitz test with relative margin `margin` (see [`STABILITY_MARGIN`]).
/// Boundary cases report unstable.
pub fn is_hurwitz(a: &RealPoly, margin: f64) -> Result<StabilityReport> {
    if a.degree() < 1 {
        return Err(Error::invalid("Hurwitz test needs degree >= 1"));
    }
    let roots = a.roots(DEFAULT_ROOT_TOL)?;
    Ok(report_from_roots(None, roots, margin))
}

fn report_from_roots(tau: Option<f64>, roots: Vec<Complex64>, margin: f64) -> StabilityReport {
    let max_real_part = roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let stable = roots.iter().all(|z| z.re < -margin * (1.0 + z.norm()));
    StabilityReport {
        tau,
        roots,
        max_real_part,
        stable,
        method: StabilityMethod::RootBased,
    }
}

/// Root-based stability of the closed loop at a given `tau`.
pub fn stability_at_tau(cl: &DirtyClosedLoop, tau: f64) -> Result<StabilityReport> {
    let roots = roots_at_tau(cl, tau)?;
    Ok(report_from_roots(Some(tau), roots, STABILITY_MARGIN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouthResult {
    pub stable: bool,
    pub rhp_count: usize,
}

/// Routh array test. `rhp_count` is the number of sign changes in the first
/// column. A zero (to rounding) first-column entry makes the test inconclusive.
pub fn routh_hurwitz(a: &RealPoly) -> Result<RouthResult> {
    let degree = a.degree();
    if degree < 1 {
        return Err(Error::invalid("Routh test needs degree >= 1"));
    }
    let desc: Vec<f64> = a.coeffs().iter().rev().copied().collect();
    let width = degree / 2 + 1;
    let mut rows: Vec<Vec<f64>> = vec![
        (0..width)
            .map(|j| desc.get(2 * j).copied().unwrap_or(0.0))
            .collect(),
        (0..width)
            .map(|j| desc.get(2 * j + 1).copied().unwrap_or(0.0))
            .collect(),
    ];
    if rows[1][0] == 0.0 {
        return Err(Error::Inconclusive("zero in first column at row 1".into()));
    }
    for k in 2..=degree {
        let (above, prev) = (&rows[k - 2], &rows[k - 1]);
        let pivot = prev[0];
        let row: Vec<f64> = (0..width)
            .map(|j| {
                let a_next = above.get(j + 1).copied().unwrap_or(0.0);
                let p_next = prev.get(j + 1).copied().unwrap_or(0.0);
                (pivot * a_next - above[0] * p_next) / pivot
            })
            .collect();
        let scale = above
            .iter()
            .chain(prev.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        if row[0].abs() <= 1e-12 * scale {
            return Err(Error::Inconclusive(format!(
                "zero in first column at row {k}"
            )));
        }
        rows.push(row);
    }
    let rhp_count = rows
        .windows(2)
        .filter(|w| (w[0][0] > 0.0) != (w[1][0] > 0.0))
        .count();
    Ok(RouthResult {
        stable: rhp_count == 0,
        rhp_count,
    })
}

/// Smallest `tau` at which the loop loses stability, bracketed by bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalTau {
    pub tau_crit: Option<f64>,
    /// Minimum safe filter bandwidth `1 / tau_crit`.
    pub sigma_crit: Option<f64>,
    /// Half-width of the final bracket relative to `tau_crit`.
    pub bracket_width: Option<f64>,
    pub tau_max_searched: f64,
}

fn require_stable_baseline(cl: &DirtyClosedLoop) -> Result<()> {
    let report = stability_at_tau(cl, 0.0)?;
    if !report.stable {
        return Err(Error::invalid(format!(
            "baseline p - k must be Hurwitz (max real part {})",
            report.max_real_part
        )));
    }
    Ok(())
}

/// Scans `COARSE_SAMPLES` geometric points up to `tau_max` for the first
/// unstable one, then bisects until the bracket's relative width is `<= tol`.
pub fn critical_tau(cl: &DirtyClosedLoop, tau_max: f64, tol: f64) -> Result<CriticalTau> {
    if !(tau_max.is_finite() && tau_max > 0.0) {
        return Err(Error::invalid(format!(
            "tau_max must be positive, got {tau_max}"
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!(
            "tolerance must lie in (0, 1), got {tol}"
        )));
    }
    require_stable_baseline(cl)?;

    let stable = |tau: f64| stability_at_tau(cl, tau).map(|r| r.stable);
    let mut lo = 0.0;
    let mut hi = None;
    for i in 0..COARSE_SAMPLES {
        let exponent =
            -COARSE_DECADES * (COARSE_SAMPLES - 1 - i) as f64 / (COARSE_SAMPLES - 1) as f64;
        let tau = tau_max * 10f64.powf(exponent);
        if stable(tau)? {
            lo = tau;
        } else {
            hi = Some(tau);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(CriticalTau {
            tau_crit: None,
            sigma_crit: None,
            bracket_width: None,
            tau_max_searched: tau_max,
        });
    };

    for _ in 0..400 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau_crit = 0.5 * (lo + hi);
    Ok(CriticalTau {
        tau_crit: Some(tau_crit),
        sigma_crit: Some(1.0 / tau_crit),
        bracket_width: Some((hi - lo) / (hi + lo)),
        tau_max_searched: tau_max,
    })
}

/// Result of [`certify_epsilon`]: a sampled, not rigorous, certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonCertificate {
    pub epsilon: f64,
    /// Largest grid `tau` such that every tracked root stayed within
    /// `epsilon` of its `tau = 0` position at all grid points up to it;
    /// 0 when even the smallest sample fails.
    pub tau_star: f64,
    pub tau_max: f64,
    pub points_per_decade: usize,
    pub decades: usize,
    /// Grid `tau` values checked, ascending (excluding 0).
    #[serde(skip)]
    pub grid: Vec<f64>,
}

/// Geometric grid with `points_per_decade` points per decade over
/// `[tau_max * 10^-CERTIFY_DECADES, tau_max]`, preceded by 0.
pub fn certify_grid(tau_max: f64, points_per_decade: usize) -> Vec<f64> {
    let total = CERTIFY_DECADES * points_per_decade;
    let mut grid = vec![0.0];
    grid.extend((0..=total).rev().map(|k| {
        if k == 0 {
            tau_max
        } else {
            tau_max * 10f64.powf(-(k as f64) / points_per_decade as f64)
        }
    }));
    grid
}

/// Largest sampled `tau*` keeping every tracked pole within `epsilon` of its
/// exact-derivative position for all sampled `tau <= tau*`.
///
/// Points between samples are not checked, so this certifies the sampled
/// grid only.
pub fn certify_epsilon(
    cl: &DirtyClosedLoop,
    epsilon: f64,
    tau_max: f64,
    points_per_decade: usize,
) -> Result<EpsilonCertificate> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(tau_max.is_finite() && tau_max > 0.0) {
        return Err(Error::invalid(format!(
            "tau_max must be positive, got {tau_max}"
        )));
    }
    if points_per_decade == 0 {
        return Err(Error::invalid(
            "grid density must be at least 1 point per decade",
        ));
    }
    require_stable_baseline(cl)?;

    let grid = certify_grid(tau_max, points_per_decade);
    let sw = sweep(cl, &grid)?;
    let mut tau_star = 0.0;
    for (k, &tau) in sw.taus.iter().enumerate().skip(1) {
        if sw.refined[k] {
            continue;
        }
        if sw.tracked_displacement(k).iter().all(|&d| d <= epsilon) {
            tau_star = tau;
        } else {
            break;
        }
    }
    Ok(EpsilonCertificate {
        epsilon,
        tau_star,
        tau_max,
        points_per_decade,
        decades: CERTIFY_DECADES,
        grid: grid[1..].to_vec(),
    })
}
