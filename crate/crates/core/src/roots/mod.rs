//! Zeros of `H(s, tau)` across the filter time constant.
//!
//! The closed-loop poles are the roots of the numerator `N(., tau)`. For
//! `tau > 0` there are `n + m` of them; at `tau = 0` the degree drops to `n`.
//! The `n` roots that continue to the exact-derivative poles are *tracked*,
//! the remaining `m` come from the filter and run off to infinity as
//! `tau -> 0` (*parasitic*, roughly `-1/tau`).

mod matching;
mod stability;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::closedloop::DirtyClosedLoop;
use crate::error::{Error, Result};
use crate::poly::DEFAULT_ROOT_TOL;

pub use matching::{match_roots, matching_cost, EXACT_MATCH_LIMIT};
pub use stability::{
    certify_epsilon, certify_grid, critical_tau, is_hurwitz, routh_hurwitz, stability_at_tau,
    CriticalTau, EpsilonCertificate, RouthResult, StabilityMethod, StabilityReport,
    CERTIFY_DECADES, COARSE_SAMPLES, STABILITY_MARGIN,
};

/// Per-step continuity budget: a matched root may move at most
/// `CONTINUITY_BUDGET * (1 + |root|)` between consecutive sweep points.
pub const CONTINUITY_BUDGET: f64 = 0.25;
/// Maximum nesting of step bisection.
pub const MAX_REFINE_DEPTH: usize = 20;

/// Root trajectories over a `tau` grid.
///
/// `tracked[i][k]` is tracked root `i` at `taus[k]`, starting from the
/// `i`-th root of `p - k` at `taus[0] = 0`. Parasitic roots only exist for
/// `tau > 0`, so `parasitic[j][k]` is defined at `taus[k + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSweep {
    pub taus: Vec<f64>,
    /// True for points inserted by continuity refinement.
    pub refined: Vec<bool>,
    pub tracked: Vec<Vec<Complex64>>,
    pub parasitic: Vec<Vec<Complex64>>,
    /// Largest matched movement of any root on step `k -> k + 1`.
    pub step_displacements: Vec<f64>,
}

impl RootSweep {
    /// Tracked roots at grid index `k`.
    pub fn tracked_at(&self, k: usize) -> Vec<Complex64> {
        self.tracked.iter().map(|path| path[k]).collect()
    }

    /// Parasitic roots at grid index `k` (empty at `tau = 0`).
    pub fn parasitic_at(&self, k: usize) -> Vec<Complex64> {
        if k == 0 {
            return Vec::new();
        }
        self.parasitic.iter().map(|path| path[k - 1]).collect()
    }

    /// Distance of each tracked root from its `tau = 0` ancestor at index `k`.
    pub fn tracked_displacement(&self, k: usize) -> Vec<f64> {
        self.tracked
            .iter()
            .map(|path| (path[k] - path[0]).norm())
            .collect()
    }
}

/// Split of positive-`tau` paths into tracked and parasitic families.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `tracked[i]` is the path continuing baseline root `i`.
    pub tracked: Vec<usize>,
    pub parasitic: Vec<usize>,
}

/// Zeros of `H(., tau)`: the `n` roots of `p - k` at `tau = 0`, otherwise the
/// `n + m` roots of `N(., tau)`.
pub fn roots_at_tau(cl: &DirtyClosedLoop, tau: f64) -> Result<Vec<Complex64>> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    let poly = cl.numerator_at(tau);
    let expected = if tau == 0.0 { cl.n() } else { cl.n() + cl.m() };
    if poly.degree() != expected {
        return Err(Error::DegreeDrop {
            tau,
            expected,
            got: poly.degree(),
        });
    }
    poly.roots(DEFAULT_ROOT_TOL)
}

/// Decides which positive-`tau` paths are tracked by matching their first
/// (smallest `tau`) points to the `tau = 0` roots.
pub fn classify_parasitic(
    baseline: &[Complex64],
    paths: &[Vec<Complex64>],
) -> Result<Classification> {
    let endpoints: Vec<Complex64> = paths
        .iter()
        .map(|p| {
            p.first()
                .copied()
                .ok_or_else(|| Error::invalid("empty root path"))
        })
        .collect::<Result<_>>()?;
    let tracked = matching::assign_into(baseline, &endpoints)?;
    let parasitic = (0..paths.len()).filter(|j| !tracked.contains(j)).collect();
    Ok(Classification { tracked, parasitic })
}

fn within_budget(from: Complex64, to: Complex64) -> bool {
    (to - from).norm() <= CONTINUITY_BUDGET * (1.0 + from.norm())
}

/// Matches a sweep across `grid`, which must start at 0 and ascend.
///
/// Steps whose matched displacement breaks the continuity budget are
/// bisected (geometrically for `tau > 0`) up to [`MAX_REFINE_DEPTH`] levels.
pub fn sweep(cl: &DirtyClosedLoop, grid: &[f64]) -> Result<RootSweep> {
    validate_grid(grid)?;
    let baseline = roots_at_tau(cl, 0.0)?;
    let positives = &grid[1..];
    let raw: Vec<Vec<Complex64>> = positives
        .par_iter()
        .map(|&tau| roots_at_tau(cl, tau))
        .collect::<Result<_>>()?;

    let mut builder = SweepBuilder::default();
    if positives.is_empty() {
        return Ok(builder.finish(cl, &baseline));
    }

    // Shrink the first step until every baseline root has a close partner.
    let mut anchors: Vec<(f64, Vec<Complex64>)> = vec![(positives[0], raw[0].clone())];
    loop {
        let (tau, roots) = &anchors[anchors.len() - 1];
        let assign = matching::assign_into(&baseline, roots)?;
        if baseline
            .iter()
            .zip(&assign)
            .all(|(b, &j)| within_budget(*b, roots[j]))
        {
            builder.tracked_cols = assign;
            break;
        }
        if anchors.len() > MAX_REFINE_DEPTH {
            return Err(Error::SweepDepth {
                tau: *tau,
                depth: MAX_REFINE_DEPTH,
                partial: Box::new(builder.finish(cl, &baseline)),
            });
        }
        let half = tau / 2.0;
        anchors.push((half, roots_at_tau(cl, half)?));
    }
    anchors.reverse();

    let mut queue: Vec<(f64, Vec<Complex64>, bool)> = Vec::new();
    let n_inserted = anchors.len() - 1;
    for (idx, (tau, roots)) in anchors.into_iter().enumerate() {
        queue.push((tau, roots, idx < n_inserted));
    }
    for (tau, roots) in positives.iter().zip(raw).skip(1) {
        queue.push((*tau, roots, false));
    }

    let mut queue = queue.into_iter();
    let (tau0, first, refined0) = queue.next().expect("non-empty");
    builder.push(tau0, first, refined0, 0.0);
    for (tau, roots, refined) in queue {
        if let Err(err) = builder.advance(cl, tau, roots, refined, 0) {
            return Err(match err {
                Error::SweepDepth { tau, depth, .. } => Error::SweepDepth {
                    tau,
                    depth,
                    partial: Box::new(builder.finish(cl, &baseline)),
                },
                other => other,
            });
        }
    }
    Ok(builder.finish(cl, &baseline))
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::invalid("tau grid must start at 0"));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("tau grid must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("tau grid must be strictly ascending"));
    }
    Ok(())
}

/// Positive-`tau` points with roots in consistent path order.
#[derive(Default)]
struct SweepBuilder {
    taus: Vec<f64>,
    refined: Vec<bool>,
    ordered: Vec<Vec<Complex64>>,
    displacements: Vec<f64>,
    /// Columns of `ordered` holding the roots that continue the baseline.
    /// Only these are held to the continuity budget: parasitic roots scale
    /// like `1 / tau` and would force refinement of every geometric step.
    tracked_cols: Vec<usize>,
}

impl SweepBuilder {
    fn push(&mut self, tau: f64, roots: Vec<Complex64>, refined: bool, displacement: f64) {
        self.taus.push(tau);
        self.ordered.push(roots);
        self.refined.push(refined);
        self.displacements.push(displacement);
    }

    fn advance(
        &mut self,
        cl: &DirtyClosedLoop,
        tau: f64,
        raw: Vec<Complex64>,
        refined: bool,
        depth: usize,
    ) -> Result<()> {
        let prev_tau = self.taus[self.taus.len() - 1];
        let prev = &self.ordered[self.ordered.len() - 1];
        let perm = match_roots(prev, &raw)?;
        let next: Vec<Complex64> = perm.iter().map(|&j| raw[j]).collect();
        let tracked = || self.tracked_cols.iter().map(|&i| (prev[i], next[i]));
        if tracked().all(|(a, b)| within_budget(a, b)) {
            let displacement = tracked().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            self.push(tau, next, refined, displacement);
            return Ok(());
        }
        if depth >= MAX_REFINE_DEPTH {
            return Err(Error::SweepDepth {
                tau,
                depth,
                partial: Box::new(RootSweep {
                    taus: Vec::new(),
                    refined: Vec::new(),
                    tracked: Vec::new(),
                    parasitic: Vec::new(),
                    step_displacements: Vec::new(),
                }),
            });
        }
        let mid = (prev_tau * tau).sqrt();
        let mid_roots = roots_at_tau(cl, mid)?;
        self.advance(cl, mid, mid_roots, true, depth + 1)?;
        self.advance(cl, tau, raw, refined, depth + 1)
    }

    fn finish(self, cl: &DirtyClosedLoop, baseline: &[Complex64]) -> RootSweep {
        let width = cl.n() + cl.m();
        let paths: Vec<Vec<Complex64>> = (0..width)
            .map(|i| self.ordered.iter().map(|roots| roots[i]).collect())
            .collect();

        let mut taus = vec![0.0];
        taus.extend(&self.taus);
        let mut refined = vec![false];
        refined.extend(&self.refined);

        if self.taus.is_empty() {
            return RootSweep {
                taus,
                refined,
                tracked: baseline.iter().map(|&z| vec![z]).collect(),
                parasitic: vec![Vec::new(); cl.m()],
                step_displacements: Vec::new(),
            };
        }

        let class = classify_parasitic(baseline, &paths).expect("n <= n + m paths");
        let tracked: Vec<Vec<Complex64>> = class
            .tracked
            .iter()
            .zip(baseline)
            .map(|(&j, &z0)| {
                let mut path = vec![z0];
                path.extend(&paths[j]);
                path
            })
            .collect();
        let parasitic: Vec<Vec<Complex64>> =
            class.parasitic.iter().map(|&j| paths[j].clone()).collect();

        let mut step_displacements = Vec::with_capacity(self.taus.len());
        step_displacements.push(
            tracked
                .iter()
                .map(|p| (p[1] - p[0]).norm())
                .fold(0.0, f64::max),
        );
        step_displacements.extend(&self.displacements[1..]);

        RootSweep {
            taus,
            refined,
            tracked,
            parasitic,
            step_displacements,
        }
    }
}
