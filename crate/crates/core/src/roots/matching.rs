//! Minimum-cost assignment between root lists.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest list size solved with the exact assignment algorithm.
pub const EXACT_MATCH_LIMIT: usize = 12;

/// Matches `prev[i]` to `next[perm[i]]`, minimising the summed distance.
///
/// Lists up to [`EXACT_MATCH_LIMIT`] long are solved exactly; longer ones
/// use greedy nearest pairs followed by pairwise swaps.
pub fn match_roots(prev: &[Complex64], next: &[Complex64]) -> Result<Vec<usize>> {
    if prev.len() != next.len() {
        return Err(Error::invalid(format!(
            "cannot match {} roots against {}",
            prev.len(),
            next.len()
        )));
    }
    if prev.len() <= EXACT_MATCH_LIMIT {
        Ok(hungarian(&cost_matrix(prev, next)))
    } else {
        Ok(greedy_with_swaps(prev, next))
    }
}

/// Injective assignment of every `prev` root to a distinct `next` root.
/// Requires `prev.len() <= next.len()`.
pub(crate) fn assign_into(prev: &[Complex64], next: &[Complex64]) -> Result<Vec<usize>> {
    if prev.len() > next.len() {
        return Err(Error::invalid(format!(
            "cannot assign {} roots into {}",
            prev.len(),
            next.len()
        )));
    }
    if next.len() <= EXACT_MATCH_LIMIT {
        Ok(hungarian(&cost_matrix(prev, next)))
    } else {
        Ok(greedy_with_swaps(prev, next))
    }
}

pub fn matching_cost(prev: &[Complex64], next: &[Complex64], perm: &[usize]) -> f64 {
    prev.iter()
        .zip(perm)
        .map(|(a, &j)| (a - next[j]).norm())
        .sum()
}

fn cost_matrix(prev: &[Complex64], next: &[Complex64]) -> Vec<Vec<f64>> {
    prev.iter()
        .map(|a| next.iter().map(|b| (a - b).norm()).collect())
        .collect()
}

/// Hungarian algorithm with potentials for an `n x m` cost matrix, `n <= m`.
/// Returns the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

fn greedy_with_swaps(prev: &[Complex64], next: &[Complex64]) -> Vec<usize> {
    let dist = |i: usize, j: usize| (prev[i] - next[j]).norm();
    let mut pairs: Vec<(f64, usize, usize)> = (0..prev.len())
        .flat_map(|i| (0..next.len()).map(move |j| (i, j)))
        .map(|(i, j)| (dist(i, j), i, j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut perm = vec![usize::MAX; prev.len()];
    let mut taken = vec![false; next.len()];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !taken[j] {
            perm[i] = j;
            taken[j] = true;
        }
    }

    // Pairwise exchange until no swap lowers the cost.
    for _ in 0..prev.len() * prev.len() {
        let mut improved = false;
        for a in 0..prev.len() {
            for b in (a + 1)..prev.len() {
                let before = dist(a, perm[a]) + dist(b, perm[b]);
                let after = dist(a, perm[b]) + dist(b, perm[a]);
                if after < before * (1.0 - 1e-15) {
                    perm.swap(a, b);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identical_lists_match_identically() {
        let a = vec![c(-1.0, 0.0), c(-2.0, 0.5), c(-2.0, -0.5), c(3.0, 0.0)];
        let perm = match_roots(&a, &a).unwrap();
        assert_eq!(perm, vec![0, 1, 2, 3]);
        assert_eq!(matching_cost(&a, &a, &perm), 0.0);
    }

    #[test]
    fn nearest_neighbour_cross_matching() {
        let prev = vec![c(-1.0, 0.0), c(-2.0, 0.0)];
        let next = vec![c(-2.01, 0.0), c(-0.99, 0.0)];
        assert_eq!(match_roots(&prev, &next).unwrap(), vec![1, 0]);
    }

    #[test]
    fn conjugate_pairs_stay_paired() {
        let prev = vec![c(-1.0, 2.0), c(-1.0, -2.0)];
        let next = vec![c(-1.05, -1.98), c(-1.05, 1.98)];
        let perm = match_roots(&prev, &next).unwrap();
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(next[perm[0]], next[perm[1]].conj());
    }

    #[test]
    fn length_mismatch_is_invalid() {
        let err = match_roots(&[c(0.0, 0.0)], &[]).unwrap_err();
        assert!(err.is_invalid_input());
    }

    #[test]
    fn rectangular_assignment_leaves_far_roots() {
        let prev = vec![c(-1.0, 0.0), c(-2.0, 0.0)];
        let next = vec![c(-997.0, 0.0), c(-1.001, 0.0), c(-1.998, 0.0)];
        assert_eq!(assign_into(&prev, &next).unwrap(), vec![1, 2]);
    }

    #[test]
    fn hungarian_beats_greedy_trap() {
        // Greedy takes (0,0) at cost 1 and then pays 10; the optimum is 2 + 2.
        let cost = vec![vec![1.0, 2.0], vec![2.0, 10.0]];
        assert_eq!(hungarian(&cost), vec![1, 0]);
    }

    #[test]
    fn greedy_path_agrees_with_exact_on_perturbations() {
        let prev: Vec<Complex64> = (0..16)
            .map(|i| Complex64::from_polar(1.0 + 0.1 * i as f64, 0.4 * i as f64))
            .collect();
        let next: Vec<Complex64> = prev.iter().rev().map(|z| z + c(0.01, -0.01)).collect();
        let perm = match_roots(&prev, &next).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            assert_eq!(j, 15 - i);
        }
    }
}
