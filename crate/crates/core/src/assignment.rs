//! Minimum-cost assignment via the Hungarian algorithm with potentials,
//! O(n^3) over f64 costs.

use crate::error::{Error, Result};

/// Returns (row -> column permutation, total cost) minimizing the sum of
/// selected entries of a square, finite cost matrix.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::input(format!(
                "cost matrix row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "cost matrix row {i} contains non-finite entry {v}"
            )));
        }
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // column n is a virtual start column; p[j] = row matched to column j
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![NONE; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == NONE {
                break;
            }
        }
        // augment along the alternating path
        while j0 != n {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }

    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    for j in 0..n {
        assignment[p[j]] = j;
        total += cost[p[j]][j];
    }
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use rand::Rng;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        (0..n)
            .permutations(n)
            .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn identity_optimal() {
        let cost = vec![vec![0.0, 9.0], vec![9.0, 0.0]];
        let (perm, total) = min_cost_assignment(&cost).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn empty_matrix() {
        let (perm, total) = min_cost_assignment(&[]).unwrap();
        assert!(perm.is_empty());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn known_small_case() {
        let cost = vec![vec![1.0, 2.0], vec![0.5, 0.0]];
        let (perm, total) = min_cost_assignment(&cost).unwrap();
        assert_eq!(total, 1.0);
        assert_eq!(perm, vec![0, 1]);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = crate::seeds::rng(904, &[]);
        for _ in 0..200 {
            let n = rng.random_range(1..=6usize);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>() * 10.0).collect())
                .collect();
            let (perm, total) = min_cost_assignment(&cost).unwrap();
            // perm is a permutation
            let mut seen = vec![false; n];
            for &j in &perm {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let expect = brute_force(&cost);
            assert!(
                (total - expect).abs() <= 1e-9,
                "hungarian {total} vs brute force {expect}"
            );
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(min_cost_assignment(&[vec![0.0, 1.0]]).is_err());
        assert!(min_cost_assignment(&[vec![f64::NAN]]).is_err());
    }
}
