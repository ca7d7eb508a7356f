//! Distance between persistence diagrams by optimal matching.
//!
//! Each diagram is augmented with the diagonal projections of the other's
//! points, giving two sets of equal size n + m. Matching an off-diagonal
//! point to an off-diagonal point costs the Euclidean distance raised to the
//! exponent q; matching it to any diagonal slot costs its own perpendicular
//! distance to the diagonal raised to q; diagonal-to-diagonal matches are
//! free. The distance is the q-th root of the minimal total cost. With the
//! default q = 2 this is the 2-Wasserstein diagram distance; q = 1 sums
//! plain segment lengths under the same outer root convention.
//!
//! Relaxation note: restricting each off-diagonal point to its own
//! projection slot (rather than any diagonal slot) yields the same optimum,
//! because diagonal slots are interchangeable at zero cost.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::assignment::min_cost_assignment;
use crate::error::{Error, Result};
use crate::persistence::{PersistenceDiagram, PersistencePoint};

/// Closest point on the diagonal y = x: ((b+d)/2, (b+d)/2).
pub fn diagonal_projection(p: &PersistencePoint) -> (f64, f64) {
    let mid = 0.5 * (p.birth + p.death);
    (mid, mid)
}

/// Distance from a (birth, death) point to the diagonal: (d - b) / sqrt(2).
fn perpendicular(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / std::f64::consts::SQRT_2
}

fn euclidean(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Cost matrix over the two augmented point sets. Rows are the off-diagonal
/// points of X followed by diagonal slots; columns likewise for Y.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    entries: Vec<Vec<f64>>,
    exponent: f64,
}

impl CostMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

fn check_exponent(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::input(format!("cost exponent q must be >= 1, got {q}")));
    }
    Ok(())
}

/// Cost matrix between raw (birth, death) point sets.
fn cost_matrix_points(xs: &[(f64, f64)], ys: &[(f64, f64)], q: f64) -> CostMatrix {
    let (n, m) = (xs.len(), ys.len());
    let k = n + m;
    let mut entries = vec![vec![0.0; k]; k];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            entries[i][j] = euclidean(x, y).powf(q);
        }
        let perp = perpendicular(x).powf(q);
        for j in m..k {
            entries[i][j] = perp;
        }
    }
    for (j, &y) in ys.iter().enumerate() {
        let perp = perpendicular(y).powf(q);
        for row in entries.iter_mut().take(k).skip(n) {
            row[j] = perp;
        }
    }
    CostMatrix {
        entries,
        exponent: q,
    }
}

fn diagram_points(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    d.points().iter().map(|p| (p.birth, p.death)).collect()
}

/// Cost matrix between two diagrams of the same homological dimension.
pub fn cost_matrix(x: &PersistenceDiagram, y: &PersistenceDiagram, q: f64) -> Result<CostMatrix> {
    if x.dim() != y.dim() {
        return Err(Error::input(format!(
            "diagram dimensions differ: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    check_exponent(q)?;
    Ok(cost_matrix_points(
        &diagram_points(x),
        &diagram_points(y),
        q,
    ))
}

/// Minimum-cost bijection over the augmented sets: (assignment, total cost).
pub fn optimal_assignment(cm: &CostMatrix) -> Result<(Vec<usize>, f64)> {
    min_cost_assignment(&cm.entries)
}

/// Distance between raw (birth, death) point sets: (min total cost)^(1/q).
/// Arguments are ordered canonically first, so the result is exactly
/// symmetric in its inputs.
pub fn point_set_distance(xs: &[(f64, f64)], ys: &[(f64, f64)], q: f64) -> Result<f64> {
    check_exponent(q)?;
    let swap = matches!(compare_point_sets(xs, ys), std::cmp::Ordering::Greater);
    let (a, b) = if swap { (ys, xs) } else { (xs, ys) };
    if a.is_empty() && b.is_empty() {
        return Ok(0.0);
    }
    let (_, total) = optimal_assignment(&cost_matrix_points(a, b, q))?;
    Ok(total.max(0.0).powf(1.0 / q))
}

fn compare_point_sets(xs: &[(f64, f64)], ys: &[(f64, f64)]) -> std::cmp::Ordering {
    xs.len().cmp(&ys.len()).then_with(|| {
        for (x, y) in xs.iter().zip(ys) {
            let ord = x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1));
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    })
}

/// Distance between two diagrams of the same homological dimension.
pub fn diagram_distance(x: &PersistenceDiagram, y: &PersistenceDiagram, q: f64) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::input(format!(
            "diagram dimensions differ: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    point_set_distance(&diagram_points(x), &diagram_points(y), q)
}

/// Full symmetric matrix of pairwise diagram distances, computed in parallel
/// with a deterministic merge order.
pub fn pairwise_distance_matrix(diagrams: &[PersistenceDiagram], q: f64) -> Result<Vec<Vec<f64>>> {
    let n = diagrams.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let computed: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| diagram_distance(&diagrams[i], &diagrams[j], q))
        .collect();
    let computed = computed?;
    let mut matrix = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(computed) {
        matrix[i][j] = d;
        matrix[j][i] = d;
    }
    Ok(matrix)
}

/// Writes a labeled distance matrix: header row of identifiers, then one
/// labeled row per diagram.
pub fn write_distance_matrix_csv(
    path: impl AsRef<Path>,
    ids: &[String],
    matrix: &[Vec<f64>],
) -> Result<()> {
    let mut out = std::fs::File::create(path.as_ref())?;
    writeln!(out, "id,{}", ids.join(","))?;
    for (id, row) in ids.iter().zip(matrix) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", id, cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;
    use rand::Rng;

    fn diagram(dim: usize, r_max: f64, pts: &[(f64, f64)]) -> PersistenceDiagram {
        let points = pts
            .iter()
            .map(|&(birth, death)| PersistencePoint {
                birth,
                death,
                dim,
                essential: false,
            })
            .collect();
        PersistenceDiagram::new(dim, r_max, points).unwrap()
    }

    /// Exhaustive minimum over all bijections of the augmented sets, with
    /// costs computed from first principles.
    fn brute_force_distance(xs: &[(f64, f64)], ys: &[(f64, f64)], q: f64) -> f64 {
        let (n, m) = (xs.len(), ys.len());
        let k = n + m;
        if k == 0 {
            return 0.0;
        }
        // left points: off-diagonal then projections of ys
        let left: Vec<(bool, (f64, f64))> = xs
            .iter()
            .map(|&p| (false, p))
            .chain(ys.iter().map(|&(b, d)| {
                let mid = 0.5 * (b + d);
                (true, (mid, mid))
            }))
            .collect();
        let right: Vec<(bool, (f64, f64))> = ys
            .iter()
            .map(|&p| (false, p))
            .chain(xs.iter().map(|&(b, d)| {
                let mid = 0.5 * (b + d);
                (true, (mid, mid))
            }))
            .collect();
        (0..k)
            .permutations(k)
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        let (ldiag, lp) = left[i];
                        let (rdiag, rp) = right[j];
                        if ldiag && rdiag {
                            0.0
                        } else {
                            euclidean(lp, rp).powf(q)
                        }
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            .powf(1.0 / q)
    }

    #[test]
    fn projection_examples() {
        let p = PersistencePoint {
            birth: 1.0,
            death: 3.0,
            dim: 1,
            essential: false,
        };
        assert_eq!(diagonal_projection(&p), (2.0, 2.0));
        assert_abs_diff_eq!(
            euclidean((1.0, 3.0), diagonal_projection(&p)),
            2.0f64.sqrt(),
            epsilon = 1e-15
        );
        let q = PersistencePoint {
            birth: 0.0,
            death: 6.0,
            dim: 0,
            essential: true,
        };
        assert_eq!(diagonal_projection(&q), (3.0, 3.0));
        assert_abs_diff_eq!(
            euclidean((0.0, 6.0), (3.0, 3.0)),
            6.0 / 2.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cost_matrix_examples() {
        // single point against the empty diagram: one projection slot
        let x = diagram(1, 10.0, &[(1.0, 3.0)]);
        let empty = PersistenceDiagram::empty(1, 10.0);
        let cm = cost_matrix(&x, &empty, 2.0).unwrap();
        assert_eq!(cm.size(), 1);
        assert_abs_diff_eq!(cm.entries()[0][0], 2.0, epsilon = 1e-12);

        let cm = cost_matrix(&diagram(1, 10.0, &[(1.0, 3.0)]), &diagram(1, 10.0, &[(1.0, 2.0)]), 2.0)
            .unwrap();
        assert_eq!(cm.size(), 2);
        assert_abs_diff_eq!(cm.entries()[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cm.entries()[0][1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cm.entries()[1][0], 0.5, epsilon = 1e-12);
        assert_eq!(cm.entries()[1][1], 0.0);
    }

    #[test]
    fn empty_diagrams_have_zero_distance() {
        let a = PersistenceDiagram::empty(1, 5.0);
        let b = PersistenceDiagram::empty(1, 5.0);
        assert_eq!(diagram_distance(&a, &b, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn distance_examples() {
        let x = diagram(1, 10.0, &[(1.0, 3.0)]);
        assert_eq!(diagram_distance(&x, &x, 2.0).unwrap(), 0.0);
        let empty = PersistenceDiagram::empty(1, 10.0);
        assert_abs_diff_eq!(
            diagram_distance(&x, &empty, 2.0).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-12
        );
        let y = diagram(1, 10.0, &[(1.0, 2.0)]);
        assert_abs_diff_eq!(diagram_distance(&x, &y, 2.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let x = diagram(0, 10.0, &[(0.0, 1.0)]);
        let y = diagram(1, 10.0, &[(0.0, 1.0)]);
        assert!(diagram_distance(&x, &y, 2.0).is_err());
        assert!(cost_matrix(&x, &y, 2.0).is_err());
        assert!(diagram_distance(&x, &x, 0.5).is_err());
    }

    #[test]
    fn symmetry_is_exact_and_matches_oracle() {
        let mut rng = crate::seeds::rng(905, &[]);
        for q in [1.0, 2.0] {
            for _ in 0..150 {
                let n = rng.random_range(0..=4usize);
                let m = rng.random_range(0..=(7 - n).min(4));
                let make = |rng: &mut rand_chacha::ChaCha8Rng, count: usize| {
                    (0..count)
                        .map(|_| {
                            let b = rng.random::<f64>() * 2.0;
                            let d = b + rng.random::<f64>() * 2.0 + 1e-6;
                            (b, d)
                        })
                        .collect::<Vec<_>>()
                };
                let xs = make(&mut rng, n);
                let ys = make(&mut rng, m);
                let d_xy = point_set_distance(&xs, &ys, q).unwrap();
                let d_yx = point_set_distance(&ys, &xs, q).unwrap();
                assert_eq!(d_xy, d_yx);
                let oracle = brute_force_distance(&xs, &ys, q);
                assert!(
                    (d_xy - oracle).abs() <= 1e-12,
                    "distance {d_xy} vs oracle {oracle} (q={q})"
                );
            }
        }
    }

    #[test]
    fn point_order_within_diagram_is_irrelevant() {
        let pts = [(0.5, 1.5), (0.2, 2.0), (1.0, 1.1)];
        let mut reversed = pts;
        reversed.reverse();
        let a = diagram(1, 5.0, &pts);
        let b = diagram(1, 5.0, &reversed);
        let target = diagram(1, 5.0, &[(0.4, 1.9)]);
        assert_eq!(
            diagram_distance(&a, &target, 2.0).unwrap(),
            diagram_distance(&b, &target, 2.0).unwrap()
        );
    }

    #[test]
    fn diagonal_points_do_not_change_the_distance() {
        let xs = vec![(0.5, 1.5), (0.2, 2.0)];
        let ys = vec![(0.4, 1.9)];
        let base = point_set_distance(&xs, &ys, 2.0).unwrap();
        let mut with_diag = xs.clone();
        with_diag.push((0.7, 0.7));
        assert!((point_set_distance(&with_diag, &ys, 2.0).unwrap() - base).abs() <= 1e-12);
        let mut ys_diag = ys.clone();
        ys_diag.push((1.3, 1.3));
        assert!((point_set_distance(&xs, &ys_diag, 2.0).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let mut rng = crate::seeds::rng(906, &[]);
        for _ in 0..300 {
            let make = |rng: &mut rand_chacha::ChaCha8Rng| {
                let count = rng.random_range(0..=3usize);
                (0..count)
                    .map(|_| {
                        let b = rng.random::<f64>();
                        let d = b + rng.random::<f64>() + 1e-6;
                        (b, d)
                    })
                    .collect::<Vec<_>>()
            };
            let (xs, ys, zs) = (make(&mut rng), make(&mut rng), make(&mut rng));
            let dxz = point_set_distance(&xs, &zs, 2.0).unwrap();
            let dxy = point_set_distance(&xs, &ys, 2.0).unwrap();
            let dyz = point_set_distance(&ys, &zs, 2.0).unwrap();
            assert!(dxz <= dxy + dyz + 1e-9, "{dxz} > {dxy} + {dyz}");
        }
    }

    #[test]
    fn positive_when_multisets_differ() {
        let a = diagram(1, 5.0, &[(0.5, 1.5)]);
        let b = diagram(1, 5.0, &[(0.5, 1.6)]);
        assert!(diagram_distance(&a, &b, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn pairwise_matrix_is_symmetric_with_zero_diagonal() {
        let ds = vec![
            diagram(1, 5.0, &[(0.5, 1.5)]),
            diagram(1, 5.0, &[(0.2, 2.0), (1.0, 1.4)]),
            PersistenceDiagram::empty(1, 5.0),
        ];
        let m = pairwise_distance_matrix(&ds, 2.0).unwrap();
        for i in 0..3 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert!(m[0][1] > 0.0);
    }
}
