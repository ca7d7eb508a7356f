//! Rank-based homology computations by dense Gaussian elimination over Z2.
//!
//! This is an independent route to Betti numbers and persistent ranks that
//! never touches the column-reduction pipeline in [`crate::persistence`]; the
//! two are cross-checked against each other in tests. Dense elimination is
//! quadratic in memory, so keep inputs small (intended cutoff: complexes of
//! at most ~2000 simplices).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rips::FilteredComplex;

/// Column-major dense Z2 matrix.
struct Z2Matrix {
    rows: usize,
    cols: Vec<Vec<bool>>,
}

impl Z2Matrix {
    fn new(rows: usize, ncols: usize) -> Self {
        Z2Matrix {
            rows,
            cols: vec![vec![false; rows]; ncols],
        }
    }

    fn set(&mut self, i: usize, j: usize) {
        self.cols[j][i] = true;
    }

    /// Rank by column elimination; consumes the matrix.
    fn rank(mut self) -> usize {
        let mut rank = 0;
        let mut pivot_of_row: Vec<Option<usize>> = vec![None; self.rows];
        for j in 0..self.cols.len() {
            loop {
                let Some(low) = self.cols[j].iter().rposition(|&b| b) else {
                    break;
                };
                match pivot_of_row[low] {
                    Some(k) => {
                        let (a, b) = if j < k {
                            let (lo, hi) = self.cols.split_at_mut(k);
                            (&mut lo[j], &hi[0])
                        } else {
                            let (lo, hi) = self.cols.split_at_mut(j);
                            (&mut hi[0], &lo[k])
                        };
                        for (x, y) in a.iter_mut().zip(b) {
                            *x ^= y;
                        }
                    }
                    None => {
                        pivot_of_row[low] = Some(j);
                        rank += 1;
                        break;
                    }
                }
            }
        }
        rank
    }

    /// Basis of the kernel as coefficient vectors over the columns' index
    /// space, via row-echelon elimination with free-variable back-fill.
    fn kernel_basis(mut self) -> Vec<Vec<bool>> {
        let ncols = self.cols.len();
        // row echelon over a row-major copy
        let mut mat: Vec<Vec<bool>> = (0..self.rows)
            .map(|i| (0..ncols).map(|j| self.cols[j][i]).collect())
            .collect();
        self.cols.clear();
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for c in 0..ncols {
            let Some(pr) = (r..mat.len()).find(|&i| mat[i][c]) else {
                continue;
            };
            mat.swap(r, pr);
            for i in 0..mat.len() {
                if i != r && mat[i][c] {
                    for k in c..ncols {
                        let v = mat[r][k];
                        mat[i][k] ^= v;
                    }
                }
            }
            pivot_cols.push(c);
            r += 1;
            if r == mat.len() {
                break;
            }
        }
        let mut basis = Vec::new();
        let pivot_set: Vec<bool> = {
            let mut s = vec![false; ncols];
            for &c in &pivot_cols {
                s[c] = true;
            }
            s
        };
        for free in 0..ncols {
            if pivot_set[free] {
                continue;
            }
            let mut vec = vec![false; ncols];
            vec[free] = true;
            for (row, &pc) in pivot_cols.iter().enumerate() {
                if mat[row][free] {
                    vec[pc] = true;
                }
            }
            basis.push(vec);
        }
        basis
    }
}

/// Simplices of dimension `p` with filtration <= r, in filtration order.
fn simplices_at(fc: &FilteredComplex, r: f64, p: usize) -> Vec<&[usize]> {
    fc.simplices()
        .iter()
        .filter(|s| s.dim() == p && s.filtration() <= r)
        .map(|s| s.vertices())
        .collect()
}

/// Dense boundary matrix of dimension-p simplices at scale r, with rows
/// indexed by the (p-1)-simplices at the same scale.
fn boundary_at(fc: &FilteredComplex, r: f64, p: usize) -> Z2Matrix {
    let cols = simplices_at(fc, r, p);
    if p == 0 {
        return Z2Matrix::new(0, cols.len());
    }
    let rows = simplices_at(fc, r, p - 1);
    let row_index: HashMap<&[usize], usize> =
        rows.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut mat = Z2Matrix::new(rows.len(), cols.len());
    let mut facet = Vec::with_capacity(p);
    for (j, verts) in cols.iter().enumerate() {
        for skip in 0..verts.len() {
            facet.clear();
            facet.extend(verts.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v));
            let i = row_index[facet.as_slice()];
            mat.set(i, j);
        }
    }
    mat
}

fn check_scale(fc: &FilteredComplex, r: f64) -> Result<()> {
    if !(0.0..=fc.r_max()).contains(&r) {
        return Err(Error::input(format!(
            "r = {r} outside the filtration range [0, {}]",
            fc.r_max()
        )));
    }
    Ok(())
}

fn check_dim(fc: &FilteredComplex, p: usize) -> Result<()> {
    if p + 1 > fc.max_dim() {
        return Err(Error::input(format!(
            "homology dimension {p} needs simplices of dimension {}, \
             but the complex was built up to dimension {}",
            p + 1,
            fc.max_dim()
        )));
    }
    Ok(())
}

/// Rank of the dimension-p boundary map of the complex at scale r.
pub fn boundary_rank_at(fc: &FilteredComplex, r: f64, p: usize) -> Result<usize> {
    check_scale(fc, r)?;
    Ok(boundary_at(fc, r, p).rank())
}

/// Betti number of the complex at scale r: count of p-simplices minus the
/// ranks of the boundary maps in and out of dimension p.
pub fn betti_at(fc: &FilteredComplex, r: f64, p: usize) -> Result<usize> {
    check_scale(fc, r)?;
    check_dim(fc, p)?;
    let n_p = simplices_at(fc, r, p).len();
    let rank_out = boundary_at(fc, r, p).rank();
    let rank_in = boundary_at(fc, r, p + 1).rank();
    Ok(n_p - rank_out - rank_in)
}

/// Rank of the map induced on dimension-p homology by the inclusion of the
/// complex at scale b into the complex at scale d >= b.
///
/// Computed as rank[Z_p(b) | B_p(d)] - rank B_p(d), where Z_p(b) is a kernel
/// basis of the boundary map at scale b embedded into the p-simplex index
/// space at scale d, and B_p(d) is the image of the (p+1)-boundary at d.
pub fn persistent_rank(fc: &FilteredComplex, b: f64, d: f64, p: usize) -> Result<usize> {
    check_scale(fc, b)?;
    check_scale(fc, d)?;
    if b > d {
        return Err(Error::input(format!("b = {b} must not exceed d = {d}")));
    }
    check_dim(fc, p)?;

    let cols_b = simplices_at(fc, b, p);
    let cols_d = simplices_at(fc, d, p);
    let index_d: HashMap<&[usize], usize> =
        cols_d.iter().enumerate().map(|(i, s)| (*s, i)).collect();

    let kernel = boundary_at(fc, b, p).kernel_basis();

    let bd = boundary_at(fc, d, p + 1);
    let rank_b = bd.cols.len();
    let mut combined = Z2Matrix::new(cols_d.len(), kernel.len() + rank_b);
    for (j, vec) in kernel.iter().enumerate() {
        for (local, &on) in vec.iter().enumerate() {
            if on {
                combined.set(index_d[cols_b[local]], j);
            }
        }
    }
    // image columns of the (p+1)-boundary at d are already indexed over
    // the p-simplices at d
    for (j, col) in bd.cols.iter().enumerate() {
        for (i, &on) in col.iter().enumerate() {
            if on {
                combined.set(i, kernel.len() + j);
            }
        }
    }
    let rank_image = bd.rank();
    Ok(combined.rank() - rank_image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::rips::build_filtration;

    fn unit_square_complex() -> FilteredComplex {
        let cloud = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        build_filtration(&cloud, 2, 2.0).unwrap()
    }

    #[test]
    fn unit_square_betti_profile() {
        let fc = unit_square_complex();
        // below the side length: four isolated vertices
        assert_eq!(betti_at(&fc, 0.5, 0).unwrap(), 4);
        assert_eq!(betti_at(&fc, 0.5, 1).unwrap(), 0);
        // sides present, diagonals absent: a circle
        assert_eq!(betti_at(&fc, 1.0, 0).unwrap(), 1);
        assert_eq!(betti_at(&fc, 1.0, 1).unwrap(), 1);
        // full complex: contractible in dimensions 0 and 1
        assert_eq!(betti_at(&fc, 2.0, 0).unwrap(), 1);
        assert_eq!(betti_at(&fc, 2.0, 1).unwrap(), 0);
    }

    #[test]
    fn betti_zero_counts_distinct_points_at_zero() {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let fc = build_filtration(&cloud, 2, 3.0).unwrap();
        assert_eq!(betti_at(&fc, 0.0, 0).unwrap(), 3);
    }

    #[test]
    fn parameter_validation() {
        let fc = unit_square_complex();
        assert!(betti_at(&fc, 3.0, 0).is_err());
        assert!(betti_at(&fc, -1.0, 0).is_err());
        assert!(betti_at(&fc, 1.0, 2).is_err());
        assert!(persistent_rank(&fc, 1.5, 1.0, 0).is_err());
    }

    #[test]
    fn persistent_ranks_on_unit_square() {
        let fc = unit_square_complex();
        let sqrt2 = 2.0f64.sqrt();
        // the square's loop exists at 1 and is filled by sqrt2
        assert_eq!(persistent_rank(&fc, 1.0, 1.0, 1).unwrap(), 1);
        assert_eq!(persistent_rank(&fc, 1.0, sqrt2, 1).unwrap(), 0);
        // the four components at 0 merge to one by scale 1
        assert_eq!(persistent_rank(&fc, 0.0, 0.5, 0).unwrap(), 4);
        assert_eq!(persistent_rank(&fc, 0.0, 1.0, 0).unwrap(), 1);
    }

    #[test]
    fn kernel_basis_spans_the_kernel() {
        let fc = unit_square_complex();
        let mat = boundary_at(&fc, 2.0, 1);
        let ncols = mat.cols.len();
        let rank = boundary_at(&fc, 2.0, 1).rank();
        let kernel = mat.kernel_basis();
        assert_eq!(kernel.len(), ncols - rank);
        // every basis vector is an actual cycle
        for vec in &kernel {
            let bd = boundary_at(&fc, 2.0, 1);
            let mut image = vec![false; bd.rows];
            for (j, &on) in vec.iter().enumerate() {
                if on {
                    for (i, &bit) in bd.cols[j].iter().enumerate() {
                        image[i] ^= bit;
                    }
                }
            }
            assert!(image.iter().all(|&b| !b));
        }
    }
}
