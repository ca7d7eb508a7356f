//! Point clouds in R^m and their pairwise Euclidean distances.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A finite, nonempty list of points with a common ambient dimension.
/// All coordinates are finite; duplicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::input("point cloud is empty"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::input("points must have at least one coordinate"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::input(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if let Some(c) = p.iter().find(|c| !c.is_finite()) {
                return Err(Error::input(format!(
                    "point {i} has non-finite coordinate {c}"
                )));
            }
        }
        Ok(PointCloud { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Largest pairwise distance; 0 for a single point.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                best = best.max(euclidean(&self.points[i], &self.points[j]));
            }
        }
        best
    }

    /// Reads one point per row, columns are coordinates. With `has_header`
    /// the first row is skipped.
    pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
        let mut points = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if lineno == 0 && has_header {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .enumerate()
                .map(|(col, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        Error::input(format!(
                            "unparseable cell at row {}, column {}: {:?}",
                            lineno + 1,
                            col + 1,
                            cell.trim()
                        ))
                    })
                })
                .collect();
            points.push(row?);
        }
        PointCloud::new(points)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::fs::File::create(path.as_ref())?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Validates symmetry, zero diagonal, nonnegativity and finiteness.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::input("distance matrix is empty"));
        }
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::input(format!(
                    "distance matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::input(format!(
                        "distance matrix entry ({i},{j}) = {v} is not a finite nonnegative value"
                    )));
                }
                data[i * n + j] = v;
            }
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::input(format!(
                    "distance matrix diagonal entry ({i},{i}) is nonzero"
                )));
            }
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::input(format!(
                        "distance matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    /// Reads a full square matrix, one row per line.
    pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if lineno == 0 && has_header {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .enumerate()
                .map(|(col, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        Error::input(format!(
                            "unparseable cell at row {}, column {}: {:?}",
                            lineno + 1,
                            col + 1,
                            cell.trim()
                        ))
                    })
                })
                .collect();
            rows.push(row?);
        }
        DistanceMatrix::from_rows(rows)
    }
}

/// Euclidean distance matrix of a cloud.
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(cloud.point(i), cloud.point(j));
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five_triangle() {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let dm = pairwise_distances(&cloud);
        assert_eq!(dm.get(0, 1), 5.0);
        assert_eq!(dm.get(1, 0), 5.0);
        assert_eq!(dm.get(0, 0), 0.0);
        assert_eq!(dm.get(1, 1), 0.0);
    }

    #[test]
    fn single_point() {
        let cloud = PointCloud::new(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let dm = pairwise_distances(&cloud);
        assert_eq!(dm.n(), 1);
        assert_eq!(dm.get(0, 0), 0.0);
    }

    #[test]
    fn unit_square_distances() {
        // off-diagonal entries are four sides of length 1 and two diagonals
        let cloud = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let dm = pairwise_distances(&cloud);
        let mut off: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                off.push(dm.get(i, j));
            }
        }
        off.sort_by(f64::total_cmp);
        let sqrt2 = 2.0f64.sqrt();
        assert_eq!(off, vec![1.0, 1.0, 1.0, 1.0, sqrt2, sqrt2]);

        // brute-force oracle: recompute each entry from coordinates
        for i in 0..4 {
            for j in 0..4 {
                let expect = cloud
                    .point(i)
                    .iter()
                    .zip(cloud.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert_eq!(dm.get(i, j), expect);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
        assert!(PointCloud::new(vec![vec![f64::NAN]]).is_err());
        assert!(PointCloud::new(vec![vec![f64::INFINITY, 0.0]]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cloud = PointCloud::new(vec![vec![0.25, -1.5], vec![3.125, 0.1]]).unwrap();
        let dir = std::env::temp_dir().join("persist_test_cloud_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        cloud.write_csv(&path).unwrap();
        let back = PointCloud::read_csv(&path, false).unwrap();
        assert_eq!(cloud, back);
    }

    #[test]
    fn distance_matrix_validation() {
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
        let ok = DistanceMatrix::from_rows(vec![vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(ok.get(0, 1), 2.0);
    }
}
