//! Vietoris-Rips filtration of a point cloud.
//!
//! A simplex enters the complex at the parameter value equal to its diameter
//! (max pairwise vertex distance), with a closed comparison against the scale
//! cap: simplices with diameter <= r_max are included. Vertices enter at 0.
//! Ties in filtration value are ordered by (dimension, lexicographic vertex
//! list) so runs are bit-reproducible; any face-respecting order yields the
//! same diagrams.

use std::fmt::Write as _;

use crate::cloud::{pairwise_distances, DistanceMatrix, PointCloud};
use crate::error::{Error, Result};

/// Cap on the total number of simplices a single build may produce.
pub const DEFAULT_SIMPLEX_BUDGET: usize = 5_000_000;

/// A simplex with its filtration (entry) value. Vertex indices are distinct
/// and sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<usize>,
    filtration: f64,
}

impl Simplex {
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn filtration(&self) -> f64 {
        self.filtration
    }

    /// Dimension = number of vertices - 1.
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// The (dim-1)-faces, each obtained by dropping one vertex.
    pub fn facets(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.vertices.len()).map(move |skip| {
            self.vertices
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != skip)
                .map(|(_, &v)| v)
                .collect()
        })
    }
}

/// All simplices of the filtration up to `max_dim`, sorted by
/// (filtration, dimension, lexicographic vertices). Closed under faces.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    simplices: Vec<Simplex>,
    max_dim: usize,
    r_max: f64,
}

impl FilteredComplex {
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of simplices per dimension 0..=max_dim.
    pub fn counts_by_dim(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_dim + 1];
        for s in &self.simplices {
            counts[s.dim()] += 1;
        }
        counts
    }

    /// Line-oriented debug form: `dim;v1,v2,...;filtration`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.simplices {
            let verts: Vec<String> = s.vertices.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{};{};{}", s.dim(), verts.join(","), s.filtration).unwrap();
        }
        out
    }
}

/// Builds the filtration with the default simplex budget.
pub fn build_filtration(cloud: &PointCloud, max_dim: usize, r_max: f64) -> Result<FilteredComplex> {
    build_filtration_with_budget(cloud, max_dim, r_max, DEFAULT_SIMPLEX_BUDGET)
}

pub fn build_filtration_with_budget(
    cloud: &PointCloud,
    max_dim: usize,
    r_max: f64,
    budget: usize,
) -> Result<FilteredComplex> {
    let dm = pairwise_distances(cloud);
    build_filtration_from_distances(&dm, max_dim, r_max, budget)
}

/// Builds the filtration from a precomputed distance matrix, e.g. one
/// supplied by the user instead of Euclidean coordinates.
pub fn build_filtration_from_distances(
    dm: &DistanceMatrix,
    max_dim: usize,
    r_max: f64,
    budget: usize,
) -> Result<FilteredComplex> {
    if max_dim < 1 {
        return Err(Error::input("max_dim must be at least 1"));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::input(format!("r_max must be positive, got {r_max}")));
    }
    let n = dm.n();

    // upper-neighbor lists: j > i with d(i,j) <= r_max
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| ((i + 1)..n).filter(|&j| dm.get(i, j) <= r_max).collect())
        .collect();

    let mut simplices: Vec<Simplex> = Vec::with_capacity(n);
    for i in 0..n {
        simplices.push(Simplex {
            vertices: vec![i],
            filtration: 0.0,
        });
    }

    // incremental expansion: extend each simplex by common upper neighbors
    let mut stack: Vec<(Vec<usize>, f64, Vec<usize>)> = (0..n)
        .map(|i| (vec![i], 0.0, neighbors[i].clone()))
        .collect();
    while let Some((verts, filt, cands)) = stack.pop() {
        for (ci, &v) in cands.iter().enumerate() {
            let mut entry = filt;
            for &u in &verts {
                entry = entry.max(dm.get(u, v));
            }
            let mut next = verts.clone();
            next.push(v);
            if simplices.len() >= budget {
                return Err(Error::resource(format!(
                    "simplex budget of {budget} exceeded while building the filtration"
                )));
            }
            simplices.push(Simplex {
                vertices: next.clone(),
                filtration: entry,
            });
            if next.len() <= max_dim {
                // candidates after v that are also neighbors of v
                let shared: Vec<usize> = cands[(ci + 1)..]
                    .iter()
                    .copied()
                    .filter(|w| neighbors[v].binary_search(w).is_ok())
                    .collect();
                stack.push((next, entry, shared));
            }
        }
    }

    simplices.sort_by(|a, b| {
        a.filtration
            .total_cmp(&b.filtration)
            .then(a.vertices.len().cmp(&b.vertices.len()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });

    Ok(FilteredComplex {
        simplices,
        max_dim,
        r_max,
    })
}

/// Restriction to simplices with filtration <= r. The result's scale cap is r.
pub fn complex_at(fc: &FilteredComplex, r: f64) -> Result<FilteredComplex> {
    if !(0.0..=fc.r_max).contains(&r) {
        return Err(Error::input(format!(
            "r = {r} outside the filtration range [0, {}]",
            fc.r_max
        )));
    }
    let simplices: Vec<Simplex> = fc
        .simplices
        .iter()
        .filter(|s| s.filtration <= r)
        .cloned()
        .collect();
    Ok(FilteredComplex {
        simplices,
        max_dim: fc.max_dim,
        r_max: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn unit_square() -> PointCloud {
        PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn unit_square_filtration() {
        let fc = build_filtration(&unit_square(), 2, 2.0).unwrap();
        let sqrt2 = 2.0f64.sqrt();
        let mut vertices = 0;
        let mut edges_at_one = 0;
        let mut edges_at_sqrt2 = 0;
        let mut triangles_at_sqrt2 = 0;
        for s in fc.simplices() {
            match s.dim() {
                0 => {
                    assert_eq!(s.filtration(), 0.0);
                    vertices += 1;
                }
                1 if s.filtration() == 1.0 => edges_at_one += 1,
                1 if s.filtration() == sqrt2 => edges_at_sqrt2 += 1,
                2 => {
                    assert_eq!(s.filtration(), sqrt2);
                    triangles_at_sqrt2 += 1;
                }
                _ => panic!("unexpected simplex {s:?}"),
            }
        }
        assert_eq!(
            (vertices, edges_at_one, edges_at_sqrt2, triangles_at_sqrt2),
            (4, 4, 2, 4)
        );
    }

    #[test]
    fn distant_points_have_no_edge() {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![5.0, 0.0]]).unwrap();
        let fc = build_filtration(&cloud, 1, 2.0).unwrap();
        assert_eq!(fc.counts_by_dim(), vec![2, 0]);
    }

    #[test]
    fn empty_and_bad_parameters() {
        let cloud = unit_square();
        assert!(build_filtration(&cloud, 0, 1.0).is_err());
        assert!(build_filtration(&cloud, 2, 0.0).is_err());
        assert!(build_filtration(&cloud, 2, -1.0).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let cloud = unit_square();
        let err = build_filtration_with_budget(&cloud, 2, 2.0, 5).unwrap_err();
        match err {
            Error::Resource(msg) => assert!(msg.contains('5'), "budget named in {msg}"),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn restriction_and_nesting() {
        let fc = build_filtration(&unit_square(), 2, 2.0).unwrap();
        let full = complex_at(&fc, fc.r_max()).unwrap();
        assert_eq!(full.len(), fc.len());
        let at_zero = complex_at(&fc, 0.0).unwrap();
        assert_eq!(at_zero.counts_by_dim(), vec![4, 0, 0]);
        // nesting across a grid of scales
        let mut prev = 0;
        for r in [0.0, 0.5, 1.0, 1.2, 2.0f64.sqrt(), 2.0] {
            let sub = complex_at(&fc, r).unwrap();
            assert!(sub.len() >= prev);
            for s in sub.simplices() {
                assert!(s.filtration() <= r);
            }
            prev = sub.len();
        }
        assert!(complex_at(&fc, 2.5).is_err());
        assert!(complex_at(&fc, -0.1).is_err());
    }

    #[test]
    fn face_closure_and_monotone_diameter_on_random_clouds() {
        let mut rng = crate::seeds::rng(901, &[]);
        for _ in 0..25 {
            let n = rng.random_range(2..=10usize);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0])
                .collect();
            let cloud = PointCloud::new(pts).unwrap();
            let dm = pairwise_distances(&cloud);
            let fc = build_filtration(&cloud, 2, 1.5).unwrap();
            // lookup set for face closure
            let index: std::collections::HashMap<&[usize], f64> = fc
                .simplices()
                .iter()
                .map(|s| (s.vertices(), s.filtration()))
                .collect();
            for s in fc.simplices() {
                // filtration equals brute-force diameter
                let mut diameter = 0.0f64;
                for (a, &u) in s.vertices().iter().enumerate() {
                    for &v in &s.vertices()[(a + 1)..] {
                        diameter = diameter.max(dm.get(u, v));
                    }
                }
                assert_eq!(s.filtration(), diameter);
                if s.dim() == 0 {
                    continue;
                }
                for facet in s.facets() {
                    let f = index
                        .get(facet.as_slice())
                        .unwrap_or_else(|| panic!("missing face {facet:?} of {:?}", s.vertices()));
                    assert!(*f <= s.filtration());
                }
            }
            // sorted order puts every simplex after its faces
            let position: std::collections::HashMap<&[usize], usize> = fc
                .simplices()
                .iter()
                .enumerate()
                .map(|(i, s)| (s.vertices(), i))
                .collect();
            for (i, s) in fc.simplices().iter().enumerate() {
                if s.dim() == 0 {
                    continue;
                }
                for facet in s.facets() {
                    assert!(position[facet.as_slice()] < i);
                }
            }
        }
    }

    #[test]
    fn point_order_does_not_change_signature() {
        let mut rng = crate::seeds::rng(902, &[]);
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let mut shuffled = pts;
        shuffled.reverse();
        shuffled.swap(0, 3);
        let cloud2 = PointCloud::new(shuffled).unwrap();

        let signature = |fc: &FilteredComplex| {
            let mut sig: Vec<(usize, f64)> = fc
                .simplices()
                .iter()
                .map(|s| (s.dim(), s.filtration()))
                .collect();
            sig.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            sig
        };
        let a = build_filtration(&cloud, 2, 1.5).unwrap();
        let b = build_filtration(&cloud2, 2, 1.5).unwrap();
        assert_eq!(signature(&a), signature(&b));
    }

    #[test]
    fn duplicate_points_create_zero_filtration_edges() {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let fc = build_filtration(&cloud, 1, 2.0).unwrap();
        let zero_edges = fc
            .simplices()
            .iter()
            .filter(|s| s.dim() == 1 && s.filtration() == 0.0)
            .count();
        assert_eq!(zero_edges, 1);
    }

    #[test]
    fn text_format() {
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let fc = build_filtration(&cloud, 1, 2.0).unwrap();
        assert_eq!(fc.to_text(), "0;0;0\n0;1;0\n1;0,1;1\n");
    }
}
