//! Persistence diagrams by boundary-matrix column reduction over Z2.
//!
//! Columns are sparse sets of row indices in filtration order; reduction adds
//! columns left to right (symmetric difference) until every nonzero column
//! has a distinct lowest row index. A pair (i, j) means the class born with
//! simplex i is killed by simplex j. Unpaired birth columns are essential
//! classes and are reported with death equal to the scale cap r_max.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rips::FilteredComplex;

/// Sparse Z2 boundary matrix of a filtered complex. `columns[j]` lists the
/// filtration-order positions of the facets of simplex j, sorted ascending.
#[derive(Debug, Clone)]
pub struct BoundaryMatrix {
    columns: Vec<Vec<usize>>,
    dims: Vec<usize>,
    filtrations: Vec<f64>,
}

impl BoundaryMatrix {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.columns[j]
    }

    pub fn dim(&self, j: usize) -> usize {
        self.dims[j]
    }

    pub fn filtration(&self, j: usize) -> f64 {
        self.filtrations[j]
    }
}

/// Column positions of the facets of every simplex, in filtration order.
pub fn boundary_matrix(fc: &FilteredComplex) -> Result<BoundaryMatrix> {
    let simplices = fc.simplices();
    let index: HashMap<&[usize], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices(), i))
        .collect();
    let mut columns = Vec::with_capacity(simplices.len());
    let mut dims = Vec::with_capacity(simplices.len());
    let mut filtrations = Vec::with_capacity(simplices.len());
    for (j, s) in simplices.iter().enumerate() {
        let mut col = Vec::new();
        if s.dim() > 0 {
            for facet in s.facets() {
                let &i = index.get(facet.as_slice()).ok_or_else(|| {
                    Error::internal(format!(
                        "face {facet:?} of simplex {:?} not present in the complex",
                        s.vertices()
                    ))
                })?;
                if i >= j {
                    return Err(Error::internal(format!(
                        "face {facet:?} does not precede simplex {:?} in filtration order",
                        s.vertices()
                    )));
                }
                col.push(i);
            }
            col.sort_unstable();
        }
        columns.push(col);
        dims.push(s.dim());
        filtrations.push(s.filtration());
    }
    Ok(BoundaryMatrix {
        columns,
        dims,
        filtrations,
    })
}

/// Result of the column reduction: birth/death index pairs plus the
/// essential (never killed) birth columns, both in filtration order.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub pairs: Vec<(usize, usize)>,
    pub essential: Vec<usize>,
}

/// Symmetric difference of two sorted index sets.
fn add_columns(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
    out
}

/// Left-to-right column reduction. Total on valid input.
pub fn reduce(bm: &BoundaryMatrix) -> Reduction {
    let n = bm.len();
    let mut reduced: Vec<Vec<usize>> = bm.columns.clone();
    let mut pivot_owner: Vec<Option<usize>> = vec![None; n];
    let mut killed = vec![false; n];
    let mut pairs = Vec::new();
    for j in 0..n {
        loop {
            let Some(&low) = reduced[j].last() else {
                break;
            };
            match pivot_owner[low] {
                Some(k) => {
                    let merged = add_columns(&reduced[j], &reduced[k]);
                    reduced[j] = merged;
                }
                None => {
                    pivot_owner[low] = Some(j);
                    killed[low] = true;
                    pairs.push((low, j));
                    break;
                }
            }
        }
    }
    let essential = (0..n)
        .filter(|&j| reduced[j].is_empty() && !killed[j])
        .collect();
    Reduction { pairs, essential }
}

/// One point of a persistence diagram. Essential classes carry the scale cap
/// as their death value and are flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePoint {
    pub birth: f64,
    pub death: f64,
    pub dim: usize,
    pub essential: bool,
}

impl PersistencePoint {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Multiset of (birth, death) points for a single homological dimension,
/// sorted by (birth, death). Zero-persistence pairs are dropped on
/// construction, so every stored point satisfies birth < death <= r_max.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    points: Vec<PersistencePoint>,
    dim: usize,
    r_max: f64,
}

impl PersistenceDiagram {
    pub fn new(dim: usize, r_max: f64, mut points: Vec<PersistencePoint>) -> Result<Self> {
        for p in &points {
            if p.dim != dim {
                return Err(Error::input(format!(
                    "point of dimension {} in a dimension-{dim} diagram",
                    p.dim
                )));
            }
            if !(0.0 <= p.birth && p.birth < p.death && p.death <= r_max) {
                return Err(Error::input(format!(
                    "point ({}, {}) violates 0 <= birth < death <= r_max = {r_max}",
                    p.birth, p.death
                )));
            }
        }
        points.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
        Ok(PersistenceDiagram {
            points,
            dim,
            r_max,
        })
    }

    pub fn empty(dim: usize, r_max: f64) -> Self {
        PersistenceDiagram {
            points: Vec::new(),
            dim,
            r_max,
        }
    }

    pub fn points(&self) -> &[PersistencePoint] {
        &self.points
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

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Copy with essential points removed.
    pub fn without_essential(&self) -> Self {
        PersistenceDiagram {
            points: self.points.iter().copied().filter(|p| !p.essential).collect(),
            dim: self.dim,
            r_max: self.r_max,
        }
    }
}

/// Persistence diagrams for dimensions 0..=max_hom_dim.
///
/// Pairs with equal birth and death filtration are dropped; unpaired classes
/// become essential points capped at r_max.
pub fn diagrams(fc: &FilteredComplex, max_hom_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    if max_hom_dim + 1 > fc.max_dim() {
        return Err(Error::input(format!(
            "homology dimension {max_hom_dim} needs simplices of dimension {}, \
             but the complex was built up to dimension {}",
            max_hom_dim + 1,
            fc.max_dim()
        )));
    }
    let bm = boundary_matrix(fc)?;
    let reduction = reduce(&bm);
    let mut per_dim: Vec<Vec<PersistencePoint>> = vec![Vec::new(); max_hom_dim + 1];
    for &(i, j) in &reduction.pairs {
        let dim = bm.dim(i);
        let (birth, death) = (bm.filtration(i), bm.filtration(j));
        if dim <= max_hom_dim && birth < death {
            per_dim[dim].push(PersistencePoint {
                birth,
                death,
                dim,
                essential: false,
            });
        }
    }
    for &j in &reduction.essential {
        let dim = bm.dim(j);
        let birth = bm.filtration(j);
        if dim <= max_hom_dim && birth < fc.r_max() {
            per_dim[dim].push(PersistencePoint {
                birth,
                death: fc.r_max(),
                dim,
                essential: true,
            });
        }
    }
    per_dim
        .into_iter()
        .enumerate()
        .map(|(dim, points)| PersistenceDiagram::new(dim, fc.r_max(), points))
        .collect()
}

/// Convenience: filtration (dimension cap max_hom_dim + 1) plus diagrams.
pub fn diagrams_for_cloud(
    cloud: &crate::cloud::PointCloud,
    max_hom_dim: usize,
    r_max: f64,
    budget: usize,
) -> Result<Vec<PersistenceDiagram>> {
    let fc = crate::rips::build_filtration_with_budget(cloud, max_hom_dim + 1, r_max, budget)?;
    diagrams(&fc, max_hom_dim)
}

/// Writes diagrams (possibly several dimensions) as
/// `dim,birth,death,essential` rows sorted by (dim, birth, death).
pub fn write_diagrams_csv(path: impl AsRef<Path>, diagrams: &[PersistenceDiagram]) -> Result<()> {
    let mut out = std::fs::File::create(path.as_ref())?;
    writeln!(out, "dim,birth,death,essential")?;
    let mut sorted: Vec<&PersistenceDiagram> = diagrams.iter().collect();
    sorted.sort_by_key(|d| d.dim());
    for d in sorted {
        for p in d.points() {
            writeln!(out, "{},{},{},{}", p.dim, p.birth, p.death, p.essential)?;
        }
    }
    Ok(())
}

/// Reads a diagram CSV back into one diagram per dimension present.
/// If `r_max` is not given it is inferred as the largest death value.
pub fn read_diagrams_csv(
    path: impl AsRef<Path>,
    r_max: Option<f64>,
) -> Result<Vec<PersistenceDiagram>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    let mut rows: Vec<PersistencePoint> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::input(format!(
                "diagram row {} has {} fields, expected 4",
                lineno + 1,
                parts.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::input(format!("unparseable {what} at row {}", lineno + 1))
        };
        rows.push(PersistencePoint {
            dim: parts[0].parse().map_err(|_| parse_err("dim"))?,
            birth: parts[1].parse().map_err(|_| parse_err("birth"))?,
            death: parts[2].parse().map_err(|_| parse_err("death"))?,
            essential: parts[3].parse().map_err(|_| parse_err("essential"))?,
        });
    }
    let cap = r_max.unwrap_or_else(|| {
        rows.iter().map(|p| p.death).fold(0.0f64, f64::max)
    });
    let mut dims: Vec<usize> = rows.iter().map(|p| p.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    dims.into_iter()
        .map(|dim| {
            let points: Vec<PersistencePoint> =
                rows.iter().copied().filter(|p| p.dim == dim).collect();
            PersistenceDiagram::new(dim, cap, points)
        })
        .collect()
}
