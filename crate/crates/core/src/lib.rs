//! Shape inference for groups of point clouds.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`rips`] builds the Vietoris-Rips filtration of a point cloud up to a
//!    dimension cap and a maximum scale.
//! 2. [`persistence`] reduces the boundary matrix over Z2 and extracts
//!    persistence diagrams, with essential classes capped at the maximum
//!    scale. [`betti`] provides an independent rank-based route to the same
//!    quantities for cross-checking.
//! 3. [`metric`] computes the optimal-matching distance between two diagrams
//!    via a Hungarian assignment over diagonally augmented point sets.
//! 4. [`permutation`] turns a cache of pairwise squared distances into
//!    two-group, omnibus, and post-hoc permutation tests on the within-group
//!    joint loss statistic.
//!
//! [`samplers`] generates the synthetic spaces used by the [`harness`]
//! simulation driver, and [`dataset`] covers ingestion, group balancing and
//! the representativeness protocol for real tabular data.

pub mod betti;
pub mod cloud;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metric;
pub mod permutation;
pub mod persistence;
pub mod rips;
pub mod samplers;
pub mod seeds;

mod assignment;

pub use cloud::{pairwise_distances, DistanceMatrix, PointCloud};
pub use error::{Error, Result};
pub use persistence::{PersistenceDiagram, PersistencePoint};
pub use rips::{build_filtration, complex_at, FilteredComplex, Simplex};
