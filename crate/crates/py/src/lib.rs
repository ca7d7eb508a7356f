//! Python bindings: point clouds, persistence diagrams, diagram distances
//! and permutation tests.

use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use persist_test::dataset;
use persist_test::metric;
use persist_test::permutation::{
    self, DistanceCache, GroupedDiagrams, TestParams,
};
use persist_test::persistence;
use persist_test::rips;
use persist_test::samplers;
use persist_test::seeds;

fn err(e: persist_test::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "PointCloud", skip_from_py_object)]
#[derive(Clone)]
struct PyPointCloud {
    inner: persist_test::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    fn new(points: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyPointCloud {
            inner: persist_test::PointCloud::new(points).map_err(err)?,
        })
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().to_vec()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud(n={}, dim={})",
            self.inner.len(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "PersistenceDiagram", from_py_object)]
#[derive(Clone)]
struct PyDiagram {
    inner: persistence::PersistenceDiagram,
}

#[pymethods]
impl PyDiagram {
    /// (birth, death, essential) triples sorted by (birth, death).
    fn points(&self) -> Vec<(f64, f64, bool)> {
        self.inner
            .points()
            .iter()
            .map(|p| (p.birth, p.death, p.essential))
            .collect()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn r_max(&self) -> f64 {
        self.inner.r_max()
    }

    fn without_essential(&self) -> PyDiagram {
        PyDiagram {
            inner: self.inner.without_essential(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PersistenceDiagram(dim={}, points={}, r_max={})",
            self.inner.dim(),
            self.inner.len(),
            self.inner.r_max()
        )
    }
}

#[pyclass(name = "TestResult", skip_from_py_object)]
#[derive(Clone)]
struct PyTestResult {
    #[pyo3(get)]
    statistic: f64,
    #[pyo3(get)]
    p_value: f64,
    #[pyo3(get)]
    replicates: u64,
    #[pyo3(get)]
    mode: String,
    #[pyo3(get)]
    seed: Option<u64>,
}

impl From<permutation::TestResult> for PyTestResult {
    fn from(r: permutation::TestResult) -> Self {
        PyTestResult {
            statistic: r.observed_stat,
            p_value: r.p_value,
            replicates: r.replicates,
            mode: match r.mode {
                permutation::TestMode::Exact => "exact".to_string(),
                permutation::TestMode::Sampled => "sampled".to_string(),
            },
            seed: r.seed,
        }
    }
}

#[pymethods]
impl PyTestResult {
    fn __repr__(&self) -> String {
        format!(
            "TestResult(statistic={}, p_value={}, replicates={}, mode={:?})",
            self.statistic, self.p_value, self.replicates, self.mode
        )
    }
}

#[pyfunction]
#[pyo3(signature = (radius, n, sigma=0.0, seed=0))]
fn sample_circle(radius: f64, n: usize, sigma: f64, seed: u64) -> PyResult<PyPointCloud> {
    let mut rng = seeds::rng(seed, &[seeds::DOMAIN_CLOUD, 0, 0, 0]);
    Ok(PyPointCloud {
        inner: samplers::sample_circle(radius, n, sigma, &mut rng).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (radii, n, sigma=0.0, seed=0))]
fn sample_wedge(radii: Vec<f64>, n: usize, sigma: f64, seed: u64) -> PyResult<PyPointCloud> {
    let mut rng = seeds::rng(seed, &[seeds::DOMAIN_CLOUD, 0, 0, 0]);
    Ok(PyPointCloud {
        inner: samplers::sample_wedge(&radii, n, sigma, &mut rng).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (chords, n, sigma=0.0, seed=0))]
fn sample_chorded_circle(chords: usize, n: usize, sigma: f64, seed: u64) -> PyResult<PyPointCloud> {
    let mut rng = seeds::rng(seed, &[seeds::DOMAIN_CLOUD, 0, 0, 0]);
    Ok(PyPointCloud {
        inner: samplers::sample_chorded_circle(chords, n, sigma, &mut rng).map_err(err)?,
    })
}

/// Persistence diagrams of a cloud for dimensions 0..=hom_dim. The scale cap
/// defaults to 1.1 times the cloud diameter.
#[pyfunction]
#[pyo3(signature = (cloud, hom_dim=1, r_max=None))]
fn diagrams(cloud: &PyPointCloud, hom_dim: usize, r_max: Option<f64>) -> PyResult<Vec<PyDiagram>> {
    let cap = r_max.unwrap_or_else(|| cloud.inner.diameter() * 1.1);
    let dgms =
        persistence::diagrams_for_cloud(&cloud.inner, hom_dim, cap, rips::DEFAULT_SIMPLEX_BUDGET)
            .map_err(err)?;
    Ok(dgms.into_iter().map(|inner| PyDiagram { inner }).collect())
}

/// Betti number of the Rips complex of a cloud at one scale.
#[pyfunction]
#[pyo3(signature = (cloud, r, dim, r_max=None))]
fn betti(cloud: &PyPointCloud, r: f64, dim: usize, r_max: Option<f64>) -> PyResult<usize> {
    let cap = r_max.unwrap_or_else(|| (cloud.inner.diameter() * 1.1).max(r));
    let fc = rips::build_filtration(&cloud.inner, dim + 1, cap).map_err(err)?;
    persist_test::betti::betti_at(&fc, r, dim).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (x, y, q=2.0))]
fn diagram_distance(x: &PyDiagram, y: &PyDiagram, q: f64) -> PyResult<f64> {
    metric::diagram_distance(&x.inner, &y.inner, q).map_err(err)
}

#[pyfunction]
fn assignment_count(sizes: Vec<usize>) -> PyResult<BigUint> {
    permutation::assignment_count(&sizes).map_err(err)
}

fn grouped(groups: Vec<(String, Vec<PyDiagram>)>) -> PyResult<GroupedDiagrams> {
    GroupedDiagrams::new(
        groups
            .into_iter()
            .map(|(name, ds)| (name, ds.into_iter().map(|d| d.inner).collect()))
            .collect(),
    )
    .map_err(err)
}

/// Omnibus permutation test over named groups of diagrams.
#[pyfunction]
#[pyo3(signature = (groups, seed=0, n_perms=100_000, max_exact=200_000, q=2.0))]
fn omnibus_test(
    groups: Vec<(String, Vec<PyDiagram>)>,
    seed: u64,
    n_perms: u64,
    max_exact: u64,
    q: f64,
) -> PyResult<PyTestResult> {
    let gd = grouped(groups)?;
    let cache = DistanceCache::from_grouped(&gd, q).map_err(err)?;
    let params = TestParams {
        max_exact,
        n_samples: n_perms,
        seed,
        retain_null: false,
    };
    permutation::omnibus_test(&gd, &cache, &params)
        .map(PyTestResult::from)
        .map_err(err)
}

/// Pairwise post-hoc tests: [(group_a, group_b, TestResult)] in lexicographic
/// pair order.
#[pyfunction]
#[pyo3(signature = (groups, seed=0, n_perms=100_000, max_exact=200_000, q=2.0, alpha=0.05))]
fn post_hoc(
    groups: Vec<(String, Vec<PyDiagram>)>,
    seed: u64,
    n_perms: u64,
    max_exact: u64,
    q: f64,
    alpha: f64,
) -> PyResult<Vec<(String, String, PyTestResult)>> {
    let gd = grouped(groups)?;
    let cache = DistanceCache::from_grouped(&gd, q).map_err(err)?;
    let params = TestParams {
        max_exact,
        n_samples: n_perms,
        seed,
        retain_null: false,
    };
    let report = permutation::post_hoc(&gd, &cache, alpha, &params).map_err(err)?;
    Ok(report
        .pairs
        .into_iter()
        .map(|p| (p.group_a, p.group_b, PyTestResult::from(p.result)))
        .collect())
}

/// Joint loss of the observed grouping.
#[pyfunction]
#[pyo3(signature = (groups, q=2.0))]
fn joint_loss(groups: Vec<(String, Vec<PyDiagram>)>, q: f64) -> PyResult<f64> {
    let gd = grouped(groups)?;
    let cache = DistanceCache::from_grouped(&gd, q).map_err(err)?;
    permutation::joint_loss(&gd, &cache).map_err(err)
}

/// Ingest a CSV dataset and partition each group into balanced clouds;
/// returns [(group, cloud_index, PointCloud)].
#[pyfunction]
#[pyo3(signature = (path, features, group_column, clouds_per_group, points_per_cloud, seed=0, header=true))]
#[allow(clippy::too_many_arguments)]
fn balanced_clouds(
    path: String,
    features: String,
    group_column: String,
    clouds_per_group: usize,
    points_per_cloud: usize,
    seed: u64,
    header: bool,
) -> PyResult<Vec<(String, usize, PyPointCloud)>> {
    let ds = dataset::ingest(
        &path,
        &dataset::ColumnSelector::parse(&features).map_err(err)?,
        &dataset::ColumnSelector::parse(&group_column).map_err(err)?,
        header,
    )
    .map_err(err)?;
    let plan = dataset::PartitionPlan::new(clouds_per_group, points_per_cloud, seed);
    let clouds = dataset::balance_and_partition(&ds, &plan).map_err(err)?;
    Ok(clouds
        .into_iter()
        .map(|lc| {
            (
                lc.group,
                lc.cloud_index,
                PyPointCloud { inner: lc.cloud },
            )
        })
        .collect())
}

#[pymodule]
fn persist_test_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyDiagram>()?;
    m.add_class::<PyTestResult>()?;
    m.add_function(wrap_pyfunction!(sample_circle, m)?)?;
    m.add_function(wrap_pyfunction!(sample_wedge, m)?)?;
    m.add_function(wrap_pyfunction!(sample_chorded_circle, m)?)?;
    m.add_function(wrap_pyfunction!(diagrams, m)?)?;
    m.add_function(wrap_pyfunction!(betti, m)?)?;
    m.add_function(wrap_pyfunction!(diagram_distance, m)?)?;
    m.add_function(wrap_pyfunction!(assignment_count, m)?)?;
    m.add_function(wrap_pyfunction!(omnibus_test, m)?)?;
    m.add_function(wrap_pyfunction!(post_hoc, m)?)?;
    m.add_function(wrap_pyfunction!(joint_loss, m)?)?;
    m.add_function(wrap_pyfunction!(balanced_clouds, m)?)?;
    Ok(())
}
