//! Group-labeled tabular data: ingestion, balanced partitioning into point
//! clouds, the representativeness protocol for oversized groups, and the
//! end-to-end analysis pipeline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::permutation::{
    omnibus_test, post_hoc, DistanceCache, GroupedDiagrams, PostHocReport, TestParams, TestReport,
    TestResult,
};
use crate::persistence::diagrams_for_cloud;
use crate::rips::DEFAULT_SIMPLEX_BUDGET;
use crate::seeds;

/// Rows of m real features plus one categorical group label. Levels are
/// listed lexicographically with their counts.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub levels: Vec<(String, usize)>,
}

/// Columns referenced by 0-based index (headerless files) or by name.
#[derive(Debug, Clone)]
pub enum ColumnSelector {
    Indices(Vec<usize>),
    Names(Vec<String>),
}

impl ColumnSelector {
    /// Parses a comma-separated list: all-integer tokens select by index.
    pub fn parse(spec: &str) -> Result<Self> {
        let tokens: Vec<&str> = spec.split(',').map(str::trim).collect();
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::input(format!("empty column in selector {spec:?}")));
        }
        let indices: std::result::Result<Vec<usize>, _> =
            tokens.iter().map(|t| t.parse::<usize>()).collect();
        Ok(match indices {
            Ok(idx) => ColumnSelector::Indices(idx),
            Err(_) => ColumnSelector::Names(tokens.into_iter().map(String::from).collect()),
        })
    }

    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<Vec<usize>> {
        match self {
            ColumnSelector::Indices(idx) => {
                for &i in idx {
                    if i >= width {
                        return Err(Error::input(format!(
                            "column index {i} out of range for a {width}-column file"
                        )));
                    }
                }
                Ok(idx.clone())
            }
            ColumnSelector::Names(names) => {
                let header = header.ok_or_else(|| {
                    Error::input("column names need a header row; pass --header or use indices")
                })?;
                names
                    .iter()
                    .map(|n| {
                        header.iter().position(|h| h == n).ok_or_else(|| {
                            Error::input(format!("column {n:?} not found in header"))
                        })
                    })
                    .collect()
            }
        }
    }
}

/// Reads a CSV, coercing the selected feature columns to reals and grouping
/// rows by the label column.
pub fn ingest(
    path: impl AsRef<Path>,
    features: &ColumnSelector,
    group: &ColumnSelector,
    has_header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    let mut records = reader.records();

    let header: Option<Vec<String>> = if has_header {
        let first = records
            .next()
            .ok_or_else(|| Error::input(format!("{} is empty", path.display())))??;
        Some(first.iter().map(String::from).collect())
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut feature_idx: Option<Vec<usize>> = None;
    let mut group_idx: Option<usize> = None;
    let mut feature_names = Vec::new();
    let offset = usize::from(has_header);
    for (i, record) in records.enumerate() {
        let record = record?;
        let width = record.len();
        if feature_idx.is_none() {
            let fi = features.resolve(header.as_deref(), width)?;
            let gi = group.resolve(header.as_deref(), width)?;
            if gi.len() != 1 {
                return Err(Error::input("exactly one group column is required"));
            }
            feature_names = match &header {
                Some(h) => fi.iter().map(|&c| h[c].clone()).collect(),
                None => fi.iter().map(|&c| format!("col{c}")).collect(),
            };
            feature_idx = Some(fi);
            group_idx = Some(gi[0]);
        }
        let fi = feature_idx.as_ref().unwrap();
        let gi = group_idx.unwrap();
        let rowno = i + 1 + offset;
        if record.len() <= gi || fi.iter().any(|&c| record.len() <= c) {
            return Err(Error::input(format!(
                "row {rowno} has only {} columns",
                record.len()
            )));
        }
        let row: Result<Vec<f64>> = fi
            .iter()
            .map(|&c| {
                record[c].trim().parse::<f64>().map_err(|_| {
                    Error::input(format!(
                        "unparseable cell at row {rowno}, column {}: {:?}",
                        c + 1,
                        record[c].trim()
                    ))
                })
            })
            .collect();
        let row = row?;
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite feature value {bad} at row {rowno}"
            )));
        }
        rows.push(row);
        labels.push(record[gi].trim().to_string());
    }
    if rows.is_empty() {
        return Err(Error::input(format!("{} has no data rows", path.display())));
    }

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for label in &labels {
        if label.is_empty() {
            return Err(Error::input("empty group label"));
        }
        *counts.entry(label.clone()).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::input(format!(
            "need at least 2 group levels, found {}",
            counts.len()
        )));
    }
    Ok(Dataset {
        feature_names,
        rows,
        labels,
        levels: counts.into_iter().collect(),
    })
}

impl Dataset {
    /// Row indices of one level, in file order.
    pub fn rows_of(&self, level: &str) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_str() == level)
            .map(|(i, _)| i)
            .collect()
    }

    /// Per-feature standardization ((x - mean) / sd) over the whole dataset.
    pub fn standardized(&self) -> Result<Dataset> {
        let m = self.feature_names.len();
        let n = self.rows.len() as f64;
        let mut means = vec![0.0; m];
        for row in &self.rows {
            for (j, &v) in row.iter().enumerate() {
                means[j] += v;
            }
        }
        for mu in &mut means {
            *mu /= n;
        }
        let mut sds = vec![0.0; m];
        for row in &self.rows {
            for (j, &v) in row.iter().enumerate() {
                sds[j] += (v - means[j]).powi(2);
            }
        }
        for (j, sd) in sds.iter_mut().enumerate() {
            *sd = (*sd / n).sqrt();
            if *sd == 0.0 {
                return Err(Error::input(format!(
                    "feature {:?} is constant and cannot be standardized",
                    self.feature_names[j]
                )));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| (v - means[j]) / sds[j])
                    .collect()
            })
            .collect();
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            rows,
            labels: self.labels.clone(),
            levels: self.levels.clone(),
        })
    }
}

/// How each group is subsampled and split into clouds: `clouds_per_group`
/// clouds of `points_per_cloud` rows, c * k = balance_to.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionPlan {
    pub clouds_per_group: usize,
    pub points_per_cloud: usize,
    pub balance_to: usize,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn new(clouds_per_group: usize, points_per_cloud: usize, seed: u64) -> Self {
        PartitionPlan {
            clouds_per_group,
            points_per_cloud,
            balance_to: clouds_per_group * points_per_cloud,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clouds_per_group < 2 {
            return Err(Error::input("clouds_per_group must be at least 2"));
        }
        if self.points_per_cloud == 0 {
            return Err(Error::input("points_per_cloud must be positive"));
        }
        if self.clouds_per_group * self.points_per_cloud != self.balance_to {
            return Err(Error::input(format!(
                "balance_to = {} must equal clouds_per_group x points_per_cloud = {}",
                self.balance_to,
                self.clouds_per_group * self.points_per_cloud
            )));
        }
        Ok(())
    }
}

/// A point cloud with its provenance: group, cloud index, and source rows.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub group: String,
    pub cloud_index: usize,
    pub row_ids: Vec<usize>,
    pub cloud: PointCloud,
}

/// Per group (lexicographic order): a seeded subsample of `balance_to` rows
/// without replacement, split into clouds of `points_per_cloud`.
pub fn balance_and_partition(ds: &Dataset, plan: &PartitionPlan) -> Result<Vec<LabeledCloud>> {
    plan.validate()?;
    let mut clouds = Vec::new();
    for (g, (level, count)) in ds.levels.iter().enumerate() {
        if *count < plan.balance_to {
            let max_k = count / plan.clouds_per_group;
            return Err(Error::input(format!(
                "group {level:?} has {count} rows, fewer than balance_to = {}; \
                 with {} clouds the largest feasible balance_to is {}",
                plan.balance_to,
                plan.clouds_per_group,
                max_k * plan.clouds_per_group
            )));
        }
        let mut rows = ds.rows_of(level);
        let mut rng = seeds::rng(plan.seed, &[seeds::DOMAIN_SUBSAMPLE, g as u64]);
        rows.shuffle(&mut rng);
        rows.truncate(plan.balance_to);
        for (c, chunk) in rows.chunks(plan.points_per_cloud).enumerate() {
            let points: Vec<Vec<f64>> = chunk.iter().map(|&r| ds.rows[r].clone()).collect();
            clouds.push(LabeledCloud {
                group: level.clone(),
                cloud_index: c,
                row_ids: chunk.to_vec(),
                cloud: PointCloud::new(points)?,
            });
        }
    }
    Ok(clouds)
}

/// Test configuration shared by the dataset-level pipelines.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineParams {
    pub hom_dim: usize,
    /// Shared scale cap; None means pooled-data diameter x 1.1.
    pub r_max: Option<f64>,
    pub metric_exponent: f64,
    pub n_perms: u64,
    pub max_exact: u64,
    pub alpha: f64,
    pub seed: u64,
    pub simplex_budget: usize,
    pub force_posthoc: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            hom_dim: 1,
            r_max: None,
            metric_exponent: 2.0,
            n_perms: 100_000,
            max_exact: 200_000,
            alpha: 0.05,
            seed: 0,
            simplex_budget: DEFAULT_SIMPLEX_BUDGET,
            force_posthoc: false,
        }
    }
}

fn pooled_r_max(clouds: &[LabeledCloud]) -> f64 {
    // diameter over the union of all cloud points
    let all: Vec<Vec<f64>> = clouds
        .iter()
        .flat_map(|c| c.cloud.points().iter().cloned())
        .collect();
    match PointCloud::new(all) {
        Ok(pooled) => pooled.diameter() * 1.1,
        Err(_) => 1.0,
    }
}

fn grouped_from_clouds(
    clouds: &[LabeledCloud],
    params: &PipelineParams,
    r_max: f64,
) -> Result<GroupedDiagrams> {
    let built: Result<Vec<_>> = clouds
        .par_iter()
        .map(|lc| {
            let dgms =
                diagrams_for_cloud(&lc.cloud, params.hom_dim, r_max, params.simplex_budget)?;
            Ok(dgms.into_iter().nth(params.hom_dim).unwrap())
        })
        .collect();
    let built = built?;
    let mut groups: BTreeMap<String, Vec<crate::persistence::PersistenceDiagram>> = BTreeMap::new();
    for (lc, dgm) in clouds.iter().zip(built) {
        groups.entry(lc.group.clone()).or_default().push(dgm);
    }
    GroupedDiagrams::new(groups.into_iter().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudProvenance {
    pub group: String,
    pub cloud_index: usize,
    pub row_ids: Vec<usize>,
}

/// Full report of one analysis run, serializable to JSON.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub r_max: f64,
    pub params: PipelineParams,
    pub standardized: bool,
    #[serde(flatten)]
    pub tests: TestReport,
    pub provenance: Vec<CloudProvenance>,
}

/// Builds diagrams for the labeled clouds, runs the omnibus test, and runs
/// post-hoc tests when the omnibus is significant (or forced) and s >= 3.
pub fn analyze(
    clouds: &[LabeledCloud],
    params: &PipelineParams,
    standardized: bool,
) -> Result<AnalyzeReport> {
    if clouds.is_empty() {
        return Err(Error::input("no clouds to analyze"));
    }
    let r_max = params.r_max.unwrap_or_else(|| pooled_r_max(clouds));
    let gd = grouped_from_clouds(clouds, params, r_max)?;
    let cache = DistanceCache::from_grouped(&gd, params.metric_exponent)?;
    let test_params = TestParams {
        max_exact: params.max_exact,
        n_samples: params.n_perms,
        seed: params.seed,
        retain_null: false,
    };
    let omnibus = omnibus_test(&gd, &cache, &test_params)?;
    let posthoc: Option<PostHocReport> = if gd.groups().len() >= 3
        && (params.force_posthoc || omnibus.p_value <= params.alpha)
    {
        Some(post_hoc(&gd, &cache, params.alpha, &test_params)?)
    } else {
        None
    };
    Ok(AnalyzeReport {
        r_max,
        params: params.clone(),
        standardized,
        tests: TestReport::new(&gd, &omnibus, posthoc.as_ref()),
        provenance: clouds
            .iter()
            .map(|lc| CloudProvenance {
                group: lc.group.clone(),
                cloud_index: lc.cloud_index,
                row_ids: lc.row_ids.clone(),
            })
            .collect(),
    })
}

impl AnalyzeReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::internal(format!("json: {e}")))
    }

    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "omnibus permutation test").unwrap();
        writeln!(
            out,
            "  groups: {}",
            self.tests
                .groups
                .iter()
                .map(|g| format!("{} (n={})", g.name, g.size))
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
        writeln!(out, "  statistic: {}", self.tests.statistic).unwrap();
        writeln!(
            out,
            "  p-value: {} ({} replicates, {:?} mode)",
            self.tests.p_value, self.tests.replicates, self.tests.mode
        )
        .unwrap();
        writeln!(out, "  r_max: {}", self.r_max).unwrap();
        writeln!(out, "  seed: {}", self.params.seed).unwrap();
        writeln!(out, "  standardized: {}", self.standardized).unwrap();
        if self.tests.pairwise.is_empty() {
            writeln!(out, "post-hoc tests: not run").unwrap();
        } else {
            writeln!(out, "post-hoc tests (raw p-values):").unwrap();
            for pair in &self.tests.pairwise {
                writeln!(
                    out,
                    "  {} vs {}: statistic {}, p-value {}",
                    pair.group_a, pair.group_b, pair.statistic, pair.p_value
                )
                .unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RepresentativenessParams {
    pub group: String,
    pub spaces: usize,
    pub clouds_per_space: usize,
    pub points_per_cloud: usize,
    pub trials: usize,
    pub threshold: f64,
    #[serde(flatten)]
    pub pipeline: PipelineParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepresentativenessOutcome {
    /// Omnibus p-value of every trial, in trial order.
    pub trial_pvalues: Vec<f64>,
    /// Trials with p >= threshold.
    pub representative_trials: Vec<usize>,
    pub selected_trial: usize,
    pub selected_space: usize,
    /// Row ids of the selected space (a balanced subsample of the group).
    pub selected_rows: Vec<usize>,
    pub discarded_per_trial: usize,
}

/// Tests whether subsamples of one oversized group are exchangeable: each
/// trial partitions the group into `spaces` disjoint pseudo-groups (each
/// split into clouds) and runs the omnibus test across them. A trial is
/// representative when its p-value is at least `threshold`. The returned
/// subsample is one space drawn uniformly from a uniformly chosen
/// representative trial.
pub fn representativeness(
    ds: &Dataset,
    params: &RepresentativenessParams,
) -> Result<RepresentativenessOutcome> {
    if params.spaces < 2 {
        return Err(Error::input("need at least 2 spaces"));
    }
    if params.clouds_per_space < 2 {
        return Err(Error::input("need at least 2 clouds per space"));
    }
    if !(0.0 < params.threshold && params.threshold < 1.0) {
        return Err(Error::input("threshold must lie in (0, 1)"));
    }
    let rows = ds.rows_of(&params.group);
    if rows.is_empty() {
        return Err(Error::input(format!(
            "group {:?} not found in the dataset",
            params.group
        )));
    }
    let space_size = params.clouds_per_space * params.points_per_cloud;
    let needed = params.spaces * space_size;
    if rows.len() < needed {
        return Err(Error::input(format!(
            "group {:?} has {} rows but {} spaces of {} need {}",
            params.group,
            rows.len(),
            params.spaces,
            space_size,
            needed
        )));
    }
    let seed = params.pipeline.seed;

    let partition_for_trial = |t: usize| -> Vec<Vec<usize>> {
        let mut shuffled = rows.clone();
        let mut rng = seeds::rng(seed, &[seeds::DOMAIN_PARTITION, t as u64]);
        shuffled.shuffle(&mut rng);
        shuffled.truncate(needed);
        shuffled.chunks(space_size).map(<[usize]>::to_vec).collect()
    };

    let pvalues: Result<Vec<f64>> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let spaces = partition_for_trial(t);
            let clouds: Vec<LabeledCloud> = spaces
                .iter()
                .enumerate()
                .flat_map(|(s, space_rows)| {
                    space_rows
                        .chunks(params.points_per_cloud)
                        .enumerate()
                        .map(move |(c, chunk)| (s, c, chunk.to_vec()))
                })
                .map(|(s, c, row_ids)| {
                    let points: Vec<Vec<f64>> =
                        row_ids.iter().map(|&r| ds.rows[r].clone()).collect();
                    Ok(LabeledCloud {
                        group: format!("space{s:02}"),
                        cloud_index: c,
                        row_ids,
                        cloud: PointCloud::new(points)?,
                    })
                })
                .collect::<Result<_>>()?;
            let r_max = params.pipeline.r_max.unwrap_or_else(|| pooled_r_max(&clouds));
            let gd = grouped_from_clouds(&clouds, &params.pipeline, r_max)?;
            let cache = DistanceCache::from_grouped(&gd, params.pipeline.metric_exponent)?;
            let test_params = TestParams {
                max_exact: params.pipeline.max_exact,
                n_samples: params.pipeline.n_perms,
                seed: seeds::mix(seed, &[seeds::DOMAIN_TEST, t as u64]),
                retain_null: false,
            };
            let result: TestResult = omnibus_test(&gd, &cache, &test_params)?;
            Ok(result.p_value)
        })
        .collect();
    let trial_pvalues = pvalues?;

    let representative_trials: Vec<usize> = trial_pvalues
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= params.threshold)
        .map(|(t, _)| t)
        .collect();
    if representative_trials.is_empty() {
        return Err(Error::input(format!(
            "none of the {} trials was representative at threshold {}; \
             increase --trials or lower the threshold",
            params.trials, params.threshold
        )));
    }
    let mut rng = seeds::rng(seed, &[seeds::DOMAIN_SELECT]);
    let selected_trial = representative_trials[rng.random_range(0..representative_trials.len())];
    let selected_space = rng.random_range(0..params.spaces);
    let selected_rows = partition_for_trial(selected_trial)[selected_space].clone();
    Ok(RepresentativenessOutcome {
        trial_pvalues,
        representative_trials,
        selected_trial,
        selected_space,
        selected_rows,
        discarded_per_trial: rows.len() - needed,
    })
}

impl RepresentativenessOutcome {
    /// Writes the trial log (trial, p_value, representative) as CSV.
    pub fn write_log_csv(&self, path: impl AsRef<Path>, threshold: f64) -> Result<()> {
        let mut out = std::fs::File::create(path.as_ref())?;
        writeln!(out, "trial,p_value,representative")?;
        for (t, p) in self.trial_pvalues.iter().enumerate() {
            writeln!(out, "{},{},{}", t, p, *p >= threshold)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        std::fs::create_dir_all(dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn tmp() -> std::path::PathBuf {
        std::env::temp_dir().join("persist_test_dataset")
    }

    #[test]
    fn ingest_groups_and_counts() {
        let path = write_csv(
            &tmp(),
            "basic.csv",
            "x,y,status\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n9,10,a\n",
        );
        let ds = ingest(
            &path,
            &ColumnSelector::parse("x,y").unwrap(),
            &ColumnSelector::parse("status").unwrap(),
            true,
        )
        .unwrap();
        assert_eq!(ds.feature_names, vec!["x", "y"]);
        assert_eq!(
            ds.levels,
            vec![("a".to_string(), 3), ("b".to_string(), 2)]
        );
        assert_eq!(ds.rows_of("a"), vec![0, 2, 4]);
    }

    #[test]
    fn ingest_errors() {
        let dir = tmp();
        let path = write_csv(&dir, "one_level.csv", "x,g\n1,a\n2,a\n");
        let err = ingest(
            &path,
            &ColumnSelector::parse("x").unwrap(),
            &ColumnSelector::parse("g").unwrap(),
            true,
        )
        .unwrap_err();
        assert!(err.to_string().contains("2 group levels"));

        let path = write_csv(&dir, "missing_col.csv", "x,g\n1,a\n2,b\n");
        let err = ingest(
            &path,
            &ColumnSelector::parse("nope").unwrap(),
            &ColumnSelector::parse("g").unwrap(),
            true,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nope"));

        // header flag off on a headered file: the header is data and fails
        // to parse at row 1
        let path = write_csv(&dir, "headered.csv", "x,g\n1,a\n2,b\n");
        let err = ingest(
            &path,
            &ColumnSelector::parse("0").unwrap(),
            &ColumnSelector::parse("1").unwrap(),
            false,
        )
        .unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    fn synthetic_dataset(per_group: usize) -> Dataset {
        // two interleaved levels with smooth 2d features
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..per_group {
            let t = i as f64 / per_group as f64 * std::f64::consts::TAU;
            rows.push(vec![t.cos(), t.sin()]);
            labels.push("a".to_string());
            rows.push(vec![0.5 * t.cos() + 0.1, 0.5 * t.sin()]);
            labels.push("b".to_string());
        }
        Dataset {
            feature_names: vec!["x".into(), "y".into()],
            rows,
            labels,
            levels: vec![("a".into(), per_group), ("b".into(), per_group)],
        }
    }

    #[test]
    fn balance_and_partition_respects_the_plan() {
        let ds = synthetic_dataset(20);
        let plan = PartitionPlan::new(2, 8, 7);
        let clouds = balance_and_partition(&ds, &plan).unwrap();
        assert_eq!(clouds.len(), 4);
        for lc in &clouds {
            assert_eq!(lc.cloud.len(), 8);
            assert_eq!(lc.row_ids.len(), 8);
            // provenance maps back to matching rows
            for (&r, p) in lc.row_ids.iter().zip(lc.cloud.points()) {
                assert_eq!(&ds.rows[r], p);
                assert_eq!(ds.labels[r], lc.group);
            }
        }
        // no row reused within a group
        let mut seen = std::collections::HashSet::new();
        for lc in clouds.iter().filter(|c| c.group == "a") {
            for &r in &lc.row_ids {
                assert!(seen.insert(r));
            }
        }
        // reproducible
        let again = balance_and_partition(&ds, &plan).unwrap();
        assert_eq!(again[0].row_ids, clouds[0].row_ids);

        // a group smaller than balance_to names the feasible size
        let plan_big = PartitionPlan::new(2, 50, 7);
        let err = balance_and_partition(&ds, &plan_big).unwrap_err();
        assert!(err.to_string().contains("feasible"), "{err}");

        // whole group used when balance_to matches its size
        let plan_exact = PartitionPlan::new(2, 10, 7);
        let clouds = balance_and_partition(&ds, &plan_exact).unwrap();
        let a_rows: usize = clouds
            .iter()
            .filter(|c| c.group == "a")
            .map(|c| c.row_ids.len())
            .sum();
        assert_eq!(a_rows, 20);

        // c*k != balance_to is rejected
        let bad = PartitionPlan {
            balance_to: 15,
            ..PartitionPlan::new(2, 8, 7)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn analyze_produces_a_complete_report() {
        let ds = synthetic_dataset(24);
        let plan = PartitionPlan::new(3, 8, 21);
        let clouds = balance_and_partition(&ds, &plan).unwrap();
        let params = PipelineParams {
            n_perms: 500,
            seed: 3,
            ..PipelineParams::default()
        };
        let report = analyze(&clouds, &params, false).unwrap();
        assert_eq!(report.tests.groups.len(), 2);
        assert!(report.tests.p_value > 0.0 && report.tests.p_value <= 1.0);
        assert_eq!(report.provenance.len(), 6);
        assert!(report.r_max > 0.0);
        let json = report.to_json().unwrap();
        assert!(json.contains("\"p_value\""));
        // determinism
        let again = analyze(&clouds, &params, false).unwrap();
        assert_eq!(report.tests.p_value, again.tests.p_value);
    }

    #[test]
    fn standardization() {
        let ds = synthetic_dataset(10);
        let std = ds.standardized().unwrap();
        for j in 0..2 {
            let mean: f64 =
                std.rows.iter().map(|r| r[j]).sum::<f64>() / std.rows.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
        let constant = Dataset {
            feature_names: vec!["x".into()],
            rows: vec![vec![1.0], vec![1.0]],
            labels: vec!["a".into(), "b".into()],
            levels: vec![("a".into(), 1), ("b".into(), 1)],
        };
        assert!(constant.standardized().is_err());
    }

    #[test]
    fn representativeness_on_exchangeable_data() {
        // one oversized group of near-duplicate blocks: every trial should
        // be representative and the selection must reproduce
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..140 {
            let t = (i % 20) as f64 / 20.0 * std::f64::consts::TAU;
            rows.push(vec![t.cos() + 1e-3 * (i as f64), t.sin()]);
            labels.push("big".to_string());
        }
        for _ in 0..4 {
            rows.push(vec![0.0, 0.0]);
            labels.push("other".to_string());
        }
        let ds = Dataset {
            feature_names: vec!["x".into(), "y".into()],
            rows,
            labels,
            levels: vec![("big".into(), 140), ("other".into(), 4)],
        };
        let params = RepresentativenessParams {
            group: "big".into(),
            spaces: 3,
            clouds_per_space: 2,
            points_per_cloud: 20,
            trials: 6,
            threshold: 0.1,
            pipeline: PipelineParams {
                n_perms: 300,
                seed: 17,
                ..PipelineParams::default()
            },
        };
        let outcome = representativeness(&ds, &params).unwrap();
        assert_eq!(outcome.trial_pvalues.len(), 6);
        assert_eq!(outcome.discarded_per_trial, 140 - 3 * 40);
        assert!(!outcome.representative_trials.is_empty());
        assert_eq!(outcome.selected_rows.len(), 40);
        let again = representativeness(&ds, &params).unwrap();
        assert_eq!(outcome.selected_rows, again.selected_rows);
        assert_eq!(outcome.trial_pvalues, again.trial_pvalues);

        // group too small
        let too_big = RepresentativenessParams {
            spaces: 9,
            ..params
        };
        assert!(representativeness(&ds, &too_big).is_err());
    }
}
