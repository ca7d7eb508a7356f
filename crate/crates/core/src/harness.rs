//! Simulation driver: runs seeded trials of a [`TrialPlan`] over an optional
//! (sample size, noise) grid and reports the percentage of trials whose
//! omnibus (and optionally post-hoc) p-values fall at or below alpha.
//!
//! All clouds in a scenario share one scale cap so that essential-class caps
//! are comparable across groups; by default it is 1.1 times the largest
//! noiseless diameter among the spaces, recorded per cell in the report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::{
    omnibus_test, post_hoc, DistanceCache, GroupedDiagrams, PostHocReport, TestParams, TestResult,
};
use crate::persistence::diagrams_for_cloud;
use crate::rips::DEFAULT_SIMPLEX_BUDGET;
use crate::samplers::TrialPlan;
use crate::seeds;

/// Grid axes swept by a scenario; each cell overrides the plan's
/// points-per-cloud (broadcast to all groups) and every space's noise sigma.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub points_per_cloud: Vec<usize>,
    pub noise_sigma: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub plan: TrialPlan,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_hom_dim")]
    pub hom_dim: usize,
    #[serde(default = "default_n_perms")]
    pub n_perms: u64,
    #[serde(default = "default_max_exact")]
    pub max_exact: u64,
    #[serde(default)]
    pub run_posthoc: bool,
    /// Run post-hoc tests in every trial instead of gating on the omnibus
    /// p-value (for reproducing full tables).
    #[serde(default)]
    pub force_posthoc: bool,
    /// Shared scale cap; defaults to 1.1 x the largest noiseless diameter.
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "default_exponent")]
    pub metric_exponent: f64,
    #[serde(default = "default_budget")]
    pub simplex_budget: usize,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
}

fn default_trials() -> usize {
    100
}
fn default_alpha() -> f64 {
    0.05
}
fn default_hom_dim() -> usize {
    1
}
fn default_n_perms() -> u64 {
    100_000
}
fn default_max_exact() -> u64 {
    200_000
}
fn default_exponent() -> f64 {
    2.0
}
fn default_budget() -> usize {
    DEFAULT_SIMPLEX_BUDGET
}

impl ScenarioConfig {
    pub fn new(plan: TrialPlan) -> Self {
        ScenarioConfig {
            plan,
            trials: default_trials(),
            alpha: default_alpha(),
            hom_dim: default_hom_dim(),
            n_perms: default_n_perms(),
            max_exact: default_max_exact(),
            run_posthoc: false,
            force_posthoc: false,
            r_max: None,
            metric_exponent: default_exponent(),
            simplex_budget: default_budget(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::input(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.points_per_cloud.is_empty() || sweep.noise_sigma.is_empty() {
                return Err(Error::input("sweep axes must be nonempty"));
            }
            if sweep.points_per_cloud.iter().any(|&n| n == 0) {
                return Err(Error::input("sweep points_per_cloud entries must be positive"));
            }
            if sweep.noise_sigma.iter().any(|&s| s < 0.0) {
                return Err(Error::input("sweep noise_sigma entries must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| Error::input(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Shared scale cap for a plan: 1.5 times the largest component-circle
/// radius among the spaces.
///
/// The loop class of a circle of radius r dies by sqrt(3) r ~ 1.73 r, so
/// this keeps the scale window at the component level: features born below
/// the cap are tracked (capped as essential once they outlive it), while
/// sampling artifacts at the scale of the whole space are ignored. A cap at
/// the pooled-geometry diameter instead makes sparse samples from
/// differently sized spaces trivially distinguishable through those
/// artifacts alone.
pub fn shared_r_max(plan: &TrialPlan) -> f64 {
    plan.specs
        .iter()
        .map(|s| s.max_component_radius())
        .fold(0.0f64, f64::max)
        * 1.5
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub omnibus: TestResult,
    pub posthoc: Option<PostHocReport>,
}

/// One trial: sample every cloud from its (seed, trial, group, cloud)
/// substream, build dimension-`hom_dim` diagrams under the shared cap, fill
/// the distance cache, and run the tests.
pub fn run_trial(plan: &TrialPlan, cfg: &ScenarioConfig, trial_index: usize) -> Result<TrialOutcome> {
    let annotate = |e: Error| match e {
        Error::Input(m) => Error::Input(format!("trial {trial_index}: {m}")),
        Error::Resource(m) => Error::Resource(format!("trial {trial_index}: {m}")),
        Error::Internal(m) => Error::Internal(format!("trial {trial_index}: {m}")),
    };
    run_trial_inner(plan, cfg, trial_index).map_err(annotate)
}

fn run_trial_inner(
    plan: &TrialPlan,
    cfg: &ScenarioConfig,
    trial_index: usize,
) -> Result<TrialOutcome> {
    plan.validate()?;
    let sizes = plan.group_sizes()?;
    let r_max = cfg.r_max.unwrap_or_else(|| shared_r_max(plan));

    let tasks: Vec<(usize, usize)> = (0..plan.specs.len())
        .flat_map(|g| (0..plan.clouds_per_group).map(move |c| (g, c)))
        .collect();
    let built: Result<Vec<_>> = tasks
        .par_iter()
        .map(|&(g, c)| {
            let mut rng = seeds::rng(
                plan.seed,
                &[seeds::DOMAIN_CLOUD, trial_index as u64, g as u64, c as u64],
            );
            let cloud = plan.specs[g].sample(sizes[g], &mut rng)?;
            let dgms = diagrams_for_cloud(&cloud, cfg.hom_dim, r_max, cfg.simplex_budget)?;
            Ok(dgms.into_iter().nth(cfg.hom_dim).unwrap())
        })
        .collect();
    let built = built?;

    let mut groups: Vec<(String, Vec<crate::persistence::PersistenceDiagram>)> = plan
        .specs
        .iter()
        .map(|s| (s.label.clone(), Vec::with_capacity(plan.clouds_per_group)))
        .collect();
    for (&(g, _), dgm) in tasks.iter().zip(built) {
        groups[g].1.push(dgm);
    }
    let gd = GroupedDiagrams::new(groups)?;
    let cache = DistanceCache::from_grouped(&gd, cfg.metric_exponent)?;

    let params = TestParams {
        max_exact: cfg.max_exact,
        n_samples: cfg.n_perms,
        seed: seeds::mix(plan.seed, &[seeds::DOMAIN_TEST, trial_index as u64]),
        retain_null: false,
    };
    let omnibus = omnibus_test(&gd, &cache, &params)?;
    let posthoc = if cfg.run_posthoc
        && gd.groups().len() >= 3
        && (cfg.force_posthoc || omnibus.p_value <= cfg.alpha)
    {
        Some(post_hoc(&gd, &cache, cfg.alpha, &params)?)
    } else {
        None
    };
    Ok(TrialOutcome { omnibus, posthoc })
}

/// Aggregated results of one grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub points_per_cloud: Vec<usize>,
    pub noise_sigma: Vec<f64>,
    pub r_max: f64,
    pub trials: usize,
    /// Omnibus p-value per trial, in trial order.
    pub omnibus_pvalues: Vec<f64>,
    pub percent_significant: f64,
    /// Per post-hoc pair "a vs b": p-values per trial (NaN when the pair was
    /// gated off) and percent significant over all trials.
    pub posthoc_pvalues: BTreeMap<String, Vec<f64>>,
    pub posthoc_percent: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub master_seed: u64,
    pub config: ScenarioConfig,
    pub cells: Vec<CellReport>,
}

/// Runs every cell of the scenario grid. Per-cell failures are recorded in
/// the cell's `error` field without aborting the remaining cells.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let cells_spec: Vec<(Option<usize>, Option<f64>)> = match &cfg.sweep {
        Some(sweep) => sweep
            .points_per_cloud
            .iter()
            .flat_map(|&n| sweep.noise_sigma.iter().map(move |&s| (Some(n), Some(s))))
            .collect(),
        None => vec![(None, None)],
    };

    let mut cells = Vec::with_capacity(cells_spec.len());
    for (points, sigma) in cells_spec {
        let mut plan = cfg.plan.clone();
        if let Some(n) = points {
            plan.points_per_cloud = vec![n];
        }
        if let Some(s) = sigma {
            for spec in &mut plan.specs {
                spec.noise_sigma = s;
            }
        }
        cells.push(run_cell(&plan, cfg));
    }
    Ok(ScenarioReport {
        master_seed: cfg.plan.seed,
        config: cfg.clone(),
        cells,
    })
}

fn run_cell(plan: &TrialPlan, cfg: &ScenarioConfig) -> CellReport {
    let r_max = cfg.r_max.unwrap_or_else(|| shared_r_max(plan));
    let sizes = match plan.group_sizes() {
        Ok(s) => s,
        Err(e) => return failed_cell(plan, cfg, r_max, e.to_string()),
    };
    let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(plan, cfg, t))
        .collect();

    let mut omnibus_pvalues = Vec::with_capacity(cfg.trials);
    let mut posthoc_pvalues: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut error = None;
    for outcome in &outcomes {
        match outcome {
            Ok(res) => {
                omnibus_pvalues.push(res.omnibus.p_value);
                if let Some(ph) = &res.posthoc {
                    for pair in &ph.pairs {
                        posthoc_pvalues
                            .entry(format!("{} vs {}", pair.group_a, pair.group_b))
                            .or_default();
                    }
                }
            }
            Err(e) => {
                error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if let Some(e) = error {
        return failed_cell(plan, cfg, r_max, e);
    }
    // second pass: align pair p-value vectors across trials (NaN = gated off)
    for outcome in &outcomes {
        let res = outcome.as_ref().unwrap();
        for (pair, values) in posthoc_pvalues.iter_mut() {
            let p = res
                .posthoc
                .as_ref()
                .and_then(|ph| {
                    ph.pairs
                        .iter()
                        .find(|c| format!("{} vs {}", c.group_a, c.group_b) == *pair)
                })
                .map(|c| c.result.p_value)
                .unwrap_or(f64::NAN);
            values.push(p);
        }
    }

    let percent = |ps: &[f64]| {
        100.0 * ps.iter().filter(|p| **p <= cfg.alpha).count() as f64 / ps.len().max(1) as f64
    };
    let percent_significant = percent(&omnibus_pvalues);
    let posthoc_percent = posthoc_pvalues
        .iter()
        .map(|(pair, ps)| (pair.clone(), percent(ps)))
        .collect();
    CellReport {
        points_per_cloud: sizes,
        noise_sigma: plan.specs.iter().map(|s| s.noise_sigma).collect(),
        r_max,
        trials: cfg.trials,
        omnibus_pvalues,
        percent_significant,
        posthoc_pvalues,
        posthoc_percent,
        error: None,
    }
}

fn failed_cell(plan: &TrialPlan, cfg: &ScenarioConfig, r_max: f64, error: String) -> CellReport {
    CellReport {
        points_per_cloud: plan.points_per_cloud.clone(),
        noise_sigma: plan.specs.iter().map(|s| s.noise_sigma).collect(),
        r_max,
        trials: cfg.trials,
        omnibus_pvalues: Vec::new(),
        percent_significant: 0.0,
        posthoc_pvalues: BTreeMap::new(),
        posthoc_percent: BTreeMap::new(),
        error: Some(error),
    }
}

fn join_usizes(v: &[usize]) -> String {
    v.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

impl ScenarioReport {
    /// Writes report.csv (one row per cell per test), pvalues.csv (raw
    /// p-values per trial), report.txt (grid tables) and scenario_echo.toml
    /// into the directory.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;

        let mut report = std::fs::File::create(dir.join("report.csv"))?;
        writeln!(
            report,
            "points_per_cloud,noise_sigma,test,percent_significant,trials,r_max,error"
        )?;
        for cell in &self.cells {
            let sigma = cell.noise_sigma.first().copied().unwrap_or(0.0);
            writeln!(
                report,
                "{},{},omnibus,{},{},{},{}",
                join_usizes(&cell.points_per_cloud),
                sigma,
                cell.percent_significant,
                cell.trials,
                cell.r_max,
                cell.error.clone().unwrap_or_default()
            )?;
            for (pair, pct) in &cell.posthoc_percent {
                writeln!(
                    report,
                    "{},{},{},{},{},{},",
                    join_usizes(&cell.points_per_cloud),
                    sigma,
                    pair.replace(' ', "_"),
                    pct,
                    cell.trials,
                    cell.r_max
                )?;
            }
        }

        let mut pvalues = std::fs::File::create(dir.join("pvalues.csv"))?;
        writeln!(pvalues, "points_per_cloud,noise_sigma,test,trial,p_value")?;
        for cell in &self.cells {
            let sigma = cell.noise_sigma.first().copied().unwrap_or(0.0);
            for (t, p) in cell.omnibus_pvalues.iter().enumerate() {
                writeln!(
                    pvalues,
                    "{},{},omnibus,{},{}",
                    join_usizes(&cell.points_per_cloud),
                    sigma,
                    t,
                    p
                )?;
            }
            for (pair, ps) in &cell.posthoc_pvalues {
                for (t, p) in ps.iter().enumerate() {
                    writeln!(
                        pvalues,
                        "{},{},{},{},{}",
                        join_usizes(&cell.points_per_cloud),
                        sigma,
                        pair.replace(' ', "_"),
                        t,
                        p
                    )?;
                }
            }
        }

        std::fs::write(dir.join("report.txt"), self.render_text())?;
        let echo = toml::to_string_pretty(&self.config)
            .map_err(|e| Error::internal(format!("config echo: {e}")))?;
        std::fs::write(dir.join("scenario_echo.toml"), echo)?;
        Ok(())
    }

    /// Grid tables in the layout sample-size rows by noise columns.
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "master seed: {}", self.master_seed).unwrap();
        writeln!(out, "trials per cell: {}", self.config.trials).unwrap();
        writeln!(out, "alpha: {}", self.config.alpha).unwrap();
        writeln!(
            out,
            "spaces: {}",
            self.config
                .plan
                .specs
                .iter()
                .map(|s| s.label.clone())
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
        writeln!(out).unwrap();

        let mut tests: Vec<String> = vec!["omnibus".to_string()];
        for cell in &self.cells {
            for pair in cell.posthoc_percent.keys() {
                if !tests.contains(pair) {
                    tests.push(pair.clone());
                }
            }
        }
        for test in tests {
            writeln!(out, "percent of trials with {test} p <= {}", self.config.alpha).unwrap();
            let mut sizes: Vec<String> = Vec::new();
            let mut sigmas: Vec<String> = Vec::new();
            for cell in &self.cells {
                let n = join_usizes(&cell.points_per_cloud);
                let s = format!("{}", cell.noise_sigma.first().copied().unwrap_or(0.0));
                if !sizes.contains(&n) {
                    sizes.push(n);
                }
                if !sigmas.contains(&s) {
                    sigmas.push(s);
                }
            }
            write!(out, "{:>12}", "n \\ sigma").unwrap();
            for s in &sigmas {
                write!(out, "{s:>10}").unwrap();
            }
            writeln!(out).unwrap();
            for n in &sizes {
                write!(out, "{n:>12}").unwrap();
                for s in &sigmas {
                    let cell = self.cells.iter().find(|c| {
                        join_usizes(&c.points_per_cloud) == *n
                            && format!("{}", c.noise_sigma.first().copied().unwrap_or(0.0)) == *s
                    });
                    match cell {
                        Some(c) if c.error.is_some() => write!(out, "{:>10}", "ERR").unwrap(),
                        Some(c) => {
                            let pct = if test == "omnibus" {
                                Some(c.percent_significant)
                            } else {
                                c.posthoc_percent.get(&test).copied()
                            };
                            match pct {
                                Some(v) => write!(out, "{v:>10.1}").unwrap(),
                                None => write!(out, "{:>10}", "-").unwrap(),
                            }
                        }
                        None => write!(out, "{:>10}", "-").unwrap(),
                    }
                }
                writeln!(out).unwrap();
            }
            writeln!(out).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::SpaceSpec;

    fn tiny_config() -> ScenarioConfig {
        let plan = TrialPlan {
            specs: vec![
                SpaceSpec::circle(1.0, 0.0, "a"),
                SpaceSpec::circle(1.0, 0.0, "b"),
            ],
            clouds_per_group: 3,
            points_per_cloud: vec![10],
            seed: 11,
        };
        ScenarioConfig {
            trials: 4,
            n_perms: 200,
            ..ScenarioConfig::new(plan)
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = tiny_config();
        let a = run_trial(&cfg.plan, &cfg, 0).unwrap();
        let b = run_trial(&cfg.plan, &cfg, 0).unwrap();
        assert_eq!(a.omnibus.p_value, b.omnibus.p_value);
        assert_eq!(a.omnibus.observed_stat, b.omnibus.observed_stat);
        let c = run_trial(&cfg.plan, &cfg, 1).unwrap();
        assert_ne!(a.omnibus.observed_stat, c.omnibus.observed_stat);
        // valid p-value contract
        assert!(a.omnibus.p_value >= 1.0 / a.omnibus.replicates as f64);
        assert!(a.omnibus.p_value <= 1.0);
    }

    #[test]
    fn shared_r_max_uses_largest_component() {
        let plan = TrialPlan {
            specs: vec![
                SpaceSpec::circle(0.5, 0.0, "c1"),
                SpaceSpec::wedge(vec![1.0, 1.0, 1.0], 0.0, "w3"),
            ],
            clouds_per_group: 2,
            points_per_cloud: vec![6],
            seed: 0,
        };
        assert!((shared_r_max(&plan) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn scenario_report_is_reproducible_and_complete() {
        let cfg = tiny_config();
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.cells.len(), 1);
        assert_eq!(a.cells[0].omnibus_pvalues, b.cells[0].omnibus_pvalues);
        assert_eq!(a.cells[0].omnibus_pvalues.len(), cfg.trials);
        assert!(a.cells[0].error.is_none());

        let dir = std::env::temp_dir().join("persist_test_harness_report");
        let _ = std::fs::remove_dir_all(&dir);
        a.write_dir(&dir).unwrap();
        let first = std::fs::read(dir.join("report.csv")).unwrap();
        b.write_dir(&dir).unwrap();
        let second = std::fs::read(dir.join("report.csv")).unwrap();
        assert_eq!(first, second);
        for name in ["report.csv", "pvalues.csv", "report.txt", "scenario_echo.toml"] {
            assert!(dir.join(name).exists(), "{name} missing");
        }
    }

    #[test]
    fn sweep_produces_one_cell_per_grid_point() {
        let mut cfg = tiny_config();
        cfg.trials = 2;
        cfg.sweep = Some(SweepGrid {
            points_per_cloud: vec![6, 8],
            noise_sigma: vec![0.0, 0.2],
        });
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        let sizes: Vec<Vec<usize>> = report
            .cells
            .iter()
            .map(|c| c.points_per_cloud.clone())
            .collect();
        assert_eq!(sizes, vec![vec![6, 6], vec![6, 6], vec![8, 8], vec![8, 8]]);
        for cell in &report.cells {
            assert!(cell.error.is_none());
            assert_eq!(cell.omnibus_pvalues.len(), 2);
        }
    }

    #[test]
    fn single_trial_percentages_are_zero_or_hundred() {
        let mut cfg = tiny_config();
        cfg.trials = 1;
        let report = run_scenario(&cfg).unwrap();
        let pct = report.cells[0].percent_significant;
        assert!(pct == 0.0 || pct == 100.0);
    }

    #[test]
    fn cell_failure_is_recorded_without_aborting() {
        let mut cfg = tiny_config();
        // a 3-point cloud cannot be sampled from a 2-component wedge with n=1
        cfg.plan.specs = vec![
            SpaceSpec::wedge(vec![1.0, 1.0], 0.0, "w"),
            SpaceSpec::circle(1.0, 0.0, "c"),
        ];
        cfg.sweep = Some(SweepGrid {
            points_per_cloud: vec![1, 8],
            noise_sigma: vec![0.0],
        });
        cfg.trials = 1;
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.cells.len(), 2);
        assert!(report.cells[0].error.is_some());
        assert!(report.cells[1].error.is_none());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = tiny_config();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let parsed: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed.trials, cfg.trials);
        assert_eq!(parsed.plan.seed, cfg.plan.seed);
        assert_eq!(parsed.plan.specs.len(), 2);

        // scalar points_per_cloud broadcasts
        let scalar = r#"
            trials = 2
            [plan]
            clouds_per_group = 3
            points_per_cloud = 12
            seed = 5
            [[plan.specs]]
            kind = "circle"
            radii = [1.0]
            label = "a"
            [[plan.specs]]
            kind = "wedge"
            radii = [1.0, 1.0]
            label = "b"
        "#;
        let cfg: ScenarioConfig = toml::from_str(scalar).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.plan.group_sizes().unwrap(), vec![12, 12]);
    }
}
