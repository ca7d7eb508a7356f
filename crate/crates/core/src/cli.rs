//! Command-line surface. Exit codes: 0 success, 2 input error, 3 resource
//! error, 4 internal-consistency error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use persist_test::dataset::{
    analyze, balance_and_partition, ingest, representativeness, ColumnSelector, PartitionPlan,
    PipelineParams, RepresentativenessParams,
};
use persist_test::error::{Error, Result};
use persist_test::harness::{run_scenario, ScenarioConfig};
use persist_test::metric::{pairwise_distance_matrix, write_distance_matrix_csv};
use persist_test::permutation::{
    omnibus_test, post_hoc, DistanceCache, GroupedDiagrams, TestParams, TestReport,
};
use persist_test::persistence::{
    diagrams, read_diagrams_csv, write_diagrams_csv, PersistenceDiagram,
};
use persist_test::rips::{
    build_filtration_from_distances, build_filtration_with_budget, DEFAULT_SIMPLEX_BUDGET,
};
use persist_test::samplers::{sample_chorded_circle, sample_circle, sample_wedge};
use persist_test::{seeds, DistanceMatrix, PointCloud};

#[derive(Parser)]
#[command(
    name = "persist-test",
    about = "Shape comparison for groups of point clouds via persistence diagrams and permutation tests"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic point cloud and write it as CSV.
    Sample(SampleArgs),
    /// Compute persistence diagrams of a point cloud.
    Diagram(DiagramArgs),
    /// Pairwise distance matrix between diagram files.
    Distance(DistanceArgs),
    /// Omnibus (and post-hoc) permutation tests over groups of diagram files.
    Test(TestArgs),
    /// Run a simulation scenario from a TOML config.
    Simulate(SimulateArgs),
    /// Full pipeline on a group-labeled dataset: balance, partition, test.
    Analyze(AnalyzeArgs),
    /// Representativeness protocol for an oversized group.
    Representativeness(ReprArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// circle | wedge | chorded-circle
    #[arg(long)]
    kind: String,
    /// Component radii, comma-separated (circle takes one).
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    radii: Vec<f64>,
    /// Number of chords for chorded-circle (1 or 2).
    #[arg(long, default_value_t = 1)]
    chords: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagramArgs {
    /// Point-cloud CSV (one row per point).
    #[arg(long, conflicts_with = "distances")]
    input: Option<PathBuf>,
    /// Square distance-matrix CSV instead of coordinates.
    #[arg(long)]
    distances: Option<PathBuf>,
    /// Input file has a header row to skip.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 1)]
    hom_dim: usize,
    /// Scale cap; defaults to 1.1 x the input diameter.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SIMPLEX_BUDGET)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistanceArgs {
    /// Diagram CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    hom_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    metric_exponent: f64,
    /// Drop essential points before computing distances.
    #[arg(long)]
    exclude_essential: bool,
    /// Scale cap assumed when reading diagrams (default: inferred).
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    /// Group spec NAME=FILE[,FILE...]; repeat per group.
    #[arg(long = "group", required = true)]
    groups: Vec<String>,
    #[arg(long, default_value_t = 1)]
    hom_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    metric_exponent: f64,
    #[arg(long)]
    exclude_essential: bool,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    n_perms: u64,
    #[arg(long, default_value_t = 200_000)]
    max_exact: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Run post-hoc pairs even when the omnibus test is not significant.
    #[arg(long)]
    force_posthoc: bool,
    /// Write the omnibus permutation distribution as CSV.
    #[arg(long)]
    dump_null: Option<PathBuf>,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CommonPipelineArgs {
    #[arg(long, default_value_t = 1)]
    hom_dim: usize,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    metric_exponent: f64,
    #[arg(long, default_value_t = 100_000)]
    n_perms: u64,
    #[arg(long, default_value_t = 200_000)]
    max_exact: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SIMPLEX_BUDGET)]
    budget: usize,
}

impl CommonPipelineArgs {
    fn pipeline(&self, force_posthoc: bool) -> PipelineParams {
        PipelineParams {
            hom_dim: self.hom_dim,
            r_max: self.r_max,
            metric_exponent: self.metric_exponent,
            n_perms: self.n_perms,
            max_exact: self.max_exact,
            alpha: self.alpha,
            seed: self.seed,
            simplex_budget: self.budget,
            force_posthoc,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Feature columns: names (with --header) or 0-based indices.
    #[arg(long)]
    features: String,
    /// Group label column.
    #[arg(long)]
    group_col: String,
    #[arg(long)]
    header: bool,
    /// Clouds per group.
    #[arg(long)]
    clouds: usize,
    /// Points per cloud.
    #[arg(long)]
    points: usize,
    /// Per-group subsample size (default: clouds x points).
    #[arg(long)]
    balance_to: Option<usize>,
    /// Standardize each feature to mean 0, sd 1 before analysis.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    force_posthoc: bool,
    #[command(flatten)]
    common: CommonPipelineArgs,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReprArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    features: String,
    #[arg(long)]
    group_col: String,
    #[arg(long)]
    header: bool,
    /// Group level to test.
    #[arg(long)]
    group: String,
    /// Number of pseudo-groups ("spaces") per trial.
    #[arg(long)]
    spaces: usize,
    #[arg(long)]
    clouds: usize,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value_t = 150)]
    trials: usize,
    /// Representativeness flag level: a trial is representative when its
    /// omnibus p-value is at least this.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    common: CommonPipelineArgs,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Diagram(args) => cmd_diagram(args),
        Command::Distance(args) => cmd_distance(args),
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Representativeness(args) => cmd_repr(args),
    }
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let mut rng = seeds::rng(args.seed, &[seeds::DOMAIN_CLOUD, 0, 0, 0]);
    let cloud = match args.kind.as_str() {
        "circle" => {
            if args.radii.len() != 1 {
                return Err(Error::input("a circle takes exactly one radius"));
            }
            sample_circle(args.radii[0], args.n, args.sigma, &mut rng)?
        }
        "wedge" => sample_wedge(&args.radii, args.n, args.sigma, &mut rng)?,
        "chorded-circle" | "chorded_circle" => {
            sample_chorded_circle(args.chords, args.n, args.sigma, &mut rng)?
        }
        other => {
            return Err(Error::input(format!(
                "unknown kind {other:?}; expected circle, wedge or chorded-circle"
            )))
        }
    };
    cloud.write_csv(&args.out)
}

fn cmd_diagram(args: DiagramArgs) -> Result<()> {
    let fc = match (&args.input, &args.distances) {
        (Some(path), None) => {
            let cloud = PointCloud::read_csv(path, args.header)?;
            let r_max = args.r_max.unwrap_or_else(|| cloud.diameter() * 1.1);
            build_filtration_with_budget(&cloud, args.hom_dim + 1, r_max, args.budget)?
        }
        (None, Some(path)) => {
            let dm = DistanceMatrix::read_csv(path, args.header)?;
            let r_max = args.r_max.unwrap_or_else(|| {
                let mut best = 0.0f64;
                for i in 0..dm.n() {
                    for j in 0..dm.n() {
                        best = best.max(dm.get(i, j));
                    }
                }
                best * 1.1
            });
            build_filtration_from_distances(&dm, args.hom_dim + 1, r_max, args.budget)?
        }
        _ => {
            return Err(Error::input(
                "exactly one of --input (coordinates) or --distances (matrix) is required",
            ))
        }
    };
    let dgms = diagrams(&fc, args.hom_dim)?;
    write_diagrams_csv(&args.out, &dgms)
}

/// Reads one diagram file and selects the requested dimension.
fn load_diagram(path: &Path, hom_dim: usize, r_max: Option<f64>, exclude_essential: bool) -> Result<PersistenceDiagram> {
    let all = read_diagrams_csv(path, r_max)?;
    let found = all.into_iter().find(|d| d.dim() == hom_dim);
    let d = match found {
        Some(d) => d,
        // a file with no rows of this dimension is an empty diagram
        None => PersistenceDiagram::empty(hom_dim, r_max.unwrap_or(0.0)),
    };
    Ok(if exclude_essential { d.without_essential() } else { d })
}

fn cmd_distance(args: DistanceArgs) -> Result<()> {
    let loaded: Result<Vec<PersistenceDiagram>> = args
        .inputs
        .iter()
        .map(|p| load_diagram(p, args.hom_dim, args.r_max, args.exclude_essential))
        .collect();
    let loaded = loaded?;
    let mut ids: Vec<String> = args
        .inputs
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect();
    // disambiguate duplicate stems
    for i in 0..ids.len() {
        if ids.iter().filter(|x| **x == ids[i]).count() > 1 {
            ids[i] = format!("{}#{i}", ids[i]);
        }
    }
    let matrix = pairwise_distance_matrix(&loaded, args.metric_exponent)?;
    write_distance_matrix_csv(&args.out, &ids, &matrix)
}

fn cmd_test(args: TestArgs) -> Result<()> {
    let mut groups = Vec::new();
    for spec in &args.groups {
        let (name, files) = spec.split_once('=').ok_or_else(|| {
            Error::input(format!("group spec {spec:?} is not NAME=FILE[,FILE...]"))
        })?;
        let mut group = Vec::new();
        for file in files.split(',') {
            group.push(load_diagram(
                Path::new(file.trim()),
                args.hom_dim,
                args.r_max,
                args.exclude_essential,
            )?);
        }
        groups.push((name.to_string(), group));
    }
    let gd = GroupedDiagrams::new(groups)?;
    let cache = DistanceCache::from_grouped(&gd, args.metric_exponent)?;
    let params = TestParams {
        max_exact: args.max_exact,
        n_samples: args.n_perms,
        seed: args.seed,
        retain_null: args.dump_null.is_some(),
    };
    let omnibus = omnibus_test(&gd, &cache, &params)?;
    if let (Some(path), Some(null)) = (&args.dump_null, &omnibus.null_stats) {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "replicate,statistic")?;
        for (i, s) in null.iter().enumerate() {
            writeln!(out, "{i},{s}")?;
        }
    }
    let ph = if gd.groups().len() >= 3 && (args.force_posthoc || omnibus.p_value <= args.alpha) {
        Some(post_hoc(&gd, &cache, args.alpha, &params)?)
    } else {
        None
    };
    let report = TestReport::new(&gd, &omnibus, ph.as_ref());
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::internal(format!("json: {e}")))?;
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = ScenarioConfig::from_toml_file(&args.config)?;
    let report = run_scenario(&cfg)?;
    report.write_dir(&args.out)?;
    print!("{}", report.render_text());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let ds = ingest(
        &args.input,
        &ColumnSelector::parse(&args.features)?,
        &ColumnSelector::parse(&args.group_col)?,
        args.header,
    )?;
    let ds = if args.standardize { ds.standardized()? } else { ds };
    let balance_to = args.balance_to.unwrap_or(args.clouds * args.points);
    let plan = PartitionPlan {
        clouds_per_group: args.clouds,
        points_per_cloud: args.points,
        balance_to,
        seed: args.common.seed,
    };
    let clouds = balance_and_partition(&ds, &plan)?;
    let report = analyze(&clouds, &args.common.pipeline(args.force_posthoc), args.standardize)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("report.json"), report.to_json()? + "\n")?;
    std::fs::write(args.out.join("report.txt"), report.render_text())?;
    print!("{}", report.render_text());
    Ok(())
}

fn cmd_repr(args: ReprArgs) -> Result<()> {
    let ds = ingest(
        &args.input,
        &ColumnSelector::parse(&args.features)?,
        &ColumnSelector::parse(&args.group_col)?,
        args.header,
    )?;
    let ds = if args.standardize { ds.standardized()? } else { ds };
    let params = RepresentativenessParams {
        group: args.group.clone(),
        spaces: args.spaces,
        clouds_per_space: args.clouds,
        points_per_cloud: args.points,
        trials: args.trials,
        threshold: args.threshold,
        pipeline: args.common.pipeline(false),
    };
    let outcome = representativeness(&ds, &params)?;
    std::fs::create_dir_all(&args.out)?;
    let json = serde_json::to_string_pretty(&outcome)
        .map_err(|e| Error::internal(format!("json: {e}")))?;
    std::fs::write(args.out.join("summary.json"), json + "\n")?;
    outcome.write_log_csv(args.out.join("trials.csv"), args.threshold)?;
    // the selected subsample with provenance
    let mut sub = std::fs::File::create(args.out.join("subsample.csv"))?;
    writeln!(sub, "row_id,{},group", ds.feature_names.join(","))?;
    for &r in &outcome.selected_rows {
        let cells: Vec<String> = ds.rows[r].iter().map(|v| v.to_string()).collect();
        writeln!(sub, "{},{},{}", r, cells.join(","), ds.labels[r])?;
    }
    println!(
        "representative trials: {} of {} (threshold {}); selected space {} of trial {}",
        outcome.representative_trials.len(),
        args.trials,
        args.threshold,
        outcome.selected_space,
        outcome.selected_trial
    );
    Ok(())
}
