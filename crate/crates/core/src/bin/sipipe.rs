use clap::{Args, Parser, Subcommand, ValueEnum};
use sipipe::data::{Covariance, DataMatrix};
use sipipe::engine::{run_pipeline, SweepConfig};
use sipipe::error::{Error, Result};
use sipipe::graph::PipelineGraph;
use sipipe::harness::covariance::{estimate_covariance_heldout, read_covariance};
use sipipe::harness::csv_io::{read_matrix_path, write_records, write_records_path, CsvOptions};
use sipipe::harness::experiment::{
    power_experiment, type1_experiment, ExperimentConfig, ExperimentPoint, FeatureChoice, SigmaMode, Type1Grid,
};
use sipipe::harness::generate::{ar_covariance, NoiseModel};
use sipipe::harness::plot::{emit_plots, read_table, PlotKind};
use sipipe::harness::validate;
use sipipe::inference::{default_pair, estimate_variance, test_with_result, TestRecord, TestSpec};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "sipipe", version, about = "Selective p-values for outlier detection / feature selection / clustering pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test every selected feature of a data set; writes a p-value table.
    Run(RunArgs),
    /// Type I error rates on null data over a grid of n or d.
    Type1(ExperimentArgs),
    /// Power on the three-cluster design over a grid of delta.
    Power(ExperimentArgs),
    /// Property suites: interval stability, masked runs, numerical kernels.
    Validate(ValidateArgs),
    /// Redraw the SVG of a rate table written by `type1` or `power`.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SigmaArg {
    /// Sigma = I.
    Identity,
    /// Sigma_ij = 2^-|i-j| over the row-major flat index.
    Ar,
    /// sigma^2 I with sigma^2 the sample variance of the tested column.
    Estimate,
    /// Per-feature variances from the rows of --holdout.
    HeldOut,
    /// Covariance read from --sigma-file (d x d or nd x nd CSV).
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    N,
    D,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    sigma: SigmaArg,
    #[arg(long)]
    sigma_file: Option<PathBuf>,
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// The data (and holdout) files start with a header row.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Transform every value to ln(1 + x) on load.
    #[arg(long)]
    log1p: bool,
    /// Clusters to compare, e.g. `1,2`; defaults to the two largest.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pair: Option<Vec<i32>>,
    /// Directory for `pvalues.csv`; prints to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    sigma: SigmaArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Testable replicates per grid point.
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Type I grid variable (the other dimension is fixed at n = 100 or d = 10).
    #[arg(long, value_enum, default_value = "n")]
    grid: GridArg,
    /// Grid values; defaults to 100,150,200,250 for n, 5,10,15,20 for d
    /// and 0.4,0.6,0.8 for delta.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Test every candidate feature instead of one drawn at random.
    #[arg(long)]
    all_features: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Multiplier on the default case counts (100 / 50 / 1000).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Rate table CSV.
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Type1(a) => experiment(a, false),
        Command::Power(a) => experiment(a, true),
        Command::Validate(a) => validate_all(a),
        Command::Plot(a) => plot(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_graph(path: &Path) -> Result<(PipelineGraph, String)> {
    let g = PipelineGraph::from_path(path)?;
    let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok((g, label))
}

fn run(a: RunArgs) -> Result<()> {
    let (g, label) = load_graph(&a.config)?;
    if !a.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter must be ASCII, got {:?}", a.delimiter)));
    }
    let opts = CsvOptions {
        header: a.header,
        delimiter: a.delimiter as u8,
        log1p: a.log1p,
    };
    let x = read_matrix_path(&a.data, &opts)?;
    let (n, d) = (x.rows(), x.cols());
    let shared = match a.sigma {
        SigmaArg::Identity => Some(Covariance::identity()),
        SigmaArg::Ar => Some(ar_covariance(n * d, 0.5)),
        SigmaArg::Estimate => None,
        SigmaArg::HeldOut => {
            let path = a.holdout.as_ref().ok_or_else(|| Error::Config("--sigma held-out needs --holdout".into()))?;
            Some(estimate_covariance_heldout(&read_matrix_path(path, &opts)?, n)?)
        }
        SigmaArg::File => {
            let path = a.sigma_file.as_ref().ok_or_else(|| Error::Config("--sigma file needs --sigma-file".into()))?;
            Some(read_covariance(path, n, d)?)
        }
    };
    let records = test_features(&g, &x, shared.as_ref(), a.pair, &label)?;
    match a.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("pvalues.csv");
            write_records_path(&path, &records)?;
            println!("wrote {} tests to {}", records.len(), path.display());
        }
        None => write_records(std::io::stdout().lock(), &records)?,
    }
    Ok(())
}

/// One test per selected feature; `sigma = None` estimates the variance
/// of each tested column.
fn test_features(
    g: &PipelineGraph,
    x: &DataMatrix,
    sigma: Option<&Covariance>,
    pair: Option<Vec<i32>>,
    label: &str,
) -> Result<Vec<TestRecord>> {
    let observed = run_pipeline(g, x)?;
    let (cluster_a, cluster_b) = match pair {
        Some(p) => (p[0], p[1]),
        None => default_pair(&observed)?,
    };
    let cfg = SweepConfig::default();
    observed
        .features
        .iter()
        .map(|&feature| {
            let est;
            let s = match sigma {
                Some(s) => s,
                None => {
                    est = Covariance::IdentityScaled(estimate_variance(x, feature));
                    &est
                }
            };
            let spec = TestSpec {
                cluster_a,
                cluster_b,
                feature,
            };
            let mut r = test_with_result(g, x, s, &observed, &spec, &cfg)?.record;
            r.pipeline = label.to_string();
            Ok(r)
        })
        .collect()
}

fn experiment(a: ExperimentArgs, power: bool) -> Result<()> {
    let (g, label) = load_graph(&a.config)?;
    let (noise, sigma) = match a.sigma {
        SigmaArg::Identity => (NoiseModel::Identity, SigmaMode::Known),
        SigmaArg::Ar => (NoiseModel::ar_half(), SigmaMode::Known),
        SigmaArg::Estimate => (NoiseModel::Identity, SigmaMode::Estimated),
        SigmaArg::HeldOut | SigmaArg::File => {
            return Err(Error::Config("experiments support --sigma identity, ar or estimate".into()))
        }
    };
    let cfg = ExperimentConfig {
        replicates: a.replicates,
        alpha: a.alpha,
        seed: a.seed,
        jobs: a.jobs,
        sigma,
        features: if a.all_features { FeatureChoice::All } else { FeatureChoice::One },
        label,
        ..Default::default()
    };
    let (points, stem, kind) = if power {
        let deltas = a.values.unwrap_or_else(|| vec![0.4, 0.6, 0.8]);
        (power_experiment(&g, &deltas, &noise, &cfg)?, "power".to_string(), PlotKind::Power)
    } else {
        let ints = |v: &[f64]| -> Result<Vec<usize>> {
            v.iter()
                .map(|&x| {
                    if x >= 2.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(Error::Config(format!("grid values must be integers >= 2, got {x}")))
                    }
                })
                .collect()
        };
        let grid = match (a.grid, a.values) {
            (GridArg::N, None) => Type1Grid::default_n(),
            (GridArg::D, None) => Type1Grid::default_d(),
            (GridArg::N, Some(v)) => Type1Grid::N(ints(&v)?),
            (GridArg::D, Some(v)) => Type1Grid::D(ints(&v)?),
        };
        let stem = format!("type1_{}", if a.grid == GridArg::N { "n" } else { "d" });
        (type1_experiment(&g, &grid, &noise, &cfg)?, stem, PlotKind::Type1)
    };
    write_experiment(&points, kind, a.alpha, &a.out, &stem)
}

fn write_experiment(points: &[ExperimentPoint], kind: PlotKind, alpha: f64, dir: &Path, stem: &str) -> Result<()> {
    let rows: Vec<_> = points.iter().map(|p| p.row.clone()).collect();
    let (csv, svg) = emit_plots(&rows, kind, alpha, dir, stem)?;
    let records: Vec<TestRecord> = points.iter().flat_map(|p| p.records.iter().cloned()).collect();
    let rec_path = dir.join(format!("{stem}_records.csv"));
    write_records_path(&rec_path, &records)?;
    println!("{:>8} {:>8} {:>6} {:>9} {:>7} {:>7} {:>10} {:>7}", rows[0].variable, "tests", "failed", "proposed", "wopp", "naive", "bonferroni", "ks_p");
    for r in &rows {
        println!(
            "{:>8} {:>8} {:>6} {:>9.4} {:>7.4} {:>7.4} {:>10.4} {:>7.3}",
            r.value, r.tests, r.failed, r.proposed, r.wopp, r.naive, r.bonferroni, r.ks_p
        );
    }
    println!("wrote {}, {} and {}", csv.display(), svg.display(), rec_path.display());
    Ok(())
}

fn validate_all(a: ValidateArgs) -> Result<()> {
    if !(a.scale > 0.0) {
        return Err(Error::Config(format!("--scale must be positive, got {}", a.scale)));
    }
    let reports = validate::run_all(a.scale, a.seed);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(Error::Inconsistent(format!("{failed} validation suite(s) failed")));
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let rows = read_table(&a.table)?;
    let stem = a
        .table
        .file_stem()
        .map_or_else(|| "table".to_string(), |s| s.to_string_lossy().into_owned());
    let (csv, svg) = emit_plots(&rows, PlotKind::infer(&rows), a.alpha, &a.out, &stem)?;
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}
