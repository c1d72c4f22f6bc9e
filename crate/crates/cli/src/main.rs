//! Command-line surface for the semiparametric spatial autoregressive
//! predictor: dataset simulation, fitting, prediction, and the replicated
//! train/test experiment protocol.
//!
//! Exit codes: 0 on success, 1 for validation problems (bad flags, bad
//! config, malformed data), 2 for numerical failures (ill-conditioning,
//! failed factorization, no feasible configuration).

mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};

use semisar::estimator::{fit_with_mode, predict_with_mode, SpatialDataset};
use semisar::evaluation::{run_experiment, ExperimentConfig, ExperimentSource, Method};
use semisar::grid::GridDesign;
use semisar::io::{
    load_dataset, read_fit_result, read_prediction_sites, save_dataset_csv, write_fit_result,
    write_experiment_outputs, write_predictions_csv, write_score_table, write_sim_sidecar,
    write_weight_matrix, LoadOptions, ScenarioLabels,
};
use semisar::kernels::KernelKind;
use semisar::selection::{cv_select_with_mode, CvMode, SearchSpace};
use semisar::simgen::{simulate_dataset, SimConfig};
use semisar::weights::{weight_matrix, BandwidthConfig, WeightMode, WeightVariant};

#[derive(Parser)]
#[command(
    name = "semisar",
    version,
    about = "Semiparametric spatial autoregressive prediction"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase diagnostic verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset; writes a CSV and a JSON sidecar.
    Simulate(SimulateArgs),
    /// Fit the model to a dataset, optionally selecting bandwidths by
    /// cross-validation.
    Fit(FitArgs),
    /// Predict responses at new sites from a saved fit.
    Predict(PredictArgs),
    /// Run a replicated 70/30 experiment over several methods.
    Evaluate(EvaluateArgs),
    /// Re-run published experiment cells.
    #[command(subcommand)]
    Reproduce(ReproduceCommand),
}

#[derive(Args, Clone)]
struct ColumnArgs {
    /// Response column name (default `Y`).
    #[arg(long)]
    response_col: Option<String>,
    /// Covariate column names (comma separated); default: all columns
    /// named X1, X2, ... in numeric order.
    #[arg(long, value_delimiter = ',')]
    covariate_cols: Option<Vec<String>>,
    /// Coordinate column names (defaults `x` and `y`).
    #[arg(long)]
    coord_x: Option<String>,
    #[arg(long)]
    coord_y: Option<String>,
}

impl ColumnArgs {
    fn response(&self) -> String {
        self.response_col.clone().unwrap_or_else(|| "Y".into())
    }

    fn coords(&self) -> (String, String) {
        (
            self.coord_x.clone().unwrap_or_else(|| "x".into()),
            self.coord_y.clone().unwrap_or_else(|| "y".into()),
        )
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    design: GridDesignArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 10.0)]
    beta_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    v_bandwidth: f64,
    /// Output dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Sidecar JSON path (default: output path with .json extension).
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    /// Weight variant.
    #[arg(long, default_value = "K2ME")]
    variant: String,
    /// Kernel for both distance factors.
    #[arg(long, default_value = "truncated_linear")]
    kernel: String,
    /// Geographic bandwidth (fixed fit).
    #[arg(long, required_unless_present = "cv")]
    h1: Option<f64>,
    /// Similarity bandwidth (fixed fit).
    #[arg(long, required_unless_present = "cv")]
    h2: Option<f64>,
    /// Neighborhood size (fixed fit).
    #[arg(long, required_unless_present = "cv")]
    k: Option<usize>,
    /// Select (h1, h2, k) by cross-validation instead.
    #[arg(long)]
    cv: bool,
    /// Candidate sets for cross-validation (comma separated).
    #[arg(long, value_delimiter = ',')]
    h1_set: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    h2_set: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    k_set: Option<Vec<usize>>,
    /// Fold count for cross-validation.
    #[arg(long, conflicts_with = "loo")]
    folds: Option<usize>,
    /// Leave-one-out scoring instead of folds.
    #[arg(long)]
    loo: bool,
    /// Seed for the cross-validation fold assignment.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Error on degenerate weight rows instead of the uniform fallback.
    #[arg(long)]
    strict_weights: bool,
    /// Also write the weight matrix (row,col,weight CSV).
    #[arg(long)]
    dump_weights: Option<PathBuf>,
    /// Also write the cross-validation score table.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Output fit JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Training dataset the fit was produced from.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    /// Saved fit JSON.
    #[arg(long)]
    fit: PathBuf,
    /// CSV of prediction sites (coordinates + covariates).
    #[arg(long)]
    sites: PathBuf,
    /// Error on degenerate weight rows instead of the uniform fallback.
    #[arg(long)]
    strict_weights: bool,
    /// Output predictions CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fixed dataset CSV (instead of simulation).
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    columns: ColumnArgs,
    #[arg(long)]
    design: Option<GridDesignArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    beta_sd: Option<f64>,
    #[arg(long)]
    v_bandwidth: Option<f64>,
    /// Simulation protocol: `fresh` draws a new dataset per replication,
    /// `fixed` simulates once and re-splits it.
    #[arg(long, default_value = "fresh")]
    sim_mode: SimModeArg,
    /// Methods to compare (comma separated), default all six.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    h1_set: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    h2_set: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    k_set: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "loo")]
    folds: Option<usize>,
    #[arg(long)]
    loo: bool,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the result CSVs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum ReproduceCommand {
    /// One cell of the coefficient-error comparison table.
    Table1(Table1Args),
}

#[derive(Args)]
struct Table1Args {
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    design: GridDesignArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    reps: usize,
    /// Methods (comma separated), default all six.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simulation protocol; the published tables re-split one dataset.
    #[arg(long, default_value = "fixed")]
    sim_mode: SimModeArg,
    /// Directory for the result CSVs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy)]
struct GridDesignArg(GridDesign);

impl FromStr for GridDesignArg {
    type Err = semisar::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GridDesign::from_str(s).map(GridDesignArg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SimModeArg {
    Fresh,
    Fixed,
}

impl FromStr for SimModeArg {
    type Err = semisar::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fresh" => Ok(SimModeArg::Fresh),
            "fixed" => Ok(SimModeArg::Fixed),
            other => Err(semisar::Error::Invalid(format!(
                "unknown sim-mode `{other}` (expected `fresh` or `fixed`)"
            ))),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::from_default_env()
        .filter_level(level)
        .init();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("could not configure thread pool: {e}");
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<semisar::Error>()
                .map(semisar::Error::exit_code)
                .unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit_command(args),
        Command::Predict(args) => predict_command(args),
        Command::Evaluate(args) => evaluate_command(args),
        Command::Reproduce(ReproduceCommand::Table1(args)) => table1_command(args),
    }
}

fn mode(strict: bool) -> WeightMode {
    if strict {
        WeightMode::Strict
    } else {
        WeightMode::Lenient
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let cfg = SimConfig {
        design: args.design.0,
        n: args.n,
        p: args.p,
        rho: args.rho,
        beta_sd: args.beta_sd,
        v_bandwidth: args.v_bandwidth,
        seed: args.seed,
    };
    let data = simulate_dataset(&cfg)?;
    save_dataset_csv(&args.out, &data.sites, &data.y, &data.x)?;
    let sidecar = args
        .sidecar
        .unwrap_or_else(|| args.out.with_extension("json"));
    write_sim_sidecar(&sidecar, &data)?;
    println!(
        "wrote {} sites to {} (sidecar {})",
        data.sites.len(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

/// Covariate columns from flags, or every `X<digits>` header in numeric
/// order.
fn resolve_covariates(path: &std::path::Path, cols: &ColumnArgs) -> anyhow::Result<Vec<String>> {
    if let Some(c) = &cols.covariate_cols {
        return Ok(c.clone());
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = text
        .lines()
        .next()
        .with_context(|| format!("{} is empty", path.display()))?;
    let mut numbered: Vec<(u32, String)> = header
        .split(',')
        .map(str::trim)
        .filter_map(|name| {
            name.strip_prefix('X')
                .and_then(|s| s.parse::<u32>().ok())
                .map(|i| (i, name.to_string()))
        })
        .collect();
    numbered.sort();
    if numbered.is_empty() {
        bail!(
            "no covariate columns named X1, X2, ... found in {}; pass --covariate-cols",
            path.display()
        );
    }
    Ok(numbered.into_iter().map(|(_, name)| name).collect())
}

fn load_with(path: &std::path::Path, cols: &ColumnArgs, k: usize) -> anyhow::Result<SpatialDataset> {
    let covariate_cols = resolve_covariates(path, cols)?;
    let opts = LoadOptions {
        response_col: cols.response(),
        covariate_cols,
        coord_cols: cols.coords(),
        k,
    };
    let (data, report) = load_dataset(path, &opts)?;
    if report.collapsed_duplicates > 0 {
        log::info!(
            "collapsed {} duplicate-coordinate rows",
            report.collapsed_duplicates
        );
    }
    if report.rescaled {
        log::info!(
            "rescaled coordinates from x in [{}, {}], y in [{}, {}] to the unit square",
            report.x_range.0,
            report.x_range.1,
            report.y_range.0,
            report.y_range.1
        );
    }
    Ok(data)
}

fn parse_kernel(s: &str) -> anyhow::Result<KernelKind> {
    Ok(KernelKind::from_str(s)?)
}

fn fit_command(args: FitArgs) -> anyhow::Result<()> {
    let variant = WeightVariant::from_str(&args.variant)?;
    let kernel = parse_kernel(&args.kernel)?;
    let wmode = mode(args.strict_weights);

    let (data, res, scores) = if args.cv {
        let defaults = SearchSpace::default_for(variant);
        let folds = if args.loo {
            CvMode::Loo
        } else {
            CvMode::KFold(args.folds.unwrap_or(5))
        };
        let mut space = SearchSpace::new(
            args.h1_set.as_deref().unwrap_or(&defaults.h1_set),
            args.h2_set.as_deref().unwrap_or(&defaults.h2_set),
            args.k_set.as_deref().unwrap_or(&defaults.k_set),
            variant,
            folds,
        )?;
        space.kernel = kernel;
        let data = load_with(&args.data, &args.columns, space.k_set[0])?;
        let sel = cv_select_with_mode(&data, &space, args.seed, wmode)?;
        let data_k = data.with_k(sel.best.k)?;
        let res = fit_with_mode(&data_k, &sel.best, wmode)?;
        println!(
            "selected variant={} h1={} h2={} k={} (cv_rmse over {} candidates, {} tied)",
            sel.best.variant,
            sel.best.h1,
            sel.best.h2,
            sel.best.k,
            sel.score_table.len(),
            sel.ties
        );
        (data_k, res, Some(sel.score_table))
    } else {
        let cfg = BandwidthConfig {
            variant,
            h1: args.h1.expect("required unless --cv"),
            h2: args.h2.expect("required unless --cv"),
            k: args.k.expect("required unless --cv"),
            kernel,
        };
        let data = load_with(&args.data, &args.columns, cfg.k)?;
        let res = fit_with_mode(&data, &cfg, wmode)?;
        (data, res, None)
    };

    if let Some(path) = &args.scores {
        match &scores {
            Some(table) => write_score_table(path, table)?,
            None => bail!("--scores requires --cv"),
        }
    }
    if let Some(path) = &args.dump_weights {
        let w = weight_matrix(data.sites(), data.t(), &res.cfg, wmode)?;
        write_weight_matrix(path, &w)?;
    }
    write_fit_result(&args.out, &res)?;
    println!(
        "fit written to {} (n={}, p={}, cond={:.3e}, fallback rows={})",
        args.out.display(),
        data.n(),
        data.p(),
        res.cond,
        res.fallback_rows.len()
    );
    Ok(())
}

fn predict_command(args: PredictArgs) -> anyhow::Result<()> {
    let file = read_fit_result(&args.fit)?;
    let data = load_with(&args.data, &args.columns, file.cfg.k)?;
    if file.beta_hat.len() != data.p() {
        bail!(
            "fit has {} coefficients but data has {} covariates",
            file.beta_hat.len(),
            data.p()
        );
    }
    if file.r_hat.len() != data.n() {
        bail!(
            "fit has {} spatial-term values but data has {} sites",
            file.r_hat.len(),
            data.n()
        );
    }
    let covariate_cols = resolve_covariates(&args.data, &args.columns)?;
    let (targets, x_new) = read_prediction_sites(
        &args.sites,
        &covariate_cols,
        &args.columns.coords(),
    )?;
    let res = file.into_fit_result();
    let wmode = mode(args.strict_weights);
    let mut preds = Vec::with_capacity(targets.len());
    for (i, target) in targets.iter().enumerate() {
        let row: Vec<f64> = x_new.row(i).iter().copied().collect();
        preds.push(predict_with_mode(&row, *target, &data, &res, wmode)?);
    }
    write_predictions_csv(&args.out, &targets, &preds)?;
    println!("{} predictions written to {}", preds.len(), args.out.display());
    Ok(())
}

fn parse_methods(names: &[String]) -> anyhow::Result<Vec<Method>> {
    let mut methods = Vec::with_capacity(names.len());
    for name in names {
        methods.push(Method::from_str(name)?);
    }
    Ok(methods)
}

fn print_summary(summary: &semisar::evaluation::ExperimentSummary) {
    println!("method  reps  rmse_mean (sd)      mae_beta_mean (sd)");
    for a in &summary.aggregates {
        let mae = match (a.mae_mean, a.mae_sd) {
            (Some(m), Some(s)) => format!("{m:.4} ({s:.4})"),
            _ => "-".into(),
        };
        println!(
            "{:<6}  {:>4}  {:.4} ({:.4})     {}",
            a.method.to_string(),
            a.replications,
            a.rmse_mean,
            a.rmse_sd,
            mae
        );
    }
    if !summary.failures.is_empty() {
        println!("({} method failures excluded)", summary.failures.len());
    }
}

fn evaluate_command(args: EvaluateArgs) -> anyhow::Result<()> {
    let file_cfg = match &args.config {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };

    let methods = match (&args.methods, &file_cfg.experiment.methods) {
        (Some(flags), _) => parse_methods(flags)?,
        (None, Some(file)) => parse_methods(file)?,
        (None, None) => Method::ALL.to_vec(),
    };
    let replications = args
        .reps
        .or(file_cfg.experiment.replications)
        .unwrap_or(50);
    let train_frac = args
        .train_frac
        .or(file_cfg.experiment.train_frac)
        .unwrap_or(0.7);
    let master_seed = args.seed.or(file_cfg.experiment.master_seed).unwrap_or(1);

    let defaults = SearchSpace::default_for(WeightVariant::K2ME);
    let folds = if args.loo {
        CvMode::Loo
    } else if let Some(v) = args.folds {
        CvMode::KFold(v)
    } else {
        file_cfg.search.cv_mode()?.unwrap_or_default()
    };
    let mut search = SearchSpace::new(
        args.h1_set
            .as_deref()
            .or(file_cfg.search.h1_set.as_deref())
            .unwrap_or(&defaults.h1_set),
        args.h2_set
            .as_deref()
            .or(file_cfg.search.h2_set.as_deref())
            .unwrap_or(&defaults.h2_set),
        args.k_set
            .as_deref()
            .or(file_cfg.search.k_set.as_deref())
            .unwrap_or(&defaults.k_set),
        WeightVariant::K2ME,
        folds,
    )?;
    if let Some(kernel) = args.kernel.as_deref().or(file_cfg.search.kernel.as_deref()) {
        search.kernel = parse_kernel(kernel)?;
    }

    let data_path = args
        .data
        .clone()
        .or_else(|| file_cfg.data.as_ref().map(|d| d.path.clone()));
    let (source, labels) = match data_path {
        Some(path) => {
            // Flags take precedence over the config file's [data] section.
            let mut columns = args.columns.clone();
            if let Some(d) = &file_cfg.data {
                columns.covariate_cols = columns.covariate_cols.or(d.covariate_cols.clone());
                columns.response_col = columns.response_col.or(d.response_col.clone());
                columns.coord_x = columns.coord_x.or(d.coord_x.clone());
                columns.coord_y = columns.coord_y.or(d.coord_y.clone());
            }
            let data = load_with(&path, &columns, search.k_set[0])?;
            let labels = ScenarioLabels {
                rho: None,
                design: None,
                n: data.n(),
            };
            (ExperimentSource::Fixed(data), labels)
        }
        None => {
            let design = args
                .design
                .map(|d| d.0)
                .or_else(|| {
                    file_cfg
                        .sim
                        .design
                        .as_deref()
                        .and_then(|s| GridDesign::from_str(s).ok())
                })
                .context("simulation requires --design (or a [sim] config section)")?;
            let n = args
                .n
                .or(file_cfg.sim.n)
                .context("simulation requires --n")?;
            let rho = args
                .rho
                .or(file_cfg.sim.rho)
                .context("simulation requires --rho")?;
            let sim = SimConfig {
                design,
                n,
                rho,
                p: args.p.or(file_cfg.sim.p).unwrap_or(8),
                beta_sd: args.beta_sd.or(file_cfg.sim.beta_sd).unwrap_or(10.0),
                v_bandwidth: args
                    .v_bandwidth
                    .or(file_cfg.sim.v_bandwidth)
                    .unwrap_or(0.5),
                seed: master_seed,
            };
            let labels = ScenarioLabels {
                rho: Some(rho),
                design: Some(design),
                n,
            };
            let source = match args.sim_mode {
                SimModeArg::Fresh => ExperimentSource::Simulate(sim),
                SimModeArg::Fixed => ExperimentSource::SimulateOnce(sim),
            };
            (source, labels)
        }
    };

    let cfg = ExperimentConfig {
        source,
        methods,
        replications,
        train_frac,
        search,
        master_seed,
    };
    let summary = run_experiment(&cfg)?;
    write_experiment_outputs(&args.out_dir, &summary, &labels)?;
    print_summary(&summary);
    println!("results written to {}", args.out_dir.display());
    Ok(())
}

fn table1_command(args: Table1Args) -> anyhow::Result<()> {
    let methods = match &args.method {
        Some(names) => parse_methods(names)?,
        None => Method::ALL.to_vec(),
    };
    let sim = SimConfig::standard(args.design.0, args.n, args.rho, args.seed);
    let source = match args.sim_mode {
        SimModeArg::Fresh => ExperimentSource::Simulate(sim),
        SimModeArg::Fixed => ExperimentSource::SimulateOnce(sim),
    };
    let cfg = ExperimentConfig {
        source,
        methods,
        replications: args.reps,
        train_frac: 0.7,
        search: SearchSpace::default_for(WeightVariant::K2ME),
        master_seed: args.seed,
    };
    let summary = run_experiment(&cfg)?;
    let labels = ScenarioLabels {
        rho: Some(args.rho),
        design: Some(args.design.0),
        n: args.n,
    };
    write_experiment_outputs(&args.out_dir, &summary, &labels)?;
    println!(
        "rho={} design={} n={} reps={}",
        args.rho, args.design.0, args.n, args.reps
    );
    print_summary(&summary);
    println!("results written to {}", args.out_dir.display());
    Ok(())
}
