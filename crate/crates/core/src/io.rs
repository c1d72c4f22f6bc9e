//! CSV and JSON ingestion/export.
//!
//! Data files (datasets, predictions) use Rust's shortest round-trip float
//! formatting so that saving and reloading reproduces values bit for bit.
//! Report tables (scores, experiment summaries) use 12-significant-digit
//! scientific notation. All writes go through a write-temp-then-rename so
//! output files appear atomically.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::estimator::{FitResult, SpatialDataset};
use crate::evaluation::ExperimentSummary;
use crate::grid::{GridDesign, SiteSet};
use crate::simgen::{CovariateMeta, Pairing, SimulatedData};
use crate::weights::{BandwidthConfig, WeightMatrix};
use crate::{Error, Result};

/// Write a file atomically: contents land in a temporary sibling first and
/// are renamed into place.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// 12-significant-digit formatting for report tables.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.11e}")
    }
}

/// Column selection for ingesting a dataset from CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadOptions {
    pub response_col: String,
    pub covariate_cols: Vec<String>,
    pub coord_cols: (String, String),
    pub k: usize,
}

/// What happened during ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    /// Rows merged into an earlier row with identical coordinates.
    pub collapsed_duplicates: usize,
    /// Whether coordinates were min-max rescaled into the unit square.
    pub rescaled: bool,
    /// Original coordinate ranges before any rescaling.
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

/// Load a dataset from CSV. Rows sharing exact coordinates are collapsed
/// by averaging all variables; coordinates already inside the unit square
/// are kept as stored, anything else (e.g. lon/lat) is min-max rescaled
/// per axis into `[0,1]^2`.
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<(SpatialDataset, LoadReport)> {
    if opts.covariate_cols.is_empty() {
        return Err(Error::Invalid("no covariate columns requested".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let cx = col(&opts.coord_cols.0)?;
    let cy = col(&opts.coord_cols.1)?;
    let cresp = col(&opts.response_col)?;
    let ccov: Vec<usize> = opts
        .covariate_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;

    let mut raw: Vec<(f64, f64, f64, Vec<f64>)> = Vec::new();
    let mut bad_rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Option<f64> {
            record
                .get(i)
                .and_then(|s| if s.is_empty() { None } else { s.parse().ok() })
                .filter(|v: &f64| v.is_finite())
        };
        let x = parse(cx);
        let y = parse(cy);
        let resp = parse(cresp);
        let covs: Option<Vec<f64>> = ccov.iter().map(|&i| parse(i)).collect();
        match (x, y, resp, covs) {
            (Some(x), Some(y), Some(resp), Some(covs)) => raw.push((x, y, resp, covs)),
            _ => bad_rows.push(row_idx + 1),
        }
    }
    if !bad_rows.is_empty() {
        return Err(Error::MissingValues(bad_rows));
    }
    if raw.len() < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 data rows, got {}",
            raw.len()
        )));
    }
    let rows_read = raw.len();

    // Collapse duplicate coordinates by averaging all variables, keeping
    // first-occurrence order.
    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut groups: std::collections::HashMap<(u64, u64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, (x, y, _, _)) in raw.iter().enumerate() {
        let key = (x.to_bits(), y.to_bits());
        let entry = groups.entry(key).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(i);
    }
    let p = opts.covariate_cols.len();
    let mut coords = Vec::with_capacity(order.len());
    let mut y_vals = Vec::with_capacity(order.len());
    let mut x_vals: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    for key in &order {
        let members = &groups[key];
        let m = members.len() as f64;
        let (x, y, _, _) = raw[members[0]];
        coords.push([x, y]);
        y_vals.push(members.iter().map(|&i| raw[i].2).sum::<f64>() / m);
        x_vals.push(
            (0..p)
                .map(|j| members.iter().map(|&i| raw[i].3[j]).sum::<f64>() / m)
                .collect(),
        );
    }
    let collapsed = rows_read - order.len();
    if collapsed > 0 {
        log::info!("collapsed {collapsed} duplicate-coordinate rows by averaging");
    }

    let min_max = |get: &dyn Fn(&[f64; 2]) -> f64| {
        coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, c| {
            (acc.0.min(get(c)), acc.1.max(get(c)))
        })
    };
    let x_range = min_max(&|c| c[0]);
    let y_range = min_max(&|c| c[1]);
    let inside = x_range.0 >= 0.0 && x_range.1 <= 1.0 && y_range.0 >= 0.0 && y_range.1 <= 1.0;
    if !inside {
        for (range, axis) in [(x_range, "x"), (y_range, "y")] {
            if range.1 <= range.0 {
                return Err(Error::Invalid(format!(
                    "degenerate {axis} coordinate range [{}, {}]",
                    range.0, range.1
                )));
            }
        }
        for c in &mut coords {
            c[0] = (c[0] - x_range.0) / (x_range.1 - x_range.0);
            c[1] = (c[1] - y_range.0) / (y_range.1 - y_range.0);
        }
    }

    let sites = SiteSet::from_coords(&coords, GridDesign::Irregular)?;
    let n = sites.len();
    let y = DVector::from_vec(y_vals);
    let x = DMatrix::from_fn(n, p, |i, j| x_vals[i][j]);
    let dataset = SpatialDataset::new(sites, y, x, opts.k)?;
    Ok((
        dataset,
        LoadReport {
            rows_read,
            collapsed_duplicates: collapsed,
            rescaled: !inside,
            x_range,
            y_range,
        },
    ))
}

/// Site coordinates alone: `site_id,x,y`.
pub fn save_sites_csv(path: &Path, sites: &SiteSet) -> Result<()> {
    let mut out = String::from("site_id,x,y\n");
    for s in sites.sites() {
        out.push_str(&format!("{},{},{}\n", s.index, s.x, s.y));
    }
    atomic_write(path, out.as_bytes())
}

/// Dataset CSV with columns `site_id,x,y,Y,X1..Xp`.
pub fn save_dataset_csv(
    path: &Path,
    sites: &SiteSet,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
) -> Result<()> {
    let mut out = String::from("site_id,x,y,Y");
    for j in 1..=x.ncols() {
        out.push_str(&format!(",X{j}"));
    }
    out.push('\n');
    for (i, s) in sites.sites().iter().enumerate() {
        out.push_str(&format!("{},{},{},{}", s.index, s.x, s.y, y[i]));
        for j in 0..x.ncols() {
            out.push_str(&format!(",{}", x[(i, j)]));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// JSON sidecar of a simulated dataset: the generation record needed to
/// interpret or reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSidecar {
    pub design: GridDesign,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta_sd: f64,
    pub v_bandwidth: f64,
    pub seed: u64,
    pub beta_true: Vec<f64>,
    pub covariates: Vec<CovariateMeta>,
    pub pairings: Vec<Pairing>,
}

pub fn write_sim_sidecar(path: &Path, data: &SimulatedData) -> Result<()> {
    let sidecar = SimSidecar {
        design: data.config.design,
        n: data.config.n,
        p: data.config.p,
        rho: data.config.rho,
        beta_sd: data.config.beta_sd,
        v_bandwidth: data.config.v_bandwidth,
        seed: data.config.seed,
        beta_true: data.beta_true.iter().copied().collect(),
        covariates: data.covariates.clone(),
        pairings: data.pairings.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&sidecar)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_sim_sidecar(path: &Path) -> Result<SimSidecar> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Serialized fit: coefficients, configuration, conditioning, spatial term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResultFile {
    pub beta_hat: Vec<f64>,
    pub cfg: BandwidthConfig,
    pub cond: f64,
    pub r_hat: Vec<f64>,
    pub fallback_row_count: usize,
}

impl From<&FitResult> for FitResultFile {
    fn from(res: &FitResult) -> Self {
        FitResultFile {
            beta_hat: res.beta_hat.iter().copied().collect(),
            cfg: res.cfg,
            cond: res.cond,
            r_hat: res.r_hat.iter().copied().collect(),
            fallback_row_count: res.fallback_rows.len(),
        }
    }
}

impl FitResultFile {
    /// Rebuild an in-memory fit from the serialized form. The identities
    /// of the fallback rows are not stored, only their count.
    pub fn into_fit_result(self) -> FitResult {
        FitResult {
            beta_hat: DVector::from_vec(self.beta_hat),
            r_hat: DVector::from_vec(self.r_hat),
            cfg: self.cfg,
            cond: self.cond,
            fallback_rows: Vec::new(),
        }
    }
}

pub fn write_fit_result(path: &Path, res: &FitResult) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(&FitResultFile::from(res))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_fit_result(path: &Path) -> Result<FitResultFile> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Cross-validation score table: `variant,h1,h2,k,cv_rmse`.
pub fn write_score_table(path: &Path, table: &[(BandwidthConfig, f64)]) -> Result<()> {
    let mut out = String::from("variant,h1,h2,k,cv_rmse\n");
    for (cfg, score) in table {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            cfg.variant,
            cfg.h1,
            cfg.h2,
            cfg.k,
            fmt_sig(*score)
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Weight matrix dump for debugging: `row,col,weight` for nonzero entries.
pub fn write_weight_matrix(path: &Path, w: &WeightMatrix) -> Result<()> {
    let mut out = String::from("row,col,weight\n");
    for i in 0..w.n() {
        for j in 0..w.n() {
            let v = w.values()[(i, j)];
            if v != 0.0 {
                out.push_str(&format!("{i},{j},{}\n", fmt_sig(v)));
            }
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Predictions at new sites: `x,y,prediction`.
pub fn write_predictions_csv(path: &Path, targets: &[[f64; 2]], preds: &[f64]) -> Result<()> {
    let mut out = String::from("x,y,prediction\n");
    for (t, p) in targets.iter().zip(preds) {
        out.push_str(&format!("{},{},{}\n", t[0], t[1], p));
    }
    atomic_write(path, out.as_bytes())
}

/// Covariates and coordinates of prediction targets from CSV.
pub fn read_prediction_sites(
    path: &Path,
    covariate_cols: &[String],
    coord_cols: &(String, String),
) -> Result<(Vec<[f64; 2]>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let cx = col(&coord_cols.0)?;
    let cy = col(&coord_cols.1)?;
    let ccov: Vec<usize> = covariate_cols.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut targets = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut bad_rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Option<f64> {
            record
                .get(i)
                .and_then(|s| if s.is_empty() { None } else { s.parse().ok() })
                .filter(|v: &f64| v.is_finite())
        };
        match (
            parse(cx),
            parse(cy),
            ccov.iter().map(|&i| parse(i)).collect::<Option<Vec<f64>>>(),
        ) {
            (Some(x), Some(y), Some(covs)) => {
                targets.push([x, y]);
                rows.push(covs);
            }
            _ => bad_rows.push(row_idx + 1),
        }
    }
    if !bad_rows.is_empty() {
        return Err(Error::MissingValues(bad_rows));
    }
    if targets.is_empty() {
        return Err(Error::Invalid("no prediction rows".into()));
    }
    let p = covariate_cols.len();
    let x = DMatrix::from_fn(targets.len(), p, |i, j| rows[i][j]);
    Ok((targets, x))
}

fn config_fields(cfg: &Option<BandwidthConfig>) -> (String, String, String) {
    match cfg {
        Some(c) => (c.h1.to_string(), c.h2.to_string(), c.k.to_string()),
        None => (String::new(), String::new(), String::new()),
    }
}

/// Per-replication results: `method,rep,rmse,mae_beta,h1,h2,k`.
pub fn write_replications_csv(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut out = String::from("method,rep,rmse,mae_beta,h1,h2,k\n");
    for r in &summary.records {
        let (h1, h2, k) = config_fields(&r.config);
        let mae = r.mae_beta.map(fmt_sig).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{mae},{h1},{h2},{k}\n",
            r.method,
            r.rep,
            fmt_sig(r.test_rmse)
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Scenario labels attached to aggregate rows.
#[derive(Debug, Clone, Default)]
pub struct ScenarioLabels {
    pub rho: Option<f64>,
    pub design: Option<GridDesign>,
    pub n: usize,
}

/// Aggregate table matching the comparison-table layout:
/// `rho,design,n,method,mae_mean,mae_sd,rmse_mean,rmse_sd`.
pub fn write_aggregate_csv(
    path: &Path,
    summary: &ExperimentSummary,
    labels: &ScenarioLabels,
) -> Result<()> {
    let mut out = String::from("rho,design,n,method,mae_mean,mae_sd,rmse_mean,rmse_sd\n");
    let rho = labels.rho.map(|r| r.to_string()).unwrap_or_default();
    let design = labels.design.map(|d| d.to_string()).unwrap_or_default();
    for a in &summary.aggregates {
        out.push_str(&format!(
            "{rho},{design},{},{},{},{},{},{}\n",
            labels.n,
            a.method,
            a.mae_mean.map(fmt_sig).unwrap_or_default(),
            a.mae_sd.map(fmt_sig).unwrap_or_default(),
            fmt_sig(a.rmse_mean),
            fmt_sig(a.rmse_sd),
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Long-format per-replication values for external plotting:
/// `metric,method,rep,value`.
pub fn write_long_csv(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut out = String::from("metric,method,rep,value\n");
    for r in &summary.records {
        out.push_str(&format!(
            "rmse,{},{},{}\n",
            r.method,
            r.rep,
            fmt_sig(r.test_rmse)
        ));
    }
    for r in &summary.records {
        if let Some(mae) = r.mae_beta {
            out.push_str(&format!("mae_beta,{},{},{}\n", r.method, r.rep, fmt_sig(mae)));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Method failures: `method,rep,message`.
pub fn write_failures_csv(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut out = String::from("method,rep,message\n");
    for f in &summary.failures {
        let msg = f.message.replace(',', ";").replace('\n', " ");
        out.push_str(&format!("{},{},{msg}\n", f.method, f.rep));
    }
    atomic_write(path, out.as_bytes())
}

/// All experiment artifacts under one directory.
pub fn write_experiment_outputs(
    dir: &Path,
    summary: &ExperimentSummary,
    labels: &ScenarioLabels,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_replications_csv(&dir.join("replications.csv"), summary)?;
    write_aggregate_csv(&dir.join("aggregate.csv"), summary, labels)?;
    write_long_csv(&dir.join("long.csv"), summary)?;
    if !summary.failures.is_empty() {
        write_failures_csv(&dir.join("failures.csv"), summary)?;
    }
    Ok(())
}
