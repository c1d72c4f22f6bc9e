//! The replicated experiment protocol: 70/30 site splits, training-set
//! standardization, per-method cross-validated fits, and test-set error
//! summaries.
//!
//! Each replication draws a fresh dataset (or re-splits a fixed one),
//! standardizes response and covariates with training-set parameters only,
//! selects bandwidths by cross-validation on the training split, fits, and
//! records the test RMSE together with the mean absolute error of the
//! back-transformed linear coefficients against the generating ones.
//! Replications run in parallel on independent seed streams; method
//! failures on unlucky splits are recorded and excluded from the
//! aggregates rather than aborting the experiment.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ols_fit, sar_ml_fit};
use crate::estimator::{fit, predict, SpatialDataset};
use crate::rng::{derive_seed, seeded_rng};
use crate::selection::{cv_select, rmse, SearchSpace};
use crate::simgen::{build_v, simulate_dataset, SimConfig};
use crate::weights::{weight_row, BandwidthConfig, WeightMode, WeightVariant};
use crate::{Error, Result};

/// A method entering the comparison: one of the four semiparametric
/// weight variants or a parametric baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    K1S,
    K1ME,
    K2ME,
    K1M,
    Ols,
    Sar,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::K1S,
        Method::K1ME,
        Method::K2ME,
        Method::K1M,
        Method::Ols,
        Method::Sar,
    ];

    /// The weight variant behind a semiparametric method.
    pub fn variant(self) -> Option<WeightVariant> {
        match self {
            Method::K1S => Some(WeightVariant::K1S),
            Method::K1ME => Some(WeightVariant::K1ME),
            Method::K2ME => Some(WeightVariant::K2ME),
            Method::K1M => Some(WeightVariant::K1M),
            Method::Ols | Method::Sar => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::K1S => "K1S",
            Method::K1ME => "K1ME",
            Method::K2ME => "K2ME",
            Method::K1M => "K1M",
            Method::Ols => "OLS",
            Method::Sar => "SAR",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "K1S" => Ok(Method::K1S),
            "K1ME" => Ok(Method::K1ME),
            "K2ME" => Ok(Method::K2ME),
            "K1M" => Ok(Method::K1M),
            "OLS" => Ok(Method::Ols),
            "SAR" => Ok(Method::Sar),
            other => Err(Error::Invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// Where the data of each replication comes from.
#[derive(Debug, Clone)]
pub enum ExperimentSource {
    /// A fresh simulation per replication (the seed field is re-derived
    /// per replication). Aggregate dispersion then mixes simulation and
    /// split noise.
    Simulate(SimConfig),
    /// One simulation (at the configuration's own seed), re-split per
    /// replication. Aggregate dispersion measures split noise only, the
    /// convention behind the published comparison tables.
    SimulateOnce(SimConfig),
    /// A fixed dataset re-split per replication. The generating
    /// coefficients are unknown, so coefficient errors are not reported.
    Fixed(SpatialDataset),
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ExperimentSource,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub train_frac: f64,
    /// Candidate grids for the semiparametric methods; the variant field
    /// is overridden per method.
    pub search: SearchSpace,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Invalid("no methods requested".into()));
        }
        if self.replications < 1 {
            return Err(Error::Invalid("need at least one replication".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Invalid(format!(
                "train_frac must lie in (0, 1), got {}",
                self.train_frac
            )));
        }
        match &self.source {
            ExperimentSource::Simulate(sim) | ExperimentSource::SimulateOnce(sim) => {
                sim.validate()?
            }
            ExperimentSource::Fixed(_) => {}
        }
        Ok(())
    }
}

/// Column-wise training-set location/scale parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeParams {
    pub y_mean: f64,
    pub y_sd: f64,
    pub x_means: Vec<f64>,
    pub x_sds: Vec<f64>,
}

impl StandardizeParams {
    /// Map coefficients estimated on the standardized scale back to the
    /// original scale: `beta_j * sd_Y / sd_Xj`.
    pub fn beta_to_original_scale(&self, beta_std: &[f64]) -> Vec<f64> {
        beta_std
            .iter()
            .zip(&self.x_sds)
            .map(|(b, sx)| b * self.y_sd / sx)
            .collect()
    }
}

fn column_stats(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Center and scale response and covariates by the training-set mean and
/// standard deviation; the test set is transformed with the same
/// parameters. Neighborhood matrices are rebuilt from the standardized
/// responses.
pub fn standardize(
    train: &SpatialDataset,
    test: &SpatialDataset,
) -> Result<(SpatialDataset, SpatialDataset, StandardizeParams)> {
    if test.p() != train.p() {
        return Err(Error::DimensionMismatch(format!(
            "test has {} covariates, train has {}",
            test.p(),
            train.p()
        )));
    }
    let n = train.n();
    let (y_mean, y_sd) = column_stats(train.y().iter().copied(), n);
    if y_sd <= 0.0 {
        return Err(Error::ZeroVarianceColumn("Y".into()));
    }
    let mut x_means = Vec::with_capacity(train.p());
    let mut x_sds = Vec::with_capacity(train.p());
    for j in 0..train.p() {
        let (m, s) = column_stats(train.x().column(j).iter().copied(), n);
        if s <= 0.0 {
            return Err(Error::ZeroVarianceColumn(format!("X{}", j + 1)));
        }
        x_means.push(m);
        x_sds.push(s);
    }
    let params = StandardizeParams {
        y_mean,
        y_sd,
        x_means,
        x_sds,
    };

    let apply = |d: &SpatialDataset| -> Result<SpatialDataset> {
        let y = d.y().map(|v| (v - params.y_mean) / params.y_sd);
        let x = DMatrix::from_fn(d.n(), d.p(), |i, j| {
            (d.x()[(i, j)] - params.x_means[j]) / params.x_sds[j]
        });
        d.with_values(y, x)
    };
    Ok((apply(train)?, apply(test)?, params))
}

/// Mean absolute componentwise error between coefficient vectors.
pub fn mae_beta(beta_hat: &[f64], beta_true: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated vs {} generating coefficients",
            beta_hat.len(),
            beta_true.len()
        )));
    }
    if beta_hat.is_empty() {
        return Err(Error::Invalid("empty coefficient vectors".into()));
    }
    Ok(beta_hat
        .iter()
        .zip(beta_true)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / beta_hat.len() as f64)
}

/// Deterministic random split of `0..n` into train/test index sets
/// (both sorted ascending).
pub fn split_indices(n: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let n_train = ((train_frac * n as f64).round() as usize).clamp(1, n - 1);
    let mut train: Vec<usize> = idx[..n_train].to_vec();
    let mut test: Vec<usize> = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// One method's scores on one replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub method: Method,
    pub rep: usize,
    pub test_rmse: f64,
    /// Absent for fixed datasets (no generating coefficients).
    pub mae_beta: Option<f64>,
    /// The cross-validated configuration; absent for OLS/SAR.
    pub config: Option<BandwidthConfig>,
}

/// A method failure on one replication (recorded, not fatal).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub method: Method,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub mae_mean: Option<f64>,
    pub mae_sd: Option<f64>,
    /// Number of successful replications entering the aggregates.
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<FailureRecord>,
    pub aggregates: Vec<MethodAggregate>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn aggregate(
    methods: &[Method],
    records: &[ReplicationRecord],
    failures: &[FailureRecord],
) -> Vec<MethodAggregate> {
    methods
        .iter()
        .map(|&method| {
            let rmses: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.test_rmse)
                .collect();
            let maes: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| r.mae_beta)
                .collect();
            let (rmse_mean, rmse_sd) = if rmses.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_sd(&rmses)
            };
            let (mae_mean, mae_sd) = if maes.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_sd(&maes);
                (Some(m), Some(s))
            };
            MethodAggregate {
                method,
                rmse_mean,
                rmse_sd,
                mae_mean,
                mae_sd,
                replications: rmses.len(),
                failures: failures.iter().filter(|f| f.method == method).count(),
            }
        })
        .collect()
}

struct RepData {
    train_std: SpatialDataset,
    test_std: SpatialDataset,
    params: StandardizeParams,
    beta_true: Option<Vec<f64>>,
    v_bandwidth: f64,
}

/// Dataset shared by every replication (fixed-data and simulate-once
/// modes).
struct SharedData {
    full: SpatialDataset,
    beta_true: Option<Vec<f64>>,
    v_bandwidth: f64,
}

fn shared_data(cfg: &ExperimentConfig) -> Result<Option<SharedData>> {
    let base_k = *cfg.search.k_set.first().expect("validated non-empty");
    match &cfg.source {
        ExperimentSource::Simulate(_) => Ok(None),
        ExperimentSource::SimulateOnce(sim) => {
            let d = simulate_dataset(sim)?;
            Ok(Some(SharedData {
                full: SpatialDataset::new(d.sites, d.y, d.x, base_k)?,
                beta_true: Some(d.beta_true.iter().copied().collect()),
                v_bandwidth: sim.v_bandwidth,
            }))
        }
        ExperimentSource::Fixed(data) => Ok(Some(SharedData {
            full: data.with_k(base_k)?,
            beta_true: None,
            v_bandwidth: 0.5,
        })),
    }
}

fn prepare_replication(
    cfg: &ExperimentConfig,
    rep: usize,
    shared: Option<&SharedData>,
) -> Result<RepData> {
    let rep_seed = derive_seed(cfg.master_seed, rep as u64);
    let base_k = *cfg.search.k_set.first().expect("validated non-empty");

    let (full, beta_true, v_bandwidth) = match shared {
        Some(s) => (s.full.clone(), s.beta_true.clone(), s.v_bandwidth),
        None => {
            let ExperimentSource::Simulate(sim) = &cfg.source else {
                unreachable!("shared data covers the other sources");
            };
            let per_rep = SimConfig {
                seed: derive_seed(rep_seed, 1),
                ..*sim
            };
            let d = simulate_dataset(&per_rep)?;
            let beta: Vec<f64> = d.beta_true.iter().copied().collect();
            let full = SpatialDataset::new(d.sites, d.y, d.x, base_k)?;
            (full, Some(beta), per_rep.v_bandwidth)
        }
    };

    let n = full.n();
    let (train_idx, test_idx) = split_indices(n, cfg.train_frac, derive_seed(rep_seed, 2));
    if test_idx.len() <= base_k {
        return Err(Error::Invalid(format!(
            "test split of {} sites is too small for k = {base_k}",
            test_idx.len()
        )));
    }
    let train_raw = full.subset(&train_idx, base_k)?;
    let test_raw = full.subset(&test_idx, base_k)?;
    let (train_std, test_std, params) = standardize(&train_raw, &test_raw)?;
    Ok(RepData {
        train_std,
        test_std,
        params,
        beta_true,
        v_bandwidth,
    })
}

fn run_method(
    method: Method,
    data: &RepData,
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<ReplicationRecord> {
    let cv_seed = derive_seed(derive_seed(cfg.master_seed, rep as u64), 3);
    let test = &data.test_std;
    let test_rows: Vec<Vec<f64>> = (0..test.n())
        .map(|i| test.x().row(i).iter().copied().collect())
        .collect();
    let actual: Vec<f64> = test.y().iter().copied().collect();

    let (preds, beta_std, config) = match method.variant() {
        Some(variant) => {
            let space = cfg.search.with_variant(variant);
            let sel = cv_select(&data.train_std, &space, cv_seed)?;
            let train_k = data.train_std.with_k(sel.best.k)?;
            let res = fit(&train_k, &sel.best)?;
            let mut preds = Vec::with_capacity(test.n());
            for (i, row) in test_rows.iter().enumerate() {
                preds.push(predict(
                    row,
                    test.sites().site(i).coords(),
                    &train_k,
                    &res,
                )?);
            }
            let beta: Vec<f64> = res.beta_hat.iter().copied().collect();
            (preds, beta, Some(sel.best))
        }
        None => match method {
            Method::Ols => {
                let beta = ols_fit(data.train_std.x(), data.train_std.y())?;
                let preds = (0..test.n())
                    .map(|i| {
                        test_rows[i]
                            .iter()
                            .zip(beta.iter())
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect();
                (preds, beta.iter().copied().collect(), None)
            }
            Method::Sar => {
                let train = &data.train_std;
                let v = build_v(train.sites(), data.v_bandwidth)?;
                let sar = sar_ml_fit(train.x(), train.y(), &v)?;
                // Out-of-sample autoregressive term: the geographic weight
                // row from the target to the training sites, scaled by the
                // estimated rho.
                let vcfg = BandwidthConfig::new(
                    WeightVariant::K1S,
                    data.v_bandwidth,
                    1.0,
                    4.min(train.n() - 1),
                );
                let t_dummy = DMatrix::zeros(train.n(), 1);
                let mut preds = Vec::with_capacity(test.n());
                for (i, x_row) in test_rows.iter().enumerate() {
                    let row = weight_row(
                        test.sites().site(i).coords(),
                        &[],
                        train.sites(),
                        &t_dummy,
                        &vcfg,
                        WeightMode::Lenient,
                    )?;
                    let linear: f64 = x_row
                        .iter()
                        .zip(sar.beta_hat.iter())
                        .map(|(a, b)| a * b)
                        .sum();
                    preds.push(linear + sar.rho_hat * row.values.dot(train.y()));
                }
                (preds, sar.beta_hat.iter().copied().collect(), None)
            }
            _ => unreachable!("variant methods handled above"),
        },
    };

    let test_rmse = rmse(&preds, &actual)?;
    let mae = match &data.beta_true {
        Some(beta_true) => {
            let beta_orig = data.params.beta_to_original_scale(&beta_std);
            Some(mae_beta(&beta_orig, beta_true)?)
        }
        None => None,
    };
    Ok(ReplicationRecord {
        method,
        rep,
        test_rmse,
        mae_beta: mae,
        config,
    })
}

/// Run the full replicated experiment. Replications execute in parallel on
/// seed streams derived from the master seed; results are assembled in
/// replication order, so the output is independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let shared = shared_data(cfg)?;
    let per_rep: Vec<(Vec<ReplicationRecord>, Vec<FailureRecord>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<ReplicationRecord>, Vec<FailureRecord>)> {
            let data = match prepare_replication(cfg, rep, shared.as_ref()) {
                Ok(data) => data,
                // Realization-specific data problems (a degenerate column
                // on an unlucky split) fail the replication, not the
                // experiment; anything else is a configuration error.
                Err(e @ (Error::ZeroVarianceColumn(_) | Error::IllConditioned(_))) => {
                    log::warn!("replication {rep} skipped: {e}");
                    let failures = cfg
                        .methods
                        .iter()
                        .map(|&method| FailureRecord {
                            method,
                            rep,
                            message: e.to_string(),
                        })
                        .collect();
                    return Ok((Vec::new(), failures));
                }
                Err(e) => return Err(e),
            };
            let mut records = Vec::new();
            let mut failures = Vec::new();
            for &method in &cfg.methods {
                match run_method(method, &data, cfg, rep) {
                    Ok(rec) => records.push(rec),
                    Err(e) => {
                        log::warn!("{method} failed on replication {rep}: {e}");
                        failures.push(FailureRecord {
                            method,
                            rep,
                            message: e.to_string(),
                        });
                    }
                }
            }
            Ok((records, failures))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (recs, fails) in per_rep {
        records.extend(recs);
        failures.extend(fails);
    }
    let aggregates = aggregate(&cfg.methods, &records, &failures);
    Ok(ExperimentSummary {
        records,
        failures,
        aggregates,
    })
}
