//! The semiparametric fit: kernel smoothing of the neighborhood-conditional
//! expectations, least squares on the partial residuals, and the
//! nonparametric spatial term.
//!
//! Given a row-stochastic weight matrix W, the fit proceeds as
//!
//! 1. `Ytilde = Y - W Y`, `Xtilde = X - W X` (partial residuals),
//! 2. `beta_hat = argmin ||Ytilde - Xtilde b||` via SVD,
//! 3. `r_hat = W (Y - X beta_hat)`.
//!
//! Out-of-sample prediction at a target point evaluates
//! `x0' beta_hat + w_row (Y - X beta_hat)` where `w_row` is the prediction
//! weight row built from the target's neighborhood vector.
//!
//! No implicit intercept is added: a constant covariate column is
//! annihilated by the (row-stochastic) centering step and rejected by the
//! conditioning check. Constants are absorbed by the spatial term instead.

use nalgebra::{DMatrix, DVector};

use crate::grid::{knn, knn_for_target, NeighborIndex, SiteSet};
use crate::weights::{weight_matrix, weight_row, BandwidthConfig, WeightMatrix, WeightMode};
use crate::{Error, Result, MAX_CONDITION};

/// Per-site observations: response, covariates, and the neighborhood
/// matrix T whose row i holds the responses at the k nearest neighbors of
/// site i (built on construction).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    sites: SiteSet,
    y: DVector<f64>,
    x: DMatrix<f64>,
    k: usize,
    t: DMatrix<f64>,
    nn: NeighborIndex,
}

fn build_t(y: &DVector<f64>, nn: &NeighborIndex) -> DMatrix<f64> {
    DMatrix::from_fn(nn.len(), nn.k(), |i, j| y[nn.row(i)[j]])
}

impl SpatialDataset {
    pub fn new(sites: SiteSet, y: DVector<f64>, x: DMatrix<f64>, k: usize) -> Result<Self> {
        let n = sites.len();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} sites",
                y.len(),
                n
            )));
        }
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows for {} sites",
                x.nrows(),
                n
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Invalid("need at least one covariate".into()));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite value in dataset".into()));
        }
        let nn = knn(&sites, k)?;
        let t = build_t(&y, &nn);
        Ok(SpatialDataset {
            sites,
            y,
            x,
            k,
            t,
            nn,
        })
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn neighbor_index(&self) -> &NeighborIndex {
        &self.nn
    }

    /// Rebuild with a different neighborhood size.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == self.k {
            return Ok(self.clone());
        }
        SpatialDataset::new(self.sites.clone(), self.y.clone(), self.x.clone(), k)
    }

    /// Same sites and k, new response/covariate values; the neighborhood
    /// matrix is rebuilt from the new responses.
    pub fn with_values(&self, y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.len() != self.n() || x.nrows() != self.n() || x.ncols() != self.p() {
            return Err(Error::DimensionMismatch(
                "replacement values do not match dataset dimensions".into(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite value in dataset".into()));
        }
        let t = build_t(&y, &self.nn);
        Ok(SpatialDataset {
            sites: self.sites.clone(),
            y,
            x,
            k: self.k,
            t,
            nn: self.nn.clone(),
        })
    }

    /// Restrict to the sites at `indices` (strictly ascending) and rebuild
    /// the neighbor structure among them.
    pub fn subset(&self, indices: &[usize], k: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "subset indices must be strictly ascending".into(),
            ));
        }
        let sites = self.sites.subset(indices)?;
        let y = DVector::from_fn(indices.len(), |i, _| self.y[indices[i]]);
        let x = DMatrix::from_fn(indices.len(), self.p(), |i, j| self.x[(indices[i], j)]);
        SpatialDataset::new(sites, y, x, k)
    }

    /// The neighborhood vector of an arbitrary target point: the responses
    /// at its k nearest sites, excluding any site that coincides with the
    /// target.
    pub fn neighborhood_vector(&self, target: [f64; 2], k: usize) -> Result<Vec<f64>> {
        let idx = knn_for_target(&self.sites, target, k)?;
        Ok(idx.into_iter().map(|j| self.y[j]).collect())
    }
}

/// Result of one semiparametric fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    /// Fitted spatial term at each observed site.
    pub r_hat: DVector<f64>,
    pub cfg: BandwidthConfig,
    /// Condition estimate of the normal-equations matrix.
    pub cond: f64,
    pub fallback_rows: Vec<usize>,
}

impl FitResult {
    /// In-sample fitted values `x_i' beta_hat + r_hat_i`.
    pub fn fitted(&self, data: &SpatialDataset) -> DVector<f64> {
        data.x() * &self.beta_hat + &self.r_hat
    }
}

/// Remove the smoothed conditional expectations:
/// `Ytilde = Y - W Y`, `Xtilde = X - W X`.
pub fn partial_residuals(
    data: &SpatialDataset,
    w: &WeightMatrix,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if w.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix is {}x{} for {} sites",
            w.n(),
            w.n(),
            data.n()
        )));
    }
    let ytilde = data.y() - w.smooth_vector(data.y());
    let xtilde = data.x() - w.smooth_matrix(data.x());
    Ok((ytilde, xtilde))
}

/// Least squares through the singular value decomposition; returns the
/// coefficient vector and the condition estimate of the normal-equations
/// matrix. Rejects systems with condition at or above [`MAX_CONDITION`].
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (n, p) = (x.nrows(), x.ncols());
    if n <= p {
        return Err(Error::Invalid(format!(
            "need more observations than covariates: n = {n}, p = {p}"
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} rows",
            y.len(),
            n
        )));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond >= MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let beta = svd
        .solve(y, 0.0)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    Ok((beta, cond))
}

/// Linear coefficients from the partial residuals.
pub fn fit_beta(xtilde: &DMatrix<f64>, ytilde: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    least_squares(xtilde, ytilde)
}

/// The spatial term: `r_hat = W (Y - X beta_hat)`.
pub fn fit_r(
    w: &WeightMatrix,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    beta_hat: &DVector<f64>,
) -> DVector<f64> {
    w.smooth_vector(&(y - x * beta_hat))
}

/// The full pipeline: weights, partial residuals, linear coefficients,
/// spatial term. The configuration's k must match the dataset's k.
pub fn fit(data: &SpatialDataset, cfg: &BandwidthConfig) -> Result<FitResult> {
    fit_with_mode(data, cfg, WeightMode::Lenient)
}

pub fn fit_with_mode(
    data: &SpatialDataset,
    cfg: &BandwidthConfig,
    mode: WeightMode,
) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.k != data.k() {
        return Err(Error::Invalid(format!(
            "configuration k = {} does not match dataset k = {}; rebuild the dataset with `with_k`",
            cfg.k,
            data.k()
        )));
    }
    let w = weight_matrix(data.sites(), data.t(), cfg, mode)?;
    let (ytilde, xtilde) = partial_residuals(data, &w)?;
    // A covariate column annihilated by the centering step (e.g. a
    // constant) leaves only rounding noise behind; the relative condition
    // number cannot see that, so check column scales against the originals.
    for j in 0..xtilde.ncols() {
        let original = data.x().column(j).amax();
        if xtilde.column(j).amax() <= 1e-12 * original.max(1.0) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
    }
    let (beta_hat, cond) = fit_beta(&xtilde, &ytilde)?;
    let r_hat = fit_r(&w, data.y(), data.x(), &beta_hat);
    Ok(FitResult {
        beta_hat,
        r_hat,
        cfg: *cfg,
        cond,
        fallback_rows: w.fallback_rows().to_vec(),
    })
}

/// Predict the response at a target point with covariates `x0`. The
/// target's neighborhood vector is built from the k nearest observed
/// responses (coincident sites excluded, so prediction at an observed site
/// is leave-one-out in flavor).
pub fn predict(
    x0: &[f64],
    target: [f64; 2],
    data: &SpatialDataset,
    fitres: &FitResult,
) -> Result<f64> {
    predict_with_mode(x0, target, data, fitres, WeightMode::Lenient)
}

pub fn predict_with_mode(
    x0: &[f64],
    target: [f64; 2],
    data: &SpatialDataset,
    fitres: &FitResult,
    mode: WeightMode,
) -> Result<f64> {
    if x0.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariates for a model with p = {}",
            x0.len(),
            data.p()
        )));
    }
    if fitres.cfg.k != data.k() {
        return Err(Error::Invalid(format!(
            "fit k = {} does not match dataset k = {}",
            fitres.cfg.k,
            data.k()
        )));
    }
    let t0 = data.neighborhood_vector(target, fitres.cfg.k)?;
    let row = weight_row(target, &t0, data.sites(), data.t(), &fitres.cfg, mode)?;
    let resid = data.y() - data.x() * &fitres.beta_hat;
    let linear: f64 = x0
        .iter()
        .zip(fitres.beta_hat.iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(linear + row.values.dot(&resid))
}
