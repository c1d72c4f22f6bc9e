//! Reference estimators for the comparison tables: ordinary least squares
//! and a maximum-likelihood spatial autoregressive fit.
//!
//! The SAR fit maximizes the Gaussian concentrated log-likelihood of
//! `Y = rho V Y + X beta + eps` over rho: for each candidate rho the
//! coefficients are the least squares fit of `(I - rho V) Y` on X, the
//! noise variance comes from the residuals, and the Jacobian term
//! `log|I - rho V|` is evaluated through the eigenvalues of V, computed
//! once per dataset. A coarse grid over (-0.99, 0.99) is refined by
//! golden-section search.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::estimator::least_squares;
use crate::weights::WeightMatrix;
use crate::{Error, Result};

/// Maximum-likelihood SAR fit.
#[derive(Debug, Clone)]
pub struct SarFit {
    pub rho_hat: f64,
    pub beta_hat: DVector<f64>,
    pub sigma2_hat: f64,
    pub loglik: f64,
    /// Set when the maximizer landed on the edge of the searched interval.
    pub boundary: bool,
}

/// Ordinary least squares coefficients.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    least_squares(x, y).map(|(beta, _)| beta)
}

/// Eigenvalues of a row-stochastic weight matrix.
///
/// When the matrix came from a symmetric kernel, `V = D^{-1} K` with K
/// symmetric and D the row sums of K, so `D^{1/2} V D^{-1/2}` is symmetric
/// and shares the (real) eigenvalues of V. Rows that fell back to uniform
/// neighbor weights break that similarity; in that case the symmetrized
/// matrix `(V + V')/2` is used instead and a warning is logged.
pub(crate) fn sar_eigenvalues(v: &WeightMatrix) -> Result<Vec<f64>> {
    let n = v.n();
    let similar = if v.fallback_rows().is_empty() && v.row_scale().iter().all(|&s| s > 0.0) {
        let scale: Vec<f64> = v.row_scale().iter().map(|s| s.sqrt()).collect();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v.values()[(i, j)] * scale[i] / scale[j];
            }
        }
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-8 {
            log::warn!("similarity transform not symmetric (deviation {asym:.2e}); symmetrizing");
        }
        (&m + m.transpose()) * 0.5
    } else {
        log::warn!("weight matrix has fallback rows; using symmetrized eigenvalues");
        (v.values() + v.values().transpose()) * 0.5
    };
    let eig = SymmetricEigen::try_new(similar, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("eigen-decomposition did not converge".into()))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Profiled quantities shared across rho evaluations of one dataset.
pub struct SarProfile {
    n: usize,
    x: DMatrix<f64>,
    y: DVector<f64>,
    vy: DVector<f64>,
    eigenvalues: Vec<f64>,
}

impl SarProfile {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, v: &WeightMatrix) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || v.n() != n {
            return Err(Error::DimensionMismatch(
                "SAR profile dimensions do not agree".into(),
            ));
        }
        if n <= x.ncols() {
            return Err(Error::Invalid(format!(
                "need more observations than covariates: n = {n}, p = {}",
                x.ncols()
            )));
        }
        Ok(SarProfile {
            n,
            x: x.clone(),
            y: y.clone(),
            vy: v.smooth_vector(y),
            eigenvalues: sar_eigenvalues(v)?,
        })
    }

    fn fit_at(&self, rho: f64) -> Result<(DVector<f64>, f64)> {
        let ytrans = &self.y - rho * &self.vy;
        let (beta, _) = least_squares(&self.x, &ytrans)?;
        let resid = ytrans - &self.x * &beta;
        let sigma2 = resid.norm_squared() / self.n as f64;
        Ok((beta, sigma2))
    }

    /// Concentrated log-likelihood at rho.
    pub fn loglik(&self, rho: f64) -> f64 {
        let Ok((_, sigma2)) = self.fit_at(rho) else {
            return f64::NEG_INFINITY;
        };
        if sigma2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut logdet = 0.0;
        for &lambda in &self.eigenvalues {
            let term = 1.0 - rho * lambda;
            if term <= 0.0 {
                return f64::NEG_INFINITY;
            }
            logdet += term.ln();
        }
        let n = self.n as f64;
        -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + 1.0) - 0.5 * n * sigma2.ln() + logdet
    }
}

/// Discrete unimodality: at most one sign change of the slope, from
/// positive to negative.
pub fn is_unimodal(values: &[f64]) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        if w[1] > w[0] {
            if falling {
                return false;
            }
        } else if w[1] < w[0] {
            falling = true;
        }
    }
    true
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Maximum-likelihood SAR fit over the default 199-point rho grid on
/// (-0.99, 0.99), refined by golden-section search to 1e-6.
pub fn sar_ml_fit(x: &DMatrix<f64>, y: &DVector<f64>, v: &WeightMatrix) -> Result<SarFit> {
    let grid: Vec<f64> = (0..199).map(|i| -0.99 + i as f64 * (1.98 / 198.0)).collect();
    sar_ml_fit_on_grid(x, y, v, &grid, true)
}

/// SAR fit over an explicit rho grid; `refine` controls the golden-section
/// polish around the best grid point.
pub fn sar_ml_fit_on_grid(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    v: &WeightMatrix,
    rho_grid: &[f64],
    refine: bool,
) -> Result<SarFit> {
    if rho_grid.is_empty() {
        return Err(Error::Invalid("empty rho grid".into()));
    }
    let profile = SarProfile::new(x, y, v)?;
    let values: Vec<f64> = rho_grid.iter().map(|&r| profile.loglik(r)).collect();
    if !is_unimodal(&values) {
        log::warn!("concentrated SAR log-likelihood is not unimodal on the rho grid");
    }
    let best_idx = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("comparable log-likelihoods"))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    if !values[best_idx].is_finite() {
        return Err(Error::Numerical(
            "SAR log-likelihood is degenerate on the whole grid".into(),
        ));
    }

    let boundary = best_idx == 0 || best_idx == rho_grid.len() - 1;
    let rho_hat = if refine && rho_grid.len() > 1 {
        let lo = rho_grid[best_idx.saturating_sub(1)];
        let hi = rho_grid[(best_idx + 1).min(rho_grid.len() - 1)];
        if hi > lo {
            golden_section_max(|r| profile.loglik(r), lo, hi, 1e-6)
        } else {
            rho_grid[best_idx]
        }
    } else {
        rho_grid[best_idx]
    };

    let (beta_hat, sigma2_hat) = profile.fit_at(rho_hat)?;
    let loglik = profile.loglik(rho_hat);
    if boundary {
        log::warn!("SAR maximizer at the boundary of the searched interval (rho = {rho_hat})");
    }
    Ok(SarFit {
        rho_hat,
        beta_hat,
        sigma2_hat,
        loglik,
        boundary,
    })
}
