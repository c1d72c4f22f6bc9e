//! Simulation of correlated Gaussian covariate fields and spatial
//! autoregressive responses.
//!
//! Each covariate is a unit-variance Gaussian random field with one of
//! four isotropic autocorrelation models (spherical with and without
//! nugget, Gaussian, and a sinc / J-Bessel model of order 1/2), a constant
//! mean drawn from U[0.5, 2], and optional cross-correlation between
//! consecutive covariate pairs induced on the pre-transform normals.
//!
//! The response follows the autoregressive equation
//! `Y = X beta + rho V Y + eps`, solved as the linear system
//! `(I - rho V) Y = X beta + eps` with a row-stochastic geographic weight
//! matrix V; `rho < 1` keeps the system invertible.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::{generate_sites, GridDesign, SiteSet};
use crate::rng::{derive_seed, seeded_rng};
use crate::weights::{weight_matrix, BandwidthConfig, WeightMatrix, WeightMode, WeightVariant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    SphericalNugget,
    Spherical,
    Gaussian,
    Sinc,
}

impl std::fmt::Display for CovKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CovKind::SphericalNugget => "spherical_nugget",
            CovKind::Spherical => "spherical",
            CovKind::Gaussian => "gaussian",
            CovKind::Sinc => "sinc",
        };
        f.write_str(s)
    }
}

/// Isotropic autocorrelation model with unit sill at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovModel {
    pub kind: CovKind,
    /// Partial sill m1.
    pub partial_sill: f64,
    /// Nugget m2.
    pub nugget: f64,
    /// Range (also the sinc scale parameter theta).
    pub range: f64,
}

impl CovModel {
    pub fn spherical_nugget() -> Self {
        CovModel {
            kind: CovKind::SphericalNugget,
            partial_sill: 1.0,
            nugget: 0.1,
            range: 0.5,
        }
    }

    pub fn spherical() -> Self {
        CovModel {
            kind: CovKind::Spherical,
            partial_sill: 1.0,
            nugget: 0.0,
            range: 0.5,
        }
    }

    pub fn gaussian() -> Self {
        CovModel {
            kind: CovKind::Gaussian,
            partial_sill: 1.0,
            nugget: 0.1,
            range: 0.5,
        }
    }

    pub fn sinc() -> Self {
        CovModel {
            kind: CovKind::Sinc,
            partial_sill: 1.0,
            nugget: 0.1,
            range: 0.05,
        }
    }

    /// The four models with their standard parameterizations, in a fixed
    /// order used for random assignment.
    pub fn standard_models() -> [CovModel; 4] {
        [
            CovModel::spherical_nugget(),
            CovModel::spherical(),
            CovModel::gaussian(),
            CovModel::sinc(),
        ]
    }

    pub fn correlation(&self, h: f64) -> Result<f64> {
        correlation(self, h)
    }
}

/// Autocorrelation at lag distance `h >= 0`. Every model returns 1 at
/// h = 0; for h > 0 the nugget discount `m1 / (m1 + m2)` applies.
///
/// The sinc model is evaluated in its Bessel form
/// `(2 theta / h)^(1/2) * Gamma(3/2) * J_{1/2}(h / theta)` with
/// `J_{1/2}(x) = sqrt(2 / (pi x)) * sin(x)` and `Gamma(3/2) = sqrt(pi)/2`.
pub fn correlation(model: &CovModel, h: f64) -> Result<f64> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::Invalid(format!("invalid lag distance {h}")));
    }
    if h == 0.0 {
        return Ok(1.0);
    }
    let discount = model.partial_sill / (model.partial_sill + model.nugget);
    Ok(match model.kind {
        CovKind::SphericalNugget | CovKind::Spherical => {
            let u = h / model.range;
            if u >= 1.0 {
                0.0
            } else {
                discount * (1.0 - 1.5 * u + 0.5 * u * u * u)
            }
        }
        CovKind::Gaussian => {
            let u = h / model.range;
            discount * (-u * u).exp()
        }
        CovKind::Sinc => {
            let theta = model.range;
            let x = h / theta;
            let gamma_3_2 = PI.sqrt() / 2.0;
            let j_half = (2.0 / (PI * x)).sqrt() * x.sin();
            discount * (2.0 * theta / h).sqrt() * gamma_3_2 * j_half
        }
    })
}

/// Configuration of one simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub design: GridDesign,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Standard deviation of the generating linear coefficients.
    pub beta_sd: f64,
    /// Bandwidth of the geographic weight matrix V in the response.
    pub v_bandwidth: f64,
    pub seed: u64,
}

impl SimConfig {
    /// The standard experiment settings: p = 8 covariates, coefficients
    /// from N(0, 10^2), V bandwidth 0.5.
    pub fn standard(design: GridDesign, n: usize, rho: f64, seed: u64) -> Self {
        SimConfig {
            design,
            n,
            p: 8,
            rho,
            beta_sd: 10.0,
            v_bandwidth: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Invalid("n must be at least 4".into()));
        }
        if self.p < 1 {
            return Err(Error::Invalid("p must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Invalid(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.beta_sd.is_finite() && self.beta_sd > 0.0) {
            return Err(Error::Invalid("beta_sd must be positive".into()));
        }
        if !(self.v_bandwidth.is_finite() && self.v_bandwidth > 0.0) {
            return Err(Error::Invalid("v_bandwidth must be positive".into()));
        }
        Ok(())
    }
}

/// Model and mean of one simulated covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateMeta {
    pub model: CovModel,
    pub mean: f64,
}

/// Cross-correlation induced between two covariates (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub first: usize,
    pub second: usize,
    pub correlation: f64,
}

/// A simulated covariate matrix together with its generation record.
#[derive(Debug, Clone)]
pub struct CovariateField {
    pub values: DMatrix<f64>,
    pub meta: Vec<CovariateMeta>,
    pub pairings: Vec<Pairing>,
}

// Cholesky factors of the site correlation matrices are deterministic in
// (sites, model); they dominate simulation cost and repeat across
// replications on fixed designs, so keep a small process-wide memo.
type FactorKey = (u8, u64, u64, u64, u64, usize);

fn factor_cache() -> &'static Mutex<HashMap<FactorKey, Arc<DMatrix<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<FactorKey, Arc<DMatrix<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn coords_hash(sites: &SiteSet) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in sites.sites() {
        for bits in [s.x.to_bits(), s.y.to_bits()] {
            h ^= bits;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}

/// Cholesky factor of the correlation matrix, escalating a diagonal
/// jitter from 1e-10 to 1e-6 if the plain factorization fails.
fn correlation_factor(sites: &SiteSet, model: &CovModel) -> Result<Arc<DMatrix<f64>>> {
    let key: FactorKey = (
        match model.kind {
            CovKind::SphericalNugget => 0,
            CovKind::Spherical => 1,
            CovKind::Gaussian => 2,
            CovKind::Sinc => 3,
        },
        model.partial_sill.to_bits(),
        model.nugget.to_bits(),
        model.range.to_bits(),
        coords_hash(sites),
        sites.len(),
    );
    if let Some(l) = factor_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(l));
    }

    let n = sites.len();
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            correlation(model, sites.site(i).distance(sites.site(j))).expect("nonnegative lag")
        }
    });
    let mut jitter = 0.0;
    let mut next = 1e-10;
    let factor = loop {
        let mut m = sigma.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        match Cholesky::new(m) {
            Some(c) => {
                if jitter > 0.0 {
                    log::debug!(
                        "correlation factorization needed jitter {jitter:.1e} for {}",
                        model.kind
                    );
                }
                break c.unpack();
            }
            None => {
                if next > 1e-6 {
                    return Err(Error::CovarianceNotPd);
                }
                jitter = next;
                next *= 10.0;
            }
        }
    };

    let factor = Arc::new(factor);
    let mut cache = factor_cache().lock().unwrap();
    if cache.len() >= 16 {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&factor));
    Ok(factor)
}

/// Generate covariate values for a fixed generation record. Pairings mix
/// the pre-transform normals, so paired covariates sharing a model realize
/// the requested correlation exactly in distribution.
pub fn simulate_covariates_with(
    sites: &SiteSet,
    meta: &[CovariateMeta],
    pairings: &[Pairing],
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let n = sites.len();
    let p = meta.len();
    if p == 0 {
        return Err(Error::Invalid("need at least one covariate".into()));
    }
    let mut seconds = std::collections::HashSet::new();
    for pr in pairings {
        if pr.first >= p || pr.second >= p || pr.first == pr.second {
            return Err(Error::Invalid(format!(
                "invalid pairing ({}, {})",
                pr.first, pr.second
            )));
        }
        if !(-1.0..=1.0).contains(&pr.correlation) {
            return Err(Error::Invalid(format!(
                "pairing correlation {} outside [-1, 1]",
                pr.correlation
            )));
        }
        if !seconds.insert(pr.second) || seconds.contains(&pr.first) {
            return Err(Error::Invalid("pairings must be disjoint".into()));
        }
    }

    let mut normals = DMatrix::zeros(n, p);
    for u in 0..p {
        for i in 0..n {
            normals[(i, u)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    for pr in pairings {
        let mix = (1.0 - pr.correlation * pr.correlation).sqrt();
        for i in 0..n {
            normals[(i, pr.second)] =
                pr.correlation * normals[(i, pr.first)] + mix * normals[(i, pr.second)];
        }
    }

    let mut values = DMatrix::zeros(n, p);
    for (u, m) in meta.iter().enumerate() {
        let l = correlation_factor(sites, &m.model)?;
        let field = &*l * normals.column(u);
        for i in 0..n {
            values[(i, u)] = m.mean + field[i];
        }
    }
    Ok(values)
}

/// Simulate `p` covariates: models drawn uniformly from the four standard
/// choices, means from U[0.5, 2], and a cross-correlation from U[-1, 1]
/// for each consecutive pair (2,3), (4,5), ... in 1-based numbering.
pub fn simulate_covariates(sites: &SiteSet, p: usize, seed: u64) -> Result<CovariateField> {
    if p < 1 {
        return Err(Error::Invalid("p must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let models = CovModel::standard_models();
    let kinds: Vec<CovModel> = (0..p)
        .map(|_| models[rng.random_range(0..models.len())])
        .collect();
    let means: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..=2.0)).collect();
    let meta: Vec<CovariateMeta> = kinds
        .iter()
        .zip(&means)
        .map(|(&model, &mean)| CovariateMeta { model, mean })
        .collect();
    // 1-based covariates u = 2, 4, 6, ... pair with u + 1 when it exists;
    // 0-based that is (1,2), (3,4), (5,6), ...
    let mut pairings = Vec::new();
    let mut first = 1;
    while first + 1 < p {
        pairings.push(Pairing {
            first,
            second: first + 1,
            correlation: rng.random_range(-1.0..=1.0),
        });
        first += 2;
    }
    let values = simulate_covariates_with(sites, &meta, &pairings, &mut rng)?;
    Ok(CovariateField {
        values,
        meta,
        pairings,
    })
}

/// The geographic neighborhood matrix of the response equation: kernel
/// weights in the Euclidean distance only, row-stochastic with zero
/// diagonal.
pub fn build_v(sites: &SiteSet, bandwidth: f64) -> Result<WeightMatrix> {
    let k = 4.min(sites.len().saturating_sub(1)).max(1);
    let cfg = BandwidthConfig::new(WeightVariant::K1S, bandwidth, 1.0, k);
    // T is not read by the geographic variant.
    let t = DMatrix::zeros(sites.len(), 1);
    weight_matrix(sites, &t, &cfg, WeightMode::Lenient)
}

/// A simulated response with its generating coefficients and noise.
#[derive(Debug, Clone)]
pub struct SarResponse {
    pub y: DVector<f64>,
    pub beta_true: DVector<f64>,
    pub eps: DVector<f64>,
}

/// Draw `beta ~ N(0, beta_sd^2)`, `eps ~ N(0, 1)` and solve
/// `(I - rho V) Y = X beta + eps`. For `rho = 0` the solve is skipped and
/// `Y = X beta + eps` exactly.
pub fn simulate_response(
    x: &DMatrix<f64>,
    v: &WeightMatrix,
    rho: f64,
    beta_sd: f64,
    seed: u64,
) -> Result<SarResponse> {
    let n = x.nrows();
    let p = x.ncols();
    if v.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "V is {}x{} for {} covariate rows",
            v.n(),
            v.n(),
            n
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    let mut rng = seeded_rng(seed);
    let beta_dist =
        Normal::new(0.0, beta_sd).map_err(|e| Error::Invalid(format!("invalid beta_sd: {e}")))?;
    let beta_true = DVector::from_fn(p, |_, _| beta_dist.sample(&mut rng));
    let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = x * &beta_true + &eps;

    let y = if rho == 0.0 {
        b
    } else {
        let a = DMatrix::identity(n, n) - rho * v.values();
        let y = a
            .clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("SAR system solve failed".into()))?;
        let residual = (&a * &y - &b).amax();
        if residual > 1e-8 {
            return Err(Error::Numerical(format!(
                "SAR solve residual {residual:.3e} exceeds tolerance"
            )));
        }
        y
    };

    Ok(SarResponse { y, beta_true, eps })
}

/// A full simulated dataset: sites, covariates, response, and the
/// generation record.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub config: SimConfig,
    pub sites: SiteSet,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_true: DVector<f64>,
    pub eps: DVector<f64>,
    pub covariates: Vec<CovariateMeta>,
    pub pairings: Vec<Pairing>,
}

/// Simulate sites, covariates, and the autoregressive response from one
/// configuration. Sub-seeds for each stage are derived from the
/// configuration seed.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<SimulatedData> {
    cfg.validate()?;
    let sites = generate_sites(cfg.design, cfg.n, derive_seed(cfg.seed, 1))?;
    let field = simulate_covariates(&sites, cfg.p, derive_seed(cfg.seed, 2))?;
    let v = build_v(&sites, cfg.v_bandwidth)?;
    let resp = simulate_response(
        &field.values,
        &v,
        cfg.rho,
        cfg.beta_sd,
        derive_seed(cfg.seed, 3),
    )?;
    Ok(SimulatedData {
        config: *cfg,
        sites,
        x: field.values,
        y: resp.y,
        beta_true: resp.beta_true,
        eps: resp.eps,
        covariates: field.meta,
        pairings: field.pairings,
    })
}
