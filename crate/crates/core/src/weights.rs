//! Row-stochastic kernel weight matrices over neighborhood vectors.
//!
//! The weight between sites i and j combines a kernel in the geographic
//! distance with a kernel in the median similarity of the neighborhood
//! vectors, normalized over j != i. Four published variants control which
//! factors enter the numerator:
//!
//! - `K1S`:  geographic distance only, `K1(d / h1)`
//! - `K1ME`: median similarity only, `K2(d_m / h2)`
//! - `K2ME`: the product `K1(d / h1) * K2(d_m / h2)`
//! - `K1M`:  a single kernel at the product of both distances,
//!   `K1(d * d_m / h1)`
//!
//! Every row sums to one and the diagonal (self-weight) is identically
//! zero. A row whose denominator vanishes (no site inside the kernel
//! supports) either falls back to uniform weights over the k nearest
//! neighbors (lenient mode, the default) or raises an error (strict mode).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{knn, knn_for_target, SiteSet};
use crate::kernels::{median, KernelKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightVariant {
    K1S,
    K1ME,
    K2ME,
    K1M,
}

impl WeightVariant {
    pub const ALL: [WeightVariant; 4] = [
        WeightVariant::K1S,
        WeightVariant::K1ME,
        WeightVariant::K2ME,
        WeightVariant::K1M,
    ];

    /// Whether the variant reads the geographic bandwidth h1.
    pub fn uses_h1(self) -> bool {
        !matches!(self, WeightVariant::K1ME)
    }

    /// Whether the variant reads the similarity bandwidth h2.
    pub fn uses_h2(self) -> bool {
        matches!(self, WeightVariant::K1ME | WeightVariant::K2ME)
    }

    /// Whether the variant needs the median similarity at all.
    fn uses_median(self) -> bool {
        !matches!(self, WeightVariant::K1S)
    }
}

impl std::fmt::Display for WeightVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WeightVariant::K1S => "K1S",
            WeightVariant::K1ME => "K1ME",
            WeightVariant::K2ME => "K2ME",
            WeightVariant::K1M => "K1M",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for WeightVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "K1S" => Ok(WeightVariant::K1S),
            "K1ME" => Ok(WeightVariant::K1ME),
            "K2ME" => Ok(WeightVariant::K2ME),
            "K1M" => Ok(WeightVariant::K1M),
            other => Err(Error::Invalid(format!("unknown weight variant `{other}`"))),
        }
    }
}

/// Bandwidths and neighborhood size for one weight configuration.
/// Bandwidths not read by the variant are carried but ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub variant: WeightVariant,
    pub h1: f64,
    pub h2: f64,
    pub k: usize,
    #[serde(default)]
    pub kernel: KernelKind,
}

impl BandwidthConfig {
    pub fn new(variant: WeightVariant, h1: f64, h2: f64, k: usize) -> Self {
        BandwidthConfig {
            variant,
            h1,
            h2,
            k,
            kernel: KernelKind::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h1.is_finite() && self.h1 > 0.0) {
            return Err(Error::Invalid(format!("h1 must be positive, got {}", self.h1)));
        }
        if !(self.h2.is_finite() && self.h2 > 0.0) {
            return Err(Error::Invalid(format!("h2 must be positive, got {}", self.h2)));
        }
        if self.k < 1 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// How to treat rows whose kernel denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Fall back to uniform weights over the k nearest neighbors.
    #[default]
    Lenient,
    /// Raise `Error::EmptyNeighborhood`.
    Strict,
}

/// A row-stochastic weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    values: DMatrix<f64>,
    fallback_rows: Vec<usize>,
    /// Pre-normalization denominator of each row; 0 for fallback rows.
    row_scale: Vec<f64>,
}

impl WeightMatrix {
    /// Wrap explicit values without validation; test-only constructor.
    #[cfg(test)]
    pub(crate) fn from_raw(values: DMatrix<f64>) -> Self {
        let n = values.nrows();
        WeightMatrix {
            values,
            fallback_rows: Vec::new(),
            row_scale: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn fallback_rows(&self) -> &[usize] {
        &self.fallback_rows
    }

    pub(crate) fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    /// W * v.
    pub fn smooth_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.values * v
    }

    /// W * M, column by column.
    pub fn smooth_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.values * m
    }
}

/// One prediction row of weights from a target point to the observed
/// sites.
#[derive(Debug, Clone)]
pub struct WeightRow {
    pub values: DVector<f64>,
    pub fallback: bool,
}

#[inline]
fn pair_numerator(cfg: &BandwidthConfig, d2: f64, dm: f64) -> f64 {
    let kern = cfg.kernel;
    match cfg.variant {
        WeightVariant::K1S => {
            if d2 > cfg.h1 * cfg.h1 {
                0.0
            } else {
                kern.eval_unchecked(d2.sqrt() / cfg.h1)
            }
        }
        WeightVariant::K1ME => kern.eval_unchecked(dm / cfg.h2),
        WeightVariant::K2ME => {
            if d2 > cfg.h1 * cfg.h1 {
                0.0
            } else {
                kern.eval_unchecked(d2.sqrt() / cfg.h1) * kern.eval_unchecked(dm / cfg.h2)
            }
        }
        WeightVariant::K1M => kern.eval_unchecked(d2.sqrt() * dm / cfg.h1),
    }
}

fn row_medians(t: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(t.nrows());
    let mut buf = Vec::with_capacity(t.ncols());
    for i in 0..t.nrows() {
        buf.clear();
        buf.extend(t.row(i).iter().copied());
        out.push(median(&buf)?);
    }
    Ok(out)
}

enum RawRow {
    Weighted { weights: Vec<f64>, scale: f64 },
    Degenerate,
}

fn build_row(
    i: usize,
    sites: &SiteSet,
    meds: &[f64],
    cfg: &BandwidthConfig,
) -> RawRow {
    let n = sites.len();
    let si = sites.site(i);
    let mut weights = vec![0.0; n];
    let mut sum = 0.0;
    for j in 0..n {
        if j == i {
            continue;
        }
        let sj = sites.site(j);
        let dx = si.x - sj.x;
        let dy = si.y - sj.y;
        let d2 = dx * dx + dy * dy;
        let dm = if meds.is_empty() {
            0.0
        } else {
            (meds[i] - meds[j]).abs()
        };
        let v = pair_numerator(cfg, d2, dm);
        weights[j] = v;
        sum += v;
    }
    if sum > 0.0 {
        for w in &mut weights {
            *w /= sum;
        }
        RawRow::Weighted { weights, scale: sum }
    } else {
        RawRow::Degenerate
    }
}

/// Build the full n x n weight matrix for a site set with neighborhood
/// matrix `t` (one row per site).
pub fn weight_matrix(
    sites: &SiteSet,
    t: &DMatrix<f64>,
    cfg: &BandwidthConfig,
    mode: WeightMode,
) -> Result<WeightMatrix> {
    cfg.validate()?;
    let n = sites.len();
    if n < 2 {
        return Err(Error::Invalid("need at least 2 sites".into()));
    }
    if t.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "neighborhood matrix has {} rows for {} sites",
            t.nrows(),
            n
        )));
    }
    let meds = if cfg.variant.uses_median() {
        row_medians(t)?
    } else {
        Vec::new()
    };

    // Rows are independent; build them in parallel for larger problems.
    let rows: Vec<RawRow> = if n >= 128 {
        (0..n)
            .into_par_iter()
            .map(|i| build_row(i, sites, &meds, cfg))
            .collect()
    } else {
        (0..n).map(|i| build_row(i, sites, &meds, cfg)).collect()
    };

    let mut fallback_rows: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| matches!(r, RawRow::Degenerate).then_some(i))
        .collect();
    fallback_rows.sort_unstable();

    if !fallback_rows.is_empty() && mode == WeightMode::Strict {
        return Err(Error::EmptyNeighborhood(fallback_rows[0]));
    }

    let nn = if fallback_rows.is_empty() {
        None
    } else {
        Some(knn(sites, cfg.k)?)
    };

    let mut values = DMatrix::zeros(n, n);
    let mut row_scale = vec![0.0; n];
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            RawRow::Weighted { weights, scale } => {
                row_scale[i] = scale;
                for (j, w) in weights.into_iter().enumerate() {
                    values[(i, j)] = w;
                }
            }
            RawRow::Degenerate => {
                let nn = nn.as_ref().unwrap();
                let w = 1.0 / cfg.k as f64;
                for &j in nn.row(i) {
                    values[(i, j)] = w;
                }
            }
        }
    }

    Ok(WeightMatrix {
        values,
        fallback_rows,
        row_scale,
    })
}

/// Build the 1 x n weight row from a target point to the observed sites.
///
/// A site coinciding with the target (zero geographic distance) receives
/// weight zero, mirroring the self-exclusion on the diagonal of the full
/// matrix.
pub fn weight_row(
    target: [f64; 2],
    target_t: &[f64],
    sites: &SiteSet,
    t: &DMatrix<f64>,
    cfg: &BandwidthConfig,
    mode: WeightMode,
) -> Result<WeightRow> {
    cfg.validate()?;
    let n = sites.len();
    if t.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "neighborhood matrix has {} rows for {} sites",
            t.nrows(),
            n
        )));
    }
    if !(target[0].is_finite() && target[1].is_finite()) {
        return Err(Error::Invalid("non-finite target coordinates".into()));
    }
    let (target_med, meds) = if cfg.variant.uses_median() {
        (median(target_t)?, row_medians(t)?)
    } else {
        (0.0, Vec::new())
    };

    let mut weights = DVector::zeros(n);
    let mut sum = 0.0;
    for j in 0..n {
        let sj = sites.site(j);
        let dx = target[0] - sj.x;
        let dy = target[1] - sj.y;
        let d2 = dx * dx + dy * dy;
        if d2 == 0.0 {
            continue; // self-exclusion
        }
        let dm = if meds.is_empty() {
            0.0
        } else {
            (target_med - meds[j]).abs()
        };
        let v = pair_numerator(cfg, d2, dm);
        weights[j] = v;
        sum += v;
    }
    if sum > 0.0 {
        weights /= sum;
        Ok(WeightRow {
            values: weights,
            fallback: false,
        })
    } else {
        match mode {
            WeightMode::Strict => Err(Error::EmptyNeighborhood(0)),
            WeightMode::Lenient => {
                let nn = knn_for_target(sites, target, cfg.k)?;
                let mut values = DVector::zeros(n);
                let w = 1.0 / cfg.k as f64;
                for j in nn {
                    values[j] = w;
                }
                Ok(WeightRow {
                    values,
                    fallback: true,
                })
            }
        }
    }
}
