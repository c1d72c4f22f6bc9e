//! Compact-support kernels on `[0,1]`, sample medians, and the distances
//! entering the weight construction.
//!
//! All kernels vanish for arguments above 1 and are non-increasing on the
//! support. The default is the truncated linear kernel
//! `K(u) = (1 - u/2) * 1[0 <= u <= 1]`, which stays strictly positive and
//! strictly decreasing on the whole support; Epanechnikov and uniform are
//! provided as alternatives even though they are degenerate at isolated
//! points (Epanechnikov vanishes at 1, uniform has zero slope).

use serde::{Deserialize, Serialize};

use crate::grid::Site;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    TruncatedLinear,
    Epanechnikov,
    Uniform,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            KernelKind::TruncatedLinear => "truncated_linear",
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Uniform => "uniform",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "truncated_linear" => Ok(KernelKind::TruncatedLinear),
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "uniform" => Ok(KernelKind::Uniform),
            other => Err(Error::Invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

impl KernelKind {
    /// Kernel value for a nonnegative argument; callers guarantee `u >= 0`.
    #[inline]
    pub(crate) fn eval_unchecked(self, u: f64) -> f64 {
        if u > 1.0 {
            return 0.0;
        }
        match self {
            KernelKind::TruncatedLinear => 1.0 - 0.5 * u,
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelKind::Uniform => 1.0,
        }
    }
}

/// Evaluate a kernel at `u >= 0`.
pub fn kernel_eval(kind: KernelKind, u: f64) -> Result<f64> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::InvalidKernelArgument(u));
    }
    Ok(kind.eval_unchecked(u))
}

/// Sample median; for even lengths, the mean of the two middle order
/// statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyMedian);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite value in median input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Similarity between two neighborhood vectors: the absolute difference of
/// their medians.
pub fn median_distance(t1: &[f64], t2: &[f64]) -> Result<f64> {
    Ok((median(t1)? - median(t2)?).abs())
}

/// Euclidean distance between two sites. Coordinates are stored directly
/// in the unit square, so no further rescaling is applied.
pub fn scaled_geo_distance(a: &Site, b: &Site) -> f64 {
    a.distance(b)
}
