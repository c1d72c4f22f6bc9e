//! Structured configuration files for the `evaluate` command.
//!
//! Every section is optional; command-line flags override file values.
//! Unknown keys are rejected so typos surface immediately.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub data: Option<DataSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Option<Vec<String>>,
    pub replications: Option<usize>,
    pub train_frac: Option<f64>,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub design: Option<String>,
    pub n: Option<usize>,
    pub rho: Option<f64>,
    pub p: Option<usize>,
    pub beta_sd: Option<f64>,
    pub v_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub h1_set: Option<Vec<f64>>,
    pub h2_set: Option<Vec<f64>>,
    pub k_set: Option<Vec<usize>>,
    /// Positive fold count, or the string "loo".
    pub folds: Option<toml::Value>,
    pub kernel: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub response_col: Option<String>,
    pub covariate_cols: Option<Vec<String>>,
    pub coord_x: Option<String>,
    pub coord_y: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }
}

impl SearchSection {
    /// Interpret the `folds` value: an integer fold count or "loo".
    pub fn cv_mode(&self) -> anyhow::Result<Option<semisar::selection::CvMode>> {
        match &self.folds {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 2 => {
                Ok(Some(semisar::selection::CvMode::KFold(*v as usize)))
            }
            Some(toml::Value::String(s)) if s.eq_ignore_ascii_case("loo") => {
                Ok(Some(semisar::selection::CvMode::Loo))
            }
            Some(other) => bail!("invalid folds value `{other}`: need an integer >= 2 or \"loo\""),
        }
    }
}
