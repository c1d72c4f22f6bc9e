//! Bandwidth and neighborhood-size selection by cross-validated RMSE.
//!
//! Candidate configurations are scored either by V-fold cross-validation
//! (fit on the complement of each fold, predict the held-out sites) or in
//! leave-one-out mode, where the self-exclusion built into the weight
//! matrix (zero diagonal) makes the in-sample fitted values of a single
//! full fit leave-one-out predictions.
//!
//! Neighborhood vectors for held-out sites are built from training-fold
//! responses only, so no test response leaks into the fit.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{fit_with_mode, predict_with_mode, SpatialDataset};
use crate::kernels::KernelKind;
use crate::rng::seeded_rng;
use crate::weights::{BandwidthConfig, WeightMode, WeightVariant};
use crate::{Error, Result};

/// Cross-validation flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMode {
    /// V-fold cross-validation on random site folds.
    KFold(usize),
    /// Leave-one-out via self-exclusion weights of one full-sample fit.
    Loo,
}

impl Default for CvMode {
    fn default() -> Self {
        CvMode::KFold(5)
    }
}

impl std::fmt::Display for CvMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CvMode::KFold(v) => write!(f, "{v}-fold"),
            CvMode::Loo => f.write_str("loo"),
        }
    }
}

/// Candidate bandwidth/neighborhood sets for one weight variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub h1_set: Vec<f64>,
    pub h2_set: Vec<f64>,
    pub k_set: Vec<usize>,
    pub variant: WeightVariant,
    pub folds: CvMode,
    pub kernel: KernelKind,
}

fn normalize_reals(name: &str, values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Invalid(format!("{name} candidate set is empty")));
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Invalid(format!(
            "{name} candidates must be finite and positive"
        )));
    }
    let mut out = values.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    Ok(out)
}

impl SearchSpace {
    /// Validate, sort ascending, and deduplicate the candidate sets.
    pub fn new(
        h1_set: &[f64],
        h2_set: &[f64],
        k_set: &[usize],
        variant: WeightVariant,
        folds: CvMode,
    ) -> Result<Self> {
        let h1_set = normalize_reals("h1", h1_set)?;
        let h2_set = normalize_reals("h2", h2_set)?;
        if k_set.is_empty() {
            return Err(Error::Invalid("k candidate set is empty".into()));
        }
        if k_set.iter().any(|&k| k < 1) {
            return Err(Error::Invalid("k candidates must be at least 1".into()));
        }
        let mut k_set = k_set.to_vec();
        k_set.sort_unstable();
        k_set.dedup();
        if let CvMode::KFold(v) = folds {
            if v < 2 {
                return Err(Error::Invalid("need at least 2 folds".into()));
            }
        }
        Ok(SearchSpace {
            h1_set,
            h2_set,
            k_set,
            variant,
            folds,
            kernel: KernelKind::default(),
        })
    }

    /// The default candidate grids: bandwidths spanning unit-square scales
    /// and small neighborhood sizes.
    pub fn default_for(variant: WeightVariant) -> Self {
        let bw = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0];
        SearchSpace::new(&bw, &bw, &[4, 8, 12], variant, CvMode::default())
            .expect("default grids are valid")
    }

    pub fn with_variant(&self, variant: WeightVariant) -> Self {
        SearchSpace {
            variant,
            ..self.clone()
        }
    }

    /// Enumerate candidate configurations. Bandwidths the variant ignores
    /// are pinned to their smallest candidate so equivalent configurations
    /// are scored once.
    pub fn candidates(&self) -> Vec<BandwidthConfig> {
        let h1s: &[f64] = if self.variant.uses_h1() {
            &self.h1_set
        } else {
            &self.h1_set[..1]
        };
        let h2s: &[f64] = if self.variant.uses_h2() {
            &self.h2_set
        } else {
            &self.h2_set[..1]
        };
        let mut out = Vec::with_capacity(self.k_set.len() * h1s.len() * h2s.len());
        for &k in &self.k_set {
            for &h2 in h2s {
                for &h1 in h1s {
                    out.push(BandwidthConfig {
                        variant: self.variant,
                        h1,
                        h2,
                        k,
                        kernel: self.kernel,
                    });
                }
            }
        }
        out
    }

    pub fn max_k(&self) -> usize {
        *self.k_set.last().expect("validated non-empty")
    }
}

/// Result of a bandwidth search.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub best: BandwidthConfig,
    /// Every candidate with its cross-validated RMSE (NaN for candidates
    /// that failed to fit).
    pub score_table: Vec<(BandwidthConfig, f64)>,
    /// Number of candidates within 1e-12 of the best score (including the
    /// best itself).
    pub ties: usize,
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Invalid("rmse of empty vectors".into()));
    }
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch(format!(
            "rmse over {} predictions vs {} actuals",
            pred.len(),
            actual.len()
        )));
    }
    let sse: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Deterministic random partition of `0..n` into `folds` near-equal folds.
/// Each fold is returned sorted ascending.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let base = n / folds;
    let rem = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < rem);
        let mut fold: Vec<usize> = idx[start..start + size].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += size;
    }
    out
}

struct FoldData {
    train: SpatialDataset,
    test_rows: Vec<Vec<f64>>,
    test_targets: Vec<[f64; 2]>,
    test_y: Vec<f64>,
}

fn kfold_score(cfg: &BandwidthConfig, folds: &[&FoldData], mode: WeightMode) -> Result<f64> {
    let mut preds = Vec::new();
    let mut actuals = Vec::new();
    for fd in folds {
        let res = fit_with_mode(&fd.train, cfg, mode)?;
        for (i, target) in fd.test_targets.iter().enumerate() {
            let p = predict_with_mode(&fd.test_rows[i], *target, &fd.train, &res, mode)?;
            preds.push(p);
            actuals.push(fd.test_y[i]);
        }
    }
    rmse(&preds, &actuals)
}

/// Search the candidate grid for the configuration minimizing
/// cross-validated RMSE. Ties within 1e-12 are broken toward smaller k,
/// then smaller h2, then smaller h1.
pub fn cv_select(data: &SpatialDataset, space: &SearchSpace, seed: u64) -> Result<SelectionResult> {
    cv_select_with_mode(data, space, seed, WeightMode::Lenient)
}

pub fn cv_select_with_mode(
    data: &SpatialDataset,
    space: &SearchSpace,
    seed: u64,
    mode: WeightMode,
) -> Result<SelectionResult> {
    let n = data.n();
    let k_max = space.max_k();
    let candidates = space.candidates();

    let scores: Vec<f64> = match space.folds {
        CvMode::KFold(v) => {
            if v > n {
                return Err(Error::Invalid(format!("{v} folds requested for {n} sites")));
            }
            let folds = fold_indices(n, v, seed);
            let max_fold = folds.iter().map(Vec::len).max().unwrap_or(0);
            if n - max_fold < k_max + 1 {
                return Err(Error::Invalid(format!(
                    "a fold of size {max_fold} leaves fewer than {} training sites",
                    k_max + 1
                )));
            }
            // Training datasets depend only on (fold, k); build them once
            // and share across candidate configurations.
            let mut fold_data: HashMap<(usize, usize), FoldData> = HashMap::new();
            for (f, fold) in folds.iter().enumerate() {
                let train_idx: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
                for &k in &space.k_set {
                    let train = data.subset(&train_idx, k)?;
                    let test_rows = fold
                        .iter()
                        .map(|&i| data.x().row(i).iter().copied().collect())
                        .collect();
                    let test_targets =
                        fold.iter().map(|&i| data.sites().site(i).coords()).collect();
                    let test_y = fold.iter().map(|&i| data.y()[i]).collect();
                    fold_data.insert(
                        (f, k),
                        FoldData {
                            train,
                            test_rows,
                            test_targets,
                            test_y,
                        },
                    );
                }
            }
            candidates
                .par_iter()
                .map(|cfg| {
                    let per_fold: Vec<&FoldData> =
                        (0..v).map(|f| &fold_data[&(f, cfg.k)]).collect();
                    kfold_score(cfg, &per_fold, mode).unwrap_or(f64::NAN)
                })
                .collect()
        }
        CvMode::Loo => {
            if n < k_max + 2 {
                return Err(Error::Invalid(format!(
                    "leave-one-out scoring needs more than {} sites",
                    k_max + 1
                )));
            }
            let mut by_k: HashMap<usize, SpatialDataset> = HashMap::new();
            for &k in &space.k_set {
                by_k.insert(k, data.with_k(k)?);
            }
            let actual: Vec<f64> = data.y().iter().copied().collect();
            candidates
                .par_iter()
                .map(|cfg| {
                    let d = &by_k[&cfg.k];
                    match fit_with_mode(d, cfg, mode) {
                        Ok(res) => {
                            let fitted: Vec<f64> = res.fitted(d).iter().copied().collect();
                            rmse(&fitted, &actual).unwrap_or(f64::NAN)
                        }
                        Err(_) => f64::NAN,
                    }
                })
                .collect()
        }
    };

    let best_score = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best_score.is_finite() {
        return Err(Error::NoFeasibleConfiguration);
    }
    let tied: Vec<usize> = (0..candidates.len())
        .filter(|&i| scores[i].is_finite() && (scores[i] - best_score).abs() <= 1e-12)
        .collect();
    let ties = tied.len();
    let best = *tied
        .iter()
        .map(|&i| &candidates[i])
        .min_by(|a, b| {
            (a.k, a.h2, a.h1)
                .partial_cmp(&(b.k, b.h2, b.h1))
                .expect("finite bandwidths")
        })
        .expect("non-empty tie set");

    let score_table = candidates.into_iter().zip(scores).collect();
    Ok(SelectionResult {
        best,
        score_table,
        ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_sites, GridDesign};
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn dataset(n: usize, seed: u64) -> SpatialDataset {
        let sites = generate_sites(GridDesign::Irregular, n, seed).unwrap();
        let mut rng = seeded_rng(seed ^ 0xFACE);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let beta = DVector::from_vec(vec![1.0, -0.5]);
        let y = &x * &beta + DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3));
        SpatialDataset::new(sites, y, x, 4).unwrap()
    }

    #[test]
    fn rmse_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = [2.0, 3.0, 4.0];
        assert!((rmse(&b, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());

        let mut rng = seeded_rng(1);
        let p: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut sse = 0.0;
        for i in 0..7 {
            sse += (p[i] - q[i]) * (p[i] - q[i]);
        }
        assert!((rmse(&p, &q).unwrap() - (sse / 7.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fold_indices_partition_and_are_deterministic() {
        let folds = fold_indices(23, 5, 99);
        assert_eq!(folds, fold_indices(23, 5, 99));
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
    }

    #[test]
    fn candidate_enumeration_collapses_unused_bandwidths() {
        let space = SearchSpace::new(
            &[0.1, 0.2],
            &[0.3, 0.6],
            &[4],
            WeightVariant::K1S,
            CvMode::KFold(5),
        )
        .unwrap();
        assert_eq!(space.candidates().len(), 2); // h2 ignored
        let space = space.with_variant(WeightVariant::K2ME);
        assert_eq!(space.candidates().len(), 4);
        let space = space.with_variant(WeightVariant::K1ME);
        assert_eq!(space.candidates().len(), 2); // h1 ignored
    }

    #[test]
    fn search_space_sorts_and_dedups() {
        let space = SearchSpace::new(
            &[0.5, 0.1, 0.5],
            &[1.0],
            &[8, 4, 8],
            WeightVariant::K2ME,
            CvMode::KFold(3),
        )
        .unwrap();
        assert_eq!(space.h1_set, vec![0.1, 0.5]);
        assert_eq!(space.k_set, vec![4, 8]);
        assert!(SearchSpace::new(&[], &[1.0], &[4], WeightVariant::K1S, CvMode::Loo).is_err());
        assert!(SearchSpace::new(&[-0.1], &[1.0], &[4], WeightVariant::K1S, CvMode::Loo).is_err());
    }

    #[test]
    fn single_config_space_returns_that_config() {
        let data = dataset(40, 3);
        let space = SearchSpace::new(
            &[0.4],
            &[0.8],
            &[4],
            WeightVariant::K2ME,
            CvMode::KFold(4),
        )
        .unwrap();
        let sel = cv_select(&data, &space, 7).unwrap();
        assert_eq!(sel.best, space.candidates()[0]);
        assert_eq!(sel.score_table.len(), 1);
        assert!(sel.score_table[0].1.is_finite());
    }

    #[test]
    fn scores_are_reproducible_by_singleton_evaluation() {
        let data = dataset(36, 5);
        let space = SearchSpace::new(
            &[0.2, 0.5],
            &[0.5, 1.0],
            &[3, 5],
            WeightVariant::K2ME,
            CvMode::KFold(3),
        )
        .unwrap();
        let sel = cv_select(&data, &space, 11).unwrap();
        for (cfg, score) in &sel.score_table {
            let single = SearchSpace::new(
                &[cfg.h1],
                &[cfg.h2],
                &[cfg.k],
                cfg.variant,
                CvMode::KFold(3),
            )
            .unwrap();
            let alone = cv_select(&data, &single, 11).unwrap();
            if score.is_finite() {
                assert!(
                    (alone.score_table[0].1 - score).abs() <= 1e-12,
                    "config {cfg:?}: {} vs {}",
                    alone.score_table[0].1,
                    score
                );
            } else {
                assert!(alone.score_table[0].1.is_nan());
            }
        }
    }

    #[test]
    fn kfold_score_matches_manual_fold_loop() {
        let data = dataset(30, 9);
        let cfg = BandwidthConfig::new(WeightVariant::K1S, 0.5, 1.0, 3);
        let space =
            SearchSpace::new(&[0.5], &[1.0], &[3], WeightVariant::K1S, CvMode::KFold(3)).unwrap();
        let sel = cv_select(&data, &space, 13).unwrap();

        let folds = fold_indices(30, 3, 13);
        let mut preds = Vec::new();
        let mut actuals = Vec::new();
        for fold in &folds {
            let train_idx: Vec<usize> = (0..30).filter(|i| !fold.contains(i)).collect();
            let train = data.subset(&train_idx, 3).unwrap();
            let res = crate::estimator::fit(&train, &cfg).unwrap();
            for &i in fold {
                let row: Vec<f64> = data.x().row(i).iter().copied().collect();
                let p = crate::estimator::predict(
                    &row,
                    data.sites().site(i).coords(),
                    &train,
                    &res,
                )
                .unwrap();
                preds.push(p);
                actuals.push(data.y()[i]);
            }
        }
        let expect = rmse(&preds, &actuals).unwrap();
        assert!((sel.score_table[0].1 - expect).abs() <= 1e-12);
    }

    #[test]
    fn dominant_config_wins() {
        let data = dataset(40, 17);
        let space = SearchSpace::new(
            &[0.3, 0.6],
            &[1.0],
            &[4],
            WeightVariant::K1S,
            CvMode::KFold(4),
        )
        .unwrap();
        let sel = cv_select(&data, &space, 19).unwrap();
        let (best_cfg, best_score) = sel
            .score_table
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(sel.best, *best_cfg);
        assert!(sel
            .score_table
            .iter()
            .all(|(_, s)| !s.is_finite() || *s >= *best_score));
    }

    #[test]
    fn selection_is_deterministic() {
        let data = dataset(32, 23);
        let space = SearchSpace::new(
            &[0.2, 0.4],
            &[0.5, 1.0],
            &[3, 4],
            WeightVariant::K2ME,
            CvMode::KFold(4),
        )
        .unwrap();
        let a = cv_select(&data, &space, 31).unwrap();
        let b = cv_select(&data, &space, 31).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.ties, b.ties);
        for (x, y) in a.score_table.iter().zip(&b.score_table) {
            assert_eq!(x.0, y.0);
            assert!(x.1 == y.1 || (x.1.is_nan() && y.1.is_nan()));
        }
    }

    #[test]
    fn loo_mode_scores_fitted_values() {
        let data = dataset(25, 29);
        let space =
            SearchSpace::new(&[0.5], &[1.0], &[4], WeightVariant::K1S, CvMode::Loo).unwrap();
        let sel = cv_select(&data, &space, 0).unwrap();
        let cfg = space.candidates()[0];
        let res = crate::estimator::fit(&data, &cfg).unwrap();
        let fitted: Vec<f64> = res.fitted(&data).iter().copied().collect();
        let actual: Vec<f64> = data.y().iter().copied().collect();
        let expect = rmse(&fitted, &actual).unwrap();
        assert!((sel.score_table[0].1 - expect).abs() <= 1e-12);
    }

    #[test]
    fn all_failing_candidates_yield_no_feasible_configuration() {
        // Bandwidths far below any pairwise distance leave every kernel
        // denominator empty; in strict mode every candidate fails.
        let data = dataset(30, 35);
        let space = SearchSpace::new(
            &[1e-9, 2e-9],
            &[1.0],
            &[3],
            WeightVariant::K1S,
            CvMode::KFold(3),
        )
        .unwrap();
        match cv_select_with_mode(&data, &space, 2, WeightMode::Strict) {
            Err(Error::NoFeasibleConfiguration) => {}
            other => panic!("expected NoFeasibleConfiguration, got {other:?}"),
        }
        // Lenient mode scores the same candidates through the fallback.
        let sel = cv_select(&data, &space, 2).unwrap();
        assert!(sel.score_table.iter().all(|(_, s)| s.is_finite()));
    }

    #[test]
    fn infeasible_fold_layout_is_rejected() {
        let data = dataset(12, 33);
        let space = SearchSpace::new(
            &[0.5],
            &[1.0],
            &[10],
            WeightVariant::K1S,
            CvMode::KFold(4),
        )
        .unwrap();
        assert!(matches!(cv_select(&data, &space, 1), Err(Error::Invalid(_))));
    }
}
