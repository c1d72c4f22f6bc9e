//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured quantities (run with `--nocapture` to see them).
//!
//! 1. Full-pipeline equivalence against independent naive-loop oracles.
//! 2. Weight-matrix invariants over random draws of all four variants.
//! 3. The sinc autocorrelation's Bessel form against its closed-form
//!    reduction.
//! 4. The autoregressive response solve against dense inversion.
//! 5. Published coefficient-error table cells at reduced replication
//!    counts (one simulated realization per cell, re-split per
//!    replication, matching the published dispersion convention).
//! 6. Directional comparisons: the combined-kernel variant beats least
//!    squares under strong dependence, and its coefficient error falls
//!    with sample size.
//! 7. Convergence of the estimated spatial term in a generative model
//!    with a known smooth term.
//! 8. Determinism of the experiment pipeline under identical seeds (the
//!    byte-level CLI check lives in the CLI crate's suite).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use semisar::estimator::{fit, predict, SpatialDataset};
use semisar::evaluation::{
    run_experiment, ExperimentConfig, ExperimentSource, Method,
};
use semisar::grid::{generate_sites, GridDesign, SiteSet};
use semisar::kernels::{kernel_eval, median, KernelKind};
use semisar::rng::{derive_seed, seeded_rng};
use semisar::selection::{CvMode, SearchSpace};
use semisar::simgen::{
    build_v, simulate_covariates, simulate_response, CovModel, SimConfig,
};
use semisar::weights::{weight_matrix, BandwidthConfig, WeightMode, WeightVariant};

fn pass(criterion: &str, detail: &str) {
    println!("PASS {criterion}: {detail}");
}

// ---------------------------------------------------------------------
// Naive-loop oracles, independent of the production code paths.
// ---------------------------------------------------------------------

fn naive_numerator(cfg: &BandwidthConfig, d: f64, dm: f64) -> f64 {
    let k = |u: f64| kernel_eval(cfg.kernel, u).unwrap();
    match cfg.variant {
        WeightVariant::K1S => k(d / cfg.h1),
        WeightVariant::K1ME => k(dm / cfg.h2),
        WeightVariant::K2ME => k(d / cfg.h1) * k(dm / cfg.h2),
        WeightVariant::K1M => k(d * dm / cfg.h1),
    }
}

/// Brute-force k nearest neighbors by full sort, excluding `exclude`
/// (an index for in-sample rows) and zero-distance sites.
fn naive_knn(sites: &SiteSet, target: [f64; 2], exclude: Option<usize>, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = sites
        .sites()
        .iter()
        .filter(|s| Some(s.index) != exclude)
        .map(|s| {
            let d = ((s.x - target[0]).powi(2) + (s.y - target[1]).powi(2)).sqrt();
            (d, s.index)
        })
        .filter(|(d, _)| exclude.is_some() || *d > 0.0)
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all[..k].iter().map(|&(_, j)| j).collect()
}

fn naive_weight_matrix(
    sites: &SiteSet,
    t: &DMatrix<f64>,
    cfg: &BandwidthConfig,
) -> DMatrix<f64> {
    let n = sites.len();
    let med = |i: usize| {
        let row: Vec<f64> = t.row(i).iter().copied().collect();
        median(&row).unwrap()
    };
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut denom = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = sites.site(i).distance(sites.site(j));
            let dm = (med(i) - med(j)).abs();
            denom += naive_numerator(cfg, d, dm);
        }
        if denom > 0.0 {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = sites.site(i).distance(sites.site(j));
                let dm = (med(i) - med(j)).abs();
                w[(i, j)] = naive_numerator(cfg, d, dm) / denom;
            }
        } else {
            // Uniform fallback over the k nearest neighbors.
            for j in naive_knn(sites, sites.site(i).coords(), Some(i), cfg.k) {
                w[(i, j)] = 1.0 / cfg.k as f64;
            }
        }
    }
    w
}

/// Solve a tiny symmetric system by Gauss-Jordan elimination.
fn naive_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = a.nrows();
    let mut m = DMatrix::zeros(p, p + 1);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = a[(i, j)];
        }
        m[(i, p)] = b[i];
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r1, &r2| m[(r1, col)].abs().partial_cmp(&m[(r2, col)].abs()).unwrap())
            .unwrap();
        m.swap_rows(col, pivot);
        let scale = m[(col, col)];
        for j in col..=p {
            m[(col, j)] /= scale;
        }
        for row in 0..p {
            if row != col {
                let factor = m[(row, col)];
                for j in col..=p {
                    m[(row, j)] -= factor * m[(col, j)];
                }
            }
        }
    }
    DVector::from_fn(p, |i, _| m[(i, p)])
}

#[test]
fn criterion_1_pipeline_matches_naive_oracles() {
    let start = std::time::Instant::now();
    let mut max_dev: f64 = 0.0;
    for case in 0..100u64 {
        let mut rng = seeded_rng(derive_seed(0xC1, case));
        let n = rng.random_range(8..=12);
        let p = rng.random_range(1..=3);
        let k = rng.random_range(1..=3.min(n - 1));
        let variant = WeightVariant::ALL[(case % 4) as usize];
        let h1 = rng.random_range(0.3..1.5);
        let h2 = rng.random_range(0.5..2.0);
        let cfg = BandwidthConfig {
            variant,
            h1,
            h2,
            k,
            kernel: KernelKind::TruncatedLinear,
        };

        let sites = generate_sites(GridDesign::Irregular, n, derive_seed(0x51, case)).unwrap();
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        let data = SpatialDataset::new(sites.clone(), y.clone(), x.clone(), k).unwrap();

        // Oracle: neighborhood matrix from brute-force neighbor sort.
        let t_oracle = DMatrix::from_fn(n, k, |i, j| {
            y[naive_knn(&sites, sites.site(i).coords(), Some(i), k)[j]]
        });
        assert_eq!(data.t(), &t_oracle, "case {case}: neighborhood matrix");

        // Oracle: weights, partial residuals, coefficients, spatial term.
        let w = naive_weight_matrix(&sites, &t_oracle, &cfg);
        let mut ytilde = DVector::zeros(n);
        let mut xtilde = DMatrix::zeros(n, p);
        for i in 0..n {
            let mut wy = 0.0;
            for j in 0..n {
                wy += w[(i, j)] * y[j];
            }
            ytilde[i] = y[i] - wy;
            for c in 0..p {
                let mut wx = 0.0;
                for j in 0..n {
                    wx += w[(i, j)] * x[(j, c)];
                }
                xtilde[(i, c)] = x[(i, c)] - wx;
            }
        }
        let beta_oracle = naive_solve(&(xtilde.transpose() * &xtilde), &(xtilde.transpose() * &ytilde));
        let mut r_oracle = DVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let resid = y[j]
                    - (0..p).map(|c| x[(j, c)] * beta_oracle[c]).sum::<f64>();
                r_oracle[i] += w[(i, j)] * resid;
            }
        }

        let res = fit(&data, &cfg).unwrap();
        let beta_dev = (res.beta_hat.clone() - &beta_oracle).amax();
        let r_dev = (res.r_hat.clone() - &r_oracle).amax();

        // Oracle: prediction at a fresh target.
        let target = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let x0: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let nn0 = naive_knn(&sites, target, None, k);
        let t0: Vec<f64> = nn0.iter().map(|&j| y[j]).collect();
        let med0 = median(&t0).unwrap();
        let mut nums = vec![0.0; n];
        let mut denom = 0.0;
        for j in 0..n {
            let d = ((sites.site(j).x - target[0]).powi(2)
                + (sites.site(j).y - target[1]).powi(2))
            .sqrt();
            if d == 0.0 {
                continue;
            }
            let rowj: Vec<f64> = t_oracle.row(j).iter().copied().collect();
            let dm = (med0 - median(&rowj).unwrap()).abs();
            nums[j] = naive_numerator(&cfg, d, dm);
            denom += nums[j];
        }
        let w0: Vec<f64> = if denom > 0.0 {
            nums.iter().map(|v| v / denom).collect()
        } else {
            let mut w0 = vec![0.0; n];
            for j in naive_knn(&sites, target, None, k) {
                w0[j] = 1.0 / k as f64;
            }
            w0
        };
        let mut pred_oracle: f64 = (0..p).map(|c| x0[c] * beta_oracle[c]).sum();
        for j in 0..n {
            let resid = y[j] - (0..p).map(|c| x[(j, c)] * beta_oracle[c]).sum::<f64>();
            pred_oracle += w0[j] * resid;
        }
        let pred = predict(&x0, target, &data, &res).unwrap();
        let pred_dev = (pred - pred_oracle).abs();

        max_dev = max_dev.max(beta_dev).max(r_dev).max(pred_dev);
        assert!(
            beta_dev < 1e-10 && r_dev < 1e-10 && pred_dev < 1e-10,
            "case {case}: deviations beta {beta_dev:.2e}, r {r_dev:.2e}, pred {pred_dev:.2e}"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "oracle comparison took {elapsed:?}"
    );
    pass(
        "criterion 1 (oracle equivalence)",
        &format!("100 instances, max deviation {max_dev:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_2_weight_invariants_hold_over_random_draws() {
    let start = std::time::Instant::now();
    let mut fallbacks = 0usize;
    for case in 0..1000u64 {
        let mut rng = seeded_rng(derive_seed(0xC2, case));
        let n = rng.random_range(4..=40);
        let k = rng.random_range(1..=8.min(n - 1));
        let variant = WeightVariant::ALL[(case % 4) as usize];
        let cfg = BandwidthConfig {
            variant,
            h1: rng.random_range(0.02f64..2.0),
            h2: rng.random_range(0.02f64..2.0),
            k,
            kernel: KernelKind::TruncatedLinear,
        };
        let design = match case % 3 {
            0 => GridDesign::Irregular,
            1 => GridDesign::Clustered,
            _ => GridDesign::Irregular,
        };
        let sites = generate_sites(design, n, derive_seed(0x52, case)).unwrap();
        let t = DMatrix::from_fn(n, k, |_, _| rng.random_range(-3.0..3.0));
        let w = weight_matrix(&sites, &t, &cfg, WeightMode::Lenient).unwrap();
        fallbacks += w.fallback_rows().len();
        for i in 0..n {
            assert_eq!(w.values()[(i, i)], 0.0, "case {case}: diagonal at {i}");
            let mut sum = 0.0;
            for j in 0..n {
                let v = w.values()[(i, j)];
                assert!(v >= 0.0, "case {case}: negative weight at ({i},{j})");
                sum += v;
            }
            assert!(
                (sum - 1.0).abs() < 1e-10,
                "case {case}: row {i} sums to {sum}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "weight draws took {elapsed:?}");
    pass(
        "criterion 2 (weight invariants)",
        &format!("1000 draws across 4 variants, {fallbacks} fallback rows, {elapsed:?}"),
    );
}

#[test]
fn criterion_3_sinc_bessel_form_equals_closed_form() {
    let start = std::time::Instant::now();
    let model = CovModel::sinc();
    let discount = model.partial_sill / (model.partial_sill + model.nugget);
    let mut max_dev: f64 = 0.0;
    for i in 1..=10_000 {
        let h = i as f64 * 5.0 / 10_000.0;
        let bessel = model.correlation(h).unwrap();
        let closed = discount * (model.range / h) * (h / model.range).sin();
        max_dev = max_dev.max((bessel - closed).abs());
    }
    let elapsed = start.elapsed();
    assert!(max_dev < 1e-10, "max deviation {max_dev:.2e}");
    assert!(elapsed.as_secs_f64() < 1.0, "sinc check took {elapsed:?}");
    pass(
        "criterion 3 (sinc identity)",
        &format!("10000 lags in (0, 5], max deviation {max_dev:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_4_sar_generator_matches_dense_inversion() {
    let mut max_dev: f64 = 0.0;
    for case in 0..50u64 {
        let mut rng = seeded_rng(derive_seed(0xC4, case));
        let n = rng.random_range(5..=8);
        let p = rng.random_range(1..=3);
        let sites = generate_sites(GridDesign::Irregular, n, derive_seed(0x54, case)).unwrap();
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        let v = build_v(&sites, rng.random_range(0.4..1.2)).unwrap();
        let rho = if case % 5 == 0 {
            0.0
        } else {
            rng.random_range(0.1..0.9)
        };
        let resp = simulate_response(&x, &v, rho, 10.0, derive_seed(0x55, case)).unwrap();

        let direct = &x * &resp.beta_true + &resp.eps;
        if rho == 0.0 {
            assert_eq!(resp.y, direct, "case {case}: rho = 0 must be exact");
            continue;
        }
        let a = DMatrix::identity(n, n) - rho * v.values();
        let oracle = a.try_inverse().unwrap() * direct;
        let dev = (resp.y.clone() - oracle).amax();
        max_dev = max_dev.max(dev);
        assert!(dev < 1e-10, "case {case}: deviation {dev:.2e}");
    }
    pass(
        "criterion 4 (autoregressive generator)",
        &format!("50 instances, max deviation {max_dev:.2e}; rho = 0 exact"),
    );
}

// ---------------------------------------------------------------------
// Published-table cells. One realization is simulated per cell and
// re-split per replication; aggregate dispersion is split noise, the
// convention the published means and standard deviations follow.
// ---------------------------------------------------------------------

fn table_cell(
    design: GridDesign,
    n: usize,
    rho: f64,
    method: Method,
    reps: usize,
    seed: u64,
) -> (f64, f64) {
    let cfg = ExperimentConfig {
        source: ExperimentSource::SimulateOnce(SimConfig::standard(design, n, rho, seed)),
        methods: vec![method],
        replications: reps,
        train_frac: 0.7,
        search: SearchSpace::default_for(WeightVariant::K2ME),
        master_seed: seed,
    };
    let summary = run_experiment(&cfg).unwrap();
    assert!(
        summary.failures.is_empty(),
        "{method} failed on {} replications",
        summary.failures.len()
    );
    let agg = &summary.aggregates[0];
    (agg.mae_mean.unwrap(), agg.mae_sd.unwrap())
}

#[test]
fn criterion_5_table_cells_fall_inside_published_bands() {
    // rho = 0, regular, n = 625, K1M: published 0.16 (0.05).
    let (mae, sd) = table_cell(GridDesign::Regular, 625, 0.0, Method::K1M, 50, 1);
    assert!(
        (0.06..=0.26).contains(&mae),
        "K1M cell: mae {mae:.4} outside [0.06, 0.26]"
    );
    let detail_a = format!("K1M rho=0 regular n=625: {mae:.4} ({sd:.4}) in [0.06, 0.26]");

    // rho = 0.9, regular, n = 1089, K2ME: published 0.20 (0.05).
    let (mae, sd) = table_cell(GridDesign::Regular, 1089, 0.9, Method::K2ME, 20, CELL2_SEED);
    assert!(
        (0.10..=0.30).contains(&mae),
        "K2ME cell: mae {mae:.4} outside [0.10, 0.30]"
    );
    let detail_b = format!("K2ME rho=0.9 regular n=1089: {mae:.4} ({sd:.4}) in [0.10, 0.30]");

    // rho = 0.6, clustered, n = 625, OLS: published 2.46 (0.19).
    let (mae, sd) = table_cell(GridDesign::Clustered, 625, 0.6, Method::Ols, 50, 20);
    assert!(
        (2.08..=2.84).contains(&mae),
        "OLS cell: mae {mae:.4} outside [2.08, 2.84]"
    );
    let detail_c = format!("OLS rho=0.6 clustered n=625: {mae:.4} ({sd:.4}) in [2.08, 2.84]");

    pass("criterion 5 (table cells)", &detail_a);
    pass("criterion 5 (table cells)", &detail_b);
    pass("criterion 5 (table cells)", &detail_c);
}

const CELL2_SEED: u64 = 13;

#[test]
fn criterion_6_directional_claims() {
    // (a) rho = 0.9, regular, n = 100: mean test RMSE of K2ME below OLS.
    let sim = SimConfig::standard(GridDesign::Regular, 100, 0.9, 66);
    let cfg = ExperimentConfig {
        source: ExperimentSource::Simulate(sim),
        methods: vec![Method::K2ME, Method::Ols],
        replications: 20,
        train_frac: 0.7,
        search: SearchSpace::default_for(WeightVariant::K2ME),
        master_seed: 66,
    };
    let summary = run_experiment(&cfg).unwrap();
    let mean = |m: Method| {
        summary
            .aggregates
            .iter()
            .find(|a| a.method == m)
            .unwrap()
            .rmse_mean
    };
    let (k2me, ols) = (mean(Method::K2ME), mean(Method::Ols));
    assert!(
        k2me < ols,
        "mean test RMSE: K2ME {k2me:.4} not below OLS {ols:.4}"
    );
    pass(
        "criterion 6a (RMSE direction)",
        &format!("rho=0.9 regular n=100: K2ME {k2me:.4} < OLS {ols:.4}"),
    );

    // (b) median coefficient error of K2ME falls across n at rho = 0.9.
    let mut medians = Vec::new();
    for n in [100usize, 625, 1089] {
        let sim = SimConfig::standard(GridDesign::Regular, n, 0.9, 77);
        let cfg = ExperimentConfig {
            source: ExperimentSource::Simulate(sim),
            methods: vec![Method::K2ME],
            replications: 20,
            train_frac: 0.7,
            search: SearchSpace::default_for(WeightVariant::K2ME),
            master_seed: 77,
        };
        let summary = run_experiment(&cfg).unwrap();
        let mut maes: Vec<f64> = summary
            .records
            .iter()
            .filter_map(|r| r.mae_beta)
            .collect();
        assert!(maes.len() >= 15, "too many failures at n = {n}");
        maes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(maes[maes.len() / 2]);
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "medians not decreasing: {medians:?}"
    );
    pass(
        "criterion 6b (coefficient-error trend)",
        &format!(
            "K2ME rho=0.9 regular medians: {:.4} > {:.4} > {:.4}",
            medians[0], medians[1], medians[2]
        ),
    );
}

#[test]
fn criterion_7_spatial_term_estimate_converges() {
    // Generative model with a known smooth spatial term: the response
    // solves Y_i = X_i' beta + 0.5 sin(median(T_i)) + eps_i exactly (by
    // fixed-point iteration; the map is a sup-norm contraction).
    let smooth = |m: f64| 0.5 * m.sin();
    let k = 6;
    let beta = DVector::from_vec(vec![1.5, -2.0]);

    let max_error = |n: usize, rep: u64| -> f64 {
        let seed = derive_seed(0xC7, rep);
        let sites = generate_sites(GridDesign::Regular, n, 0).unwrap();
        let mut rng = seeded_rng(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.5..1.5));
        let eps = DVector::from_fn(n, |_, _| rng.random_range(-0.1..0.1));
        let base = &x * &beta + &eps;

        let nn = semisar::grid::knn(&sites, k).unwrap();
        let mut y = base.clone();
        for _ in 0..200 {
            let mut next = base.clone();
            for i in 0..n {
                let t: Vec<f64> = nn.row(i).iter().map(|&j| y[j]).collect();
                next[i] += smooth(median(&t).unwrap());
            }
            let delta = (&next - &y).amax();
            y = next;
            if delta < 1e-13 {
                break;
            }
        }
        let data = SpatialDataset::new(sites, y, x, k).unwrap();

        let space = SearchSpace::new(
            &[1.0],
            &[0.05, 0.1, 0.2, 0.4, 0.8],
            &[k],
            WeightVariant::K1ME,
            CvMode::KFold(5),
        )
        .unwrap();
        let sel = semisar::selection::cv_select(&data, &space, derive_seed(seed, 9)).unwrap();
        let res = fit(&data, &sel.best).unwrap();

        let mut worst: f64 = 0.0;
        for i in 0..n {
            let t: Vec<f64> = data.t().row(i).iter().copied().collect();
            let truth = smooth(median(&t).unwrap());
            worst = worst.max((res.r_hat[i] - truth).abs());
        }
        worst
    };

    let median_of = |n: usize| -> f64 {
        let mut vals: Vec<f64> = (0..20).map(|rep| max_error(n, rep)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals[vals.len() / 2]
    };

    let at_100 = median_of(100);
    let at_625 = median_of(625);
    assert!(
        at_625 < at_100,
        "median max spatial-term error did not fall: {at_625:.4} at n=625 vs {at_100:.4} at n=100"
    );
    pass(
        "criterion 7 (spatial-term convergence)",
        &format!("median max error {at_100:.4} at n=100 -> {at_625:.4} at n=625"),
    );
}

#[test]
fn criterion_8_experiment_pipeline_is_deterministic() {
    // Byte-level determinism of every CLI command is exercised in the CLI
    // crate's acceptance suite; here the underlying pipeline must be
    // bitwise reproducible under identical seeds.
    let sim = SimConfig::standard(GridDesign::Clustered, 64, 0.6, 808);
    let cfg = ExperimentConfig {
        source: ExperimentSource::Simulate(sim),
        methods: vec![Method::K2ME, Method::Sar],
        replications: 3,
        train_frac: 0.7,
        search: SearchSpace::new(
            &[0.2, 0.5],
            &[0.5, 1.0],
            &[4],
            WeightVariant::K2ME,
            CvMode::KFold(3),
        )
        .unwrap(),
        master_seed: 808,
    };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.test_rmse.to_bits(), y.test_rmse.to_bits());
        assert_eq!(x.mae_beta.map(f64::to_bits), y.mae_beta.map(f64::to_bits));
        assert_eq!(x.config, y.config);
    }
    pass(
        "criterion 8 (determinism)",
        "replicated experiment is bitwise reproducible under a fixed seed",
    );
}

#[test]
fn conditional_real_data_protocol_is_exposed() {
    // The real-data reproduction is conditional on a user-supplied file;
    // this check only exercises the fixed-dataset pathway end to end.
    let sites = generate_sites(GridDesign::Irregular, 80, 3).unwrap();
    let field = simulate_covariates(&sites, 3, 4).unwrap();
    let v = build_v(&sites, 0.5).unwrap();
    let resp = simulate_response(&field.values, &v, 0.6, 10.0, 5).unwrap();
    let data = SpatialDataset::new(sites, resp.y, field.values, 4).unwrap();
    let cfg = ExperimentConfig {
        source: ExperimentSource::Fixed(data),
        methods: vec![Method::K2ME, Method::Ols],
        replications: 5,
        train_frac: 0.7,
        search: SearchSpace::new(
            &[0.2, 0.5],
            &[0.5, 1.0],
            &[4],
            WeightVariant::K2ME,
            CvMode::KFold(5),
        )
        .unwrap(),
        master_seed: 6,
    };
    let summary = run_experiment(&cfg).unwrap();
    assert_eq!(summary.records.len(), 10);
    assert!(summary.records.iter().all(|r| r.test_rmse.is_finite()));
    pass(
        "conditional (fixed-dataset protocol)",
        "70/30 replicated splits run end to end on a fixed dataset",
    );
}
