//! Acceptance suite: pins every headline claim of the library at a fixed
//! tolerance. Analytic probabilities and bound values are checked against
//! independently derived high-precision references, Monte Carlo
//! frequencies against their closed forms, the path solver against the
//! orthonormal closed form, and the experiment runner against its
//! determinism contract.
//!
//! One test, `bound_conservatism_grows_with_dimension_at_high_snr`, is
//! expected to fail; it documents a measured direction that contradicts
//! what the bound curves alone would suggest. See its comment.

use lassopt::{
    bound_compat, bound_ratio_curve, bound_re, coverage_of_a, coverage_of_t, fit_path,
    gen_trig_design, kkt_max_violation, optimal_multi, optimal_single, oracle_grid_min,
    parse_config, replicate_stream, run_experiment, soft_threshold, solve_a, solve_t, table1,
    wilcoxon_signed_rank, wilcoxon_signed_rank_with_limit, write_outputs, BoundKind, BoundParams,
    ExperimentResult, FitConfig, GeneratingModel, LambdaGrid, OrthoInstance, RngStream,
    StreamPurpose, TailPolicy,
};
use rayon::prelude::*;
use std::time::Instant;

fn run(cfg: &str) -> ExperimentResult {
    let config = parse_config(cfg).expect("config parses");
    run_experiment(&config).expect("experiment runs")
}

/// Summary row whose listed columns hold exactly the listed values.
fn summary_row<'a>(result: &'a ExperimentResult, keys: &[(usize, f64)]) -> &'a [f64] {
    result
        .summary_rows
        .iter()
        .find(|row| keys.iter().all(|&(col, v)| row[col] == v))
        .unwrap_or_else(|| panic!("no summary row matching {keys:?}"))
}

#[track_caller]
fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tolerance {tol})"
    );
}

/// Closed-form deterioration probabilities over the balanced factorial
/// grid (interaction orders 1..4, main-effect counts 2..10) match
/// high-precision references to 1e-12, and round to the published
/// four-decimal figures. The whole grid is closed-form arithmetic and
/// must finish well under a second.
#[test]
fn analytic_probability_grid_matches_frozen_references() {
    // (predictor count, probability) per cell; None where the order
    // exceeds the number of main effects. References computed with
    // 50-digit arithmetic from Phi(3) - 1/(2p).
    const REFERENCE: [[Option<(u64, f64)>; 5]; 4] = [
        [
            Some((2, 0.748650101968369905)),
            Some((4, 0.873650101968369905)),
            Some((6, 0.915316768635036572)),
            Some((8, 0.936150101968369905)),
            Some((10, 0.948650101968369905)),
        ],
        [
            Some((3, 0.831983435301703239)),
            Some((10, 0.948650101968369905)),
            Some((21, 0.974840578158846096)),
            Some((36, 0.984761213079481017)),
            Some((55, 0.989559192877460815)),
        ],
        [
            None,
            Some((14, 0.962935816254084191)),
            Some((41, 0.986454980017150393)),
            Some((92, 0.993215319359674253)),
            Some((175, 0.995792959111227048)),
        ],
        [
            None,
            Some((15, 0.965316768635036572)),
            Some((56, 0.989721530539798477)),
            Some((162, 0.995563682215283486)),
            Some((385, 0.997351400669668607)),
        ],
    ];

    let start = Instant::now();
    let grid = table1(3.0, 1.0).expect("probability grid");
    let mut populated = 0;
    for (i, row) in REFERENCE.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            match *cell {
                None => {
                    assert!(grid.cells[i][j].is_none(), "cell ({i}, {j}) should be empty");
                    assert!(grid.dims[i][j].is_none(), "dims ({i}, {j}) should be empty");
                }
                Some((p, prob)) => {
                    populated += 1;
                    assert_eq!(
                        grid.dims[i][j],
                        Some(p),
                        "predictor count at cell ({i}, {j})"
                    );
                    let got = grid.cells[i][j].expect("populated cell");
                    assert_close(got, prob, 1e-12, &format!("probability at cell ({i}, {j})"));
                    assert_eq!(
                        format!("{got:.4}"),
                        format!("{prob:.4}"),
                        "four-decimal rounding at cell ({i}, {j})"
                    );
                }
            }
        }
    }
    assert_eq!(populated, 18);

    // Spot figures at four decimals: main effects with 2 factors,
    // two-way with 4, four-way with 10.
    assert_eq!(format!("{:.4}", grid.cells[0][0].unwrap()), "0.7487");
    assert_eq!(format!("{:.4}", grid.cells[1][1].unwrap()), "0.9487");
    assert_eq!(format!("{:.4}", grid.cells[3][4].unwrap()), "0.9974");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "grid took {elapsed:.3} s, budget is 1 s");
}

const MC_CONFIG: &str = "kind = mc-theorem-check\n\
    p_grid = 2, 10, 50\n\
    beta1 = 3\n\
    sigma2_grid = 1\n\
    replicates = 10000\n\
    master_seed = 42\n";

/// Phi(3) - 1/(2p) at p in {2, 10, 50}, to 16 digits.
const MC_UNCONDITIONAL: [(usize, f64); 3] = [
    (2, 0.7486501019683699),
    (10, 0.9486501019683699),
    (50, 0.9886501019683699),
];

/// 1 - 1/(2 p Phi(3)) at the same p.
const MC_CONDITIONAL: [(usize, f64); 3] = [
    (2, 0.7496620693201329),
    (10, 0.9499324138640266),
    (50, 0.9899864827728053),
];

/// Monte Carlo deterioration frequency (signal 3, unit noise, 10^4
/// replicates) lands within 0.01, about three binomial standard errors,
/// of the closed form Phi(3) - 1/(2p) at every p. The run must finish
/// within a minute.
#[test]
fn deterioration_frequency_matches_closed_form() {
    let start = Instant::now();
    let result = run(MC_CONFIG);
    for &(p, analytic) in &MC_UNCONDITIONAL {
        let row = summary_row(&result, &[(0, p as f64)]);
        assert_eq!(row[2], 10000.0, "replicate count at p = {p}");
        // The summary's own analytic column must be the closed form, not
        // an echo of the empirical value.
        assert_close(row[8], analytic, 1e-12, &format!("analytic column at p = {p}"));
        assert_close(row[3], analytic, 0.01, &format!("empirical frequency at p = {p}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "run took {elapsed:.1} s, budget is 60 s");
}

/// The deterioration frequency conditional on the noisy signal
/// coordinate keeping its sign lands within 0.01 of the closed form
/// 1 - 1/(2 p Phi(3)) at every p.
#[test]
fn conditional_deterioration_frequency_matches_closed_form() {
    let result = run(MC_CONFIG);
    for &(p, analytic) in &MC_CONDITIONAL {
        let row = summary_row(&result, &[(0, p as f64)]);
        assert_close(row[9], analytic, 1e-12, &format!("analytic column at p = {p}"));
        assert_close(row[5], analytic, 0.01, &format!("conditional frequency at p = {p}"));
    }
}

/// The exact optimizer never loses to a dense grid search over the
/// penalty (10^6 points), the grid comes within 1e-4 of the exact
/// minimum, and the deterioration verdict agrees with a direct
/// comparison of the exact p-coordinate and single-coordinate optima,
/// on 10^4 random instances with p up to 20 and |z_j| up to 10.
#[test]
fn exact_optimizer_dominates_dense_grid_oracle() {
    (0..10_000u64).into_par_iter().for_each(|r| {
        let mut rng = RngStream::new(1729, r);
        let p = 1 + rng.index(20);
        let mut z = Vec::with_capacity(p);
        for _ in 0..p {
            z.push(20.0 * rng.uniform() - 10.0);
        }
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        let beta1 = sign * (0.01 + 5.99 * rng.uniform());
        let inst = OrthoInstance::new(beta1, z, 1, 1.0).expect("valid instance");

        let multi = optimal_multi(&inst).expect("exact optimum");
        let (_, grid_loss) = oracle_grid_min(&inst, 1_000_000).expect("grid oracle");
        assert!(
            multi.n_loss <= grid_loss + 1e-9 * (1.0 + grid_loss),
            "instance {r}: exact loss {} above grid loss {}",
            multi.n_loss,
            grid_loss
        );
        assert!(
            grid_loss - multi.n_loss <= 1e-4,
            "instance {r}: grid loss {} strays {} from exact {}",
            grid_loss,
            grid_loss - multi.n_loss,
            multi.n_loss
        );

        let single = optimal_single(beta1, inst.z[0]).expect("baseline optimum");
        assert!(
            multi.n_loss >= single.n_loss - 1e-9 * (1.0 + single.n_loss),
            "instance {r}: adding noise coordinates lowered the optimal loss"
        );
        // Verdict versus direct comparison; losses within the float
        // margin count as a tie, and a tie is not a deterioration.
        let margin = 1e-12 * (1.0 + single.n_loss);
        if multi.n_loss > single.n_loss + margin {
            assert!(
                multi.deteriorated,
                "instance {r}: loss rose from {} to {} but the verdict says no deterioration",
                single.n_loss, multi.n_loss
            );
        } else {
            assert!(
                !multi.deteriorated,
                "instance {r}: verdict claims deterioration but losses are {} vs {}",
                single.n_loss, multi.n_loss
            );
        }
    });
}

/// Coordinate-descent path solutions on a unit-norm trigonometric
/// design agree with the soft-threshold closed form at every penalty on
/// the grid to 1e-6, and every solution passes the optimality
/// certificate, across 100 noisy replicates.
#[test]
fn path_solver_matches_soft_threshold_on_orthonormal_design() {
    let raw = gen_trig_design(100, 100, false).expect("raw design");
    let design = gen_trig_design(100, 100, true).expect("unit-norm design");
    let model = GeneratingModel::from_dense(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0], 4.0).expect("model");
    let mu = model.mu(&raw).expect("mean vector");
    let config = FitConfig {
        intercept: false,
        standardize: false,
        grid: LambdaGrid::Log {
            count: 100,
            min_ratio: 1e-4,
        },
        tol: 1e-8,
        max_sweeps: 100_000,
    };

    let sigma = 2.0;
    let mut worst_coef: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    for r in 0..100u64 {
        let mut noise = RngStream::new(42, replicate_stream(r, StreamPurpose::TrainingNoise));
        let y: Vec<f64> = mu
            .iter()
            .map(|&m| m + sigma * noise.standard_normal())
            .collect();
        let z: Vec<f64> = (0..design.p())
            .map(|j| design.column_dot(j, &y))
            .collect();
        let path = fit_path(&design, &y, &config).expect("path fits");
        for (k, &lambda) in path.lambdas.iter().enumerate() {
            for (j, &zj) in z.iter().enumerate() {
                let closed = soft_threshold(zj, lambda).expect("soft threshold");
                worst_coef = worst_coef.max((path.coefs[k][j] - closed).abs());
            }
            let viol = kkt_max_violation(&design, &y, &config, lambda, &path.coefs[k])
                .expect("certificate evaluates");
            worst_kkt = worst_kkt.max(viol);
        }
    }
    assert!(
        worst_coef <= 1e-6,
        "worst coefficient deviation from the closed form is {worst_coef:e}"
    );
    assert!(
        worst_kkt <= 1e-6,
        "worst optimality-certificate violation is {worst_kkt:e}"
    );
}

const HIGH_SNR_CONFIG: &str = "kind = ortho-ratio-vs-p\n\
    n = 100\n\
    p_grid = 6, 20, 50, 100\n\
    sigma2_grid = 4\n\
    replicates = 500\n\
    master_seed = 42\n";

/// With a six-coordinate signal on n = 100 at sigma2 = 4, the median
/// optimally tuned loss ratio rises strictly with the number of offered
/// predictors and exceeds 4 at p = 100. The rows must not depend on the
/// solver's penalty grid because the optimum is located in closed form.
#[test]
fn high_snr_loss_ratio_grows_and_exceeds_four() {
    let start = Instant::now();
    let result = run(HIGH_SNR_CONFIG);
    let medians: Vec<f64> = [6.0, 20.0, 50.0, 100.0]
        .iter()
        .map(|&p| summary_row(&result, &[(1, p), (2, 4.0)])[4])
        .collect();
    assert_eq!(medians[0], 1.0, "ratio at the reference dimension");
    for pair in medians.windows(2) {
        assert!(
            pair[1] > pair[0],
            "median ratio is not strictly increasing: {medians:?}"
        );
    }
    assert!(
        medians[3] >= 4.0,
        "median ratio at p = 100 is {}, expected at least 4",
        medians[3]
    );

    let denser = run(&format!("{HIGH_SNR_CONFIG}lambda_count = 200\n"));
    assert_eq!(
        result.rows, denser.rows,
        "changing the solver grid moved closed-form results"
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "run took {elapsed:.1} s, budget is 300 s");
}

/// Tail-parameter inversions, their coverage round trips, the two bound
/// values at (n, p, p0, sigma2) = (100, 100, 6, 4), and the implied
/// dimension-growth ratios all match high-precision references.
#[test]
fn bound_inversions_and_implied_ratio_match_references() {
    let t = solve_t(0.95).expect("t inversion");
    assert_close(t, 2.71621, 1e-4, "t at 95 percent coverage");
    assert_close(t, 2.716203031481239, 1e-12, "t, high precision");
    let a = solve_a(0.95, 100).expect("A inversion");
    assert_close(a, 3.6337, 1e-4, "A at 95 percent coverage, p = 100");
    assert_close(a, 3.6337473746335098, 1e-12, "A, high precision");

    for &c in &[0.5, 0.9, 0.95, 0.99, 0.999, 0.9999] {
        let tc = solve_t(c).expect("t inversion");
        assert_close(coverage_of_t(tc), c, 1e-12, "t coverage round trip");
        for &p in &[10usize, 100, 1000] {
            let ac = solve_a(c, p).expect("A inversion");
            assert_close(
                coverage_of_a(ac, p),
                c,
                1e-12,
                &format!("A coverage round trip at p = {p}"),
            );
        }
    }

    let mut params = BoundParams::new(100, 100, 6, 4.0).expect("params");
    params.t = t;
    params.a = a;
    assert_close(
        bound_compat(&params).expect("compatibility bound"),
        254.79320494393429,
        1e-9,
        "compatibility bound value",
    );
    assert_close(
        bound_re(&params).expect("restricted-eigenvalue bound"),
        233.49972355713277,
        1e-9,
        "restricted-eigenvalue bound value",
    );

    let compat = bound_ratio_curve(
        BoundKind::Compat,
        100,
        &[100],
        6,
        4.0,
        1.0,
        1.0,
        0.95,
        TailPolicy::FixedCoverage,
    )
    .expect("compatibility curve");
    assert_close(compat[0].ratio, 1.513, 1e-3, "implied growth ratio");
    assert_close(
        compat[0].ratio,
        1.5133362653718612,
        1e-12,
        "implied growth ratio, high precision",
    );
    let re = bound_ratio_curve(
        BoundKind::RestrictedEigenvalue,
        100,
        &[100],
        6,
        4.0,
        1.0,
        1.0,
        0.95,
        TailPolicy::FixedCoverage,
    )
    .expect("restricted-eigenvalue curve");
    assert_close(
        re[0].ratio,
        1.5876586045295491,
        1e-12,
        "implied growth ratio, restricted-eigenvalue route",
    );
}

const BOUND_CONFIG: &str = "kind = bound-conservatism\n\
    n = 100\n\
    p_grid = 6, 20, 50, 100\n\
    sigma2_grid = 4, 400\n\
    replicates = 500\n\
    master_seed = 42\n\
    coverage = 0.95\n";

/// At 95 percent nominal coverage the tuned loss stays below both
/// oracle bounds in at least 95 percent of replicates in every cell (in
/// practice essentially all of them), and the compatibility bound's
/// conservatism at p = 100 grows when the noise level does.
#[test]
fn tuned_losses_stay_within_oracle_bounds() {
    let result = run(BOUND_CONFIG);
    assert_eq!(result.summary_rows.len(), 8);
    for row in &result.summary_rows {
        assert!(
            row[7] >= 0.95,
            "compatibility bound holds in only {:.3} of replicates at p = {}, sigma2 = {}",
            row[7],
            row[1],
            row[2]
        );
        assert!(
            row[8] >= 0.95,
            "restricted-eigenvalue bound holds in only {:.3} of replicates at p = {}, sigma2 = {}",
            row[8],
            row[1],
            row[2]
        );
    }
    let low_noise = summary_row(&result, &[(1, 100.0), (2, 4.0)])[9];
    let high_noise = summary_row(&result, &[(1, 100.0), (2, 400.0)])[9];
    assert!(
        high_noise > low_noise,
        "conservatism at p = 100 should grow with the noise level, got {low_noise:.1} at \
         sigma2 = 4 vs {high_noise:.1} at sigma2 = 400"
    );
}

/// Documents a directional discrepancy, and is expected to fail. Both
/// oracle bounds grow like t^2 + 2 log p, so if the tuned loss tracked
/// them, conservatism (bound over median tuned loss) would grow with p
/// at a fixed noise level. The simulation shows the opposite: the
/// median tuned loss grows faster than log p, so the bound gets tighter
/// relative to the realized loss as predictors are added. The assertion
/// below states the direction the bound curves alone would suggest;
/// the failure message carries the measured values.
#[test]
fn bound_conservatism_grows_with_dimension_at_high_snr() {
    let result = run(BOUND_CONFIG);
    let at_20 = summary_row(&result, &[(1, 20.0), (2, 4.0)])[9];
    let at_100 = summary_row(&result, &[(1, 100.0), (2, 4.0)])[9];
    assert!(
        at_100 > at_20,
        "compatibility-bound conservatism fell from {at_20:.1} at p = 20 to {at_100:.1} at \
         p = 100 (sigma2 = 4): the median tuned loss grows faster with p than the bound's \
         t^2 + 2 log p, so adding predictors tightens the bound relative to the realized loss"
    );
}

const REFIT_CONFIG: &str = "kind = lasso-plus-ols\n\
    n = 100\n\
    p_grid = 100\n\
    sigma2_grid = 4, 400\n\
    replicates = 500\n\
    master_seed = 42\n";

/// Least-squares refitting on each selected support beats pure
/// shrinkage at its own optimal penalty when the signal dominates
/// (sigma2 = 4) and loses to it when noise dominates (sigma2 = 400),
/// with p = 100 predictors offered on n = 100 observations.
#[test]
fn refit_beats_lasso_at_high_snr_and_loses_at_low_snr() {
    let result = run(REFIT_CONFIG);
    let high_snr = summary_row(&result, &[(1, 100.0), (2, 4.0)]);
    assert!(
        high_snr[5] < high_snr[4],
        "at sigma2 = 4 the refit median {} should undercut the shrinkage median {}",
        high_snr[5],
        high_snr[4]
    );
    let low_snr = summary_row(&result, &[(1, 100.0), (2, 400.0)]);
    assert!(
        low_snr[5] > low_snr[4],
        "at sigma2 = 400 the refit median {} should exceed the shrinkage median {}",
        low_snr[5],
        low_snr[4]
    );
}

/// Five positive differences give the exact one-sided signed-rank
/// p-value 1/32 (bit-for-bit), and the tie-corrected normal
/// approximation with continuity correction stays within 0.01 of the
/// exact distribution at twenty pairs across 100 random datasets
/// spanning null and shifted alternatives.
#[test]
fn signed_rank_exact_five_pair_p_and_normal_agreement() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [0.0; 5];
    let out = wilcoxon_signed_rank(&x, &y, 0.05).expect("five pairs");
    assert!(out.exact, "five pairs must take the exact route");
    assert_eq!(out.n_effective, 5);
    assert_eq!(out.p_one_sided_greater, 0.03125);

    for d in 0..100u64 {
        let mut rng = RngStream::new(2024, d);
        let shift = [0.0, 0.25, 0.5, 1.0][(d % 4) as usize];
        let xs: Vec<f64> = (0..20).map(|_| rng.standard_normal() + shift).collect();
        let ys: Vec<f64> = (0..20).map(|_| rng.standard_normal()).collect();
        let exact = wilcoxon_signed_rank_with_limit(&xs, &ys, 0.05, 25).expect("exact route");
        assert!(exact.exact, "twenty pairs must fit the exact limit");
        let approx = wilcoxon_signed_rank_with_limit(&xs, &ys, 0.05, 0).expect("normal route");
        assert!(!approx.exact, "limit 0 must force the approximation");
        assert_close(
            approx.p_two_sided,
            exact.p_two_sided,
            0.01,
            &format!("two-sided p, dataset {d}"),
        );
        assert_close(
            approx.p_one_sided_greater,
            exact.p_one_sided_greater,
            0.01,
            &format!("one-sided greater p, dataset {d}"),
        );
        assert_close(
            approx.p_one_sided_less,
            exact.p_one_sided_less,
            0.01,
            &format!("one-sided less p, dataset {d}"),
        );
    }
}

/// Rerunning an experiment with the same seed under different rayon
/// pool sizes produces byte-identical rows.csv, summary.csv, and
/// metadata.json, for each computational route: exact trigonometric,
/// solver-based Gaussian, and decoupled Monte Carlo.
#[test]
fn experiment_csvs_are_byte_identical_across_thread_counts() {
    let configs = [
        "kind = ortho-ratio-vs-p\nn = 50\np_grid = 6, 50\nsigma2_grid = 4\nreplicates = 20\nmaster_seed = 7\n",
        "kind = gaussian-ratio-vs-p\nn = 24\nbeta0 = 3, -2\np_grid = 2, 6\nsigma2_grid = 1\nreplicates = 6\nmaster_seed = 7\nlambda_count = 25\n",
        "kind = mc-theorem-check\np_grid = 2\nbeta1 = 3\nsigma2_grid = 1\nreplicates = 200\nmaster_seed = 7\n",
    ];
    let dir = tempfile::tempdir().expect("tempdir");
    for (i, cfg) in configs.iter().enumerate() {
        let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
        for (v, threads) in [(0usize, Some(1)), (1, Some(4)), (2, None)] {
            let result = match threads {
                Some(k) => rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .expect("pool builds")
                    .install(|| run(cfg)),
                None => run(cfg),
            };
            let out = dir.path().join(format!("run_{i}_{v}"));
            write_outputs(&result, &out, false).expect("outputs write");
            let files: Vec<Vec<u8>> = ["rows.csv", "summary.csv", "metadata.json"]
                .iter()
                .map(|f| std::fs::read(out.join(f)).expect("file reads"))
                .collect();
            outputs.push(files);
        }
        for later in &outputs[1..] {
            assert_eq!(
                &outputs[0], later,
                "thread count changed the outputs of config {i}"
            );
        }
    }
}
