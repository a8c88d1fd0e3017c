//! Experiment drivers: deterministic, replicate-parallel simulation runs
//! producing long-form rows, per-setting summaries, and run metadata.
//!
//! Every run is reproducible from (config, master seed) alone: replicates
//! draw from their own counter-derived RNG streams, so results are
//! byte-identical at any thread count. Loss columns hold per-observation
//! values (squared error sums divided by n). Rows are emitted noise
//! variance outermost, then dimension, then replicate.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bounds::{bound_compat, bound_re, solve_a, solve_t, BoundParams};
use crate::config::{growing_reference_dim, ExperimentConfig, ExperimentKind};
use crate::design::{
    gaussian_design_from, gen_gaussian_design, gen_trig_design, Design, GeneratingModel,
};
use crate::error::{Error, Result};
use crate::ortho::{exact_loss_minimum, exact_refit_minimum};
use crate::path::{evaluate_path, fit_path, EvalTarget};
use crate::rng::{replicate_stream, RngStream, StreamPurpose};
use crate::stats::{binomial_std_error, mean, median};
use crate::theory::{
    mc_deterioration_draws, prob_deterioration, prob_deterioration_given_sign, table1,
    DeteriorationQuery, TABLE1_MAIN_COUNTS, TABLE1_ORDERS,
};

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub row_columns: Vec<String>,
    /// Long-form data, one row per (setting, replicate).
    pub rows: Vec<Vec<f64>>,
    pub summary_columns: Vec<String>,
    /// One row per setting.
    pub summary_rows: Vec<Vec<f64>>,
    /// Flat key/value run description, written as metadata.json.
    pub metadata: Vec<(String, String)>,
}

const ORTHO_COLS: &[&str] = &[
    "n", "p", "sigma2", "replicate", "loss_p", "loss_base", "ratio", "lambda_p", "lambda_base",
    "saturated",
];
const BOUND_COLS: &[&str] = &[
    "n", "p", "sigma2", "replicate", "loss_p", "bound_compat", "bound_re", "within_compat",
    "within_re",
];
const GROW_COLS: &[&str] = &[
    "n", "p_ref", "p_full", "sigma2", "replicate", "loss_ref", "loss_full", "ratio", "lambda_ref",
    "lambda_full", "saturated_full",
];
const REFIT_COLS: &[&str] = &[
    "n", "p", "sigma2", "replicate", "loss_lasso", "loss_refit", "ratio_refit", "support_refit",
    "lambda_lasso",
];
const GAUSS_COLS: &[&str] = &[
    "n", "p", "sigma2", "replicate", "loss_p", "loss_base", "ratio", "lambda_p", "lambda_base",
];
const MSE_COLS: &[&str] = &[
    "n", "test_n", "p", "sigma2", "replicate", "test_mse_p", "test_mse_base", "ratio", "lambda_p",
    "lambda_base",
];
const MC_COLS: &[&str] = &["p", "sigma2", "replicate", "deteriorated", "sign_match"];
const TABLE1_COLS: &[&str] = &["order", "main_effects", "predictors", "probability"];

/// Ratio with the empty-vs-empty convention: 0/0 compares two exact
/// recoveries and counts as parity, not an indeterminate.
fn loss_ratio(numer: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        if numer == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        numer / denom
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Reassemble per-replicate chunks (each holding one row per setting, in
/// setting order) into setting-major, replicate-minor row order.
fn interleave(mut chunks: Vec<Vec<Vec<f64>>>, cells: usize) -> Vec<Vec<f64>> {
    let reps = chunks.len();
    let mut rows = Vec::with_capacity(cells * reps);
    for c in 0..cells {
        for chunk in chunks.iter_mut() {
            debug_assert_eq!(chunk.len(), cells);
            rows.push(std::mem::take(&mut chunk[c]));
        }
    }
    rows
}

/// Design-side context for a trig run: the normalized design, the true
/// mean, and the true coefficients expressed on the normalized basis.
struct TrigParts {
    normalized: Design,
    mu: Vec<f64>,
    beta_tilde: Vec<f64>,
}

fn trig_parts(n: usize, p_max: usize, beta0: &[f64]) -> Result<TrigParts> {
    let raw = gen_trig_design(n, p_max, false)?;
    let norms = raw.column_norms();
    let model = GeneratingModel::from_dense(beta0, 1.0)?;
    let mu = model.mu(&raw)?;
    let beta_tilde = beta0.iter().zip(&norms).map(|(b, s)| b * s).collect();
    Ok(TrigParts {
        normalized: raw.normalized(),
        mu,
        beta_tilde,
    })
}

/// Ortho-ratio, bound-conservatism, and lasso-plus-ols share one driver:
/// identical draws and exact tuning, different row payloads.
fn run_trig(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let n = config.n;
    let p_max = *config.p_grid.last().expect("validated nonempty grid");
    let parts = trig_parts(n, p_max, &config.beta0)?;
    let nf = n as f64;

    // Bound overlays are per (sigma2, p) constants.
    let overlays: Option<Vec<Vec<(f64, f64)>>> =
        if config.kind == ExperimentKind::BoundConservatism {
            let t = solve_t(config.coverage)?;
            let mut per_sigma = Vec::with_capacity(config.sigma2_grid.len());
            for &sigma2 in &config.sigma2_grid {
                let mut per_p = Vec::with_capacity(config.p_grid.len());
                for &p in &config.p_grid {
                    let mut bp = BoundParams::new(n, p, config.p0, sigma2)?;
                    bp.psi0 = config.psi0;
                    bp.kappa = config.kappa;
                    bp.t = t;
                    bp.a = solve_a(config.coverage, p)?;
                    per_p.push((bound_compat(&bp)?, bound_re(&bp)?));
                }
                per_sigma.push(per_p);
            }
            Some(per_sigma)
        } else {
            None
        };

    let cells = config.sigma2_grid.len() * config.p_grid.len();
    let chunks: Vec<Vec<Vec<f64>>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let mut stream = RngStream::new(
                config.master_seed,
                replicate_stream(r, StreamPurpose::TrainingNoise),
            );
            let eps = stream.standard_normal_vec(n);
            let mut rows = Vec::with_capacity(cells);
            for (si, &sigma2) in config.sigma2_grid.iter().enumerate() {
                let sigma = sigma2.sqrt();
                let y: Vec<f64> = parts
                    .mu
                    .iter()
                    .zip(&eps)
                    .map(|(m, e)| m + sigma * e)
                    .collect();
                let z: Vec<f64> = (0..p_max)
                    .map(|j| parts.normalized.column_dot(j, &y))
                    .collect();
                let (lambda_base, nloss_base) =
                    exact_loss_minimum(&parts.beta_tilde, &z[..config.p0])?;
                let loss_base = nloss_base / nf;
                for (pi, &p) in config.p_grid.iter().enumerate() {
                    let (lambda_p, nloss_p) = exact_loss_minimum(&parts.beta_tilde, &z[..p])?;
                    let loss_p = nloss_p / nf;
                    let m_max = z[..p].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    let saturated = f64::from(u8::from(lambda_p >= m_max));
                    let row = match config.kind {
                        ExperimentKind::OrthoRatioVsP => vec![
                            nf,
                            p as f64,
                            sigma2,
                            r as f64,
                            loss_p,
                            loss_base,
                            loss_ratio(loss_p, loss_base),
                            lambda_p,
                            lambda_base,
                            saturated,
                        ],
                        ExperimentKind::BoundConservatism => {
                            let (bc, bre) = overlays.as_ref().expect("overlay")[si][pi];
                            vec![
                                nf,
                                p as f64,
                                sigma2,
                                r as f64,
                                loss_p,
                                bc,
                                bre,
                                f64::from(u8::from(loss_p <= bc)),
                                f64::from(u8::from(loss_p <= bre)),
                            ]
                        }
                        ExperimentKind::LassoPlusOls => {
                            let (nloss_refit, support) =
                                exact_refit_minimum(&parts.beta_tilde, &z[..p])?;
                            let loss_refit = nloss_refit / nf;
                            vec![
                                nf,
                                p as f64,
                                sigma2,
                                r as f64,
                                loss_p,
                                loss_refit,
                                loss_ratio(loss_refit, loss_p),
                                support as f64,
                                lambda_p,
                            ]
                        }
                        _ => unreachable!("non-trig kind in trig driver"),
                    };
                    rows.push(row);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(interleave(chunks, cells))
}

/// Growing-n driver: for each sample size, compare the full design p = n
/// against the reference dimension p tracking 2 log n.
fn run_growing(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    struct Ctx {
        n: usize,
        p_ref: usize,
        parts: TrigParts,
    }
    let mut ctxs = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        ctxs.push(Ctx {
            n,
            p_ref: growing_reference_dim(n),
            parts: trig_parts(n, n, &config.beta0)?,
        });
    }
    let n_max = *config.n_grid.last().expect("validated nonempty grid");

    let cells = config.sigma2_grid.len() * ctxs.len();
    let chunks: Vec<Vec<Vec<f64>>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let mut stream = RngStream::new(
                config.master_seed,
                replicate_stream(r, StreamPurpose::TrainingNoise),
            );
            // One draw at the largest n; smaller sample sizes use its
            // prefix, keeping draws common across the n grid.
            let eps = stream.standard_normal_vec(n_max);
            let mut rows = Vec::with_capacity(cells);
            for &sigma2 in &config.sigma2_grid {
                let sigma = sigma2.sqrt();
                for ctx in &ctxs {
                    let nf = ctx.n as f64;
                    let y: Vec<f64> = ctx
                        .parts
                        .mu
                        .iter()
                        .zip(&eps[..ctx.n])
                        .map(|(m, e)| m + sigma * e)
                        .collect();
                    let z: Vec<f64> = (0..ctx.n)
                        .map(|j| ctx.parts.normalized.column_dot(j, &y))
                        .collect();
                    let (lambda_ref, nloss_ref) =
                        exact_loss_minimum(&ctx.parts.beta_tilde, &z[..ctx.p_ref])?;
                    let (lambda_full, nloss_full) =
                        exact_loss_minimum(&ctx.parts.beta_tilde, &z)?;
                    let m_max = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    rows.push(vec![
                        nf,
                        ctx.p_ref as f64,
                        ctx.n as f64,
                        sigma2,
                        r as f64,
                        nloss_ref / nf,
                        nloss_full / nf,
                        loss_ratio(nloss_full / nf, nloss_ref / nf),
                        lambda_ref,
                        lambda_full,
                        f64::from(u8::from(lambda_full >= m_max)),
                    ]);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(interleave(chunks, cells))
}

/// Gaussian-design driver: grid-resolved lasso paths tuned against the
/// true mean (gaussian-ratio-vs-p) or a held-out test set (mse-ratio).
fn run_gaussian(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let n = config.n;
    let p_max = *config.p_grid.last().expect("validated nonempty grid");
    let train_full = gen_gaussian_design(n, p_max, config.master_seed)?;
    let model = GeneratingModel::from_dense(&config.beta0, 1.0)?;
    let mu = model.mu(&train_full)?;
    let mut train_prefixes = Vec::with_capacity(config.p_grid.len());
    for &p in &config.p_grid {
        train_prefixes.push(train_full.prefix(p)?);
    }
    let train_base = train_full.prefix(config.p0)?;
    let held_out = config.kind == ExperimentKind::MseRatio;

    let cells = config.sigma2_grid.len() * config.p_grid.len();
    let chunks: Vec<Vec<Vec<f64>>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let mut noise = RngStream::new(
                config.master_seed,
                replicate_stream(r, StreamPurpose::TrainingNoise),
            );
            let eps = noise.standard_normal_vec(n);

            // Held-out data is redrawn per replicate from its own
            // streams; noise is scaled by sigma at use, so test sets at
            // different variances share draws.
            let test = if held_out {
                let mut design_rng = RngStream::new(
                    config.master_seed,
                    replicate_stream(r, StreamPurpose::TestDesign),
                );
                let test_full = gaussian_design_from(&mut design_rng, config.test_n, p_max)?;
                let mu_test = model.mu(&test_full)?;
                let mut noise_rng = RngStream::new(
                    config.master_seed,
                    replicate_stream(r, StreamPurpose::TestNoise),
                );
                let eps_test = noise_rng.standard_normal_vec(config.test_n);
                let mut prefixes = Vec::with_capacity(config.p_grid.len());
                for &p in &config.p_grid {
                    prefixes.push(test_full.prefix(p)?);
                }
                let base = test_full.prefix(config.p0)?;
                Some((prefixes, base, mu_test, eps_test))
            } else {
                None
            };

            let mut rows = Vec::with_capacity(cells);
            for &sigma2 in &config.sigma2_grid {
                let sigma = sigma2.sqrt();
                let y: Vec<f64> = mu.iter().zip(&eps).map(|(m, e)| m + sigma * e).collect();
                let y_test: Vec<f64> = match &test {
                    Some((_, _, mu_t, eps_t)) => mu_t
                        .iter()
                        .zip(eps_t)
                        .map(|(m, e)| m + sigma * e)
                        .collect(),
                    None => Vec::new(),
                };

                let score = |design: &Design, test_design: Option<&Design>| -> Result<(f64, f64)> {
                    let path = fit_path(design, &y, &config.fit)?;
                    let target = match test_design {
                        Some(td) => EvalTarget::TestSet {
                            design: td,
                            y: &y_test,
                        },
                        None => EvalTarget::Mu(&mu),
                    };
                    let eval = evaluate_path(&path, design, &y, &target, false)?;
                    Ok((eval.min_value, eval.lambda_star))
                };

                let (base_loss, base_lambda) = match &test {
                    Some((_, base, _, _)) => score(&train_base, Some(base))?,
                    None => score(&train_base, None)?,
                };
                for (pi, design) in train_prefixes.iter().enumerate() {
                    let p = config.p_grid[pi];
                    let (loss_p, lambda_p) = match &test {
                        Some((prefixes, _, _, _)) => score(design, Some(&prefixes[pi]))?,
                        None => score(design, None)?,
                    };
                    let mut row = Vec::with_capacity(MSE_COLS.len());
                    row.push(n as f64);
                    if held_out {
                        row.push(config.test_n as f64);
                    }
                    row.extend_from_slice(&[
                        p as f64,
                        sigma2,
                        r as f64,
                        loss_p,
                        base_loss,
                        loss_ratio(loss_p, base_loss),
                        lambda_p,
                        base_lambda,
                    ]);
                    rows.push(row);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(interleave(chunks, cells))
}

/// Monte Carlo check of the closed-form deterioration probability.
fn run_mc(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let mut rows =
        Vec::with_capacity(config.sigma2_grid.len() * config.p_grid.len() * config.replicates);
    for &sigma2 in &config.sigma2_grid {
        for &p in &config.p_grid {
            let q = DeteriorationQuery::new(config.beta1, sigma2.sqrt(), p)?;
            let draws = mc_deterioration_draws(&q, config.replicates, config.master_seed)?;
            for (r, (det, matched)) in draws.into_iter().enumerate() {
                rows.push(vec![
                    p as f64,
                    sigma2,
                    r as f64,
                    f64::from(u8::from(det)),
                    f64::from(u8::from(matched)),
                ]);
            }
        }
    }
    Ok(rows)
}

/// Analytic probability grid over interaction orders and main-effect
/// counts; no simulation.
fn run_table1(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let sigma = config.sigma2_grid[0].sqrt();
    let t = table1(config.beta1, sigma)?;
    let mut rows = Vec::new();
    for (oi, &order) in TABLE1_ORDERS.iter().enumerate() {
        for (ci, &mains) in TABLE1_MAIN_COUNTS.iter().enumerate() {
            if let (Some(prob), Some(dim)) = (t.cells[oi][ci], t.dims[oi][ci]) {
                rows.push(vec![order as f64, mains as f64, dim as f64, prob]);
            }
        }
    }
    Ok(rows)
}

/// Rows whose key columns match the given values exactly. Keys are
/// integers-as-floats or config constants, so exact comparison is right.
fn cell<'a>(rows: &'a [Vec<f64>], keys: &[(usize, f64)]) -> Vec<&'a Vec<f64>> {
    rows.iter()
        .filter(|row| keys.iter().all(|&(c, v)| row[c] == v))
        .collect()
}

fn column(rows: &[&Vec<f64>], idx: usize) -> Vec<f64> {
    rows.iter().map(|r| r[idx]).collect()
}

/// Per-setting summaries of an experiment's long-form rows. Usable on
/// rows loaded back from disk as long as the config matches the run.
pub fn summarize(
    config: &ExperimentConfig,
    rows: &[Vec<f64>],
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut out = Vec::new();
    let columns: Vec<String>;
    match config.kind {
        ExperimentKind::OrthoRatioVsP | ExperimentKind::GaussianRatioVsP => {
            columns = cols(&[
                "n",
                "p",
                "sigma2",
                "replicates",
                "median_ratio",
                "mean_ratio",
                "median_loss_p",
                "mean_loss_p",
                "median_loss_base",
                "saturated_fraction",
            ]);
            let trig = config.kind == ExperimentKind::OrthoRatioVsP;
            for &sigma2 in &config.sigma2_grid {
                for &p in &config.p_grid {
                    let rs = cell(rows, &[(1, p as f64), (2, sigma2)]);
                    if rs.is_empty() {
                        continue;
                    }
                    let ratios = column(&rs, 6);
                    let losses = column(&rs, 4);
                    let saturated = if trig {
                        mean(&column(&rs, 9))?
                    } else {
                        f64::NAN
                    };
                    out.push(vec![
                        rs[0][0],
                        p as f64,
                        sigma2,
                        rs.len() as f64,
                        median(&ratios)?,
                        mean(&ratios)?,
                        median(&losses)?,
                        mean(&losses)?,
                        median(&column(&rs, 5))?,
                        saturated,
                    ]);
                }
            }
        }
        ExperimentKind::BoundConservatism => {
            columns = cols(&[
                "n",
                "p",
                "sigma2",
                "replicates",
                "median_loss",
                "bound_compat",
                "bound_re",
                "within_compat_fraction",
                "within_re_fraction",
                "conservatism_compat",
                "conservatism_re",
            ]);
            for &sigma2 in &config.sigma2_grid {
                for &p in &config.p_grid {
                    let rs = cell(rows, &[(1, p as f64), (2, sigma2)]);
                    if rs.is_empty() {
                        continue;
                    }
                    let med = median(&column(&rs, 4))?;
                    let bc = rs[0][5];
                    let bre = rs[0][6];
                    out.push(vec![
                        rs[0][0],
                        p as f64,
                        sigma2,
                        rs.len() as f64,
                        med,
                        bc,
                        bre,
                        mean(&column(&rs, 7))?,
                        mean(&column(&rs, 8))?,
                        loss_ratio(bc, med),
                        loss_ratio(bre, med),
                    ]);
                }
            }
        }
        ExperimentKind::GrowingN => {
            columns = cols(&[
                "n",
                "p_ref",
                "p_full",
                "sigma2",
                "replicates",
                "median_ratio",
                "mean_ratio",
                "median_loss_ref",
                "median_loss_full",
                "saturated_full_fraction",
            ]);
            for &sigma2 in &config.sigma2_grid {
                for &n in &config.n_grid {
                    let rs = cell(rows, &[(0, n as f64), (3, sigma2)]);
                    if rs.is_empty() {
                        continue;
                    }
                    let ratios = column(&rs, 7);
                    out.push(vec![
                        n as f64,
                        rs[0][1],
                        rs[0][2],
                        sigma2,
                        rs.len() as f64,
                        median(&ratios)?,
                        mean(&ratios)?,
                        median(&column(&rs, 5))?,
                        median(&column(&rs, 6))?,
                        mean(&column(&rs, 10))?,
                    ]);
                }
            }
        }
        ExperimentKind::LassoPlusOls => {
            columns = cols(&[
                "n",
                "p",
                "sigma2",
                "replicates",
                "median_loss_lasso",
                "median_loss_refit",
                "mean_loss_lasso",
                "mean_loss_refit",
                "median_ratio_refit",
                "median_support_refit",
            ]);
            for &sigma2 in &config.sigma2_grid {
                for &p in &config.p_grid {
                    let rs = cell(rows, &[(1, p as f64), (2, sigma2)]);
                    if rs.is_empty() {
                        continue;
                    }
                    out.push(vec![
                        rs[0][0],
                        p as f64,
                        sigma2,
                        rs.len() as f64,
                        median(&column(&rs, 4))?,
                        median(&column(&rs, 5))?,
                        mean(&column(&rs, 4))?,
                        mean(&column(&rs, 5))?,
                        median(&column(&rs, 6))?,
                        median(&column(&rs, 7))?,
                    ]);
                }
            }
        }
        ExperimentKind::MseRatio => {
            columns = cols(&[
                "n",
                "test_n",
                "p",
                "sigma2",
                "replicates",
                "median_ratio",
                "mean_ratio",
                "median_mse_p",
                "median_mse_base",
            ]);
            for &sigma2 in &config.sigma2_grid {
                for &p in &config.p_grid {
                    let rs = cell(rows, &[(2, p as f64), (3, sigma2)]);
                    if rs.is_empty() {
                        continue;
                    }
                    let ratios = column(&rs, 7);
                    out.push(vec![
                        rs[0][0],
                        rs[0][1],
                        p as f64,
                        sigma2,
                        rs.len() as f64,
                        median(&ratios)?,
                        mean(&ratios)?,
                        median(&column(&rs, 5))?,
                        median(&column(&rs, 6))?,
                    ]);
                }
            }
        }
        ExperimentKind::McTheoremCheck => {
            columns = cols(&[
                "p",
                "sigma2",
                "replicates",
                "frequency",
                "std_error",
                "conditional_frequency",
                "conditional_std_error",
                "sign_match_count",
                "analytic",
                "analytic_conditional",
            ]);
            for &sigma2 in &config.sigma2_grid {
                for &p in &config.p_grid {
                    let rs = cell(rows, &[(0, p as f64), (1, sigma2)]);
                    if rs.is_empty() {
                        continue;
                    }
                    let reps = rs.len();
                    let det = column(&rs, 3);
                    let matched = column(&rs, 4);
                    let freq = mean(&det)?;
                    let match_count = matched.iter().sum::<f64>() as usize;
                    let det_and_match = rs
                        .iter()
                        .filter(|r| r[3] == 1.0 && r[4] == 1.0)
                        .count();
                    let (cond, cond_se) = if match_count > 0 {
                        let f = det_and_match as f64 / match_count as f64;
                        (f, binomial_std_error(f, match_count)?)
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    let q = DeteriorationQuery::new(config.beta1, sigma2.sqrt(), p)?;
                    out.push(vec![
                        p as f64,
                        sigma2,
                        reps as f64,
                        freq,
                        binomial_std_error(freq, reps)?,
                        cond,
                        cond_se,
                        match_count as f64,
                        prob_deterioration(&q),
                        prob_deterioration_given_sign(&q),
                    ]);
                }
            }
        }
        ExperimentKind::AnalyticTable1 => {
            let mut names = vec!["order".to_string()];
            names.extend(
                TABLE1_MAIN_COUNTS
                    .iter()
                    .map(|m| format!("main_effects_{m}")),
            );
            columns = names;
            for &order in &TABLE1_ORDERS {
                let mut row = vec![order as f64];
                for &mains in &TABLE1_MAIN_COUNTS {
                    let found = rows
                        .iter()
                        .find(|r| r[0] == order as f64 && r[1] == mains as f64);
                    // Absent cells (models with no term of this order)
                    // stay blank in the CSV.
                    row.push(found.map_or(f64::NAN, |r| r[3]));
                }
                out.push(row);
            }
        }
    }
    Ok((columns, out))
}

fn join_usize(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_number(*x))
        .collect::<Vec<_>>()
        .join(",")
}

fn build_metadata(config: &ExperimentConfig, row_count: usize) -> Vec<(String, String)> {
    let mut m: Vec<(String, String)> = vec![
        ("kind".into(), config.kind.name().into()),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("master_seed".into(), config.master_seed.to_string()),
        ("replicates".into(), config.replicates.to_string()),
        ("rows".into(), row_count.to_string()),
        (
            "loss_convention".into(),
            "per-observation mean squared error".into(),
        ),
    ];
    match config.kind {
        ExperimentKind::AnalyticTable1 => {
            m.push(("beta1".into(), format_number(config.beta1)));
            m.push(("sigma2".into(), format_number(config.sigma2_grid[0])));
        }
        ExperimentKind::McTheoremCheck => {
            m.push(("beta1".into(), format_number(config.beta1)));
            m.push(("p_grid".into(), join_usize(&config.p_grid)));
            m.push(("sigma2_grid".into(), join_f64(&config.sigma2_grid)));
        }
        ExperimentKind::GrowingN => {
            m.push(("n_grid".into(), join_usize(&config.n_grid)));
            m.push(("p0".into(), config.p0.to_string()));
            m.push(("beta0".into(), join_f64(&config.beta0)));
            m.push(("sigma2_grid".into(), join_f64(&config.sigma2_grid)));
        }
        _ => {
            m.push(("n".into(), config.n.to_string()));
            m.push(("p_grid".into(), join_usize(&config.p_grid)));
            m.push(("p0".into(), config.p0.to_string()));
            m.push(("beta0".into(), join_f64(&config.beta0)));
            m.push(("sigma2_grid".into(), join_f64(&config.sigma2_grid)));
        }
    }
    if config.kind == ExperimentKind::BoundConservatism {
        m.push(("coverage".into(), format_number(config.coverage)));
        m.push(("psi0".into(), format_number(config.psi0)));
        m.push(("kappa".into(), format_number(config.kappa)));
    }
    if config.kind == ExperimentKind::MseRatio {
        m.push(("test_n".into(), config.test_n.to_string()));
    }
    if config.kind.is_gaussian() {
        m.push(("intercept".into(), config.fit.intercept.to_string()));
        m.push(("standardize".into(), config.fit.standardize.to_string()));
        if let crate::path::LambdaGrid::Log { count, min_ratio } = &config.fit.grid {
            m.push(("lambda_count".into(), count.to_string()));
            m.push(("lambda_min_ratio".into(), format_number(*min_ratio)));
        }
        m.push(("tol".into(), format_number(config.fit.tol)));
        m.push(("max_sweeps".into(), config.fit.max_sweeps.to_string()));
    }
    if !config.rounded_p.is_empty() {
        let s = config
            .rounded_p
            .iter()
            .map(|(from, to)| format!("{from}->{to}"))
            .collect::<Vec<_>>()
            .join(";");
        m.push(("rounded_p".into(), s));
    }
    for (k, v) in &config.raw_pairs {
        m.push((format!("config.{k}"), v.clone()));
    }
    m
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let (names, rows) = match config.kind {
        ExperimentKind::OrthoRatioVsP => (ORTHO_COLS, run_trig(config)?),
        ExperimentKind::BoundConservatism => (BOUND_COLS, run_trig(config)?),
        ExperimentKind::LassoPlusOls => (REFIT_COLS, run_trig(config)?),
        ExperimentKind::GrowingN => (GROW_COLS, run_growing(config)?),
        ExperimentKind::GaussianRatioVsP => (GAUSS_COLS, run_gaussian(config)?),
        ExperimentKind::MseRatio => (MSE_COLS, run_gaussian(config)?),
        ExperimentKind::McTheoremCheck => (MC_COLS, run_mc(config)?),
        ExperimentKind::AnalyticTable1 => (TABLE1_COLS, run_table1(config)?),
    };
    let (summary_columns, summary_rows) = summarize(config, &rows)?;
    let metadata = build_metadata(config, rows.len());
    Ok(ExperimentResult {
        kind: config.kind,
        row_columns: cols(names),
        rows,
        summary_columns,
        summary_rows,
        metadata,
    })
}

/// CSV cell formatting: shortest round-trip decimal, `inf` for
/// infinities, and an empty cell for absent values (NaN).
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn render_csv(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let mut first = true;
        for &v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&format_number(v));
            first = false;
        }
        out.push('\n');
    }
    out
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn render_metadata(metadata: &[(String, String)]) -> String {
    let mut out = String::from("{\n");
    for (i, (k, v)) in metadata.iter().enumerate() {
        out.push_str(&format!(
            "  \"{}\": \"{}\"{}\n",
            json_escape(k),
            json_escape(v),
            if i + 1 < metadata.len() { "," } else { "" }
        ));
    }
    out.push_str("}\n");
    out
}

/// Write rows.csv, summary.csv, and metadata.json into `out_dir`.
/// Refuses a nonempty directory unless `force`; on failure, files
/// already written by this call are removed.
pub fn write_outputs(
    result: &ExperimentResult,
    out_dir: &Path,
    force: bool,
) -> Result<Vec<PathBuf>> {
    if out_dir.exists() {
        if !out_dir.is_dir() {
            return Err(Error::Refused(format!(
                "output path {} exists and is not a directory",
                out_dir.display()
            )));
        }
        if fs::read_dir(out_dir)?.next().is_some() && !force {
            return Err(Error::Refused(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out_dir.display()
            )));
        }
    } else {
        fs::create_dir_all(out_dir)?;
    }

    let files = [
        ("rows.csv", render_csv(&result.row_columns, &result.rows)),
        (
            "summary.csv",
            render_csv(&result.summary_columns, &result.summary_rows),
        ),
        ("metadata.json", render_metadata(&result.metadata)),
    ];
    let mut written: Vec<PathBuf> = Vec::with_capacity(files.len());
    for (name, content) in &files {
        let path = out_dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}
