//! Lasso regularization paths by cyclic coordinate descent, plus
//! least-squares refitting and path evaluation.
//!
//! The objective is (1/2) ||y - b 1 - X beta||^2 + lambda ||beta||_1.
//! On a design with unit-norm orthogonal columns the coordinate update
//! fixed point is exactly the soft threshold of x_j' y, which is what
//! ties this solver to the closed-form orthonormal analysis and gives it
//! an independent correctness oracle.
//!
//! The grid is solved warm-started from large lambda downward; an
//! active-set strategy iterates the current support to convergence and
//! then confirms with a full sweep. Convergence is declared when the
//! largest coefficient change in a full sweep is at most `tol` (on the
//! standardized scale when standardization is on).

use crate::design::Design;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum LambdaGrid {
    /// `count` log-spaced values from lambda_max down to
    /// `min_ratio * lambda_max`.
    Log { count: usize, min_ratio: f64 },
    /// Caller-provided values, strictly decreasing, nonnegative.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub intercept: bool,
    /// Scale columns to unit Euclidean norm (after centering when the
    /// intercept is on) before solving; reported coefficients are always
    /// on the original scale.
    pub standardize: bool,
    pub grid: LambdaGrid,
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            intercept: true,
            standardize: true,
            grid: LambdaGrid::Log {
                count: 100,
                min_ratio: 1e-4,
            },
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        match &self.grid {
            LambdaGrid::Log { count, min_ratio } => {
                if *count == 0 {
                    return Err(Error::Domain("lambda grid needs at least one value".into()));
                }
                if !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(Error::Domain(format!(
                        "lambda min ratio must lie in (0, 1), got {min_ratio}"
                    )));
                }
            }
            LambdaGrid::Explicit(values) => {
                if values.is_empty() {
                    return Err(Error::Domain("empty explicit lambda grid".into()));
                }
                for w in values.windows(2) {
                    if !(w[1] < w[0]) {
                        return Err(Error::Domain(
                            "explicit lambda grid must be strictly decreasing".into(),
                        ));
                    }
                }
                if values.iter().any(|l| !l.is_finite() || *l < 0.0) {
                    return Err(Error::Domain(
                        "explicit lambda values must be finite and >= 0".into(),
                    ));
                }
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Domain("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// A solved path: one coefficient vector (original scale) per lambda,
/// lambdas strictly decreasing.
#[derive(Debug, Clone)]
pub struct RegularizationPath {
    pub lambdas: Vec<f64>,
    /// `coefs[k][j]`: coefficient of column j at `lambdas[k]`.
    pub coefs: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Sorted indices of the nonzero coefficients at each lambda.
    pub active_sets: Vec<Vec<usize>>,
    /// Whether the path was fitted with an intercept (refits follow suit).
    pub fitted_with_intercept: bool,
}

/// Centered/scaled working copy of the problem.
struct Prepared {
    n: usize,
    p: usize,
    /// Column-major, transformed.
    cols: Vec<f64>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    /// Squared norms of the transformed columns; 0 marks an inert column.
    gram_diag: Vec<f64>,
}

impl Prepared {
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Back-transform a solved coefficient vector to the original scale.
    fn original_scale(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let coefs: Vec<f64> = beta
            .iter()
            .zip(&self.x_scale)
            .map(|(b, s)| b / s)
            .collect();
        let intercept = self.y_mean
            - coefs
                .iter()
                .zip(&self.x_mean)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (coefs, intercept)
    }
}

fn prepare(design: &Design, y: &[f64], config: &FitConfig) -> Result<Prepared> {
    let n = design.n();
    let p = design.p();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "response of length {} for a design with {} rows",
            y.len(),
            n
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("response contains a non-finite value".into()));
    }

    let mut cols = Vec::with_capacity(n * p);
    let mut x_mean = vec![0.0; p];
    let mut x_scale = vec![1.0; p];
    let mut gram_diag = vec![0.0; p];
    for j in 0..p {
        let src = design.column(j);
        let mean = if config.intercept {
            src.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        x_mean[j] = mean;
        let start = cols.len();
        cols.extend(src.iter().map(|v| v - mean));
        let norm2: f64 = cols[start..].iter().map(|v| v * v).sum();
        let ref_scale = src.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let effectively_zero = norm2.sqrt() <= 1e-12 * (n as f64).sqrt() * ref_scale.max(1e-300);
        if config.standardize {
            if effectively_zero {
                return Err(Error::Domain(format!(
                    "column {} ({}) has zero variance after centering; \
                     standardization cannot scale it",
                    j,
                    design.labels()[j]
                )));
            }
            let norm = norm2.sqrt();
            x_scale[j] = norm;
            for v in &mut cols[start..] {
                *v /= norm;
            }
            gram_diag[j] = 1.0;
        } else {
            // An exactly (or effectively) zero column stays inert.
            gram_diag[j] = if effectively_zero { 0.0 } else { norm2 };
            if effectively_zero {
                for v in &mut cols[start..] {
                    *v = 0.0;
                }
            }
        }
    }

    let y_mean = if config.intercept {
        y.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let y_centered = y.iter().map(|v| v - y_mean).collect();
    Ok(Prepared {
        n,
        p,
        cols,
        y: y_centered,
        x_mean,
        x_scale,
        y_mean,
        gram_diag,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest lambda at which every coefficient is zero:
/// max_j |x_j' (y - ybar)| on the prepared scale.
pub fn lambda_max(design: &Design, y: &[f64], config: &FitConfig) -> Result<f64> {
    config.validate()?;
    let prep = prepare(design, y, config)?;
    Ok(lambda_max_prepared(&prep))
}

fn lambda_max_prepared(prep: &Prepared) -> f64 {
    (0..prep.p)
        .filter(|&j| prep.gram_diag[j] > 0.0)
        .map(|j| dot(prep.col(j), &prep.y).abs())
        .fold(0.0, f64::max)
}

/// One coordinate descent solve at fixed lambda, warm-started from
/// `beta`, with `resid` kept consistent (resid = y - X beta on entry and
/// exit). Returns the number of sweeps consumed.
fn cd_solve(
    prep: &Prepared,
    lambda: f64,
    beta: &mut [f64],
    resid: &mut [f64],
    tol: f64,
    sweep_budget: usize,
) -> Result<usize> {
    let all: Vec<usize> = (0..prep.p).collect();
    let mut sweeps = 0;
    let mut last_delta;
    loop {
        // Full sweep over every coordinate.
        sweeps += 1;
        last_delta = sweep(prep, lambda, beta, resid, &all);
        if last_delta <= tol {
            return Ok(sweeps);
        }
        if sweeps >= sweep_budget {
            return Err(Error::NonConvergence {
                lambda,
                sweeps,
                last_delta,
            });
        }
        // Iterate the current active set to convergence, then let the
        // outer loop confirm with another full sweep.
        let active: Vec<usize> = (0..prep.p).filter(|&j| beta[j] != 0.0).collect();
        if !active.is_empty() && active.len() < prep.p {
            loop {
                sweeps += 1;
                let delta = sweep(prep, lambda, beta, resid, &active);
                if delta <= tol {
                    break;
                }
                if sweeps >= sweep_budget {
                    return Err(Error::NonConvergence {
                        lambda,
                        sweeps,
                        last_delta: delta,
                    });
                }
            }
        }
    }
}

/// One pass of coordinate updates; returns the largest coefficient change.
fn sweep(
    prep: &Prepared,
    lambda: f64,
    beta: &mut [f64],
    resid: &mut [f64],
    indices: &[usize],
) -> f64 {
    let mut max_delta = 0.0f64;
    for &j in indices {
        let g = prep.gram_diag[j];
        if g == 0.0 {
            continue;
        }
        let col = prep.col(j);
        let rho = dot(col, resid) + g * beta[j];
        let new = {
            let m = rho.abs() - lambda;
            if m > 0.0 {
                m * rho.signum() / g
            } else {
                0.0
            }
        };
        let old = beta[j];
        if new != old {
            let step = old - new;
            for (r, &x) in resid.iter_mut().zip(col) {
                *r += step * x;
            }
            beta[j] = new;
            max_delta = max_delta.max(step.abs());
        }
    }
    max_delta
}

/// Solve the whole path, warm-starting each lambda from the previous one.
pub fn fit_path(design: &Design, y: &[f64], config: &FitConfig) -> Result<RegularizationPath> {
    config.validate()?;
    let prep = prepare(design, y, config)?;

    let lambdas: Vec<f64> = match &config.grid {
        LambdaGrid::Log { count, min_ratio } => {
            let lmax = lambda_max_prepared(&prep);
            if lmax <= 0.0 {
                return Err(Error::Domain(
                    "response is orthogonal to every column; the lasso path is empty".into(),
                ));
            }
            if *count == 1 {
                vec![lmax]
            } else {
                (0..*count)
                    .map(|k| lmax * min_ratio.powf(k as f64 / (*count as f64 - 1.0)))
                    .collect()
            }
        }
        LambdaGrid::Explicit(values) => values.clone(),
    };

    let mut beta = vec![0.0; prep.p];
    let mut resid = prep.y.clone();
    let mut coefs = Vec::with_capacity(lambdas.len());
    let mut intercepts = Vec::with_capacity(lambdas.len());
    let mut active_sets = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        cd_solve(
            &prep,
            lambda,
            &mut beta,
            &mut resid,
            config.tol,
            config.max_sweeps,
        )?;
        let (orig, intercept) = prep.original_scale(&beta);
        active_sets.push((0..prep.p).filter(|&j| beta[j] != 0.0).collect());
        coefs.push(orig);
        intercepts.push(intercept);
    }
    Ok(RegularizationPath {
        lambdas,
        coefs,
        intercepts,
        active_sets,
        fitted_with_intercept: config.intercept,
    })
}

/// Largest KKT violation of a coefficient vector (original scale) at the
/// given lambda: |x_j' r - lambda sgn(beta_j)| on active coordinates and
/// max(0, |x_j' r| - lambda) on inactive ones, computed on the prepared
/// (centered, scaled) problem.
pub fn kkt_max_violation(
    design: &Design,
    y: &[f64],
    config: &FitConfig,
    lambda: f64,
    coefs: &[f64],
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    config.validate()?;
    let prep = prepare(design, y, config)?;
    if coefs.len() != prep.p {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} columns",
            coefs.len(),
            prep.p
        )));
    }
    let beta_std: Vec<f64> = coefs
        .iter()
        .zip(&prep.x_scale)
        .map(|(b, s)| b * s)
        .collect();
    let mut resid = prep.y.clone();
    for j in 0..prep.p {
        if beta_std[j] != 0.0 {
            let col = prep.col(j);
            for (r, &x) in resid.iter_mut().zip(col) {
                *r -= beta_std[j] * x;
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..prep.p {
        if prep.gram_diag[j] == 0.0 {
            continue;
        }
        let c = dot(prep.col(j), &resid);
        let viol = if beta_std[j] != 0.0 {
            (c - lambda * beta_std[j].signum()).abs()
        } else {
            (c.abs() - lambda).max(0.0)
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}

/// Least-squares refit on a fixed support.
#[derive(Debug, Clone)]
pub struct RefitOutcome {
    /// Full-length coefficient vector, zero off the support.
    pub coefs: Vec<f64>,
    pub intercept: f64,
    /// True when the support columns were rank deficient; the returned
    /// coefficients are then a pivoted basic solution (dependent columns
    /// pinned to zero). Fitted values are the projection either way.
    pub degenerate: bool,
}

/// Exact least squares of y on the given support columns (plus an
/// intercept when requested), via Householder QR with column pivoting.
pub fn refit_ols(
    design: &Design,
    y: &[f64],
    support: &[usize],
    intercept: bool,
) -> Result<RefitOutcome> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "response of length {} for a design with {} rows",
            y.len(),
            n
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for &j in support {
        if j >= design.p() {
            return Err(Error::Dimension(format!(
                "support index {j} out of range for {} columns",
                design.p()
            )));
        }
        if !seen.insert(j) {
            return Err(Error::Dimension(format!("support index {j} repeated")));
        }
    }

    let y_mean = if intercept {
        y.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let b: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut x_means = Vec::with_capacity(support.len());
    let cols: Vec<Vec<f64>> = support
        .iter()
        .map(|&j| {
            let src = design.column(j);
            let mean = if intercept {
                src.iter().sum::<f64>() / n as f64
            } else {
                0.0
            };
            x_means.push(mean);
            src.iter().map(|v| v - mean).collect()
        })
        .collect();

    let (w, degenerate) = pivoted_qr_solve(cols, b);
    let mut coefs = vec![0.0; design.p()];
    for (&j, &wj) in support.iter().zip(&w) {
        coefs[j] = wj;
    }
    let fitted_intercept = if intercept {
        y_mean - w.iter().zip(&x_means).map(|(c, m)| c * m).sum::<f64>()
    } else {
        0.0
    };
    Ok(RefitOutcome {
        coefs,
        intercept: fitted_intercept,
        degenerate,
    })
}

/// Householder QR with column pivoting; returns a basic least-squares
/// solution (dependent columns get zero) and whether rank fell short of
/// the column count.
fn pivoted_qr_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> (Vec<f64>, bool) {
    let k = a.len();
    if k == 0 {
        return (Vec::new(), false);
    }
    let n = b.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let limit = k.min(n);
    let mut rank = limit;
    let mut first_pivot = 0.0f64;

    for t in 0..limit {
        // Pivot: remaining column with the largest residual norm.
        let (pivot, pivot_norm2) = (t..k)
            .map(|j| (j, a[j][t..].iter().map(|v| v * v).sum::<f64>()))
            .fold((t, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        a.swap(t, pivot);
        perm.swap(t, pivot);
        let norm = pivot_norm2.max(0.0).sqrt();
        if t == 0 {
            first_pivot = norm;
        }
        if norm <= 1e-10 * first_pivot.max(1e-300) {
            rank = t;
            break;
        }
        // Householder vector for column t below row t.
        let alpha = if a[t][t] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[t][t..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        a[t][t] = alpha;
        for x in &mut a[t][t + 1..] {
            *x = 0.0;
        }
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(t + 1) {
                let scale = 2.0 * dot(&v, &col[t..]) / vnorm2;
                if scale != 0.0 {
                    for (c, &h) in col[t..].iter_mut().zip(&v) {
                        *c -= scale * h;
                    }
                }
            }
            let scale = 2.0 * dot(&v, &b[t..]) / vnorm2;
            if scale != 0.0 {
                for (c, &h) in b[t..].iter_mut().zip(&v) {
                    *c -= scale * h;
                }
            }
        }
    }

    // Back substitution on the leading rank x rank triangle.
    let mut w_perm = vec![0.0; k];
    for t in (0..rank).rev() {
        let mut s = b[t];
        for u in t + 1..rank {
            s -= a[u][t] * w_perm[u];
        }
        w_perm[t] = s / a[t][t];
    }
    let mut w = vec![0.0; k];
    for (t, &orig) in perm.iter().enumerate() {
        w[orig] = w_perm[t];
    }
    (w, rank < k)
}

/// What to score a path against.
pub enum EvalTarget<'a> {
    /// Mean squared deviation of fitted values from a known noiseless
    /// mean on the training design.
    Mu(&'a [f64]),
    /// Mean squared prediction error on held-out data.
    TestSet { design: &'a Design, y: &'a [f64] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    MeanSquaredErrorVsMu,
    TestMse,
}

#[derive(Debug, Clone)]
pub struct PathEvaluation {
    pub criterion: Criterion,
    /// Smallest lambda attaining the minimum value.
    pub lambda_star: f64,
    pub min_value: f64,
    /// One value per path lambda, aligned with `path.lambdas`.
    pub values: Vec<f64>,
    pub refit: bool,
    /// Number of lambdas whose refit was rank deficient (always 0 when
    /// `refit` is false).
    pub degenerate_refits: usize,
}

/// Score every path solution (optionally refit on its active set) against
/// the target and locate the best lambda; ties go to the smallest lambda.
/// `y` is the training response the path was fitted on (used for
/// refitting).
pub fn evaluate_path(
    path: &RegularizationPath,
    design: &Design,
    y: &[f64],
    target: &EvalTarget,
    refit: bool,
) -> Result<PathEvaluation> {
    if path.lambdas.is_empty() {
        return Err(Error::Dimension("empty path".into()));
    }
    let criterion = match target {
        EvalTarget::Mu(mu) => {
            if mu.len() != design.n() {
                return Err(Error::Dimension(format!(
                    "mu of length {} for a design with {} rows",
                    mu.len(),
                    design.n()
                )));
            }
            Criterion::MeanSquaredErrorVsMu
        }
        EvalTarget::TestSet { design: td, y: ty } => {
            if td.p() != design.p() {
                return Err(Error::Dimension(format!(
                    "test design has {} columns, training design {}",
                    td.p(),
                    design.p()
                )));
            }
            if ty.len() != td.n() {
                return Err(Error::Dimension(format!(
                    "test response of length {} for {} test rows",
                    ty.len(),
                    td.n()
                )));
            }
            Criterion::TestMse
        }
    };

    let mut values = Vec::with_capacity(path.lambdas.len());
    let mut degenerate_refits = 0;
    for k in 0..path.lambdas.len() {
        let (coefs, intercept) = if refit {
            let out = refit_ols(
                design,
                y,
                &path.active_sets[k],
                path.fitted_with_intercept,
            )?;
            if out.degenerate {
                degenerate_refits += 1;
            }
            (out.coefs, out.intercept)
        } else {
            (path.coefs[k].clone(), path.intercepts[k])
        };
        let value = match target {
            EvalTarget::Mu(mu) => {
                let fitted = design.predict(&coefs, intercept)?;
                fitted
                    .iter()
                    .zip(*mu)
                    .map(|(f, m)| (f - m) * (f - m))
                    .sum::<f64>()
                    / design.n() as f64
            }
            EvalTarget::TestSet { design: td, y: ty } => {
                let pred = td.predict(&coefs, intercept)?;
                pred.iter()
                    .zip(*ty)
                    .map(|(f, t)| (f - t) * (f - t))
                    .sum::<f64>()
                    / td.n() as f64
            }
        };
        values.push(value);
    }

    // Scan ascending lambda (reverse path order) with strict improvement:
    // ties land on the smallest lambda.
    let mut best_idx = path.lambdas.len() - 1;
    let mut best = values[best_idx];
    for k in (0..path.lambdas.len()).rev() {
        if values[k] < best {
            best = values[k];
            best_idx = k;
        }
    }
    Ok(PathEvaluation {
        criterion,
        lambda_star: path.lambdas[best_idx],
        min_value: best,
        values,
        refit,
        degenerate_refits,
    })
}
