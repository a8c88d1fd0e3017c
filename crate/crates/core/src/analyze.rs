//! Dictionary-comparison analysis for tabular data: fit a main-effects
//! lasso and an all-pairwise-interactions lasso over repeated random
//! train/test splits, compare held-out error, and test the paired
//! difference.
//!
//! The input is a numeric table whose first column is the response and
//! whose remaining columns are main effects. Both dictionaries are built
//! once on the full sample (products of distinct columns, scaled to unit
//! norm), so every split fits the same fixed set of columns; a column
//! that happens to be constant within a training split stays inert
//! instead of failing the run.

use crate::design::{expand_interactions, Design, DesignKind};
use crate::error::{Error, Result};
use crate::path::{evaluate_path, fit_path, EvalTarget, FitConfig, LambdaGrid};
use crate::rng::{replicate_stream, RngStream, StreamPurpose};
use crate::stats::{median, wilcoxon_signed_rank, WilcoxonOutcome};

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Number of random train/test splits.
    pub splits: usize,
    /// Fraction of rows used for training.
    pub train_fraction: f64,
    pub seed: u64,
    /// Significance level for the paired test.
    pub alpha: f64,
    /// Center and unit-norm the main-effect columns (over the full
    /// sample) before building the dictionaries. Off by default: raw
    /// products are the natural encoding for 0/1 indicator data.
    pub standardize_mains: bool,
    pub fit: FitConfig,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            splits: 50,
            train_fraction: 0.5,
            seed: 42,
            alpha: 0.05,
            standardize_mains: false,
            // The dictionaries are unit-norm by construction; fitting on
            // their fixed scale keeps degenerate split columns inert.
            fit: FitConfig {
                intercept: true,
                standardize: false,
                grid: LambdaGrid::Log {
                    count: 100,
                    min_ratio: 1e-4,
                },
                tol: 1e-8,
                max_sweeps: 100_000,
            },
        }
    }
}

/// One train/test split's held-out scores.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub split: usize,
    /// Minimum held-out MSE over the main-effects path.
    pub main_mse: f64,
    /// Minimum held-out MSE over the all-pairwise path.
    pub pairwise_mse: f64,
    /// pairwise_mse / main_mse; above 1 means the larger dictionary lost.
    pub ratio: f64,
    /// Interaction columns active at the pairwise path's best lambda.
    pub interactions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub n: usize,
    pub main_effects: usize,
    pub main_dim: usize,
    pub pairwise_dim: usize,
    pub train_size: usize,
    pub splits: Vec<SplitOutcome>,
    pub median_main_mse: f64,
    pub median_pairwise_mse: f64,
    pub median_ratio: f64,
    /// Paired test of pairwise vs main held-out error; `None` when there
    /// are no usable differences (a single split with a tie, say).
    pub wilcoxon: Option<WilcoxonOutcome>,
    /// Interactions active at the pairwise optimum in every split.
    pub always_selected: Vec<String>,
}

/// Strict numeric CSV reader: one header line, rectangular rows, every
/// cell a finite number. Row and column indices in errors are 1-based
/// with the header as row 1.
pub fn load_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, h)) if !h.trim().is_empty() => {
            h.split(',').map(|s| s.trim().to_string()).collect()
        }
        _ => {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: "missing header line".into(),
            })
        }
    };
    if header.iter().any(|h| h.is_empty()) {
        return Err(Error::Parse {
            row: 1,
            column: header.iter().position(|h| h.is_empty()).unwrap() + 1,
            message: "empty column name".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Parse {
                row: row_no,
                column: cells.len().min(header.len()) + 1,
                message: format!(
                    "expected {} cells, found {}",
                    header.len(),
                    cells.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                column: c + 1,
                message: format!("not a number: `{}`", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: c + 1,
                    message: format!("non-finite value {v}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 2,
            column: 1,
            message: "no data rows".into(),
        });
    }
    Ok((header, rows))
}

/// Column-major (label, values) view of a loaded table, splitting off the
/// first column as the response.
fn split_response(header: &[String], rows: &[Vec<f64>]) -> Result<(Vec<f64>, Design)> {
    if header.len() < 3 {
        return Err(Error::Dimension(format!(
            "need a response and at least two main effects, got {} columns",
            header.len()
        )));
    }
    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let p = header.len() - 1;
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|j| rows.iter().map(|r| r[j + 1]).collect())
        .collect();
    let labels: Vec<String> = header[1..].to_vec();
    let design = Design::from_columns(DesignKind::File, n, labels, columns)?;
    Ok((y, design))
}

/// Center each column and scale it to unit norm over the full sample.
/// A constant column centers to zero and is left as an inert zero
/// column rather than failing the run.
fn standardized_mains(mains: &Design) -> Result<Design> {
    let n = mains.n();
    let columns: Vec<Vec<f64>> = (0..mains.p())
        .map(|j| {
            let col = mains.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                centered.iter().map(|v| v / norm).collect()
            } else {
                centered
            }
        })
        .collect();
    Design::from_columns(DesignKind::File, n, mains.labels().to_vec(), columns)
}

fn min_test_mse(
    train: &Design,
    y_train: &[f64],
    test: &Design,
    y_test: &[f64],
    fit: &FitConfig,
) -> Result<(f64, Vec<usize>)> {
    let path = fit_path(train, y_train, fit)?;
    let eval = evaluate_path(
        &path,
        train,
        y_train,
        &EvalTarget::TestSet {
            design: test,
            y: y_test,
        },
        false,
    )?;
    // lambda_star is copied out of path.lambdas, so exact equality
    // recovers its index.
    let k = path
        .lambdas
        .iter()
        .position(|&l| l == eval.lambda_star)
        .expect("lambda_star comes from the path");
    Ok((eval.min_value, path.active_sets[k].clone()))
}

/// Run the split comparison on a loaded table.
pub fn analyze(header: &[String], rows: &[Vec<f64>], options: &AnalyzeOptions) -> Result<AnalyzeReport> {
    if options.splits == 0 {
        return Err(Error::Domain("need at least one split".into()));
    }
    if !(options.train_fraction > 0.0 && options.train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction must lie in (0, 1), got {}",
            options.train_fraction
        )));
    }
    let (y, mut mains) = split_response(header, rows)?;
    let n = mains.n();
    if n < 4 {
        return Err(Error::Dimension(format!(
            "need at least 4 rows to split, got {n}"
        )));
    }
    if options.standardize_mains {
        mains = standardized_mains(&mains)?;
    }
    let main_design = expand_interactions(&mains, 1)?;
    let pairwise_design = expand_interactions(&mains, 2)?;

    let train_size = ((options.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut outcomes = Vec::with_capacity(options.splits);
    for s in 0..options.splits {
        let mut stream = RngStream::new(
            options.seed,
            replicate_stream(s as u64, StreamPurpose::TrainingNoise),
        );
        let perm = stream.permutation(n);
        let (train_rows, test_rows) = perm.split_at(train_size);
        let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
        let y_test: Vec<f64> = test_rows.iter().map(|&i| y[i]).collect();

        let main_train = main_design.select_rows(train_rows)?;
        let main_test = main_design.select_rows(test_rows)?;
        let (main_mse, _) = min_test_mse(&main_train, &y_train, &main_test, &y_test, &options.fit)?;

        let pair_train = pairwise_design.select_rows(train_rows)?;
        let pair_test = pairwise_design.select_rows(test_rows)?;
        let (pairwise_mse, active) =
            min_test_mse(&pair_train, &y_train, &pair_test, &y_test, &options.fit)?;

        let interactions: Vec<String> = active
            .iter()
            .map(|&j| pairwise_design.labels()[j].clone())
            .filter(|l| l.contains(':'))
            .collect();
        let ratio = if main_mse == 0.0 {
            if pairwise_mse == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            pairwise_mse / main_mse
        };
        outcomes.push(SplitOutcome {
            split: s,
            main_mse,
            pairwise_mse,
            ratio,
            interactions,
        });
    }

    let main_mses: Vec<f64> = outcomes.iter().map(|o| o.main_mse).collect();
    let pair_mses: Vec<f64> = outcomes.iter().map(|o| o.pairwise_mse).collect();
    let ratios: Vec<f64> = outcomes.iter().map(|o| o.ratio).collect();
    // A single split gives the signed-rank test nothing to work with,
    // and all-zero differences leave it undefined; the medians still
    // stand on their own in those cases.
    let wilcoxon = if options.splits >= 2 {
        wilcoxon_signed_rank(&pair_mses, &main_mses, options.alpha).ok()
    } else {
        None
    };

    let mut always: Vec<String> = outcomes
        .first()
        .map(|o| o.interactions.clone())
        .unwrap_or_default();
    for o in &outcomes[1..] {
        always.retain(|l| o.interactions.contains(l));
    }
    always.sort();

    Ok(AnalyzeReport {
        n,
        main_effects: mains.p(),
        main_dim: main_design.p(),
        pairwise_dim: pairwise_design.p(),
        train_size,
        splits: outcomes,
        median_main_mse: median(&main_mses)?,
        median_pairwise_mse: median(&pair_mses)?,
        median_ratio: median(&ratios)?,
        wilcoxon,
        always_selected: always,
    })
}
