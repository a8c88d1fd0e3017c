//! Command-line front end: analytic probability calculators, seeded
//! experiment runs, oracle-bound curves, and a split-and-refit dataset
//! comparison, all emitting plot-ready text or CSV.
//!
//! Exit codes: 0 success, 2 usage or argument-domain error, 3 data
//! error (unreadable or malformed input, refused output), 4 numerical
//! failure.

use clap::{Args, Parser, Subcommand};
use lassopt::theory::{TABLE1_MAIN_COUNTS, TABLE1_ORDERS};
use lassopt::{
    analyze, bound_ratio_curve, format_number, load_numeric_csv, parse_config, run_experiment,
    table1, write_outputs, AnalyzeOptions, AnalyzeReport, BoundKind, DeteriorationQuery, Error,
    ExperimentResult, TailPolicy,
};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

/// Built-in experiment configurations, compiled in so `simulate` runs
/// without any files at hand.
const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../../../configs/fig1.conf")),
    ("fig2", include_str!("../../../configs/fig2.conf")),
    ("fig3", include_str!("../../../configs/fig3.conf")),
    ("fig4", include_str!("../../../configs/fig4.conf")),
    ("fig5", include_str!("../../../configs/fig5.conf")),
    ("appendixB", include_str!("../../../configs/appendixB.conf")),
    ("mc-check", include_str!("../../../configs/mc-check.conf")),
    ("table1", include_str!("../../../configs/table1.conf")),
];

#[derive(Parser)]
#[command(
    name = "lassopt",
    version,
    about = "Optimally tuned lasso analysis: exact orthonormal theory, oracle bounds, \
             seeded experiments, and dataset comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form deterioration probabilities
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Run a seeded experiment from a config file or built-in preset
    Simulate(SimulateArgs),
    /// Oracle-bound values and growth ratios along a dimension grid
    Bounds(BoundsArgs),
    /// Compare main-effects-only fits against pairwise-expanded fits on a CSV dataset
    Analyze(AnalyzeArgs),
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Probability that offering p predictors strictly worsens the tuned loss
    Prob(ProbArgs),
    /// Probability grid over balanced factorial expansions
    Table1(Table1Args),
}

#[derive(Args)]
struct ProbArgs {
    /// Signal coefficient (nonzero)
    #[arg(long, allow_hyphen_values = true)]
    beta1: f64,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of offered predictors (at least 2)
    #[arg(long)]
    p: usize,
    /// Condition on the noisy signal coordinate keeping its sign
    #[arg(long)]
    given_sign: bool,
    /// Emit a machine-readable CSV row instead of the rounded value
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct Table1Args {
    /// Signal coefficient (nonzero)
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    beta1: f64,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Emit long-form CSV instead of the aligned table
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config file path (exactly one of --config / --preset)
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name
    #[arg(long, value_name = "NAME", value_parser = preset_names())]
    preset: Option<String>,
    /// Directory for rows.csv, summary.csv, metadata.json
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads (default: all cores; output bytes never depend on this)
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
    /// Write into a nonempty output directory
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Which bound: compat (compatibility) or re (restricted eigenvalue)
    #[arg(long, value_parser = ["compat", "re"])]
    kind: String,
    /// Sample size
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Dimension grid: comma list (6,20,100) or inclusive range (6..100)
    #[arg(long, value_name = "GRID", default_value = "6..100")]
    p_grid: String,
    /// Reference dimension the ratios are taken against
    #[arg(long, default_value_t = 6)]
    p0: usize,
    /// Noise variance
    #[arg(long, default_value_t = 4.0)]
    sigma2: f64,
    /// Coverage level in (0, 1) the tail parameters are solved for
    #[arg(long, default_value_t = 0.95)]
    coverage: f64,
    /// Compatibility constant of the design
    #[arg(long, default_value_t = 1.0)]
    psi0: f64,
    /// Restricted eigenvalue of the design
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Hold the tail constant A fixed instead of re-solving it per
    /// dimension (restricted-eigenvalue bound only; needs A > 2 sqrt 2)
    #[arg(long, value_name = "A")]
    fixed_a: Option<f64>,
    /// Write the CSV to a file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV dataset: header row then numeric cells; the response is the
    /// first column unless --response names another
    #[arg(value_name = "CSV")]
    dataset: PathBuf,
    /// Response column name
    #[arg(long, value_name = "NAME")]
    response: Option<String>,
    /// Number of random train/test splits
    #[arg(long, default_value_t = 50)]
    splits: usize,
    /// Training fraction of each split
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Split-permutation seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Significance level for the signed-rank comparison
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Center and unit-norm the main-effect columns before expansion
    #[arg(long)]
    standardize: bool,
    /// Emit per-split CSV instead of the text report
    #[arg(long)]
    csv: bool,
}

fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|&(name, _)| name).collect()
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::Dimension(_) => 2,
        Error::Config { .. } | Error::Parse { .. } | Error::Refused(_) | Error::Io(_) => 3,
        Error::NonConvergence { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Theory(TheoryCommand::Prob(args)) => cmd_prob(args),
        Command::Theory(TheoryCommand::Table1(args)) => cmd_table1(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn cmd_prob(args: ProbArgs) -> Result<(), Error> {
    let query = DeteriorationQuery::new(args.beta1, args.sigma, args.p)?;
    let value = if args.given_sign {
        lassopt::prob_deterioration_given_sign(&query)
    } else {
        lassopt::prob_deterioration(&query)
    };
    if args.csv {
        println!("beta1,sigma,p,given_sign,probability");
        println!(
            "{},{},{},{},{}",
            format_number(args.beta1),
            format_number(args.sigma),
            args.p,
            args.given_sign,
            format_number(value)
        );
    } else {
        println!("{value:.4}");
    }
    Ok(())
}

fn cmd_table1(args: Table1Args) -> Result<(), Error> {
    let grid = table1(args.beta1, args.sigma)?;
    if args.csv {
        println!("order,main_effects,predictors,probability");
        for (i, &order) in TABLE1_ORDERS.iter().enumerate() {
            for (j, &mains) in TABLE1_MAIN_COUNTS.iter().enumerate() {
                if let (Some(p), Some(prob)) = (grid.dims[i][j], grid.cells[i][j]) {
                    println!("{order},{mains},{p},{}", format_number(prob));
                }
            }
        }
        return Ok(());
    }

    const ROW_LABELS: [&str; 4] = ["main effects", "+ two-way", "+ three-way", "+ four-way"];
    println!(
        "Deterioration probability by interaction order and main-effect count \
         (signal {}, noise sd {})",
        args.beta1, args.sigma
    );
    let mut header = format!("{:<14}", "");
    for &mains in &TABLE1_MAIN_COUNTS {
        let _ = write!(header, "{:>9}", format!("m={mains}"));
    }
    println!("{header}");
    for (i, label) in ROW_LABELS.iter().enumerate() {
        let mut line = format!("{label:<14}");
        for j in 0..TABLE1_MAIN_COUNTS.len() {
            match grid.cells[i][j] {
                Some(prob) => {
                    let _ = write!(line, "{:>9}", format!("{prob:.4}"));
                }
                None => line.push_str(&" ".repeat(9)),
            }
        }
        println!("{}", line.trim_end());
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let text = match (&args.config, &args.preset) {
        (Some(path), None) => std::fs::read_to_string(path)?,
        (None, Some(name)) => PRESETS
            .iter()
            .find(|&&(n, _)| n == name)
            .map(|&(_, text)| text.to_string())
            .expect("preset names are validated by the parser"),
        // clap enforces exactly one source.
        _ => unreachable!("--config and --preset are mutually exclusive and one is required"),
    };
    let config = parse_config(&text)?;
    let result = run_with_threads(args.threads, &config)?;
    let files = write_outputs(&result, &args.out, args.force)?;
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn run_with_threads(
    threads: Option<usize>,
    config: &lassopt::ExperimentConfig,
) -> Result<ExperimentResult, Error> {
    match threads {
        None => run_experiment(config),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Domain(format!("cannot build a {k}-thread pool: {e}")))?;
            pool.install(|| run_experiment(config))
        }
    }
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Error> {
    let kind = match args.kind.as_str() {
        "compat" => BoundKind::Compat,
        _ => BoundKind::RestrictedEigenvalue,
    };
    let policy = match args.fixed_a {
        Some(a) => TailPolicy::FixedA(a),
        None => TailPolicy::FixedCoverage,
    };
    let p_grid = parse_p_grid(&args.p_grid)?;
    let curve = bound_ratio_curve(
        kind,
        args.n,
        &p_grid,
        args.p0,
        args.sigma2,
        args.psi0,
        args.kappa,
        args.coverage,
        policy,
    )?;
    let mut out = String::from("p,tail,bound,ratio\n");
    for point in &curve {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            point.p,
            format_number(point.tail),
            format_number(point.bound),
            format_number(point.ratio)
        );
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn parse_p_grid(text: &str) -> Result<Vec<usize>, Error> {
    let bad = |msg: String| Error::Domain(format!("invalid --p-grid `{text}`: {msg}"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{lo}` is not a dimension")))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{hi}` is not a dimension")))?;
        if hi < lo {
            return Err(bad(format!("range {lo}..{hi} is empty")));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| bad(format!("`{}` is not a dimension", part.trim())))
        })
        .collect()
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.dataset)?;
    let (mut header, mut rows) = load_numeric_csv(&text)?;
    if let Some(name) = &args.response {
        let pos = header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: 0,
            message: format!(
                "response column `{name}` not found; columns are {}",
                header.join(", ")
            ),
        })?;
        // The analysis treats the first column as the response; rotating
        // keeps the predictors' relative order (and hence interaction
        // labels) independent of where the response sat.
        header[..=pos].rotate_right(1);
        for row in &mut rows {
            row[..=pos].rotate_right(1);
        }
    }
    let options = AnalyzeOptions {
        splits: args.splits,
        train_fraction: args.fraction,
        seed: args.seed,
        alpha: args.alpha,
        standardize_mains: args.standardize,
        ..AnalyzeOptions::default()
    };
    let report = analyze(&header, &rows, &options)?;
    if args.csv {
        print_analyze_csv(&report);
    } else {
        print_analyze_report(&report, &args, &header);
    }
    Ok(())
}

fn print_analyze_csv(report: &AnalyzeReport) {
    println!("split,main_mse,pairwise_mse,ratio,interactions");
    for split in &report.splits {
        println!(
            "{},{},{},{},{}",
            split.split,
            format_number(split.main_mse),
            format_number(split.pairwise_mse),
            format_number(split.ratio),
            split.interactions.join(";")
        );
    }
}

fn print_analyze_report(report: &AnalyzeReport, args: &AnalyzeArgs, header: &[String]) {
    println!(
        "dataset: {} rows, response `{}`, {} main effects (standardize {})",
        report.n,
        header[0],
        report.main_effects,
        if args.standardize { "on" } else { "off" }
    );
    println!(
        "dictionaries: {} main-effect columns, {} with pairwise interactions",
        report.main_dim, report.pairwise_dim
    );
    println!(
        "splits: {} at train size {} (fraction {}), seed {}",
        report.splits.len(),
        report.train_size,
        args.fraction,
        args.seed
    );
    println!("median test MSE, main effects only:  {:.6}", report.median_main_mse);
    println!("median test MSE, with interactions:  {:.6}", report.median_pairwise_mse);
    println!("median MSE ratio (pairwise / main):  {:.4}", report.median_ratio);
    match &report.wilcoxon {
        Some(w) => {
            println!(
                "signed-rank two-sided p = {:.6} at alpha {}: {} ({} route)",
                w.p_two_sided,
                args.alpha,
                if w.significant {
                    "significant"
                } else {
                    "not significant"
                },
                if w.exact { "exact" } else { "approximate" }
            );
            println!(
                "  one-sided p, pairwise worse: {:.6}; pairwise better: {:.6}",
                w.p_one_sided_greater, w.p_one_sided_less
            );
        }
        None => println!("signed-rank comparison not computed (needs at least 2 splits)"),
    }
    if report.always_selected.is_empty() {
        println!("interactions selected in every split: none");
    } else {
        println!(
            "interactions selected in every split: {}",
            report.always_selected.join(", ")
        );
    }
}
