//! Exact analysis of loss-optimal lasso tuning on orthonormal designs,
//! oracle bound scaling, a coordinate-descent path solver that
//! cross-checks the closed forms, and a deterministic Monte Carlo
//! harness around them.

pub mod analyze;
pub mod bounds;
pub mod config;
pub mod design;
pub mod error;
pub mod experiments;
pub mod ortho;
pub mod path;
pub mod rng;
pub mod stats;
pub mod theory;

pub use analyze::{analyze, load_numeric_csv, AnalyzeOptions, AnalyzeReport, SplitOutcome};
pub use bounds::{
    bound_compat, bound_ratio_curve, bound_re, coverage_of_a, coverage_of_t, solve_a, solve_t,
    BoundCurvePoint, BoundKind, BoundParams, TailPolicy,
};
pub use config::{growing_reference_dim, parse_config, parse_seed, ExperimentConfig, ExperimentKind};
pub use design::{
    expand_interactions, gen_gaussian_design, gen_response, gen_trig_design, Design, DesignKind,
    GeneratingModel, Realization,
};
pub use error::{Error, Result};
pub use experiments::{
    format_number, run_experiment, summarize, write_outputs, ExperimentResult,
};
pub use ortho::{
    exact_loss_minimum, exact_refit_minimum, loss_curve, optimal_multi, optimal_single,
    oracle_grid_min, soft_threshold, CaseTag, OrthoInstance, OrthoOptimum,
};
pub use path::{
    evaluate_path, fit_path, kkt_max_violation, lambda_max, refit_ols, Criterion, EvalTarget,
    FitConfig, LambdaGrid, PathEvaluation, RefitOutcome, RegularizationPath,
};
pub use rng::{replicate_stream, RngStream, StreamPurpose, DESIGN_STREAM};
pub use stats::{
    binomial_std_error, mean, median, normal_cdf, normal_pdf, normal_quantile,
    wilcoxon_signed_rank, wilcoxon_signed_rank_with_limit, WilcoxonOutcome, WILCOXON_EXACT_LIMIT,
};
pub use theory::{
    anova_predictor_count, mc_prob_deterioration, prob_deterioration,
    prob_deterioration_given_sign, table1, DeteriorationQuery, McDeterioration, Table1,
};
