//! Experiment configuration: a flat `key = value` file format with
//! line-aware error reporting, kind-specific defaults, and validation.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored.
//! Seeds accept decimal or `0x`-prefixed hex. Grids are comma-separated.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::path::{FitConfig, LambdaGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Exact tuned loss on a trig design as dimension grows, against the
    /// loss at the reference dimension.
    OrthoRatioVsP,
    /// Same losses compared against oracle bounds at fixed coverage.
    BoundConservatism,
    /// Growing n with p tracking 2 log n versus p = n.
    GrowingN,
    /// Grid-resolved lasso loss ratios on an iid Gaussian design.
    GaussianRatioVsP,
    /// Lasso versus lasso-then-least-squares on the trig design.
    LassoPlusOls,
    /// Held-out prediction error ratios on a Gaussian design.
    MseRatio,
    /// Monte Carlo check of the closed-form deterioration probability.
    McTheoremCheck,
    /// Analytic deterioration-probability grid (no simulation).
    AnalyticTable1,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<ExperimentKind> {
        Some(match s {
            "ortho-ratio-vs-p" => ExperimentKind::OrthoRatioVsP,
            "bound-conservatism" => ExperimentKind::BoundConservatism,
            "growing-n" => ExperimentKind::GrowingN,
            "gaussian-ratio-vs-p" => ExperimentKind::GaussianRatioVsP,
            "lasso-plus-ols" => ExperimentKind::LassoPlusOls,
            "mse-ratio" => ExperimentKind::MseRatio,
            "mc-theorem-check" => ExperimentKind::McTheoremCheck,
            "table1" => ExperimentKind::AnalyticTable1,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::OrthoRatioVsP => "ortho-ratio-vs-p",
            ExperimentKind::BoundConservatism => "bound-conservatism",
            ExperimentKind::GrowingN => "growing-n",
            ExperimentKind::GaussianRatioVsP => "gaussian-ratio-vs-p",
            ExperimentKind::LassoPlusOls => "lasso-plus-ols",
            ExperimentKind::MseRatio => "mse-ratio",
            ExperimentKind::McTheoremCheck => "mc-theorem-check",
            ExperimentKind::AnalyticTable1 => "table1",
        }
    }

    /// Kinds whose design is the trigonometric one (orthonormal fits,
    /// no intercept, no standardization by default).
    pub fn is_trig(&self) -> bool {
        matches!(
            self,
            ExperimentKind::OrthoRatioVsP
                | ExperimentKind::BoundConservatism
                | ExperimentKind::GrowingN
                | ExperimentKind::LassoPlusOls
        )
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(
            self,
            ExperimentKind::GaussianRatioVsP | ExperimentKind::MseRatio
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    /// Growing-n only.
    pub n_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub p0: usize,
    /// Dense leading true coefficients; length p0.
    pub beta0: Vec<f64>,
    pub sigma2_grid: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    pub fit: FitConfig,
    /// Bound-conservatism only.
    pub coverage: f64,
    pub psi0: f64,
    pub kappa: f64,
    /// Mse-ratio only.
    pub test_n: usize,
    /// Mc-theorem-check and table1 only.
    pub beta1: f64,
    /// Odd trig dimensions rounded up to even: (requested, used).
    pub rounded_p: Vec<(usize, usize)>,
    /// Raw parsed pairs, echoed into run metadata.
    pub raw_pairs: Vec<(String, String)>,
}

struct Raw {
    map: HashMap<String, (String, usize)>,
    pairs: Vec<(String, String)>,
}

impl Raw {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }
}

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "n",
    "n_grid",
    "p_grid",
    "p0",
    "beta0",
    "sigma2_grid",
    "replicates",
    "master_seed",
    "lambda_count",
    "lambda_min_ratio",
    "tol",
    "max_sweeps",
    "intercept",
    "standardize",
    "coverage",
    "psi0",
    "kappa",
    "test_n",
    "beta1",
];

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn scan(text: &str) -> Result<Raw> {
    let mut map = HashMap::new();
    let mut pairs = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_string();
        let value = value.trim();
        // Allow a trailing comment after the value.
        let value = value
            .split_once('#')
            .map(|(v, _)| v.trim())
            .unwrap_or(value)
            .to_string();
        if key.is_empty() {
            return Err(err(line_no, "empty key"));
        }
        if value.is_empty() {
            return Err(err(line_no, format!("key `{key}` has an empty value")));
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(err(line_no, format!("unknown key `{key}`")));
        }
        if map.insert(key.clone(), (value.clone(), line_no)).is_some() {
            return Err(err(line_no, format!("duplicate key `{key}`")));
        }
        pairs.push((key, value));
    }
    Ok(Raw { map, pairs })
}

fn parse_usize(value: &str, line: usize, key: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| err(line, format!("`{key}` expects a nonnegative integer, got `{value}`")))
}

fn parse_f64(value: &str, line: usize, key: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| err(line, format!("`{key}` expects a number, got `{value}`")))?;
    if !v.is_finite() {
        return Err(err(line, format!("`{key}` must be finite, got `{value}`")));
    }
    Ok(v)
}

/// Seeds accept decimal or 0x-prefixed hexadecimal.
pub fn parse_seed(value: &str) -> std::result::Result<u64, String> {
    let v = value.trim();
    let parsed = if let Some(hex) = v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        v.parse()
    };
    parsed.map_err(|_| format!("expected a decimal or 0x-hex seed, got `{value}`"))
}

fn parse_list_usize(value: &str, line: usize, key: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| parse_usize(s.trim(), line, key))
        .collect()
}

fn parse_list_f64(value: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_f64(s.trim(), line, key))
        .collect()
}

fn parse_switch(value: &str, line: usize, key: &str) -> Result<Option<bool>> {
    match value {
        "auto" => Ok(None),
        "on" | "true" => Ok(Some(true)),
        "off" | "false" => Ok(Some(false)),
        _ => Err(err(
            line,
            format!("`{key}` expects on/off/auto, got `{value}`"),
        )),
    }
}

/// Round a requested trig dimension up to the next even value.
fn even_up(p: usize) -> usize {
    p + p % 2
}

/// Reference dimension for a sample size n: round(2 ln n), rounded up to
/// even so it is a whole number of sine/cosine pairs.
pub fn growing_reference_dim(n: usize) -> usize {
    even_up((2.0 * (n as f64).ln()).round() as usize)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw = scan(text)?;

    let (kind_str, kind_line) = raw
        .get("kind")
        .ok_or_else(|| err(0, "missing required key `kind`"))?;
    let kind = ExperimentKind::parse(kind_str).ok_or_else(|| {
        err(
            kind_line,
            format!(
                "unknown kind `{kind_str}`; expected one of ortho-ratio-vs-p, \
                 bound-conservatism, growing-n, gaussian-ratio-vs-p, \
                 lasso-plus-ols, mse-ratio, mc-theorem-check, table1"
            ),
        )
    })?;

    let n = match raw.get("n") {
        Some((v, l)) => {
            let n = parse_usize(v, l, "n")?;
            if n < 2 {
                return Err(err(l, format!("n must be at least 2, got {n}")));
            }
            n
        }
        None => 100,
    };

    let n_grid = match raw.get("n_grid") {
        Some((v, l)) => {
            if kind != ExperimentKind::GrowingN {
                return Err(err(l, "`n_grid` only applies to kind growing-n"));
            }
            let grid = parse_list_usize(v, l, "n_grid")?;
            if grid.is_empty() {
                return Err(err(l, "`n_grid` must not be empty"));
            }
            for w in grid.windows(2) {
                if w[1] <= w[0] {
                    return Err(err(l, "`n_grid` must be strictly increasing"));
                }
            }
            for &nv in &grid {
                if nv % 2 != 0 {
                    return Err(err(
                        l,
                        format!("growing-n sample sizes must be even (p = n fits), got {nv}"),
                    ));
                }
            }
            grid
        }
        None if kind == ExperimentKind::GrowingN => vec![50, 100, 200, 400, 800],
        None => Vec::new(),
    };

    // beta0 / p0 reconciliation: beta0 wins; p0 alone truncates the
    // default signal.
    const DEFAULT_BETA0: [f64; 6] = [6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
    let beta0: Vec<f64> = match (raw.get("beta0"), raw.get("p0")) {
        (Some((v, l)), p0_entry) => {
            let b = parse_list_f64(v, l, "beta0")?;
            if b.is_empty() || b.iter().any(|x| *x == 0.0) {
                return Err(err(l, "`beta0` entries must be nonzero"));
            }
            if let Some((pv, pl)) = p0_entry {
                let p0 = parse_usize(pv, pl, "p0")?;
                if p0 != b.len() {
                    return Err(err(
                        pl,
                        format!("p0 = {p0} disagrees with beta0 of length {}", b.len()),
                    ));
                }
            }
            b
        }
        (None, Some((pv, pl))) => {
            let p0 = parse_usize(pv, pl, "p0")?;
            if p0 == 0 || p0 > DEFAULT_BETA0.len() {
                return Err(err(
                    pl,
                    format!(
                        "without `beta0`, p0 must lie in 1..={}, got {p0}",
                        DEFAULT_BETA0.len()
                    ),
                ));
            }
            DEFAULT_BETA0[..p0].to_vec()
        }
        (None, None) => DEFAULT_BETA0.to_vec(),
    };
    let p0 = beta0.len();

    let mut rounded_p = Vec::new();
    let p_grid = match raw.get("p_grid") {
        Some((v, l)) => {
            let mut grid = parse_list_usize(v, l, "p_grid")?;
            if grid.is_empty() {
                return Err(err(l, "`p_grid` must not be empty"));
            }
            if kind.is_trig() {
                for p in grid.iter_mut() {
                    let rounded = even_up(*p);
                    if rounded != *p {
                        rounded_p.push((*p, rounded));
                        *p = rounded;
                    }
                }
            }
            grid.sort_unstable();
            grid.dedup();
            grid
        }
        None => match kind {
            ExperimentKind::McTheoremCheck => vec![2, 10, 50],
            _ => vec![6, 20, 50, 100],
        },
    };

    let sigma2_grid = match raw.get("sigma2_grid") {
        Some((v, l)) => {
            let mut g = parse_list_f64(v, l, "sigma2_grid")?;
            if g.is_empty() || g.iter().any(|s| *s <= 0.0) {
                return Err(err(l, "`sigma2_grid` entries must be positive"));
            }
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
        None => match kind {
            k if k.is_gaussian() => vec![9.0, 625.0],
            ExperimentKind::McTheoremCheck | ExperimentKind::AnalyticTable1 => vec![1.0],
            _ => vec![4.0, 400.0],
        },
    };

    let replicates = match raw.get("replicates") {
        Some((v, l)) => {
            let r = parse_usize(v, l, "replicates")?;
            if r == 0 {
                return Err(err(l, "`replicates` must be at least 1"));
            }
            r
        }
        None => 500,
    };

    let master_seed = match raw.get("master_seed") {
        Some((v, l)) => parse_seed(v).map_err(|m| err(l, m))?,
        None => 42,
    };

    let lambda_count = match raw.get("lambda_count") {
        Some((v, l)) => {
            let c = parse_usize(v, l, "lambda_count")?;
            if c == 0 {
                return Err(err(l, "`lambda_count` must be at least 1"));
            }
            c
        }
        None => 100,
    };
    let lambda_min_ratio = match raw.get("lambda_min_ratio") {
        Some((v, l)) => {
            let r = parse_f64(v, l, "lambda_min_ratio")?;
            if !(r > 0.0 && r < 1.0) {
                return Err(err(l, "`lambda_min_ratio` must lie in (0, 1)"));
            }
            r
        }
        None => 1e-4,
    };
    let tol = match raw.get("tol") {
        Some((v, l)) => {
            let t = parse_f64(v, l, "tol")?;
            if t <= 0.0 {
                return Err(err(l, "`tol` must be positive"));
            }
            t
        }
        None => 1e-8,
    };
    let max_sweeps = match raw.get("max_sweeps") {
        Some((v, l)) => {
            let m = parse_usize(v, l, "max_sweeps")?;
            if m == 0 {
                return Err(err(l, "`max_sweeps` must be positive"));
            }
            m
        }
        None => 100_000,
    };
    let intercept = match raw.get("intercept") {
        Some((v, l)) => parse_switch(v, l, "intercept")?,
        None => None,
    };
    let standardize = match raw.get("standardize") {
        Some((v, l)) => parse_switch(v, l, "standardize")?,
        None => None,
    };
    // Orthonormal-design kinds fit the decoupled problem: no intercept,
    // no rescaling. Everything else centers and standardizes.
    let fit = FitConfig {
        intercept: intercept.unwrap_or(!kind.is_trig()),
        standardize: standardize.unwrap_or(!kind.is_trig()),
        grid: LambdaGrid::Log {
            count: lambda_count,
            min_ratio: lambda_min_ratio,
        },
        tol,
        max_sweeps,
    };

    let coverage = match raw.get("coverage") {
        Some((v, l)) => {
            let c = parse_f64(v, l, "coverage")?;
            if !(c > 0.0 && c < 1.0) {
                return Err(err(l, "`coverage` must lie in (0, 1)"));
            }
            c
        }
        None => 0.95,
    };
    let psi0 = match raw.get("psi0") {
        Some((v, l)) => {
            let x = parse_f64(v, l, "psi0")?;
            if x <= 0.0 {
                return Err(err(l, "`psi0` must be positive"));
            }
            x
        }
        None => 1.0,
    };
    let kappa = match raw.get("kappa") {
        Some((v, l)) => {
            let x = parse_f64(v, l, "kappa")?;
            if x <= 0.0 {
                return Err(err(l, "`kappa` must be positive"));
            }
            x
        }
        None => 1.0,
    };
    let test_n = match raw.get("test_n") {
        Some((v, l)) => {
            let t = parse_usize(v, l, "test_n")?;
            if t == 0 {
                return Err(err(l, "`test_n` must be at least 1"));
            }
            t
        }
        None => n,
    };
    let beta1 = match raw.get("beta1") {
        Some((v, l)) => {
            let b = parse_f64(v, l, "beta1")?;
            if b == 0.0 {
                return Err(err(l, "`beta1` must be nonzero"));
            }
            b
        }
        None => 3.0,
    };

    let config = ExperimentConfig {
        kind,
        n,
        n_grid,
        p_grid,
        p0,
        beta0,
        sigma2_grid,
        replicates,
        master_seed,
        fit,
        coverage,
        psi0,
        kappa,
        test_n,
        beta1,
        rounded_p,
        raw_pairs: raw.pairs,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    let domain = |m: String| Error::Domain(m);
    match config.kind {
        ExperimentKind::McTheoremCheck => {
            for &p in &config.p_grid {
                if p < 2 {
                    return Err(domain(format!(
                        "mc-theorem-check needs every p >= 2, got {p}"
                    )));
                }
            }
        }
        ExperimentKind::AnalyticTable1 => {
            if config.sigma2_grid.len() != 1 {
                return Err(domain(format!(
                    "table1 takes a single noise variance, got {} values",
                    config.sigma2_grid.len()
                )));
            }
        }
        ExperimentKind::GrowingN => {
            for &nv in &config.n_grid {
                let p1 = growing_reference_dim(nv);
                if p1 < config.p0 {
                    return Err(domain(format!(
                        "growing-n at n = {nv}: reference dimension {p1} cannot hold \
                         the {}-coefficient signal",
                        config.p0
                    )));
                }
                if p1 > nv {
                    return Err(domain(format!(
                        "growing-n at n = {nv}: reference dimension {p1} exceeds n"
                    )));
                }
            }
        }
        _ => {
            for &p in &config.p_grid {
                if p < config.p0 {
                    return Err(domain(format!(
                        "every p in the grid must be >= p0 = {}, got {p}",
                        config.p0
                    )));
                }
                if config.kind.is_trig() && p > config.n {
                    return Err(domain(format!(
                        "trig designs need p <= n, got p = {p}, n = {}",
                        config.n
                    )));
                }
            }
        }
    }
    Ok(())
}
