//! Scalar statistics: the standard normal distribution to near machine
//! precision, medians, and the Wilcoxon signed-rank test.
//!
//! The normal CDF is a hand-rolled Cody-style rational approximation of
//! erfc rather than a series, because the simulation harness evaluates it
//! in hot loops and the theory module needs absolute error below 1e-12
//! over the full double range, tails included.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_PI: f64 = 0.564189583_547756287;

// Rational coefficients for erf on [0, 0.46875].
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];

// Rational coefficients for erfc on (0.46875, 4].
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];

// Rational coefficients for erfc beyond 4 (asymptotic correction).
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

/// erf on [0, 0.46875] via the low-range rational form.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// exp(-y^2) evaluated as exp(-ysq^2) * exp(-(y-ysq)(y+ysq)) with ysq a
/// 1/16 grid point, which keeps the relative error of the product small.
fn exp_neg_square(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// erfc(y) for y > 0.46875.
fn erfc_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        exp_neg_square(y) * (num + ERF_C[7]) / (den + ERF_D[7])
    } else if y < 26.6 {
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        exp_neg_square(y) * (FRAC_1_SQRT_PI - r) / y
    } else {
        // erfc(26.6) < 5e-309: below the smallest positive normal double.
        0.0
    }
}

/// Complementary error function, absolute and relative error near machine
/// precision for positive arguments.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let tail = if y <= 0.46875 {
        1.0 - erf_small(y)
    } else {
        erfc_tail(y)
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    let v = if y <= 0.46875 {
        erf_small(y)
    } else {
        1.0 - erfc_tail(y)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Standard normal CDF. Absolute error below 1e-14 everywhere; relative
/// error stays small deep into the lower tail because the x < 0 branch
/// goes through erfc of a positive argument directly.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc(x * FRAC_1_SQRT_2)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    const FRAC_1_SQRT_2PI: f64 = 0.398942280_401432678;
    (-0.5 * x * x).exp() * FRAC_1_SQRT_2PI
}

// Acklam's rational initial guess for the normal quantile.
const Q_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const Q_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const Q_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const Q_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

fn quantile_guess(u: f64) -> f64 {
    const U_LOW: f64 = 0.02425;
    if u < U_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((Q_C[0] * q + Q_C[1]) * q + Q_C[2]) * q + Q_C[3]) * q + Q_C[4]) * q + Q_C[5])
            / ((((Q_D[0] * q + Q_D[1]) * q + Q_D[2]) * q + Q_D[3]) * q + 1.0)
    } else if u <= 1.0 - U_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((Q_A[0] * r + Q_A[1]) * r + Q_A[2]) * r + Q_A[3]) * r + Q_A[4]) * r + Q_A[5]) * q
            / (((((Q_B[0] * r + Q_B[1]) * r + Q_B[2]) * r + Q_B[3]) * r + Q_B[4]) * r + 1.0)
    } else {
        -quantile_guess(1.0 - u)
    }
}

/// Standard normal quantile on (0, 1), rational guess plus two Halley
/// refinements against `normal_cdf`. Round-trips with the CDF to within
/// a few ulps across the usable range.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires u in (0, 1), got {u}"
        )));
    }
    // Refine in the lower tail only: there the CDF is computed through
    // erfc of a positive argument and is relatively precise, so the
    // residual Phi(x) - u resolves x to full precision. Near u = 1 the
    // direct residual would be swamped by the spacing of doubles around
    // 1 (the subtraction 1 - u is exact for u >= 1/2).
    if u > 0.5 {
        Ok(-quantile_lower(1.0 - u))
    } else {
        Ok(quantile_lower(u))
    }
}

/// Quantile for u in (0, 1/2], refined against the lower-tail CDF.
fn quantile_lower(u: f64) -> f64 {
    let mut x = quantile_guess(u);
    for _ in 0..2 {
        let e = normal_cdf(x) - u;
        let d = normal_pdf(x);
        if d == 0.0 {
            break;
        }
        let r = e / d;
        // Halley step: Newton corrected by the curvature phi'(x) = -x phi(x).
        x -= r / (1.0 + 0.5 * x * r).max(0.5);
    }
    x
}

/// Median with `total_cmp` ordering. Infinite values are legal inputs
/// (an infinite ratio sorts above every finite one); NaN is rejected
/// because it has no place in an ordering.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("median of an empty list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("median over NaN values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Ok(sorted[m])
    } else {
        Ok(0.5 * (sorted[m - 1] + sorted[m]))
    }
}

/// Mean of a nonempty slice.
pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("mean of an empty list".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Binomial standard error sqrt(f (1 - f) / n) of an observed frequency.
pub fn binomial_std_error(frequency: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&frequency) {
        return Err(Error::Domain(format!(
            "frequency must lie in [0, 1], got {frequency}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("binomial standard error with n = 0".into()));
    }
    Ok((frequency * (1.0 - frequency) / n as f64).sqrt())
}

/// Largest number of nonzero pairs for which the signed-rank null
/// distribution is enumerated exactly; above it a normal approximation
/// with tie correction and continuity correction takes over.
pub const WILCOXON_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone)]
pub struct WilcoxonOutcome {
    /// Sum of ranks of the positive differences (W+), with average ranks
    /// assigned to tied absolute differences.
    pub statistic: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n_effective: usize,
    pub p_two_sided: f64,
    /// P(W+ >= observed) under the null; small when x tends to exceed y.
    pub p_one_sided_greater: f64,
    pub p_one_sided_less: f64,
    /// Whether `p_two_sided <= alpha`.
    pub significant: bool,
    /// True when the exact enumerated distribution was used.
    pub exact: bool,
}

/// Wilcoxon signed-rank test for paired samples.
///
/// Zero differences are dropped (exact float equality; ties arise from
/// identical evaluations, not rounding noise). Tied absolute differences
/// receive average ranks. Up to [`WILCOXON_EXACT_LIMIT`] effective pairs
/// the distribution of W+ is enumerated exactly by dynamic programming
/// over doubled (hence integral) ranks; beyond it the tie-corrected
/// normal approximation with continuity correction is used. Two-sided
/// p is twice the smaller tail, capped at 1.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alpha: f64) -> Result<WilcoxonOutcome> {
    wilcoxon_signed_rank_with_limit(x, y, alpha, WILCOXON_EXACT_LIMIT)
}

/// [`wilcoxon_signed_rank`] with an explicit exact-enumeration cutoff.
/// Passing 0 forces the normal approximation regardless of sample size;
/// useful for checking the two routes against each other.
pub fn wilcoxon_signed_rank_with_limit(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    exact_limit: usize,
) -> Result<WilcoxonOutcome> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::Domain("NaN difference in paired samples".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Err(Error::Domain(
            "all paired differences are zero; the signed-rank test carries no information".into(),
        ));
    }

    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // Doubled average ranks are integers even with ties.
    let mut ranks2 = vec![0u64; n];
    let mut tie_correction = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let tied = (j - i + 1) as f64;
        // Average of ranks i+1 ..= j+1, doubled: (i+1) + (j+1).
        let r2 = (i + j + 2) as u64;
        for r in ranks2.iter_mut().take(j + 1).skip(i) {
            *r = r2;
        }
        tie_correction += tied * tied * tied - tied;
        i = j + 1;
    }

    let w2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let statistic = w2 as f64 / 2.0;

    let (p_greater, p_less, exact) = if n <= exact_limit {
        let total: u64 = ranks2.iter().sum();
        // dp[s] = number of sign assignments whose positive doubled ranks sum to s.
        let mut dp = vec![0u64; total as usize + 1];
        dp[0] = 1;
        for &r in &ranks2 {
            let r = r as usize;
            for s in (r..dp.len()).rev() {
                dp[s] += dp[s - r];
            }
        }
        let denom = 2f64.powi(n as i32);
        let ge: u64 = dp[w2 as usize..].iter().sum();
        let le: u64 = dp[..=w2 as usize].iter().sum();
        (ge as f64 / denom, le as f64 / denom, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction / 48.0;
        if var <= 0.0 {
            return Err(Error::Domain(
                "signed-rank variance vanished (all differences tied)".into(),
            ));
        }
        let sd = var.sqrt();
        let pg = 1.0 - normal_cdf((statistic - 0.5 - mean) / sd);
        let pl = normal_cdf((statistic + 0.5 - mean) / sd);
        (pg, pl, false)
    };

    let p_two_sided = (2.0 * p_greater.min(p_less)).min(1.0);
    Ok(WilcoxonOutcome {
        statistic,
        n_effective: n,
        p_two_sided,
        p_one_sided_greater: p_greater,
        p_one_sided_less: p_less,
        significant: p_two_sided <= alpha,
        exact,
    })
}
