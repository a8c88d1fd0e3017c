//! Finite-sample oracle bounds on the lasso prediction loss and how they
//! scale with the ambient dimension.
//!
//! Two standard high-probability bounds are covered, each parameterized
//! by a tail variable that sets its coverage level:
//!
//! * a compatibility-constant bound
//!   64 sigma^2 p0 (t^2 + 2 log p) / (n psi0^2),
//!   holding with probability at least 1 - 2 exp(-t^2 / 2);
//! * a restricted-eigenvalue bound
//!   16 A^2 sigma^2 p0 log(p) / (n kappa^2),
//!   holding with probability at least 1 - p^(1 - A^2/8).
//!
//! Both grow like log p, so holding coverage fixed and dividing by the
//! bound at a reference dimension p0 isolates the predicted growth from
//! adding noise covariates.

use crate::error::{Error, Result};

/// Inputs for the oracle bounds. `t` drives the compatibility bound's
/// coverage, `a` the restricted-eigenvalue bound's; each bound reads only
/// its own tail parameter.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub n: usize,
    pub p: usize,
    /// Sparsity of the true model.
    pub p0: usize,
    pub sigma2: f64,
    /// Compatibility constant of the design.
    pub psi0: f64,
    /// Restricted eigenvalue of the design.
    pub kappa: f64,
    pub t: f64,
    pub a: f64,
}

impl BoundParams {
    /// Unit design constants; tail parameters to be filled by the caller
    /// (commonly from [`solve_t`] / [`solve_a`]).
    pub fn new(n: usize, p: usize, p0: usize, sigma2: f64) -> Result<BoundParams> {
        let params = BoundParams {
            n,
            p,
            p0,
            sigma2,
            psi0: 1.0,
            kappa: 1.0,
            t: f64::NAN,
            a: f64::NAN,
        };
        params.validate_common()?;
        Ok(params)
    }

    fn validate_common(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("bound needs n >= 1".into()));
        }
        if self.p < 2 {
            return Err(Error::Domain(format!(
                "bound needs p >= 2 (log p must be positive), got {}",
                self.p
            )));
        }
        if self.p0 == 0 || self.p0 > self.p {
            return Err(Error::Domain(format!(
                "sparsity must satisfy 1 <= p0 <= p, got p0 = {}, p = {}",
                self.p0, self.p
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma2 must be positive and finite, got {}",
                self.sigma2
            )));
        }
        if !(self.psi0 > 0.0 && self.psi0.is_finite()) {
            return Err(Error::Domain(format!(
                "psi0 must be positive and finite, got {}",
                self.psi0
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Domain(format!(
                "kappa must be positive and finite, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Compatibility-constant bound 64 sigma^2 p0 (t^2 + 2 log p) / (n psi0^2).
pub fn bound_compat(params: &BoundParams) -> Result<f64> {
    params.validate_common()?;
    if !(params.t > 0.0 && params.t.is_finite()) {
        return Err(Error::Domain(format!(
            "compatibility bound needs t > 0, got {}",
            params.t
        )));
    }
    let p = params.p as f64;
    Ok(64.0 * params.sigma2 * params.p0 as f64 * (params.t * params.t + 2.0 * p.ln())
        / (params.n as f64 * params.psi0 * params.psi0))
}

/// Restricted-eigenvalue bound 16 A^2 sigma^2 p0 log(p) / (n kappa^2).
pub fn bound_re(params: &BoundParams) -> Result<f64> {
    params.validate_common()?;
    if !(params.a > 0.0 && params.a.is_finite()) {
        return Err(Error::Domain(format!(
            "restricted-eigenvalue bound needs A > 0, got {}",
            params.a
        )));
    }
    let p = params.p as f64;
    Ok(16.0 * params.a * params.a * params.sigma2 * params.p0 as f64 * p.ln()
        / (params.n as f64 * params.kappa * params.kappa))
}

/// Coverage of the compatibility bound at tail parameter t.
pub fn coverage_of_t(t: f64) -> f64 {
    1.0 - 2.0 * (-0.5 * t * t).exp()
}

/// Coverage of the restricted-eigenvalue bound at tail parameter A and
/// dimension p.
pub fn coverage_of_a(a: f64, p: usize) -> f64 {
    let p = p as f64;
    1.0 - p.powf(1.0 - a * a / 8.0)
}

/// Tail parameter t with coverage exactly `coverage`:
/// t = sqrt(2 ln(2 / (1 - coverage))).
pub fn solve_t(coverage: f64) -> Result<f64> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Domain(format!(
            "coverage must lie in (0, 1), got {coverage}"
        )));
    }
    Ok((2.0 * (2.0 / (1.0 - coverage)).ln()).sqrt())
}

/// Tail parameter A with coverage exactly `coverage` at dimension p:
/// A = sqrt(8 (1 - ln(1 - coverage) / ln p)).
pub fn solve_a(coverage: f64, p: usize) -> Result<f64> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Domain(format!(
            "coverage must lie in (0, 1), got {coverage}"
        )));
    }
    if p < 2 {
        return Err(Error::Domain(format!("solve_a needs p >= 2, got {p}")));
    }
    Ok((8.0 * (1.0 - (1.0 - coverage).ln() / (p as f64).ln())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Compat,
    RestrictedEigenvalue,
}

/// How the restricted-eigenvalue tail parameter moves along a dimension
/// grid.
#[derive(Debug, Clone, Copy)]
pub enum TailPolicy {
    /// Re-solve the tail parameter at every p so coverage stays fixed.
    FixedCoverage,
    /// Hold A fixed (coverage then drifts with p). Only meaningful for
    /// the restricted-eigenvalue bound; the compatibility t never depends
    /// on p in the first place.
    FixedA(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct BoundCurvePoint {
    pub p: usize,
    /// Tail parameter actually used at this p.
    pub tail: f64,
    pub bound: f64,
    /// bound(p) / bound(p0) with the same policy applied at p0.
    pub ratio: f64,
}

/// Bound values and their growth ratios along a dimension grid, relative
/// to the bound at the reference dimension p0 with the same coverage.
pub fn bound_ratio_curve(
    kind: BoundKind,
    n: usize,
    p_grid: &[usize],
    p0: usize,
    sigma2: f64,
    psi0: f64,
    kappa: f64,
    coverage: f64,
    tail_policy: TailPolicy,
) -> Result<Vec<BoundCurvePoint>> {
    if p_grid.is_empty() {
        return Err(Error::Dimension("empty dimension grid".into()));
    }
    if p0 < 2 {
        return Err(Error::Domain(format!(
            "reference dimension p0 must be >= 2, got {p0}"
        )));
    }
    for &p in p_grid {
        if p < p0 {
            return Err(Error::Domain(format!(
                "grid dimension {p} is below the reference p0 = {p0}"
            )));
        }
    }
    if let TailPolicy::FixedA(a) = tail_policy {
        if kind == BoundKind::Compat {
            return Err(Error::Domain(
                "fixed-A policy applies to the restricted-eigenvalue bound only".into(),
            ));
        }
        if !(a * a > 8.0) {
            return Err(Error::Domain(format!(
                "fixed A = {a} gives vacuous coverage (needs A > 2 sqrt 2)"
            )));
        }
    }

    let at = |p: usize| -> Result<(f64, f64)> {
        let mut params = BoundParams::new(n, p, p0, sigma2)?;
        params.psi0 = psi0;
        params.kappa = kappa;
        match (kind, tail_policy) {
            (BoundKind::Compat, _) => {
                params.t = solve_t(coverage)?;
                Ok((params.t, bound_compat(&params)?))
            }
            (BoundKind::RestrictedEigenvalue, TailPolicy::FixedCoverage) => {
                params.a = solve_a(coverage, p)?;
                Ok((params.a, bound_re(&params)?))
            }
            (BoundKind::RestrictedEigenvalue, TailPolicy::FixedA(a)) => {
                params.a = a;
                Ok((a, bound_re(&params)?))
            }
        }
    };

    let (_, base) = at(p0)?;
    p_grid
        .iter()
        .map(|&p| {
            let (tail, bound) = at(p)?;
            Ok(BoundCurvePoint {
                p,
                tail,
                bound,
                ratio: bound / base,
            })
        })
        .collect()
}
