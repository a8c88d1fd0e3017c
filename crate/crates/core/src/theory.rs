//! Closed-form deterioration probabilities and their Monte Carlo check.
//!
//! For an orthonormal design with a single signal coordinate beta_1 among
//! p - 1 pure noise coordinates, the probability that the loss-optimally
//! tuned lasso does strictly worse than it would with the noise
//! coordinates removed has the closed form
//!
//!   Pr(deterioration) = Phi(|beta_1| / sigma) - 1 / (2 p),
//!
//! and conditionally on the signal coordinate keeping its sign,
//!
//!   Pr(deterioration | sign match) = 1 - 1 / (2 p Phi(|beta_1| / sigma)).
//!
//! Both approach 1 as p grows with everything else held fixed: more noise
//! coordinates make optimal tuning worse, not better.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ortho::{optimal_multi, optimal_single, OrthoInstance};
use crate::rng::{replicate_stream, RngStream, StreamPurpose};
use crate::stats::{binomial_std_error, normal_cdf};

/// Parameters of the single-signal orthonormal setting.
#[derive(Debug, Clone, Copy)]
pub struct DeteriorationQuery {
    pub beta1: f64,
    pub sigma: f64,
    pub p: usize,
}

impl DeteriorationQuery {
    pub fn new(beta1: f64, sigma: f64, p: usize) -> Result<DeteriorationQuery> {
        if beta1 == 0.0 || !beta1.is_finite() {
            return Err(Error::Domain(format!(
                "signal coefficient must be nonzero and finite, got {beta1}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if p < 2 {
            return Err(Error::Domain(format!(
                "deterioration needs p >= 2 noise-bearing dimensions, got {p}"
            )));
        }
        Ok(DeteriorationQuery { beta1, sigma, p })
    }

    fn snr(&self) -> f64 {
        self.beta1.abs() / self.sigma
    }
}

/// Unconditional deterioration probability Phi(|beta1|/sigma) - 1/(2p).
pub fn prob_deterioration(q: &DeteriorationQuery) -> f64 {
    normal_cdf(q.snr()) - 1.0 / (2.0 * q.p as f64)
}

/// Deterioration probability given that the signal coordinate keeps its
/// sign: 1 - 1 / (2 p Phi(|beta1|/sigma)).
pub fn prob_deterioration_given_sign(q: &DeteriorationQuery) -> f64 {
    1.0 - 1.0 / (2.0 * q.p as f64 * normal_cdf(q.snr()))
}

/// Number of predictors in a balanced all-interactions expansion of
/// `p_main` factors up to interaction order `order`:
/// sum_{k=1}^{order} C(p_main, k), exact integer arithmetic.
pub fn anova_predictor_count(p_main: u32, order: u32) -> Result<u64> {
    if p_main == 0 || order == 0 || order > p_main {
        return Err(Error::Domain(format!(
            "need 1 <= order <= p_main, got order {order}, p_main {p_main}"
        )));
    }
    let mut total: u64 = 0;
    let mut choose: u64 = 1;
    for k in 1..=order as u64 {
        // C(p, k) = C(p, k-1) * (p - k + 1) / k, exact at every step.
        choose = choose
            .checked_mul(p_main as u64 + 1 - k)
            .ok_or_else(|| Error::Domain("predictor count overflows u64".into()))?
            / k;
        total = total
            .checked_add(choose)
            .ok_or_else(|| Error::Domain("predictor count overflows u64".into()))?;
    }
    Ok(total)
}

/// Interaction orders covered by [`table1`].
pub const TABLE1_ORDERS: [u32; 4] = [1, 2, 3, 4];
/// Main-effect counts covered by [`table1`].
pub const TABLE1_MAIN_COUNTS: [u32; 5] = [2, 4, 6, 8, 10];

/// Deterioration probabilities across a grid of balanced ANOVA designs:
/// rows are interaction orders 1..4, columns are main-effect counts
/// 2, 4, 6, 8, 10. A cell is `None` where the order exceeds the number
/// of main effects (no such design exists).
#[derive(Debug, Clone)]
pub struct Table1 {
    pub beta1: f64,
    pub sigma: f64,
    /// `cells[i][j]`: order `TABLE1_ORDERS[i]`, `TABLE1_MAIN_COUNTS[j]`
    /// main effects; the deterioration probability at the implied p.
    pub cells: [[Option<f64>; 5]; 4],
    /// Predictor counts p behind each cell.
    pub dims: [[Option<u64>; 5]; 4],
}

/// Deterioration probability grid over ANOVA expansions. Each cell maps
/// (main effects, order) to p via [`anova_predictor_count`] and applies
/// the closed form at that p.
pub fn table1(beta1: f64, sigma: f64) -> Result<Table1> {
    let mut cells = [[None; 5]; 4];
    let mut dims = [[None; 5]; 4];
    for (i, &order) in TABLE1_ORDERS.iter().enumerate() {
        for (j, &p_main) in TABLE1_MAIN_COUNTS.iter().enumerate() {
            if order > p_main {
                continue;
            }
            let p = anova_predictor_count(p_main, order)?;
            let q = DeteriorationQuery::new(beta1, sigma, p as usize)?;
            cells[i][j] = Some(prob_deterioration(&q));
            dims[i][j] = Some(p);
        }
    }
    Ok(Table1 {
        beta1,
        sigma,
        cells,
        dims,
    })
}

/// Monte Carlo estimate of the deterioration probability.
#[derive(Debug, Clone)]
pub struct McDeterioration {
    pub replicates: usize,
    /// Fraction of replicates that deteriorated.
    pub frequency: f64,
    pub std_error: f64,
    /// Fraction of sign-match replicates that deteriorated.
    pub conditional_frequency: f64,
    pub conditional_std_error: f64,
    pub sign_match_count: usize,
}

/// Per-replicate draw of the decoupled problem: z_1 = beta_1 + sigma e_1
/// and z_j = sigma e_j from the replicate's training-noise stream, with
/// the deterioration verdict from the exact optimizer.
pub fn mc_deterioration_draws(
    q: &DeteriorationQuery,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<(bool, bool)>> {
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = RngStream::new(
                master_seed,
                replicate_stream(r, StreamPurpose::TrainingNoise),
            );
            let mut z = vec![0.0; q.p];
            for (j, zj) in z.iter_mut().enumerate() {
                let center = if j == 0 { q.beta1 } else { 0.0 };
                *zj = center + q.sigma * stream.standard_normal();
            }
            let sign_match = z[0] != 0.0 && z[0].signum() == q.beta1.signum();
            let inst = OrthoInstance::new(q.beta1, z, 1, q.sigma * q.sigma)?;
            let multi = optimal_multi(&inst)?;
            // The exact route and the closed-form p = 1 route must agree
            // on what the baseline loss is; the deterioration flag is
            // meaningless otherwise.
            let single = optimal_single(q.beta1, inst.z[0])?;
            debug_assert!(multi.n_loss >= single.n_loss - 1e-9);
            Ok((multi.deteriorated, sign_match))
        })
        .collect()
}

/// Aggregate Monte Carlo deterioration frequencies with binomial
/// standard errors, both unconditional and conditional on a sign match.
pub fn mc_prob_deterioration(
    q: &DeteriorationQuery,
    replicates: usize,
    master_seed: u64,
) -> Result<McDeterioration> {
    let draws = mc_deterioration_draws(q, replicates, master_seed)?;
    let det = draws.iter().filter(|(d, _)| *d).count();
    let matches = draws.iter().filter(|(_, m)| *m).count();
    let det_given_match = draws.iter().filter(|(d, m)| *d && *m).count();
    if matches == 0 {
        return Err(Error::Domain(
            "no sign-match replicates; conditional frequency undefined".into(),
        ));
    }
    let frequency = det as f64 / replicates as f64;
    let conditional_frequency = det_given_match as f64 / matches as f64;
    Ok(McDeterioration {
        replicates,
        frequency,
        std_error: binomial_std_error(frequency, replicates)?,
        conditional_frequency,
        conditional_std_error: binomial_std_error(conditional_frequency, matches)?,
        sign_match_count: matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_frozen_references() {
        // beta1 = 3, sigma = 1: Phi(3) = 0.99865010196836990547...
        let cases = [
            (2, 0.748650101968369905),
            (10, 0.948650101968369905),
            (50, 0.988650101968369905),
        ];
        for (p, want) in cases {
            let q = DeteriorationQuery::new(3.0, 1.0, p).unwrap();
            let got = prob_deterioration(&q);
            assert!((got - want).abs() < 1e-14, "p={p}: {got} vs {want}");
        }
        let cond = [
            (2, 0.7496620693201329),
            (10, 0.9499324138640266),
            (50, 0.9899864827728053),
        ];
        for (p, want) in cond {
            let q = DeteriorationQuery::new(3.0, 1.0, p).unwrap();
            let got = prob_deterioration_given_sign(&q);
            assert!((got - want).abs() < 1e-13, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn probabilities_increase_in_p_and_respect_sign_symmetry() {
        let mut prev = 0.0;
        for p in 2..200 {
            let q = DeteriorationQuery::new(3.0, 1.0, p).unwrap();
            let v = prob_deterioration(&q);
            assert!(v > prev);
            assert!((0.0..1.0).contains(&v));
            let c = prob_deterioration_given_sign(&q);
            assert!(v <= c, "conditioning on a match can only raise it");
            prev = v;
        }
        let qp = DeteriorationQuery::new(3.0, 1.0, 10).unwrap();
        let qn = DeteriorationQuery::new(-3.0, 1.0, 10).unwrap();
        assert_eq!(prob_deterioration(&qp), prob_deterioration(&qn));
    }

    #[test]
    fn weak_signal_probabilities_can_go_negative_only_in_theory_limits() {
        // For tiny SNR the unconditional form can dip below 1/2 but the
        // formula itself stays well-defined.
        let q = DeteriorationQuery::new(1e-6, 1.0, 2).unwrap();
        let v = prob_deterioration(&q);
        assert!((v - 0.25).abs() < 1e-5);
    }

    #[test]
    fn query_validation() {
        assert!(DeteriorationQuery::new(0.0, 1.0, 5).is_err());
        assert!(DeteriorationQuery::new(3.0, 0.0, 5).is_err());
        assert!(DeteriorationQuery::new(3.0, -1.0, 5).is_err());
        assert!(DeteriorationQuery::new(3.0, 1.0, 1).is_err());
    }

    #[test]
    fn predictor_counts_match_binomial_sums() {
        assert_eq!(anova_predictor_count(10, 1).unwrap(), 10);
        assert_eq!(anova_predictor_count(10, 2).unwrap(), 55);
        assert_eq!(anova_predictor_count(10, 3).unwrap(), 175);
        assert_eq!(anova_predictor_count(10, 4).unwrap(), 385);
        assert_eq!(anova_predictor_count(4, 3).unwrap(), 14);
        assert_eq!(anova_predictor_count(6, 4).unwrap(), 56);
        assert_eq!(anova_predictor_count(3, 3).unwrap(), 7);
        assert!(anova_predictor_count(3, 4).is_err());
        assert!(anova_predictor_count(0, 1).is_err());
        assert!(anova_predictor_count(3, 0).is_err());
    }

    #[test]
    fn table_grid_shape_and_frozen_cells() {
        let t = table1(3.0, 1.0).unwrap();
        // Infeasible corner: 3-way and 4-way interactions need more than
        // 2 main effects.
        assert!(t.cells[2][0].is_none());
        assert!(t.cells[3][0].is_none());
        assert_eq!(t.dims[1][2], Some(21));
        assert_eq!(t.dims[3][4], Some(385));
        let frozen: [(usize, usize, f64); 6] = [
            (0, 0, 0.748650101968369905),  // order 1, 2 mains, p = 2
            (0, 4, 0.948650101968369905),  // order 1, 10 mains, p = 10
            (1, 0, 0.831983435301703239),  // order 2, 2 mains, p = 3
            (1, 4, 0.989559192877460815),  // order 2, 10 mains, p = 55
            (2, 1, 0.962935816254084191),  // order 3, 4 mains, p = 14
            (3, 4, 0.997351400669668607),  // order 4, 10 mains, p = 385
        ];
        for (i, j, want) in frozen {
            let got = t.cells[i][j].unwrap();
            assert!((got - want).abs() < 1e-14, "cell ({i},{j}): {got} vs {want}");
        }
        // Monotone along rows and columns where defined.
        for i in 0..4 {
            for j in 1..5 {
                if let (Some(a), Some(b)) = (t.cells[i][j - 1], t.cells[i][j]) {
                    assert!(a < b);
                }
            }
        }
    }

    #[test]
    fn mc_agrees_with_closed_form_at_small_p() {
        let q = DeteriorationQuery::new(3.0, 1.0, 2).unwrap();
        let mc = mc_prob_deterioration(&q, 4000, 1234).unwrap();
        let want = prob_deterioration(&q);
        assert!(
            (mc.frequency - want).abs() < 3.5 * mc.std_error.max(0.005),
            "MC {} vs analytic {want} (se {})",
            mc.frequency,
            mc.std_error
        );
        let want_c = prob_deterioration_given_sign(&q);
        assert!(
            (mc.conditional_frequency - want_c).abs() < 3.5 * mc.conditional_std_error.max(0.005)
        );
        assert!(mc.sign_match_count <= 4000);
        // Determinism across calls.
        let again = mc_prob_deterioration(&q, 4000, 1234).unwrap();
        assert_eq!(mc.frequency, again.frequency);
    }
}
