//! Statistical self-tests: Monte-Carlo checks of the sampler law, the
//! co-occurrence matrix, and the reward estimator against their exact or
//! enumeration-based counterparts. Shared by the acceptance suite and the
//! command-line `validate` mode.

use crate::edge_bandit::{EdgeBandit, LossEstimator};
use crate::error::Result;
use crate::numerics::pinv;
use crate::numerics::DEFAULT_RANK_TOL;
use rand::Rng;

/// Paths-per-graph limit for the enumeration-based references.
const ENUMERATION_LIMIT: usize = 100_000;

/// Total-variation distance between the empirical path frequency over
/// `draws` samples and the exact mixture law.
pub fn sampler_total_variation<R: Rng>(
    bandit: &EdgeBandit,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    let graph = bandit.graph();
    let paths = graph.enumerate_paths(ENUMERATION_LIMIT)?;
    let law = bandit.path_distribution();
    let mut counts = vec![0usize; paths.len()];
    let index: std::collections::HashMap<&[usize], usize> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| (p.edge_ids(), i))
        .collect();
    for _ in 0..draws {
        let p = bandit.sample_path(rng);
        counts[index[p.edge_ids()]] += 1;
    }
    let tv = paths
        .iter()
        .zip(&counts)
        .map(|(p, &c)| (c as f64 / draws as f64 - law.prob(p)).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv)
}

/// Max entrywise difference between the closed-form co-occurrence matrix and
/// the enumeration `sum_u p(u) u u^T`.
pub fn cooccurrence_vs_enumeration(bandit: &EdgeBandit) -> Result<f64> {
    let graph = bandit.graph();
    let c = bandit.cooccurrence()?;
    let law = bandit.path_distribution();
    let e = graph.edge_count();
    let mut exact = vec![0.0; e * e];
    for p in graph.enumerate_paths(ENUMERATION_LIMIT)? {
        let prob = law.prob(&p);
        for &i in p.edge_ids() {
            for &j in p.edge_ids() {
                exact[i * e + j] += prob;
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..e {
        for j in 0..e {
            worst = worst.max((c.get(i, j) - exact[i * e + j]).abs());
        }
    }
    Ok(worst)
}

/// Max entrywise difference between the closed-form co-occurrence matrix and
/// a Monte-Carlo estimate over `draws` sampled paths.
pub fn cooccurrence_vs_monte_carlo<R: Rng>(
    bandit: &EdgeBandit,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    let graph = bandit.graph();
    let c = bandit.cooccurrence()?;
    let e = graph.edge_count();
    let mut sum = vec![0.0f64; e * e];
    for _ in 0..draws {
        let p = bandit.sample_path(rng);
        for &i in p.edge_ids() {
            for &j in p.edge_ids() {
                sum[i * e + j] += 1.0;
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..e {
        for j in 0..e {
            worst = worst.max((c.get(i, j) - sum[i * e + j] / draws as f64).abs());
        }
    }
    Ok(worst)
}

/// Result of the estimator-mean check.
#[derive(Debug, Clone)]
pub struct EstimatorCheck {
    /// Worst componentwise deviation of the empirical mean from
    /// `pinv(C) C l`, measured in standard errors.
    pub max_sigma_deviation: f64,
    /// Rounds where the estimated path reward exceeded
    /// `reward_scale * n / (gamma * lambda*)`.
    pub bound_violations: usize,
    pub rounds: usize,
}

/// Fix true per-edge rewards `l`, sample `rounds` independent paths from the
/// frozen state, observe `payoff = l . u`, and compare mean per-edge
/// estimates against the conditional mean `pinv(C) C l`. Also counts
/// violations of the estimated-path-reward bound.
pub fn estimator_mean_check<R: Rng>(
    bandit: &EdgeBandit,
    true_rewards: &[f64],
    rounds: usize,
    rng: &mut R,
) -> Result<EstimatorCheck> {
    let graph = bandit.graph();
    let e = graph.edge_count();
    let c = bandit.cooccurrence()?;
    let estimator = LossEstimator::new(&c)?;
    let expected = pinv(&c, DEFAULT_RANK_TOL)?.matvec(&c.matvec(true_rewards));
    let limit = bandit.reward_scale() * graph.battlefields() as f64
        / (bandit.gamma() * bandit.lambda_star());

    let mut mean = vec![0.0f64; e];
    let mut m2 = vec![0.0f64; e];
    let mut bound_violations = 0usize;
    for k in 0..rounds {
        let path = bandit.sample_path(rng);
        let payoff: f64 = path.edge_ids().iter().map(|&id| true_rewards[id]).sum();
        let estimate = estimator.estimate(&path, payoff, e);
        let (hi, lo) = graph.path_sum_extrema(&estimate)?;
        if hi.abs().max(lo.abs()) > limit * (1.0 + 1e-9) {
            bound_violations += 1;
        }
        for i in 0..e {
            let delta = estimate[i] - mean[i];
            mean[i] += delta / (k + 1) as f64;
            m2[i] += delta * (estimate[i] - mean[i]);
        }
    }
    let mut max_sigma_deviation = 0.0f64;
    for i in 0..e {
        let se = (m2[i] / (rounds as f64 - 1.0)).sqrt() / (rounds as f64).sqrt();
        let dev = (mean[i] - expected[i]).abs();
        let sigmas = if se > 0.0 {
            dev / se
        } else if dev <= 1e-9 {
            0.0
        } else {
            f64::INFINITY
        };
        max_sigma_deviation = max_sigma_deviation.max(sigmas);
    }
    Ok(EstimatorCheck { max_sigma_deviation, bound_violations, rounds })
}
