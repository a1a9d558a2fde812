//! Exact brute-force benchmarks at desk scale: action enumeration, expected
//! reward tables, the per-round linear relaxation `OPT_LP`, the dynamic
//! program `OPT_DP`, and realized regret.

use crate::error::{Error, Result};
use crate::game::{binomial, payoff, AdversaryModel, Allocation};
use crate::lagrange::EpisodeResult;
use crate::seeding::SeedSpec;
use serde::{Deserialize, Serialize};

/// Guard on the fixed action set size `C(m+n, n)`.
const ACTION_GUARD: u128 = 1_000_000;

/// Guard on dynamic-program work `(m+1) * (B+1) * T`.
const DP_WORK_GUARD: u128 = 10_000_000_000;

/// How each arm's expected reward was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardEstimation {
    Exact,
    MonteCarlo { samples: usize },
}

/// All arms of the fixed action set with their expected rewards and
/// consumptions under a known adversary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmTable {
    pub actions: Vec<Allocation>,
    pub expected_reward: Vec<f64>,
    pub consumption: Vec<usize>,
    pub estimation: RewardEstimation,
}

impl ArmTable {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// All nonnegative integer vectors of length `n` with sum at most `m`, in
/// lexicographic order.
pub fn enumerate_actions(m: usize, n: usize) -> Result<Vec<Allocation>> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one battlefield".into()));
    }
    let count = binomial((m + n) as u128, n as u128)
        .ok_or_else(|| Error::SizeLimit("action count exceeds u128".into()))?;
    if count > ACTION_GUARD {
        return Err(Error::SizeLimit(format!(
            "action set has {count} arms, enumeration guard is {ACTION_GUARD}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; n];
    fill_actions(m, 0, &mut current, &mut out);
    Ok(out)
}

fn fill_actions(budget: usize, index: usize, current: &mut Vec<usize>, out: &mut Vec<Allocation>) {
    if index == current.len() {
        out.push(Allocation::new(current.clone()));
        return;
    }
    for v in 0..=budget {
        current[index] = v;
        fill_actions(budget - v, index + 1, current, out);
    }
    current[index] = 0;
}

/// Expected reward per arm: exact when the adversary support is enumerable,
/// otherwise Monte-Carlo with the declared sample count (shared draws across
/// arms).
pub fn expected_reward_table(
    actions: Vec<Allocation>,
    adversary: &AdversaryModel,
    weights: &[f64],
    mc_fallback: Option<(usize, SeedSpec)>,
) -> Result<ArmTable> {
    let n = weights.len();
    adversary.validate(n)?;
    let consumption: Vec<usize> = actions.iter().map(Allocation::total).collect();
    let (expected_reward, estimation) = match adversary.support(n) {
        Some(support) => {
            let rewards = actions
                .iter()
                .map(|a| {
                    support
                        .iter()
                        .map(|(v, p)| Ok(p * payoff(a, v, weights)?))
                        .sum::<Result<f64>>()
                })
                .collect::<Result<Vec<f64>>>()?;
            (rewards, RewardEstimation::Exact)
        }
        None => {
            let (samples, seed) = mc_fallback.ok_or_else(|| {
                Error::InvalidInput(
                    "adversary support is not enumerable; declare a Monte-Carlo sample count"
                        .into(),
                )
            })?;
            if samples == 0 {
                return Err(Error::InvalidInput("sample count must be positive".into()));
            }
            let mut rng = seed.rng();
            let draws: Vec<Allocation> =
                (0..samples).map(|_| adversary.sample(n, &mut rng)).collect();
            let rewards = actions
                .iter()
                .map(|a| {
                    let total: f64 = draws
                        .iter()
                        .map(|v| payoff(a, v, weights))
                        .sum::<Result<f64>>()?;
                    Ok(total / samples as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            (rewards, RewardEstimation::MonteCarlo { samples })
        }
    };
    Ok(ArmTable { actions, expected_reward, consumption, estimation })
}

/// Optimal value and mixture of the per-round linear relaxation:
/// maximize the expected reward subject to expected consumption at most
/// `B/T`. With one budget constraint plus the simplex, some optimum is a
/// single arm or a budget-tight two-arm mixture, so those candidates are
/// enumerated exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub value: f64,
    /// Arm indices with their probabilities; one or two entries.
    pub mixture: Vec<(usize, f64)>,
}

pub fn opt_lp(table: &ArmTable, budget: usize, horizon: usize) -> Result<LpSolution> {
    if table.is_empty() {
        return Err(Error::InvalidInput("empty arm table".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let rate = budget as f64 / horizon as f64;
    let mut best: Option<LpSolution> = None;
    let mut consider = |value: f64, mixture: Vec<(usize, f64)>| {
        if best.as_ref().map_or(true, |b| value > b.value) {
            best = Some(LpSolution { value, mixture });
        }
    };

    for (a, (&r, &w)) in table.expected_reward.iter().zip(&table.consumption).enumerate() {
        if (w as f64) <= rate {
            consider(r, vec![(a, 1.0)]);
        }
    }
    for a in 0..table.len() {
        let (ra, wa) = (table.expected_reward[a], table.consumption[a] as f64);
        for b in (a + 1)..table.len() {
            let (rb, wb) = (table.expected_reward[b], table.consumption[b] as f64);
            if wa == wb {
                continue;
            }
            // alpha * wa + (1 - alpha) * wb = rate
            let alpha = (rate - wb) / (wa - wb);
            if !(0.0..=1.0).contains(&alpha) {
                continue;
            }
            consider(alpha * ra + (1.0 - alpha) * rb, vec![(a, alpha), (b, 1.0 - alpha)]);
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no feasible arm within the budget rate".into()))
}

/// Optimal expected cumulative reward of a dynamic policy that knows the
/// adversary distribution: value iteration over (round, remaining budget)
/// with arms grouped by consumption, which is exact because only the best
/// reward at each consumption level can ever be chosen.
pub fn opt_dp(table: &ArmTable, budget: usize, horizon: usize, round_cap: usize) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::InvalidInput("empty arm table".into()));
    }
    let work = (round_cap as u128 + 1) * (budget as u128 + 1) * horizon as u128;
    if work > DP_WORK_GUARD {
        return Err(Error::SizeLimit(format!(
            "dynamic program needs {work} cell updates, guard is {DP_WORK_GUARD}"
        )));
    }
    // best[w] = the largest expected reward among arms consuming exactly w.
    let mut best = vec![f64::NEG_INFINITY; round_cap + 1];
    for (&r, &w) in table.expected_reward.iter().zip(&table.consumption) {
        if w <= round_cap && r > best[w] {
            best[w] = r;
        }
    }
    let levels: Vec<(usize, f64)> = best
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > f64::NEG_INFINITY)
        .map(|(w, &r)| (w, r))
        .collect();
    if levels.is_empty() {
        return Err(Error::InvalidInput("no arm fits under the per-round cap".into()));
    }

    let mut next = vec![0.0f64; budget + 1];
    let mut current = vec![f64::NEG_INFINITY; budget + 1];
    for _ in 0..horizon {
        current.fill(f64::NEG_INFINITY);
        for &(w, r) in &levels {
            for x in w..=budget {
                let cand = r + next[x - w];
                if cand > current[x] {
                    current[x] = cand;
                }
            }
        }
        std::mem::swap(&mut next, &mut current);
    }
    let value = next[budget];
    if !value.is_finite() {
        return Err(Error::InvalidInput(
            "no feasible policy (missing a zero-consumption arm?)".into(),
        ));
    }
    Ok(value)
}

/// Realized regret of one trajectory against the dynamic-policy benchmark.
pub fn regret(episode: &EpisodeResult, opt_dp_value: f64) -> f64 {
    opt_dp_value - episode.total_reward
}
