//! The per-round game loop: a path bandit picks allocations, Hedge prices
//! the two resources, and the Lagrangian payoffs route the feedback.
//!
//! Per round, with reward `r`, spend `w`, horizon `T`, and budget `B`:
//!
//! ```text
//! L_troop = r + 1 - (T/B) * w     in [1-c, 2]
//! L_time  = r                     in [0, 1]
//! ```
//!
//! The resource Hedge picks decides which value is fed to the path bandit as
//! its round reward; Hedge itself sees both values as costs. The learner
//! draws from the fixed action set until a draw would overspend the
//! remaining budget `x`; that draw is discarded, one final allocation
//! spending exactly `x` is drawn from the reduced graph (with the learned
//! weights carried over), and the episode stops.

use crate::edge_bandit::{sample_mixture, EdgeBandit};
use crate::error::{Error, Result};
use crate::game::{payoff, AdversaryModel, Allocation, BudgetState, GameConfig};
use crate::graph::{build_reduced_with_weights, LayeredGraph};
use crate::hedge::{Hedge, Resource};
use crate::seeding::{SeedSpec, RNG_ID};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Tolerance for the payoff-range assertions.
const RANGE_SLACK: f64 = 1e-9;

/// Lagrangian payoffs for one round. `consumption == 0` short-circuits the
/// budget term so the degenerate `B = 0` episode stays well-defined.
pub fn lagrange_payoffs(
    reward: f64,
    consumption: usize,
    horizon: usize,
    budget: usize,
    cap_multiplier: f64,
) -> Result<(f64, f64)> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&reward) {
        return Err(Error::Internal(format!("round reward {reward} outside [0,1]")));
    }
    let l_troop = if consumption == 0 {
        reward + 1.0
    } else {
        reward + 1.0 - horizon as f64 / budget as f64 * consumption as f64
    };
    let l_time = reward;
    let lo = 1.0 - cap_multiplier;
    if !(lo - RANGE_SLACK..=2.0 + RANGE_SLACK).contains(&l_troop) {
        return Err(Error::Internal(format!(
            "troop payoff {l_troop} outside [{lo}, 2]"
        )));
    }
    Ok((l_troop, l_time))
}

/// One played round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Round index, 1-based.
    pub t: usize,
    /// Learner's allocation.
    pub learner: Allocation,
    /// Adversary's allocation.
    pub adversary: Allocation,
    /// Blotto reward, in [0, 1].
    pub reward: f64,
    /// Troops spent this round.
    pub consumption: usize,
    pub l_troop: f64,
    pub l_time: f64,
    /// Resource chosen by the dual learner; absent on the terminal
    /// reduced-set round, which routes no feedback.
    pub dual: Option<Resource>,
    /// Payoff fed to the path bandit as its round reward.
    pub fed_payoff: Option<f64>,
    /// Remaining budget after the round.
    pub budget_after: usize,
    /// True only for a terminal reduced-set round.
    pub terminated: bool,
    /// Largest edge weight after the round's update.
    pub max_weight: Option<f64>,
    /// Infinity norm of the per-edge reward estimate.
    pub estimate_max_abs: Option<f64>,
}

/// Learner parameters resolved at episode start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    pub gamma: f64,
    pub eta: f64,
    pub hedge_epsilon: f64,
    pub lambda_star: f64,
    /// Size of the fixed action set, exact and in log form.
    pub action_count: u128,
    pub ln_action_count: f64,
    /// Edge count of the fixed-set graph.
    pub edge_count: usize,
}

/// Full trajectory of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub config: GameConfig,
    pub adversary: AdversaryModel,
    pub seed: SeedSpec,
    pub rng_id: String,
    pub params: EpisodeParams,
    pub rounds: Vec<RoundRecord>,
    /// Stopping round tau <= T.
    pub stopping_round: usize,
    pub total_reward: f64,
    pub total_consumption: usize,
}

impl EpisodeResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("serialization failed: {e}")))
    }

    /// Per-round CSV with the fixed column order `t, u1.., v1.., r, w,
    /// L_troop, L_time, dual, fed_payoff, x_after, terminated`. Floats carry
    /// 17 significant digits so they round-trip exactly.
    pub fn rounds_csv(&self) -> String {
        let n = self.config.battlefields;
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",u{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",v{i}"));
        }
        out.push_str(",r,w,L_troop,L_time,dual,fed_payoff,x_after,terminated\n");
        for r in &self.rounds {
            out.push_str(&r.t.to_string());
            for &u in &r.learner.troops {
                out.push_str(&format!(",{u}"));
            }
            for &v in &r.adversary.troops {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(
                ",{},{},{},{},{},{},{},{}\n",
                fmt_f64(r.reward),
                r.consumption,
                fmt_f64(r.l_troop),
                fmt_f64(r.l_time),
                match r.dual {
                    Some(Resource::Troop) => "troop",
                    Some(Resource::Time) => "time",
                    None => "",
                },
                r.fed_payoff.map(fmt_f64).unwrap_or_default(),
                r.budget_after,
                r.terminated,
            ));
        }
        out
    }
}

/// 17 significant digits: enough for exact f64 round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Play one episode. Deterministic given `(config, adversary, seed)`.
pub fn run_episode(
    config: &GameConfig,
    adversary: &AdversaryModel,
    seed: SeedSpec,
) -> Result<EpisodeResult> {
    config.validate()?;
    adversary.validate(config.battlefields)?;
    let mut rng = seed.rng();
    let n = config.battlefields;

    if config.round_cap == 0 {
        return run_exhausted_episode(config, adversary, seed, &mut rng);
    }

    let fixed = Arc::new(LayeredGraph::build_fixed(config.round_cap, n)?);
    let mut bandit = EdgeBandit::new(fixed.clone(), config.horizon, 1.0 + config.cap_multiplier)?;
    let mut hedge = Hedge::new(config.horizon, config.cap_multiplier)?;
    let params = EpisodeParams {
        gamma: bandit.gamma(),
        eta: bandit.eta(),
        hedge_epsilon: hedge.epsilon(),
        lambda_star: bandit.lambda_star(),
        action_count: bandit.exploration().path_count().count,
        ln_action_count: bandit.exploration().path_count().ln,
        edge_count: fixed.edge_count(),
    };

    let mut state = BudgetState::initial(config.budget);
    let mut rounds = Vec::new();
    let mut total_reward = 0.0;

    for t in 1..=config.horizon {
        let opponent = adversary.sample(n, &mut rng);
        let drawn = bandit.sample_path(&mut rng);
        let allocation = fixed.path_to_allocation(&drawn)?;

        if allocation.total() > state.remaining {
            // The fixed-set draw overspends: discard it (its rng draws
            // stand) and play one final allocation spending exactly x.
            let (reduced, carried) = build_reduced_with_weights(
                state.remaining,
                n,
                &fixed,
                bandit.weights(),
            )?;
            let final_path = sample_mixture(&reduced, &carried, bandit.gamma(), &mut rng)?;
            let final_alloc = reduced.path_to_allocation(&final_path)?;
            debug_assert_eq!(final_alloc.total(), state.remaining);
            let reward = payoff(&final_alloc, &opponent, &config.weights)?;
            let (l_troop, l_time) = lagrange_payoffs(
                reward,
                final_alloc.total(),
                config.horizon,
                config.budget,
                config.cap_multiplier,
            )?;
            total_reward += reward;
            let consumption = final_alloc.total();
            state = state.step(&final_alloc)?;
            rounds.push(RoundRecord {
                t,
                learner: final_alloc,
                adversary: opponent,
                reward,
                consumption,
                l_troop,
                l_time,
                dual: None,
                fed_payoff: None,
                budget_after: state.remaining,
                terminated: true,
                max_weight: None,
                estimate_max_abs: None,
            });
            break;
        }

        let reward = payoff(&allocation, &opponent, &config.weights)?;
        let consumption = allocation.total();
        let (l_troop, l_time) = lagrange_payoffs(
            reward,
            consumption,
            config.horizon,
            config.budget,
            config.cap_multiplier,
        )?;
        let dual = hedge.sample(&mut rng);
        let fed = match dual {
            Resource::Troop => l_troop,
            Resource::Time => l_time,
        };
        let diagnostics = bandit.observe(&drawn, fed)?;
        hedge.update(l_troop, l_time)?;
        total_reward += reward;
        state = state.step(&allocation)?;
        rounds.push(RoundRecord {
            t,
            learner: allocation,
            adversary: opponent,
            reward,
            consumption,
            l_troop,
            l_time,
            dual: Some(dual),
            fed_payoff: Some(fed),
            budget_after: state.remaining,
            terminated: false,
            max_weight: Some(diagnostics.max_weight),
            estimate_max_abs: Some(diagnostics.estimate_max_abs),
        });
    }

    let total_consumption = config.budget - state.remaining;
    if total_consumption > config.budget {
        return Err(Error::Internal("episode overspent the budget".into()));
    }
    let stopping_round = rounds.last().map_or(0, |r| r.t);
    Ok(EpisodeResult {
        config: config.clone(),
        adversary: adversary.clone(),
        seed,
        rng_id: RNG_ID.into(),
        params,
        rounds,
        stopping_round,
        total_reward,
        total_consumption,
    })
}

/// `B = 0`: the budget is exhausted before the first round, so the round-1
/// draw is forced to the reduced set `{all-zero}` and the episode stops.
fn run_exhausted_episode(
    config: &GameConfig,
    adversary: &AdversaryModel,
    seed: SeedSpec,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult> {
    let n = config.battlefields;
    let reduced = LayeredGraph::build_reduced(0, n)?;
    let exploration = crate::edge_bandit::ExplorationDist::uniform(&reduced)?;
    let opponent = adversary.sample(n, rng);
    let learner = Allocation::zeros(n);
    let reward = payoff(&learner, &opponent, &config.weights)?;
    let (l_troop, l_time) =
        lagrange_payoffs(reward, 0, config.horizon, config.budget, config.cap_multiplier)?;
    Ok(EpisodeResult {
        config: config.clone(),
        adversary: adversary.clone(),
        seed,
        rng_id: RNG_ID.into(),
        params: EpisodeParams {
            gamma: 0.0,
            eta: 0.0,
            hedge_epsilon: Hedge::new(config.horizon, config.cap_multiplier)?.epsilon(),
            lambda_star: exploration.lambda_star(),
            action_count: 1,
            ln_action_count: 0.0,
            edge_count: reduced.edge_count(),
        },
        rounds: vec![RoundRecord {
            t: 1,
            learner,
            adversary: opponent,
            reward,
            consumption: 0,
            l_troop,
            l_time,
            dual: None,
            fed_payoff: None,
            budget_after: 0,
            terminated: true,
            max_weight: None,
            estimate_max_abs: None,
        }],
        stopping_round: 1,
        total_reward: reward,
        total_consumption: 0,
    })
}

/// Independent episodes, one per master seed, with per-episode streams
/// derived from `(seed, horizon, index)`. Episodes run in parallel; results
/// keep the seed-list order.
pub fn run_batch(
    config: &GameConfig,
    adversary: &AdversaryModel,
    master_seeds: &[u64],
) -> Result<Vec<EpisodeResult>> {
    master_seeds
        .par_iter()
        .enumerate()
        .map(|(index, &master)| {
            run_episode(config, adversary, SeedSpec::derive(master, config.horizon, index))
        })
        .collect()
}
