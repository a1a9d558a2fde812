//! Budget-constrained dynamic Colonel Blotto simulation library.
//!
//! The learner repeatedly allocates integer troops over weighted battlefields
//! against a stochastic adversary, under a global budget and a per-round cap.
//! Rounds are played through a primal/dual loop: a combinatorial bandit over
//! a layered path graph picks allocations, a two-expert Hedge picks which
//! resource (troops or time) prices the Lagrangian payoff, and exact
//! brute-force oracles provide the regret benchmarks.

pub mod edge_bandit;
pub mod error;
pub mod game;
pub mod graph;
pub mod hedge;
pub mod lagrange;
pub mod numerics;
pub mod oracle;
pub mod seeding;
pub mod selftest;

pub use edge_bandit::{EdgeBandit, ExplorationDist};
pub use error::{Error, Result};
pub use game::{payoff, AdversaryModel, Allocation, BudgetState, GameConfig};
pub use graph::{LayeredGraph, PathVector};
pub use hedge::{Hedge, Resource};
pub use lagrange::{run_batch, run_episode, EpisodeResult, RoundRecord};
pub use numerics::{pinv, smallest_nonzero_eig, sym_eig, SymMatrix};
pub use oracle::{enumerate_actions, expected_reward_table, opt_dp, opt_lp, regret, ArmTable};
pub use seeding::SeedSpec;
