//! Full-information Hedge over the two resources priced by the Lagrangian:
//! troops and time.
//!
//! Costs arrive in `[1-c, 2]` (the payoff range of the Lagrangian game) and
//! are affinely normalized to `[0,1]` before the exponential update, with
//! the fixed rate `epsilon = sqrt(8 ln 2 / T)` for a known horizon.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// The two resources of the Lagrangian game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Troop,
    Time,
}

#[derive(Debug, Clone)]
pub struct Hedge {
    /// Positive weights, indexed [troop, time].
    weights: [f64; 2],
    epsilon: f64,
    cost_lo: f64,
    cost_hi: f64,
}

impl Hedge {
    /// `epsilon = sqrt(8 ln 2 / T)`; both weights start at 1. The cost range
    /// is `[1-c, 2]`, extended down to 0 when `c < 1` because the time
    /// payoff can reach 0 regardless of `c`.
    pub fn new(horizon: usize, c: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("c must be positive, got {c}")));
        }
        Ok(Hedge {
            weights: [1.0, 1.0],
            epsilon: (8.0 * LN_2 / horizon as f64).sqrt(),
            cost_lo: (1.0 - c).min(0.0),
            cost_hi: 2.0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> [f64; 2] {
        self.weights
    }

    /// Selection probabilities [troop, time].
    pub fn probabilities(&self) -> [f64; 2] {
        let total = self.weights[0] + self.weights[1];
        [self.weights[0] / total, self.weights[1] / total]
    }

    /// Draw a resource proportionally to the weights. One rng draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Resource {
        if rng.gen::<f64>() * (self.weights[0] + self.weights[1]) < self.weights[0] {
            Resource::Troop
        } else {
            Resource::Time
        }
    }

    /// Normalize a raw cost into `[0,1]`.
    pub fn normalize(&self, cost: f64) -> f64 {
        (cost - self.cost_lo) / (self.cost_hi - self.cost_lo)
    }

    /// Full-information update: both resources see their cost.
    pub fn update(&mut self, cost_troop: f64, cost_time: f64) -> Result<()> {
        for cost in [cost_troop, cost_time] {
            if !(self.cost_lo - 1e-9..=self.cost_hi + 1e-9).contains(&cost) {
                return Err(Error::InvalidInput(format!(
                    "cost {cost} outside [{}, {}]",
                    self.cost_lo, self.cost_hi
                )));
            }
        }
        self.weights[0] *= (-self.epsilon * self.normalize(cost_troop)).exp();
        self.weights[1] *= (-self.epsilon * self.normalize(cost_time)).exp();
        let max = self.weights[0].max(self.weights[1]);
        self.weights[0] /= max;
        self.weights[1] /= max;
        Ok(())
    }
}
