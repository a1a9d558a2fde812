//! One-shot Colonel Blotto payoff, budget dynamics, and stochastic adversaries.
//!
//! A round is a simultaneous allocation of integer troops over `n` weighted
//! battlefields. Strictly more troops win a battlefield's weight, ties split
//! it evenly. The learner additionally carries a budget state across rounds.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Absolute tolerance for probability vectors that must sum to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Static description of one game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Number of battlefields `n`.
    pub battlefields: usize,
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Total troop budget `B` for the whole horizon.
    pub budget: usize,
    /// Per-round cap multiplier `c`; the learner never spends more than
    /// `m = floor(c * B / T)` in a single round.
    pub cap_multiplier: f64,
    /// Per-round spending cap `m`, derived from the fields above.
    pub round_cap: usize,
    /// Battlefield weights, positive and summing to one.
    pub weights: Vec<f64>,
}

impl GameConfig {
    /// Build and validate a configuration. `weights = None` means uniform.
    ///
    /// `m = floor(c*B/T)` must be at least one; the only exception is the
    /// degenerate `B = 0` game, where every round is forced to the all-zero
    /// allocation.
    pub fn new(
        battlefields: usize,
        horizon: usize,
        budget: usize,
        cap_multiplier: f64,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let weights = weights
            .unwrap_or_else(|| vec![1.0 / battlefields as f64; battlefields]);
        let config = GameConfig {
            battlefields,
            horizon,
            budget,
            cap_multiplier,
            round_cap: round_cap(budget, horizon, cap_multiplier)?,
            weights,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.battlefields == 0 {
            return Err(Error::InvalidInput("battlefields must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if !(self.cap_multiplier > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cap multiplier c must be positive, got {}",
                self.cap_multiplier
            )));
        }
        if self.round_cap != round_cap(self.budget, self.horizon, self.cap_multiplier)? {
            return Err(Error::InvalidInput(format!(
                "round cap {} does not equal floor(c*B/T)",
                self.round_cap
            )));
        }
        if self.weights.len() != self.battlefields {
            return Err(Error::InvalidInput(format!(
                "weights: expected {} entries, got {}",
                self.battlefields,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("weights must all be positive".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "weights must sum to 1 within {PROB_SUM_TOL}, got {sum}"
            )));
        }
        Ok(())
    }
}

/// `m = floor(c*B/T)`, with a tiny slack so exact rationals like `0.3*10/3`
/// are not floored one short by floating-point rounding.
fn round_cap(budget: usize, horizon: usize, c: f64) -> Result<usize> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let m = (c * budget as f64 / horizon as f64 + 1e-9).floor();
    if m < 1.0 && budget > 0 {
        return Err(Error::InvalidInput(format!(
            "per-round cap floor(c*B/T) = floor({c}*{budget}/{horizon}) is zero"
        )));
    }
    Ok(m.max(0.0) as usize)
}

/// Integer troop vector over the battlefields. Serializes as a plain array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    pub troops: Vec<usize>,
}

impl Allocation {
    pub fn new(troops: Vec<usize>) -> Self {
        Allocation { troops }
    }

    pub fn zeros(n: usize) -> Self {
        Allocation { troops: vec![0; n] }
    }

    /// Total troops spent by this allocation.
    pub fn total(&self) -> usize {
        self.troops.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.troops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.troops.is_empty()
    }
}

impl From<Vec<usize>> for Allocation {
    fn from(troops: Vec<usize>) -> Self {
        Allocation { troops }
    }
}

/// One-shot Blotto payoff for `u` against `v`: the sum of weights of
/// battlefields where `u` is strictly ahead, plus half the weight wherever
/// they tie. Lies in `[0, 1]` for normalized weights.
pub fn payoff(u: &Allocation, v: &Allocation, weights: &[f64]) -> Result<f64> {
    if u.len() != weights.len() || v.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "payoff: |u|={}, |v|={}, |weights|={}",
            u.len(),
            v.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for ((&ui, &vi), &w) in u.troops.iter().zip(&v.troops).zip(weights) {
        if ui > vi {
            total += w;
        } else if ui == vi {
            total += 0.5 * w;
        }
    }
    Ok(total)
}

/// Remaining budget and round counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetState {
    /// Budget still available.
    pub remaining: usize,
    /// Round index (1-based; `round = 1` before the first play).
    pub round: usize,
}

impl BudgetState {
    pub fn initial(budget: usize) -> Self {
        BudgetState { remaining: budget, round: 1 }
    }

    /// Spend `u` and advance one round. Overspending is a hard error; the
    /// episode loop is responsible for never letting it happen.
    pub fn step(&self, u: &Allocation) -> Result<BudgetState> {
        let spend = u.total();
        if spend > self.remaining {
            return Err(Error::BudgetViolation(format!(
                "round {}: spend {} exceeds remaining budget {}",
                self.round, spend, self.remaining
            )));
        }
        Ok(BudgetState {
            remaining: self.remaining - spend,
            round: self.round + 1,
        })
    }
}

/// Stochastic adversary models. The adversary draws i.i.d. from a fixed
/// distribution; it has no budget dynamics of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryModel {
    /// Plays the same allocation every round.
    FixedAllocation { allocation: Vec<usize> },
    /// Draws from an explicit finite support.
    Categorical {
        support: Vec<Vec<usize>>,
        probabilities: Vec<f64>,
    },
    /// Uniform over all nonnegative integer vectors summing to exactly `total`.
    UniformSum { total: usize },
    /// Independent per-battlefield Binomial(trials, prob) draws.
    IndependentBinomial { trials: usize, prob: f64 },
}

impl AdversaryModel {
    pub fn validate(&self, battlefields: usize) -> Result<()> {
        match self {
            AdversaryModel::FixedAllocation { allocation } => {
                if allocation.len() != battlefields {
                    return Err(Error::InvalidInput(format!(
                        "fixed allocation has {} battlefields, expected {}",
                        allocation.len(),
                        battlefields
                    )));
                }
            }
            AdversaryModel::Categorical { support, probabilities } => {
                if support.is_empty() || support.len() != probabilities.len() {
                    return Err(Error::InvalidInput(
                        "categorical support and probabilities must be nonempty and equal length"
                            .into(),
                    ));
                }
                if support.iter().any(|a| a.len() != battlefields) {
                    return Err(Error::InvalidInput(format!(
                        "categorical support vectors must have {battlefields} battlefields"
                    )));
                }
                if probabilities.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::InvalidInput(
                        "categorical probabilities must be nonnegative".into(),
                    ));
                }
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "categorical probabilities must sum to 1 within {PROB_SUM_TOL}, got {sum}"
                    )));
                }
            }
            AdversaryModel::UniformSum { .. } => {}
            AdversaryModel::IndependentBinomial { prob, .. } => {
                if !(0.0..=1.0).contains(prob) {
                    return Err(Error::InvalidInput(format!(
                        "binomial success probability must lie in [0,1], got {prob}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draw one allocation. Deterministic given the rng state.
    pub fn sample<R: Rng>(&self, battlefields: usize, rng: &mut R) -> Allocation {
        match self {
            AdversaryModel::FixedAllocation { allocation } => Allocation::new(allocation.clone()),
            AdversaryModel::Categorical { support, probabilities } => {
                let x: f64 = rng.gen();
                let mut acc = 0.0;
                for (a, &p) in support.iter().zip(probabilities) {
                    acc += p;
                    if x < acc {
                        return Allocation::new(a.clone());
                    }
                }
                Allocation::new(support.last().expect("nonempty support").clone())
            }
            AdversaryModel::UniformSum { total } => sample_composition(*total, battlefields, rng),
            AdversaryModel::IndependentBinomial { trials, prob } => {
                let troops = (0..battlefields)
                    .map(|_| (0..*trials).filter(|_| rng.gen::<f64>() < *prob).count())
                    .collect();
                Allocation::new(troops)
            }
        }
    }

    /// Exact finite support with probabilities, when enumerable at desk
    /// scale. `None` means callers must fall back to Monte-Carlo estimation.
    pub fn support(&self, battlefields: usize) -> Option<Vec<(Allocation, f64)>> {
        match self {
            AdversaryModel::FixedAllocation { allocation } => {
                Some(vec![(Allocation::new(allocation.clone()), 1.0)])
            }
            AdversaryModel::Categorical { support, probabilities } => Some(
                support
                    .iter()
                    .zip(probabilities)
                    .map(|(a, &p)| (Allocation::new(a.clone()), p))
                    .collect(),
            ),
            AdversaryModel::UniformSum { total } => {
                let count = compositions(*total, battlefields)?;
                if count > 1_000_000 {
                    return None;
                }
                let p = 1.0 / count as f64;
                let mut out = Vec::with_capacity(count as usize);
                let mut current = vec![0usize; battlefields];
                enumerate_compositions(*total, 0, &mut current, &mut out, p);
                Some(out)
            }
            AdversaryModel::IndependentBinomial { .. } => None,
        }
    }
}

/// Number of nonnegative integer vectors of length `n` summing to `total`:
/// `C(total+n-1, n-1)`. `None` on overflow.
fn compositions(total: usize, n: usize) -> Option<u128> {
    if n == 0 {
        return Some(if total == 0 { 1 } else { 0 });
    }
    binomial(total as u128 + n as u128 - 1, n as u128 - 1)
}

/// `C(n, k)` in u128 with overflow checking.
pub(crate) fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

fn enumerate_compositions(
    remaining: usize,
    index: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<(Allocation, f64)>,
    p: f64,
) {
    if index + 1 == current.len() {
        current[index] = remaining;
        out.push((Allocation::new(current.clone()), p));
        return;
    }
    for j in 0..=remaining {
        current[index] = j;
        enumerate_compositions(remaining - j, index + 1, current, out, p);
    }
}

/// Uniform draw over compositions of `total` into `n` parts, by unranking a
/// uniform index in the combinatorial number system. Consumes one rng draw.
fn sample_composition<R: Rng>(total: usize, n: usize, rng: &mut R) -> Allocation {
    if n == 1 {
        return Allocation::new(vec![total]);
    }
    let count = compositions(total, n).expect("composition count overflow");
    let mut rank = rng.gen_range(0..count);
    let mut troops = Vec::with_capacity(n);
    let mut remaining = total;
    for i in 0..n - 1 {
        let parts_left = n - 1 - i;
        // Choose troops[i] = j; the remainder has C(remaining-j+parts_left-1, parts_left-1) options.
        let mut j = 0usize;
        loop {
            let bucket = compositions(remaining - j, parts_left).expect("overflow");
            if rank < bucket {
                break;
            }
            rank -= bucket;
            j += 1;
        }
        troops.push(j);
        remaining -= j;
    }
    troops.push(remaining);
    Allocation::new(troops)
}
