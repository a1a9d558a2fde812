//! Combinatorial bandit over a layered path graph.
//!
//! Each round mixes a weight-induced path distribution with an exploration
//! distribution, samples a path edge-by-edge, de-biases the observed scalar
//! payoff into per-edge reward estimates through the pseudoinverse of the
//! exact co-occurrence matrix, and updates edge weights multiplicatively.
//!
//! The mixing rate and learning rate follow the closed forms
//!
//! ```text
//! base  = sqrt( ln S / ((n/(E*lambda*) + 1) * E * T^(2/3)) )
//! gamma = (n / lambda*) * base          (clamped to at most 1)
//! eta   = base / reward_scale
//! ```
//!
//! so that `eta * |estimate . path| <= 1` on every round. `reward_scale = 1`
//! recovers the plain relation `eta = gamma * lambda* / n`; the Lagrangian
//! loop passes `reward_scale = 1 + c` because its payoffs lie in `[1-c, 2]`.

use crate::error::{Error, Result};
use crate::graph::{ForwardBackward, LayeredGraph, PathCount, PathVector};
use crate::numerics::{
    pinv_apply, psd_spectrum, smallest_nonzero_eig, EigenDecomposition, SymMatrix,
    DEFAULT_RANK_TOL,
};
use rand::Rng;
use std::sync::Arc;

/// Edge weights above this trigger a uniform rescale of the non-auxiliary
/// weights; the path distribution is unchanged because every path carries
/// the same number of non-auxiliary edges.
const WEIGHT_RESCALE_TRIGGER: f64 = 1e100;

/// Relative slack for the per-round magnitude invariants.
const BOUND_SLACK: f64 = 1e-9;

/// Exploration distribution: uniform over all `s,d`-paths, realized by
/// count-weighted sequential sampling, with its co-occurrence matrix and
/// smallest nonzero eigenvalue cached.
#[derive(Debug, Clone)]
pub struct ExplorationDist {
    matrix: SymMatrix,
    lambda_star: f64,
    fb: ForwardBackward,
    path_count: PathCount,
}

impl ExplorationDist {
    pub fn uniform(graph: &LayeredGraph) -> Result<Self> {
        let unit = vec![1.0; graph.edge_count()];
        let fb = graph.forward_backward(&unit)?;
        let matrix = cooccurrence_for_weights(graph, &unit, &fb)?;
        let lambda_star = smallest_nonzero_eig(&matrix, DEFAULT_RANK_TOL)?;
        let path_count = graph.count_paths()?;
        Ok(ExplorationDist { matrix, lambda_star, fb, path_count })
    }

    /// Co-occurrence matrix `M(mu) = E[u u^T]` under the exploration law.
    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    /// Smallest nonzero eigenvalue of `M(mu)`.
    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    pub fn path_count(&self) -> PathCount {
        self.path_count
    }
}

/// Diagnostics from one observed round.
#[derive(Debug, Clone, Copy)]
pub struct RoundDiagnostics {
    /// Infinity norm of the per-edge reward estimate.
    pub estimate_max_abs: f64,
    /// Max over paths of the absolute estimated path reward.
    pub estimate_path_bound: f64,
    /// Largest edge weight after the update.
    pub max_weight: f64,
}

/// Mutable learner state for one episode.
#[derive(Debug, Clone)]
pub struct EdgeBandit {
    graph: Arc<LayeredGraph>,
    weights: Vec<f64>,
    fb: ForwardBackward,
    exploration: ExplorationDist,
    gamma: f64,
    eta: f64,
    reward_scale: f64,
    round: usize,
}

impl EdgeBandit {
    /// Initialize with uniform exploration and the closed-form rates.
    pub fn new(graph: Arc<LayeredGraph>, horizon: usize, reward_scale: f64) -> Result<Self> {
        let exploration = ExplorationDist::uniform(&graph)?;
        Self::with_exploration(graph, horizon, reward_scale, exploration)
    }

    pub fn with_exploration(
        graph: Arc<LayeredGraph>,
        horizon: usize,
        reward_scale: f64,
        exploration: ExplorationDist,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if !(reward_scale >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "reward scale must be at least 1, got {reward_scale}"
            )));
        }
        let n = graph.battlefields() as f64;
        let e = graph.edge_count() as f64;
        let lambda = exploration.lambda_star();
        let ln_s = exploration.path_count().ln;
        let base =
            (ln_s / ((n / (e * lambda) + 1.0) * e * (horizon as f64).powf(2.0 / 3.0))).sqrt();
        let raw_gamma = n / lambda * base;
        let gamma = if raw_gamma > 1.0 {
            log::warn!("mixing rate {raw_gamma:.6} exceeds 1 for T = {horizon}; clamping to 1");
            1.0
        } else {
            raw_gamma
        };
        let eta = base / reward_scale;
        let weights = vec![1.0; graph.edge_count()];
        let fb = graph.forward_backward(&weights)?;
        Ok(EdgeBandit {
            graph,
            weights,
            fb,
            exploration,
            gamma,
            eta,
            reward_scale,
            round: 0,
        })
    }

    pub fn graph(&self) -> &LayeredGraph {
        &self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn reward_scale(&self) -> f64 {
        self.reward_scale
    }

    pub fn lambda_star(&self) -> f64 {
        self.exploration.lambda_star()
    }

    pub fn exploration(&self) -> &ExplorationDist {
        &self.exploration
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Exact law of the sampled path: `(1-gamma) * weight-induced + gamma * mu`.
    pub fn path_distribution(&self) -> PathLaw<'_> {
        PathLaw {
            graph: &self.graph,
            weights: &self.weights,
            weighted_total: self.fb.total,
            exploration_total: self.exploration.fb.total,
            gamma: self.gamma,
        }
    }

    /// Draw a path: Bernoulli(gamma) chooses between the exploration law and
    /// the weight-induced law, then the path is sampled edge-by-edge with
    /// probabilities proportional to `weight * backward-sum`.
    pub fn sample_path<R: Rng>(&self, rng: &mut R) -> PathVector {
        if rng.gen_bool(self.gamma) {
            sample_by_backward_sums(&self.graph, None, &self.exploration.fb, rng)
        } else {
            sample_by_backward_sums(&self.graph, Some(&self.weights), &self.fb, rng)
        }
    }

    /// Exact co-occurrence matrix `C_t` of the current path distribution.
    pub fn cooccurrence(&self) -> Result<SymMatrix> {
        let mut c = cooccurrence_for_weights(&self.graph, &self.weights, &self.fb)?;
        c.scale(1.0 - self.gamma);
        c.scaled_add(self.gamma, self.exploration.matrix());
        Ok(c)
    }

    /// De-bias an observed scalar payoff into per-edge reward estimates:
    /// `estimate = payoff * pinv(C) * u`. Entries land on auxiliary edges
    /// too; the weight update ignores them.
    pub fn estimate_loss(&self, c: &SymMatrix, path: &PathVector, payoff: f64) -> Result<Vec<f64>> {
        let estimator = LossEstimator::new(c)?;
        Ok(estimator.estimate(path, payoff, self.graph.edge_count()))
    }

    /// Multiplicative update `w_e *= exp(eta * estimate_e)` on non-auxiliary
    /// edges. Auxiliary edges stay pinned at 1. When the largest weight
    /// passes the rescale trigger, all non-auxiliary weights are divided by
    /// it, which leaves the path distribution unchanged.
    pub fn update_weights(&mut self, estimate: &[f64]) -> Result<()> {
        if estimate.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "estimate has {} entries for {} edges",
                estimate.len(),
                self.weights.len()
            )));
        }
        let mut max_weight = 0.0f64;
        for edge in self.graph.edges() {
            if edge.is_auxiliary() {
                continue;
            }
            let w = &mut self.weights[edge.id];
            *w *= (self.eta * estimate[edge.id]).exp();
            if !w.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "edge {} weight became non-finite",
                    edge.id
                )));
            }
            max_weight = max_weight.max(*w);
        }
        if max_weight > WEIGHT_RESCALE_TRIGGER {
            for edge in self.graph.edges() {
                if !edge.is_auxiliary() {
                    self.weights[edge.id] /= max_weight;
                }
            }
        }
        self.fb = self.graph.forward_backward(&self.weights)?;
        self.round += 1;
        debug_assert!(self
            .graph
            .edges()
            .iter()
            .filter(|e| e.is_auxiliary())
            .all(|e| self.weights[e.id] == 1.0));
        Ok(())
    }

    /// Full per-round pipeline: co-occurrence, loss estimate, magnitude
    /// invariants, weight update.
    pub fn observe(&mut self, path: &PathVector, payoff: f64) -> Result<RoundDiagnostics> {
        let c = self.cooccurrence()?;
        let estimate = self.estimate_loss(&c, path, payoff)?;
        let diagnostics = self.check_round_invariants(&estimate)?;
        self.update_weights(&estimate)?;
        Ok(RoundDiagnostics { max_weight: self.max_weight(), ..diagnostics })
    }

    /// The estimated path reward must stay within `scale * n / (gamma *
    /// lambda*)` for every path, and `eta` times it must stay within 1.
    /// Violations indicate an implementation bug, so they are hard errors.
    fn check_round_invariants(&self, estimate: &[f64]) -> Result<RoundDiagnostics> {
        let (hi, lo) = self.graph.path_sum_extrema(estimate)?;
        let path_bound = hi.abs().max(lo.abs());
        let n = self.graph.battlefields() as f64;
        let limit = self.reward_scale * n / (self.gamma * self.exploration.lambda_star());
        if path_bound > limit * (1.0 + BOUND_SLACK) {
            return Err(Error::Internal(format!(
                "round {}: estimated path reward {path_bound} exceeds {limit}",
                self.round + 1
            )));
        }
        if self.eta * path_bound > 1.0 + BOUND_SLACK {
            return Err(Error::Internal(format!(
                "round {}: eta * estimated path reward = {} exceeds 1",
                self.round + 1,
                self.eta * path_bound
            )));
        }
        let estimate_max_abs = estimate.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(RoundDiagnostics {
            estimate_max_abs,
            estimate_path_bound: path_bound,
            max_weight: self.max_weight(),
        })
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().fold(0.0f64, |m, w| m.max(*w))
    }

    #[cfg(test)]
    pub(crate) fn force_state(&mut self, gamma: Option<f64>, weights: Option<Vec<f64>>) {
        if let Some(g) = gamma {
            self.gamma = g;
        }
        if let Some(w) = weights {
            self.fb = self.graph.forward_backward(&w).unwrap();
            self.weights = w;
        }
    }
}

/// Exact mixture law over paths, evaluable per path without enumeration.
#[derive(Debug, Clone, Copy)]
pub struct PathLaw<'a> {
    graph: &'a LayeredGraph,
    weights: &'a [f64],
    weighted_total: f64,
    exploration_total: f64,
    gamma: f64,
}

impl PathLaw<'_> {
    /// Probability of drawing exactly this path.
    pub fn prob(&self, path: &PathVector) -> f64 {
        let product: f64 = path.edge_ids().iter().map(|&e| self.weights[e]).product();
        let weighted = product / self.weighted_total;
        let uniform = 1.0 / self.exploration_total;
        (1.0 - self.gamma) * weighted + self.gamma * uniform
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn graph(&self) -> &LayeredGraph {
        self.graph
    }
}

/// Sample one path from the distribution induced by `weights` (unit weights
/// when `None`), walking from the source and picking each out-edge with
/// probability `weight * backward / total`. Consumes one draw per node.
fn sample_by_backward_sums<R: Rng>(
    graph: &LayeredGraph,
    weights: Option<&[f64]>,
    fb: &ForwardBackward,
    rng: &mut R,
) -> PathVector {
    let mut ids = Vec::with_capacity(graph.path_edge_count());
    let mut node = graph.source();
    while node != graph.destination() {
        let outs = graph.out_edges(node);
        let score =
            |e: usize| weights.map_or(1.0, |w| w[e]) * fb.backward[graph.edge_target(e)];
        let total: f64 = outs.iter().map(|&e| score(e)).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut chosen = *outs.last().expect("interior nodes have out-edges");
        for &e in outs {
            let s = score(e);
            if x < s {
                chosen = e;
                break;
            }
            x -= s;
        }
        ids.push(chosen);
        node = graph.edge_target(chosen);
    }
    PathVector::new(ids)
}

/// Sample from the `(1-gamma, gamma)` mixture of the `weights`-induced law
/// and the uniform-over-paths law on an arbitrary graph. Used for the
/// terminal reduced-set draw.
pub fn sample_mixture<R: Rng>(
    graph: &LayeredGraph,
    weights: &[f64],
    gamma: f64,
    rng: &mut R,
) -> Result<PathVector> {
    if rng.gen_bool(gamma) {
        let unit = vec![1.0; graph.edge_count()];
        let fb = graph.forward_backward(&unit)?;
        Ok(sample_by_backward_sums(graph, None, &fb, rng))
    } else {
        let fb = graph.forward_backward(weights)?;
        Ok(sample_by_backward_sums(graph, Some(weights), &fb, rng))
    }
}

/// Exact co-occurrence matrix of the weight-induced path distribution:
/// `C[e][e]` is the probability the path uses `e`, and `C[e][f]` the
/// probability it uses both, from forward/backward/node-pair sums. Distinct
/// edges leaving the same layer never co-occur.
pub fn cooccurrence_for_weights(
    graph: &LayeredGraph,
    weights: &[f64],
    fb: &ForwardBackward,
) -> Result<SymMatrix> {
    let pair_sums = graph.node_pair_sums(weights)?;
    let e_count = graph.edge_count();
    let z = fb.total;
    let mut c = SymMatrix::zeros(e_count);
    for e1 in 0..e_count {
        let a = graph.edge_source(e1);
        let b = graph.edge_target(e1);
        let head = fb.forward[a] * weights[e1];
        c.set_sym(e1, e1, head * fb.backward[b] / z);
        // Edge ids are layer-ordered, so every e2 > e1 starts at the same or
        // a later layer.
        for e2 in (e1 + 1)..e_count {
            if graph.edge(e2).from.layer == graph.edge(e1).from.layer {
                continue;
            }
            let c2 = graph.edge_source(e2);
            let d = graph.edge_target(e2);
            let joint = head * pair_sums.get(b, c2) * weights[e2] * fb.backward[d] / z;
            if joint != 0.0 {
                c.set_sym(e1, e2, joint);
            }
        }
    }
    Ok(c)
}

/// Reusable `payoff * pinv(C) * u` estimator; the spectrum of `C` is
/// computed once and applied per round.
pub struct LossEstimator {
    eig: EigenDecomposition,
    cut: f64,
}

impl LossEstimator {
    pub fn new(c: &SymMatrix) -> Result<Self> {
        let (eig, cut) = psd_spectrum(c, DEFAULT_RANK_TOL)?;
        Ok(LossEstimator { eig, cut })
    }

    pub fn estimate(&self, path: &PathVector, payoff: f64, edge_count: usize) -> Vec<f64> {
        let u = path.dense(edge_count);
        let mut out = pinv_apply(&self.eig, self.cut, &u);
        for v in &mut out {
            *v *= payoff;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::SeedSpec;
    use std::collections::HashMap;

    fn fixed_graph(m: usize, n: usize) -> Arc<LayeredGraph> {
        Arc::new(LayeredGraph::build_fixed(m, n).unwrap())
    }

    fn recompute_rates(graph: &LayeredGraph, horizon: usize, scale: f64) -> (f64, f64) {
        let exploration = ExplorationDist::uniform(graph).unwrap();
        let n = graph.battlefields() as f64;
        let e = graph.edge_count() as f64;
        let lambda = exploration.lambda_star();
        let ln_s = exploration.path_count().ln;
        let base =
            (ln_s / ((n / (e * lambda) + 1.0) * e * (horizon as f64).powf(2.0 / 3.0))).sqrt();
        ((n / lambda * base).min(1.0), base / scale)
    }

    #[test]
    fn init_rates_match_formula() {
        let graph = fixed_graph(4, 3);
        let bandit = EdgeBandit::new(graph.clone(), 10_000, 1.0).unwrap();
        let (gamma, eta) = recompute_rates(&graph, 10_000, 1.0);
        assert!((bandit.gamma() - gamma).abs() < 1e-15);
        assert!((bandit.eta() - eta).abs() < 1e-15);
        assert!(bandit.gamma() > 0.0 && bandit.gamma() < 1.0);
    }

    #[test]
    fn unit_scale_recovers_eta_gamma_relation() {
        // With reward scale 1, eta = gamma * lambda* / n exactly.
        let graph = fixed_graph(3, 3);
        let bandit = EdgeBandit::new(graph, 50_000, 1.0).unwrap();
        let lhs = bandit.eta() * bandit.graph().battlefields() as f64 / bandit.lambda_star();
        assert!((lhs - bandit.gamma()).abs() < 1e-14);
    }

    #[test]
    fn scaled_payoffs_shrink_eta() {
        let graph = fixed_graph(3, 3);
        let plain = EdgeBandit::new(graph.clone(), 4096, 1.0).unwrap();
        let scaled = EdgeBandit::new(graph, 4096, 5.0).unwrap();
        assert!((scaled.eta() * 5.0 - plain.eta()).abs() < 1e-15);
        assert_eq!(scaled.gamma(), plain.gamma());
    }

    #[test]
    fn gamma_decreases_in_horizon() {
        let graph = fixed_graph(4, 3);
        let mut last = f64::INFINITY;
        for t in [100usize, 1_000, 10_000, 100_000] {
            let bandit = EdgeBandit::new(graph.clone(), t, 1.0).unwrap();
            assert!(bandit.gamma() < last);
            last = bandit.gamma();
        }
    }

    #[test]
    fn gamma_clamped_for_tiny_horizon() {
        let graph = fixed_graph(4, 3);
        let bandit = EdgeBandit::new(graph, 1, 1.0).unwrap();
        assert_eq!(bandit.gamma(), 1.0);
    }

    #[test]
    fn uniform_weights_zero_gamma_is_uniform_law() {
        let graph = fixed_graph(2, 3);
        let mut bandit = EdgeBandit::new(graph.clone(), 10_000, 1.0).unwrap();
        bandit.force_state(Some(0.0), None);
        let law = bandit.path_distribution();
        let paths = graph.enumerate_paths(64).unwrap();
        for p in &paths {
            assert!((law.prob(p) - 1.0 / paths.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_one_is_exploration_law() {
        let graph = fixed_graph(2, 2);
        let mut bandit = EdgeBandit::new(graph.clone(), 10_000, 1.0).unwrap();
        // Skew the weights; with gamma = 1 they must not matter.
        let estimate: Vec<f64> = (0..graph.edge_count()).map(|i| i as f64 * 0.1).collect();
        bandit.update_weights(&estimate).unwrap();
        bandit.force_state(Some(1.0), None);
        let law = bandit.path_distribution();
        let paths = graph.enumerate_paths(64).unwrap();
        for p in &paths {
            assert!((law.prob(p) - 1.0 / paths.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn doubled_edge_law_matches_enumeration() {
        let graph = fixed_graph(1, 2);
        let mut bandit = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        let mut weights = vec![1.0; graph.edge_count()];
        weights[0] = 2.0; // first-layer edge (0,0) -> (1,0)
        bandit.force_state(Some(0.0), Some(weights));
        let law = bandit.path_distribution();
        let paths = graph.enumerate_paths(8).unwrap();
        // Paths through edge 0 carry product 2, the third path product 1; Z = 5.
        let mut by_alloc: HashMap<Vec<usize>, f64> = HashMap::new();
        for p in &paths {
            by_alloc.insert(graph.path_to_allocation(p).unwrap().troops, law.prob(p));
        }
        assert!((by_alloc[&vec![0, 0]] - 0.4).abs() < 1e-12);
        assert!((by_alloc[&vec![0, 1]] - 0.4).abs() < 1e-12);
        assert!((by_alloc[&vec![1, 0]] - 0.2).abs() < 1e-12);
        let total: f64 = by_alloc.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_matches_law_in_total_variation() {
        let graph = fixed_graph(4, 3);
        let mut bandit = EdgeBandit::new(graph.clone(), 10_000, 1.0).unwrap();
        bandit.force_state(Some(0.5), None);
        let estimate: Vec<f64> = (0..graph.edge_count())
            .map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.4)
            .collect();
        bandit.update_weights(&estimate).unwrap();

        let law = bandit.path_distribution();
        let paths = graph.enumerate_paths(64).unwrap();
        let mut rng = SeedSpec::new(99).rng();
        let draws = 100_000usize;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let p = bandit.sample_path(&mut rng);
            *counts.entry(p.edge_ids().to_vec()).or_default() += 1;
        }
        let tv: f64 = paths
            .iter()
            .map(|p| {
                let emp = counts.get(p.edge_ids()).copied().unwrap_or(0) as f64 / draws as f64;
                (emp - law.prob(p)).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn single_path_graph_sampling_is_deterministic() {
        let graph = Arc::new(LayeredGraph::build_reduced(0, 3).unwrap());
        let weights = vec![1.0; graph.edge_count()];
        let mut rng = SeedSpec::new(4).rng();
        let p = sample_mixture(&graph, &weights, 0.5, &mut rng).unwrap();
        assert_eq!(graph.path_to_allocation(&p).unwrap().troops, vec![0, 0, 0]);
    }

    #[test]
    fn cooccurrence_point_mass_is_outer_product() {
        let graph = Arc::new(LayeredGraph::build_reduced(0, 3).unwrap());
        let weights = vec![1.0; graph.edge_count()];
        let fb = graph.forward_backward(&weights).unwrap();
        let c = cooccurrence_for_weights(&graph, &weights, &fb).unwrap();
        let path = &graph.enumerate_paths(2).unwrap()[0];
        let u = path.dense(graph.edge_count());
        for i in 0..u.len() {
            for j in 0..u.len() {
                assert!((c.get(i, j) - u[i] * u[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cooccurrence_matches_enumeration_uniform() {
        let graph = fixed_graph(1, 2);
        let bandit = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        let c = bandit.cooccurrence().unwrap();
        let paths = graph.enumerate_paths(8).unwrap();
        let e = graph.edge_count();
        for i in 0..e {
            for j in 0..e {
                let exact: f64 = paths
                    .iter()
                    .map(|p| {
                        let u = p.dense(e);
                        u[i] * u[j] / paths.len() as f64
                    })
                    .sum();
                assert!(
                    (c.get(i, j) - exact).abs() < 1e-12,
                    "entry ({i},{j}): {} vs {exact}",
                    c.get(i, j)
                );
            }
        }
    }

    #[test]
    fn cooccurrence_matches_enumeration_weighted_mixture() {
        let graph = fixed_graph(3, 3);
        let mut bandit = EdgeBandit::new(graph.clone(), 1_000, 1.0).unwrap();
        bandit.force_state(Some(0.3), None);
        let estimate: Vec<f64> = (0..graph.edge_count())
            .map(|i| ((i * 5 % 11) as f64 - 5.0) * 0.2)
            .collect();
        bandit.update_weights(&estimate).unwrap();

        let c = bandit.cooccurrence().unwrap();
        let law = bandit.path_distribution();
        let paths = graph.enumerate_paths(64).unwrap();
        let e = graph.edge_count();
        let mut exact = vec![0.0; e * e];
        for p in &paths {
            let prob = law.prob(p);
            let u = p.dense(e);
            for i in 0..e {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..e {
                    exact[i * e + j] += prob * u[i] * u[j];
                }
            }
        }
        for i in 0..e {
            for j in 0..e {
                assert!(
                    (c.get(i, j) - exact[i * e + j]).abs() < 1e-12,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn zero_payoff_gives_zero_estimate() {
        let graph = fixed_graph(2, 2);
        let bandit = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        let c = bandit.cooccurrence().unwrap();
        let path = graph.enumerate_paths(16).unwrap().pop().unwrap();
        let estimate = bandit.estimate_loss(&c, &path, 0.0).unwrap();
        assert!(estimate.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_path_estimate_inner_product_is_one() {
        // C = uu^T, pinv(C) u = u / |u|^2, so the estimated path reward is 1.
        let graph = Arc::new(LayeredGraph::build_reduced(0, 4).unwrap());
        let weights = vec![1.0; graph.edge_count()];
        let fb = graph.forward_backward(&weights).unwrap();
        let c = cooccurrence_for_weights(&graph, &weights, &fb).unwrap();
        let path = graph.enumerate_paths(2).unwrap().pop().unwrap();
        let estimator = LossEstimator::new(&c).unwrap();
        let estimate = estimator.estimate(&path, 1.0, graph.edge_count());
        let inner: f64 = path.edge_ids().iter().map(|&e| estimate[e]).sum();
        assert!((inner - 1.0).abs() < 1e-9);
    }

    #[test]
    fn update_weights_identity_cases() {
        let graph = fixed_graph(2, 2);
        let mut bandit = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        let before = bandit.weights().to_vec();
        bandit.update_weights(&vec![0.0; graph.edge_count()]).unwrap();
        assert_eq!(bandit.weights(), &before[..]);

        let mut frozen = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        frozen.eta = 0.0;
        frozen.update_weights(&vec![1.5; graph.edge_count()]).unwrap();
        assert_eq!(frozen.weights(), &before[..]);
    }

    #[test]
    fn update_weights_matches_exponential() {
        let graph = fixed_graph(1, 2);
        let mut bandit = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        let estimate: Vec<f64> = (0..graph.edge_count()).map(|i| i as f64 - 3.0).collect();
        let eta = bandit.eta();
        bandit.update_weights(&estimate).unwrap();
        for edge in graph.edges() {
            let expected = if edge.is_auxiliary() {
                1.0
            } else {
                (eta * estimate[edge.id]).exp()
            };
            assert!((bandit.weights()[edge.id] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rescale_preserves_path_distribution() {
        let graph = fixed_graph(2, 3);
        let mut bandit = EdgeBandit::new(graph.clone(), 100, 1.0).unwrap();
        bandit.force_state(Some(0.2), None);
        let estimate: Vec<f64> = (0..graph.edge_count()).map(|i| (i % 3) as f64).collect();
        bandit.update_weights(&estimate).unwrap();
        let paths = graph.enumerate_paths(32).unwrap();
        let before: Vec<f64> = {
            let law = bandit.path_distribution();
            paths.iter().map(|p| law.prob(p)).collect()
        };
        // Force the rescale branch directly.
        let mut huge = bandit.weights().to_vec();
        for edge in graph.edges() {
            if !edge.is_auxiliary() {
                huge[edge.id] *= 2.0 * WEIGHT_RESCALE_TRIGGER;
            }
        }
        bandit.force_state(None, Some(huge));
        bandit.update_weights(&vec![0.0; graph.edge_count()]).unwrap();
        assert!(bandit.max_weight() <= 1.0 + 1e-12);
        let law = bandit.path_distribution();
        for (p, &b) in paths.iter().zip(&before) {
            assert!((law.prob(p) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn observe_pipeline_respects_bounds() {
        let graph = fixed_graph(3, 3);
        let mut bandit = EdgeBandit::new(graph.clone(), 2_048, 2.0).unwrap();
        let mut rng = SeedSpec::new(17).rng();
        let paths = graph.enumerate_paths(64).unwrap();
        let n = graph.battlefields() as f64;
        for t in 0..200usize {
            let path = bandit.sample_path(&mut rng);
            let payoff = ((t % 7) as f64) / 7.0;
            let diag = bandit.observe(&path, payoff).unwrap();
            let limit = bandit.reward_scale() * n / (bandit.gamma() * bandit.lambda_star());
            assert!(diag.estimate_path_bound <= limit * (1.0 + 1e-9));
            assert!(bandit.eta() * diag.estimate_path_bound <= 1.0 + 1e-9);
            // Quadratic-form bounds from the same family: every enumerated
            // path has u' C^+ u <= n/(gamma lambda*), and the expectation
            // over the path law is at most E.
            if t % 50 == 0 {
                let c = bandit.cooccurrence().unwrap();
                let estimator = LossEstimator::new(&c).unwrap();
                let law = bandit.path_distribution();
                let mut expectation = 0.0;
                for p in &paths {
                    let est = estimator.estimate(p, 1.0, graph.edge_count());
                    let quad: f64 = p.edge_ids().iter().map(|&e| est[e]).sum();
                    assert!(
                        quad <= n / (bandit.gamma() * bandit.lambda_star()) * (1.0 + 1e-9),
                        "u' C^+ u = {quad}"
                    );
                    expectation += law.prob(p) * quad;
                }
                assert!(expectation <= graph.edge_count() as f64 * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn estimator_is_conditionally_unbiased_for_linear_rewards() {
        // For r = l . u the estimate has mean pinv(C) C l; with 30k draws the
        // empirical mean should match within 4 standard errors.
        let graph = fixed_graph(2, 2);
        let mut bandit = EdgeBandit::new(graph.clone(), 1_000, 1.0).unwrap();
        bandit.force_state(Some(0.3), None);
        let bump: Vec<f64> = (0..graph.edge_count()).map(|i| (i % 4) as f64 * 0.3).collect();
        bandit.update_weights(&bump).unwrap();

        let e = graph.edge_count();
        let true_rewards: Vec<f64> = (0..e).map(|i| ((i * 3 % 5) as f64) / 20.0).collect();
        let c = bandit.cooccurrence().unwrap();
        let estimator = LossEstimator::new(&c).unwrap();
        let expected = {
            let cl = c.matvec(&true_rewards);
            let pinv_c = crate::numerics::pinv(&c, DEFAULT_RANK_TOL).unwrap();
            pinv_c.matvec(&cl)
        };

        let mut rng = SeedSpec::new(31).rng();
        let rounds = 30_000usize;
        let mut mean = vec![0.0; e];
        let mut m2 = vec![0.0; e];
        for k in 0..rounds {
            let path = bandit.sample_path(&mut rng);
            let payoff: f64 = path.edge_ids().iter().map(|&id| true_rewards[id]).sum();
            let est = estimator.estimate(&path, payoff, e);
            for i in 0..e {
                let delta = est[i] - mean[i];
                mean[i] += delta / (k + 1) as f64;
                m2[i] += delta * (est[i] - mean[i]);
            }
        }
        for i in 0..e {
            let se = (m2[i] / (rounds as f64 - 1.0)).sqrt() / (rounds as f64).sqrt();
            let dev = (mean[i] - expected[i]).abs();
            assert!(
                dev <= 4.0 * se + 1e-9,
                "component {i}: |{} - {}| = {dev} > 4 se = {}",
                mean[i],
                expected[i],
                4.0 * se
            );
        }
    }
}
