//! Layered path-planning graphs for the per-round allocation problem.
//!
//! A node `(i, j)` means "j troops committed after battlefield i", so an
//! `s,d`-path is exactly an allocation. Three variants exist:
//!
//! * `Original`: `n+1` layers, destination `(n, m)`; paths spend exactly `m`.
//! * `FixedSet`: one extra dummy layer whose auxiliary edges collect every
//!   node of layer `n`, so paths spend *at most* `m`.
//! * `Reduced`: the original shape with `m` replaced by a remaining budget
//!   `x`; paths spend exactly `x`.
//!
//! Edge ids are assigned in `(layer, source index, target index)`
//! lexicographic order, which keeps runs reproducible and lets weights carry
//! over between graphs by node coordinates.

use crate::error::{Error, Result};
use crate::game::Allocation;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphKind {
    Original,
    FixedSet,
    Reduced,
}

/// Node coordinates: `index` is the cumulative troop count `j`, not the
/// position within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub layer: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: usize,
    pub from: NodeRef,
    pub to: NodeRef,
    /// Battlefield receiving this edge's troops (0-based); `None` marks an
    /// auxiliary dummy-layer edge.
    pub battlefield: Option<usize>,
    /// Troops consumed along this edge: `to.index - from.index`.
    pub consumption: usize,
}

impl GraphEdge {
    pub fn is_auxiliary(&self) -> bool {
        self.battlefield.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct LayeredGraph {
    kind: GraphKind,
    battlefields: usize,
    /// `m` for original/fixed graphs, the remaining budget `x` for reduced.
    cap: usize,
    nodes: Vec<NodeRef>,
    layer_nodes: Vec<Vec<usize>>,
    edges: Vec<GraphEdge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    edge_src: Vec<usize>,
    edge_tgt: Vec<usize>,
}

impl LayeredGraph {
    /// Graph `G_{m,n}`: `n+1` layers, all allocations spending exactly `m`.
    pub fn build_original(m: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "original graph needs at least 2 battlefields, got {n}"
            )));
        }
        Ok(Self::build_exact_spend(GraphKind::Original, m, n))
    }

    /// Revised graph `G_{m,n+1}`: a dummy layer unifies the destinations so
    /// paths correspond to allocations spending at most `m`.
    pub fn build_fixed(m: usize, n: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidInput(format!(
                "fixed-set graph needs cap m >= 1, got {m}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "fixed-set graph needs at least 2 battlefields, got {n}"
            )));
        }
        let mut b = GraphBuilder::new(GraphKind::FixedSet, m, n);
        b.push_layer(&[0]);
        for _ in 1..=n {
            b.push_layer(&(0..=m).collect::<Vec<_>>());
        }
        b.push_layer(&[0]); // dummy destination
        for layer in 1..=n {
            b.connect_monotone(layer);
        }
        for j in 0..=m {
            b.push_edge(n, j, 0, None);
        }
        Ok(b.finish())
    }

    /// Reduced graph for remaining budget `x`: the original shape with `m`
    /// replaced by `x`, destination at `(n, x)`.
    pub fn build_reduced(x: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "reduced graph needs at least 2 battlefields, got {n}"
            )));
        }
        Ok(Self::build_exact_spend(GraphKind::Reduced, x, n))
    }

    fn build_exact_spend(kind: GraphKind, cap: usize, n: usize) -> Self {
        let mut b = GraphBuilder::new(kind, cap, n);
        b.push_layer(&[0]);
        for _ in 1..n {
            b.push_layer(&(0..=cap).collect::<Vec<_>>());
        }
        b.push_layer(&[cap]);
        for layer in 1..=n {
            b.connect_monotone(layer);
        }
        b.finish()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn battlefields(&self) -> usize {
        self.battlefields
    }

    /// Per-round cap `m` (or the remaining budget for reduced graphs).
    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &GraphEdge {
        &self.edges[id]
    }

    pub fn node(&self, id: usize) -> NodeRef {
        self.nodes[id]
    }

    pub fn layer_count(&self) -> usize {
        self.layer_nodes.len()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn destination(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// Number of edges on every `s,d`-path: `n` for exact-spend graphs,
    /// `n + 1` (one auxiliary) for the fixed-set graph.
    pub fn path_edge_count(&self) -> usize {
        match self.kind {
            GraphKind::FixedSet => self.battlefields + 1,
            _ => self.battlefields,
        }
    }

    fn node_id(&self, layer: usize, index: usize) -> Option<usize> {
        self.layer_nodes
            .get(layer)?
            .iter()
            .copied()
            .find(|&id| self.nodes[id].index == index)
    }

    fn edge_between(&self, from: usize, to: usize) -> Option<usize> {
        self.out_edges[from]
            .iter()
            .copied()
            .find(|&e| self.edge_target(e) == to)
    }

    /// Node id of the edge's source endpoint.
    pub fn edge_source(&self, id: usize) -> usize {
        self.edge_src[id]
    }

    /// Node id of the edge's target endpoint.
    pub fn edge_target(&self, id: usize) -> usize {
        self.edge_tgt[id]
    }

    /// Decode a path into the allocation it represents.
    pub fn path_to_allocation(&self, path: &PathVector) -> Result<Allocation> {
        self.check_path(path)?;
        let mut troops = vec![0usize; self.battlefields];
        for &id in path.edge_ids() {
            let e = &self.edges[id];
            if let Some(b) = e.battlefield {
                troops[b] = e.consumption;
            }
        }
        Ok(Allocation::new(troops))
    }

    /// Encode an allocation as its path. Fails if the allocation is not
    /// feasible for this graph (wrong length, or wrong total spend).
    pub fn allocation_to_path(&self, allocation: &Allocation) -> Result<PathVector> {
        if allocation.len() != self.battlefields {
            return Err(Error::DimensionMismatch(format!(
                "allocation has {} battlefields, graph has {}",
                allocation.len(),
                self.battlefields
            )));
        }
        let total = allocation.total();
        match self.kind {
            GraphKind::FixedSet => {
                if total > self.cap {
                    return Err(Error::InvalidInput(format!(
                        "allocation spends {total}, cap is {}",
                        self.cap
                    )));
                }
            }
            _ => {
                if total != self.cap {
                    return Err(Error::InvalidInput(format!(
                        "allocation spends {total}, this graph requires exactly {}",
                        self.cap
                    )));
                }
            }
        }
        let mut ids = Vec::with_capacity(self.path_edge_count());
        let mut node = self.source();
        let mut used = 0usize;
        for (i, &u) in allocation.troops.iter().enumerate() {
            used += u;
            let next = self
                .node_id(i + 1, used)
                .ok_or_else(|| Error::Internal(format!("missing node ({}, {used})", i + 1)))?;
            let edge = self
                .edge_between(node, next)
                .ok_or_else(|| Error::Internal(format!("missing edge to ({}, {used})", i + 1)))?;
            ids.push(edge);
            node = next;
        }
        if self.kind == GraphKind::FixedSet {
            let edge = self
                .edge_between(node, self.destination())
                .ok_or_else(|| Error::Internal("missing auxiliary edge".into()))?;
            ids.push(edge);
        }
        Ok(PathVector::new(ids))
    }

    /// Validate that `path` is a connected `s,d`-path of this graph.
    pub fn check_path(&self, path: &PathVector) -> Result<()> {
        if path.len() != self.path_edge_count() {
            return Err(Error::InvalidInput(format!(
                "path has {} edges, expected {}",
                path.len(),
                self.path_edge_count()
            )));
        }
        let mut node = self.source();
        for &id in path.edge_ids() {
            if id >= self.edges.len() {
                return Err(Error::InvalidInput(format!("edge id {id} out of range")));
            }
            if self.edge_source(id) != node {
                return Err(Error::InvalidInput(format!(
                    "edge {id} does not continue the path"
                )));
            }
            node = self.edge_target(id);
        }
        if node != self.destination() {
            return Err(Error::InvalidInput("path does not reach the destination".into()));
        }
        Ok(())
    }

    /// Exact number of `s,d`-paths plus its natural logarithm. The count is
    /// an integer layer DP; the log is a separate log-domain DP so it stays
    /// finite far beyond u128 range.
    pub fn count_paths(&self) -> Result<PathCount> {
        let mut count = vec![0u128; self.nodes.len()];
        let mut ln = vec![f64::NEG_INFINITY; self.nodes.len()];
        count[self.source()] = 1;
        ln[self.source()] = 0.0;
        for layer in self.layer_nodes.iter().skip(1) {
            for &node in layer {
                let mut c: u128 = 0;
                for &e in &self.in_edges[node] {
                    let src = self.edge_source(e);
                    c = c
                        .checked_add(count[src])
                        .ok_or_else(|| Error::SizeLimit("path count exceeds u128".into()))?;
                }
                count[node] = c;
                let incoming: Vec<f64> =
                    self.in_edges[node].iter().map(|&e| ln[self.edge_source(e)]).collect();
                ln[node] = log_sum_exp(&incoming);
            }
        }
        Ok(PathCount {
            count: count[self.destination()],
            ln: ln[self.destination()].max(0.0).min(f64::INFINITY),
        })
    }

    /// Weighted forward/backward path sums per node. `forward[v]` is the sum
    /// over `s -> v` paths of the product of edge weights; `backward[v]` the
    /// same for `v -> d`. `forward[d] = backward[s] = Z`, the total weighted
    /// path sum.
    pub fn forward_backward(&self, weights: &[f64]) -> Result<ForwardBackward> {
        self.check_weights(weights)?;
        let v = self.nodes.len();
        let mut forward = vec![0.0; v];
        let mut backward = vec![0.0; v];
        forward[self.source()] = 1.0;
        for layer in self.layer_nodes.iter().skip(1) {
            for &node in layer {
                forward[node] = self.in_edges[node]
                    .iter()
                    .map(|&e| forward[self.edge_source(e)] * weights[e])
                    .sum();
            }
        }
        backward[self.destination()] = 1.0;
        for layer in self.layer_nodes.iter().rev().skip(1) {
            for &node in layer {
                backward[node] = self.out_edges[node]
                    .iter()
                    .map(|&e| backward[self.edge_target(e)] * weights[e])
                    .sum();
            }
        }
        let total = forward[self.destination()];
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "weighted path sum Z = {total} is not finite and positive"
            )));
        }
        Ok(ForwardBackward { forward, backward, total })
    }

    /// Weighted path sums between every ordered node pair `(a, b)` with
    /// `layer(a) <= layer(b)`. `M[a][a] = 1`; entries with no path are 0.
    pub fn node_pair_sums(&self, weights: &[f64]) -> Result<NodePairSums> {
        self.check_weights(weights)?;
        let v = self.nodes.len();
        let mut data = vec![0.0; v * v];
        for a in 0..v {
            data[a * v + a] = 1.0;
            let a_layer = self.nodes[a].layer;
            for layer in self.layer_nodes.iter().skip(a_layer + 1) {
                for &node in layer {
                    data[a * v + node] = self.in_edges[node]
                        .iter()
                        .map(|&e| data[a * v + self.edge_source(e)] * weights[e])
                        .sum();
                }
            }
        }
        Ok(NodePairSums { dim: v, data })
    }

    /// Max and min over `s,d`-paths of the additive edge-value sum. Used for
    /// the per-round estimate-magnitude invariants.
    pub fn path_sum_extrema(&self, values: &[f64]) -> Result<(f64, f64)> {
        if values.len() != self.edges.len() {
            return Err(Error::DimensionMismatch(format!(
                "got {} edge values for {} edges",
                values.len(),
                self.edges.len()
            )));
        }
        let v = self.nodes.len();
        let mut hi = vec![f64::NEG_INFINITY; v];
        let mut lo = vec![f64::INFINITY; v];
        hi[self.source()] = 0.0;
        lo[self.source()] = 0.0;
        for layer in self.layer_nodes.iter().skip(1) {
            for &node in layer {
                for &e in &self.in_edges[node] {
                    let src = self.edge_source(e);
                    hi[node] = hi[node].max(hi[src] + values[e]);
                    lo[node] = lo[node].min(lo[src] + values[e]);
                }
            }
        }
        Ok((hi[self.destination()], lo[self.destination()]))
    }

    /// Every `s,d`-path, in lexicographic edge order. Guarded so it is only
    /// used on desk-scale graphs (tests, validation, oracles).
    pub fn enumerate_paths(&self, limit: usize) -> Result<Vec<PathVector>> {
        let count = self.count_paths()?.count;
        if count > limit as u128 {
            return Err(Error::SizeLimit(format!(
                "graph has {count} paths, enumeration limit is {limit}"
            )));
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut stack = Vec::with_capacity(self.path_edge_count());
        self.enumerate_from(self.source(), &mut stack, &mut out);
        Ok(out)
    }

    fn enumerate_from(&self, node: usize, stack: &mut Vec<usize>, out: &mut Vec<PathVector>) {
        if node == self.destination() {
            out.push(PathVector::new(stack.clone()));
            return;
        }
        for &e in &self.out_edges[node] {
            stack.push(e);
            self.enumerate_from(self.edge_target(e), stack, out);
            stack.pop();
        }
    }

    /// Plain-text edge list for debugging: one line per edge with
    /// `id from_layer from_index to_layer to_index battlefield|AUX`.
    pub fn export_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let label = match e.battlefield {
                Some(b) => b.to_string(),
                None => "AUX".into(),
            };
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                e.id, e.from.layer, e.from.index, e.to.layer, e.to.index, label
            ));
        }
        out
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.edges.len() {
            return Err(Error::DimensionMismatch(format!(
                "got {} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput(
                "edge weights must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Map edge weights learned on `from` onto `to` by node coordinates.
/// Edges of `to` with no counterpart keep weight 1.
pub fn carry_weights(to: &LayeredGraph, from: &LayeredGraph, from_weights: &[f64]) -> Result<Vec<f64>> {
    if from_weights.len() != from.edge_count() {
        return Err(Error::DimensionMismatch(format!(
            "got {} weights for {} edges",
            from_weights.len(),
            from.edge_count()
        )));
    }
    let mut out = vec![1.0; to.edge_count()];
    for e in to.edges() {
        let counterpart = from.edges().iter().find(|f| {
            f.from.layer == e.from.layer
                && f.from.index == e.from.index
                && f.to.index == e.to.index
                && f.battlefield == e.battlefield
        });
        if let Some(f) = counterpart {
            out[e.id] = from_weights[f.id];
        }
    }
    Ok(out)
}

/// Reduced graph plus the weights inherited from a fixed-set graph.
pub fn build_reduced_with_weights(
    x: usize,
    n: usize,
    fixed: &LayeredGraph,
    fixed_weights: &[f64],
) -> Result<(LayeredGraph, Vec<f64>)> {
    let reduced = LayeredGraph::build_reduced(x, n)?;
    let weights = carry_weights(&reduced, fixed, fixed_weights)?;
    Ok((reduced, weights))
}

/// Exact and log-domain `s,d`-path counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCount {
    pub count: u128,
    pub ln: f64,
}

/// Output of [`LayeredGraph::forward_backward`].
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub total: f64,
}

/// Output of [`LayeredGraph::node_pair_sums`]: a dense `V x V` matrix.
#[derive(Debug, Clone)]
pub struct NodePairSums {
    dim: usize,
    data: Vec<f64>,
}

impl NodePairSums {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.dim + b]
    }
}

/// An `s,d`-path as the ordered list of its edge ids; equivalently the 0/1
/// characteristic vector over all edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathVector {
    edge_ids: Vec<usize>,
}

impl PathVector {
    pub fn new(edge_ids: Vec<usize>) -> Self {
        PathVector { edge_ids }
    }

    /// Edge ids in path order (source to destination).
    pub fn edge_ids(&self) -> &[usize] {
        &self.edge_ids
    }

    pub fn len(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_ids.is_empty()
    }

    pub fn contains(&self, edge_id: usize) -> bool {
        self.edge_ids.contains(&edge_id)
    }

    /// Dense 0/1 characteristic vector of length `edge_count`.
    pub fn dense(&self, edge_count: usize) -> Vec<f64> {
        let mut v = vec![0.0; edge_count];
        for &id in &self.edge_ids {
            v[id] = 1.0;
        }
        v
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct GraphBuilder {
    kind: GraphKind,
    cap: usize,
    battlefields: usize,
    nodes: Vec<NodeRef>,
    layer_nodes: Vec<Vec<usize>>,
    edges: Vec<GraphEdge>,
}

impl GraphBuilder {
    fn new(kind: GraphKind, cap: usize, battlefields: usize) -> Self {
        GraphBuilder {
            kind,
            cap,
            battlefields,
            nodes: Vec::new(),
            layer_nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    fn push_layer(&mut self, indices: &[usize]) {
        let layer = self.layer_nodes.len();
        let ids = indices
            .iter()
            .map(|&index| {
                self.nodes.push(NodeRef { layer, index });
                self.nodes.len() - 1
            })
            .collect();
        self.layer_nodes.push(ids);
    }

    /// Edges `(layer-1, j) -> (layer, j')` for every `j' >= j` present in
    /// both layers, labeled with battlefield `layer - 1`.
    fn connect_monotone(&mut self, layer: usize) {
        let froms: Vec<usize> = self.layer_nodes[layer - 1]
            .iter()
            .map(|&id| self.nodes[id].index)
            .collect();
        let tos: Vec<usize> = self.layer_nodes[layer]
            .iter()
            .map(|&id| self.nodes[id].index)
            .collect();
        for j in froms {
            for &j2 in tos.iter().filter(|&&j2| j2 >= j) {
                self.push_edge(layer - 1, j, j2, Some(layer - 1));
            }
        }
    }

    fn push_edge(&mut self, from_layer: usize, from_index: usize, to_index: usize, battlefield: Option<usize>) {
        let id = self.edges.len();
        let consumption = if battlefield.is_some() { to_index - from_index } else { 0 };
        self.edges.push(GraphEdge {
            id,
            from: NodeRef { layer: from_layer, index: from_index },
            to: NodeRef { layer: from_layer + 1, index: to_index },
            battlefield,
            consumption,
        });
    }

    fn finish(self) -> LayeredGraph {
        let mut out_edges = vec![Vec::new(); self.nodes.len()];
        let mut in_edges = vec![Vec::new(); self.nodes.len()];
        let mut edge_src = Vec::with_capacity(self.edges.len());
        let mut edge_tgt = Vec::with_capacity(self.edges.len());
        let locate = |layer: usize, index: usize| -> usize {
            self.layer_nodes[layer]
                .iter()
                .copied()
                .find(|&id| self.nodes[id].index == index)
                .expect("builder emitted valid endpoints")
        };
        for e in &self.edges {
            let src = locate(e.from.layer, e.from.index);
            let tgt = locate(e.to.layer, e.to.index);
            out_edges[src].push(e.id);
            in_edges[tgt].push(e.id);
            edge_src.push(src);
            edge_tgt.push(tgt);
        }
        LayeredGraph {
            kind: self.kind,
            battlefields: self.battlefields,
            cap: self.cap,
            nodes: self.nodes,
            layer_nodes: self.layer_nodes,
            edges: self.edges,
            out_edges,
            in_edges,
            edge_src,
            edge_tgt,
        }
    }
}

/// Closed-form edge count of the fixed-set graph `G_{m,n+1}`:
/// `(m+1) * ((m+2)(n-1) + 4) / 2`.
pub fn fixed_set_edge_count(m: usize, n: usize) -> usize {
    (m + 1) * ((m + 2) * (n - 1) + 4) / 2
}
