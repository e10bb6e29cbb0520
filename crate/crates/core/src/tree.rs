//! Regression tree arena and its projection semantics.
//!
//! Nodes live in an arena and are only ever appended, children right after
//! each other, so every earlier state of a growing tree is the prefix of the
//! arena holding the first `limit` nodes. A [`TreeView`] names such a prefix,
//! optionally with a set of pruned (collapsed) internal nodes, and acts as the
//! orthogonal projection onto functions constant on its leaves.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::splitter::{best_split_presorted, robust_mean, NodeStats, SplitCandidate};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CachedSplit {
    Unknown,
    Known(Option<SplitCandidate>),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub parent: Option<NodeId>,
    /// Left child id; the right child is `left + 1`.
    pub left: Option<NodeId>,
    pub split: Option<SplitRule>,
    pub start: usize,
    pub end: usize,
    pub stats: NodeStats,
    pub depth: usize,
    cached: CachedSplit,
}

impl Node {
    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        self.left.map(|l| (l, l + 1))
    }

    pub fn is_terminal(&self) -> bool {
        self.left.is_none()
    }
}

/// Outcome of a single split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEvent {
    pub node: NodeId,
    pub left: NodeId,
    pub right: NodeId,
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    /// (n_A / n) · gain, the decrease of the global residual R².
    pub residual_decrease: f64,
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    /// `orders[j]` holds the sample indices, grouped by node range and sorted
    /// by feature `j` inside each range.
    orders: Vec<Vec<usize>>,
    leaves: Vec<NodeId>,
    n: usize,
    scratch: Vec<usize>,
    side: Vec<bool>,
}

impl Tree {
    /// Root-only tree over all samples of `ds`.
    pub fn new(ds: &Dataset) -> Self {
        let n = ds.n_samples();
        let orders: Vec<Vec<usize>> = (0..ds.n_features())
            .map(|j| {
                let x = ds.feature(j);
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let stats = NodeStats::from_indices(ds.y(), &orders[0]);
        let root = Node {
            parent: None,
            left: None,
            split: None,
            start: 0,
            end: n,
            stats,
            depth: 0,
            cached: CachedSplit::Unknown,
        };
        Self {
            nodes: vec![root],
            orders,
            leaves: vec![0],
            n,
            scratch: Vec::with_capacity(n),
            side: vec![false; n],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Current terminal nodes, in no particular order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Sample indices of node `id`.
    pub fn members(&self, id: NodeId) -> &[usize] {
        let node = &self.nodes[id];
        &self.orders[0][node.start..node.end]
    }

    /// Best split of a node, computed once and cached.
    pub fn best_split(&mut self, ds: &Dataset, id: NodeId) -> Option<SplitCandidate> {
        if let CachedSplit::Known(c) = self.nodes[id].cached {
            return c;
        }
        let node = &self.nodes[id];
        let slices: Vec<&[usize]> = self
            .orders
            .iter()
            .map(|o| &o[node.start..node.end])
            .collect();
        let best = best_split_presorted(ds, &slices, &node.stats);
        self.nodes[id].cached = CachedSplit::Known(best);
        best
    }

    /// The split a terminal node would take, or `None` if it is permanently
    /// unsplittable: a single sample, zero impurity, no feature with two
    /// distinct values, or (unless allowed) a best gain of zero.
    pub fn splittable(
        &mut self,
        ds: &Dataset,
        id: NodeId,
        allow_zero_gain: bool,
    ) -> Option<SplitCandidate> {
        let node = &self.nodes[id];
        if !node.is_terminal() || node.stats.count < 2 || node.stats.sse == 0.0 {
            return None;
        }
        self.best_split(ds, id)
            .filter(|c| allow_zero_gain || c.gain > 0.0)
    }

    /// Splits terminal node `id`; children get contiguous sub-ranges.
    pub fn split_node(
        &mut self,
        ds: &Dataset,
        id: NodeId,
        split: &SplitCandidate,
    ) -> Result<NodeEvent> {
        if id >= self.nodes.len() {
            return Err(Error::InvalidSplit(format!("no node {id}")));
        }
        if !self.nodes[id].is_terminal() {
            return Err(Error::NotTerminal(id));
        }
        if split.feature >= ds.n_features() {
            return Err(Error::InvalidSplit(format!(
                "feature {} out of range",
                split.feature
            )));
        }
        let (start, end, depth) = {
            let node = &self.nodes[id];
            (node.start, node.end, node.depth)
        };
        let x = ds.feature(split.feature);
        let mut n_left = 0;
        for &i in &self.orders[0][start..end] {
            let is_left = x[i] < split.threshold;
            self.side[i] = is_left;
            n_left += usize::from(is_left);
        }
        if n_left == 0 || n_left == end - start {
            return Err(Error::InvalidSplit(format!(
                "threshold {} on feature {} leaves an empty child",
                split.threshold, split.feature
            )));
        }

        for order in &mut self.orders {
            self.scratch.clear();
            let range = &mut order[start..end];
            let mut w = 0;
            for r in 0..range.len() {
                let i = range[r];
                if self.side[i] {
                    range[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            range[w..].copy_from_slice(&self.scratch);
        }

        let y = ds.y();
        let mid = start + n_left;
        let left_stats = NodeStats::from_indices(y, &self.orders[0][start..mid]);
        let right_stats = NodeStats::from_indices(y, &self.orders[0][mid..end]);
        let left = self.nodes.len();
        for (s, e, stats) in [(start, mid, left_stats), (mid, end, right_stats)] {
            self.nodes.push(Node {
                parent: Some(id),
                left: None,
                split: None,
                start: s,
                end: e,
                stats,
                depth: depth + 1,
                cached: CachedSplit::Unknown,
            });
        }
        let parent = &mut self.nodes[id];
        let gain = if split.gain.is_finite() {
            split.gain
        } else {
            crate::splitter::impurity_gain(
                ds,
                &self.orders[0][start..end],
                split.feature,
                split.threshold,
            )?
        };
        parent.left = Some(left);
        parent.split = Some(SplitRule {
            feature: split.feature,
            threshold: split.threshold,
            gain,
        });
        let n_a = parent.stats.count as f64;

        let pos = self
            .leaves
            .iter()
            .position(|&l| l == id)
            .expect("terminal node is a leaf");
        self.leaves[pos] = left;
        self.leaves.push(left + 1);

        Ok(NodeEvent {
            node: id,
            left,
            right: left + 1,
            feature: split.feature,
            threshold: split.threshold,
            gain,
            residual_decrease: n_a / self.n as f64 * gain,
        })
    }

    /// Global residual R² = (1/n) Σ_leaves n_A R²(A), summed from node stats.
    pub fn residual_norm_sq(&self) -> f64 {
        let mut leaves = self.leaves.clone();
        leaves.sort_unstable();
        leaves.iter().map(|&l| self.nodes[l].stats.sse).sum::<f64>() / self.n as f64
    }

    /// The tree as it is now.
    pub fn view(&self) -> TreeView<'_> {
        TreeView {
            tree: self,
            limit: self.nodes.len(),
            pruned: None,
        }
    }

    /// The tree restricted to its first `limit` nodes. `limit = 0` is the
    /// empty partition whose projection is zero.
    pub fn view_at(&self, limit: usize) -> TreeView<'_> {
        TreeView {
            tree: self,
            limit: limit.min(self.nodes.len()),
            pruned: None,
        }
    }
}

/// A subtree sharing the root of a [`Tree`]: an arena prefix, optionally with
/// nodes collapsed by pruning.
#[derive(Debug, Clone, Copy)]
pub struct TreeView<'a> {
    tree: &'a Tree,
    limit: usize,
    /// `(collapse_step, step)`: node `v` is collapsed when `collapse_step[v] <= step`.
    pruned: Option<(&'a [usize], usize)>,
}

impl<'a> TreeView<'a> {
    pub fn tree(&self) -> &'a Tree {
        self.tree
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Same base view with nodes collapsed at or before pruning step `step`.
    pub fn pruned(&self, collapse_step: &'a [usize], step: usize) -> TreeView<'a> {
        debug_assert!(self.pruned.is_none());
        TreeView {
            tree: self.tree,
            limit: self.limit,
            pruned: Some((collapse_step, step)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.limit == 0
    }

    #[inline]
    pub fn is_internal(&self, id: NodeId) -> bool {
        if id >= self.limit {
            return false;
        }
        match self.tree.nodes[id].left {
            Some(l) if l < self.limit => match self.pruned {
                Some((steps, step)) => steps[id] > step,
                None => true,
            },
            _ => false,
        }
    }

    /// Terminal nodes of the view in depth-first (left before right) order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        if self.limit == 0 {
            return out;
        }
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            if self.is_internal(id) {
                let l = self.tree.nodes[id].left.unwrap();
                stack.push(l + 1);
                stack.push(l);
            } else {
                out.push(id);
            }
        }
        out
    }

    /// Internal nodes reachable from the root.
    pub fn internal_nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        if self.limit == 0 {
            return out;
        }
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            if self.is_internal(id) {
                out.push(id);
                let l = self.tree.nodes[id].left.unwrap();
                stack.push(l + 1);
                stack.push(l);
            }
        }
        out
    }

    /// Number of terminal nodes k = trace(Π).
    pub fn n_leaves(&self) -> usize {
        if self.limit == 0 {
            return 0;
        }
        self.internal_nodes().len() + 1
    }

    /// Π v: averages of `v` over each terminal node.
    pub fn apply_projection(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(
            v.len(),
            self.tree.n,
            "vector length must match the sample count"
        );
        let mut out = vec![0.0; v.len()];
        for leaf in self.leaves() {
            let members = self.tree.members(leaf);
            let (_, mean) = robust_mean(members.iter().map(|&i| v[i]));
            for &i in members {
                out[i] = mean;
            }
        }
        out
    }

    /// F̂ = Π Y.
    pub fn fit_values(&self, ds: &Dataset) -> Vec<f64> {
        self.apply_projection(ds.y())
    }

    /// R² = ‖Y − Π Y‖²_n, summed from leaf statistics.
    pub fn residual_norm_sq(&self, ds: &Dataset) -> f64 {
        if self.limit == 0 {
            return crate::dataset::empirical_norm_sq(ds.y());
        }
        self.residual_norm_sq_from_stats()
    }

    /// (1/n) Σ_leaves n_A R²(A); zero for the empty view.
    pub fn residual_norm_sq_from_stats(&self) -> f64 {
        self.leaves()
            .iter()
            .map(|&l| self.tree.nodes[l].stats.sse)
            .sum::<f64>()
            / self.tree.n as f64
    }

    /// Terminal node reached by a covariate vector given as a lookup `x(j)`.
    pub fn leaf_for<F: Fn(usize) -> f64>(&self, x: F) -> Option<NodeId> {
        if self.limit == 0 {
            return None;
        }
        let mut id = 0;
        while self.is_internal(id) {
            let node = &self.tree.nodes[id];
            let rule = node.split.expect("internal node has a split");
            let l = node.left.unwrap();
            id = if x(rule.feature) < rule.threshold {
                l
            } else {
                l + 1
            };
        }
        Some(id)
    }

    pub fn predict_with<F: Fn(usize) -> f64>(&self, x: F) -> f64 {
        self.leaf_for(x)
            .map_or(0.0, |id| self.tree.nodes[id].stats.mean)
    }

    /// Predictions for every row of `ds`.
    pub fn predict(&self, ds: &Dataset) -> Vec<f64> {
        (0..ds.n_samples())
            .map(|i| self.predict_with(|j| ds.value(i, j)))
            .collect()
    }

    /// Serializable copy of the view with compact node ids.
    pub fn to_document(&self, feature_names: Option<&[String]>) -> TreeDocument {
        let mut nodes = Vec::new();
        if self.limit > 0 {
            let mut queue = std::collections::VecDeque::from([(0usize, None::<usize>)]);
            let mut remap = std::collections::HashMap::new();
            while let Some((id, parent)) = queue.pop_front() {
                let new_id = nodes.len();
                remap.insert(id, new_id);
                let node = &self.tree.nodes[id];
                nodes.push(NodeDocument {
                    id: new_id,
                    parent,
                    left: None,
                    right: None,
                    feature: None,
                    threshold: None,
                    gain: None,
                    count: node.stats.count,
                    mean: node.stats.mean,
                    impurity: node.stats.impurity(),
                    depth: node.depth,
                });
                if self.is_internal(id) {
                    let l = node.left.unwrap();
                    queue.push_back((l, Some(new_id)));
                    queue.push_back((l + 1, Some(new_id)));
                }
            }
            // children are enqueued in order, so their compact ids follow
            for (old, &new) in &remap {
                if self.is_internal(*old) {
                    let node = &self.tree.nodes[*old];
                    let rule = node.split.unwrap();
                    let l = node.left.unwrap();
                    let doc = &mut nodes[new];
                    doc.left = Some(remap[&l]);
                    doc.right = Some(remap[&(l + 1)]);
                    doc.feature = Some(rule.feature);
                    doc.threshold = Some(rule.threshold);
                    doc.gain = Some(rule.gain);
                }
            }
        }
        let n_leaves = nodes.iter().filter(|n| n.left.is_none()).count();
        TreeDocument {
            n_leaves,
            feature_names: feature_names.map(<[String]>::to_vec),
            nodes,
        }
    }
}

/// JSON form of a fitted tree. Node 0 is the root; an empty node list stands
/// for the zero function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub n_leaves: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDocument {
    pub id: usize,
    pub parent: Option<usize>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub gain: Option<f64>,
    pub count: usize,
    pub mean: f64,
    pub impurity: f64,
    pub depth: usize,
}

impl TreeDocument {
    pub fn predict_with<F: Fn(usize) -> f64>(&self, x: F) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            match (node.left, node.right, node.feature, node.threshold) {
                (Some(l), Some(r), Some(j), Some(c)) => id = if x(j) < c { l } else { r },
                _ => return node.mean,
            }
        }
    }
}
