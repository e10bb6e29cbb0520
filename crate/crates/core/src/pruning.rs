//! Cost-complexity pruning.
//!
//! The weakest-link recursion collapses, at each step, every internal node
//! minimising g(v) = (R²(v as leaf) − R²(subtree of v)) / (|T_v| − 1), which
//! yields the nested subtrees T_λ = argmin R²(T) + λ|T|. A path is stored as
//! one integer per node, the step at which the node turns into a leaf, so any
//! subtree on the path is a [`TreeView`] of the original tree.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::growth::{grow_deep, grow_global, GrowthMode, StoppingConfig};
use crate::rng::{self, streams};
use crate::tree::{NodeId, Tree, TreeView};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    /// Pruning step; nodes with `collapse_at <= step` are leaves.
    pub step: usize,
    /// R²(T_λ).
    pub residual: f64,
    pub leaves: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruningPath {
    /// Arena prefix of the tree that was pruned.
    pub limit: usize,
    pub collapse_at: Vec<usize>,
    pub entries: Vec<PathEntry>,
}

impl PruningPath {
    pub fn subtree<'a>(&'a self, tree: &'a Tree, entry: usize) -> TreeView<'a> {
        tree.view_at(self.limit)
            .pruned(&self.collapse_at, self.entries[entry].step)
    }

    /// Index of the entry whose λ-interval contains `lambda`.
    pub fn entry_for_lambda(&self, lambda: f64) -> usize {
        self.entries
            .partition_point(|e| e.lambda <= lambda)
            .saturating_sub(1)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Weakest {
    g: f64,
    node: NodeId,
    version: u32,
}

impl PartialEq for Weakest {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Weakest {}
impl PartialOrd for Weakest {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Weakest {
    fn cmp(&self, other: &Self) -> Ordering {
        self.g
            .total_cmp(&other.g)
            .then(self.node.cmp(&other.node))
            .then(self.version.cmp(&other.version))
    }
}

struct PathBuilder<'a> {
    tree: &'a Tree,
    n: f64,
    alive: Vec<bool>,
    version: Vec<u32>,
    sub_sse: Vec<f64>,
    sub_leaves: Vec<usize>,
    collapse_at: Vec<usize>,
    heap: BinaryHeap<Reverse<Weakest>>,
}

impl PathBuilder<'_> {
    fn g(&self, v: NodeId) -> f64 {
        let own = self.tree.node(v).stats.sse;
        ((own - self.sub_sse[v]) / (self.n * (self.sub_leaves[v] - 1) as f64)).max(0.0)
    }

    fn push(&mut self, v: NodeId) {
        self.version[v] += 1;
        let entry = Weakest {
            g: self.g(v),
            node: v,
            version: self.version[v],
        };
        self.heap.push(Reverse(entry));
    }

    fn pop_valid(&mut self, at_most: f64) -> Option<Weakest> {
        while let Some(&Reverse(top)) = self.heap.peek() {
            if !self.alive[top.node] || top.version != self.version[top.node] {
                self.heap.pop();
                continue;
            }
            if top.g > at_most {
                return None;
            }
            self.heap.pop();
            return Some(top);
        }
        None
    }

    fn collapse(&mut self, v: NodeId, step: usize) {
        self.alive[v] = false;
        self.collapse_at[v] = step;
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if let Some((l, r)) = self.tree.node(u).children() {
                for c in [l, r] {
                    if self.alive[c] {
                        self.alive[c] = false;
                        stack.push(c);
                    }
                }
            }
        }
        self.sub_sse[v] = self.tree.node(v).stats.sse;
        self.sub_leaves[v] = 1;
        let mut cur = self.tree.node(v).parent;
        while let Some(u) = cur {
            let (l, r) = self.tree.node(u).children().expect("ancestor is internal");
            self.sub_sse[u] = self.sub_sse[l] + self.sub_sse[r];
            self.sub_leaves[u] = self.sub_leaves[l] + self.sub_leaves[r];
            self.push(u);
            cur = self.tree.node(u).parent;
        }
    }
}

/// Weakest-link path of the (unpruned) view. Entry 0 has λ = 0 and is the
/// smallest subtree with the view's residual.
pub fn weakest_link_path(view: TreeView<'_>) -> PruningPath {
    let tree = view.tree();
    let m = tree.n_nodes();
    let n = tree.n_samples() as f64;
    let limit = view.limit();
    let internal = view.internal_nodes();
    let mut b = PathBuilder {
        tree,
        n,
        alive: vec![false; m],
        version: vec![0; m],
        sub_sse: vec![0.0; m],
        sub_leaves: vec![0; m],
        collapse_at: vec![usize::MAX; m],
        heap: BinaryHeap::with_capacity(internal.len()),
    };
    for leaf in view.leaves() {
        b.sub_sse[leaf] = tree.node(leaf).stats.sse;
        b.sub_leaves[leaf] = 1;
    }
    // reverse preorder visits children first
    for &v in internal.iter().rev() {
        let (l, r) = tree.node(v).children().unwrap();
        b.sub_sse[v] = b.sub_sse[l] + b.sub_sse[r];
        b.sub_leaves[v] = b.sub_leaves[l] + b.sub_leaves[r];
        b.alive[v] = true;
    }
    for &v in &internal {
        b.push(v);
    }

    let root_impurity = if limit == 0 {
        0.0
    } else {
        tree.node(0).stats.impurity()
    };
    let entry = |b: &PathBuilder<'_>, lambda: f64, step: usize| {
        let pruned = tree.view_at(limit).pruned(&b.collapse_at, step);
        let residual = pruned.residual_norm_sq_from_stats();
        PathEntry {
            lambda,
            step,
            residual,
            leaves: if limit == 0 { 0 } else { b.sub_leaves[0] },
        }
    };

    let mut entries = Vec::new();
    let tol0 = 1e-12 * root_impurity;
    while let Some(w) = b.pop_valid(tol0) {
        b.collapse(w.node, 0);
    }
    entries.push(entry(&b, 0.0, 0));
    let mut step = 0;
    while let Some(first) = b.pop_valid(f64::INFINITY) {
        step += 1;
        let g_star = first.g;
        let thresh = g_star + 1e-12 * (g_star.abs() + root_impurity);
        b.collapse(first.node, step);
        while let Some(w) = b.pop_valid(thresh) {
            b.collapse(w.node, step);
        }
        entries.push(entry(&b, g_star, step));
    }
    PruningPath {
        limit,
        collapse_at: b.collapse_at,
        entries,
    }
}

/// Drops entries whose residual exceeds that of the last kept entry by more
/// than `tol`. The first entry is always kept.
pub fn filter_path(path: &PruningPath, tol: f64) -> PruningPath {
    let mut entries: Vec<PathEntry> = Vec::with_capacity(path.entries.len());
    for e in &path.entries {
        match entries.last() {
            Some(last) if e.residual - last.residual > tol => {}
            _ => entries.push(*e),
        }
    }
    PruningPath {
        limit: path.limit,
        collapse_at: path.collapse_at.clone(),
        entries,
    }
}

/// Seeded shuffle cut into `folds` contiguous blocks; the first `n % folds`
/// blocks get one extra row. Returns the fold of every row.
pub fn fold_assignment(n: usize, folds: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let base = n / folds;
    let extra = n % folds;
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    fold_of
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSelection {
    pub lambda_opt: f64,
    /// Chosen entry of the path that was cross-validated.
    pub entry: usize,
    /// Evaluation points √(λ_h λ_{h+1}), the last one λ_H.
    pub grid: Vec<f64>,
    pub fold_errors: Vec<Vec<f64>>,
    pub mean_errors: Vec<f64>,
    pub fold_of: Vec<usize>,
}

/// Geometric interval midpoints of a path.
pub fn cv_grid(path: &PruningPath) -> Vec<f64> {
    let l = path.lambdas();
    (0..l.len())
        .map(|h| {
            if h + 1 < l.len() {
                (l[h] * l[h + 1]).sqrt()
            } else {
                l[h]
            }
        })
        .collect()
}

/// Squared validation errors of a fold tree at every λ of `grid`.
fn fold_errors(tree: &Tree, path: &PruningPath, val: &Dataset, grid: &[f64]) -> Vec<f64> {
    let steps: Vec<usize> = grid
        .iter()
        .map(|&b| path.entries[path.entry_for_lambda(b)].step)
        .collect();
    let full = tree.view_at(path.limit);
    let mut sums = vec![0.0; grid.len()];
    let mut route = Vec::new();
    for i in 0..val.n_samples() {
        route.clear();
        let mut id = 0;
        route.push(id);
        while full.is_internal(id) {
            let node = tree.node(id);
            let rule = node.split.unwrap();
            let (l, r) = node.children().unwrap();
            id = if val.value(i, rule.feature) < rule.threshold {
                l
            } else {
                r
            };
            route.push(id);
        }
        let y = val.y()[i];
        for (sum, &step) in sums.iter_mut().zip(&steps) {
            let leaf = route
                .iter()
                .copied()
                .find(|&v| path.collapse_at[v] <= step || !full.is_internal(v))
                .unwrap();
            let e = tree.node(leaf).stats.mean - y;
            *sum += e * e;
        }
    }
    sums
}

/// K-fold cross-validation of `path` (grown on `ds`). `build` regrows the
/// tree to be pruned on each fold's training part and returns it with its
/// arena prefix.
pub fn cv_select<B>(
    ds: &Dataset,
    path: &PruningPath,
    folds: usize,
    seed: u64,
    stream: u64,
    build: B,
) -> Result<CvSelection>
where
    B: Fn(&Dataset) -> Result<(Tree, usize)> + Sync,
{
    let n = ds.n_samples();
    if folds < 2 || n < folds {
        return Err(Error::InvalidArgument(format!(
            "cannot run {folds}-fold cross-validation on {n} rows"
        )));
    }
    let fold_of = fold_assignment(n, folds, &mut rng::stream(seed, stream));
    let grid = cv_grid(path);
    let fold_errors: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let val_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let train = ds.subset(&train_idx)?;
            let val = ds.subset(&val_idx)?;
            let (tree, limit) = build(&train)?;
            let fold_path = weakest_link_path(tree.view_at(limit));
            let sums = fold_errors(&tree, &fold_path, &val, &grid);
            Ok(sums.into_iter().map(|s| s / val_idx.len() as f64).collect())
        })
        .collect::<Result<_>>()?;
    let mean_errors: Vec<f64> = (0..grid.len())
        .map(|h| fold_errors.iter().map(|e| e[h]).sum::<f64>() / folds as f64)
        .collect();
    let mut entry = 0;
    for h in 1..grid.len() {
        let best = mean_errors[entry];
        if mean_errors[h] < best - 1e-12 * best.abs() {
            entry = h;
        }
    }
    Ok(CvSelection {
        lambda_opt: path.entries[entry].lambda,
        entry,
        grid,
        fold_errors,
        mean_errors,
        fold_of,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneConfig {
    pub folds: usize,
    pub seed: u64,
    /// Residual-jump filter applied to the path before cross-validation. Off
    /// by default: it keeps nothing past the first jump above the tolerance.
    pub filter_tol: Option<f64>,
}

impl PruneConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: 5,
            seed,
            filter_tol: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrunedFit {
    pub tree: Tree,
    /// Path after filtering.
    pub path: PruningPath,
    pub full_path_len: usize,
    pub selection: CvSelection,
    /// ĝ of the first stage in the two-step procedure.
    pub first_stage_generation: Option<usize>,
    pub seconds: f64,
}

impl PrunedFit {
    pub fn view(&self) -> TreeView<'_> {
        self.path.subtree(&self.tree, self.selection.entry)
    }

    /// The unpruned starting tree.
    pub fn base_view(&self) -> TreeView<'_> {
        self.tree.view_at(self.path.limit)
    }
}

fn deep_base(ds: &Dataset) -> Result<(Tree, usize)> {
    let tree = grow_deep(ds);
    let limit = tree.n_nodes();
    Ok((tree, limit))
}

/// Global growth to generation ĝ + 1.
fn two_step_base(ds: &Dataset, stop: &StoppingConfig) -> Result<(Tree, usize, usize)> {
    let mut cfg = stop.clone();
    cfg.mode = GrowthMode::Global;
    cfg.extra_generations = 1;
    cfg.run_to_completion = false;
    let res = grow_global(ds, &cfg)?;
    let limit = res.tree.n_nodes();
    Ok((res.tree, limit, res.report.generation))
}

fn fit_path<B>(
    ds: &Dataset,
    tree: Tree,
    limit: usize,
    cfg: &PruneConfig,
    stream: u64,
    build: B,
) -> Result<(Tree, PruningPath, usize, CvSelection)>
where
    B: Fn(&Dataset) -> Result<(Tree, usize)> + Sync,
{
    let full = weakest_link_path(tree.view_at(limit));
    let full_len = full.entries.len();
    let path = match cfg.filter_tol {
        Some(tol) => filter_path(&full, tol),
        None => full,
    };
    let selection = cv_select(ds, &path, cfg.folds, cfg.seed, stream, build)?;
    Ok((tree, path, full_len, selection))
}

/// Deep tree pruned with cross-validated λ.
pub fn prune_cv(ds: &Dataset, cfg: &PruneConfig) -> Result<PrunedFit> {
    let start = Instant::now();
    let (tree, limit) = deep_base(ds)?;
    let (tree, path, full_path_len, selection) =
        fit_path(ds, tree, limit, cfg, streams::FOLDS, deep_base)?;
    Ok(PrunedFit {
        tree,
        path,
        full_path_len,
        selection,
        first_stage_generation: None,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Global early stopping to ĝ, one more generation, then cross-validated
/// pruning. Each fold reruns the first stage with the same κ.
pub fn two_step(ds: &Dataset, stop: &StoppingConfig, cfg: &PruneConfig) -> Result<PrunedFit> {
    let start = Instant::now();
    let (tree, limit, g_hat) = two_step_base(ds, stop)?;
    let build = |fold: &Dataset| two_step_base(fold, stop).map(|(t, l, _)| (t, l));
    let (tree, path, full_path_len, selection) =
        fit_path(ds, tree, limit, cfg, streams::TWO_STEP_FOLDS, build)?;
    Ok(PrunedFit {
        tree,
        path,
        full_path_len,
        selection,
        first_stage_generation: Some(g_hat),
        seconds: start.elapsed().as_secs_f64(),
    })
}
