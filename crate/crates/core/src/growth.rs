//! Global and semi-global tree growth stopped by the residual rule.
//!
//! Both engines record a [`FlowTrace`]: step 0 is the zero projection with
//! residual ‖Y‖²_n, step 1 the root-only tree, and every later step one
//! generation (global) or one split (semi-global). Between steps the flow is
//! the linear interpolation Π_t = (1−α)Π_k + αΠ_l.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{empirical_norm_sq, Dataset};
use crate::error::{Error, Result};
use crate::splitter::SplitCandidate;
use crate::tree::{NodeEvent, Tree, TreeView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthMode {
    Global,
    GlobalInterpolated,
    SemiGlobal,
    SemiGlobalInterpolated,
}

impl GrowthMode {
    pub fn is_semi_global(self) -> bool {
        matches!(self, Self::SemiGlobal | Self::SemiGlobalInterpolated)
    }

    pub fn is_interpolated(self) -> bool {
        matches!(
            self,
            Self::GlobalInterpolated | Self::SemiGlobalInterpolated
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub kappa: f64,
    pub mode: GrowthMode,
    pub max_generations: Option<usize>,
    pub max_leaves: Option<usize>,
    /// Take splits whose best gain is zero.
    pub allow_zero_gain: bool,
    /// Rank semi-global candidates by (n_A/n)·gain instead of the raw gain.
    pub weighted_priority: bool,
    /// Keep growing after the stop until no node is splittable, so that the
    /// whole flow is available for diagnostics.
    pub run_to_completion: bool,
    /// Generations grown past the stop (global mode).
    pub extra_generations: usize,
}

impl StoppingConfig {
    pub fn new(kappa: f64, mode: GrowthMode) -> Self {
        Self {
            kappa,
            mode,
            max_generations: None,
            max_leaves: None,
            allow_zero_gain: false,
            weighted_priority: false,
            run_to_completion: false,
            extra_generations: 0,
        }
    }

    pub fn run_to_completion(mut self) -> Self {
        self.run_to_completion = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kappa must be finite and non-negative, got {}",
                self.kappa
            )));
        }
        if self.max_generations == Some(0) || self.max_leaves == Some(0) {
            return Err(Error::InvalidArgument(
                "growth caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowStep {
    pub generation: usize,
    /// Number of terminal nodes k_g (0 for the zero projection).
    pub k: usize,
    /// R²_{k_g}.
    pub residual: f64,
    /// Arena prefix holding this step's tree.
    pub node_count: usize,
    pub events: Vec<NodeEvent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTrace {
    pub mode: GrowthMode,
    pub steps: Vec<FlowStep>,
    /// No splittable node was left when growth ended.
    pub exhausted: bool,
}

/// A point of the interpolated flow: step `step` blended with weight `alpha`
/// towards step `step + 1`. `alpha` is 0 at generation points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub step: usize,
    pub alpha: f64,
}

impl FlowPoint {
    pub fn at_step(step: usize) -> Self {
        Self { step, alpha: 0.0 }
    }
}

impl FlowTrace {
    fn new(mode: GrowthMode, ds: &Dataset) -> Self {
        Self {
            mode,
            steps: vec![FlowStep {
                generation: 0,
                k: 0,
                residual: empirical_norm_sq(ds.y()),
                node_count: 0,
                events: Vec::new(),
            }],
            exhausted: false,
        }
    }

    fn push(&mut self, tree: &Tree, events: Vec<NodeEvent>) {
        self.steps.push(FlowStep {
            generation: self.steps.len(),
            k: tree.n_leaves(),
            residual: tree.residual_norm_sq(),
            node_count: tree.n_nodes(),
            events,
        });
    }

    pub fn last_step(&self) -> usize {
        self.steps.len() - 1
    }

    /// Largest recorded t.
    pub fn t_max(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.k as f64)
    }

    /// Trace parameter t = k + α(l − k) of a flow point.
    pub fn t_of(&self, p: FlowPoint) -> f64 {
        let k = self.steps[p.step].k as f64;
        if p.alpha == 0.0 {
            return k;
        }
        let l = self.steps[p.step + 1].k as f64;
        k + p.alpha * (l - k)
    }

    /// Flow point of a trace parameter t ∈ [0, t_max].
    pub fn point_at(&self, t: f64) -> Result<FlowPoint> {
        let max = self.t_max();
        if !(0.0..=max).contains(&t) {
            return Err(Error::OutOfRange { t, max });
        }
        let s = self.steps.partition_point(|st| (st.k as f64) <= t) - 1;
        let k = self.steps[s].k as f64;
        if t == k || s == self.last_step() {
            return Ok(FlowPoint::at_step(s));
        }
        let l = self.steps[s + 1].k as f64;
        Ok(FlowPoint {
            step: s,
            alpha: (t - k) / (l - k),
        })
    }

    /// R²_t from the closed form on the segment.
    pub fn residual_at(&self, p: FlowPoint) -> f64 {
        let rk = self.steps[p.step].residual;
        if p.alpha == 0.0 {
            return rk;
        }
        segment_residual(rk, self.steps[p.step + 1].residual, p.alpha)
    }

    /// View of the tree at a step.
    pub fn view<'a>(&self, tree: &'a Tree, step: usize) -> TreeView<'a> {
        tree.view_at(self.steps[step].node_count)
    }

    /// Π_t v along the interpolated flow.
    pub fn apply(&self, tree: &Tree, p: FlowPoint, v: &[f64]) -> Vec<f64> {
        let lower = self.view(tree, p.step).apply_projection(v);
        if p.alpha == 0.0 {
            return lower;
        }
        let upper = self.view(tree, p.step + 1).apply_projection(v);
        blend(&lower, &upper, p.alpha)
    }
}

/// (1−α)·a + α·b.
pub fn blend(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (1.0 - alpha) * x + alpha * y)
        .collect()
}

/// R²_t = R²_l + (1−α)²(R²_k − R²_l) on the segment between nested
/// projections Π_k ⊂ Π_l.
pub fn segment_residual(rk: f64, rl: f64, alpha: f64) -> f64 {
    let w = 1.0 - alpha;
    rl + w * w * (rk - rl)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StopReport {
    pub mode: GrowthMode,
    pub kappa: f64,
    pub point: FlowPoint,
    /// Stopped generation ĝ (the step index; `point.step + 1` when interpolating).
    pub generation: usize,
    pub t: f64,
    /// k at the stop. For an interpolated stop this is the later generation's
    /// leaf count.
    pub k: usize,
    pub residual: f64,
    /// κ ≥ ‖Y‖²_n: the rule stops before the root, at the zero projection.
    pub pre_root: bool,
    pub exhausted: bool,
    pub fit: Vec<f64>,
    pub seconds: f64,
}

impl StopReport {
    /// Step whose tree carries the leaves of the stopped fit.
    pub fn upper_step(&self) -> usize {
        if self.point.alpha > 0.0 {
            self.point.step + 1
        } else {
            self.point.step
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrowthResult {
    pub tree: Tree,
    pub trace: FlowTrace,
    pub report: StopReport,
}

impl GrowthResult {
    pub fn stopped_view(&self) -> TreeView<'_> {
        self.trace.view(&self.tree, self.report.upper_step())
    }
}

/// First step with R² ≤ κ, if any.
pub fn non_interpolated_stop(trace: &FlowTrace, kappa: f64) -> Option<usize> {
    trace.steps.iter().position(|s| s.residual <= kappa)
}

/// The flow point τ = inf{t : R²_t ≤ κ}.
///
/// With bracketing steps R²_k > κ ≥ R²_l the residual on the segment is
/// quadratic in α and τ has α = 1 − √((κ − R²_l)/(R²_k − R²_l)). α = 1 is
/// reported as the later step. If no recorded step reaches κ the last step is
/// returned.
pub fn interpolated_stop(trace: &FlowTrace, kappa: f64) -> Result<FlowPoint> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "kappa must be finite and non-negative, got {kappa}"
        )));
    }
    let Some(s) = non_interpolated_stop(trace, kappa) else {
        return Ok(FlowPoint::at_step(trace.last_step()));
    };
    if s == 0 {
        return Ok(FlowPoint::at_step(0));
    }
    let rk = trace.steps[s - 1].residual;
    let rl = trace.steps[s].residual;
    let alpha = 1.0 - ((kappa - rl) / (rk - rl)).clamp(0.0, 1.0).sqrt();
    if alpha >= 1.0 {
        Ok(FlowPoint::at_step(s))
    } else {
        Ok(FlowPoint { step: s - 1, alpha })
    }
}

fn stop_point(trace: &FlowTrace, mode: GrowthMode, kappa: f64) -> Result<FlowPoint> {
    if mode.is_interpolated() {
        interpolated_stop(trace, kappa)
    } else {
        Ok(FlowPoint::at_step(
            non_interpolated_stop(trace, kappa).unwrap_or(trace.last_step()),
        ))
    }
}

fn make_report(
    ds: &Dataset,
    tree: &Tree,
    trace: &FlowTrace,
    cfg: &StoppingConfig,
    point: FlowPoint,
    start: Instant,
) -> StopReport {
    let reached = non_interpolated_stop(trace, cfg.kappa).is_some();
    let upper = if point.alpha > 0.0 {
        point.step + 1
    } else {
        point.step
    };
    StopReport {
        mode: cfg.mode,
        kappa: cfg.kappa,
        point,
        generation: upper,
        t: trace.t_of(point),
        k: trace.steps[upper].k,
        residual: trace.residual_at(point),
        pre_root: point.step == 0 && point.alpha == 0.0,
        exhausted: !reached,
        fit: trace.apply(tree, point, ds.y()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Total order on gains for the heap; ties go to the lower node id.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    priority: f64,
    node: usize,
    split: SplitCandidate,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn candidate(
    tree: &mut Tree,
    ds: &Dataset,
    node: usize,
    cfg: &StoppingConfig,
) -> Option<Candidate> {
    let split = tree.splittable(ds, node, cfg.allow_zero_gain)?;
    let priority = if cfg.weighted_priority {
        split.gain * tree.node(node).stats.count as f64 / tree.n_samples() as f64
    } else {
        split.gain
    };
    Some(Candidate {
        priority,
        node,
        split,
    })
}

/// Best-first growth: one split of the highest-priority terminal node per step.
pub fn grow_semi_global(ds: &Dataset, cfg: &StoppingConfig) -> Result<GrowthResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut tree = Tree::new(ds);
    let mut trace = FlowTrace::new(cfg.mode, ds);
    trace.push(&tree, Vec::new());
    let mut heap = BinaryHeap::new();
    heap.extend(candidate(&mut tree, ds, 0, cfg));
    let mut stop = None;
    loop {
        let step = trace.last_step();
        if stop.is_none() && trace.steps[step].residual <= cfg.kappa {
            stop = Some(step);
            if !cfg.run_to_completion {
                break;
            }
        }
        if cfg.max_leaves.is_some_and(|m| tree.n_leaves() >= m)
            || cfg.max_generations.is_some_and(|m| step >= m)
        {
            break;
        }
        let Some(best) = heap.pop() else {
            trace.exhausted = true;
            break;
        };
        let ev = tree.split_node(ds, best.node, &best.split)?;
        heap.extend(candidate(&mut tree, ds, ev.left, cfg));
        heap.extend(candidate(&mut tree, ds, ev.right, cfg));
        trace.push(&tree, vec![ev]);
    }
    let point = stop_point(&trace, cfg.mode, cfg.kappa)?;
    let report = make_report(ds, &tree, &trace, cfg, point, start);
    Ok(GrowthResult {
        tree,
        trace,
        report,
    })
}

/// Breadth-first growth: every splittable terminal node is split once per
/// generation.
pub fn grow_global(ds: &Dataset, cfg: &StoppingConfig) -> Result<GrowthResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut tree = Tree::new(ds);
    let mut trace = FlowTrace::new(cfg.mode, ds);
    trace.push(&tree, Vec::new());
    let mut stop = None;
    loop {
        let step = trace.last_step();
        if stop.is_none() && trace.steps[step].residual <= cfg.kappa {
            stop = Some(step);
        }
        if stop.is_some_and(|g| !cfg.run_to_completion && step >= g + cfg.extra_generations) {
            break;
        }
        if cfg.max_generations.is_some_and(|m| step >= m)
            || cfg.max_leaves.is_some_and(|m| tree.n_leaves() >= m)
        {
            break;
        }
        let mut leaves = tree.leaves().to_vec();
        leaves.sort_unstable();
        let mut events = Vec::new();
        for leaf in leaves {
            if let Some(split) = tree.splittable(ds, leaf, cfg.allow_zero_gain) {
                events.push(tree.split_node(ds, leaf, &split)?);
            }
        }
        if events.is_empty() {
            trace.exhausted = true;
            break;
        }
        trace.push(&tree, events);
    }
    let point = stop_point(&trace, cfg.mode, cfg.kappa)?;
    let report = make_report(ds, &tree, &trace, cfg, point, start);
    Ok(GrowthResult {
        tree,
        trace,
        report,
    })
}

pub fn grow(ds: &Dataset, cfg: &StoppingConfig) -> Result<GrowthResult> {
    if cfg.mode.is_semi_global() {
        grow_semi_global(ds, cfg)
    } else {
        grow_global(ds, cfg)
    }
}

/// Grows until no node can be split. Zero-gain splits are taken, so with
/// distinct covariates every leaf ends as a singleton or a pure node.
pub fn grow_deep(ds: &Dataset) -> Tree {
    grow_min_impurity_baseline(ds, 0.0)
}

/// Best-first growth that refuses any split whose gain is below `threshold`.
pub fn grow_min_impurity_baseline(ds: &Dataset, threshold: f64) -> Tree {
    let mut tree = Tree::new(ds);
    let mut stack = vec![0];
    while let Some(node) = stack.pop() {
        let Some(split) = tree.splittable(ds, node, true) else {
            continue;
        };
        if split.gain < threshold {
            continue;
        }
        let ev = tree
            .split_node(ds, node, &split)
            .expect("splittable node accepts its best split");
        stack.push(ev.right);
        stack.push(ev.left);
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::empirical_dist_sq;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};

    fn four_points() -> Dataset {
        Dataset::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0.0, 0.0, 1.0, 1.0],
        )
        .unwrap()
    }

    fn random_ds(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y = rows
            .iter()
            .map(|r| (6.0 * r[0]).sin() + rng.random::<f64>() - 0.5)
            .collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn segment_residual_examples() {
        assert_eq!(segment_residual(0.4, 0.1, 0.0), 0.4);
        assert_eq!(segment_residual(0.4, 0.1, 1.0), 0.1);
        assert!((segment_residual(0.4, 0.1, 0.5) - 0.175).abs() < 1e-15);
    }

    fn synthetic_trace(rk: f64, rl: f64) -> FlowTrace {
        let step = |k, residual| FlowStep {
            generation: 0,
            k,
            residual,
            node_count: 0,
            events: Vec::new(),
        };
        FlowTrace {
            mode: GrowthMode::GlobalInterpolated,
            steps: vec![step(0, 1.0), step(1, rk), step(2, rl)],
            exhausted: false,
        }
    }

    #[test]
    fn interpolated_alpha_examples() {
        let trace = synthetic_trace(0.4, 0.1);
        let p = interpolated_stop(&trace, 0.2).unwrap();
        assert_eq!(p.step, 1);
        assert!((p.alpha - (1.0 - 1.0 / 3f64.sqrt())).abs() < 1e-15);
        assert!((p.alpha - 0.42265).abs() < 1e-5);
        assert!((trace.residual_at(p) - 0.2).abs() < 1e-15);
        assert_eq!(
            interpolated_stop(&trace, 0.1).unwrap(),
            FlowPoint::at_step(2)
        );
        // κ = R²_k: α = 0 at the earlier generation
        assert_eq!(
            interpolated_stop(&trace, 0.4).unwrap(),
            FlowPoint::at_step(1)
        );
        assert!(interpolated_stop(&trace, -1.0).is_err());
    }

    /// Closed-form segment residual against ‖Y − ((1−α)F̂_k + αF̂_l)‖²_n.
    #[test]
    fn segment_residual_matches_direct_evaluation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for inst in 0..120u64 {
            let ds = random_ds(inst, 10 + (inst as usize % 50), 1 + inst as usize % 4);
            let res = grow_global(&ds, &StoppingConfig::new(0.0, GrowthMode::Global)).unwrap();
            let trace = &res.trace;
            for s in 0..trace.last_step() {
                let alpha: f64 = rng.random();
                let fk = trace.view(&res.tree, s).fit_values(&ds);
                let fl = trace.view(&res.tree, s + 1).fit_values(&ds);
                let direct = empirical_dist_sq(ds.y(), &blend(&fk, &fl, alpha));
                let closed =
                    segment_residual(trace.steps[s].residual, trace.steps[s + 1].residual, alpha);
                assert!(
                    (direct - closed).abs() <= 1e-9 * direct.max(1e-300),
                    "{direct} vs {closed}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 100);
    }

    #[test]
    fn four_point_global_stop() {
        let ds = four_points();
        let res = grow_global(&ds, &StoppingConfig::new(0.1, GrowthMode::Global)).unwrap();
        assert_eq!(res.report.k, 2);
        assert_eq!(res.report.generation, 2);
        assert_eq!(res.report.residual, 0.0);
        assert_eq!(res.report.fit, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_response_stops_at_root() {
        let ds = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![2.0; 3]).unwrap();
        for mode in [GrowthMode::Global, GrowthMode::SemiGlobal] {
            let res = grow(&ds, &StoppingConfig::new(0.0, mode)).unwrap();
            assert_eq!(res.report.k, 1);
            assert_eq!(res.report.fit, vec![2.0; 3]);
            assert!(!res.report.pre_root);
        }
    }

    #[test]
    fn kappa_above_norm_stops_before_root() {
        let ds = four_points();
        let res = grow_semi_global(&ds, &StoppingConfig::new(0.5, GrowthMode::SemiGlobal)).unwrap();
        assert!(res.report.pre_root);
        assert_eq!(res.report.k, 0);
        assert_eq!(res.report.fit, vec![0.0; 4]);
        // between the root residual and ‖Y‖²: root-only fit
        let res = grow_semi_global(&ds, &StoppingConfig::new(0.3, GrowthMode::SemiGlobal)).unwrap();
        assert_eq!(res.report.k, 1);
        assert_eq!(res.report.fit, vec![0.5; 4]);
    }

    #[test]
    fn zero_kappa_interpolates() {
        let ds = random_ds(3, 60, 3);
        let res = grow_semi_global(&ds, &StoppingConfig::new(0.0, GrowthMode::SemiGlobal)).unwrap();
        assert_eq!(res.report.k, 60);
        assert_eq!(res.report.residual, 0.0);
        assert_eq!(res.report.fit, ds.y());
    }

    #[test]
    fn exhausted_growth_is_flagged() {
        let ds =
            Dataset::from_rows(&[vec![1.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 5.0]).unwrap();
        let res = grow_global(&ds, &StoppingConfig::new(0.0, GrowthMode::Global)).unwrap();
        assert!(res.report.exhausted);
        assert!(res.trace.exhausted);
        assert_eq!(res.report.k, 2);
    }

    #[test]
    fn deep_tree_leaf_counts() {
        let ds = random_ds(5, 50, 2);
        assert_eq!(grow_deep(&ds).n_leaves(), 50);
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64]).collect();
        let y = (0..20).map(|i| i as f64).collect();
        let dup = Dataset::from_rows(&rows, y).unwrap();
        let tree = grow_deep(&dup);
        assert_eq!(tree.n_leaves(), 5);
        assert!(tree.view().residual_norm_sq(&dup) > 0.0);
    }

    #[test]
    fn min_impurity_baseline_limits() {
        let ds = random_ds(9, 80, 3);
        let deep = grow_deep(&ds);
        let base = grow_min_impurity_baseline(&ds, 0.0);
        assert_eq!(deep.view().to_document(None), base.view().to_document(None));
        let root_var = ds.y().iter().map(|v| v * v).sum::<f64>() / 80.0;
        assert_eq!(
            grow_min_impurity_baseline(&ds, root_var + 1.0).n_leaves(),
            1
        );
    }

    #[test]
    fn point_lookup_round_trips() {
        let ds = random_ds(1, 40, 2);
        let res = grow_global(&ds, &StoppingConfig::new(0.0, GrowthMode::Global)).unwrap();
        let tr = &res.trace;
        for t in [0.0, 0.5, 1.0, 2.7, 9.0, tr.t_max()] {
            let p = tr.point_at(t).unwrap();
            assert!((tr.t_of(p) - t).abs() < 1e-12);
        }
        assert!(tr.point_at(tr.t_max() + 1.0).is_err());
        assert!(tr.point_at(-0.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn flow_laws(seed in 0u64..10_000, n in 5usize..60, d in 1usize..4, semi in any::<bool>(), kappa in 0.0f64..0.5) {
            let ds = random_ds(seed, n, d);
            let mode = if semi { GrowthMode::SemiGlobalInterpolated } else { GrowthMode::GlobalInterpolated };
            let res = grow(&ds, &StoppingConfig::new(kappa, mode).run_to_completion()).unwrap();
            let tr = &res.trace;
            let fits: Vec<Vec<f64>> = (0..tr.steps.len()).map(|s| tr.view(&res.tree, s).fit_values(&ds)).collect();
            for s in 1..tr.steps.len() {
                let (a, b) = (&tr.steps[s - 1], &tr.steps[s]);
                prop_assert!(b.residual <= a.residual);
                prop_assert!(b.k > a.k);
                if semi {
                    prop_assert_eq!(b.k, a.k + 1);
                } else if s >= 2 {
                    prop_assert!(b.k <= 2 * a.k);
                }
                prop_assert_eq!(tr.view(&res.tree, s).n_leaves(), b.k);
                // exact telescoping between generation points
                let dist = empirical_dist_sq(&fits[s], &fits[s - 1]);
                prop_assert!((dist - (a.residual - b.residual)).abs() <= 1e-9 * tr.steps[0].residual.max(1e-12));
            }
            // contraction on interpolated points
            let t1 = tr.t_max() * 0.3;
            let t2 = tr.t_max() * 0.8;
            let (p1, p2) = (tr.point_at(t1).unwrap(), tr.point_at(t2).unwrap());
            let f1 = tr.apply(&res.tree, p1, ds.y());
            let f2 = tr.apply(&res.tree, p2, ds.y());
            let r1 = empirical_dist_sq(ds.y(), &f1);
            let r2 = empirical_dist_sq(ds.y(), &f2);
            prop_assert!(r2 <= r1 + 1e-12);
            prop_assert!(empirical_dist_sq(&f1, &f2) <= r1 - r2 + 1e-9 * r1.max(1e-12));
            // stopping rule
            let norm = tr.steps[0].residual;
            if kappa < norm && !res.report.exhausted {
                prop_assert!((res.report.residual - kappa).abs() <= 1e-9 * kappa.max(1e-12) || res.report.residual <= kappa);
                let direct = empirical_dist_sq(ds.y(), &res.report.fit);
                prop_assert!((direct - kappa).abs() <= 1e-9 * norm);
            }
            let g = non_interpolated_stop(tr, kappa);
            if let Some(g) = g {
                prop_assert!(tr.steps[g].residual <= kappa);
                prop_assert!(g == 0 || tr.steps[g - 1].residual > kappa);
            }
        }
    }
}
