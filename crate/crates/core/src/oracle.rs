//! Diagnostics that need the true regression function and noise.
//!
//! Along a flow, the loss ‖F̂_t − f‖²_n splits into the approximation error
//! a(t)² = ‖(Id−Π_t)f‖²_n, the stochastic error s(t)² = ‖Π_t ε‖²_n and the
//! cross term c(t) = ⟨Π_t ε, (Id−Π_t)f⟩_n:  loss = a² + s² − 2c.
//! On a segment Π_t = (1−α)Π_k + αΠ_l between nested projections,
//!
//! ```text
//! a(t)² = a_l² + (1−α)²(a_k² − a_l²)
//! s(t)² = s_k² + α²(s_l² − s_k²)
//! c(t)  = α(1−α)⟨(Π_l − Π_k)ε, f⟩_n
//! ```

use serde::{Deserialize, Serialize};

use crate::dataset::{empirical_dist_sq, empirical_inner, empirical_norm_sq, Dataset};
use crate::error::{Error, Result};
use crate::growth::{blend, interpolated_stop, FlowPoint, FlowTrace};
use crate::pruning::PruningPath;
use crate::tree::{NodeId, Tree, TreeView};

/// Relative tolerance of the checked inequalities, scaled by ‖f‖²_n + ‖ε‖²_n.
pub const INEQUALITY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub f_values: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma_sq: f64,
}

impl SimTruth {
    pub fn new(f_values: Vec<f64>, eps: Vec<f64>, sigma_sq: f64) -> Result<Self> {
        if f_values.len() != eps.len() {
            return Err(Error::InvalidArgument(
                "f and noise vectors differ in length".into(),
            ));
        }
        Ok(Self {
            f_values,
            eps,
            sigma_sq,
        })
    }

    /// Y = f + ε.
    pub fn y(&self) -> Vec<f64> {
        self.f_values
            .iter()
            .zip(&self.eps)
            .map(|(f, e)| f + e)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub t: f64,
    pub a_sq: f64,
    pub s_sq: f64,
    pub cross: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedOracle {
    pub point: FlowPoint,
    pub t: f64,
    pub a: f64,
    pub s: f64,
    /// The flow ended before a(t) ≤ s(t).
    pub unreached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<(String, f64)>,
}

impl LedgerEntry {
    fn new(check: &str, lhs: f64, rhs: f64, scale: f64, terms: Vec<(String, f64)>) -> Self {
        Self {
            check: check.to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            pass: lhs <= rhs + INEQUALITY_RTOL * scale,
            terms,
        }
    }
}

/// Projections of f and ε at every generation point of a flow.
pub struct FlowOracle<'a> {
    tree: &'a Tree,
    trace: &'a FlowTrace,
    truth: &'a SimTruth,
    y: Vec<f64>,
    pf: Vec<Vec<f64>>,
    pe: Vec<Vec<f64>>,
    a_sq: Vec<f64>,
    s_sq: Vec<f64>,
    /// ⟨(Π_{s+1} − Π_s)ε, f⟩_n per segment.
    mixed: Vec<f64>,
}

impl<'a> FlowOracle<'a> {
    pub fn new(tree: &'a Tree, trace: &'a FlowTrace, truth: &'a SimTruth) -> Result<Self> {
        if truth.f_values.len() != tree.n_samples() {
            return Err(Error::InvalidArgument(
                "truth does not match the tree's sample count".into(),
            ));
        }
        let f = &truth.f_values;
        let e = &truth.eps;
        let mut pf = Vec::with_capacity(trace.steps.len());
        let mut pe = Vec::with_capacity(trace.steps.len());
        for s in 0..trace.steps.len() {
            let view = trace.view(tree, s);
            pf.push(view.apply_projection(f));
            pe.push(view.apply_projection(e));
        }
        let a_sq = pf.iter().map(|p| empirical_dist_sq(f, p)).collect();
        let s_sq = pe.iter().map(|p| empirical_norm_sq(p)).collect();
        let mixed = (0..trace.steps.len().saturating_sub(1))
            .map(|s| {
                let diff: Vec<f64> = pe[s + 1].iter().zip(&pe[s]).map(|(l, k)| l - k).collect();
                empirical_inner(&diff, f)
            })
            .collect();
        Ok(Self {
            tree,
            trace,
            truth,
            y: truth.y(),
            pf,
            pe,
            a_sq,
            s_sq,
            mixed,
        })
    }

    pub fn trace(&self) -> &FlowTrace {
        self.trace
    }

    fn scale(&self) -> f64 {
        empirical_norm_sq(&self.truth.f_values) + empirical_norm_sq(&self.truth.eps)
    }

    /// (Π_t f, Π_t ε) by blending the generation-point projections.
    pub fn projections(&self, p: FlowPoint) -> (Vec<f64>, Vec<f64>) {
        if p.alpha == 0.0 {
            return (self.pf[p.step].clone(), self.pe[p.step].clone());
        }
        (
            blend(&self.pf[p.step], &self.pf[p.step + 1], p.alpha),
            blend(&self.pe[p.step], &self.pe[p.step + 1], p.alpha),
        )
    }

    /// Closed forms for a², s², c; the loss is evaluated directly.
    pub fn decomposition(&self, t: f64) -> Result<Decomposition> {
        let p = self.trace.point_at(t)?;
        let (a_sq, s_sq, cross) = self.closed_forms(p);
        let fit = self.trace.apply(self.tree, p, &self.y);
        let loss = empirical_dist_sq(&fit, &self.truth.f_values);
        Ok(Decomposition {
            t,
            a_sq,
            s_sq,
            cross,
            loss,
        })
    }

    fn closed_forms(&self, p: FlowPoint) -> (f64, f64, f64) {
        let (s, al) = (p.step, p.alpha);
        if al == 0.0 {
            return (self.a_sq[s], self.s_sq[s], 0.0);
        }
        let w = 1.0 - al;
        let a_sq = self.a_sq[s + 1] + w * w * (self.a_sq[s] - self.a_sq[s + 1]);
        let s_sq = self.s_sq[s] + al * al * (self.s_sq[s + 1] - self.s_sq[s]);
        (a_sq, s_sq, al * w * self.mixed[s])
    }

    /// Every quantity evaluated from the blended operator.
    pub fn decomposition_direct(&self, t: f64) -> Result<Decomposition> {
        let p = self.trace.point_at(t)?;
        let f = &self.truth.f_values;
        let (pf, pe) = self.projections(p);
        let resid_f: Vec<f64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
        let fit = self.trace.apply(self.tree, p, &self.y);
        Ok(Decomposition {
            t,
            a_sq: empirical_norm_sq(&resid_f),
            s_sq: empirical_norm_sq(&pe),
            cross: empirical_inner(&pe, &resid_f),
            loss: empirical_dist_sq(&fit, f),
        })
    }

    /// a(t)² − s(t)² from the blended operator.
    fn balance_gap(&self, p: FlowPoint) -> f64 {
        let (pf, pe) = self.projections(p);
        empirical_dist_sq(&self.truth.f_values, &pf) - empirical_norm_sq(&pe)
    }

    /// τ_b = inf{t : a(t) ≤ s(t)}, by bisection on the segment where the
    /// generation-point errors cross.
    pub fn balanced_oracle(&self) -> BalancedOracle {
        let make = |p: FlowPoint, unreached: bool| {
            let (pf, pe) = self.projections(p);
            BalancedOracle {
                point: p,
                t: self.trace.t_of(p),
                a: empirical_dist_sq(&self.truth.f_values, &pf).sqrt(),
                s: empirical_norm_sq(&pe).sqrt(),
                unreached,
            }
        };
        let Some(s) = (0..self.a_sq.len()).find(|&s| self.a_sq[s] <= self.s_sq[s]) else {
            return make(FlowPoint::at_step(self.trace.last_step()), true);
        };
        if s == 0 {
            return make(FlowPoint::at_step(0), false);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.balance_gap(FlowPoint {
                step: s - 1,
                alpha: mid,
            }) <= 0.0
            {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // blending rounds to the later fit this close to α = 1
        if hi >= 1.0 - 1e-12 {
            make(FlowPoint::at_step(s), false)
        } else {
            make(
                FlowPoint {
                    step: s - 1,
                    alpha: hi,
                },
                false,
            )
        }
    }

    /// ‖F̂_τ − F̂_τb‖² against early stopping, interpolation and cross terms.
    pub fn check_distance_inequality(&self, kappa: f64) -> Result<LedgerEntry> {
        let tau = interpolated_stop(self.trace, kappa)?;
        let tb = self.balanced_oracle();
        let f = &self.truth.f_values;
        let e = &self.truth.eps;
        let fit_tau = self.trace.apply(self.tree, tau, &self.y);
        let fit_tb = self.trace.apply(self.tree, tb.point, &self.y);
        let lhs = empirical_dist_sq(&fit_tau, &fit_tb);

        let stopping = (kappa - empirical_norm_sq(e)).abs();
        let interpolation = if tb.point.alpha == 0.0 {
            0.0
        } else {
            let (s, al) = (tb.point.step, tb.point.alpha);
            let diff: Vec<f64> = self.pe[s + 1]
                .iter()
                .zip(&self.pe[s])
                .map(|(l, k)| l - k)
                .collect();
            2.0 * al * (1.0 - al) * empirical_inner(&diff, e)
        };
        let once: Vec<f64> = {
            let (pf, _) = self.projections(tb.point);
            f.iter().zip(&pf).map(|(a, b)| a - b).collect()
        };
        let proj_once = self.trace.apply(self.tree, tb.point, &once);
        let twice: Vec<f64> = once.iter().zip(&proj_once).map(|(a, b)| a - b).collect();
        let cross = 2.0 * empirical_inner(&twice, e).abs();
        let rhs = stopping + interpolation + cross;
        Ok(LedgerEntry::new(
            "distance",
            lhs,
            rhs,
            self.scale(),
            vec![
                ("early_stopping".into(), stopping),
                ("interpolation".into(), interpolation),
                ("cross".into(), cross),
                ("tau".into(), self.trace.t_of(tau)),
                ("tau_b".into(), tb.t),
            ],
        ))
    }

    /// min of a(t)² + s(t)² over generation points and α = j/16 on every segment.
    pub fn grid_min_risk(&self) -> f64 {
        let mut best = f64::INFINITY;
        for s in 0..self.a_sq.len() {
            best = best.min(self.a_sq[s] + self.s_sq[s]);
            if s + 1 < self.a_sq.len() {
                for j in 1..16 {
                    let (a, st, _) = self.closed_forms(FlowPoint {
                        step: s,
                        alpha: j as f64 / 16.0,
                    });
                    best = best.min(a + st);
                }
            }
        }
        best
    }

    /// ‖F̂_τb − f‖² ≤ 4 · min_t (a(t)² + s(t)²).
    pub fn check_oracle_factor4(&self) -> LedgerEntry {
        let tb = self.balanced_oracle();
        let fit = self.trace.apply(self.tree, tb.point, &self.y);
        let lhs = empirical_dist_sq(&fit, &self.truth.f_values);
        let min_risk = self.grid_min_risk();
        LedgerEntry::new(
            "factor4",
            lhs,
            4.0 * min_risk,
            self.scale(),
            vec![("min_risk".into(), min_risk), ("tau_b".into(), tb.t)],
        )
    }
}

/// Route of every row of `data` to a terminal node of `view`, as the list of
/// visited node ids.
fn routes(view: &TreeView<'_>, data: &Dataset) -> Vec<Vec<NodeId>> {
    let tree = view.tree();
    (0..data.n_samples())
        .map(|i| {
            let mut route = Vec::new();
            if view.is_empty() {
                return route;
            }
            let mut id = 0;
            route.push(id);
            while view.is_internal(id) {
                let node = tree.node(id);
                let rule = node.split.unwrap();
                let (l, r) = node.children().unwrap();
                id = if data.value(i, rule.feature) < rule.threshold {
                    l
                } else {
                    r
                };
                route.push(id);
            }
            route
        })
        .collect()
}

/// Mean squared test errors of a flow at every generation point, with the
/// inner products of consecutive error vectors for the segments in between.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFlowErrors {
    pub k: Vec<usize>,
    /// ‖e_s‖²_{n'} with e_s = F̂_s − f on the test set.
    pub sq: Vec<f64>,
    /// ⟨e_s, e_{s+1}⟩_{n'}.
    pub cross_next: Vec<f64>,
}

pub fn flow_test_errors(
    tree: &Tree,
    trace: &FlowTrace,
    test: &Dataset,
    f_test: &[f64],
) -> TestFlowErrors {
    let m = test.n_samples();
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); tree.n_nodes()];
    let mut pred = vec![0.0; m];
    let err = |pred: &[f64]| -> Vec<f64> { pred.iter().zip(f_test).map(|(p, f)| p - f).collect() };
    let mut prev = err(&pred);
    let mut sq = vec![empirical_norm_sq(&prev)];
    let mut cross_next = Vec::new();
    for (s, step) in trace.steps.iter().enumerate().skip(1) {
        if s == 1 {
            lists[0] = (0..m).collect();
            pred.fill(tree.node(0).stats.mean);
        }
        for ev in &step.events {
            let node = tree.node(ev.node);
            let rule = node.split.expect("split node has a rule");
            let members = std::mem::take(&mut lists[ev.node]);
            let (lm, rm) = (
                tree.node(ev.left).stats.mean,
                tree.node(ev.right).stats.mean,
            );
            for i in members {
                if test.value(i, rule.feature) < rule.threshold {
                    pred[i] = lm;
                    lists[ev.left].push(i);
                } else {
                    pred[i] = rm;
                    lists[ev.right].push(i);
                }
            }
        }
        let cur = err(&pred);
        cross_next.push(empirical_inner(&prev, &cur));
        sq.push(empirical_norm_sq(&cur));
        prev = cur;
    }
    TestFlowErrors {
        k: trace.steps.iter().map(|s| s.k).collect(),
        sq,
        cross_next,
    }
}

impl TestFlowErrors {
    /// ‖(1−α)e_k + αe_l‖² at a flow point.
    pub fn at(&self, p: FlowPoint) -> f64 {
        if p.alpha == 0.0 {
            return self.sq[p.step];
        }
        let (a, b, c) = (
            self.sq[p.step],
            self.sq[p.step + 1],
            self.cross_next[p.step],
        );
        let w = 1.0 - p.alpha;
        (w * w * a + 2.0 * p.alpha * w * c + p.alpha * p.alpha * b).max(0.0)
    }

    /// Best generation point (step, mse).
    pub fn discrete_min(&self) -> (usize, f64) {
        let mut best = (0, self.sq[0]);
        for (s, &v) in self.sq.iter().enumerate() {
            if v < best.1 {
                best = (s, v);
            }
        }
        best
    }

    /// Best point of the interpolated flow: on each segment the error is a
    /// quadratic in α minimised at α* = (A − C)/(A − 2C + B), clamped.
    pub fn continuous_min(&self) -> (FlowPoint, f64) {
        let (s0, v0) = self.discrete_min();
        let mut best = (FlowPoint::at_step(s0), v0);
        for s in 0..self.cross_next.len() {
            let (a, b, c) = (self.sq[s], self.sq[s + 1], self.cross_next[s]);
            let denom = a - 2.0 * c + b;
            if denom <= 0.0 {
                continue;
            }
            let alpha = ((a - c) / denom).clamp(0.0, 1.0);
            if alpha > 0.0 && alpha < 1.0 {
                let p = FlowPoint { step: s, alpha };
                let v = self.at(p);
                if v < best.1 {
                    best = (p, v);
                }
            }
        }
        best
    }

    /// Leaf count attached to a flow point: round(t).
    pub fn leaves_at(&self, p: FlowPoint) -> usize {
        if p.alpha == 0.0 {
            return self.k[p.step];
        }
        let t = self.k[p.step] as f64 + p.alpha * (self.k[p.step + 1] - self.k[p.step]) as f64;
        t.round() as usize
    }
}

/// Mean squared test error of every subtree of a pruning path.
pub fn path_test_errors(
    tree: &Tree,
    path: &PruningPath,
    test: &Dataset,
    f_test: &[f64],
) -> Vec<f64> {
    let full = tree.view_at(path.limit);
    let routes = routes(&full, test);
    let m = test.n_samples() as f64;
    path.entries
        .iter()
        .map(|e| {
            routes
                .iter()
                .zip(f_test)
                .map(|(route, &f)| {
                    let leaf = route
                        .iter()
                        .copied()
                        .find(|&v| path.collapse_at[v] <= e.step || !full.is_internal(v))
                        .expect("route ends at a leaf");
                    let d = tree.node(leaf).stats.mean - f;
                    d * d
                })
                .sum::<f64>()
                / m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub method: String,
    pub oracle_rmse: f64,
    pub rmse: f64,
    pub efficiency: f64,
    pub oracle_leaves: usize,
    pub leaves: usize,
}

impl EfficiencyRecord {
    pub fn new(
        method: &str,
        oracle_mse: f64,
        mse: f64,
        oracle_leaves: usize,
        leaves: usize,
    ) -> Self {
        let (oracle_rmse, rmse) = (oracle_mse.sqrt(), mse.sqrt());
        let efficiency = if rmse == 0.0 { 1.0 } else { oracle_rmse / rmse };
        Self {
            method: method.to_string(),
            oracle_rmse,
            rmse,
            efficiency,
            oracle_leaves,
            leaves,
        }
    }
}

/// Oracle test RMSE of the interpolated global flow, of the semi-global flow
/// at generation points, and of a pruning path; returns
/// (ρ_glob,semi, ρ_prun,semi).
pub fn oracle_ratios(
    global: &TestFlowErrors,
    semi: &TestFlowErrors,
    pruning: &[f64],
) -> (f64, f64) {
    let glob = global.continuous_min().1.sqrt();
    let semi = semi.discrete_min().1.sqrt();
    let prun = pruning.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
    let ratio = |a: f64, b: f64| {
        if b == 0.0 {
            if a == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            a / b
        }
    };
    (ratio(glob, semi), ratio(prun, semi))
}
