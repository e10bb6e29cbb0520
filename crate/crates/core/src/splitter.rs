//! Exhaustive CART split search inside a node.
//!
//! For a node `A` split at feature `j`, threshold `c` into `A_L = {x_j < c}`
//! and `A_R = {x_j ≥ c}` the impurity gain is
//!
//! ```text
//! L_A(j, c) = R²(A) − (n_L/n_A) R²(A_L) − (n_R/n_A) R²(A_R)
//!           = (n_L n_R / n_A²) (Ȳ_L − Ȳ_R)²
//! ```
//!
//! The second form is used throughout: it is non-negative by construction and
//! needs only the two child means.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Sufficient statistics of a node: size, mean and centred sum of squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub count: usize,
    pub mean: f64,
    /// Σ (y_i − Ȳ_A)², computed in two passes.
    pub sse: f64,
}

impl NodeStats {
    pub fn from_values<I>(values: I) -> Self
    where
        I: IntoIterator<Item = f64>,
        I::IntoIter: Clone,
    {
        let it = values.into_iter();
        let (count, mean) = robust_mean(it.clone());
        let sse = it.map(|v| (v - mean) * (v - mean)).sum();
        Self { count, mean, sse }
    }

    pub fn from_indices(y: &[f64], indices: &[usize]) -> Self {
        Self::from_values(indices.iter().map(|&i| y[i]))
    }

    /// R²(A) = sse / n_A.
    #[inline]
    pub fn impurity(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sse / self.count as f64).max(0.0)
        }
    }

    pub fn sum_y(&self) -> f64 {
        self.mean * self.count as f64
    }
}

/// Mean with one correction pass, clamped to the observed range so that a
/// constant input returns its value exactly.
pub(crate) fn robust_mean<I: Iterator<Item = f64> + Clone>(values: I) -> (usize, f64) {
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.clone() {
        count += 1;
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if count == 0 {
        return (0, 0.0);
    }
    let n = count as f64;
    let m = sum / n;
    let corr: f64 = values.map(|v| v - m).sum::<f64>() / n;
    (count, (m + corr).clamp(lo, hi))
}

/// R²(A).
pub fn node_impurity(stats: &NodeStats) -> f64 {
    stats.impurity()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Exact L_A(j, c) recomputed from the node's members.
pub fn impurity_gain(
    ds: &Dataset,
    node_indices: &[usize],
    feature: usize,
    threshold: f64,
) -> Result<f64> {
    if feature >= ds.n_features() {
        return Err(Error::InvalidSplit(format!(
            "feature {feature} out of range"
        )));
    }
    let (gain, left, right) = direct_gain(ds, node_indices, feature, threshold);
    if left == 0 || right == 0 {
        return Err(Error::InvalidSplit(format!(
            "split (feature {feature}, threshold {threshold}) leaves an empty child"
        )));
    }
    Ok(gain)
}

fn direct_gain(
    ds: &Dataset,
    node_indices: &[usize],
    feature: usize,
    threshold: f64,
) -> (f64, usize, usize) {
    let x = ds.feature(feature);
    let y = ds.y();
    let left = node_indices
        .iter()
        .filter(|&&i| x[i] < threshold)
        .map(|&i| y[i]);
    let right = node_indices
        .iter()
        .filter(|&&i| x[i] >= threshold)
        .map(|&i| y[i]);
    let (nl, ml) = robust_mean(left);
    let (nr, mr) = robust_mean(right);
    if nl == 0 || nr == 0 {
        return (0.0, nl, nr);
    }
    let n = (nl + nr) as f64;
    let diff = ml - mr;
    ((nl as f64) * (nr as f64) / (n * n) * diff * diff, nl, nr)
}

/// Best split of the node holding `node_indices`, or `None` when no feature
/// takes two distinct values inside the node.
///
/// Ties within a relative 1e-12 of the maximal gain go to the lowest feature,
/// then the lowest threshold.
pub fn best_split(ds: &Dataset, node_indices: &[usize]) -> Option<SplitCandidate> {
    if node_indices.len() < 2 {
        return None;
    }
    let orders: Vec<Vec<usize>> = (0..ds.n_features())
        .map(|j| {
            let x = ds.feature(j);
            let mut idx = node_indices.to_vec();
            idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let slices: Vec<&[usize]> = orders.iter().map(Vec::as_slice).collect();
    let stats = NodeStats::from_indices(ds.y(), node_indices);
    best_split_presorted(ds, &slices, &stats)
}

/// Split search over per-feature orderings of the same node.
///
/// `orders[j]` lists the node's sample indices sorted by feature `j`.
pub fn best_split_presorted(
    ds: &Dataset,
    orders: &[&[usize]],
    stats: &NodeStats,
) -> Option<SplitCandidate> {
    let n = stats.count;
    if n < 2 {
        return None;
    }
    let tol = 1e-12 * stats.impurity() + f64::MIN_POSITIVE;

    let mut max_gain = f64::NEG_INFINITY;
    scan_candidates(ds, orders, stats, |_, _, gain, _, _| {
        if gain > max_gain {
            max_gain = gain;
        }
    });
    if max_gain == f64::NEG_INFINITY {
        return None;
    }

    let mut chosen: Option<(usize, f64)> = None;
    scan_candidates(ds, orders, stats, |j, _, gain, lo, hi| {
        if chosen.is_none() && gain >= max_gain - tol {
            chosen = Some((j, midpoint(lo, hi)));
        }
    });
    let (feature, threshold) = chosen?;
    let (gain, left_count, right_count) = direct_gain(ds, orders[0], feature, threshold);
    Some(SplitCandidate {
        feature,
        threshold,
        gain,
        left_count,
        right_count,
    })
}

/// Threshold between two consecutive distinct values `lo < hi` such that
/// `lo < c ≤ hi`.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if lo < mid && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Calls `visit(j, left_count, gain, lo, hi)` for every interstice between
/// consecutive distinct values of every feature, in (feature, threshold) order.
fn scan_candidates<F>(ds: &Dataset, orders: &[&[usize]], stats: &NodeStats, mut visit: F)
where
    F: FnMut(usize, usize, f64, f64, f64),
{
    let y = ds.y();
    let n = stats.count;
    let nf = n as f64;
    let m = stats.mean;
    // Neumaier-compensated total of the centred responses.
    let total = compensated_sum(orders[0].iter().map(|&i| y[i] - m));
    for (j, order) in orders.iter().enumerate() {
        debug_assert_eq!(order.len(), n);
        let x = ds.feature(j);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for p in 0..n - 1 {
            let v = y[order[p]] - m;
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
            let lo = x[order[p]];
            let hi = x[order[p + 1]];
            if lo < hi {
                let left = sum + comp;
                let nl = (p + 1) as f64;
                let nr = nf - nl;
                let diff = left / nl - (total - left) / nr;
                let gain = nl * nr / (nf * nf) * diff * diff;
                visit(j, p + 1, gain, lo, hi);
            }
        }
    }
}

fn compensated_sum<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::from_rows(
            &xs.iter().map(|&v| vec![v]).collect::<Vec<_>>(),
            ys.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn impurity_examples() {
        assert_eq!(node_impurity(&NodeStats::from_values([5.0])), 0.0);
        assert_eq!(
            node_impurity(&NodeStats::from_values([0.0, 0.0, 1.0, 1.0])),
            0.25
        );
        assert_eq!(node_impurity(&NodeStats::from_values([1.0, 1.0, 1.0])), 0.0);
        assert_eq!(node_impurity(&NodeStats::from_values([0.1, 0.1, 0.1])), 0.0);
    }

    #[test]
    fn four_point_example() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        let s = best_split(&ds, &[0, 1, 2, 3]).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.gain, 0.25);
        assert_eq!((s.left_count, s.right_count), (2, 2));
        assert_eq!(impurity_gain(&ds, &[0, 1, 2, 3], 0, 2.5).unwrap(), 0.25);
        assert!(impurity_gain(&ds, &[0, 1, 2, 3], 0, 1.5).unwrap() <= s.gain);
    }

    #[test]
    fn identical_rows_are_unsplittable() {
        let ds = Dataset::from_rows(
            &[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![0.0, 1.0, 5.0],
        )
        .unwrap();
        assert!(best_split(&ds, &[0, 1, 2]).is_none());
        assert!(best_split(&ds, &[0]).is_none());
    }

    #[test]
    fn constant_response_ties_to_lowest_split() {
        let ds = Dataset::from_rows(
            &[vec![3.0, 1.0], vec![1.0, 2.0], vec![2.0, 0.0]],
            vec![0.7, 0.7, 0.7],
        )
        .unwrap();
        let s = best_split(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(s.gain, 0.0);
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        assert_eq!(impurity_gain(&ds, &[0, 1, 2], 1, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn empty_child_is_an_error() {
        let ds = line(&[1.0, 2.0], &[0.0, 1.0]);
        assert!(impurity_gain(&ds, &[0, 1], 0, 0.5).is_err());
        assert!(impurity_gain(&ds, &[0, 1], 0, 5.0).is_err());
        assert!(impurity_gain(&ds, &[0, 1], 3, 1.5).is_err());
    }

    #[test]
    fn ties_inside_a_feature_are_not_thresholds() {
        let ds = line(&[1.0, 1.0, 2.0, 2.0], &[0.0, 1.0, 0.0, 1.0]);
        let s = best_split(&ds, &[0, 1, 2, 3]).unwrap();
        assert_eq!(s.threshold, 1.5);
        assert_eq!(s.gain, 0.0);
    }

    #[test]
    fn midpoint_of_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let c = midpoint(lo, hi);
        assert!(lo < c && c <= hi);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }

    proptest::proptest! {
        #[test]
        fn gain_is_the_impurity_drop(
            rows in proptest::collection::vec((0u8..6, -3.0f64..3.0), 2..40),
        ) {
            let ds = line(&rows.iter().map(|r| f64::from(r.0)).collect::<Vec<_>>(), &rows.iter().map(|r| r.1).collect::<Vec<_>>());
            let idx: Vec<usize> = (0..rows.len()).collect();
            let parent = NodeStats::from_indices(ds.y(), &idx);
            if let Some(s) = best_split(&ds, &idx) {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| ds.feature(0)[i] < s.threshold);
                proptest::prop_assert_eq!((l.len(), r.len()), (s.left_count, s.right_count));
                let n = idx.len() as f64;
                let drop = parent.impurity()
                    - (l.len() as f64 / n) * NodeStats::from_indices(ds.y(), &l).impurity()
                    - (r.len() as f64 / n) * NodeStats::from_indices(ds.y(), &r).impurity();
                proptest::prop_assert!(s.gain >= 0.0 && s.gain <= parent.impurity() + 1e-12);
                proptest::prop_assert!((s.gain - drop).abs() <= 1e-9 * (1.0 + parent.impurity()));
            }
        }
    }
}
