use serde::{Deserialize, Serialize};

use super::{generate, lower_median, DgpSpec};
use crate::dataset::empirical_dist_sq;
use crate::error::Result;
use crate::growth::{grow, grow_min_impurity_baseline, GrowthMode, StoppingConfig};
use crate::rng::child_seed;

/// Semi-global early stopping against the min-impurity pre-pruned tree on
/// one XOR sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XorReport {
    pub seed: u64,
    pub semi_leaves: usize,
    pub baseline_leaves: usize,
    pub semi_rmse: f64,
    pub baseline_rmse: f64,
}

pub fn xor_demo(
    n: usize,
    sigma_sq: f64,
    kappa: f64,
    threshold: f64,
    seed: u64,
) -> Result<XorReport> {
    let g = generate(&DgpSpec::xor(n, sigma_sq), seed)?;
    let f_test = &g.truth_test.f_values;
    let semi = grow(
        &g.train,
        &StoppingConfig::new(kappa, GrowthMode::SemiGlobal),
    )?;
    let base = grow_min_impurity_baseline(&g.train, threshold);
    let semi_view = semi.stopped_view();
    // a pre-root stop falls back to the root-only tree
    let semi_view = if semi_view.is_empty() {
        semi.tree.view_at(1)
    } else {
        semi_view
    };
    Ok(XorReport {
        seed,
        semi_leaves: semi_view.n_leaves(),
        baseline_leaves: base.n_leaves(),
        semi_rmse: empirical_dist_sq(&semi_view.predict(&g.test), f_test).sqrt(),
        baseline_rmse: empirical_dist_sq(&base.view().predict(&g.test), f_test).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XorSummary {
    pub n: usize,
    pub sigma_sq: f64,
    pub kappa: f64,
    pub threshold: f64,
    pub median_semi_leaves: f64,
    pub median_baseline_leaves: f64,
    pub median_semi_rmse: f64,
    pub median_baseline_rmse: f64,
    /// Share of seeds where semi-global beats the baseline on test RMSE.
    pub semi_better: f64,
    pub reports: Vec<XorReport>,
}

/// [`xor_demo`] over `seeds` replications with seeds `seed ⊕ r`.
pub fn xor_study(
    n: usize,
    sigma_sq: f64,
    kappa: f64,
    threshold: f64,
    seeds: usize,
    seed: u64,
) -> Result<XorSummary> {
    let reports = (0..seeds as u64)
        .map(|r| xor_demo(n, sigma_sq, kappa, threshold, child_seed(seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&XorReport) -> f64| lower_median(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(XorSummary {
        n,
        sigma_sq,
        kappa,
        threshold,
        median_semi_leaves: col(|r| r.semi_leaves as f64),
        median_baseline_leaves: col(|r| r.baseline_leaves as f64),
        median_semi_rmse: col(|r| r.semi_rmse),
        median_baseline_rmse: col(|r| r.baseline_rmse),
        semi_better: reports
            .iter()
            .filter(|r| r.semi_rmse < r.baseline_rmse)
            .count() as f64
            / reports.len().max(1) as f64,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_stays_at_the_root() {
        let r = xor_demo(400, 0.1, 0.1, 0.1, 5).unwrap();
        assert_eq!(r.baseline_leaves, 1);
        assert!(r.semi_leaves >= 4);
        assert!(r.semi_rmse < r.baseline_rmse);
    }

    #[test]
    fn study_is_seeded() {
        let a = xor_study(200, 0.1, 0.1, 0.1, 3, 9).unwrap();
        assert_eq!(a, xor_study(200, 0.1, 0.1, 0.1, 3, 9).unwrap());
        assert_eq!(a.reports.len(), 3);
    }
}
