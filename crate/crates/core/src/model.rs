//! Method dispatch and the serialisable fitted model.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::growth::{
    blend, grow, grow_deep, grow_min_impurity_baseline, GrowthMode, GrowthResult, StoppingConfig,
};
use crate::pruning::{prune_cv, two_step, PruneConfig, PrunedFit};
use crate::tree::{Tree, TreeDocument, TreeView};

pub const MODEL_SCHEMA: &str = "esrt-model/1";

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Prune,
    Global,
    GlobalInt,
    TwoStep,
    Semi,
    SemiInt,
    Deep,
    MinImpurity,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Prune,
        Method::Global,
        Method::GlobalInt,
        Method::TwoStep,
        Method::Semi,
        Method::SemiInt,
        Method::Deep,
        Method::MinImpurity,
    ];

    /// The six estimators compared in the simulation tables.
    pub const TABLE: [Method; 6] = [
        Method::Prune,
        Method::Global,
        Method::GlobalInt,
        Method::TwoStep,
        Method::Semi,
        Method::Deep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Prune => "prune",
            Method::Global => "global",
            Method::GlobalInt => "global-int",
            Method::TwoStep => "two-step",
            Method::Semi => "semi",
            Method::SemiInt => "semi-int",
            Method::Deep => "deep",
            Method::MinImpurity => "min-impurity",
        }
    }

    pub fn growth_mode(self) -> Option<GrowthMode> {
        match self {
            Method::Global => Some(GrowthMode::Global),
            Method::GlobalInt => Some(GrowthMode::GlobalInterpolated),
            Method::Semi => Some(GrowthMode::SemiGlobal),
            Method::SemiInt => Some(GrowthMode::SemiGlobalInterpolated),
            _ => None,
        }
    }

    /// Whether the method reads κ.
    pub fn uses_kappa(self) -> bool {
        self.growth_mode().is_some() || self == Method::TwoStep
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub kappa: f64,
    pub seed: u64,
    /// Gain threshold of the min-impurity baseline.
    pub min_impurity: f64,
    pub folds: usize,
    pub filter_tol: Option<f64>,
    pub weighted_priority: bool,
    pub allow_zero_gain: bool,
}

impl FitOptions {
    pub fn new(kappa: f64, seed: u64) -> Self {
        Self {
            kappa,
            seed,
            min_impurity: 0.1,
            folds: 5,
            filter_tol: None,
            weighted_priority: false,
            allow_zero_gain: false,
        }
    }

    pub fn stopping(&self, mode: GrowthMode) -> StoppingConfig {
        let mut cfg = StoppingConfig::new(self.kappa, mode);
        cfg.weighted_priority = self.weighted_priority;
        cfg.allow_zero_gain = self.allow_zero_gain;
        cfg
    }

    pub fn pruning(&self) -> PruneConfig {
        PruneConfig {
            folds: self.folds,
            seed: self.seed,
            filter_tol: self.filter_tol,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Fitted {
    Flow(GrowthResult),
    Pruned(PrunedFit),
    Tree(Tree),
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub method: Method,
    pub kappa: Option<f64>,
    pub fitted: Fitted,
    pub seconds: f64,
}

/// A tree view, or a blend (1−α)·lower + α·upper of two nested views.
pub struct Predictor<'a> {
    lower: TreeView<'a>,
    upper: Option<(TreeView<'a>, f64)>,
}

impl Predictor<'_> {
    pub fn predict(&self, ds: &Dataset) -> Vec<f64> {
        let lower = self.lower.predict(ds);
        match &self.upper {
            Some((upper, alpha)) => blend(&lower, &upper.predict(ds), *alpha),
            None => lower,
        }
    }
}

impl Fit {
    pub fn predictor(&self) -> Predictor<'_> {
        match &self.fitted {
            Fitted::Flow(res) => {
                let r = &res.report;
                if r.pre_root {
                    // the rule stops at the zero function; predict with the root
                    return Predictor {
                        lower: res.tree.view_at(1),
                        upper: None,
                    };
                }
                let lower = res.trace.view(&res.tree, r.point.step);
                let upper = (r.point.alpha > 0.0)
                    .then(|| (res.trace.view(&res.tree, r.point.step + 1), r.point.alpha));
                Predictor { lower, upper }
            }
            Fitted::Pruned(p) => Predictor {
                lower: p.view(),
                upper: None,
            },
            Fitted::Tree(t) => Predictor {
                lower: t.view(),
                upper: None,
            },
        }
    }

    pub fn predict(&self, ds: &Dataset) -> Vec<f64> {
        self.predictor().predict(ds)
    }

    /// Terminal nodes of the fitted tree; for an interpolated stop, those of
    /// the later generation.
    pub fn leaves(&self) -> usize {
        match &self.fitted {
            Fitted::Flow(res) => res.report.k.max(1),
            Fitted::Pruned(p) => p.view().n_leaves(),
            Fitted::Tree(t) => t.n_leaves(),
        }
    }

    pub fn to_model(&self, ds: &Dataset) -> Model {
        let names = ds.feature_names();
        let pred = self.predictor();
        let lower = pred.lower.to_document(names);
        let (upper, alpha) = match &pred.upper {
            Some((u, a)) => (Some(u.to_document(names)), *a),
            None => (None, 0.0),
        };
        let report = match &self.fitted {
            Fitted::Flow(res) => Some(FlowSummary {
                generation: res.report.generation,
                t: res.report.t,
                residual: res.report.residual,
                pre_root: res.report.pre_root,
                exhausted: res.report.exhausted,
            }),
            _ => None,
        };
        Model {
            schema: MODEL_SCHEMA.to_string(),
            method: self.method,
            kappa: self.kappa,
            n_features: ds.n_features(),
            n_leaves: self.leaves(),
            alpha,
            lower,
            upper,
            stop: report,
        }
    }
}

/// Fits one method on `ds`; the wall time covers the whole procedure,
/// cross-validation included.
pub fn fit(ds: &Dataset, method: Method, opts: &FitOptions) -> Result<Fit> {
    let start = Instant::now();
    let fitted = match method {
        Method::Global | Method::GlobalInt | Method::Semi | Method::SemiInt => {
            let mode = method.growth_mode().unwrap();
            Fitted::Flow(grow(ds, &opts.stopping(mode))?)
        }
        Method::Prune => Fitted::Pruned(prune_cv(ds, &opts.pruning())?),
        Method::TwoStep => Fitted::Pruned(two_step(
            ds,
            &opts.stopping(GrowthMode::Global),
            &opts.pruning(),
        )?),
        Method::Deep => Fitted::Tree(grow_deep(ds)),
        Method::MinImpurity => Fitted::Tree(grow_min_impurity_baseline(ds, opts.min_impurity)),
    };
    Ok(Fit {
        method,
        kappa: method.uses_kappa().then_some(opts.kappa),
        fitted,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub generation: usize,
    pub t: f64,
    pub residual: f64,
    pub pre_root: bool,
    pub exhausted: bool,
}

/// JSON model: prediction is (1−α)·lower(x) + α·upper(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub schema: String,
    pub method: Method,
    pub kappa: Option<f64>,
    pub n_features: usize,
    pub n_leaves: usize,
    pub alpha: f64,
    pub lower: TreeDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<TreeDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<FlowSummary>,
}

impl Model {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        if model.schema != MODEL_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unsupported model schema '{}'",
                model.schema
            )));
        }
        Ok(model)
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let lower = self.lower.predict_with(|j| x[j]);
        match &self.upper {
            Some(upper) => (1.0 - self.alpha) * lower + self.alpha * upper.predict_with(|j| x[j]),
            None => lower,
        }
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.n_features() != self.n_features {
            return Err(Error::InvalidData(format!(
                "model expects {} features, data has {}",
                self.n_features,
                ds.n_features()
            )));
        }
        Ok((0..ds.n_samples())
            .map(|i| self.predict_row(&ds.row(i)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn random_ds(seed: u64, n: usize) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let y = rows
            .iter()
            .map(|r| (6.0 * r[0]).sin() + 0.3 * rng.random::<f64>())
            .collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn model_json_predicts_like_the_fit() {
        let ds = random_ds(1, 150);
        let test = random_ds(2, 60);
        for m in Method::ALL {
            let fit = fit(&ds, m, &FitOptions::new(0.05, 3)).unwrap();
            let model = fit.to_model(&ds);
            let back = Model::from_json(&serde_json::to_string(&model).unwrap()).unwrap();
            assert_eq!(back.predict(&test).unwrap(), fit.predict(&test), "{m}");
            assert_eq!(back.n_leaves, fit.leaves());
        }
    }

    #[test]
    fn pre_root_stop_predicts_the_root_mean() {
        let ds = random_ds(4, 40);
        let fit = fit(&ds, Method::GlobalInt, &FitOptions::new(100.0, 0)).unwrap();
        let mean = ds.y().iter().sum::<f64>() / 40.0;
        for p in fit.predict(&ds) {
            assert!((p - mean).abs() < 1e-12);
        }
        assert_eq!(fit.leaves(), 1);
    }

    #[test]
    fn interpolated_model_blends_two_generations() {
        let ds = random_ds(5, 200);
        let f = fit(&ds, Method::GlobalInt, &FitOptions::new(0.05, 0)).unwrap();
        let model = f.to_model(&ds);
        assert!(model.alpha > 0.0 && model.alpha < 1.0);
        assert!(model.upper.is_some());
        assert_eq!(model.predict(&ds).unwrap(), f.predict(&ds));
        let wrong = Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        assert!(model.predict(&wrong).is_err());
    }
}
