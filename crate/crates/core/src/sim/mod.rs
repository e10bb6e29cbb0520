//! Simulation designs, the XOR demo and the seeded Monte Carlo driver.

mod mc;
mod signals;
mod xor;

use std::path::Path;

use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::noise::estimate_noise;
use crate::oracle::SimTruth;
use crate::rng::{stream, streams, Rng};

pub use mc::{
    bench, lower_median, run_monte_carlo, write_bench_csv, BenchRow, McConfig, McSummary,
    MethodSummary, RatioRow, RunRow,
};
pub use signals::{Component, Signal, SIGNAL_NAMES};
pub use xor::{xor_demo, xor_study, XorReport, XorSummary};

/// A data-generating process: X ~ U([low, high]^d), Y = f(X) + N(0, σ²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub low: f64,
    pub high: f64,
    pub sigma_sq: f64,
    pub signal: Signal,
    #[serde(default)]
    pub seed: u64,
}

impl DgpSpec {
    /// Low-dimensional design: U(0,1)^5, n = 1000 train and test, σ² = 1.
    pub fn simulation_a(signal: &str) -> Result<Self> {
        Ok(Self {
            name: signal.to_string(),
            d: 5,
            n_train: 1000,
            n_test: 1000,
            low: 0.0,
            high: 1.0,
            sigma_sq: 1.0,
            signal: Signal::by_name(signal)?,
            seed: 0,
        })
    }

    /// Sparse additive design on U(−2.5, 2.5)^30.
    pub fn simulation_b(signal: &str) -> Result<Self> {
        Ok(Self {
            d: 30,
            low: -2.5,
            high: 2.5,
            ..Self::simulation_a(signal)?
        })
    }

    pub fn xor(n: usize, sigma_sq: f64) -> Self {
        Self {
            name: "xor".to_string(),
            d: 2,
            n_train: n,
            n_test: n,
            low: -1.0,
            high: 1.0,
            sigma_sq,
            signal: Signal::Xor,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.d == 0 {
            return Err(Error::InvalidArgument(
                "n_train, n_test and d must be positive".into(),
            ));
        }
        if !(self.sigma_sq >= 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be >= 0, got {}",
                self.sigma_sq
            )));
        }
        if !(self.low < self.high && self.low.is_finite() && self.high.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "empty covariate box [{}, {}]",
                self.low, self.high
            )));
        }
        self.signal.validate(self.d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: DgpSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    fn sample(&self, rng: &mut Rng, n: usize) -> Result<(Dataset, SimTruth)> {
        let unif =
            Uniform::new(self.low, self.high).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut columns = vec![Vec::with_capacity(n); self.d];
        let mut f_values = Vec::with_capacity(n);
        let mut x = vec![0.0; self.d];
        for _ in 0..n {
            for (j, col) in columns.iter_mut().enumerate() {
                x[j] = unif.sample(rng);
                col.push(x[j]);
            }
            f_values.push(self.signal.eval(&x));
        }
        let normal = Normal::new(0.0, self.sigma_sq.sqrt())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let eps: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        let truth = SimTruth::new(f_values, eps, self.sigma_sq)?;
        let ds = Dataset::from_columns(columns, truth.y())?;
        Ok((ds, truth))
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub train: Dataset,
    pub test: Dataset,
    pub truth_train: SimTruth,
    pub truth_test: SimTruth,
}

/// Draws training and test samples from disjoint streams of `seed`.
pub fn generate(spec: &DgpSpec, seed: u64) -> Result<Generated> {
    spec.validate()?;
    let (train, truth_train) = spec.sample(&mut stream(seed, streams::TRAIN), spec.n_train)?;
    let (test, truth_test) = spec.sample(&mut stream(seed, streams::TEST), spec.n_test)?;
    Ok(Generated {
        train,
        test,
        truth_train,
        truth_test,
    })
}

/// How the critical value κ is chosen for each fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaPolicy {
    /// The true noise variance of the design.
    TrueSigma,
    /// The nearest-neighbour estimate on the training sample.
    Estimated,
    Fixed(f64),
}

impl KappaPolicy {
    pub fn resolve(self, spec: &DgpSpec, train: &Dataset) -> Result<f64> {
        match self {
            KappaPolicy::TrueSigma => Ok(spec.sigma_sq),
            KappaPolicy::Estimated => Ok(estimate_noise(train)?.sigma_sq_hat),
            KappaPolicy::Fixed(k) if k >= 0.0 && k.is_finite() => Ok(k),
            KappaPolicy::Fixed(k) => Err(Error::InvalidArgument(format!(
                "kappa must be >= 0, got {k}"
            ))),
        }
    }
}

impl std::str::FromStr for KappaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(KappaPolicy::Estimated),
            "sigma" => Ok(KappaPolicy::TrueSigma),
            _ => {
                let k: f64 = s.parse().map_err(|_| {
                    Error::InvalidArgument(format!(
                        "kappa must be 'auto', 'sigma' or a number, got '{s}'"
                    ))
                })?;
                if k >= 0.0 && k.is_finite() {
                    Ok(KappaPolicy::Fixed(k))
                } else {
                    Err(Error::InvalidArgument(format!(
                        "kappa must be >= 0, got {k}"
                    )))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_is_seeded_and_streams_are_disjoint() {
        let spec = DgpSpec::simulation_a("sine_cosine").unwrap();
        let a = generate(&spec, 7).unwrap();
        let b = generate(&spec, 7).unwrap();
        assert_eq!(a.train.y(), b.train.y());
        assert_eq!(a.test.feature(3), b.test.feature(3));
        assert_ne!(a.train.feature(0), a.test.feature(0));
        assert_ne!(generate(&spec, 8).unwrap().train.y(), a.train.y());
        assert_eq!(a.train.n_features(), 5);
        assert!(a.train.feature(2).iter().all(|&v| (0.0..1.0).contains(&v)));
        for (i, &y) in a.train.y().iter().enumerate() {
            let f = a.truth_train.f_values[i];
            assert_eq!(f, a.train.feature(0)[i].sin() + a.train.feature(1)[i].cos());
            assert_eq!(y, f + a.truth_train.eps[i]);
        }
    }

    #[test]
    fn noise_has_the_requested_variance() {
        let mut spec = DgpSpec::simulation_a("zero").unwrap();
        spec.n_train = 20_000;
        let g = generate(&spec, 1).unwrap();
        let var = g.truth_train.eps.iter().map(|e| e * e).sum::<f64>() / 20_000.0;
        // four standard errors of the sample second moment
        assert!((var - 1.0).abs() < 4.0 * (2.0f64 / 20_000.0).sqrt());
        spec.sigma_sq = 0.0;
        assert!(generate(&spec, 1)
            .unwrap()
            .truth_train
            .eps
            .iter()
            .all(|&e| e == 0.0));
    }

    #[test]
    fn simulation_b_box() {
        let spec = DgpSpec::simulation_b("additive_hills").unwrap();
        let g = generate(
            &DgpSpec {
                n_train: 50,
                n_test: 5,
                ..spec
            },
            3,
        )
        .unwrap();
        assert_eq!(g.train.n_features(), 30);
        assert!(g
            .train
            .feature(29)
            .iter()
            .all(|&v| (-2.5..2.5).contains(&v)));
    }

    #[test]
    fn invalid_specs() {
        let spec = DgpSpec::simulation_a("rectangular").unwrap();
        assert!(DgpSpec {
            sigma_sq: -1.0,
            ..spec.clone()
        }
        .validate()
        .is_err());
        assert!(DgpSpec {
            n_test: 0,
            ..spec.clone()
        }
        .validate()
        .is_err());
        assert!(DgpSpec {
            d: 1,
            ..spec.clone()
        }
        .validate()
        .is_err());
        assert!(DgpSpec {
            low: 1.0,
            ..spec.clone()
        }
        .validate()
        .is_err());
        let json = serde_json::to_string(&spec)
            .unwrap()
            .replace("rectangular", "hexagonal");
        assert!(serde_json::from_str::<DgpSpec>(&json).is_err());
    }

    #[test]
    fn kappa_policies() {
        assert_eq!(
            "auto".parse::<KappaPolicy>().unwrap(),
            KappaPolicy::Estimated
        );
        assert_eq!(
            "sigma".parse::<KappaPolicy>().unwrap(),
            KappaPolicy::TrueSigma
        );
        assert_eq!(
            "0.5".parse::<KappaPolicy>().unwrap(),
            KappaPolicy::Fixed(0.5)
        );
        assert!("-1".parse::<KappaPolicy>().is_err());
        assert!("NaN".parse::<KappaPolicy>().is_err());
        assert!("abc".parse::<KappaPolicy>().is_err());
    }
}
