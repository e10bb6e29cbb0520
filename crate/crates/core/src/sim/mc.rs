use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, DgpSpec, Generated, KappaPolicy};
use crate::dataset::empirical_dist_sq;
use crate::error::{Error, Result};
use crate::growth::{grow, GrowthMode};
use crate::model::{self, FitOptions, Fitted, Method};
use crate::oracle::{flow_test_errors, oracle_ratios, path_test_errors, TestFlowErrors};
use crate::rng::child_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub methods: Vec<Method>,
    pub runs: usize,
    pub kappa: KappaPolicy,
    pub seed: u64,
    /// Template for every fit; κ and the seed are filled in per run.
    pub options: FitOptions,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(methods: Vec<Method>, runs: usize, seed: u64) -> Self {
        Self {
            methods,
            runs,
            kappa: KappaPolicy::TrueSigma,
            seed,
            options: FitOptions::new(0.0, seed),
            threads: None,
        }
    }
}

/// One method on one replication. Errors are measured against the noiseless
/// signal on the test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub method: Method,
    pub rmse: f64,
    pub oracle_rmse: f64,
    pub leaves: usize,
    pub oracle_leaves: usize,
    pub seconds: f64,
}

impl RunRow {
    pub fn efficiency(&self) -> f64 {
        efficiency(self.oracle_rmse, self.rmse)
    }
}

fn efficiency(oracle_rmse: f64, rmse: f64) -> f64 {
    if rmse == 0.0 {
        1.0
    } else {
        oracle_rmse / rmse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub run: usize,
    pub rho_glob_semi: f64,
    pub rho_prun_semi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub median_rmse: f64,
    pub median_oracle_rmse: f64,
    pub median_efficiency: f64,
    pub min_efficiency: f64,
    /// Share of runs with efficiency above 0.5.
    pub efficiency_above_half: f64,
    pub median_leaves: f64,
    pub median_oracle_leaves: f64,
    pub median_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub spec: DgpSpec,
    pub runs: usize,
    pub seed: u64,
    pub kappa: KappaPolicy,
    pub methods: Vec<MethodSummary>,
    pub median_rho_glob_semi: Option<f64>,
    pub median_rho_prun_semi: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<RunRow>,
    #[serde(skip)]
    pub ratios: Vec<RatioRow>,
}

impl McSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn rows_for(&self, m: Method) -> impl Iterator<Item = &RunRow> {
        self.rows.iter().filter(move |r| r.method == m)
    }

    pub fn write_runs_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.rows)
    }

    pub fn write_ratios_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.ratios)
    }
}

fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Lower median: the ⌈n/2⌉-th smallest value.
pub fn lower_median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Runs `cfg.runs` seeded replications of every method on `spec` and
/// aggregates them. The result does not depend on the thread count.
pub fn run_monte_carlo(spec: &DgpSpec, cfg: &McConfig) -> Result<McSummary> {
    if cfg.runs == 0 {
        return Err(Error::InvalidArgument(
            "the number of runs must be at least 1".into(),
        ));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    spec.validate()?;
    let work = || -> Vec<Result<(Vec<RunRow>, Option<RatioRow>)>> {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| {
                replicate(spec, cfg, r).map_err(|e| Error::Run {
                    run: r,
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let results = with_threads(cfg.threads, work)?;

    let mut rows = Vec::with_capacity(cfg.runs * cfg.methods.len());
    let mut ratios = Vec::new();
    for res in results {
        let (r, ratio) = res?;
        rows.extend(r);
        ratios.extend(ratio);
    }
    let methods = cfg
        .methods
        .iter()
        .map(|&m| {
            let mine: Vec<&RunRow> = rows.iter().filter(|r| r.method == m).collect();
            let col = |f: &dyn Fn(&RunRow) -> f64| {
                lower_median(&mine.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let eff: Vec<f64> = mine.iter().map(|r| r.efficiency()).collect();
            MethodSummary {
                method: m,
                median_rmse: col(&|r| r.rmse),
                median_oracle_rmse: col(&|r| r.oracle_rmse),
                median_efficiency: lower_median(&eff),
                min_efficiency: eff.iter().copied().fold(f64::INFINITY, f64::min),
                efficiency_above_half: eff.iter().filter(|&&e| e > 0.5).count() as f64
                    / eff.len() as f64,
                median_leaves: col(&|r| r.leaves as f64),
                median_oracle_leaves: col(&|r| r.oracle_leaves as f64),
                median_seconds: col(&|r| r.seconds),
            }
        })
        .collect();
    let ratio_median = |f: fn(&RatioRow) -> f64| {
        (!ratios.is_empty()).then(|| lower_median(&ratios.iter().map(f).collect::<Vec<_>>()))
    };
    Ok(McSummary {
        spec: spec.clone(),
        runs: cfg.runs,
        seed: cfg.seed,
        kappa: cfg.kappa,
        methods,
        median_rho_glob_semi: ratio_median(|r| r.rho_glob_semi),
        median_rho_prun_semi: ratio_median(|r| r.rho_prun_semi),
        rows,
        ratios,
    })
}

fn with_threads<T: Send>(threads: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| {
                    Error::InvalidArgument(format!("cannot build a pool of {n} threads: {e}"))
                })?;
            Ok(pool.install(work))
        }
    }
}

fn replicate(
    spec: &DgpSpec,
    cfg: &McConfig,
    run: usize,
) -> Result<(Vec<RunRow>, Option<RatioRow>)> {
    let seed = child_seed(cfg.seed, run as u64);
    let g = generate(spec, seed)?;
    let mut opts = cfg.options.clone();
    opts.kappa = cfg.kappa.resolve(spec, &g.train)?;
    opts.seed = seed;
    let f_test = &g.truth_test.f_values;

    // full flows are shared by the plain and interpolated variants and are
    // grown outside the timed fits
    let mut flows: [Option<TestFlowErrors>; 2] = [None, None];
    let mut flow_errors = |g: &Generated, semi: bool| -> Result<TestFlowErrors> {
        let slot = &mut flows[usize::from(semi)];
        if slot.is_none() {
            let mode = if semi {
                GrowthMode::SemiGlobal
            } else {
                GrowthMode::Global
            };
            let full = grow(&g.train, &opts.stopping(mode).run_to_completion())?;
            *slot = Some(flow_test_errors(&full.tree, &full.trace, &g.test, f_test));
        }
        Ok(slot.clone().unwrap())
    };

    let mut rows = Vec::with_capacity(cfg.methods.len());
    let mut prune_errors = None;
    for &method in &cfg.methods {
        let fit = model::fit(&g.train, method, &opts)?;
        let mse = empirical_dist_sq(&fit.predict(&g.test), f_test);
        let leaves = fit.leaves();
        let (oracle_mse, oracle_leaves) = match (&fit.fitted, method.growth_mode()) {
            (Fitted::Flow(_), Some(mode)) => {
                let errs = flow_errors(&g, mode.is_semi_global())?;
                // global stopping is measured against the interpolated global
                // oracle, which cannot overshoot a generation
                if mode.is_interpolated() || !mode.is_semi_global() {
                    let (p, v) = errs.continuous_min();
                    (v, errs.leaves_at(p))
                } else {
                    let (s, v) = errs.discrete_min();
                    (v, errs.k[s])
                }
            }
            (Fitted::Pruned(p), _) => {
                let errs = path_test_errors(&p.tree, &p.path, &g.test, f_test);
                let best = (0..errs.len()).fold(0, |b, i| if errs[i] < errs[b] { i } else { b });
                let out = (errs[best], p.path.entries[best].leaves);
                if method == Method::Prune {
                    prune_errors = Some(errs);
                }
                out
            }
            _ => (mse, leaves),
        };
        rows.push(RunRow {
            run,
            method,
            rmse: mse.sqrt(),
            // the fit lies on the path the oracle ranges over; min() absorbs round-off
            oracle_rmse: oracle_mse.min(mse).sqrt(),
            leaves,
            oracle_leaves,
            seconds: fit.seconds,
        });
    }
    let has_global = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::Global | Method::GlobalInt));
    let has_semi = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::Semi | Method::SemiInt));
    let ratio = match prune_errors {
        Some(prune) if has_global && has_semi => {
            let (glob, semi) = (flow_errors(&g, false)?, flow_errors(&g, true)?);
            let (rho_glob_semi, rho_prun_semi) = oracle_ratios(&glob, &semi, &prune);
            Some(RatioRow {
                run,
                rho_glob_semi,
                rho_prun_semi,
            })
        }
        _ => None,
    };
    Ok((rows, ratio))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub reps: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub median_leaves: f64,
}

/// Times each method on `reps` fresh training samples, sequentially.
pub fn bench(
    spec: &DgpSpec,
    methods: &[Method],
    reps: usize,
    kappa: KappaPolicy,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Err(Error::InvalidArgument(
            "the number of repetitions must be at least 1".into(),
        ));
    }
    let mut times = vec![Vec::new(); methods.len()];
    let mut leaves = vec![Vec::new(); methods.len()];
    for r in 0..reps {
        let run_seed = child_seed(seed, r as u64);
        let g = generate(spec, run_seed)?;
        let mut opts = FitOptions::new(kappa.resolve(spec, &g.train)?, run_seed);
        opts.seed = run_seed;
        for (i, &m) in methods.iter().enumerate() {
            let fit = model::fit(&g.train, m, &opts).map_err(|e| Error::Run {
                run: r,
                source: Box::new(e),
            })?;
            times[i].push(fit.seconds);
            leaves[i].push(fit.leaves() as f64);
        }
    }
    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, &method)| BenchRow {
            method,
            n: spec.n_train,
            reps,
            median_seconds: lower_median(&times[i]),
            min_seconds: times[i].iter().copied().fold(f64::INFINITY, f64::min),
            median_leaves: lower_median(&leaves[i]),
        })
        .collect())
}

pub fn write_bench_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    write_csv(w, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(signal: &str) -> DgpSpec {
        DgpSpec {
            n_train: 120,
            n_test: 80,
            ..DgpSpec::simulation_a(signal).unwrap()
        }
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[5.0]), 5.0);
        assert!(lower_median(&[]).is_nan());
    }

    #[test]
    fn single_run_medians_equal_the_run() {
        let cfg = McConfig::new(Method::TABLE.to_vec(), 1, 11);
        let s = run_monte_carlo(&small_spec("rectangular"), &cfg).unwrap();
        assert_eq!(s.rows.len(), 6);
        for row in &s.rows {
            let m = s.method(row.method).unwrap();
            assert_eq!(m.median_rmse, row.rmse);
            assert_eq!(m.median_leaves, row.leaves as f64);
            assert!(row.oracle_rmse <= row.rmse);
        }
        assert_eq!(s.ratios.len(), 1);
        let deep = s.method(Method::Deep).unwrap();
        assert_eq!(deep.median_efficiency, 1.0);
    }

    #[test]
    fn summary_is_independent_of_threads() {
        let mut cfg = McConfig::new(vec![Method::Prune, Method::GlobalInt, Method::Semi], 4, 3);
        let spec = small_spec("sine_cosine");
        cfg.threads = Some(1);
        let a = run_monte_carlo(&spec, &cfg).unwrap();
        cfg.threads = Some(3);
        let b = run_monte_carlo(&spec, &cfg).unwrap();
        let strip = |s: &McSummary| -> Vec<(usize, Method, f64, f64, usize, usize)> {
            s.rows
                .iter()
                .map(|r| {
                    (
                        r.run,
                        r.method,
                        r.rmse,
                        r.oracle_rmse,
                        r.leaves,
                        r.oracle_leaves,
                    )
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.ratios, b.ratios);
        assert_eq!(
            a.rows.iter().map(|r| r.run).collect::<Vec<_>>(),
            vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]
        );
    }

    #[test]
    fn zero_runs_rejected_and_errors_carry_the_run() {
        let spec = small_spec("circular");
        assert!(run_monte_carlo(&spec, &McConfig::new(vec![Method::Deep], 0, 1)).is_err());
        let mut cfg = McConfig::new(vec![Method::Global], 2, 1);
        cfg.kappa = KappaPolicy::Fixed(-1.0);
        assert!(matches!(
            run_monte_carlo(&spec, &cfg),
            Err(Error::Run { run: 0, .. })
        ));
    }

    #[test]
    fn bench_rows() {
        let rows = bench(
            &small_spec("sine_cosine"),
            &[Method::Global, Method::Deep],
            2,
            KappaPolicy::TrueSigma,
            1,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.reps == 2 && r.median_seconds >= r.min_seconds));
        let mut out = Vec::new();
        write_bench_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("method,n,reps,median_seconds,min_seconds,median_leaves\n"));
    }
}
