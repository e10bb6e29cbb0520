//! Command-line interface.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, all outputs written |
//! | 1 | internal failure |
//! | 2 | usage error (bad flags) |
//! | 3 | input data error (CSV content, missing target column) |
//! | 4 | I/O error (reading or writing a file) |
//! | 5 | invalid configuration or argument value |
//!
//! Errors are reported on stderr as one JSON object per line.

mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dataset::{
    empirical_dist_sq, load_csv, load_features_csv, split_train_test, CsvOptions, Dataset,
    SplitSpec, TargetColumn,
};
use crate::error::{Error, Result};
use crate::model::{self, FitOptions, Method, Model};
use crate::noise::estimate_noise;
use crate::sim::{
    bench, run_monte_carlo, xor_study, DgpSpec, KappaPolicy, McConfig, McSummary, Signal,
};

pub use svg::{box_stats, boxplot_svg, BoxStats};

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "esrt",
    version,
    about = "Regression trees stopped early by the discrepancy principle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tree on a CSV file and write the model as JSON.
    Fit(FitArgs),
    /// Predict a CSV file with a saved model.
    Predict(PredictArgs),
    /// Monte Carlo study on a simulated design.
    Simulate(SimulateArgs),
    /// Time each method on a simulated design.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CsvArgs {
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The CSV has no header row; columns are addressed by index.
    #[arg(long)]
    pub no_header: bool,
}

impl CsvArgs {
    fn options(&self) -> Result<CsvOptions> {
        let delimiter = u8::try_from(self.delimiter).map_err(|_| {
            Error::InvalidArgument(format!(
                "delimiter '{}' is not a single byte",
                self.delimiter
            ))
        })?;
        Ok(CsvOptions {
            delimiter,
            has_header: !self.no_header,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Cross-validation folds for pruning and two-step.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Residual-jump filter on the pruning path (off by default).
    #[arg(long)]
    pub filter_tol: Option<f64>,
    /// Gain threshold of the min-impurity baseline.
    #[arg(long, default_value_t = 0.1)]
    pub min_impurity: f64,
    /// Rank semi-global candidates by node-size weighted gain.
    #[arg(long)]
    pub weighted_priority: bool,
}

impl TuningArgs {
    fn apply(&self, opts: &mut FitOptions) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidArgument("at least 2 folds are needed".into()));
        }
        opts.folds = self.folds;
        opts.filter_tol = self.filter_tol;
        opts.min_impurity = self.min_impurity;
        opts.weighted_priority = self.weighted_priority;
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV.
    #[arg(long)]
    pub train: PathBuf,
    /// Optional test CSV with the same columns.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Hold out a shuffled share of the training file as test set.
    #[arg(long, conflicts_with = "test")]
    pub train_fraction: Option<f64>,
    /// Response column, by header name or zero-based index.
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, value_enum, default_value_t = Method::GlobalInt)]
    pub method: Method,
    /// Critical value: `auto` (nearest-neighbour noise estimate) or a number.
    #[arg(long, default_value = "auto")]
    pub kappa: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the model JSON.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of covariates, in the column order used for fitting.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column to drop and score against, if present.
    #[arg(long)]
    pub target: Option<String>,
    /// Where to write the predictions CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// U(0,1)^5, n = 1000, σ² = 1.
    A,
    /// U(−2.5,2.5)^30, n = 1000, σ² = 1.
    B,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    /// Built-in signals, comma separated; `xor` runs the XOR comparison.
    #[arg(long, value_delimiter = ',')]
    pub signal: Vec<String>,
    /// Design documents (JSON), used in addition to --signal.
    #[arg(long)]
    pub config: Vec<PathBuf>,
    /// Covariate design for --signal.
    #[arg(long, value_enum, default_value_t = Design::A)]
    pub design: Design,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub sigma_sq: Option<f64>,
}

impl DesignArgs {
    fn specs(&self) -> Result<Vec<DgpSpec>> {
        let mut specs = Vec::new();
        for name in &self.signal {
            let mut spec = match (name.as_str(), self.design) {
                ("xor", _) => DgpSpec::xor(500, 0.1),
                (_, Design::A) => DgpSpec::simulation_a(name)?,
                (_, Design::B) => DgpSpec::simulation_b(name)?,
            };
            self.override_into(&mut spec);
            specs.push(spec);
        }
        for path in &self.config {
            let mut spec = DgpSpec::load(path)?;
            self.override_into(&mut spec);
            specs.push(spec);
        }
        if specs.is_empty() {
            return Err(Error::InvalidArgument(
                "give at least one --signal or --config".into(),
            ));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(specs)
    }

    fn override_into(&self, spec: &mut DgpSpec) {
        if let Some(n) = self.n_train {
            spec.n_train = n;
        }
        if let Some(n) = self.n_test {
            spec.n_test = n;
        }
        if let Some(s) = self.sigma_sq {
            spec.sigma_sq = s;
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Monte Carlo replications.
    #[arg(long = "M", default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Critical value: `sigma` (true noise variance), `auto` or a number.
    #[arg(long, default_value = "sigma")]
    pub kappa: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Method::TABLE.to_vec())]
    pub methods: Vec<Method>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG boxplots of relative efficiency.
    #[arg(long)]
    pub plots: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Repetitions per method.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "sigma")]
    pub kappa: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Method::TABLE.to_vec())]
    pub methods: Vec<Method>,
    /// CSV output file; the table goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code of an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Run { source, .. } => exit_code(source),
        Error::Io { .. } => EXIT_IO,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        Error::Csv(_)
        | Error::Parse { .. }
        | Error::MissingTarget(_)
        | Error::Empty(_)
        | Error::InvalidData(_) => EXIT_DATA,
        Error::Json(_)
        | Error::InvalidArgument(_)
        | Error::UnknownSignal(_)
        | Error::OutOfRange { .. } => EXIT_CONFIG,
        Error::InvalidSplit(_) | Error::NotTerminal(_) => EXIT_INTERNAL,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match exit_code(err) {
        EXIT_IO => "io",
        EXIT_DATA => "data",
        EXIT_CONFIG => "config",
        _ => "internal",
    }
}

fn report_error(kind: &str, message: &str, code: i32) {
    eprintln!(
        "{}",
        json!({ "error": kind, "message": message, "exit_code": code })
    );
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            writeln!(buf, "{}", json!({ "level": record.level().as_str().to_lowercase(), "message": record.args().to_string() }))
        })
        .try_init();
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim(), EXIT_USAGE);
            return EXIT_USAGE;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            report_error(error_kind(&e), &e.to_string(), code);
            code
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    empirical_dist_sq(pred, y).sqrt()
}

#[derive(Debug, Serialize)]
struct FitMetrics {
    method: Method,
    kappa: Option<f64>,
    kappa_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_sq_hat: Option<f64>,
    n_train: usize,
    leaves: usize,
    train_residual: f64,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_rmse: Option<f64>,
    model: PathBuf,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let opts_csv = args.csv.options()?;
    let target: TargetColumn = args.target.parse().unwrap_or_else(|e| match e {});
    let full = load_csv(&args.train, &target, opts_csv)?;
    let (train, test) = match (&args.test, args.train_fraction) {
        (Some(path), _) => (full, Some(load_csv(path, &target, opts_csv)?)),
        (None, Some(fraction)) => split_train_test(
            &full,
            SplitSpec {
                train_fraction: fraction,
                seed: args.seed,
            },
        )?,
        (None, None) => (full, None),
    };
    if let Some(t) = &test {
        if t.n_features() != train.n_features() {
            return Err(Error::InvalidData(format!(
                "test file has {} features, training file has {}",
                t.n_features(),
                train.n_features()
            )));
        }
    }

    let (kappa, kappa_source, sigma_sq_hat) = match args.kappa.parse::<KappaPolicy>()? {
        KappaPolicy::Estimated if args.method.uses_kappa() => {
            let est = estimate_noise(&train)?;
            (est.sigma_sq_hat, "auto", Some(est.sigma_sq_hat))
        }
        KappaPolicy::Estimated => (0.0, "unused", None),
        KappaPolicy::Fixed(k) => (k, "fixed", None),
        KappaPolicy::TrueSigma => {
            return Err(Error::InvalidArgument(
                "kappa 'sigma' needs a simulated design; use 'auto' or a number".into(),
            ))
        }
    };
    let mut opts = FitOptions::new(kappa, args.seed);
    args.tuning.apply(&mut opts)?;
    let fit = model::fit(&train, args.method, &opts)?;
    let model = fit.to_model(&train);
    write_file(&args.out, &to_json(&model)?)?;

    let train_pred = fit.predict(&train);
    let metrics = FitMetrics {
        method: args.method,
        kappa: fit.kappa,
        kappa_source,
        sigma_sq_hat,
        n_train: train.n_samples(),
        leaves: fit.leaves(),
        train_residual: empirical_dist_sq(&train_pred, train.y()),
        seconds: fit.seconds,
        n_test: test.as_ref().map(Dataset::n_samples),
        test_rmse: test.as_ref().map(|t| rmse(&fit.predict(t), t.y())),
        model: args.out.clone(),
    };
    print_json(&metrics)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model).map_err(|source| Error::Io {
        path: args.model.clone(),
        source,
    })?;
    let model = Model::from_json(&text)?;
    let opts = args.csv.options()?;
    let (ds, scored) = match &args.target {
        Some(t) => (
            load_csv(&args.data, &t.parse().unwrap_or_else(|e| match e {}), opts)?,
            true,
        ),
        None => (load_features_csv(&args.data, opts)?, false),
    };
    let pred = model.predict(&ds)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["prediction"])?;
    for p in &pred {
        out.write_record([p.to_string()])?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    write_file(&args.out, &bytes)?;
    let mut report = json!({ "n": ds.n_samples(), "predictions": args.out });
    if scored {
        report["rmse"] = json!(rmse(&pred, ds.y()));
    }
    print_json(&report)
}

fn file_stem(spec: &DgpSpec) -> String {
    spec.name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let specs = args.design.specs()?;
    let kappa: KappaPolicy = args.kappa.parse()?;
    if args.runs == 0 {
        return Err(Error::InvalidArgument("--M must be at least 1".into()));
    }
    create_dir(&args.out)?;
    for spec in &specs {
        if spec.signal == Signal::Xor {
            simulate_xor(args, spec, kappa)?;
            continue;
        }
        let mut cfg = McConfig::new(args.methods.clone(), args.runs, args.seed);
        cfg.kappa = kappa;
        cfg.threads = args.threads;
        args.tuning.apply(&mut cfg.options)?;
        let summary = run_monte_carlo(spec, &cfg)?;
        write_summary(&args.out, spec, &summary, args.plots)?;
        print_summary(&summary);
    }
    Ok(())
}

fn write_summary(dir: &Path, spec: &DgpSpec, summary: &McSummary, plots: bool) -> Result<()> {
    let stem = file_stem(spec);
    let mut runs = Vec::new();
    summary.write_runs_csv(&mut runs)?;
    write_file(&dir.join(format!("{stem}_runs.csv")), &runs)?;
    if !summary.ratios.is_empty() {
        let mut ratios = Vec::new();
        summary.write_ratios_csv(&mut ratios)?;
        write_file(&dir.join(format!("{stem}_ratios.csv")), &ratios)?;
    }
    write_file(
        &dir.join(format!("{stem}_summary.json")),
        &to_json(summary)?,
    )?;
    if plots {
        let groups: Vec<(String, Vec<f64>)> = summary
            .methods
            .iter()
            .filter(|m| !matches!(m.method, Method::Deep | Method::MinImpurity))
            .map(|m| {
                (
                    m.method.to_string(),
                    summary.rows_for(m.method).map(|r| r.efficiency()).collect(),
                )
            })
            .collect();
        let title = format!("Relative efficiency, {} (M = {})", spec.name, summary.runs);
        let svg = boxplot_svg(&title, "relative efficiency", &groups, Some(0.5));
        write_file(&dir.join(format!("{stem}_efficiency.svg")), svg.as_bytes())?;
        if !summary.ratios.is_empty() {
            let groups = vec![
                (
                    "glob/semi".to_string(),
                    summary.ratios.iter().map(|r| r.rho_glob_semi).collect(),
                ),
                (
                    "prun/semi".to_string(),
                    summary.ratios.iter().map(|r| r.rho_prun_semi).collect(),
                ),
            ];
            let svg = boxplot_svg(
                &format!("Oracle ratios, {}", spec.name),
                "ratio",
                &groups,
                Some(1.0),
            );
            write_file(&dir.join(format!("{stem}_ratios.svg")), svg.as_bytes())?;
        }
    }
    Ok(())
}

fn print_summary(s: &McSummary) {
    println!("{} (M = {}, seed = {})", s.spec.name, s.runs, s.seed);
    println!(
        "  {:<13} {:>8} {:>8} {:>8} {:>8} {:>9} {:>8} {:>9}",
        "method", "rmse", "oracle", "leaves", "o.leaves", "eff", "eff>0.5", "seconds"
    );
    for m in &s.methods {
        println!(
            "  {:<13} {:>8.3} {:>8.3} {:>8} {:>8} {:>9.3} {:>8.2} {:>9.4}",
            m.method.name(),
            m.median_rmse,
            m.median_oracle_rmse,
            m.median_leaves,
            m.median_oracle_leaves,
            m.median_efficiency,
            m.efficiency_above_half,
            m.median_seconds
        );
    }
    if let (Some(a), Some(b)) = (s.median_rho_glob_semi, s.median_rho_prun_semi) {
        println!("  oracle ratios: glob/semi {a:.3}, prun/semi {b:.3}");
    }
}

fn simulate_xor(args: &SimulateArgs, spec: &DgpSpec, kappa: KappaPolicy) -> Result<()> {
    let kappa = match kappa {
        KappaPolicy::TrueSigma => spec.sigma_sq,
        KappaPolicy::Fixed(k) => k,
        KappaPolicy::Estimated => {
            return Err(Error::InvalidArgument(
                "the xor comparison takes kappa 'sigma' or a number".into(),
            ))
        }
    };
    let s = xor_study(
        spec.n_train,
        spec.sigma_sq,
        kappa,
        args.tuning.min_impurity,
        args.runs,
        args.seed,
    )?;
    let mut rows = csv::Writer::from_writer(Vec::new());
    for r in &s.reports {
        rows.serialize(r)?;
    }
    let bytes = rows
        .into_inner()
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    write_file(&args.out.join("xor_runs.csv"), &bytes)?;
    write_file(&args.out.join("xor_summary.json"), &to_json(&s)?)?;
    println!(
        "xor (n = {}, sigma^2 = {}, kappa = {}, seeds = {})",
        s.n,
        s.sigma_sq,
        s.kappa,
        s.reports.len()
    );
    println!(
        "  semi-global:  median leaves {}, median rmse {:.3}",
        s.median_semi_leaves, s.median_semi_rmse
    );
    println!(
        "  min-impurity: median leaves {}, median rmse {:.3} (threshold {})",
        s.median_baseline_leaves, s.median_baseline_rmse, s.threshold
    );
    println!(
        "  semi-global better in {:.0}% of seeds",
        100.0 * s.semi_better
    );
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let specs = args.design.specs()?;
    let kappa: KappaPolicy = args.kappa.parse()?;
    let mut all = Vec::new();
    for spec in &specs {
        let start = Instant::now();
        let rows = bench(spec, &args.methods, args.reps, kappa, args.seed)?;
        log::info!(
            "bench {} took {:.1}s",
            spec.name,
            start.elapsed().as_secs_f64()
        );
        all.extend(rows.into_iter().map(|r| (spec.name.clone(), r)));
    }
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "signal",
        "method",
        "n",
        "reps",
        "median_seconds",
        "min_seconds",
        "median_leaves",
    ])?;
    for (name, r) in &all {
        out.write_record([
            name.clone(),
            r.method.to_string(),
            r.n.to_string(),
            r.reps.to_string(),
            r.median_seconds.to_string(),
            r.min_seconds.to_string(),
            r.median_leaves.to_string(),
        ])?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    match &args.out {
        Some(path) => {
            write_file(path, &bytes)?;
            for (name, r) in &all {
                println!(
                    "{name:<14} {:<13} {:>10.5}s  {:>6} leaves",
                    r.method.name(),
                    r.median_seconds,
                    r.median_leaves
                );
            }
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "esrt",
            "simulate",
            "--signal",
            "rectangular,circular",
            "--M",
            "3",
            "--methods",
            "prune,global-int,two-step",
            "--plots",
            "--threads",
            "2",
        ])
        .unwrap();
        let Command::Simulate(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.design.signal, vec!["rectangular", "circular"]);
        assert_eq!(a.runs, 3);
        assert_eq!(
            a.methods,
            vec![Method::Prune, Method::GlobalInt, Method::TwoStep]
        );
        assert!(a.plots);
        assert_eq!(a.threads, Some(2));
        let cli = Cli::try_parse_from([
            "esrt",
            "fit",
            "--train",
            "x.csv",
            "--method",
            "min-impurity",
            "--kappa",
            "0.5",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.method, Method::MinImpurity);
        assert!(
            Cli::try_parse_from(["esrt", "fit", "--train", "x.csv", "--method", "bogus"]).is_err()
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::MissingTarget("y".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::UnknownSignal("q".into())), EXIT_CONFIG);
        let io = Error::Io {
            path: "p".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(
            exit_code(&Error::Run {
                run: 3,
                source: Box::new(io)
            }),
            EXIT_IO
        );
        assert_eq!(
            main_with_args(["esrt", "simulate", "--M", "nope"]),
            EXIT_USAGE
        );
        assert_eq!(
            main_with_args(["esrt", "fit", "--train", "/nonexistent/file.csv"]),
            EXIT_IO
        );
        assert_eq!(main_with_args(["esrt", "--help"]), 0);
    }
}
