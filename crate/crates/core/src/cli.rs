//! Command-line front end. Flags override environment variables (prefix
//! `PERTURB_`), which override the TOML file given by `--config`, which
//! overrides the built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::experiments::{
    run_knn_repetitions, run_sorting_repetitions, write_curves_csv, write_json, write_trials_csv, KnnTaskConfig,
    SigmaMode, SortingLoss, SortingTaskConfig, SCHEMA_VERSION,
};
use crate::verify::{self, GIBBS_TV_THRESHOLD, GRADCHECK_THRESHOLD};

pub const ENV_PREFIX: &str = "PERTURB_";
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "perturbed-direct", version, about = "Direct loss minimization with learned perturbations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn to sort uniform sequences with a perturbed matching predictor.
    SortTrain(SortArgs),
    /// Learn a top-k nearest-neighbour embedding on a distorted synthetic metric.
    KnnTrain(KnnArgs),
    /// Compare perturbed-argmax frequencies to the Gibbs law.
    GibbsCheck(GibbsArgs),
    /// Finite-difference check of every shipped network.
    Gradcheck(GradcheckArgs),
    /// Fast solvers against brute-force enumeration.
    SolverBench(BenchArgs),
    /// How quickly the loss-perturbed argmax settles under shrinking score changes.
    StabilityProbe(ProbeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed; every trial seed derives from it.
    #[arg(long, env = "PERTURB_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for trial fan-out (default: available parallelism).
    #[arg(long, env = "PERTURB_WORKERS")]
    pub workers: Option<usize>,
    /// Directory receiving CSV and JSON output.
    #[arg(long, env = "PERTURB_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// TOML file with defaults for any of these settings.
    #[arg(long, env = "PERTURB_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaModeArg {
    Learned,
    Fixed,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Row,
    Placement,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, env = "PERTURB_TRIALS")]
    pub trials: Option<usize>,
    #[arg(long, value_enum, env = "PERTURB_SIGMA_MODE")]
    pub sigma_mode: Option<SigmaModeArg>,
    /// Noise scale for `--sigma-mode fixed`; implies fixed mode when given alone.
    #[arg(long, env = "PERTURB_SIGMA")]
    pub sigma: Option<f64>,
    /// Initial loss-perturbation magnitude, signed.
    #[arg(long, env = "PERTURB_EPSILON", allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Perturbation draws per example and step.
    #[arg(long, env = "PERTURB_PERTURBATIONS")]
    pub perturbations: Option<usize>,
    #[arg(long, env = "PERTURB_EPOCHS_MAX")]
    pub epochs_max: Option<usize>,
    #[arg(long, env = "PERTURB_BATCH_SIZE")]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SortArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Sequence length.
    #[arg(long, env = "PERTURB_D")]
    pub d: Option<usize>,
    /// Epochs without improvement before stopping.
    #[arg(long, env = "PERTURB_PATIENCE")]
    pub patience: Option<usize>,
    #[arg(long, value_enum, env = "PERTURB_LOSS")]
    pub loss: Option<LossArg>,
}

#[derive(Debug, Clone, Args)]
pub struct KnnArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Candidates per query.
    #[arg(long, env = "PERTURB_N")]
    pub n: Option<usize>,
    /// Neighbours to select.
    #[arg(long, env = "PERTURB_K")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GibbsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sequence length for the sorting networks.
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    /// Random (parameters, input, cotangent) draws per architecture.
    #[arg(long, default_value_t = 100)]
    pub triples: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = -12.0, allow_hyphen_values = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

/// Contents of a `--config` file. Task tables use the library field names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub sort: Option<SortingTaskConfig>,
    pub knn: Option<KnnTaskConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, file or parameter combination: exit code 1.
    Config(String),
    /// Failure while running, or a verification below threshold: exit code 2.
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(_) => 2,
        }
    }
}

fn run_err(e: crate::Error) -> CliError {
    CliError::Run(e.to_string())
}

/// Settings shared by every subcommand after merging the file.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn resolve_common(common: &CommonArgs) -> Result<(Resolved, FileConfig), CliError> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let workers = common.workers.or(file.workers);
    if workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let resolved = Resolved {
        seed: common.seed.or(file.seed).unwrap_or(0),
        workers,
        out_dir: common.out_dir.clone().or_else(|| file.out_dir.clone()),
    };
    Ok((resolved, file))
}

fn resolve_sigma(train: &TrainArgs, fallback: SigmaMode) -> Result<SigmaMode, CliError> {
    let mode = match (train.sigma_mode, train.sigma) {
        (None, None) => fallback,
        (None | Some(SigmaModeArg::Fixed), Some(v)) => SigmaMode::Fixed(v),
        (Some(SigmaModeArg::Fixed), None) => match fallback {
            f @ SigmaMode::Fixed(_) => f,
            _ => return Err(CliError::Config("--sigma-mode fixed needs --sigma <value>".into())),
        },
        (Some(SigmaModeArg::Learned), None) => SigmaMode::Learned,
        (Some(SigmaModeArg::Zero), None) => SigmaMode::Zero,
        (Some(m), Some(_)) => {
            return Err(CliError::Config(format!("--sigma only applies to fixed mode, not {m:?}").to_lowercase()))
        }
    };
    mode.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(mode)
}

fn resolve_trials(train: &TrainArgs, file: &FileConfig) -> Result<usize, CliError> {
    let trials = train.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Config("--trials must be at least 1".into()));
    }
    Ok(trials)
}

/// Effective sorting configuration for `args`.
pub fn resolve_sort(args: &SortArgs) -> Result<(Resolved, usize, SortingTaskConfig), CliError> {
    let (common, file) = resolve_common(&args.common)?;
    let trials = resolve_trials(&args.train, &file)?;
    let base = file.sort.clone().unwrap_or_default();
    let t = &args.train;
    let config = SortingTaskConfig {
        d: args.d.unwrap_or(base.d),
        epsilon: t.epsilon.unwrap_or(base.epsilon),
        perturbations: t.perturbations.unwrap_or(base.perturbations),
        epochs_max: t.epochs_max.unwrap_or(base.epochs_max),
        batch_size: t.batch_size.unwrap_or(base.batch_size),
        patience: args.patience.unwrap_or(base.patience),
        loss: match args.loss {
            Some(LossArg::Row) => SortingLoss::RowQuadratic,
            Some(LossArg::Placement) => SortingLoss::Placement,
            None => base.loss,
        },
        sigma_mode: resolve_sigma(t, base.sigma_mode)?,
        seed: common.seed,
        ..base
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((common, trials, config))
}

/// Effective nearest-neighbour configuration for `args`.
pub fn resolve_knn(args: &KnnArgs) -> Result<(Resolved, usize, KnnTaskConfig), CliError> {
    let (common, file) = resolve_common(&args.common)?;
    let trials = resolve_trials(&args.train, &file)?;
    let base = file.knn.clone().unwrap_or_default();
    let t = &args.train;
    let config = KnnTaskConfig {
        n: args.n.unwrap_or(base.n),
        k: args.k.unwrap_or(base.k),
        epsilon: t.epsilon.unwrap_or(base.epsilon),
        perturbations: t.perturbations.unwrap_or(base.perturbations),
        epochs: t.epochs_max.unwrap_or(base.epochs),
        batch_size: t.batch_size.unwrap_or(base.batch_size),
        sigma_mode: resolve_sigma(t, base.sigma_mode)?,
        seed: common.seed,
        ..base
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((common, trials, config))
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize, R: Serialize> {
    schema_version: u32,
    command: &'a str,
    trials: usize,
    seed: u64,
    workers: Option<usize>,
    config: &'a C,
    results: &'a R,
}

fn write_summary<C: Serialize, R: Serialize>(
    common: &Resolved,
    command: &str,
    trials: usize,
    config: &C,
    results: &R,
) -> Result<(), CliError> {
    let Some(dir) = &common.out_dir else { return Ok(()) };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command,
        trials,
        seed: common.seed,
        workers: common.workers,
        config,
        results,
    };
    write_json(&dir.join("summary.json"), &summary).map_err(run_err)
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn require(passed: bool, what: &str) -> Result<(), CliError> {
    if passed {
        Ok(())
    } else {
        Err(CliError::Run(format!("{what} below threshold")))
    }
}

fn sort_train(args: &SortArgs) -> Result<(), CliError> {
    let (common, trials, config) = resolve_sort(args)?;
    let report = run_sorting_repetitions(&config, trials, common.workers).map_err(run_err)?;
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Run(e.to_string()))?;
        write_trials_csv(&dir.join("trials.csv"), &report.metrics.trials).map_err(run_err)?;
        write_curves_csv(&dir.join("curves.csv"), &report.curves()).map_err(run_err)?;
    }
    println!("trial  epochs  train_loss  sigma   prop_wrong  escalations");
    for r in &report.metrics.trials {
        println!(
            "{:>5}  {:>6}  {:>10.4}  {:>6.3}  {:>9.1}%  {:>11}",
            r.trial_id,
            r.epochs_run,
            r.final_train_loss,
            r.sigma_final,
            100.0 * r.prop_wrong,
            r.escalations
        );
    }
    for f in &report.failures {
        println!("trial {} failed: {}", f.trial_id, f.reason);
    }
    let m = &report.metrics;
    println!(
        "d={} sigma={} epsilon={}: {:.1}% perfect, prop wrong {:.2}% ± {:.2}%, {} ties",
        config.d,
        config.sigma_mode.label(),
        config.epsilon,
        m.percent_zero_prop_any_wrong,
        m.prop_wrong_mean,
        m.prop_wrong_std,
        m.tie_count
    );
    #[derive(Serialize)]
    struct Out<'a> {
        metrics: &'a crate::experiments::MetricsReport,
        failures: &'a [crate::experiments::TrialFailure],
    }
    write_summary(&common, "sort-train", trials, &config, &Out { metrics: m, failures: &report.failures })
}

fn knn_train(args: &KnnArgs) -> Result<(), CliError> {
    let (common, trials, config) = resolve_knn(args)?;
    let report = run_knn_repetitions(&config, trials, common.workers).map_err(run_err)?;
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Run(e.to_string()))?;
        write_trials_csv(&dir.join("trials.csv"), &report.records).map_err(run_err)?;
        write_curves_csv(&dir.join("curves.csv"), &report.curves()).map_err(run_err)?;
    }
    println!("trial  untrained  trained  chance  sigma");
    for t in &report.trials {
        println!(
            "{:>5}  {:>9.3}  {:>7.3}  {:>6.3}  {:.3}",
            t.record.trial_id, t.untrained_overlap, t.trained_overlap, t.chance_overlap, t.record.sigma_final
        );
    }
    for f in &report.failures {
        println!("trial {} failed: {}", f.trial_id, f.reason);
    }
    println!(
        "n={} k={} sigma={}: overlap {:.3} ± {:.3} (untrained {:.3}, chance {:.3}), {:.1} standard errors above chance",
        config.n,
        config.k,
        config.sigma_mode.label(),
        report.trained_mean,
        report.trained_se,
        report.untrained_mean,
        report.chance_mean,
        report.z_above_chance
    );
    write_summary(&common, "knn-train", trials, &config, &report)
}

fn gibbs_check(args: &GibbsArgs) -> Result<(), CliError> {
    let (common, _) = resolve_common(&args.common)?;
    let cases = verify::gibbs_suite(common.seed, args.samples).map_err(run_err)?;
    println!("case            sigma  reference     TV       TV to Gibbs  verdict");
    for c in &cases {
        let v = if c.asserted { verdict(c.passed) } else { "reported" };
        let r = serde_json::to_value(c.reference).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        println!(
            "{:<14}  {:>5}  {:<12}  {:>7.4}  {:>11.4}  {v}",
            c.name, c.sigma, r, c.total_variation, c.gibbs_total_variation
        );
    }
    println!("threshold: TV < {GIBBS_TV_THRESHOLD} over {} samples", args.samples);
    write_summary(&common, "gibbs-check", args.samples, &args.samples, &cases)?;
    require(cases.iter().all(|c| c.passed), "Gibbs agreement")
}

fn gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let (common, file) = resolve_common(&args.common)?;
    let knn = file.knn.unwrap_or_default();
    let checks = verify::gradcheck_suite(args.d, &knn, args.triples, args.step, common.seed).map_err(|e| match e {
        crate::Error::InvalidParameter(m) if args.triples == 0 || !(args.step > 0.0) => CliError::Config(m),
        other => run_err(other),
    })?;
    println!("architecture              params-shape        max rel. error  verdict");
    for c in &checks {
        let dims = c.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("-");
        println!("{:<24}  {:<18}  {:>14.3e}  {}", c.name, dims, c.max_relative_error, verdict(c.passed));
    }
    println!("threshold: {GRADCHECK_THRESHOLD:e} over {} triples each", args.triples);
    write_summary(&common, "gradcheck", args.triples, &(args.d, args.step), &checks)?;
    require(checks.iter().all(|c| c.passed), "gradient agreement")
}

fn solver_bench(args: &BenchArgs) -> Result<(), CliError> {
    let (common, _) = resolve_common(&args.common)?;
    if args.d > crate::solvers::MAX_BRUTE_MATCHING {
        return Err(CliError::Config(format!(
            "--d {} exceeds the enumeration limit {}",
            args.d,
            crate::solvers::MAX_BRUTE_MATCHING
        )));
    }
    let tallies = verify::solver_bench(args.d, args.n, args.k, args.instances, common.seed).map_err(|e| match e {
        crate::Error::InvalidParameter(m) | crate::Error::FamilyTooLarge(m) => CliError::Config(m),
        other => run_err(other),
    })?;
    for t in &tallies {
        println!(
            "{:<16} value equal {}/{}, argmax equal {}/{} above margin  {}",
            t.family,
            t.value_equal,
            t.instances,
            t.argmax_equal,
            t.argmax_compared,
            verdict(t.passed)
        );
    }
    write_summary(&common, "solver-bench", args.instances, &(args.d, args.n, args.k), &tallies)?;
    require(tallies.iter().all(|t| t.passed), "oracle agreement")
}

fn stability_probe(args: &ProbeArgs) -> Result<(), CliError> {
    let (common, _) = resolve_common(&args.common)?;
    if args.epsilon == 0.0 || args.steps == 0 || args.d == 0 || !(args.sigma >= 0.0) {
        return Err(CliError::Config("need d ≥ 1, steps ≥ 1, nonzero epsilon and sigma ≥ 0".into()));
    }
    let s = verify::stability_suite(args.d, args.instances, args.steps, args.epsilon, args.sigma, common.seed)
        .map_err(run_err)?;
    for (i, c) in s.first_changes.iter().enumerate() {
        match c {
            Some(n) => println!("instance {i:>3}: argmax differs from the limit up to some step ≥ {n}"),
            None => println!("instance {i:>3}: limit argmax at every step"),
        }
    }
    println!(
        "{}/{} instances settled within {} steps; latest onset {}",
        s.stabilized,
        s.instances,
        s.steps,
        s.latest_stable_from.map_or("none".to_string(), |n| n.to_string())
    );
    write_summary(&common, "stability-probe", args.instances, &(args.d, args.epsilon, args.sigma), &s)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::SortTrain(a) => sort_train(a),
        Command::KnnTrain(a) => knn_train(a),
        Command::GibbsCheck(a) => gibbs_check(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::SolverBench(a) => solver_bench(a),
        Command::StabilityProbe(a) => stability_probe(a),
    }
}

/// Parse `argv`, run, and map the outcome to the documented exit codes.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("perturbed-direct").chain(args.iter().copied())).unwrap()
    }

    fn sort_args(args: &[&str]) -> SortArgs {
        match parse(&[&["sort-train"], args].concat()).command {
            Command::SortTrain(a) => a,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sort_defaults() {
        let (common, trials, c) = resolve_sort(&sort_args(&["--d", "5"])).unwrap();
        assert_eq!((c.d, c.epsilon, c.perturbations, trials), (5, -12.0, 5, 20));
        assert_eq!(c.sigma_mode, SigmaMode::Learned);
        assert_eq!(common.seed, 0);
    }

    #[test]
    fn sigma_flags() {
        let zero_fixed = resolve_sort(&sort_args(&["--sigma-mode", "fixed", "--sigma", "0"]));
        assert!(matches!(zero_fixed, Err(CliError::Config(_))));
        assert!(matches!(resolve_sort(&sort_args(&["--sigma-mode", "fixed"])), Err(CliError::Config(_))));
        let (_, _, c) = resolve_sort(&sort_args(&["--sigma", "1"])).unwrap();
        assert_eq!(c.sigma_mode, SigmaMode::Fixed(1.0));
        let (_, _, c) = resolve_sort(&sort_args(&["--sigma-mode", "zero", "--epsilon", "-3"])).unwrap();
        assert_eq!((c.sigma_mode, c.epsilon), (SigmaMode::Zero, -3.0));
        assert!(resolve_sort(&sort_args(&["--sigma-mode", "zero", "--sigma", "1"])).is_err());
    }

    #[test]
    fn knn_rejects_k_above_n() {
        let Command::KnnTrain(a) = parse(&["knn-train", "--n", "3", "--k", "4"]).command else { panic!() };
        assert!(matches!(resolve_knn(&a), Err(CliError::Config(_))));
    }

    #[test]
    fn file_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "trials = 3\nseed = 9\n[sort]\nd = 7\npatience = 4\n").unwrap();
        let p = path.to_str().unwrap();
        let (common, trials, c) = resolve_sort(&sort_args(&["--config", p, "--d", "6"])).unwrap();
        assert_eq!((common.seed, trials, c.d, c.patience), (9, 3, 6, 4));
        std::fs::write(&path, "trails = 3\n").unwrap();
        assert!(matches!(resolve_sort(&sort_args(&["--config", p])), Err(CliError::Config(_))));
    }

    #[test]
    fn task_tables_parse() {
        let text = "trials = 20\nseed = 7\nout_dir = \"runs/sort10\"\n[sort]\nd = 10\nepsilon = -12.0\n\
                    sigma_mode = { mode = \"fixed\", value = 1.0 }\n[knn]\nn = 20\nk = 3\n";
        let f: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(f.sort.unwrap().sigma_mode, SigmaMode::Fixed(1.0));
        assert_eq!(f.knn.map(|k| (k.n, k.k)), Some((20, 3)));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["perturbed-direct", "--bogus"]), ExitCode::from(1));
        assert_eq!(main_with_args(["perturbed-direct", "sort-train", "--trials", "0"]), ExitCode::from(1));
        assert_eq!(CliError::Run("x".into()).exit_code(), 2);
    }
}
