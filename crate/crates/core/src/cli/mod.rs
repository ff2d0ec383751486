//! Command-line front end behind the `sift-rls` binary.
//!
//! `run` feeds the benchmark (or a sample CSV) to the selected estimators and
//! writes metrics, trajectories and bound violations; `verify` runs the
//! invariant suites headlessly. Settings resolve as flags, then a flat
//! `key = value` config file, then `SIFT_RLS_SEED` for the seed, then defaults.

mod suites;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{regressor_upper_bound, sift_certificate, BoundKind, BoundsCertificate};
use crate::error::{Error, Result};
use crate::estimators::{
    Estimator, EstimatorState, ExpForgettingRls, NoForgettingRls, RegressionSample, SiftConfig,
    SiftRls,
};
use crate::harness::{
    compute_metrics, generate_scenario, read_samples_csv, simulate, write_metrics_csv,
    write_samples_csv, write_trajectory_csv, ScenarioConfig, TrueParams, PARAMS,
};

pub use suites::{run_suite, Suite, SuiteOutcome, VerifyOptions};

/// Environment variable consulted for the seed when neither a flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "SIFT_RLS_SEED";

/// Forgetting factor of the exponential-forgetting baseline unless overridden.
pub const DEFAULT_EF_LAMBDA: f64 = 0.95;

#[derive(Parser, Debug)]
#[command(
    name = "sift-rls",
    version,
    about = "Recursive least squares with subspace-of-information forgetting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run estimators on the benchmark or a sample file and write CSV results.
    Run(RunArgs),
    /// Run the invariant suites and report pass/fail per suite.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Subspace-of-information forgetting.
    Sift,
    /// Exponential forgetting.
    Ef,
    /// No forgetting.
    Nf,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Sift => "sift",
            EstimatorKind::Ef => "ef",
            EstimatorKind::Nf => "nf",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Three-phase benchmark with regressor, measurement and leakage noise.
    #[default]
    Default,
    /// Same phases with every noise source switched off.
    Noiseless,
}

#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Estimator to run; repeat to run several [default: sift, ef and nf]
    #[arg(long = "estimator", value_enum)]
    pub estimators: Vec<EstimatorKind>,
    /// Forgetting factor in (0, 1) for every selected forgetting estimator
    /// [default: 0.5 for sift, 0.95 for ef]
    #[arg(long, value_parser = parse_lambda)]
    pub lambda: Option<f64>,
    /// Singular-value truncation parameter; directions with σ ≥ √ε are kept [default: 1e-4]
    #[arg(long, value_parser = parse_epsilon)]
    pub epsilon: Option<f64>,
    /// Largest filtered rank updated through the matrix inversion lemma [default: 0]
    #[arg(long)]
    pub qmax: Option<usize>,
    /// Seed of the benchmark generator [default: $SIFT_RLS_SEED or 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of parameter estimates; phases keep their proportions [default: 1201]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Built-in scenario variant
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    /// Read samples from a CSV file instead of generating them
    #[arg(long, conflicts_with_all = ["scenario", "horizon"])]
    pub input: Option<PathBuf>,
    /// Output directory [default: sift-rls-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file with defaults for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct VerifyArgs {
    /// Suite to run; repeat to run several [default: all]
    #[arg(long = "suite", value_enum)]
    pub suites: Vec<Suite>,
    /// Seed of the randomized suites
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt the monitored state so the monitor suite must fail.
    #[arg(long, hide = true)]
    pub inject_perturbation: bool,
}

/// Where `run` takes its samples from.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSource {
    Builtin { kind: ScenarioKind, horizon: usize },
    Csv(PathBuf),
}

/// Fully resolved settings of `run`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub estimators: Vec<EstimatorKind>,
    pub sift: SiftConfig,
    pub ef_lambda: f64,
    pub seed: u64,
    pub source: ScenarioSource,
    pub out_dir: PathBuf,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or configuration; exit code 2.
    Usage(String),
    /// Anything that went wrong while running; exit code 1.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

fn parse_lambda(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!(
            "forgetting factor must lie in the open interval (0, 1), got {v}"
        ))
    }
}

fn parse_epsilon(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("epsilon must be positive and finite, got {v}"))
    }
}

fn parse_value<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a valid value"))
}

fn parse_enum<T: ValueEnum>(s: &str) -> std::result::Result<T, String> {
    T::from_str(s.trim(), true).map_err(|_| {
        let names: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value().map(|p| p.get_name().to_string()))
            .collect();
        format!("`{s}` is not one of {}", names.join(", "))
    })
}

/// Reads a flat `key = value` file into `RunArgs`; `#` starts a comment.
pub fn parse_config_file(text: &str) -> std::result::Result<RunArgs, String> {
    let mut args = RunArgs::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |m: String| format!("config line {}: {m}", idx + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected `key = value`, found `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "estimator" | "estimators" => {
                for name in value.split(',').filter(|s| !s.trim().is_empty()) {
                    args.estimators.push(parse_enum(name).map_err(at)?);
                }
            }
            "lambda" => args.lambda = Some(parse_lambda(value).map_err(at)?),
            "epsilon" => args.epsilon = Some(parse_epsilon(value).map_err(at)?),
            "qmax" => args.qmax = Some(parse_value(value).map_err(at)?),
            "seed" => args.seed = Some(parse_value(value).map_err(at)?),
            "horizon" => args.horizon = Some(parse_value(value).map_err(at)?),
            "scenario" => args.scenario = Some(parse_enum(value).map_err(at)?),
            "input" => args.input = Some(PathBuf::from(value)),
            "out" => args.out = Some(PathBuf::from(value)),
            other => return Err(at(format!("unknown key `{other}`"))),
        }
    }
    Ok(args)
}

impl RunConfig {
    /// Merges flags over `file` and `env_seed` over defaults.
    pub fn resolve(
        flags: &RunArgs,
        file: Option<&RunArgs>,
        env_seed: Option<&str>,
    ) -> std::result::Result<RunConfig, CliError> {
        let empty = RunArgs::default();
        let file = file.unwrap_or(&empty);
        fn pick<T: Clone>(a: &Option<T>, b: &Option<T>) -> Option<T> {
            a.clone().or_else(|| b.clone())
        }

        let mut estimators = if flags.estimators.is_empty() {
            file.estimators.clone()
        } else {
            flags.estimators.clone()
        };
        if estimators.is_empty() {
            estimators = vec![EstimatorKind::Sift, EstimatorKind::Ef, EstimatorKind::Nf];
        }
        let mut seen = Vec::new();
        estimators.retain(|e| {
            let fresh = !seen.contains(e);
            seen.push(*e);
            fresh
        });

        let lambda = pick(&flags.lambda, &file.lambda);
        let defaults = SiftConfig::default();
        let sift = SiftConfig::new(
            lambda.unwrap_or(defaults.lambda),
            pick(&flags.epsilon, &file.epsilon).unwrap_or(defaults.epsilon),
            pick(&flags.qmax, &file.qmax).unwrap_or(defaults.q_max),
        )
        .map_err(|e| CliError::Usage(e.to_string()))?;

        let seed = match pick(&flags.seed, &file.seed) {
            Some(s) => s,
            None => match env_seed {
                Some(s) => s.trim().parse().map_err(|_| {
                    CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))
                })?,
                None => 0,
            },
        };

        // a flag-level input overrides a config-level scenario and vice versa
        let flag_builtin = flags.scenario.is_some() || flags.horizon.is_some();
        let input = if flag_builtin {
            flags.input.clone()
        } else {
            pick(&flags.input, &file.input)
        };
        let source = match input {
            Some(path) => ScenarioSource::Csv(path),
            None => {
                let horizon = pick(&flags.horizon, &file.horizon)
                    .unwrap_or(ScenarioConfig::default().horizon);
                ScenarioConfig::default()
                    .with_horizon(horizon)
                    .validate()
                    .map_err(|e| CliError::Usage(format!("horizon {horizon}: {e}")))?;
                ScenarioSource::Builtin {
                    kind: pick(&flags.scenario, &file.scenario).unwrap_or_default(),
                    horizon,
                }
            }
        };

        Ok(RunConfig {
            estimators,
            sift,
            ef_lambda: lambda.unwrap_or(DEFAULT_EF_LAMBDA),
            seed,
            source,
            out_dir: pick(&flags.out, &file.out).unwrap_or_else(|| PathBuf::from("sift-rls-out")),
        })
    }

    /// Scenario settings of a built-in source.
    pub fn scenario(&self) -> Option<ScenarioConfig> {
        match &self.source {
            ScenarioSource::Builtin { kind, horizon } => {
                let cfg = ScenarioConfig::with_seed(self.seed).with_horizon(*horizon);
                Some(match kind {
                    ScenarioKind::Default => cfg,
                    ScenarioKind::Noiseless => cfg.noiseless(),
                })
            }
            ScenarioSource::Csv(_) => None,
        }
    }
}

/// What `run` produced.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub certificate: Option<BoundsCertificate>,
    pub violations: usize,
    pub files: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_samples(cfg: &RunConfig) -> Result<Vec<RegressionSample>> {
    match &cfg.source {
        ScenarioSource::Csv(path) => {
            let file =
                File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let samples = read_samples_csv(file)?;
            if samples.is_empty() {
                return Err(Error::Parse {
                    line: 2,
                    message: format!("{} holds no samples", path.display()),
                });
            }
            Ok(samples)
        }
        ScenarioSource::Builtin { .. } => generate_scenario(&cfg.scenario().expect("builtin")),
    }
}

fn build(kind: EstimatorKind, n: usize, cfg: &RunConfig) -> Result<Box<dyn Estimator>> {
    let state = EstimatorState::zeroed(n);
    Ok(match kind {
        EstimatorKind::Sift => Box::new(SiftRls::new(state, cfg.sift)),
        EstimatorKind::Ef => Box::new(ExpForgettingRls::new(state, cfg.ef_lambda)?),
        EstimatorKind::Nf => Box::new(NoForgettingRls::new(state)),
    })
}

/// Executes `run`, writing CSVs under `cfg.out_dir` and a report to `out`.
pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write) -> std::result::Result<RunSummary, CliError> {
    let samples = load_samples(cfg)?;
    let (p, n) = (samples[0].rows(), samples[0].cols());
    if cfg.sift.q_max > p.min(n) {
        return Err(CliError::Usage(format!(
            "qmax {} exceeds min(p, n) = {} of the samples",
            cfg.sift.q_max,
            p.min(n)
        )));
    }
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", cfg.out_dir.display())))?;
    let io = |e: std::io::Error| Error::Io(e.to_string());

    let mut summary = RunSummary::default();
    let path = cfg.out_dir.join("samples.csv");
    write_samples_csv(&samples, create(&path)?)?;
    summary.files.push(path);

    // metrics need the benchmark's shape; truth is only known when generated here
    let scenario = cfg.scenario();
    let metrics_cfg = match &scenario {
        Some(s) => Some(*s),
        None if n == PARAMS => {
            let s = ScenarioConfig::default().with_horizon(samples.len() + 1);
            s.validate().is_ok().then_some(s)
        }
        None => None,
    };
    let truth = scenario.as_ref().map(|_| TrueParams);

    writeln!(out, "{} samples, p = {p}, n = {n}", samples.len()).map_err(io)?;
    for &kind in &cfg.estimators {
        let mut est = build(kind, n, cfg)?;
        let cert = if kind == EstimatorKind::Sift {
            let beta = regressor_upper_bound(&samples)?;
            Some(sift_certificate(&cfg.sift, &est.state().r, Some(beta))?)
        } else {
            None
        };
        let run = simulate(est.as_mut(), &samples, cert.as_ref())?;
        let name = kind.as_str();

        let path = cfg.out_dir.join(format!("trajectory_{name}.csv"));
        write_trajectory_csv(&run.trajectory, create(&path)?)?;
        summary.files.push(path);
        if let Some(mc) = &metrics_cfg {
            let records = compute_metrics(&run.trajectory, truth.as_ref(), mc)?;
            let path = cfg.out_dir.join(format!("metrics_{name}.csv"));
            write_metrics_csv(&records, create(&path)?)?;
            summary.files.push(path);
        }

        let rho_max = run.trajectory.rho_p.iter().copied().fold(0.0, f64::max);
        let theta = est.theta();
        let theta: Vec<String> = theta.iter().map(|x| format!("{x:.4}")).collect();
        writeln!(
            out,
            "{name}: final theta [{}], max rho(P) = {rho_max:.4e}",
            theta.join(", ")
        )
        .map_err(io)?;

        if let Some(cert) = cert {
            let path = cfg.out_dir.join(format!("violations_{name}.csv"));
            run.violations.write_csv(create(&path)?)?;
            summary.files.push(path);
            writeln!(out, "{name} certificate:").map_err(io)?;
            for line in cert.to_string().lines() {
                writeln!(out, "  {line}").map_err(io)?;
            }
            let states = run.trajectory.len();
            if run.violations.is_empty() {
                writeln!(
                    out,
                    "{name} monitor: PASS (0 violations over {states} states)"
                )
                .map_err(io)?;
            } else {
                let kinds: Vec<&str> = [
                    BoundKind::InformationMin,
                    BoundKind::InformationMax,
                    BoundKind::CovarianceMin,
                    BoundKind::CovarianceMax,
                    BoundKind::InnerCondition,
                ]
                .into_iter()
                .filter(|k| run.violations.flags(*k))
                .map(BoundKind::as_str)
                .collect();
                writeln!(
                    out,
                    "{name} monitor: FAIL ({} violations over {states} states: {})",
                    run.violations.len(),
                    kinds.join(", ")
                )
                .map_err(io)?;
            }
            summary.violations += run.violations.len();
            summary.certificate = Some(cert);
        }
    }
    writeln!(
        out,
        "wrote {} files to {}",
        summary.files.len(),
        cfg.out_dir.display()
    )
    .map_err(io)?;
    Ok(summary)
}

/// Executes `verify`; returns the outcome of every selected suite.
pub fn cmd_verify(
    args: &VerifyArgs,
    out: &mut dyn Write,
) -> std::result::Result<Vec<SuiteOutcome>, CliError> {
    let suites = if args.suites.is_empty() {
        Suite::value_variants().to_vec()
    } else {
        args.suites.clone()
    };
    let opts = VerifyOptions {
        seed: args.seed,
        inject_perturbation: args.inject_perturbation,
        print_trace: !args.suites.is_empty(),
    };
    let io = |e: std::io::Error| Error::Io(e.to_string());
    let mut outcomes = Vec::with_capacity(suites.len());
    for suite in suites {
        let outcome = run_suite(suite, &opts, out)?;
        writeln!(
            out,
            "{:<15} {}  {}",
            suite.as_str(),
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        )
        .map_err(io)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> std::result::Result<i32, CliError> {
    match cli.command {
        Command::Run(flags) => {
            let file = match &flags.config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    Some(parse_config_file(&text).map_err(CliError::Usage)?)
                }
                None => None,
            };
            let env_seed = std::env::var(SEED_ENV).ok();
            let cfg = RunConfig::resolve(&flags, file.as_ref(), env_seed.as_deref())?;
            let summary = cmd_run(&cfg, out)?;
            Ok(if summary.violations == 0 { 0 } else { 1 })
        }
        Command::Verify(args) => {
            let outcomes = cmd_verify(&args, out)?;
            Ok(if outcomes.iter().all(|o| o.passed) {
                0
            } else {
                1
            })
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("sift-rls: {e}");
            e.exit_code()
        }
    }
}
