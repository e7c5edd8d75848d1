//! The `rewardot` command line.
//!
//! Exit codes: 0 success, 1 invalid input (including usage errors), 2 numeric
//! failure, 3 non-convergence under `--strict`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::io::{self, write_atomic};
use crate::lab::{
    analyze_centroids, average_pairwise_distance, run_experiment, ExperimentConfig, ExperimentKind,
};
use crate::manifest::{unix_ms, RunManifest, RECORDS_FILE};
use crate::ot::{exact_wasserstein, sinkhorn_distance, GroundMetric, OtConfig, Solver};
use crate::reward::{compute_reward_variance, phi_embed, DiscreteMeasure, RewardTable};
use crate::selftest::run_selftest;

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "rewardot",
    version,
    about = "Reward ambiguity measured with optimal transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wasserstein distance between two measure files.
    Distance(DistanceArgs),
    /// Medoid and barycenter of an embedded reward set, or a centroid experiment.
    Centroid(CentroidArgs),
    /// Average pairwise distance and mean variance of a reward set.
    Ambiguity(AmbiguityArgs),
    /// Distance to the true reward as the number of demonstrations grows.
    Converge(ExperimentArgs),
    /// Distance between rewards inferred from clean and noisy demonstrations.
    Noise(ExperimentArgs),
    /// Average pairwise distance of equivalent rewards across grid sizes.
    DimSweep(ExperimentArgs),
    /// Checks that an output directory still matches its manifest.
    Verify { dir: PathBuf },
    /// Runs the oracle suite.
    Selftest,
    /// Prints the preset config for an experiment kind as JSON.
    Preset {
        /// converge, noise, dim_sweep or centroid.
        kind: String,
    },
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Ground metric file (`row,col,value`).
    #[arg(long)]
    metric: PathBuf,
    /// Wasserstein order.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_enum, default_value = "exact")]
    solver: SolverChoice,
    /// Entropic regularization for the Sinkhorn solver and the barycenter.
    #[arg(long, default_value_t = OtConfig::default().reg_epsilon)]
    epsilon: f64,
    /// Exit with code 3 if an iterative solver stops before converging.
    #[arg(long)]
    strict: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum SolverChoice {
    Exact,
    Sinkhorn,
}

impl From<SolverChoice> for Solver {
    fn from(s: SolverChoice) -> Self {
        match s {
            SolverChoice::Exact => Solver::Exact,
            SolverChoice::Sinkhorn => Solver::Sinkhorn,
        }
    }
}

#[derive(Args, Debug)]
struct DistanceArgs {
    first: PathBuf,
    second: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the optimal plan (`row,col,mass`) here.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CentroidArgs {
    /// Reward set file (`reward,state,action,value`).
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    set: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    metric: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Random barycenter starts for the spread estimate.
    #[arg(long, default_value_t = 4)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the centroid experiment described by this config instead.
    #[arg(long)]
    config: Option<PathBuf>,
    /// With a reward set: write the barycenter here. With a config: the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct AmbiguityArgs {
    set: PathBuf,
    #[arg(long)]
    metric: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Replaces the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strict: bool,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericFailure(_) | Error::GenerationFailure { .. } => EXIT_NUMERIC,
            Error::InvalidArgument(_) | Error::Parse(_) | Error::Io(_) => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn with_path(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure {
            message: format!("{}: {}", path.display(), f.message),
            ..f
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| with_path(path)(Error::Io(e)))
}

fn load_measure(path: &Path) -> Result<DiscreteMeasure, Failure> {
    io::measure_from_csv(&read(path)?).map_err(with_path(path))
}

fn load_metric(path: &Path) -> Result<GroundMetric, Failure> {
    io::metric_from_csv(&read(path)?).map_err(with_path(path))
}

fn load_reward_set(path: &Path) -> Result<Vec<RewardTable>, Failure> {
    io::reward_set_from_csv(&read(path)?).map_err(with_path(path))
}

/// Parses a config document; errors name the offending key.
pub fn parse_config(text: &str) -> crate::Result<ExperimentConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Parse(format!("config: {inner}"))
        } else {
            Error::Parse(format!("config key `{path}`: {inner}"))
        }
    })?;
    config.validate().map_err(|e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("config key {m}")),
        other => other,
    })?;
    Ok(config)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    parse_config(&read(path)?).map_err(with_path(path))
}

fn embed(rewards: &[RewardTable], temperature: f64) -> Result<Vec<DiscreteMeasure>, Failure> {
    Ok(rewards
        .iter()
        .map(|r| phi_embed(r, temperature))
        .collect::<crate::Result<Vec<_>>>()?)
}

fn check_support(measures: &[DiscreteMeasure], metric: &GroundMetric) -> Result<(), Failure> {
    if let Some(m) = measures.iter().find(|m| m.len() != metric.size()) {
        return Err(Failure {
            code: EXIT_INVALID,
            message: format!(
                "measure has {} points but the metric has {}",
                m.len(),
                metric.size()
            ),
        });
    }
    Ok(())
}

fn distance(args: DistanceArgs) -> Result<i32, Failure> {
    let a = load_measure(&args.first)?;
    let b = load_measure(&args.second)?;
    let metric = load_metric(&args.solver.metric)?;
    check_support(&[a.clone(), b.clone()], &metric)?;
    let p = args.solver.p;
    let (value, converged, plan) = match Solver::from(args.solver.solver) {
        Solver::Exact => {
            let r = exact_wasserstein(&a, &b, &metric, p)?;
            (r.distance, true, r.plan)
        }
        Solver::Sinkhorn => {
            let config = OtConfig {
                order_p: p,
                reg_epsilon: args.solver.epsilon,
                ..OtConfig::default()
            };
            let r = sinkhorn_distance(&a, &b, &metric, &config)?;
            (r.value, r.converged, r.plan)
        }
    };
    if let Some(path) = &args.plan_out {
        write_atomic(path, &io::plan_to_csv(&plan)).map_err(with_path(path))?;
    }
    say!("{value:?}");
    if !converged {
        eprintln!("warning: sinkhorn stopped at the iteration cap");
        if args.solver.strict {
            return Ok(EXIT_NOT_CONVERGED);
        }
    }
    Ok(EXIT_OK)
}

fn ambiguity(args: AmbiguityArgs) -> Result<i32, Failure> {
    let rewards = load_reward_set(&args.set)?;
    let metric = load_metric(&args.metric)?;
    let measures = embed(&rewards, args.temperature)?;
    check_support(&measures, &metric)?;
    let delta = average_pairwise_distance(&measures, &metric, args.p)?;
    let variance = compute_reward_variance(&rewards)?;
    say!("delta_d {delta:?}");
    say!("variance_d {variance:?}");
    Ok(EXIT_OK)
}

fn centroid(args: CentroidArgs) -> Result<i32, Failure> {
    if let Some(config) = &args.config {
        let experiment = ExperimentArgs {
            config: config.clone(),
            out_dir: args.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            seed: None,
            strict: args.strict,
        };
        return experiment_command(ExperimentKind::Centroid, experiment);
    }
    let (Some(set), Some(metric_path)) = (&args.set, &args.metric) else {
        return Err(Failure {
            code: EXIT_INVALID,
            message: "a reward set and --metric are required".into(),
        });
    };
    let rewards = load_reward_set(set)?;
    let metric = load_metric(metric_path)?;
    let measures = embed(&rewards, args.temperature)?;
    check_support(&measures, &metric)?;
    let ot = OtConfig {
        order_p: args.p,
        reg_epsilon: args.epsilon,
        ..OtConfig::default()
    };
    let report = analyze_centroids(&measures, &metric, &ot, args.starts, args.seed)?;
    say!("medoid_index {}", report.medoid_index);
    say!("medoid_objective {:?}", report.medoid_objective);
    say!("barycenter_objective {:?}", report.barycenter_objective);
    say!("barycenter_converged {}", report.barycenter_converged);
    say!("multistart_spread {:?}", report.multistart_spread);
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| with_path(dir)(Error::Io(e)))?;
        let path = dir.join("barycenter.csv");
        write_atomic(&path, &io::measure_to_csv(&report.barycenter)).map_err(with_path(&path))?;
    }
    if args.strict && !report.barycenter_converged {
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn experiment_command(kind: ExperimentKind, args: ExperimentArgs) -> Result<i32, Failure> {
    let mut config = load_config(&args.config)?;
    if config.kind != kind {
        return Err(Failure {
            code: EXIT_INVALID,
            message: format!(
                "{}: config key `kind` is {}, expected {kind}",
                args.config.display(),
                config.kind
            ),
        });
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let started = unix_ms();
    let records = run_experiment(&config)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| with_path(&args.out_dir)(Error::Io(e)))?;
    let text = io::records_to_csv(&records);
    let records_path = args.out_dir.join(RECORDS_FILE);
    write_atomic(&records_path, &text).map_err(with_path(&records_path))?;
    let mut manifest = RunManifest::new(&config, started);
    manifest.add_file(RECORDS_FILE, &text);
    manifest.finished_unix_ms = unix_ms();
    manifest
        .write(&args.out_dir)
        .map_err(with_path(&args.out_dir))?;

    let unconverged = records.iter().filter(|r| !r.converged).count();
    say!(
        "{} records written to {}",
        records.len(),
        records_path.display()
    );
    if unconverged > 0 {
        eprintln!("warning: {unconverged} records did not converge or failed");
        if args.strict {
            return Ok(EXIT_NOT_CONVERGED);
        }
    }
    Ok(EXIT_OK)
}

fn verify(dir: &Path) -> Result<i32, Failure> {
    let manifest = RunManifest::read(dir).map_err(with_path(dir))?;
    let mismatched = manifest.verify(dir).map_err(with_path(dir))?;
    if mismatched.is_empty() {
        say!("ok: {} files match the manifest", manifest.files.len());
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_INVALID,
            message: format!("digest mismatch: {}", mismatched.join(", ")),
        })
    }
}

fn preset(kind: &str) -> Result<i32, Failure> {
    let kind = ExperimentKind::parse(kind).ok_or_else(|| Failure {
        code: EXIT_INVALID,
        message: format!("unknown experiment kind `{kind}`"),
    })?;
    let text = serde_json::to_string_pretty(&ExperimentConfig::new(kind))
        .map_err(|e| Failure::from(Error::Parse(e.to_string())))?;
    say!("{text}");
    Ok(EXIT_OK)
}

fn selftest() -> i32 {
    let outcomes = run_selftest(|o| {
        say!(
            "{} {} ({} ms): {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.millis,
            o.detail
        );
    });
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    say!("{} checks, {failed} failed", outcomes.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INVALID,
            };
        }
    };
    let result = match cli.command {
        Command::Distance(a) => distance(a),
        Command::Centroid(a) => centroid(a),
        Command::Ambiguity(a) => ambiguity(a),
        Command::Converge(a) => experiment_command(ExperimentKind::Converge, a),
        Command::Noise(a) => experiment_command(ExperimentKind::Noise, a),
        Command::DimSweep(a) => experiment_command(ExperimentKind::DimSweep, a),
        Command::Verify { dir } => verify(&dir),
        Command::Selftest => Ok(selftest()),
        Command::Preset { kind } => preset(&kind),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
