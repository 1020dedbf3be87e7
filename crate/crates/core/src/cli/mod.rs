//! The `proxreward` command line: `label`, `eval`, `bench`, `inspect`.

mod config;

pub use config::LabelOverrides;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{dataset_stats, decode_dataset, decode_labeled, load_dataset, save_labeled, DatasetManifest};
use crate::error::Error;
use crate::exec::Execution;
use crate::harness::{
    expert_demo, gen_pointmass_suite, gridworld_imitation, ranking_fidelity_with, timing_probe, write_timing_csv,
    Gridworld, PointMassTask, ProbeMethod, QLearnerConfig, RewardSource,
};
use crate::label::{label_dataset, LabelConfig};
use crate::ot::SinkhornConfig;
use crate::reward::Method;
use crate::traj::DistanceMetric;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_THRESHOLD: u8 = 4;

pub const WORKERS_ENV: &str = "PROXREWARD_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "proxreward", version, about = "Reward labeling from expert demonstrations")]
pub struct Cli {
    /// Worker threads for trajectory fan-out (1 runs sequentially).
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Label every trajectory of a dataset against its expert(s).
    Label(LabelArgs),
    /// Run a desk-scale evaluation suite.
    Eval(EvalArgs),
    /// Time the labeling methods over increasing lengths.
    Bench(BenchArgs),
    /// Print a dataset's manifest and statistics.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// TOML file with label settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: LabelOverrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Pointmass,
    Gridworld,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Comma-separated methods; controls `random`, `constant` and
    /// `ground-truth` are also accepted.
    #[arg(long, alias = "method", value_delimiter = ',', value_parser = parse_source, default_value = "seg-match")]
    pub methods: Vec<SourceName>,
    /// Number of seeded point-mass suites.
    #[arg(long, default_value_t = 20)]
    pub suites: u64,
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    #[arg(long, default_value_t = 5000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    pub min_spearman: f64,
    #[arg(long, default_value_t = 0.9)]
    pub min_success: f64,
    /// Ceiling for the random-reward control's success rate.
    #[arg(long, default_value_t = 0.2)]
    pub max_control_success: f64,
    /// CSV of per-run results.
    #[arg(long, default_value = "eval.csv")]
    pub out: PathBuf,
    /// Directory for gridworld learning curves, one CSV per method.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "200,400,800")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Comma-separated probes (default: all).
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<ProbeMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timing CSV; rows are appended under a new run id.
    #[arg(long, default_value = "timings.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub input: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SourceName {
    Method(Method),
    Random,
    Constant,
    GroundTruth,
}

impl SourceName {
    fn name(self) -> &'static str {
        match self {
            SourceName::Method(m) => m.name(),
            SourceName::Random => "random",
            SourceName::Constant => "constant",
            SourceName::GroundTruth => "ground-truth",
        }
    }
}

fn parse_source(s: &str) -> Result<SourceName, String> {
    match s {
        "random" => Ok(SourceName::Random),
        "constant" => Ok(SourceName::Constant),
        "ground-truth" => Ok(SourceName::GroundTruth),
        other => other
            .parse::<Method>()
            .map(SourceName::Method)
            .map_err(|e| e.to_string()),
    }
}

/// A failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::UnsupportedMetric(_) => EXIT_USAGE,
        e if e.is_solver_failure() => EXIT_SOLVER,
        _ => EXIT_DATA,
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let exec = configure_workers(cli.workers)?;
    match cli.command {
        Command::Label(a) => cmd_label(&a, exec),
        Command::Eval(a) => cmd_eval(&a, exec),
        Command::Bench(a) => cmd_bench(&a),
        Command::Inspect(a) => cmd_inspect(&a),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

fn configure_workers(workers: Option<usize>) -> Result<Execution, Failure> {
    match workers {
        None => Ok(Execution::Parallel),
        Some(0) => Err(usage("--workers must be >= 1")),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            // A second call in the same process keeps the first pool.
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::debug!("global pool already set: {e}");
            }
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
    }
}

/// Merge defaults, the optional TOML file and flags into a checked config.
pub fn resolve_label_config(config: Option<&PathBuf>, flags: &LabelOverrides) -> crate::Result<LabelConfig> {
    let file = match config {
        Some(p) => LabelOverrides::from_toml_file(p)?,
        None => LabelOverrides::default(),
    };
    file.layered(flags).resolve()
}

pub fn cmd_label(a: &LabelArgs, exec: Execution) -> Result<(), Failure> {
    let cfg = resolve_label_config(a.config.as_ref(), &a.overrides)?;
    let shown = toml::to_string(&cfg).map_err(|e| usage(format!("cannot render config: {e}")))?;
    eprintln!("resolved config:\n{shown}");
    let (manifest, trajs) = load_dataset(&a.input)?;
    let labeled = label_dataset(&cfg, &manifest, &trajs, exec)?;
    save_labeled(&labeled, &a.output)?;
    eprintln!(
        "labeled {} trajectories with {} -> {}",
        labeled.trajectories.len(),
        cfg.method,
        a.output.display()
    );
    Ok(())
}

/// Point-mass costs are euclidean distances in world units (up to ~11), so the
/// entropic epsilon is raised there; gridworld cosine costs lie in [0, 1].
const POINTMASS_EPSILON: f64 = 0.1;

fn eval_config(m: Method, metric: DistanceMetric, epsilon: f64) -> LabelConfig {
    let mut c = LabelConfig::for_method(m);
    c.metric = metric;
    c.lenient = true;
    c.sinkhorn.epsilon = epsilon;
    c.sinkhorn.max_iterations = 10_000;
    c
}

fn source_for(s: SourceName, metric: DistanceMetric, epsilon: f64) -> RewardSource {
    match s {
        SourceName::Method(m) => RewardSource::Method(eval_config(m, metric, epsilon)),
        SourceName::Random => RewardSource::Random,
        SourceName::Constant => RewardSource::Constant(1.0),
        SourceName::GroundTruth => RewardSource::GroundTruth,
    }
}

pub fn cmd_eval(a: &EvalArgs, exec: Execution) -> Result<(), Failure> {
    if a.methods.is_empty() {
        return Err(usage("no methods given"));
    }
    let mut csv = String::from("suite,method,seed,metric,value\n");
    let mut summary = String::new();
    let mut failures = Vec::new();
    match a.suite {
        Suite::Pointmass => {
            if a.suites == 0 {
                return Err(usage("--suites must be >= 1"));
            }
            for &name in &a.methods {
                let source = source_for(name, DistanceMetric::Euclidean, POINTMASS_EPSILON);
                let mut values = Vec::new();
                for k in 0..a.suites {
                    let seed = a.seed + k;
                    let suite = gen_pointmass_suite(
                        &PointMassTask {
                            seed,
                            ..Default::default()
                        },
                        a.agents,
                    )?;
                    match ranking_fidelity_with(&source, &suite, exec) {
                        Ok(rho) => {
                            writeln!(csv, "pointmass,{},{seed},spearman,{rho:.6}", name.name()).expect("string write");
                            values.push(rho);
                        }
                        Err(Error::Degenerate(msg)) => {
                            writeln!(csv, "pointmass,{},{seed},spearman,nan", name.name()).expect("string write");
                            log::info!("{}: {msg}", name.name());
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
                writeln!(
                    summary,
                    "pointmass {:<14} spearman min {min:.4} mean {mean:.4} over {} suites",
                    name.name(),
                    values.len()
                )
                .expect("string write");
                if let SourceName::Method(_) = name {
                    if values.len() as u64 != a.suites || min < a.min_spearman {
                        failures.push(format!("{}: spearman min {min:.4} < {}", name.name(), a.min_spearman));
                    }
                }
            }
        }
        Suite::Gridworld => {
            let env = Gridworld::default();
            let expert = expert_demo(&env)?;
            let qcfg = QLearnerConfig {
                episodes: a.episodes,
                seed: a.seed,
                ..Default::default()
            };
            if let Some(dir) = &a.curves {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
            }
            for &name in &a.methods {
                let source = source_for(name, DistanceMetric::Cosine, SinkhornConfig::default().epsilon);
                let report = gridworld_imitation(&source, &env, &expert, &qcfg)?;
                let rate = report.success_rate;
                writeln!(csv, "gridworld,{},{},success_rate,{rate:.6}", name.name(), a.seed).expect("string write");
                writeln!(summary, "gridworld {:<14} success {rate:.2}", name.name()).expect("string write");
                if let Some(dir) = &a.curves {
                    std::fs::write(dir.join(format!("{}.csv", name.name())), report.curve_csv())
                        .map_err(Error::from)?;
                }
                match name {
                    SourceName::Method(_) | SourceName::GroundTruth if rate < a.min_success => {
                        failures.push(format!("{}: success {rate:.2} < {}", name.name(), a.min_success));
                    }
                    SourceName::Random if rate > a.max_control_success => {
                        failures.push(format!("random control: success {rate:.2} > {}", a.max_control_success));
                    }
                    _ => {}
                }
            }
        }
    }
    std::fs::write(&a.out, csv).map_err(Error::from)?;
    print!("{summary}");
    println!("results written to {}", a.out.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_THRESHOLD,
            message: format!("threshold failures:\n  {}", failures.join("\n  ")),
        })
    }
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), Failure> {
    let methods = if a.methods.is_empty() {
        ProbeMethod::ALL.to_vec()
    } else {
        a.methods.clone()
    };
    let mut rows = Vec::new();
    for m in methods {
        let r = timing_probe(m, &a.sizes, a.dim, a.seed)?;
        for row in &r {
            println!(
                "{:<16} T={:<6} d={} median {:.3e} s",
                m, row.t, row.d, row.median_seconds
            );
        }
        rows.extend(r);
    }
    let run_id = write_timing_csv(&a.out, &rows)?;
    println!("appended {} rows as run {run_id} to {}", rows.len(), a.out.display());
    Ok(())
}

fn print_manifest(m: &DatasetManifest) {
    println!("name:           {}", m.name);
    println!("state_dim:      {}", m.state_dim);
    println!("trajectories:   {}", m.trajectory_count);
    println!("experts:        {}", m.expert_ids.join(", "));
    println!("metric:         {}", m.distance_metric.name());
    println!("created_at:     {}", m.created_at);
}

pub fn cmd_inspect(a: &InspectArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.input).map_err(Error::from)?;
    if let Ok(ds) = decode_labeled(&text) {
        print_manifest(&ds.manifest);
        let p = &ds.provenance;
        println!("method:         {}", p.method);
        println!("stage:          {:?}", p.stage);
        println!("config_hash:    {}", p.config_hash);
        println!("seed:           {}", p.seed);
        println!("tool_version:   {}", p.tool_version);
        let trajs: Vec<_> = ds.trajectories.iter().map(|t| t.trajectory.clone()).collect();
        let rewards: Vec<_> = ds.trajectories.iter().map(|t| t.rewards.clone()).collect();
        let s = dataset_stats(&trajs, &rewards)?;
        println!("return range:   [{:.6}, {:.6}]", s.min_return, s.max_return);
        println!(
            "step rewards:   mean {:.6} min {:.6} max {:.6}",
            s.step_mean, s.step_min, s.step_max
        );
        print_lengths(&s.length_histogram);
        if s.degenerate {
            println!("warning: every trajectory has the same return");
        }
        return Ok(());
    }
    let (m, trajs) = decode_dataset(&text)?;
    print_manifest(&m);
    let mut hist = std::collections::BTreeMap::new();
    for t in &trajs {
        *hist.entry(t.len()).or_insert(0usize) += 1;
    }
    print_lengths(&hist);
    Ok(())
}

fn print_lengths(h: &std::collections::BTreeMap<usize, usize>) {
    let parts: Vec<String> = h.iter().map(|(len, n)| format!("{len}x{n}")).collect();
    println!("lengths:        {}", parts.join(" "));
}
