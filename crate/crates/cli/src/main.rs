mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use protclust::synth::PlantedConfig;

use crate::commands::{report_path, EvalInputs};
use crate::config::{RunConfig, Settings};
use crate::error::Result;

/// Precise protein sequence clustering.
#[derive(Debug, Parser)]
#[command(name = "protclust", version)]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a dataset on this machine.
    Cluster(ClusterArgs),
    /// Coordinate a distributed clustering run.
    Controller(ControllerArgs),
    /// Serve work to a controller.
    Worker(WorkerArgs),
    /// All-against-all ground-truth similar pairs.
    Oracle(OracleArgs),
    /// Similar pairs found by aligning within clusters.
    Extract(ExtractArgs),
    /// Recall of found pairs against the ground truth.
    Eval(EvalArgs),
    /// Cluster size statistics.
    Stats(StatsArgs),
    /// Generate a synthetic dataset of mutated sequence families.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct InputArgs {
    /// FASTA input; repeat to concatenate several files.
    #[arg(short, long = "input", value_name = "FASTA")]
    input: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
struct ScoringArgs {
    /// Substitution matrix: `pam250` or a matrix file.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    gap_open: Option<i32>,
    #[arg(long)]
    gap_extend: Option<i32>,
    /// Minimum score of a similar pair.
    #[arg(long)]
    similarity: Option<i32>,
    /// Minimum representative score for a full merge.
    #[arg(long)]
    full_merge: Option<i32>,
    /// Uncovered residues allowed in an absorbed representative.
    #[arg(long)]
    max_uncovered: Option<usize>,
}

impl ScoringArgs {
    fn settings(&self, input: &InputArgs) -> Settings {
        Settings {
            input: (!input.input.is_empty()).then(|| input.input.clone()),
            matrix: self.matrix.clone(),
            gap_open: self.gap_open,
            gap_extend: self.gap_extend,
            similarity: self.similarity,
            full_merge: self.full_merge,
            max_uncovered: self.max_uncovered,
            ..Settings::default()
        }
    }
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(short, long)]
    threads: Option<usize>,
    /// Target cost of one partial merge, in residue-pair cells.
    #[arg(long)]
    granularity: Option<u64>,
    /// Cluster file to write.
    #[arg(short, long)]
    out: PathBuf,
    /// JSON run report; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ControllerArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Address to accept workers on, e.g. `:9000` or `127.0.0.1:0`.
    #[arg(long)]
    listen: Option<String>,
    /// Minimum number of clusters per batch task.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    granularity: Option<u64>,
    /// Give up after this many seconds without any registered worker.
    #[arg(long)]
    worker_wait: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WorkerArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Controller address.
    #[arg(long)]
    connect: Option<String>,
    #[arg(short, long)]
    threads: Option<usize>,
    /// Optional JSON report of the work done.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Exit abruptly after this many work items.
    #[arg(long, hide = true)]
    fail_after: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(short, long)]
    threads: Option<usize>,
    /// Pair file to write.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Cluster file produced by `cluster` or `controller`.
    #[arg(long)]
    clusters: PathBuf,
    #[arg(short, long)]
    threads: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Pair file from `oracle`.
    #[arg(long)]
    truth: PathBuf,
    /// Pair file from `extract`.
    #[arg(long)]
    found: PathBuf,
    /// Run report of the clustering, for alignment accounting.
    #[arg(long)]
    cluster_report: Option<PathBuf>,
    /// Run report of the extraction, for alignment accounting.
    #[arg(long)]
    extract_report: Option<PathBuf>,
    /// Write the JSON here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    clusters: PathBuf,
    /// Size histogram as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of seed sequences.
    #[arg(long, default_value_t = 100)]
    families: usize,
    /// Mutated copies per seed; the seed itself is not emitted.
    #[arg(long, default_value_t = 10)]
    copies: usize,
    #[arg(long, default_value_t = 100)]
    min_len: usize,
    #[arg(long, default_value_t = 200)]
    max_len: usize,
    /// Lowest per-copy substitution rate.
    #[arg(long, default_value_t = 0.05)]
    min_rate: f64,
    /// Highest per-copy substitution rate.
    #[arg(long, default_value_t = 0.15)]
    max_rate: f64,
    /// Keep family members adjacent instead of shuffling the records.
    #[arg(long)]
    no_shuffle: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Cluster(a) => {
            let flags = Settings { threads: a.threads, granularity: a.granularity, ..a.scoring.settings(&a.input) };
            let report = report_path(&a.out, a.report.as_deref());
            let cfg = RunConfig::resolve("cluster", flags, file)?.with_output("clusters", &a.out).with_output("report", &report);
            commands::cluster(&cfg, &a.out, &report)
        }
        Command::Controller(a) => {
            let flags = Settings {
                listen: a.listen,
                batch_size: a.batch_size,
                granularity: a.granularity,
                worker_wait_secs: a.worker_wait,
                ..a.scoring.settings(&a.input)
            };
            let report = report_path(&a.out, a.report.as_deref());
            let cfg =
                RunConfig::resolve("controller", flags, file)?.with_output("clusters", &a.out).with_output("report", &report);
            commands::controller(&cfg, &a.out, &report)
        }
        Command::Worker(a) => {
            let flags = Settings { connect: a.connect, threads: a.threads, ..a.scoring.settings(&a.input) };
            let mut cfg = RunConfig::resolve("worker", flags, file)?;
            if let Some(r) = &a.report {
                cfg = cfg.with_output("report", r);
            }
            commands::worker(&cfg, a.report.as_deref(), a.fail_after)
        }
        Command::Oracle(a) => {
            let flags = Settings { threads: a.threads, ..a.scoring.settings(&a.input) };
            let report = report_path(&a.out, a.report.as_deref());
            let cfg = RunConfig::resolve("oracle", flags, file)?.with_output("pairs", &a.out).with_output("report", &report);
            commands::oracle(&cfg, &a.out, &report)
        }
        Command::Extract(a) => {
            let flags = Settings { threads: a.threads, ..a.scoring.settings(&a.input) };
            let report = report_path(&a.out, a.report.as_deref());
            let cfg = RunConfig::resolve("extract", flags, file)?.with_output("pairs", &a.out).with_output("report", &report);
            commands::extract(&cfg, &a.clusters, &a.out, &report)
        }
        Command::Eval(a) => {
            let flags = Settings { input: Some(vec![a.truth.clone(), a.found.clone()]), ..Settings::default() };
            let mut cfg = RunConfig::resolve("eval", flags, file)?;
            if let Some(o) = &a.out {
                cfg = cfg.with_output("report", o);
            }
            let inputs = EvalInputs {
                truth: &a.truth,
                found: &a.found,
                cluster_report: a.cluster_report.as_deref(),
                extract_report: a.extract_report.as_deref(),
            };
            commands::eval(&cfg, &inputs, a.out.as_deref())
        }
        Command::Stats(a) => {
            let flags = Settings { input: Some(vec![a.clusters.clone()]), ..Settings::default() };
            let mut cfg = RunConfig::resolve("stats", flags, file)?;
            if let Some(o) = &a.out {
                cfg = cfg.with_output("stats", o);
            }
            if let Some(c) = &a.csv {
                cfg = cfg.with_output("histogram", c);
            }
            commands::stats(&cfg, &a.clusters, a.csv.as_deref(), a.out.as_deref())
        }
        Command::Gen(a) => {
            let cfg = RunConfig::resolve("gen", Settings { seed: a.seed, ..Settings::default() }, file)?;
            let planted = PlantedConfig {
                families: a.families,
                copies: a.copies,
                min_len: a.min_len,
                max_len: a.max_len,
                min_rate: a.min_rate,
                max_rate: a.max_rate,
                shuffle: !a.no_shuffle,
                seed: cfg.seed,
            };
            commands::gen(&planted, &a.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // The panic hook has already printed the message.
        Err(_) => ExitCode::from(2),
    }
}
