use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irfs::env::EncoderKind;
use irfs::harness::{self, comparison_csv, Mode, RunConfig};
use irfs::qpolicy::LearnConfig;
use irfs::trainers::TrainerKind;
use irfs::Error;

#[derive(Parser)]
#[command(name = "irfs", about = "Interactive reinforced feature selection experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one selection campaign and write its report and trace
    Run(RunArgs),
    /// Run several modes across seeds and emit a Best-Acc comparison CSV
    Compare(CompareArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// CSV dataset path
    #[arg(long)]
    data: PathBuf,
    /// Label column name or index (default: last column)
    #[arg(long)]
    label_col: Option<String>,
    /// Force header presence instead of auto-detection
    #[arg(long)]
    has_header: Option<bool>,
    /// Exploration steps L
    #[arg(long, default_value_t = 1500)]
    steps: usize,
    /// Transfer point T (default: L/3)
    #[arg(long)]
    transfer: Option<usize>,
    /// Train fraction of the split
    #[arg(long, default_value_t = 0.9)]
    split: f64,
    /// Quantile bins for mutual information
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Subset size for one-shot selectors (default: N/2)
    #[arg(long)]
    k: Option<usize>,
    /// Probability of the greedy action
    #[arg(long, default_value_t = 0.9)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// State encoder: meta or graph
    #[arg(long, default_value = "meta")]
    encoder: String,
    /// Hybrid phase order, e.g. "kbest,dtree"
    #[arg(long, default_value = "kbest,dtree")]
    trainer_order: String,
    /// Output directory for reports and traces
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Save agent networks to this file after the run
    #[arg(long)]
    save: Option<PathBuf>,
    /// Load agent networks from this file before the run
    #[arg(long)]
    load: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated list of modes
    #[arg(long, value_delimiter = ',')]
    modes: Vec<Mode>,
    /// Comma-separated list of seeds
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Best-Acc checkpoints, in steps (default: final step)
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
}

fn parse_trainer_order(s: &str) -> Result<(TrainerKind, TrainerKind), Error> {
    let parse_one = |t: &str| match t.trim() {
        "kbest" => Ok(TrainerKind::Kbest),
        "dtree" => Ok(TrainerKind::Dtree),
        other => Err(Error::Config(format!("unknown trainer {other:?}"))),
    };
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("trainer order {s:?} must name two trainers")));
    }
    Ok((parse_one(parts[0])?, parse_one(parts[1])?))
}

fn build_config(common: &CommonArgs, mode: Mode, seed: u64) -> Result<RunConfig, Error> {
    let encoder = match common.encoder.as_str() {
        "meta" => EncoderKind::Meta,
        "graph" => EncoderKind::Graph,
        other => return Err(Error::Config(format!("unknown encoder {other:?}"))),
    };
    let mut cfg = RunConfig::new(common.data.clone(), mode);
    cfg.label_col = common.label_col.clone();
    cfg.has_header = common.has_header;
    cfg.steps = common.steps;
    cfg.transfer = common.transfer;
    cfg.seed = seed;
    cfg.split_fraction = common.split;
    cfg.bins = common.bins;
    cfg.k = common.k;
    cfg.learn = LearnConfig {
        gamma: common.gamma,
        epsilon: common.epsilon,
        batch_size: common.batch,
        learning_rate: common.lr,
        ..LearnConfig::default()
    };
    cfg.encoder = encoder;
    cfg.trainer_order = parse_trainer_order(&common.trainer_order)?;
    cfg.out_dir = common.out.clone();
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Range(_) => 2,
        Error::Io(_) | Error::Parse { .. } | Error::Schema(_) | Error::Label(_) => 3,
        _ => 4,
    }
}

fn real_main() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let mut cfg = build_config(&args.common, args.mode, args.seed)?;
            cfg.save = args.save;
            cfg.load = args.load;
            let report = harness::run(&cfg)?;
            println!(
                "mode={} seed={} steps={} best_acc={:.4} subset={:?} ({:.1}s)",
                cfg.mode,
                cfg.seed,
                report.steps.len(),
                report.best_acc,
                report.best_subset.indices,
                report.wall_clock_secs
            );
        }
        Command::Compare(args) => {
            if args.modes.is_empty() {
                return Err(Error::Config("compare needs at least one --modes entry".into()));
            }
            let configs: Vec<RunConfig> = args
                .modes
                .iter()
                .map(|&m| build_config(&args.common, m, args.seeds[0]))
                .collect::<Result<_, _>>()?;
            let checkpoints = if args.checkpoints.is_empty() {
                vec![args.common.steps]
            } else {
                args.checkpoints.clone()
            };
            let rows = harness::compare(&configs, &args.seeds, &checkpoints)?;
            let csv = comparison_csv(&rows);
            if let Some(dir) = &args.common.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("comparison.csv"), &csv)?;
            }
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
