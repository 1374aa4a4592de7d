//! Experiment runner: configuration, single-run campaigns, checkpoint
//! save/load, trace/report output files and the multi-seed comparison table.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{dtrfe_select, kbest_select, mrmr_select};
use crate::dataset::{load_csv, split, Dataset, LabelColumn, SplitSpec};
use crate::env::{AdviceSource, EncoderKind, EnvContext, StepRecord};
use crate::error::{Error, Result};
use crate::qpolicy::{LearnConfig, PolicyNetwork};
use crate::stats::BinningSpec;
use crate::trainers::{
    run_exploration, ExploreMode, IrfsOptions, TeachingSchedule, TrainerKind,
};
use crate::tree::{evaluate_accuracy, TreeConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Mode {
    IrfsHybrid,
    IrfsKbest,
    IrfsDtt,
    Marlfs,
    Kbest,
    Dtrfe,
    Mrmr,
}

impl Mode {
    pub fn is_exploration(self) -> bool {
        matches!(self, Mode::IrfsHybrid | Mode::IrfsKbest | Mode::IrfsDtt | Mode::Marlfs)
    }

    fn explore_mode(self) -> Option<ExploreMode> {
        match self {
            Mode::IrfsHybrid => Some(ExploreMode::IrfsHybrid),
            Mode::IrfsKbest => Some(ExploreMode::IrfsKbest),
            Mode::IrfsDtt => Some(ExploreMode::IrfsDtt),
            Mode::Marlfs => Some(ExploreMode::Marlfs),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::IrfsHybrid => "irfs-hybrid",
            Mode::IrfsKbest => "irfs-kbest",
            Mode::IrfsDtt => "irfs-dtt",
            Mode::Marlfs => "marlfs",
            Mode::Kbest => "kbest",
            Mode::Dtrfe => "dtrfe",
            Mode::Mrmr => "mrmr",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    /// Label column: integer index, column name, or None for the last column.
    pub label_col: Option<String>,
    pub has_header: Option<bool>,
    pub mode: Mode,
    pub steps: usize,
    /// Transfer point T; None means floor(steps / 3).
    pub transfer: Option<usize>,
    pub seed: u64,
    pub split_fraction: f64,
    pub bins: usize,
    /// Subset size for one-shot selectors; None means floor(N / 2).
    pub k: Option<usize>,
    pub learn: LearnConfig,
    pub encoder: EncoderKind,
    pub trainer_order: (TrainerKind, TrainerKind),
    pub out_dir: Option<PathBuf>,
    pub save: Option<PathBuf>,
    pub load: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(data: PathBuf, mode: Mode) -> Self {
        RunConfig {
            data,
            label_col: None,
            has_header: None,
            mode,
            steps: 1500,
            transfer: None,
            seed: 0,
            split_fraction: 0.9,
            bins: 10,
            k: None,
            learn: LearnConfig::default(),
            encoder: EncoderKind::Meta,
            trainer_order: (TrainerKind::Kbest, TrainerKind::Dtree),
            out_dir: None,
            save: None,
            load: None,
        }
    }

    pub fn label_column(&self) -> LabelColumn {
        match &self.label_col {
            None => LabelColumn::Last,
            Some(s) => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.clone()),
            },
        }
    }

    pub fn transfer_point(&self) -> usize {
        self.transfer.unwrap_or((self.steps / 3).max(1))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub accuracy: f64,
    pub best_acc: f64,
    pub n_selected: usize,
    pub advice_source: AdviceSource,
    pub n_flips: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestSubset {
    pub step: usize,
    pub accuracy: f64,
    pub indices: Vec<usize>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub seed: u64,
    pub steps: Vec<StepSummary>,
    pub best_acc: f64,
    pub best_subset: BestSubset,
    pub wall_clock_secs: f64,
}

impl RunReport {
    /// Trace CSV of the per-step records.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,accuracy,best_acc,n_selected,advice_source,n_flips\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.step, s.accuracy, s.best_acc, s.n_selected, s.advice_source, s.n_flips
            ));
        }
        out
    }

    /// Running-max Best Acc over the first `checkpoint` steps (1-based
    /// count). One-shot selections have a single step whose accuracy stands
    /// for every checkpoint.
    pub fn best_acc_at(&self, checkpoint: usize) -> Result<f64> {
        if !self.config.mode.is_exploration() && checkpoint >= 1 {
            return Ok(self.best_acc);
        }
        if checkpoint == 0 || checkpoint > self.steps.len() {
            return Err(Error::Range(format!(
                "checkpoint {checkpoint} outside [1, {}]",
                self.steps.len()
            )));
        }
        Ok(self.steps[checkpoint - 1].best_acc)
    }
}

fn selected_of(actions: &[u8]) -> Vec<usize> {
    actions
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == 1)
        .map(|(i, _)| i)
        .collect()
}

fn summarize(records: &[StepRecord], d: &Dataset) -> (Vec<StepSummary>, BestSubset) {
    let mut best = f64::NEG_INFINITY;
    let mut best_subset = BestSubset { step: 0, accuracy: 0.0, indices: vec![], names: vec![] };
    let mut steps = Vec::with_capacity(records.len());
    for r in records {
        if r.accuracy > best {
            best = r.accuracy;
            let indices = selected_of(&r.advised_actions);
            best_subset = BestSubset {
                step: r.step,
                accuracy: r.accuracy,
                names: indices.iter().map(|&i| d.feature_names[i].clone()).collect(),
                indices,
            };
        }
        steps.push(StepSummary {
            step: r.step,
            accuracy: r.accuracy,
            best_acc: best,
            n_selected: selected_of(&r.advised_actions).len(),
            advice_source: r.advice_source,
            n_flips: r.flipped_agents.len(),
        });
    }
    (steps, best_subset)
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    state_dim: usize,
    agents: Vec<PolicyNetwork>,
}

pub fn save_checkpoint(path: &Path, agents: &[PolicyNetwork]) -> Result<()> {
    let ck = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        state_dim: agents.first().map_or(0, |a| a.state_dim),
        agents: agents.to_vec(),
    };
    fs::write(path, serde_json::to_vec(&ck)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected_agents: usize) -> Result<Vec<PolicyNetwork>> {
    let ck: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
    if ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "checkpoint schema {} unsupported",
            ck.schema_version
        )));
    }
    if ck.agents.len() != expected_agents {
        return Err(Error::Config(format!(
            "checkpoint holds {} agents, dataset needs {}",
            ck.agents.len(),
            expected_agents
        )));
    }
    Ok(ck.agents)
}

/// Run one campaign on an already-loaded dataset.
pub fn run_on_dataset(config: &RunConfig, dataset: &Dataset) -> Result<RunReport> {
    let started = Instant::now();
    let spec = SplitSpec { train_fraction: config.split_fraction, seed: config.seed };
    let (train, test) = split(dataset, &spec)?;
    let tree_cfg = TreeConfig::default();
    let bins = BinningSpec { num_bins: config.bins };

    let records: Vec<StepRecord> = if let Some(mode) = config.mode.explore_mode() {
        let schedule = TeachingSchedule::new(config.transfer_point(), config.steps)?;
        if !schedule.is_balanced() && !matches!(mode, ExploreMode::Marlfs) {
            eprintln!(
                "warning: teaching window 2T = {} exceeds run length {}",
                2 * schedule.transfer,
                schedule.total
            );
        }
        let mut ctx = EnvContext::new(
            train,
            test,
            tree_cfg,
            config.learn.clone(),
            config.encoder,
            config.seed,
        );
        if let Some(path) = &config.load {
            ctx.agents = load_checkpoint(path, ctx.n_features())?;
        }
        let opts = IrfsOptions {
            mode,
            schedule,
            bins,
            trainer_order: config.trainer_order,
        };
        let records = run_exploration(&mut ctx, config.steps, &opts)?;
        if let Some(path) = &config.save {
            save_checkpoint(path, &ctx.agents)?;
        }
        records
    } else {
        let k = config.k.unwrap_or((train.n_features() / 2).max(1));
        let indices = match config.mode {
            Mode::Kbest => kbest_select(&train, k, &bins)?,
            Mode::Dtrfe => dtrfe_select(&train, k, &tree_cfg)?,
            Mode::Mrmr => mrmr_select(&train, k, &bins)?,
            _ => unreachable!(),
        };
        let accuracy = evaluate_accuracy(&train, &test, &indices, &tree_cfg)?;
        let n = train.n_features();
        let mut actions = vec![0u8; n];
        for &i in &indices {
            actions[i] = 1;
        }
        vec![StepRecord {
            step: 0,
            prev_actions: vec![1; n],
            initial_actions: actions.clone(),
            advised_actions: actions,
            state_before: vec![],
            state_after: vec![],
            rewards: vec![],
            accuracy,
            advice_source: AdviceSource::None,
            flipped_agents: vec![],
        }]
    };

    let (steps, best_subset) = summarize(&records, dataset);
    let best_acc = steps.last().map_or(0.0, |s| s.best_acc);
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.clone(),
        seed: config.seed,
        steps,
        best_acc,
        best_subset,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Load the configured dataset, run, and write report + trace when an
/// output directory is set.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let dataset = load_csv(&config.data, &config.label_column(), config.has_header)?;
    let report = run_on_dataset(config, &dataset)?;
    if let Some(dir) = &config.out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tag = format!("{}-seed{}", report.config.mode, report.seed);
    fs::write(dir.join(format!("report-{tag}.json")), serde_json::to_vec_pretty(report)?)?;
    fs::write(dir.join(format!("trace-{tag}.csv")), report.trace_csv())?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub mode: Mode,
    pub checkpoint: usize,
    pub mean_best_acc: f64,
    pub min_best_acc: f64,
    pub max_best_acc: f64,
}

/// Run every (config, seed) pair and aggregate Best Acc at each checkpoint.
/// All configs must share the dataset; the split seed tracks the run seed.
pub fn compare(
    configs: &[RunConfig],
    seeds: &[u64],
    checkpoints: &[usize],
) -> Result<Vec<ComparisonRow>> {
    if configs.is_empty() || seeds.is_empty() || checkpoints.is_empty() {
        return Err(Error::Config("compare needs configs, seeds and checkpoints".into()));
    }
    if configs.iter().any(|c| c.data != configs[0].data) {
        return Err(Error::Config("compare configs must share a dataset".into()));
    }
    let dataset = load_csv(&configs[0].data, &configs[0].label_column(), configs[0].has_header)?;
    let mut rows = Vec::new();
    for cfg in configs {
        let mut per_checkpoint: Vec<Vec<f64>> = vec![Vec::new(); checkpoints.len()];
        for &seed in seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            let report = run_on_dataset(&c, &dataset)?;
            for (slot, &ck) in per_checkpoint.iter_mut().zip(checkpoints.iter()) {
                slot.push(report.best_acc_at(ck)?);
            }
        }
        for (vals, &ck) in per_checkpoint.iter().zip(checkpoints.iter()) {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let min = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let max = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            rows.push(ComparisonRow {
                mode: cfg.mode,
                checkpoint: ck,
                mean_best_acc: mean,
                min_best_acc: min,
                max_best_acc: max,
            });
        }
    }
    Ok(rows)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("mode,checkpoint,mean_best_acc,min_best_acc,max_best_acc\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.mode, r.checkpoint, r.mean_best_acc, r.min_best_acc, r.max_best_acc
        ));
    }
    out
}
