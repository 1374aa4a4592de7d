//! The interactive advice layer: participated/assertive/hesitant role
//! classification, the KBest and decision-tree trainers, advice application
//! and the staged teaching schedule driving the main exploration loop.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::env::{AdviceSource, EnvContext, StepRecord};
use crate::error::{Error, Result};
use crate::stats::{mi_relevance, BinningSpec};
use crate::tree::{fit, TreeConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSplit {
    pub participated: Vec<usize>,
    pub assertive: Vec<usize>,
    pub hesitant: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Advice {
    /// Indices whose initial action gets inverted; always a subset of the
    /// hesitant set it was computed from.
    pub flip_set: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Kbest,
    Dtree,
}

#[derive(Debug, Clone, Copy)]
pub struct TeachingSchedule {
    /// Transfer point T: phases are [0,T) trainer1, [T,2T) trainer2,
    /// [2T,..) self-guided.
    pub transfer: usize,
    pub total: usize,
}

impl TeachingSchedule {
    pub fn new(transfer: usize, total: usize) -> Result<Self> {
        if transfer == 0 {
            return Err(Error::Config("transfer point must be positive".into()));
        }
        Ok(TeachingSchedule { transfer, total })
    }

    /// True when both teaching phases fit inside the run.
    pub fn is_balanced(&self) -> bool {
        2 * self.transfer <= self.total
    }
}

/// Participated = selected at t-1; assertive keep selecting, hesitant
/// initially deselect.
pub fn classify_roles(prev_actions: &[u8], initial_actions: &[u8]) -> Result<RoleSplit> {
    if prev_actions.len() != initial_actions.len() {
        return Err(Error::LengthMismatch {
            left: prev_actions.len(),
            right: initial_actions.len(),
        });
    }
    let mut participated = Vec::new();
    let mut assertive = Vec::new();
    let mut hesitant = Vec::new();
    for (i, (&p, &a)) in prev_actions.iter().zip(initial_actions.iter()).enumerate() {
        if p == 1 {
            participated.push(i);
            if a == 1 {
                assertive.push(i);
            } else {
                hesitant.push(i);
            }
        }
    }
    Ok(RoleSplit { participated, assertive, hesitant })
}

/// k = floor(m/2 + n) with m assertive and n hesitant features.
pub fn kbest_k(m: usize, n: usize) -> usize {
    m / 2 + n
}

/// Rank the participated set by MI relevance (ties to the lower index),
/// keep the top k, and flip the hesitant features found there.
pub fn advise_kbest(train: &Dataset, roles: &RoleSplit, bins: &BinningSpec) -> Result<Advice> {
    let k = kbest_k(roles.assertive.len(), roles.hesitant.len());
    if roles.participated.is_empty() || k == 0 {
        return Ok(Advice::default());
    }
    let scores = mi_relevance(train, &roles.participated, bins)?;
    let mut ranked: Vec<usize> = roles.participated.clone();
    ranked.sort_by(|&a, &b| {
        scores[&b].partial_cmp(&scores[&a]).unwrap().then(a.cmp(&b))
    });
    let top_k = &ranked[..k.min(ranked.len())];
    let flip_set: Vec<usize> = roles
        .hesitant
        .iter()
        .copied()
        .filter(|i| top_k.contains(i))
        .collect();
    Ok(Advice { flip_set })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Fit a tree on the participated features; flip every hesitant feature
/// whose importance strictly exceeds the median assertive importance.
pub fn advise_dtree(train: &Dataset, roles: &RoleSplit, cfg: &TreeConfig) -> Result<Advice> {
    if roles.participated.is_empty() {
        return Ok(Advice::default());
    }
    let model = fit(train, &roles.participated, cfg)?;
    let g = if roles.assertive.is_empty() {
        0.0
    } else {
        let mut imps: Vec<f64> = roles.assertive.iter().map(|&i| model.importances[i]).collect();
        imps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        median(&imps)
    };
    let flip_set: Vec<usize> = roles
        .hesitant
        .iter()
        .copied()
        .filter(|&i| model.importances[i] > g)
        .collect();
    Ok(Advice { flip_set })
}

/// Invert the initial action on every flipped index.
pub fn apply_advice(initial_actions: &[u8], advice: &Advice) -> Result<Vec<u8>> {
    let mut out = initial_actions.to_vec();
    for &i in &advice.flip_set {
        if i >= out.len() {
            return Err(Error::IndexOutOfRange { index: i, len: out.len() });
        }
        out[i] = 1 - out[i];
    }
    Ok(out)
}

/// Which adviser is active at step t under the staged schedule.
pub fn advice_source(schedule: &TeachingSchedule, t: usize) -> AdviceSource {
    if t < schedule.transfer {
        AdviceSource::Trainer1
    } else if t < 2 * schedule.transfer {
        AdviceSource::Trainer2
    } else {
        AdviceSource::None
    }
}

/// Per-run exploration mode: which trainer (if any) fills each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExploreMode {
    /// trainer1 then trainer2 then self-guided.
    IrfsHybrid,
    /// KBest adviser for the whole teaching window [0, 2T), then self-guided.
    IrfsKbest,
    /// Decision-tree adviser for [0, 2T), then self-guided.
    IrfsDtt,
    /// No trainer at any step.
    Marlfs,
}

#[derive(Debug, Clone, Copy)]
pub struct IrfsOptions {
    pub mode: ExploreMode,
    pub schedule: TeachingSchedule,
    pub bins: BinningSpec,
    /// Trainer assignment for the hybrid phases; (trainer1, trainer2).
    pub trainer_order: (TrainerKind, TrainerKind),
}

fn active_trainer(opts: &IrfsOptions, source: AdviceSource) -> Option<TrainerKind> {
    match (opts.mode, source) {
        (ExploreMode::Marlfs, _) => None,
        (_, AdviceSource::None) => None,
        (ExploreMode::IrfsHybrid, AdviceSource::Trainer1) => Some(opts.trainer_order.0),
        (ExploreMode::IrfsHybrid, AdviceSource::Trainer2) => Some(opts.trainer_order.1),
        (ExploreMode::IrfsKbest, _) => Some(TrainerKind::Kbest),
        (ExploreMode::IrfsDtt, _) => Some(TrainerKind::Dtree),
    }
}

/// One full IRFS exploration step: argmax initial actions, role
/// classification, advice per the active phase, and the environment step.
/// Outside the teaching window agents act epsilon-greedily instead.
pub fn irfs_step(ctx: &mut EnvContext, t: usize, opts: &IrfsOptions) -> Result<StepRecord> {
    let n = ctx.n_features();
    let mut initial = vec![0u8; n];
    for i in 0..n {
        initial[i] = ctx.agents[i].greedy_action(&ctx.prev_state)? as u8;
    }
    let source = match opts.mode {
        ExploreMode::Marlfs => AdviceSource::None,
        _ => advice_source(&opts.schedule, t),
    };
    match active_trainer(opts, source) {
        Some(kind) => {
            let roles = classify_roles(&ctx.prev_actions, &initial)?;
            let advice = match kind {
                TrainerKind::Kbest => advise_kbest(&ctx.train, &roles, &opts.bins)?,
                TrainerKind::Dtree => advise_dtree(&ctx.train, &roles, &ctx.tree_cfg)?,
            };
            let advised = apply_advice(&initial, &advice)?;
            ctx.env_step(&advised, &initial, source, advice.flip_set)
        }
        None => {
            // self-guided phase: epsilon-greedy draws replace the argmax
            let mut actions = vec![0u8; n];
            let state = ctx.prev_state.clone();
            for i in 0..n {
                actions[i] = ctx.agents[i].act(&state, &ctx.learn_cfg, &mut ctx.rng)? as u8;
            }
            ctx.env_step(&actions, &initial, AdviceSource::None, Vec::new())
        }
    }
}

/// Run L steps in the given mode, returning every step record.
pub fn run_exploration(
    ctx: &mut EnvContext,
    steps: usize,
    opts: &IrfsOptions,
) -> Result<Vec<StepRecord>> {
    (0..steps).map(|t| irfs_step(ctx, t, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split, SplitSpec};
    use crate::env::EncoderKind;
    use crate::qpolicy::LearnConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classify_running_example() {
        // features f1..f5 at indices 0..4; prev selects f2,f3,f5
        let prev = [0, 1, 1, 0, 1];
        let initial = [0, 1, 0, 0, 0];
        let roles = classify_roles(&prev, &initial).unwrap();
        assert_eq!(roles.participated, vec![1, 2, 4]);
        assert_eq!(roles.assertive, vec![1]);
        assert_eq!(roles.hesitant, vec![2, 4]);
    }

    #[test]
    fn classify_degenerate_cases() {
        let roles = classify_roles(&[0, 0, 0], &[1, 1, 1]).unwrap();
        assert!(roles.participated.is_empty());
        assert!(roles.assertive.is_empty());
        assert!(roles.hesitant.is_empty());

        let roles = classify_roles(&[1, 1], &[1, 1]).unwrap();
        assert_eq!(roles.assertive, vec![0, 1]);
        assert!(roles.hesitant.is_empty());

        assert!(matches!(
            classify_roles(&[1], &[1, 0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn kbest_k_floor_rule() {
        assert_eq!(kbest_k(1, 2), 2);
        assert_eq!(kbest_k(0, 0), 0);
        assert_eq!(kbest_k(4, 3), 5);
        assert_eq!(kbest_k(3, 0), 1);
    }

    /// Five features; the label is a threshold of f2 (index 2), f1 is a
    /// noisier copy, f4 and the rest are noise. MI ranks f2 > f1 > f4.
    fn ranked_dataset() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 500;
        let f2: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<usize> = f2.iter().map(|&v| usize::from(v > 0.5)).collect();
        let f1: Vec<f64> = f2.iter().map(|&v| v + rng.gen_range(-0.3..0.3)).collect();
        let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
        };
        let cols = vec![noise(&mut rng), f1, f2, noise(&mut rng), noise(&mut rng)];
        Dataset::from_columns("ranked", cols, labels, None).unwrap()
    }

    #[test]
    fn kbest_advice_running_example() {
        let d = ranked_dataset();
        // participated {f1,f2,f4} (indices 1,2,4), assertive {1}, hesitant {2,4}
        let roles = classify_roles(&[0, 1, 1, 0, 1], &[0, 1, 0, 0, 0]).unwrap();
        let advice = advise_kbest(&d, &roles, &BinningSpec::default()).unwrap();
        // k = floor(1/2 + 2) = 2 -> top-2 of {1,2,4} is {2,1}; hesitant hit: {2}
        assert_eq!(advice.flip_set, vec![2]);
        let advised = apply_advice(&[0, 1, 0, 0, 0], &advice).unwrap();
        assert_eq!(advised, vec![0, 1, 1, 0, 0]);
    }

    #[test]
    fn kbest_no_hesitant_no_flips() {
        let d = ranked_dataset();
        let roles = classify_roles(&[1, 1, 1, 1, 1], &[1, 1, 1, 1, 1]).unwrap();
        let advice = advise_kbest(&d, &roles, &BinningSpec::default()).unwrap();
        assert!(advice.flip_set.is_empty());
    }

    #[test]
    fn kbest_flips_all_hesitant_when_they_dominate() {
        // hesitant features duplicate the label-defining column, assertive
        // ones are noise; m = 2 (even), n = 2 -> k = 3 covers all hesitant
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 400;
        let sig: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<usize> = sig.iter().map(|&v| usize::from(v > 0.5)).collect();
        let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
        };
        let cols = vec![noise(&mut rng), noise(&mut rng), sig.clone(), sig.clone()];
        let d = Dataset::from_columns("dom", cols, labels, None).unwrap();
        let roles = classify_roles(&[1, 1, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(roles.hesitant, vec![2, 3]);
        let advice = advise_kbest(&d, &roles, &BinningSpec::default()).unwrap();
        assert_eq!(advice.flip_set, vec![2, 3]);
    }

    #[test]
    fn dtree_advice_median_rule() {
        let d = ranked_dataset();
        // participated {1,2,4}: assertive {1}, hesitant {2,4}; the tree puts
        // nearly all importance on f2, so g = imp(f1) and only f2 exceeds it
        let roles = classify_roles(&[0, 1, 1, 0, 1], &[0, 1, 0, 0, 0]).unwrap();
        let advice = advise_dtree(&d, &roles, &TreeConfig::default()).unwrap();
        assert_eq!(advice.flip_set, vec![2]);
    }

    #[test]
    fn dtree_zero_importance_hesitant_not_flipped() {
        // pure-label data: the tree is a single leaf, importances all zero
        let d = Dataset {
            name: "pure".into(),
            columns: vec![vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]],
            labels: vec![0, 0, 0, 0],
            feature_names: vec!["f0".into(), "f1".into()],
            num_classes: 1,
        };
        let roles = classify_roles(&[1, 1], &[1, 0]).unwrap();
        let advice = advise_dtree(&d, &roles, &TreeConfig::default()).unwrap();
        assert!(advice.flip_set.is_empty());
    }

    #[test]
    fn apply_advice_identity_and_full_flip() {
        let initial = [0u8, 1, 0, 0, 1];
        assert_eq!(apply_advice(&initial, &Advice::default()).unwrap(), initial.to_vec());
        let advice = Advice { flip_set: vec![0, 2, 3] };
        assert_eq!(apply_advice(&initial, &advice).unwrap(), vec![1, 1, 1, 1, 1]);
        assert!(matches!(
            apply_advice(&initial, &Advice { flip_set: vec![9] }),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn advice_source_phases() {
        let s = TeachingSchedule::new(2, 6).unwrap();
        assert_eq!(advice_source(&s, 0), AdviceSource::Trainer1);
        assert_eq!(advice_source(&s, 1), AdviceSource::Trainer1);
        assert_eq!(advice_source(&s, 2), AdviceSource::Trainer2);
        assert_eq!(advice_source(&s, 3), AdviceSource::Trainer2);
        assert_eq!(advice_source(&s, 4), AdviceSource::None);
        assert_eq!(advice_source(&s, 5), AdviceSource::None);
        assert!(TeachingSchedule::new(0, 10).is_err());
    }

    fn make_ctx(seed: u64) -> EnvContext {
        let d = ranked_dataset();
        let (train, test) = split(&d, &SplitSpec { train_fraction: 0.8, seed }).unwrap();
        EnvContext::new(
            train,
            test,
            TreeConfig::default(),
            LearnConfig::default(),
            EncoderKind::Meta,
            seed,
        )
    }

    fn opts(mode: ExploreMode, transfer: usize, total: usize) -> IrfsOptions {
        IrfsOptions {
            mode,
            schedule: TeachingSchedule::new(transfer, total).unwrap(),
            bins: BinningSpec::default(),
            trainer_order: (TrainerKind::Kbest, TrainerKind::Dtree),
        }
    }

    #[test]
    fn three_phase_trace() {
        let mut ctx = make_ctx(5);
        let o = opts(ExploreMode::IrfsHybrid, 10, 30);
        let records = run_exploration(&mut ctx, 30, &o).unwrap();
        let trace: Vec<AdviceSource> = records.iter().map(|r| r.advice_source).collect();
        assert!(trace[..10].iter().all(|&s| s == AdviceSource::Trainer1));
        assert!(trace[10..20].iter().all(|&s| s == AdviceSource::Trainer2));
        assert!(trace[20..].iter().all(|&s| s == AdviceSource::None));
    }

    #[test]
    fn marlfs_never_flips() {
        let mut ctx = make_ctx(6);
        let o = opts(ExploreMode::Marlfs, 10, 20);
        let records = run_exploration(&mut ctx, 20, &o).unwrap();
        assert!(records.iter().all(|r| r.flipped_agents.is_empty()));
        assert!(records.iter().all(|r| r.advice_source == AdviceSource::None));
    }

    #[test]
    fn advice_invariants_over_fuzz_run() {
        let mut ctx = make_ctx(7);
        let o = opts(ExploreMode::IrfsHybrid, 15, 45);
        let records = run_exploration(&mut ctx, 45, &o).unwrap();
        for r in &records {
            let roles = classify_roles(&r.prev_actions, &r.initial_actions).unwrap();
            // flips only ever add features, and only hesitant ones
            for i in 0..r.advised_actions.len() {
                assert!(r.advised_actions[i] >= r.initial_actions[i] || r.advice_source == AdviceSource::None);
            }
            for &f in &r.flipped_agents {
                assert!(roles.hesitant.contains(&f));
            }
            for &a in &roles.assertive {
                if r.advice_source != AdviceSource::None {
                    assert_eq!(r.advised_actions[a], r.initial_actions[a]);
                }
            }
        }
    }

    #[test]
    fn fixed_seed_reproducible() {
        let run = |seed: u64| {
            let mut ctx = make_ctx(seed);
            let o = opts(ExploreMode::IrfsHybrid, 5, 15);
            run_exploration(&mut ctx, 15, &o).unwrap()
        };
        let a = run(3);
        let b = run(3);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.accuracy, y.accuracy);
            assert_eq!(x.advised_actions, y.advised_actions);
            assert_eq!(x.rewards, y.rewards);
        }
    }
}
