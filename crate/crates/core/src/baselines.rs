//! One-shot feature selectors used for comparison: K-Best by MI relevance,
//! decision-tree RFE, greedy mRMR (MID form), plus the MARLFS runner.

use crate::dataset::Dataset;
use crate::env::EnvContext;
use crate::error::{Error, Result};
use crate::stats::{discretize, mi_relevance, mutual_info, BinningSpec};
use crate::trainers::{run_exploration, ExploreMode, IrfsOptions, TeachingSchedule, TrainerKind};
use crate::tree::{fit, TreeConfig};

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Range(format!("k = {k} outside [1, {n}]")));
    }
    Ok(())
}

/// Top-k features by MI against the label; ties go to the lower index.
pub fn kbest_select(train: &Dataset, k: usize, bins: &BinningSpec) -> Result<Vec<usize>> {
    let n = train.n_features();
    check_k(k, n)?;
    let all: Vec<usize> = (0..n).collect();
    let scores = mi_relevance(train, &all, bins)?;
    let mut ranked = all;
    ranked.sort_by(|&a, &b| scores[&b].partial_cmp(&scores[&a]).unwrap().then(a.cmp(&b)));
    let mut out = ranked[..k].to_vec();
    out.sort_unstable();
    Ok(out)
}

/// Recursive elimination: refit, drop the least important feature (ties
/// drop the higher index) until k remain.
pub fn dtrfe_select(train: &Dataset, k: usize, cfg: &TreeConfig) -> Result<Vec<usize>> {
    let n = train.n_features();
    check_k(k, n)?;
    let mut remaining: Vec<usize> = (0..n).collect();
    while remaining.len() > k {
        let model = fit(train, &remaining, cfg)?;
        let worst = *remaining
            .iter()
            .rev()
            .min_by(|&&a, &&b| {
                model.importances[a].partial_cmp(&model.importances[b]).unwrap()
            })
            .expect("non-empty");
        remaining.retain(|&i| i != worst);
    }
    Ok(remaining)
}

/// Greedy forward mRMR with the MID criterion:
/// argmax over unselected f of MI(f; label) - mean over picked g of MI(f; g).
pub fn mrmr_select(train: &Dataset, k: usize, bins: &BinningSpec) -> Result<Vec<usize>> {
    let n = train.n_features();
    check_k(k, n)?;
    let binned: Vec<Vec<usize>> = train
        .columns
        .iter()
        .map(|c| discretize(c, bins))
        .collect::<Result<_>>()?;
    let relevance: Vec<f64> = binned
        .iter()
        .map(|b| mutual_info(b, &train.labels))
        .collect::<Result<_>>()?;
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    let mut remaining: Vec<usize> = (0..n).collect();
    while picked.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for &f in &remaining {
            let score = if picked.is_empty() {
                relevance[f]
            } else {
                let redundancy: f64 = picked
                    .iter()
                    .map(|&g| mutual_info(&binned[f], &binned[g]))
                    .sum::<Result<f64>>()?
                    / picked.len() as f64;
                relevance[f] - redundancy
            };
            let better = match best {
                None => true,
                Some((s, _)) => score > s,
            };
            if better {
                best = Some((score, f));
            }
        }
        let (_, f) = best.expect("remaining non-empty");
        picked.push(f);
        remaining.retain(|&i| i != f);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// The no-trainer configuration: L exploration steps with self-guided
/// epsilon-greedy actions at every step.
pub fn run_marlfs(ctx: &mut EnvContext, steps: usize) -> Result<Vec<crate::env::StepRecord>> {
    let opts = IrfsOptions {
        mode: ExploreMode::Marlfs,
        schedule: TeachingSchedule::new(1, steps.max(1))?,
        bins: BinningSpec::default(),
        trainer_order: (TrainerKind::Kbest, TrainerKind::Dtree),
    };
    run_exploration(ctx, steps, &opts)
}
