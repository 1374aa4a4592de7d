//! The feature-selection environment: applies joint actions, encodes the
//! selected subset into a fixed 49-dim state, pays out accuracy-based
//! rewards and tracks the Best-Acc curve.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::qpolicy::{LearnConfig, PolicyNetwork, ReplayBuffer, Transition};
use crate::stats::{describe, pearson};
use crate::tree::{evaluate_accuracy, TreeConfig};

pub const STATE_DIM: usize = 49;

/// Seed for the graph encoder's fixed random projection; independent of the
/// run seed so the encoding is a property of the encoder, not the run.
const PROJECTION_SEED: u64 = 0x5eed_49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Two-level meta-descriptive encoder: 7 column stats per selected
    /// feature, then 7 stats of each stat-column across features.
    #[default]
    Meta,
    /// One propagation step over the |Pearson|-weighted selected-feature
    /// graph before the meta stats, followed by a fixed seeded projection.
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdviceSource {
    Trainer1,
    Trainer2,
    None,
}

impl std::fmt::Display for AdviceSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdviceSource::Trainer1 => write!(f, "trainer1"),
            AdviceSource::Trainer2 => write!(f, "trainer2"),
            AdviceSource::None => write!(f, "none"),
        }
    }
}

/// Everything recorded about one exploration step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub prev_actions: Vec<u8>,
    pub initial_actions: Vec<u8>,
    pub advised_actions: Vec<u8>,
    pub state_before: Vec<f64>,
    pub state_after: Vec<f64>,
    pub rewards: Vec<f64>,
    pub accuracy: f64,
    pub advice_source: AdviceSource,
    pub flipped_agents: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct BestAccTracker {
    pub accuracies: Vec<f64>,
    pub running_best: Vec<f64>,
}

impl BestAccTracker {
    pub fn push(&mut self, acc: f64) {
        let best = self.running_best.last().map_or(acc, |b| b.max(acc));
        self.accuracies.push(acc);
        self.running_best.push(best);
    }

    pub fn len(&self) -> usize {
        self.accuracies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accuracies.is_empty()
    }

    /// Maximum accuracy over steps `start ..= start + window`.
    pub fn best_acc(&self, start: usize, window: usize) -> Result<f64> {
        let end = start + window;
        if end >= self.accuracies.len() {
            return Err(Error::Range(format!(
                "window [{start}, {end}] exceeds trace of {} steps",
                self.accuracies.len()
            )));
        }
        Ok(self.accuracies[start..=end]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
    }
}

/// Standardize columns by full-training mean/std; constant columns become 0.
pub fn standardize_columns(d: &Dataset) -> Vec<Vec<f64>> {
    d.columns
        .iter()
        .map(|col| {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.max(0.0).sqrt();
            if std == 0.0 {
                vec![0.0; col.len()]
            } else {
                col.iter().map(|v| (v - mean) / std).collect()
            }
        })
        .collect()
}

fn meta_stats(inner: &[[f64; 7]]) -> Vec<f64> {
    let mut out = vec![0.0; STATE_DIM];
    for i in 0..7 {
        let column: Vec<f64> = inner.iter().map(|row| row[i]).collect();
        let outer = describe(&column).expect("non-empty stat column").to_array();
        for (o, &v) in outer.iter().enumerate() {
            out[o * 7 + i] = v;
        }
    }
    out
}

fn fixed_projection(v: &[f64]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    let scale = 1.0 / (STATE_DIM as f64).sqrt();
    (0..STATE_DIM)
        .map(|_| {
            v.iter()
                .map(|&x| {
                    use rand::Rng;
                    x * rng.gen_range(-1.0..1.0) * scale
                })
                .sum()
        })
        .collect()
}

/// Encode the selected subset into the 49-dim state vector. The input
/// columns must already be standardized (see `standardize_columns`).
pub fn encode_state(
    std_columns: &[Vec<f64>],
    selected: &[usize],
    kind: EncoderKind,
) -> Result<Vec<f64>> {
    for &i in selected {
        if i >= std_columns.len() {
            return Err(Error::IndexOutOfRange { index: i, len: std_columns.len() });
        }
    }
    if selected.is_empty() {
        return Ok(vec![0.0; STATE_DIM]);
    }
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let inner: Vec<[f64; 7]> = sel
        .iter()
        .map(|&i| describe(&std_columns[i]).map(|s| s.to_array()))
        .collect::<Result<_>>()?;
    match kind {
        EncoderKind::Meta => Ok(meta_stats(&inner)),
        EncoderKind::Graph => {
            // one propagation step over the |Pearson| graph (self-loop 1)
            let k = sel.len();
            let mut adj = vec![vec![0.0; k]; k];
            for a in 0..k {
                adj[a][a] = 1.0;
                for b in (a + 1)..k {
                    let w = pearson(&std_columns[sel[a]], &std_columns[sel[b]])?.abs();
                    adj[a][b] = w;
                    adj[b][a] = w;
                }
            }
            let propagated: Vec<[f64; 7]> = (0..k)
                .map(|a| {
                    let row_sum: f64 = adj[a].iter().sum();
                    let mut out = [0.0; 7];
                    for b in 0..k {
                        let w = adj[a][b] / row_sum;
                        for (o, v) in out.iter_mut().zip(inner[b].iter()) {
                            *o += w * v;
                        }
                    }
                    out
                })
                .collect();
            Ok(fixed_projection(&meta_stats(&propagated)))
        }
    }
}

/// Equal split of the accuracy over the agents that selected a feature.
pub fn compute_reward(accuracy: f64, advised_actions: &[u8]) -> Vec<f64> {
    let selectors: Vec<usize> = advised_actions
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == 1)
        .map(|(i, _)| i)
        .collect();
    let mut rewards = vec![0.0; advised_actions.len()];
    if !selectors.is_empty() {
        let share = accuracy / selectors.len() as f64;
        for i in selectors {
            rewards[i] = share;
        }
    }
    rewards
}

/// Per-run environment context: split data, one agent + replay buffer per
/// feature, the previous step's actions and state, and the accuracy trace.
pub struct EnvContext {
    pub train: Dataset,
    pub test: Dataset,
    std_train: Vec<Vec<f64>>,
    pub tree_cfg: TreeConfig,
    pub learn_cfg: LearnConfig,
    pub encoder: EncoderKind,
    pub agents: Vec<PolicyNetwork>,
    pub buffers: Vec<ReplayBuffer>,
    pub rng: ChaCha8Rng,
    pub prev_actions: Vec<u8>,
    pub prev_state: Vec<f64>,
    pub tracker: BestAccTracker,
    pub step: usize,
    acc_cache: HashMap<Vec<u8>, f64>,
}

impl EnvContext {
    pub fn new(
        train: Dataset,
        test: Dataset,
        tree_cfg: TreeConfig,
        learn_cfg: LearnConfig,
        encoder: EncoderKind,
        seed: u64,
    ) -> Self {
        let n = train.n_features();
        let agents = (0..n)
            .map(|i| PolicyNetwork::new(STATE_DIM, seed.wrapping_mul(0x9e37_79b9).wrapping_add(i as u64)))
            .collect();
        let buffers = (0..n).map(|_| ReplayBuffer::new(learn_cfg.replay_capacity)).collect();
        let std_train = standardize_columns(&train);
        // step-0 bootstrap: every feature participated at t-1
        let prev_actions = vec![1u8; n];
        let prev_state = encode_state(&std_train, &(0..n).collect::<Vec<_>>(), encoder)
            .expect("encoding full set");
        EnvContext {
            train,
            test,
            std_train,
            tree_cfg,
            learn_cfg,
            encoder,
            agents,
            buffers,
            rng: ChaCha8Rng::seed_from_u64(seed),
            prev_actions,
            prev_state,
            tracker: BestAccTracker::default(),
            step: 0,
            acc_cache: HashMap::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.train.n_features()
    }

    pub fn std_columns(&self) -> &[Vec<f64>] {
        &self.std_train
    }

    fn accuracy_for(&mut self, advised: &[u8], selected: &[usize]) -> Result<f64> {
        if selected.is_empty() {
            return Ok(0.0);
        }
        if let Some(&acc) = self.acc_cache.get(advised) {
            return Ok(acc);
        }
        let acc = evaluate_accuracy(&self.train, &self.test, selected, &self.tree_cfg)?;
        self.acc_cache.insert(advised.to_vec(), acc);
        Ok(acc)
    }

    /// Apply the joint action vector: evaluate the subset, pay rewards,
    /// store a transition per agent and train each agent with enough
    /// buffered samples. Advances the context to the new state.
    pub fn env_step(
        &mut self,
        advised_actions: &[u8],
        initial_actions: &[u8],
        advice_source: AdviceSource,
        flipped_agents: Vec<usize>,
    ) -> Result<StepRecord> {
        let n = self.n_features();
        if advised_actions.len() != n {
            return Err(Error::LengthMismatch { left: advised_actions.len(), right: n });
        }
        let selected: Vec<usize> = advised_actions
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 1)
            .map(|(i, _)| i)
            .collect();
        let accuracy = self.accuracy_for(advised_actions, &selected)?;
        let state_after = encode_state(&self.std_train, &selected, self.encoder)?;
        let rewards = compute_reward(accuracy, advised_actions);
        let record = StepRecord {
            step: self.step,
            prev_actions: self.prev_actions.clone(),
            initial_actions: initial_actions.to_vec(),
            advised_actions: advised_actions.to_vec(),
            state_before: self.prev_state.clone(),
            state_after: state_after.clone(),
            rewards: rewards.clone(),
            accuracy,
            advice_source,
            flipped_agents,
        };
        for i in 0..n {
            self.buffers[i].push(Transition {
                state: self.prev_state.clone(),
                action: advised_actions[i] as usize,
                reward: rewards[i],
                next_state: state_after.clone(),
            });
            if self.buffers[i].len() >= self.learn_cfg.batch_size {
                let batch = self.buffers[i].sample(self.learn_cfg.batch_size, &mut self.rng)?;
                self.agents[i].train_step(&batch, &self.learn_cfg)?;
            }
        }
        self.prev_actions = advised_actions.to_vec();
        self.prev_state = state_after;
        self.tracker.push(accuracy);
        self.step += 1;
        Ok(record)
    }
}
