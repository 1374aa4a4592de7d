//! Per-agent DQN machinery: a two-layer MLP Q-function over two actions
//! (deselect = 0, select = 1), FIFO replay memory, epsilon-greedy action
//! selection and one-step Q-learning updates with Adam.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN: usize = 128;
pub const ACTION_DESELECT: usize = 0;
pub const ACTION_SELECT: usize = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnConfig {
    pub gamma: f64,
    /// Probability of taking the greedy action; the remaining mass is a
    /// uniform random action.
    pub epsilon: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub replay_capacity: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            gamma: 0.9,
            epsilon: 0.9,
            batch_size: 16,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            replay_capacity: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct AdamState {
    m_w1: Vec<Vec<f64>>,
    v_w1: Vec<Vec<f64>>,
    m_b1: Vec<f64>,
    v_b1: Vec<f64>,
    m_w2: Vec<Vec<f64>>,
    v_w2: Vec<Vec<f64>>,
    m_b2: Vec<f64>,
    v_b2: Vec<f64>,
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyNetwork {
    /// Hidden weights, `HIDDEN` rows of `state_dim` values.
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    /// Output weights, 2 rows of `HIDDEN` values.
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    adam: AdamState,
    pub state_dim: usize,
}

struct Gradients {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

impl PolicyNetwork {
    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded.
    pub fn new(state_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim1 = 1.0 / (state_dim as f64).sqrt();
        let lim2 = 1.0 / (HIDDEN as f64).sqrt();
        let w1 = (0..HIDDEN)
            .map(|_| (0..state_dim).map(|_| rng.gen_range(-lim1..lim1)).collect())
            .collect();
        let b1 = (0..HIDDEN).map(|_| rng.gen_range(-lim1..lim1)).collect();
        let w2 = (0..2)
            .map(|_| (0..HIDDEN).map(|_| rng.gen_range(-lim2..lim2)).collect())
            .collect();
        let b2 = (0..2).map(|_| rng.gen_range(-lim2..lim2)).collect();
        PolicyNetwork {
            w1,
            b1,
            w2,
            b2,
            adam: AdamState {
                m_w1: vec![vec![0.0; state_dim]; HIDDEN],
                v_w1: vec![vec![0.0; state_dim]; HIDDEN],
                m_b1: vec![0.0; HIDDEN],
                v_b1: vec![0.0; HIDDEN],
                m_w2: vec![vec![0.0; HIDDEN]; 2],
                v_w2: vec![vec![0.0; HIDDEN]; 2],
                m_b2: vec![0.0; 2],
                v_b2: vec![0.0; 2],
                step: 0,
            },
            state_dim,
        }
    }

    /// Test hook: zero all parameters, optionally setting the output bias.
    pub fn zeroed(state_dim: usize, b2: Option<[f64; 2]>) -> Self {
        let mut net = Self::new(state_dim, 0);
        for row in net.w1.iter_mut().chain(net.w2.iter_mut()) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        net.b1.iter_mut().for_each(|v| *v = 0.0);
        net.b2 = b2.map_or(vec![0.0, 0.0], |b| b.to_vec());
        net
    }

    fn pre_activations(&self, s: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(self.b1.iter())
            .map(|(row, b)| row.iter().zip(s.iter()).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn forward(&self, s: &[f64]) -> Result<(f64, f64)> {
        if s.len() != self.state_dim {
            return Err(Error::DimensionMismatch { expected: self.state_dim, actual: s.len() });
        }
        let h: Vec<f64> = self.pre_activations(s).iter().map(|&z| z.max(0.0)).collect();
        let mut q = [0.0; 2];
        for a in 0..2 {
            q[a] = self.w2[a].iter().zip(h.iter()).map(|(w, x)| w * x).sum::<f64>() + self.b2[a];
        }
        Ok((q[0], q[1]))
    }

    /// Pure argmax decision; ties go to select.
    pub fn greedy_action(&self, s: &[f64]) -> Result<usize> {
        let (q0, q1) = self.forward(s)?;
        Ok(if q1 >= q0 { ACTION_SELECT } else { ACTION_DESELECT })
    }

    /// Greedy with probability `epsilon`, otherwise a uniform random action.
    pub fn act<R: Rng>(&self, s: &[f64], cfg: &LearnConfig, rng: &mut R) -> Result<usize> {
        if rng.gen::<f64>() < cfg.epsilon {
            self.greedy_action(s)
        } else {
            Ok(rng.gen_range(0..2))
        }
    }

    fn gradients(&self, batch: &[Transition], cfg: &LearnConfig) -> Result<(f64, Gradients)> {
        let bsz = batch.len() as f64;
        let mut g = Gradients {
            w1: vec![vec![0.0; self.state_dim]; HIDDEN],
            b1: vec![0.0; HIDDEN],
            w2: vec![vec![0.0; HIDDEN]; 2],
            b2: vec![0.0; 2],
        };
        let mut loss = 0.0;
        for t in batch {
            let (nq0, nq1) = self.forward(&t.next_state)?;
            let target = t.reward + cfg.gamma * nq0.max(nq1);
            let z = self.pre_activations(&t.state);
            let h: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            let q = self.w2[t.action]
                .iter()
                .zip(h.iter())
                .map(|(w, x)| w * x)
                .sum::<f64>()
                + self.b2[t.action];
            let err = q - target;
            loss += err * err / bsz;
            let dq = 2.0 * err / bsz;
            g.b2[t.action] += dq;
            for j in 0..HIDDEN {
                g.w2[t.action][j] += dq * h[j];
                if z[j] > 0.0 {
                    let dz = self.w2[t.action][j] * dq;
                    g.b1[j] += dz;
                    for (gw, x) in g.w1[j].iter_mut().zip(t.state.iter()) {
                        *gw += dz * x;
                    }
                }
            }
        }
        Ok((loss, g))
    }

    /// One-step Q-learning update on a batch; returns the pre-update loss.
    pub fn train_step(&mut self, batch: &[Transition], cfg: &LearnConfig) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (loss, g) = self.gradients(batch, cfg)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("loss {loss} on batch of {}", batch.len())));
        }
        self.adam.step += 1;
        let t = self.adam.step;
        let (b1c, b2c) = (
            1.0 - cfg.adam_beta1.powi(t as i32),
            1.0 - cfg.adam_beta2.powi(t as i32),
        );
        let update = |p: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
            *m = cfg.adam_beta1 * *m + (1.0 - cfg.adam_beta1) * grad;
            *v = cfg.adam_beta2 * *v + (1.0 - cfg.adam_beta2) * grad * grad;
            let mhat = *m / b1c;
            let vhat = *v / b2c;
            *p -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
        };
        for j in 0..HIDDEN {
            for k in 0..self.state_dim {
                update(
                    &mut self.w1[j][k],
                    g.w1[j][k],
                    &mut self.adam.m_w1[j][k],
                    &mut self.adam.v_w1[j][k],
                );
            }
            update(&mut self.b1[j], g.b1[j], &mut self.adam.m_b1[j], &mut self.adam.v_b1[j]);
        }
        for a in 0..2 {
            for j in 0..HIDDEN {
                update(
                    &mut self.w2[a][j],
                    g.w2[a][j],
                    &mut self.adam.m_w2[a][j],
                    &mut self.adam.v_w2[a][j],
                );
            }
            update(&mut self.b2[a], g.b2[a], &mut self.adam.m_b2[a], &mut self.adam.v_b2[a]);
        }
        if !self.params_finite() {
            return Err(Error::NonFiniteLoss("non-finite parameter after update".into()));
        }
        Ok(loss)
    }

    /// Batch loss without updating; used by the improvement check.
    pub fn loss(&self, batch: &[Transition], cfg: &LearnConfig) -> Result<f64> {
        Ok(self.gradients(batch, cfg)?.0)
    }

    pub fn params_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|r| r.iter().all(|v| v.is_finite()))
            && self.b1.iter().chain(self.b2.iter()).all(|v| v.is_finite())
    }

    /// Flat view of all parameters, for finite-difference tests.
    pub fn params_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::new();
        for row in self.w1.iter_mut() {
            out.extend(row.iter_mut());
        }
        out.extend(self.b1.iter_mut());
        for row in self.w2.iter_mut() {
            out.extend(row.iter_mut());
        }
        out.extend(self.b2.iter_mut());
        out
    }

    /// Flat view of the gradients for the same ordering as `params_mut`.
    pub fn flat_gradients(&self, batch: &[Transition], cfg: &LearnConfig) -> Result<Vec<f64>> {
        let (_, g) = self.gradients(batch, cfg)?;
        let mut out = Vec::new();
        for row in &g.w1 {
            out.extend(row.iter().copied());
        }
        out.extend(g.b1.iter().copied());
        for row in &g.w2 {
            out.extend(row.iter().copied());
        }
        out.extend(g.b2.iter().copied());
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), data: VecDeque::new() }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Uniform sample without replacement.
    pub fn sample<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.data.len() < batch_size {
            return Err(Error::InsufficientSamples { have: self.data.len(), need: batch_size });
        }
        let idx = rand::seq::index::sample(rng, self.data.len(), batch_size);
        Ok(idx.iter().map(|i| self.data[i].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net(dim: usize, seed: u64) -> PolicyNetwork {
        PolicyNetwork::new(dim, seed)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = PolicyNetwork::zeroed(5, None);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5, 3.0, 9.0]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn bias_passthrough() {
        let net = PolicyNetwork::zeroed(4, Some([0.3, 0.7]));
        for s in [[0.0; 4], [1.0; 4], [-3.0, 2.0, 0.1, 5.0]] {
            assert_eq!(net.forward(&s).unwrap(), (0.3, 0.7));
        }
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let net = tiny_net(3, 11);
        let s = [0.4, -1.2, 2.5];
        // independent direct arithmetic
        let mut h = vec![0.0; HIDDEN];
        for j in 0..HIDDEN {
            let mut z = net.b1[j];
            for k in 0..3 {
                z += net.w1[j][k] * s[k];
            }
            h[j] = if z > 0.0 { z } else { 0.0 };
        }
        let mut q = [0.0; 2];
        for a in 0..2 {
            q[a] = net.b2[a];
            for j in 0..HIDDEN {
                q[a] += net.w2[a][j] * h[j];
            }
        }
        let (q0, q1) = net.forward(&s).unwrap();
        assert!((q0 - q[0]).abs() < 1e-10);
        assert!((q1 - q[1]).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = tiny_net(3, 0);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn act_pure_greedy() {
        let net = PolicyNetwork::zeroed(2, Some([0.2, 0.9]));
        let cfg = LearnConfig { epsilon: 1.0, ..LearnConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(net.act(&[0.0, 0.0], &cfg, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn act_pure_random_frequency() {
        let net = PolicyNetwork::zeroed(2, Some([0.2, 0.9]));
        let cfg = LearnConfig { epsilon: 0.0, ..LearnConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks: usize =
            (0..10_000).map(|_| net.act(&[0.0, 0.0], &cfg, &mut rng).unwrap()).sum();
        let freq = picks as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.05, "freq {freq}");
    }

    #[test]
    fn act_mixed_frequency() {
        let net = PolicyNetwork::zeroed(2, Some([0.9, 0.2]));
        let cfg = LearnConfig { epsilon: 0.9, ..LearnConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zeros = (0..10_000)
            .filter(|_| net.act(&[0.0, 0.0], &cfg, &mut rng).unwrap() == 0)
            .count();
        let freq = zeros as f64 / 10_000.0;
        assert!((freq - 0.95).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn target_arithmetic() {
        // r=1, gamma=0.9, max next Q = 0.5 -> y = 1.45; with zero net,
        // q = 0 so loss = y^2
        let mut net = PolicyNetwork::zeroed(2, Some([0.0, 0.0]));
        // force next-state max Q of 0.5 via output bias
        net.b2 = vec![0.1, 0.5];
        let batch = [Transition {
            state: vec![0.0, 0.0],
            action: 0,
            reward: 1.0,
            next_state: vec![0.0, 0.0],
        }];
        let loss = net.loss(&batch, &LearnConfig::default()).unwrap();
        // q(s, 0) = 0.1, target 1.45
        assert!((loss - (0.1 - 1.45f64).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn train_step_reduces_batch_loss() {
        let mut ok = 0;
        for seed in 0..100 {
            let mut net = tiny_net(4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let batch: Vec<Transition> = (0..8)
                .map(|_| Transition {
                    state: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    action: rng.gen_range(0..2),
                    reward: rng.gen_range(0.0..1.0),
                    next_state: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                })
                .collect();
            let before = net.loss(&batch, &LearnConfig::default()).unwrap();
            net.train_step(&batch, &LearnConfig::default()).unwrap();
            let after = net.loss(&batch, &LearnConfig::default()).unwrap();
            if after < before {
                ok += 1;
            }
        }
        assert!(ok >= 95, "loss decreased in only {ok}/100 trials");
    }

    #[test]
    fn replay_fifo_eviction() {
        let mut buf = ReplayBuffer::new(2);
        for r in [1.0, 2.0, 3.0] {
            buf.push(Transition { state: vec![0.0], action: 0, reward: r, next_state: vec![0.0] });
        }
        assert_eq!(buf.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rewards: Vec<f64> = buf.sample(2, &mut rng).unwrap().iter().map(|t| t.reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rewards, vec![2.0, 3.0]);
    }

    #[test]
    fn replay_sample_full_is_permutation() {
        let mut buf = ReplayBuffer::new(10);
        for r in 0..5 {
            buf.push(Transition {
                state: vec![0.0],
                action: 0,
                reward: r as f64,
                next_state: vec![0.0],
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rewards: Vec<f64> = buf.sample(5, &mut rng).unwrap().iter().map(|t| t.reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rewards, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(buf.sample(6, &mut rng), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn replay_sample_uniformity() {
        let mut buf = ReplayBuffer::new(10);
        for r in 0..10 {
            buf.push(Transition {
                state: vec![0.0],
                action: 0,
                reward: r as f64,
                next_state: vec![0.0],
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            let t = &buf.sample(1, &mut rng).unwrap()[0];
            counts[t.reward as usize] += 1;
        }
        for &c in &counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 0.1).abs() < 0.02, "frequency {f}");
        }
    }
}
