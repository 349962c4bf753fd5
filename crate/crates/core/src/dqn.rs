//! Per-GENCO deep Q-learning machinery: discretized bid actions,
//! epsilon-greedy selection, FIFO experience replay, a periodically synced
//! target network, and the minibatch training step. Agents are independent
//! learners; nothing here is shared across GENCOs.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Bid, GencoSpec, MechanismParams};
use crate::mlp::{MlpGradient, MlpParams};
use crate::vqc::{VqcGradient, VqcQFunction};

pub const N_FEATURES: usize = 6;

/// Hyperparameters of one learning agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Discount factor, in [0, 1).
    pub gamma: f64,
    /// SGD learning rate.
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Train steps over which epsilon decays linearly from start to end.
    pub epsilon_decay_steps: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Target network sync period C, in train steps.
    pub target_sync_period: usize,
    /// Number of bid price levels K; the action space has K + 1 entries.
    pub n_bid_levels: usize,
    /// Raw USD rewards are divided by this before storage.
    pub reward_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.9,
            alpha: 0.02,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            replay_capacity: 5_000,
            batch_size: 32,
            target_sync_period: 100,
            n_bid_levels: 10,
            reward_scale: 1_000.0,
        }
    }
}

impl AgentConfig {
    pub fn n_actions(&self) -> usize {
        self.n_bid_levels + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::ShapeMismatch(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::ShapeMismatch(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.replay_capacity < self.batch_size || self.batch_size == 0 {
            return Err(Error::ShapeMismatch(format!(
                "replay capacity {} must be >= batch size {} (> 0)",
                self.replay_capacity, self.batch_size
            )));
        }
        if self.n_bid_levels == 0 {
            return Err(Error::ShapeMismatch("n_bid_levels must be >= 1".into()));
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::ShapeMismatch(format!("{name} must be in [0, 1], got {eps}")));
            }
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::ShapeMismatch("reward_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// One stored transition. Rewards are already divided by the configured
/// reward scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub features: [f64; N_FEATURES],
    pub action: usize,
    pub reward: f64,
    pub next_features: [f64; N_FEATURES],
    pub terminal: bool,
}

/// What an action index means in the market: sit out, or offer full capacity
/// at one of the K price levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidAction {
    pub participate: bool,
    /// USD/MWh; 0 for the opt-out action.
    pub price: f64,
}

/// Ordered action list: index 0 opts out, index k in 1..=K bids PC * k / K
/// at full capacity.
pub fn action_space(mech: &MechanismParams, config: &AgentConfig) -> Vec<BidAction> {
    let k = config.n_bid_levels;
    let mut actions = Vec::with_capacity(k + 1);
    actions.push(BidAction { participate: false, price: 0.0 });
    for level in 1..=k {
        // Ratio first: the top level must equal the cap exactly, and
        // (cap * k) / k can round above it.
        actions.push(BidAction {
            participate: true,
            price: mech.price_cap * (level as f64 / k as f64),
        });
    }
    actions
}

/// Turns an action into a concrete bid for one GENCO.
pub fn bid_for_action(spec: &GencoSpec, action: &BidAction) -> Bid {
    Bid {
        genco_id: spec.id,
        participate: action.participate,
        price: action.price,
        quantity: if action.participate { spec.capacity } else { 0.0 },
    }
}

/// Q-function backend: the quantum circuit or the classical network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QBackend {
    Vqc(VqcQFunction),
    Mlp(MlpParams),
}

#[derive(Debug, Clone)]
pub enum QGradient {
    Vqc(VqcGradient),
    Mlp(MlpGradient),
}

impl QBackend {
    pub fn n_actions(&self) -> usize {
        match self {
            QBackend::Vqc(q) => q.n_actions(),
            QBackend::Mlp(q) => q.n_actions(),
        }
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        match self {
            QBackend::Vqc(q) => q.forward(features),
            QBackend::Mlp(q) => q.forward(features),
        }
    }

    pub fn grad(&self, features: &[f64], action: usize, residual: f64) -> Result<QGradient> {
        match self {
            QBackend::Vqc(q) => Ok(QGradient::Vqc(q.grad(features, action, residual)?)),
            QBackend::Mlp(q) => Ok(QGradient::Mlp(q.grad(features, action, residual)?)),
        }
    }

    pub fn apply_update(&mut self, gradient: &QGradient, alpha: f64) {
        match (self, gradient) {
            (QBackend::Vqc(q), QGradient::Vqc(g)) => q.apply_update(g, alpha),
            (QBackend::Mlp(q), QGradient::Mlp(g)) => q.apply_update(g, alpha),
            _ => panic!("gradient kind does not match backend kind"),
        }
    }
}

impl QGradient {
    fn add_assign(&mut self, other: &QGradient) {
        match (self, other) {
            (QGradient::Vqc(a), QGradient::Vqc(b)) => a.add_assign(b),
            (QGradient::Mlp(a), QGradient::Mlp(b)) => a.add_assign(b),
            _ => panic!("gradient kinds differ"),
        }
    }

    fn scale(&mut self, factor: f64) {
        match self {
            QGradient::Vqc(g) => g.scale(factor),
            QGradient::Mlp(g) => g.scale(factor),
        }
    }
}

/// One GENCO's learning state: online and target parameters, replay ring,
/// step counter, and the current exploration rate.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub online: QBackend,
    pub target: QBackend,
    pub replay: VecDeque<Experience>,
    pub steps: usize,
    pub epsilon: f64,
}

/// Bellman target: r + gamma * max_a' Q(s', a'; theta-); just r on terminal
/// transitions.
pub fn compute_target(exp: &Experience, target: &QBackend, gamma: f64) -> f64 {
    if exp.terminal {
        return exp.reward;
    }
    let q_next = target
        .forward(&exp.next_features)
        .expect("stored experiences have valid feature shapes");
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    exp.reward + gamma * best
}

impl Agent {
    pub fn new(config: AgentConfig, backend: QBackend) -> Self {
        let target = backend.clone();
        let epsilon = config.epsilon_start;
        Agent { config, online: backend, target, replay: VecDeque::new(), steps: 0, epsilon }
    }

    /// FIFO ring: oldest experience evicted once capacity is reached.
    pub fn push_experience(&mut self, exp: Experience) {
        if self.replay.len() == self.config.replay_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(exp);
    }

    /// Epsilon-greedy: uniform random action with probability epsilon, else
    /// the argmax of the online Q-values (ties to the lowest index).
    pub fn select_action<R: Rng>(&self, features: &[f64], rng: &mut R) -> usize {
        let n = self.online.n_actions();
        if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            return rng.gen_range(0..n);
        }
        let q = self.online.forward(features).expect("feature shape fixed by caller");
        let mut best = 0;
        for (i, v) in q.iter().enumerate().skip(1) {
            if *v > q[best] {
                best = i;
            }
        }
        best
    }

    /// One minibatch update. Returns the mean half-squared-residual loss, or
    /// None while the buffer is still smaller than a batch.
    pub fn train_step<R: Rng>(&mut self, rng: &mut R) -> Option<f64> {
        if self.replay.len() < self.config.batch_size {
            return None;
        }
        let indices = sample(rng, self.replay.len(), self.config.batch_size);

        let mut total: Option<QGradient> = None;
        let mut loss = 0.0;
        for idx in indices.iter() {
            let exp = self.replay[idx];
            let y = compute_target(&exp, &self.target, self.config.gamma);
            let q = self
                .online
                .forward(&exp.features)
                .expect("stored experiences have valid feature shapes")[exp.action];
            let residual = y - q;
            loss += 0.5 * residual * residual;
            let g = self
                .online
                .grad(&exp.features, exp.action, residual)
                .expect("stored experiences have valid shapes");
            match &mut total {
                Some(t) => t.add_assign(&g),
                None => total = Some(g),
            }
        }
        let batch = self.config.batch_size as f64;
        let mut total = total.expect("batch size > 0");
        total.scale(1.0 / batch);
        self.online.apply_update(&total, self.config.alpha);

        self.steps += 1;
        if self.config.target_sync_period > 0 && self.steps % self.config.target_sync_period == 0 {
            self.sync_target();
        }
        self.decay_epsilon();
        Some(loss / batch)
    }

    fn decay_epsilon(&mut self) {
        let horizon = self.config.epsilon_decay_steps.max(1);
        if self.steps >= horizon {
            self.epsilon = self.config.epsilon_end;
        } else {
            let t = self.steps as f64 / horizon as f64;
            self.epsilon =
                self.config.epsilon_start + (self.config.epsilon_end - self.config.epsilon_start) * t;
        }
    }

    /// theta- <- theta.
    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Settlement;
    use crate::nn::Net;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mech(price_cap: f64) -> MechanismParams {
        MechanismParams { price_cap, settlement: Settlement::PayAsBid, penalty_coeff: 0.1 }
    }

    fn zero_mlp(n_actions: usize) -> QBackend {
        QBackend::Mlp(MlpParams { net: Net::zeroed(&[N_FEATURES, 8, n_actions]) })
    }

    fn exp(reward: f64, terminal: bool) -> Experience {
        Experience {
            features: [0.1; N_FEATURES],
            action: 0,
            reward,
            next_features: [0.2; N_FEATURES],
            terminal,
        }
    }

    #[test]
    fn action_space_grid() {
        let config = AgentConfig { n_bid_levels: 10, ..AgentConfig::default() };
        let actions = action_space(&mech(100.0), &config);
        assert_eq!(actions.len(), 11);
        assert!(!actions[0].participate);
        let prices: Vec<f64> = actions[1..].iter().map(|a| a.price).collect();
        assert_eq!(prices, vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0]);
    }

    #[test]
    fn action_space_single_level() {
        let config = AgentConfig { n_bid_levels: 1, ..AgentConfig::default() };
        let actions = action_space(&mech(250.0), &config);
        assert_eq!(actions.len(), 2);
        assert!(actions[1].participate);
        assert_eq!(actions[1].price, 250.0);
    }

    #[test]
    fn action_space_length_is_k_plus_one() {
        for k in 1..7 {
            let config = AgentConfig { n_bid_levels: k, ..AgentConfig::default() };
            assert_eq!(action_space(&mech(80.0), &config).len(), k + 1);
        }
    }

    #[test]
    fn bids_respect_cap_by_construction() {
        let config = AgentConfig::default();
        // Caps with awkward binary expansions must still top out exactly at
        // the cap.
        for cap in [430.0, 242.1589828805211, 1.0 / 3.0, 499.99999999999994] {
            let m = mech(cap);
            let actions = action_space(&m, &config);
            for action in &actions {
                assert!(action.price <= m.price_cap, "cap {cap}: price {}", action.price);
            }
            assert_eq!(actions.last().unwrap().price, cap);
        }
    }

    #[test]
    fn greedy_selection_takes_argmax() {
        let mut backend = zero_mlp(3);
        if let QBackend::Mlp(p) = &mut backend {
            // Linear layer after zeroed hidden: only bias reaches the output.
            p.net.layers[1].bias = vec![0.1, 0.9, 0.2];
        }
        let mut agent = Agent::new(AgentConfig::default(), backend);
        agent.epsilon = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(agent.select_action(&[0.0; N_FEATURES], &mut rng), 1);
    }

    #[test]
    fn equal_q_breaks_ties_low() {
        let mut agent = Agent::new(AgentConfig::default(), zero_mlp(5));
        agent.epsilon = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(agent.select_action(&[0.3; N_FEATURES], &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let n = 11;
        let mut agent = Agent::new(AgentConfig::default(), zero_mlp(n));
        agent.epsilon = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[agent.select_action(&[0.5; N_FEATURES], &mut rng)] += 1;
        }
        let p = 1.0 / n as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (a, c) in counts.iter().enumerate() {
            assert!(
                (*c as f64 - mean).abs() < 3.0 * sigma,
                "action {a} drawn {c} times, expected {mean:.0} +- {:.0}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn target_value_bootstraps() {
        let mut backend = zero_mlp(2);
        if let QBackend::Mlp(p) = &mut backend {
            p.net.layers[1].bias = vec![1.0, 2.0];
        }
        let y = compute_target(&exp(1.0, false), &backend, 0.9);
        assert!((y - 2.8).abs() < 1e-12);
    }

    #[test]
    fn terminal_target_skips_bootstrap() {
        let backend = zero_mlp(2);
        assert_eq!(compute_target(&exp(5.0, true), &backend, 0.9), 5.0);
    }

    #[test]
    fn zero_gamma_target_is_reward() {
        let mut backend = zero_mlp(2);
        if let QBackend::Mlp(p) = &mut backend {
            p.net.layers[1].bias = vec![10.0, 20.0];
        }
        assert_eq!(compute_target(&exp(3.0, false), &backend, 0.0), 3.0);
    }

    #[test]
    fn train_step_noop_below_batch_size() {
        let config = AgentConfig { batch_size: 4, ..AgentConfig::default() };
        let mut agent = Agent::new(config, zero_mlp(2));
        agent.push_experience(exp(1.0, true));
        let before = agent.online.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(agent.train_step(&mut rng).is_none());
        assert_eq!(agent.online, before);
        assert_eq!(agent.steps, 0);
    }

    #[test]
    fn consistent_targets_leave_params_alone() {
        // Zeroed net predicts 0 everywhere; terminal reward-0 experiences give
        // y = 0 = Q, so the loss sits at its minimum already.
        let config = AgentConfig { batch_size: 4, ..AgentConfig::default() };
        let mut agent = Agent::new(config, zero_mlp(2));
        for _ in 0..8 {
            agent.push_experience(exp(0.0, true));
        }
        let before = agent.online.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let loss = agent.train_step(&mut rng).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.online, before);
    }

    #[test]
    fn replay_evicts_fifo() {
        let config = AgentConfig { replay_capacity: 3, batch_size: 2, ..AgentConfig::default() };
        let mut agent = Agent::new(config, zero_mlp(2));
        for r in 0..5 {
            agent.push_experience(exp(r as f64, true));
        }
        assert_eq!(agent.replay.len(), 3);
        let rewards: Vec<f64> = agent.replay.iter().map(|e| e.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn target_changes_only_at_sync_multiples() {
        let config = AgentConfig {
            batch_size: 2,
            target_sync_period: 3,
            alpha: 0.1,
            ..AgentConfig::default()
        };
        let mut agent = Agent::new(config, zero_mlp(2));
        for r in 0..4 {
            agent.push_experience(exp(1.0 + r as f64, true));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let initial_target = agent.target.clone();
        for step in 1..=6 {
            agent.train_step(&mut rng).unwrap();
            if step % 3 == 0 {
                assert_eq!(agent.target, agent.online, "sync at step {step}");
            } else if step < 3 {
                assert_eq!(agent.target, initial_target, "stale before first sync (step {step})");
            }
        }
    }

    #[test]
    fn sync_makes_target_match_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let backend = QBackend::Mlp(MlpParams::init(&[8], 3, &mut rng));
        let mut agent = Agent::new(AgentConfig::default(), backend);
        // Before any sync the target equals the initialization.
        assert_eq!(agent.target, agent.online);
        if let QBackend::Mlp(p) = &mut agent.online {
            p.net.layers[0].bias[0] += 1.0;
        }
        assert_ne!(agent.target, agent.online);
        agent.sync_target();
        assert_eq!(agent.target, agent.online);
        let snapshot = agent.target.clone();
        agent.sync_target();
        assert_eq!(agent.target, snapshot);
    }

    #[test]
    fn epsilon_decays_linearly_to_floor() {
        let config = AgentConfig {
            batch_size: 1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10,
            ..AgentConfig::default()
        };
        let mut agent = Agent::new(config, zero_mlp(2));
        agent.push_experience(exp(0.0, true));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            agent.train_step(&mut rng);
        }
        assert!((agent.epsilon - 0.525).abs() < 1e-12);
        for _ in 0..20 {
            agent.train_step(&mut rng);
        }
        assert_eq!(agent.epsilon, 0.05);
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let bad_gamma = AgentConfig { gamma: 1.0, ..AgentConfig::default() };
        assert!(bad_gamma.validate().is_err());
        let bad_capacity = AgentConfig { replay_capacity: 4, batch_size: 8, ..AgentConfig::default() };
        assert!(bad_capacity.validate().is_err());
        let bad_k = AgentConfig { n_bid_levels: 0, ..AgentConfig::default() };
        assert!(bad_k.validate().is_err());
        assert!(AgentConfig::default().validate().is_ok());
    }
}
