//! Upper-level PPO actor-critic over the hybrid mechanism space: Gaussian
//! heads for the continuous price cap and renewable penalty, a Bernoulli head
//! for the settlement rule. Advantages come from a one-step TD bootstrap and
//! the actor maximizes the clipped surrogate objective plus an entropy bonus;
//! all gradients are hand-derived and backpropagated through the small actor
//! and critic networks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketMetrics, MechanismParams, Settlement};
use crate::nn::{Net, NetGradient};

pub const N_STATE: usize = 3;
const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 2.0;

/// Upper-level state: monthly indicators squashed into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperState {
    /// HHI / 10000.
    pub hhi: f64,
    pub renewable_penetration: f64,
    /// Mean supply-demand ratio clipped to [0, 3] then divided by 3.
    pub supply_demand: f64,
}

impl UpperState {
    pub fn from_metrics(metrics: &MarketMetrics) -> Self {
        UpperState {
            hhi: (metrics.hhi / 10_000.0).clamp(0.0, 1.0),
            renewable_penetration: metrics.renewable_penetration.clamp(0.0, 1.0),
            supply_demand: metrics.supply_demand_ratio.clamp(0.0, 3.0) / 3.0,
        }
    }

    pub fn features(&self) -> [f64; N_STATE] {
        [self.hhi, self.renewable_penetration, self.supply_demand]
    }
}

/// PPO hyperparameters and the mechanism action bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    /// Entropy strength inside the bonus term.
    pub entropy_beta: f64,
    /// Critic coefficient in the combined loss report.
    pub c1: f64,
    /// Entropy coefficient in the combined loss and the actor update.
    pub c2: f64,
    pub gamma: f64,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// USD/MWh bounds for the price cap action.
    pub pc_bounds: (f64, f64),
    /// Bounds for the renewable deviation penalty action.
    pub penalty_bounds: (f64, f64),
    pub hidden: usize,
    pub init_log_std_pc: f64,
    pub init_log_std_penalty: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            entropy_beta: 1.0,
            c1: 0.5,
            c2: 0.01,
            gamma: 0.9,
            actor_rate: 0.005,
            critic_rate: 0.05,
            epochs: 4,
            minibatch_size: 32,
            pc_bounds: (50.0, 500.0),
            penalty_bounds: (0.05, 0.15),
            hidden: 32,
            init_log_std_pc: 1.5,
            init_log_std_penalty: -3.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::ShapeMismatch(format!(
                "clip_epsilon must be in (0, 1), got {}",
                self.clip_epsilon
            )));
        }
        if !(self.actor_rate > 0.0 && self.critic_rate > 0.0) {
            return Err(Error::ShapeMismatch("learning rates must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::ShapeMismatch(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if self.epochs == 0 || self.minibatch_size == 0 {
            return Err(Error::ShapeMismatch("epochs and minibatch_size must be >= 1".into()));
        }
        let (pc_lo, pc_hi) = self.pc_bounds;
        if !(pc_lo > 0.0 && pc_lo < pc_hi) {
            return Err(Error::ShapeMismatch(format!(
                "pc_bounds must satisfy 0 < lo < hi, got ({pc_lo}, {pc_hi})"
            )));
        }
        let (p_lo, p_hi) = self.penalty_bounds;
        if !(0.0..=1.0).contains(&p_lo) || !(0.0..=1.0).contains(&p_hi) || !(p_lo < p_hi) {
            return Err(Error::ShapeMismatch(format!(
                "penalty_bounds must satisfy 0 <= lo < hi <= 1, got ({p_lo}, {p_hi})"
            )));
        }
        Ok(())
    }
}

/// Actor and critic parameters. The two log-std scalars are state-independent
/// and kept clamped to [-5, 2].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Net,
    pub log_std_pc: f64,
    pub log_std_penalty: f64,
    pub critic: Net,
}

impl PolicyParams {
    pub fn init<R: Rng>(config: &PpoConfig, rng: &mut R) -> Self {
        PolicyParams {
            actor: Net::new(&[N_STATE, config.hidden, 3], rng),
            log_std_pc: config.init_log_std_pc.clamp(LOG_STD_MIN, LOG_STD_MAX),
            log_std_penalty: config.init_log_std_penalty.clamp(LOG_STD_MIN, LOG_STD_MAX),
            critic: Net::new(&[N_STATE, config.hidden, 1], rng),
        }
    }

    pub fn value(&self, state: &UpperState) -> f64 {
        self.critic.forward(&state.features())[0]
    }
}

/// Pre-clamp action draws; what the log-probability is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAction {
    pub pc_draw: f64,
    pub penalty_draw: f64,
    /// 0 = pay-as-bid, 1 = pay-as-clear.
    pub mr: u8,
}

/// One upper-level step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: UpperState,
    pub raw: RawAction,
    pub log_prob: f64,
    pub reward: f64,
    pub next_state: UpperState,
    pub terminal: bool,
    /// V(state) at collection time (telemetry; updates recompute with
    /// the frozen pre-update critic).
    pub value_estimate: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gaussian_log_density(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - std.ln() - 0.5 * z * z
}

/// Head outputs mapped to distribution parameters.
struct HeadView {
    mean_pc: f64,
    mean_penalty: f64,
    logit: f64,
    std_pc: f64,
    std_penalty: f64,
    half_pc: f64,
    half_penalty: f64,
}

fn head_view(params: &PolicyParams, config: &PpoConfig, head: &[f64]) -> HeadView {
    let (pc_lo, pc_hi) = config.pc_bounds;
    let (p_lo, p_hi) = config.penalty_bounds;
    let half_pc = (pc_hi - pc_lo) / 2.0;
    let half_penalty = (p_hi - p_lo) / 2.0;
    HeadView {
        mean_pc: (pc_lo + pc_hi) / 2.0 + half_pc * head[0],
        mean_penalty: (p_lo + p_hi) / 2.0 + half_penalty * head[1],
        logit: head[2],
        std_pc: params.log_std_pc.clamp(LOG_STD_MIN, LOG_STD_MAX).exp(),
        std_penalty: params.log_std_penalty.clamp(LOG_STD_MIN, LOG_STD_MAX).exp(),
        half_pc,
        half_penalty,
    }
}

/// Draws a mechanism. Continuous draws are clamped into their bounds after
/// the log-probability is taken on the raw Gaussian samples.
pub fn sample_action<R: Rng>(
    state: &UpperState,
    params: &PolicyParams,
    config: &PpoConfig,
    rng: &mut R,
) -> (MechanismParams, RawAction, f64) {
    let head = params.actor.forward(&state.features());
    let view = head_view(params, config, &head);

    let pc_draw = Normal::new(view.mean_pc, view.std_pc)
        .expect("std positive by construction")
        .sample(rng);
    let penalty_draw = Normal::new(view.mean_penalty, view.std_penalty)
        .expect("std positive by construction")
        .sample(rng);
    let p_clear = sigmoid(view.logit);
    let mr = u8::from(rng.gen::<f64>() < p_clear);

    let raw = RawAction { pc_draw, penalty_draw, mr };
    let log_prob = log_prob_of(params, config, state, &raw);

    let mech = MechanismParams {
        price_cap: pc_draw.clamp(config.pc_bounds.0, config.pc_bounds.1),
        settlement: Settlement::from_index(mr),
        penalty_coeff: penalty_draw.clamp(config.penalty_bounds.0, config.penalty_bounds.1),
    };
    (mech, raw, log_prob)
}

/// Joint log-probability of a raw action under the current policy.
pub fn log_prob_of(
    params: &PolicyParams,
    config: &PpoConfig,
    state: &UpperState,
    raw: &RawAction,
) -> f64 {
    let head = params.actor.forward(&state.features());
    let view = head_view(params, config, &head);
    let p_clear = sigmoid(view.logit);
    let bernoulli = if raw.mr == 1 { p_clear.ln() } else { (1.0 - p_clear).ln() };
    gaussian_log_density(raw.pc_draw, view.mean_pc, view.std_pc)
        + gaussian_log_density(raw.penalty_draw, view.mean_penalty, view.std_penalty)
        + bernoulli
}

/// Deterministic readout of the policy at a state: the two Gaussian means and
/// the pay-as-clear probability.
pub fn action_means(params: &PolicyParams, config: &PpoConfig, state: &UpperState) -> (f64, f64, f64) {
    let head = params.actor.forward(&state.features());
    let view = head_view(params, config, &head);
    (view.mean_pc, view.mean_penalty, sigmoid(view.logit))
}

/// Policy entropy at a state: two Gaussian closed forms plus the Bernoulli
/// term.
pub fn policy_entropy(params: &PolicyParams, config: &PpoConfig, state: &UpperState) -> f64 {
    let head = params.actor.forward(&state.features());
    let view = head_view(params, config, &head);
    let gauss = |std: f64| 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + std.ln();
    let p = sigmoid(view.logit);
    let bernoulli = if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    };
    gauss(view.std_pc) + gauss(view.std_penalty) + bernoulli
}

/// One-step TD advantage: r + gamma * V(s') - V(s), without the bootstrap on
/// terminal transitions.
pub fn advantage(transition: &Transition, critic: &Net, gamma: f64) -> f64 {
    let v_s = critic.forward(&transition.state.features())[0];
    let bootstrap = if transition.terminal {
        0.0
    } else {
        gamma * critic.forward(&transition.next_state.features())[0]
    };
    transition.reward + bootstrap - v_s
}

/// min(ratio * adv, clip(ratio) * adv) and its derivative wrt the ratio.
fn surrogate_term(ratio: f64, adv: f64, clip_epsilon: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

/// Clipped surrogate objective over a batch under candidate parameters.
pub fn actor_objective(
    batch: &[Transition],
    params: &PolicyParams,
    config: &PpoConfig,
    old_log_probs: &[f64],
    advantages: &[f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for ((t, old_lp), adv) in batch.iter().zip(old_log_probs).zip(advantages) {
        let ratio = (log_prob_of(params, config, &t.state, &t.raw) - old_lp).exp();
        total += surrogate_term(ratio, *adv, config.clip_epsilon).0;
    }
    Ok(total / batch.len() as f64)
}

/// Mean squared error between V_phi(s) and the frozen one-step targets
/// r + gamma * V_phi_old(s').
pub fn critic_loss(batch: &[Transition], critic: &Net, old_critic: &Net, gamma: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for t in batch {
        let target = critic_target(t, old_critic, gamma);
        let v = critic.forward(&t.state.features())[0];
        total += (v - target).powi(2);
    }
    Ok(total / batch.len() as f64)
}

fn critic_target(t: &Transition, old_critic: &Net, gamma: f64) -> f64 {
    if t.terminal {
        t.reward
    } else {
        t.reward + gamma * old_critic.forward(&t.next_state.features())[0]
    }
}

/// -beta times the mean policy entropy over the batch states.
pub fn entropy_bonus(batch: &[Transition], params: &PolicyParams, config: &PpoConfig, beta: f64) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let mean: f64 = batch
        .iter()
        .map(|t| policy_entropy(params, config, &t.state))
        .sum::<f64>()
        / batch.len() as f64;
    -beta * mean
}

/// Actor gradient pieces for one update direction (descent on the negated
/// ascent objective J_actor + c2 * beta * mean entropy).
pub struct ActorGradient {
    pub net: NetGradient,
    pub log_std_pc: f64,
    pub log_std_penalty: f64,
}

/// Descent gradient of -(J_actor + c2 * beta * mean entropy) over a
/// minibatch.
fn actor_gradient(
    batch: &[Transition],
    params: &PolicyParams,
    config: &PpoConfig,
    old_log_probs: &[f64],
    advantages: &[f64],
) -> ActorGradient {
    let m = batch.len() as f64;
    let mut net_grad = params.actor.zero_gradient();
    let mut g_log_std_pc = 0.0;
    let mut g_log_std_penalty = 0.0;
    let entropy_coeff = config.c2 * config.entropy_beta;

    for ((t, old_lp), adv) in batch.iter().zip(old_log_probs).zip(advantages) {
        let features = t.state.features();
        let trace = params.actor.forward_trace(&features);
        let head = trace.output().to_vec();
        let view = head_view(params, config, &head);

        let lp = log_prob_of(params, config, &t.state, &t.raw);
        let ratio = (lp - old_lp).exp();
        let (_, dterm_dratio) = surrogate_term(ratio, *adv, config.clip_epsilon);
        // d J_actor / d log-prob for this sample.
        let dj_dlp = dterm_dratio * ratio / m;

        let z_pc = (t.raw.pc_draw - view.mean_pc) / view.std_pc;
        let z_penalty = (t.raw.penalty_draw - view.mean_penalty) / view.std_penalty;
        let p_clear = sigmoid(view.logit);

        // d log-prob / d head outputs.
        let dlp_dhead = [
            z_pc / view.std_pc * view.half_pc,
            z_penalty / view.std_penalty * view.half_penalty,
            f64::from(t.raw.mr) - p_clear,
        ];
        // d entropy / d head outputs (only the Bernoulli head depends on it).
        let dh_dlogit = if p_clear <= 0.0 || p_clear >= 1.0 {
            0.0
        } else {
            -view.logit * p_clear * (1.0 - p_clear)
        };

        // Ascent direction on the head, negated into a descent gradient.
        let mut head_grad = [0.0; 3];
        for (i, hg) in head_grad.iter_mut().enumerate() {
            let ascent = dj_dlp * dlp_dhead[i]
                + entropy_coeff / m * if i == 2 { dh_dlogit } else { 0.0 };
            *hg = -ascent;
        }
        let (sample_grad, _) = params.actor.backward(&trace, &head_grad);
        net_grad.add_assign(&sample_grad);

        // Log-std scalars: d lp / d log-std = z^2 - 1; d H / d log-std = 1.
        g_log_std_pc -= dj_dlp * (z_pc * z_pc - 1.0) + entropy_coeff / m;
        g_log_std_penalty -= dj_dlp * (z_penalty * z_penalty - 1.0) + entropy_coeff / m;
    }

    ActorGradient { net: net_grad, log_std_pc: g_log_std_pc, log_std_penalty: g_log_std_penalty }
}

/// Descent gradient of the critic MSE against fixed targets.
fn critic_gradient(batch: &[Transition], critic: &Net, targets: &[f64]) -> NetGradient {
    let m = batch.len() as f64;
    let mut grad = critic.zero_gradient();
    for (t, target) in batch.iter().zip(targets) {
        let trace = critic.forward_trace(&t.state.features());
        let v = trace.output()[0];
        let (sample_grad, _) = critic.backward(&trace, &[2.0 * (v - target) / m]);
        grad.add_assign(&sample_grad);
    }
    grad
}

/// Losses evaluated at update entry (ratios exactly 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoReport {
    pub j_actor: f64,
    pub j_critic: f64,
    pub entropy: f64,
    /// -J_actor + c1 * J_critic + c2 * J_entropy.
    pub combined: f64,
}

/// Runs the configured number of epochs of minibatch updates over the batch.
/// Old log-probs come from collection time and the pre-update critic stays
/// frozen for advantages and targets throughout.
pub fn ppo_update(
    batch: &[Transition],
    params: &mut PolicyParams,
    config: &PpoConfig,
) -> Result<PpoReport> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }

    let old_critic = params.critic.clone();
    let old_log_probs: Vec<f64> = batch.iter().map(|t| t.log_prob).collect();
    let advantages: Vec<f64> = batch.iter().map(|t| advantage(t, &old_critic, config.gamma)).collect();
    let targets: Vec<f64> = batch.iter().map(|t| critic_target(t, &old_critic, config.gamma)).collect();

    let entropy = -entropy_bonus(batch, params, config, 1.0);
    let j_actor = actor_objective(batch, params, config, &old_log_probs, &advantages)?;
    let j_critic = critic_loss(batch, &params.critic, &old_critic, config.gamma)?;
    let report = PpoReport {
        j_actor,
        j_critic,
        entropy,
        combined: -j_actor + config.c1 * j_critic + config.c2 * (-config.entropy_beta * entropy),
    };

    for _ in 0..config.epochs {
        let mut start = 0;
        while start < batch.len() {
            let end = (start + config.minibatch_size).min(batch.len());
            let mb = &batch[start..end];
            let mb_old = &old_log_probs[start..end];
            let mb_adv = &advantages[start..end];
            let mb_targets = &targets[start..end];

            let actor_grad = actor_gradient(mb, params, config, mb_old, mb_adv);
            params.actor.apply_update(&actor_grad.net, config.actor_rate);
            params.log_std_pc = (params.log_std_pc - config.actor_rate * actor_grad.log_std_pc)
                .clamp(LOG_STD_MIN, LOG_STD_MAX);
            params.log_std_penalty = (params.log_std_penalty
                - config.actor_rate * actor_grad.log_std_penalty)
                .clamp(LOG_STD_MIN, LOG_STD_MAX);

            let critic_grad = critic_gradient(mb, &params.critic, mb_targets);
            params.critic.apply_update(&critic_grad, config.critic_rate);

            start = end;
        }
    }

    Ok(report)
}
