//! The bilevel loop. Each upper-level step fixes a mechanism, simulates and
//! trains one month of the hourly day-ahead market, aggregates the monthly
//! indicators, scores them for PPO, and repeats until the early-stopping rule
//! fires or the step budget runs out. Agents warm-start across months by
//! default so the lower level keeps learning as the mechanism moves.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dqn::{action_space, bid_for_action, Agent, Experience, N_FEATURES};
use crate::error::{Error, Result};
use crate::market::{
    clear_hour, genco_reward, market_metrics, realize_renewable, GencoKind, GencoSpec,
    HourlyClearingResult, MarketMetrics, MechanismParams,
};
use crate::ppo::{ppo_update, sample_action, PolicyParams, PpoConfig, Transition, UpperState};
use crate::rng::SeedSplitter;

pub const HOURS_PER_DAY: usize = 24;

/// Upper reward weights; social welfare is divided by
/// `sw_normalizer` and clamped to [0, 1] before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub sw_normalizer: f64,
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.w1 < 0.0 || self.w2 < 0.0 {
            return Err(Error::ShapeMismatch("reward weights must be >= 0".into()));
        }
        if (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return Err(Error::ShapeMismatch(format!(
                "reward weights must sum to 1, got {} + {}",
                self.w1, self.w2
            )));
        }
        if !(self.sw_normalizer > 0.0) {
            return Err(Error::ShapeMismatch("sw_normalizer must be > 0".into()));
        }
        Ok(())
    }
}

/// w1 * clamp(SW / normalizer, 0, 1) + w2 * RP.
pub fn upper_reward(metrics: &MarketMetrics, weights: &RewardWeights) -> f64 {
    let sw = (metrics.social_welfare / weights.sw_normalizer).clamp(0.0, 1.0);
    weights.w1 * sw + weights.w2 * metrics.renewable_penetration
}

/// Convergence rule: stop once the last `window` consecutive relative
/// social-welfare changes all fall below `threshold`, or once the upper-step
/// budget is exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    pub threshold: f64,
    pub window: usize,
    pub max_upper_steps: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { threshold: 0.20, window: 3, max_upper_steps: 50 }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::ShapeMismatch(format!(
                "stop threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.window == 0 || self.max_upper_steps == 0 {
            return Err(Error::ShapeMismatch("stop window and max_upper_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// `sw_history` holds one entry per completed month, the initial month first;
/// upper steps completed = len - 1.
pub fn should_stop(sw_history: &[f64], rule: &StopRule) -> bool {
    if sw_history.len().saturating_sub(1) >= rule.max_upper_steps {
        return true;
    }
    if sw_history.len() < rule.window + 1 {
        return false;
    }
    sw_history
        .windows(2)
        .rev()
        .take(rule.window)
        .all(|pair| (pair[1] - pair[0]).abs() / pair[0].abs().max(1.0) < rule.threshold)
}

/// Hourly demand for a whole month, day-major: `hours[day * 24 + hour]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub hours: Vec<f64>,
}

impl DemandProfile {
    pub fn new(hours: Vec<f64>) -> Result<Self> {
        let profile = DemandProfile { hours };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hours.is_empty() || self.hours.len() % HOURS_PER_DAY != 0 {
            return Err(Error::MalformedDemandProfile(format!(
                "hour count {} is not a positive multiple of {HOURS_PER_DAY}",
                self.hours.len()
            )));
        }
        if self.hours.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::MalformedDemandProfile("demand must be finite and >= 0".into()));
        }
        if self.peak() <= 0.0 {
            return Err(Error::MalformedDemandProfile("demand must not be all zero".into()));
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        self.hours.len() / HOURS_PER_DAY
    }

    pub fn peak(&self) -> f64 {
        self.hours.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.hours.iter().sum()
    }
}

/// Static market setting shared by every month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub gencos: Vec<GencoSpec>,
    pub demand: DemandProfile,
    /// Consumer valuation V, USD/MWh.
    pub valuation: f64,
    /// Upper bound of the price-cap action range, used to normalize the
    /// cap feature.
    pub pc_max: f64,
}

/// Per-(day, agent) training telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentDayStats {
    pub day: usize,
    pub agent: usize,
    pub mean_loss: f64,
    pub epsilon: f64,
    pub mean_reward: f64,
}

/// Everything one simulated month produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthReport {
    pub mechanism: MechanismParams,
    pub metrics: MarketMetrics,
    /// Cumulative raw USD reward per agent over the month.
    pub agent_rewards: Vec<f64>,
    pub day_stats: Vec<AgentDayStats>,
    pub total_unserved: f64,
    /// Wall-clock seconds; excluded from deterministic outputs.
    pub wall_seconds: f64,
}

/// Rolling lower-level market session state: what agents observed last hour.
struct SessionState {
    prev_price: f64,
    prev_dispatch: Vec<f64>,
    prev_participation: Vec<bool>,
}

fn features_for(
    agent: usize,
    demand: f64,
    demand_peak: f64,
    hour_of_day: usize,
    session: &SessionState,
    scenario: &Scenario,
    mech: &MechanismParams,
) -> [f64; N_FEATURES] {
    let spec = &scenario.gencos[agent];
    [
        demand / demand_peak,
        hour_of_day as f64 / (HOURS_PER_DAY - 1) as f64,
        (session.prev_price / mech.price_cap).clamp(0.0, 1.0),
        (session.prev_dispatch[agent] / spec.capacity).clamp(0.0, 1.0),
        if session.prev_participation[agent] { 1.0 } else { 0.0 },
        (mech.price_cap / scenario.pc_max).clamp(0.0, 1.0),
    ]
}

/// Simulates and trains one month under a fixed mechanism.
///
/// Every hour: build features, let each agent pick an action, assemble bids,
/// clear, draw renewable realizations, score rewards, store experiences (the
/// 24th hour of each day is terminal), and run one training step per agent.
pub fn run_month(
    mech: &MechanismParams,
    agents: &mut [Agent],
    scenario: &Scenario,
    market_rng: &mut ChaCha8Rng,
    agent_rngs: &mut [ChaCha8Rng],
) -> Result<MonthReport> {
    scenario.demand.validate()?;
    let start = std::time::Instant::now();
    let n_agents = agents.len();
    assert_eq!(n_agents, scenario.gencos.len(), "one agent per genco");
    assert_eq!(n_agents, agent_rngs.len(), "one rng stream per agent");

    let mut session = SessionState {
        prev_price: 0.0,
        prev_dispatch: vec![0.0; n_agents],
        prev_participation: vec![false; n_agents],
    };

    let days = scenario.demand.days();
    let demand_peak = scenario.demand.peak();
    let mut results: Vec<HourlyClearingResult> = Vec::with_capacity(days * HOURS_PER_DAY);
    let mut offered: Vec<f64> = Vec::with_capacity(days * HOURS_PER_DAY);
    let mut agent_rewards = vec![0.0; n_agents];
    let mut day_stats = Vec::with_capacity(days * n_agents);
    let mut total_unserved = 0.0;

    for day in 0..days {
        let mut day_loss = vec![(0.0, 0usize); n_agents];
        let mut day_reward = vec![0.0; n_agents];
        for hour_of_day in 0..HOURS_PER_DAY {
            let hour = day * HOURS_PER_DAY + hour_of_day;
            let demand = scenario.demand.hours[hour];

            let features: Vec<[f64; N_FEATURES]> = (0..n_agents)
                .map(|i| features_for(i, demand, demand_peak, hour_of_day, &session, scenario, mech))
                .collect();
            let actions: Vec<usize> = (0..n_agents)
                .map(|i| agents[i].select_action(&features[i], &mut agent_rngs[i]))
                .collect();

            let mut bids = Vec::with_capacity(n_agents);
            for (i, spec) in scenario.gencos.iter().enumerate() {
                let space = action_space(mech, &agents[i].config);
                bids.push(bid_for_action(spec, &space[actions[i]]));
            }
            let result = clear_hour(&bids, demand, mech)?;
            offered.push(bids.iter().filter(|b| b.participate).map(|b| b.quantity).sum());
            total_unserved += result.unserved;

            // Realized output and rewards.
            let mut next_session = SessionState {
                prev_price: result.clearing_price,
                prev_dispatch: result.dispatch.clone(),
                prev_participation: bids.iter().map(|b| b.participate).collect(),
            };
            if next_session.prev_dispatch.len() < n_agents {
                next_session.prev_dispatch.resize(n_agents, 0.0);
            }

            let terminal = hour_of_day == HOURS_PER_DAY - 1;
            for (i, spec) in scenario.gencos.iter().enumerate() {
                let dispatched = result.dispatch.get(i).copied().unwrap_or(0.0);
                let realized = if spec.kind == GencoKind::Renewable {
                    realize_renewable(spec, dispatched, market_rng)
                } else {
                    dispatched
                };
                let reward = genco_reward(
                    spec,
                    &bids[i],
                    &result,
                    realized,
                    session.prev_participation[i],
                    mech,
                );
                agent_rewards[i] += reward;
                day_reward[i] += reward;

                let next_features = if terminal {
                    [0.0; N_FEATURES]
                } else {
                    features_for(
                        i,
                        scenario.demand.hours[hour + 1],
                        demand_peak,
                        hour_of_day + 1,
                        &next_session,
                        scenario,
                        mech,
                    )
                };
                agents[i].push_experience(Experience {
                    features: features[i],
                    action: actions[i],
                    reward: reward / agents[i].config.reward_scale,
                    next_features,
                    terminal,
                });
                if let Some(loss) = agents[i].train_step(&mut agent_rngs[i]) {
                    day_loss[i].0 += loss;
                    day_loss[i].1 += 1;
                }
            }

            session = next_session;
            results.push(result);
        }

        for i in 0..n_agents {
            let (loss_sum, loss_count) = day_loss[i];
            day_stats.push(AgentDayStats {
                day,
                agent: i,
                mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
                epsilon: agents[i].epsilon,
                mean_reward: day_reward[i] / HOURS_PER_DAY as f64,
            });
        }
    }

    let metrics = market_metrics(&results, &scenario.gencos, &offered, scenario.valuation);
    Ok(MonthReport {
        mechanism: *mech,
        metrics,
        agent_rewards,
        day_stats,
        total_unserved,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One month of lower-level simulation under a mechanism. The trait exists so
/// synthetic lower levels can stand in for the full market in tests and
/// calibration runs.
pub trait LowerLevel {
    fn simulate_month(&mut self, mech: &MechanismParams) -> Result<MonthReport>;
}

/// The real market lower level: six learning agents on the bundled scenario.
pub struct MarketLowerLevel {
    pub scenario: Scenario,
    pub agents: Vec<Agent>,
    /// Re-initialize agents each month instead of carrying them over.
    pub cold_start: bool,
    initial_agents: Vec<Agent>,
    market_rng: ChaCha8Rng,
    agent_rngs: Vec<ChaCha8Rng>,
}

impl MarketLowerLevel {
    pub fn new(scenario: Scenario, agents: Vec<Agent>, seeds: &SeedSplitter, cold_start: bool) -> Self {
        let market_rng = seeds.stream("market-deviation");
        let agent_rngs = (0..agents.len()).map(|i| seeds.indexed_stream("agent", i)).collect();
        MarketLowerLevel {
            scenario,
            initial_agents: agents.clone(),
            agents,
            cold_start,
            market_rng,
            agent_rngs,
        }
    }
}

impl LowerLevel for MarketLowerLevel {
    fn simulate_month(&mut self, mech: &MechanismParams) -> Result<MonthReport> {
        if self.cold_start {
            self.agents = self.initial_agents.clone();
        }
        run_month(mech, &mut self.agents, &self.scenario, &mut self.market_rng, &mut self.agent_rngs)
    }
}

/// Orchestration knobs that are not owned by any single level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub initial_mechanism: MechanismParams,
    pub weights: RewardWeights,
    pub stop: StopRule,
    /// Upper transitions collected per PPO update.
    pub ppo_batch: usize,
}

/// Per-upper-step telemetry row. The loss fields are present only on steps
/// where a PPO update ran (every `ppo_batch` steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoTraceRow {
    pub step: usize,
    pub price_cap: f64,
    /// 0 = pay-as-bid, 1 = pay-as-clear.
    pub settlement: u8,
    pub penalty: f64,
    pub reward: f64,
    pub j_actor: Option<f64>,
    pub j_critic: Option<f64>,
    pub entropy: Option<f64>,
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// Month 0 ran under the initial mechanism; months 1.. under PPO actions.
    pub months: Vec<MonthReport>,
    pub ppo_trace: Vec<PpoTraceRow>,
    /// Action of the best-reward PPO month (the initial mechanism if none ran).
    pub final_mechanism: MechanismParams,
    pub final_social_welfare: f64,
    pub initial_social_welfare: f64,
    pub stopped_early: bool,
}

/// Observer hooks for streaming results out as they are produced.
pub trait ExperimentObserver {
    fn on_month(&mut self, _index: usize, _report: &MonthReport) {}
    fn on_ppo_step(&mut self, _row: &PpoTraceRow) {}
}

/// No-op observer.
impl ExperimentObserver for () {}

/// Runs the closed loop: PPO samples a mechanism, the lower level simulates a
/// month, the monthly reward feeds PPO, until `should_stop`.
pub fn run_experiment<L: LowerLevel, O: ExperimentObserver>(
    lower: &mut L,
    policy: &mut PolicyParams,
    ppo_config: &PpoConfig,
    settings: &ExperimentSettings,
    ppo_rng: &mut ChaCha8Rng,
    observer: &mut O,
) -> Result<ExperimentRecord> {
    settings.weights.validate()?;
    settings.stop.validate()?;
    ppo_config.validate()?;
    if settings.ppo_batch == 0 {
        return Err(Error::ShapeMismatch("ppo_batch must be >= 1".into()));
    }

    let mut months = Vec::new();
    let mut ppo_trace = Vec::new();

    log::info!("month 0: initial mechanism {:?}", settings.initial_mechanism);
    let month0 = lower.simulate_month(&settings.initial_mechanism)?;
    let initial_social_welfare = month0.metrics.social_welfare;
    let mut sw_history = vec![initial_social_welfare];
    let mut state = UpperState::from_metrics(&month0.metrics);
    observer.on_month(0, &month0);
    months.push(month0);

    let mut pending: Vec<Transition> = Vec::new();
    let stopped_early;
    let mut step = 0usize;
    loop {
        if should_stop(&sw_history, &settings.stop) {
            stopped_early = step < settings.stop.max_upper_steps;
            break;
        }
        step += 1;

        let (mech, raw, log_prob) = sample_action(&state, policy, ppo_config, ppo_rng);
        let report = lower.simulate_month(&mech)?;
        let reward = upper_reward(&report.metrics, &settings.weights);
        let next_state = UpperState::from_metrics(&report.metrics);
        let terminal = step >= settings.stop.max_upper_steps;

        pending.push(Transition {
            state,
            raw,
            log_prob,
            reward,
            next_state,
            terminal,
            value_estimate: policy.value(&state),
        });

        let mut row = PpoTraceRow {
            step,
            price_cap: mech.price_cap,
            settlement: mech.settlement.index(),
            penalty: mech.penalty_coeff,
            reward,
            j_actor: None,
            j_critic: None,
            entropy: None,
        };
        if pending.len() >= settings.ppo_batch {
            let ppo_report = ppo_update(&pending, policy, ppo_config)?;
            row.j_actor = Some(ppo_report.j_actor);
            row.j_critic = Some(ppo_report.j_critic);
            row.entropy = Some(ppo_report.entropy);
            pending.clear();
        }
        log::info!(
            "upper step {step}: PC {:.1} {} P {:.3} -> reward {reward:.4} (SW {:.0})",
            mech.price_cap,
            mech.settlement,
            mech.penalty_coeff,
            report.metrics.social_welfare
        );

        sw_history.push(report.metrics.social_welfare);
        state = next_state;
        observer.on_month(step, &report);
        observer.on_ppo_step(&row);
        ppo_trace.push(row);
        months.push(report);
    }

    // Best-reward PPO month defines the learned mechanism.
    let best = ppo_trace
        .iter()
        .max_by(|a, b| a.reward.partial_cmp(&b.reward).expect("rewards finite"));
    let (final_mechanism, final_social_welfare) = match best {
        Some(row) => (months[row.step].mechanism, months[row.step].metrics.social_welfare),
        None => (settings.initial_mechanism, initial_social_welfare),
    };

    Ok(ExperimentRecord {
        months,
        ppo_trace,
        final_mechanism,
        final_social_welfare,
        initial_social_welfare,
        stopped_early,
    })
}
