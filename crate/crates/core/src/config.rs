//! Experiment configuration: JSON schema with full defaulting, strict
//! unknown-key rejection, cross-field validation, and the bundled synthetic
//! scenario (six GENCOs, sinusoidal demand).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dqn::AgentConfig;
use crate::market::{parse_gencos, GencoKind, GencoSpec, MechanismParams, Settlement};
use crate::orchestrator::{DemandProfile, RewardWeights, Scenario, StopRule, HOURS_PER_DAY};
use crate::ppo::PpoConfig;

/// Configuration loading and validation failures, kept separate from runtime
/// errors so the CLI can map them to a distinct exit code.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Vqc,
    Mlp,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Vqc => write!(f, "vqc"),
            BackendKind::Mlp => write!(f, "mlp"),
        }
    }
}

/// Where the GENCO dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GencoSource {
    Bundled,
    Path { path: String },
    Inline { gencos: Vec<GencoSpec> },
}

impl Default for GencoSource {
    fn default() -> Self {
        GencoSource::Bundled
    }
}

/// Sinusoidal day shape scaled by total installed capacity, with a slow
/// modulation across the month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinusoidalDemand {
    pub peak_fraction: f64,
    pub trough_fraction: f64,
    pub peak_hour: usize,
    pub monthly_modulation: f64,
}

impl Default for SinusoidalDemand {
    fn default() -> Self {
        SinusoidalDemand {
            peak_fraction: 0.8,
            trough_fraction: 0.4,
            peak_hour: 18,
            monthly_modulation: 0.05,
        }
    }
}

/// Where the demand profile comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSource {
    Sinusoidal(SinusoidalDemand),
    Path { path: String },
    Inline { hours: Vec<f64> },
}

impl Default for DemandSource {
    fn default() -> Self {
        DemandSource::Sinusoidal(SinusoidalDemand::default())
    }
}

/// Circuit settings for the quantum backend. Action count and feature ranges
/// are derived from the rest of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqcSettings {
    pub n_layers: usize,
    pub tie_ry_rz: bool,
}

impl Default for VqcSettings {
    fn default() -> Self {
        VqcSettings { n_layers: 2, tie_ry_rz: true }
    }
}

/// Upper reward weighting; `sw_normalizer` defaults to the social-welfare
/// upper bound V * total monthly demand when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub w1: f64,
    pub w2: f64,
    pub sw_normalizer: Option<f64>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig { w1: 0.7, w2: 0.3, sw_normalizer: None }
    }
}

/// Starting mechanism for month 0: pay-as-bid, cap 100 USD/MWh, 10% penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialMechanism {
    pub price_cap: f64,
    pub settlement: Settlement,
    pub penalty_coeff: f64,
}

impl Default for InitialMechanism {
    fn default() -> Self {
        InitialMechanism {
            price_cap: 100.0,
            settlement: Settlement::PayAsBid,
            penalty_coeff: 0.10,
        }
    }
}

impl From<InitialMechanism> for MechanismParams {
    fn from(m: InitialMechanism) -> Self {
        MechanismParams {
            price_cap: m.price_cap,
            settlement: m.settlement,
            penalty_coeff: m.penalty_coeff,
        }
    }
}

/// Whole-experiment configuration. Every field except `backend` has a
/// default, so a minimal config is `{"backend": "vqc"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub backend: BackendKind,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub gencos: GencoSource,
    #[serde(default)]
    pub demand: DemandSource,
    #[serde(default = "default_days")]
    pub days_per_month: usize,
    #[serde(default = "default_valuation")]
    pub valuation: f64,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub vqc: VqcSettings,
    #[serde(default = "default_hidden")]
    pub mlp_hidden: Vec<usize>,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "default_ppo_batch")]
    pub ppo_batch: usize,
    #[serde(default)]
    pub cold_start: bool,
    #[serde(default)]
    pub initial_mechanism: InitialMechanism,
}

fn default_seed() -> u64 {
    42
}

fn default_days() -> usize {
    30
}

fn default_valuation() -> f64 {
    500.0
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_ppo_batch() -> usize {
    1
}

impl ExperimentConfig {
    pub fn minimal(backend: BackendKind) -> Self {
        serde_json::from_str(&format!(r#"{{"backend": "{backend}"}}"#))
            .expect("minimal config always parses")
    }

    /// Parses a config from JSON text and validates it. Does not touch the
    /// filesystem; dataset paths are resolved later by `build_scenario`.
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs are always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.agent.validate().map_err(|e| invalid("agent", e.to_string()))?;
        self.ppo.validate().map_err(|e| invalid("ppo", e.to_string()))?;
        self.stop.validate().map_err(|e| invalid("stop", e.to_string()))?;
        if self.days_per_month == 0 {
            return Err(invalid("days_per_month", "must be >= 1"));
        }
        if !(self.valuation > 0.0) {
            return Err(invalid("valuation", format!("must be > 0, got {}", self.valuation)));
        }
        if self.ppo_batch == 0 {
            return Err(invalid("ppo_batch", "must be >= 1"));
        }
        if self.weights.w1 < 0.0 || self.weights.w2 < 0.0 {
            return Err(invalid("weights", "w1 and w2 must be >= 0"));
        }
        if (self.weights.w1 + self.weights.w2 - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "weights",
                format!("w1 + w2 must equal 1, got {} + {}", self.weights.w1, self.weights.w2),
            ));
        }
        if let Some(norm) = self.weights.sw_normalizer {
            if !(norm > 0.0) {
                return Err(invalid("weights.sw_normalizer", "must be > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_mechanism.penalty_coeff) {
            return Err(invalid(
                "initial_mechanism.penalty_coeff",
                format!("must be in [0, 1], got {}", self.initial_mechanism.penalty_coeff),
            ));
        }
        if !(self.initial_mechanism.price_cap > 0.0) {
            return Err(invalid("initial_mechanism.price_cap", "must be > 0"));
        }
        if let DemandSource::Sinusoidal(s) = &self.demand {
            if !(s.trough_fraction > 0.0 && s.trough_fraction <= s.peak_fraction) {
                return Err(invalid(
                    "demand",
                    "need 0 < trough_fraction <= peak_fraction",
                ));
            }
            if s.peak_hour >= HOURS_PER_DAY {
                return Err(invalid("demand.peak_hour", "must be in 0..24"));
            }
            if !(0.0..1.0).contains(&s.monthly_modulation) {
                return Err(invalid("demand.monthly_modulation", "must be in [0, 1)"));
            }
        }
        if let GencoSource::Inline { gencos } = &self.gencos {
            crate::market::validate_gencos(gencos).map_err(|e| invalid("gencos", e.to_string()))?;
        }
        Ok(())
    }

    /// Shrinks horizons for quick end-to-end runs.
    pub fn apply_smoke(&mut self) {
        self.days_per_month = 2;
        self.stop.max_upper_steps = 2;
    }
}

/// The bundled six-GENCO dataset: four thermal units and two renewables.
/// Synthetic defaults, declared as such.
pub fn bundled_gencos() -> Vec<GencoSpec> {
    let thermal = |id, capacity, marginal_cost, fixed_cost| GencoSpec {
        id,
        kind: GencoKind::Thermal,
        capacity,
        marginal_cost,
        fixed_cost,
        switching_cost: 40.0,
        forecast_sigma: 0.0,
    };
    let renewable = |id, capacity, fixed_cost| GencoSpec {
        id,
        kind: GencoKind::Renewable,
        capacity,
        marginal_cost: 0.0,
        fixed_cost,
        switching_cost: 20.0,
        forecast_sigma: 0.15,
    };
    vec![
        thermal(0, 40.0, 18.0, 80.0),
        thermal(1, 50.0, 22.0, 100.0),
        thermal(2, 60.0, 28.0, 120.0),
        thermal(3, 80.0, 35.0, 150.0),
        renewable(4, 40.0, 30.0),
        renewable(5, 50.0, 40.0),
    ]
}

fn sinusoidal_profile(shape: &SinusoidalDemand, total_capacity: f64, days: usize) -> Vec<f64> {
    let mid = total_capacity * (shape.peak_fraction + shape.trough_fraction) / 2.0;
    let amp = total_capacity * (shape.peak_fraction - shape.trough_fraction) / 2.0;
    let mut hours = Vec::with_capacity(days * HOURS_PER_DAY);
    for day in 0..days {
        let modulation = 1.0
            + shape.monthly_modulation
                * (2.0 * std::f64::consts::PI * day as f64 / days.max(1) as f64).sin();
        for hour in 0..HOURS_PER_DAY {
            let phase = 2.0 * std::f64::consts::PI * (hour as f64 - shape.peak_hour as f64)
                / HOURS_PER_DAY as f64;
            hours.push((mid + amp * phase.cos()) * modulation);
        }
    }
    hours
}

fn read_to_string(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })
}

/// Resolves dataset references into a concrete `Scenario`. Relative paths are
/// resolved against `base_dir` (normally the config file's directory).
pub fn build_scenario(config: &ExperimentConfig, base_dir: &Path) -> Result<Scenario, ConfigError> {
    let gencos = match &config.gencos {
        GencoSource::Bundled => bundled_gencos(),
        GencoSource::Inline { gencos } => gencos.clone(),
        GencoSource::Path { path } => {
            let text = read_to_string(&base_dir.join(path))?;
            parse_gencos(&text).map_err(|e| invalid("gencos", e.to_string()))?
        }
    };
    crate::market::validate_gencos(&gencos).map_err(|e| invalid("gencos", e.to_string()))?;
    let total_capacity: f64 = gencos.iter().map(|g| g.capacity).sum();

    let hours = match &config.demand {
        DemandSource::Sinusoidal(shape) => {
            sinusoidal_profile(shape, total_capacity, config.days_per_month)
        }
        DemandSource::Inline { hours } => hours.clone(),
        DemandSource::Path { path } => {
            let text = read_to_string(&base_dir.join(path))?;
            serde_json::from_str::<Vec<f64>>(&text)?
        }
    };
    let demand = DemandProfile::new(hours).map_err(|e| invalid("demand", e.to_string()))?;

    Ok(Scenario {
        gencos,
        demand,
        valuation: config.valuation,
        pc_max: config.ppo.pc_bounds.1,
    })
}

/// Reward weights with the normalizer resolved against the scenario:
/// the default is V * total monthly demand, the social-welfare upper bound.
pub fn resolve_weights(config: &ExperimentConfig, scenario: &Scenario) -> RewardWeights {
    let sw_normalizer = config
        .weights
        .sw_normalizer
        .unwrap_or_else(|| config.valuation * scenario.demand.total());
    RewardWeights { w1: config.weights.w1, w2: config.weights.w2, sw_normalizer }
}

/// Loads, parses, and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

/// One learning agent per GENCO with the configured backend, each seeded from
/// its own named stream.
pub fn build_agents(
    config: &ExperimentConfig,
    backend: BackendKind,
    scenario: &Scenario,
    seeds: &crate::rng::SeedSplitter,
) -> Vec<crate::dqn::Agent> {
    use crate::dqn::{Agent, QBackend};
    let n_actions = config.agent.n_actions();
    scenario
        .gencos
        .iter()
        .map(|spec| {
            let backend = match backend {
                BackendKind::Vqc => {
                    let mut rng = seeds.indexed_stream("vqc-init", spec.id);
                    let vqc_config = crate::vqc::VqcConfig {
                        n_layers: config.vqc.n_layers,
                        tie_ry_rz: config.vqc.tie_ry_rz,
                        ..crate::vqc::VqcConfig::new(config.vqc.n_layers, n_actions)
                    };
                    QBackend::Vqc(crate::vqc::VqcQFunction::init(vqc_config, &mut rng))
                }
                BackendKind::Mlp => {
                    let mut rng = seeds.indexed_stream("mlp-init", spec.id);
                    QBackend::Mlp(crate::mlp::MlpParams::init(&config.mlp_hidden, n_actions, &mut rng))
                }
            };
            Agent::new(config.agent.clone(), backend)
        })
        .collect()
}

/// Fresh PPO parameters from the "ppo-init" stream.
pub fn build_policy(config: &ExperimentConfig, seeds: &crate::rng::SeedSplitter) -> crate::ppo::PolicyParams {
    let mut rng = seeds.stream("ppo-init");
    crate::ppo::PolicyParams::init(&config.ppo, &mut rng)
}

/// Orchestration settings resolved against the scenario.
pub fn build_settings(
    config: &ExperimentConfig,
    scenario: &Scenario,
) -> crate::orchestrator::ExperimentSettings {
    crate::orchestrator::ExperimentSettings {
        initial_mechanism: config.initial_mechanism.into(),
        weights: resolve_weights(config, scenario),
        stop: config.stop,
        ppo_batch: config.ppo_batch,
    }
}
