//! Experiment record persistence: a directory with a config echo (JSON),
//! monthly metrics (CSV), the PPO trace (CSV), per-agent training telemetry
//! (CSV), and a final summary (JSON). CSV rows stream out as months complete
//! so partial results survive an aborted run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::market::Settlement;
use crate::orchestrator::{ExperimentObserver, ExperimentRecord, MonthReport, PpoTraceRow};

pub const MONTHLY_CSV: &str = "monthly.csv";
pub const PPO_TRACE_CSV: &str = "ppo_trace.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CONFIG_ECHO_JSON: &str = "config_echo.json";
pub const AGENTS_DIR: &str = "agents";

pub const MONTHLY_HEADER: &str = "month,price_cap,settlement,penalty_coeff,social_welfare,hhi,renewable_penetration,supply_demand_ratio,total_unserved";
pub const PPO_HEADER: &str = "step,price_cap,settlement,penalty_coeff,reward,j_actor,j_critic,entropy";
pub const AGENT_HEADER: &str = "episode,agent,mean_loss,epsilon,mean_reward";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn monthly_csv_row(month: usize, report: &MonthReport) -> String {
    let m = &report.metrics;
    format!(
        "{month},{},{},{},{},{},{},{},{}",
        report.mechanism.price_cap,
        report.mechanism.settlement.index(),
        report.mechanism.penalty_coeff,
        m.social_welfare,
        m.hhi,
        m.renewable_penetration,
        m.supply_demand_ratio,
        report.total_unserved
    )
}

pub fn ppo_csv_row(row: &PpoTraceRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.step,
        row.price_cap,
        row.settlement,
        row.penalty,
        row.reward,
        opt(row.j_actor),
        opt(row.j_critic),
        opt(row.entropy)
    )
}

/// Streams experiment telemetry into an output directory as it is produced.
pub struct CsvObserver {
    monthly: BufWriter<File>,
    ppo: BufWriter<File>,
    agents: Vec<BufWriter<File>>,
    days_seen: usize,
}

impl CsvObserver {
    pub fn create(dir: &Path, n_agents: usize) -> Result<Self> {
        fs::create_dir_all(dir.join(AGENTS_DIR))?;
        let mut monthly = BufWriter::new(File::create(dir.join(MONTHLY_CSV))?);
        writeln!(monthly, "{MONTHLY_HEADER}")?;
        let mut ppo = BufWriter::new(File::create(dir.join(PPO_TRACE_CSV))?);
        writeln!(ppo, "{PPO_HEADER}")?;
        let mut agents = Vec::with_capacity(n_agents);
        for i in 0..n_agents {
            let mut file =
                BufWriter::new(File::create(dir.join(AGENTS_DIR).join(format!("agent-{i}.csv")))?);
            writeln!(file, "{AGENT_HEADER}")?;
            agents.push(file);
        }
        Ok(CsvObserver { monthly, ppo, agents, days_seen: 0 })
    }

    pub fn finish(mut self) -> Result<()> {
        self.monthly.flush()?;
        self.ppo.flush()?;
        for agent in &mut self.agents {
            agent.flush()?;
        }
        Ok(())
    }
}

impl ExperimentObserver for CsvObserver {
    fn on_month(&mut self, index: usize, report: &MonthReport) {
        // I/O failures surface at finish(); rows themselves never fail to format.
        let _ = writeln!(self.monthly, "{}", monthly_csv_row(index, report));
        let _ = self.monthly.flush();
        let mut month_days = 0;
        for stats in &report.day_stats {
            if let Some(file) = self.agents.get_mut(stats.agent) {
                let _ = writeln!(
                    file,
                    "{},{},{},{},{}",
                    self.days_seen + stats.day,
                    stats.agent,
                    stats.mean_loss,
                    stats.epsilon,
                    stats.mean_reward
                );
            }
            month_days = month_days.max(stats.day + 1);
        }
        for file in &mut self.agents {
            let _ = file.flush();
        }
        self.days_seen += month_days;
    }

    fn on_ppo_step(&mut self, row: &PpoTraceRow) {
        let _ = writeln!(self.ppo, "{}", ppo_csv_row(row));
        let _ = self.ppo.flush();
    }
}

/// Final summary persisted as JSON next to the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub backend: String,
    pub months_run: usize,
    pub upper_steps: usize,
    pub stopped_early: bool,
    pub final_price_cap: f64,
    pub final_settlement: Settlement,
    pub final_penalty_coeff: f64,
    pub final_social_welfare: f64,
    pub initial_social_welfare: f64,
    pub total_wall_seconds: f64,
}

impl Summary {
    pub fn from_record(backend: &str, record: &ExperimentRecord) -> Self {
        Summary {
            backend: backend.to_string(),
            months_run: record.months.len(),
            upper_steps: record.ppo_trace.len(),
            stopped_early: record.stopped_early,
            final_price_cap: record.final_mechanism.price_cap,
            final_settlement: record.final_mechanism.settlement,
            final_penalty_coeff: record.final_mechanism.penalty_coeff,
            final_social_welfare: record.final_social_welfare,
            initial_social_welfare: record.initial_social_welfare,
            total_wall_seconds: record.months.iter().map(|m| m.wall_seconds).sum(),
        }
    }
}

/// Writes the non-streamed parts of the record directory.
pub fn write_record(
    dir: &Path,
    backend: &str,
    config: &ExperimentConfig,
    record: &ExperimentRecord,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_ECHO_JSON), config.to_json())?;
    let summary = Summary::from_record(backend, record);
    fs::write(dir.join(SUMMARY_JSON), serde_json::to_string_pretty(&summary)?)?;
    Ok(dir.to_path_buf())
}

/// One arm of the backend comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonArm {
    pub settlement: Settlement,
    pub final_price_cap: f64,
    pub penalty_coeff: f64,
    pub social_welfare: f64,
}

impl ComparisonArm {
    pub fn from_record(record: &ExperimentRecord) -> Self {
        ComparisonArm {
            settlement: record.final_mechanism.settlement,
            final_price_cap: record.final_mechanism.price_cap,
            penalty_coeff: record.final_mechanism.penalty_coeff,
            social_welfare: record.final_social_welfare,
        }
    }
}

/// Published reference results displayed alongside desk-scale runs for
/// orientation; not reproduced by the bundled synthetic scenario.
pub fn reference_arms() -> (ComparisonArm, ComparisonArm) {
    (
        ComparisonArm {
            settlement: Settlement::PayAsClear,
            final_price_cap: 396.0,
            penalty_coeff: 0.09,
            social_welfare: 3_520_736.0,
        },
        ComparisonArm {
            settlement: Settlement::PayAsClear,
            final_price_cap: 125.0,
            penalty_coeff: 0.15,
            social_welfare: 1_354_578.0,
        },
    )
}

/// Side-by-side results of the two Q-function backends on one scenario and
/// seed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub with_vqc: Option<ComparisonArm>,
    pub without_vqc: Option<ComparisonArm>,
    pub reference_with_vqc: ComparisonArm,
    pub reference_without_vqc: ComparisonArm,
}

impl ComparisonSummary {
    pub fn new(with_vqc: Option<ComparisonArm>, without_vqc: Option<ComparisonArm>) -> Self {
        let (reference_with_vqc, reference_without_vqc) = reference_arms();
        ComparisonSummary { with_vqc, without_vqc, reference_with_vqc, reference_without_vqc }
    }

    pub fn complete(&self) -> bool {
        self.with_vqc.is_some() && self.without_vqc.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries are always serializable")
    }

    /// Four metric rows by two result arms, plus the reference annotation
    /// columns.
    pub fn to_csv(&self) -> String {
        fn field(arm: &Option<ComparisonArm>, pick: impl Fn(&ComparisonArm) -> String) -> String {
            arm.as_ref().map(pick).unwrap_or_default()
        }
        let mut out = String::from(
            "metric,with_vqc,without_vqc,reference_with_vqc,reference_without_vqc\n",
        );
        let rows: [(&str, Box<dyn Fn(&ComparisonArm) -> String>); 4] = [
            ("settlement_rule", Box::new(|a| a.settlement.to_string())),
            ("final_price_cap", Box::new(|a| a.final_price_cap.to_string())),
            ("penalty_coefficient", Box::new(|a| a.penalty_coeff.to_string())),
            ("social_welfare", Box::new(|a| a.social_welfare.to_string())),
        ];
        for (name, pick) in rows {
            out.push_str(&format!(
                "{name},{},{},{},{}\n",
                field(&self.with_vqc, &pick),
                field(&self.without_vqc, &pick),
                pick(&self.reference_with_vqc),
                pick(&self.reference_without_vqc),
            ));
        }
        out
    }
}

/// Parses a monthly.csv produced by this build; the round-trip partner of
/// `monthly_csv_row`.
pub fn parse_monthly_csv(text: &str) -> Result<Vec<(usize, f64, u8, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != MONTHLY_HEADER {
                return Err(Error::ShapeMismatch(format!("unexpected monthly header: {line}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::ShapeMismatch(format!(
                "monthly row {i} has {} fields, expected 9",
                fields.len()
            )));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::ShapeMismatch(format!("monthly row {i}: {e}")))
        };
        rows.push((
            fields[0]
                .parse::<usize>()
                .map_err(|e| Error::ShapeMismatch(format!("monthly row {i}: {e}")))?,
            parse_f(fields[1])?,
            fields[2]
                .parse::<u8>()
                .map_err(|e| Error::ShapeMismatch(format!("monthly row {i}: {e}")))?,
            parse_f(fields[3])?,
            parse_f(fields[4])?,
        ));
    }
    Ok(rows)
}
