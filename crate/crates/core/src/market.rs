//! Deterministic day-ahead market: bid collection, merit-order clearing under
//! both settlement rules, per-GENCO rewards, and monthly market metrics.
//!
//! Clearing is single-node uniform merit order: participating bids are sorted
//! by ascending price (ties by ascending genco id) and dispatched in order
//! until demand is met, the marginal unit partially. No network constraints.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator technology. `forecast_sigma` must be 0 exactly for thermal units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GencoKind {
    Thermal,
    Renewable,
}

/// Static description of one generating company.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GencoSpec {
    pub id: usize,
    pub kind: GencoKind,
    /// MW.
    pub capacity: f64,
    /// USD/MWh.
    pub marginal_cost: f64,
    /// USD per participating hour.
    pub fixed_cost: f64,
    /// USD per participation toggle.
    pub switching_cost: f64,
    /// Relative std-dev of renewable output error; 0 for thermal.
    pub forecast_sigma: f64,
}

impl GencoSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0) {
            return Err(Error::InvalidGencoDataset(format!(
                "genco {}: capacity must be > 0, got {}",
                self.id, self.capacity
            )));
        }
        if !(self.marginal_cost >= 0.0) {
            return Err(Error::InvalidGencoDataset(format!(
                "genco {}: marginal_cost must be >= 0, got {}",
                self.id, self.marginal_cost
            )));
        }
        if !(self.fixed_cost >= 0.0 && self.switching_cost >= 0.0) {
            return Err(Error::InvalidGencoDataset(format!(
                "genco {}: fixed_cost and switching_cost must be >= 0",
                self.id
            )));
        }
        match self.kind {
            GencoKind::Thermal if self.forecast_sigma != 0.0 => {
                Err(Error::InvalidGencoDataset(format!(
                    "genco {}: thermal units must have forecast_sigma = 0",
                    self.id
                )))
            }
            GencoKind::Renewable if !(self.forecast_sigma > 0.0) => {
                Err(Error::InvalidGencoDataset(format!(
                    "genco {}: renewable units must have forecast_sigma > 0",
                    self.id
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Validates a whole dataset: per-unit invariants plus unique, contiguous ids
/// starting at 0.
pub fn validate_gencos(specs: &[GencoSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidGencoDataset("dataset is empty".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let mut ids: Vec<usize> = specs.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    for (expect, got) in ids.iter().enumerate() {
        if *got != expect {
            return Err(Error::InvalidGencoDataset(format!(
                "ids must be unique and contiguous from 0; missing or duplicate around id {expect}"
            )));
        }
    }
    Ok(())
}

/// Parses a GENCO dataset from JSON text and validates it.
pub fn parse_gencos(json: &str) -> Result<Vec<GencoSpec>> {
    let specs: Vec<GencoSpec> = serde_json::from_str(json)?;
    validate_gencos(&specs)?;
    Ok(specs)
}

/// Settlement rule: pay-as-bid = 0, pay-as-clear = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Settlement {
    PayAsBid,
    PayAsClear,
}

impl Settlement {
    pub fn from_index(i: u8) -> Self {
        if i == 0 {
            Settlement::PayAsBid
        } else {
            Settlement::PayAsClear
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Settlement::PayAsBid => 0,
            Settlement::PayAsClear => 1,
        }
    }
}

impl std::fmt::Display for Settlement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Settlement::PayAsBid => write!(f, "pay_as_bid"),
            Settlement::PayAsClear => write!(f, "pay_as_clear"),
        }
    }
}

/// Upper-level action: price cap, settlement rule, renewable deviation penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// USD/MWh; upper bound on bid prices.
    pub price_cap: f64,
    pub settlement: Settlement,
    /// Fraction in [0, 1] applied to |realized - scheduled| renewable output.
    pub penalty_coeff: f64,
}

/// One supply offer. `price` is meaningful only when `participate` is true.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub genco_id: usize,
    pub participate: bool,
    /// USD/MWh.
    pub price: f64,
    /// MW offered.
    pub quantity: f64,
}

/// Result of clearing one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyClearingResult {
    /// MWh scheduled per genco id (index = id).
    pub dispatch: Vec<f64>,
    /// USD/MWh. Highest accepted bid price; 0 when nothing dispatched.
    pub clearing_price: f64,
    /// USD per genco id.
    pub payments: Vec<f64>,
    /// MWh of demand left unserved.
    pub unserved: f64,
    /// MWh demanded this hour.
    pub demand: f64,
}

impl HourlyClearingResult {
    pub fn served(&self) -> f64 {
        self.demand - self.unserved
    }
}

/// Monthly aggregates handed to the upper level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketMetrics {
    /// USD.
    pub social_welfare: f64,
    /// Herfindahl-Hirschman index in [0, 10000].
    pub hhi: f64,
    /// Fraction of dispatched energy from renewable units, in [0, 1].
    pub renewable_penetration: f64,
    /// Mean over hours of offered capacity / demand (demand-0 hours excluded).
    pub supply_demand_ratio: f64,
}

/// Clears one hour by merit order.
///
/// Participating bids are sorted ascending by price, ties broken by ascending
/// genco id, and dispatched in order until demand is met; the marginal unit is
/// partially dispatched. Pay-as-bid pays each dispatched unit its own bid,
/// pay-as-clear pays every dispatched unit the highest accepted bid price.
pub fn clear_hour(bids: &[Bid], demand: f64, mech: &MechanismParams) -> Result<HourlyClearingResult> {
    if demand < 0.0 || !demand.is_finite() {
        return Err(Error::NegativeDemand(demand));
    }
    let n = bids.iter().map(|b| b.genco_id + 1).max().unwrap_or(0);
    let mut seen = vec![false; n];
    for bid in bids {
        // One bid per GENCO; multi-segment curves are out of contract.
        if seen[bid.genco_id] {
            return Err(Error::InvalidBid {
                genco_id: bid.genco_id,
                reason: "duplicate bid for this genco".into(),
            });
        }
        seen[bid.genco_id] = true;
        if bid.participate {
            if bid.price > mech.price_cap {
                return Err(Error::BidAboveCap {
                    genco_id: bid.genco_id,
                    price: bid.price,
                    cap: mech.price_cap,
                });
            }
            if bid.price < 0.0 || !bid.price.is_finite() {
                return Err(Error::InvalidBid {
                    genco_id: bid.genco_id,
                    reason: format!("negative or non-finite price {}", bid.price),
                });
            }
            if bid.quantity < 0.0 || !bid.quantity.is_finite() {
                return Err(Error::InvalidBid {
                    genco_id: bid.genco_id,
                    reason: format!("negative or non-finite quantity {}", bid.quantity),
                });
            }
        }
    }

    let mut order: Vec<&Bid> = bids.iter().filter(|b| b.participate && b.quantity > 0.0).collect();
    order.sort_by(|a, b| {
        a.price
            .partial_cmp(&b.price)
            .expect("bid prices validated finite")
            .then(a.genco_id.cmp(&b.genco_id))
    });

    let mut dispatch = vec![0.0; n];
    let mut remaining = demand;
    let mut clearing_price = 0.0;
    for bid in order {
        if remaining <= 0.0 {
            break;
        }
        let take = bid.quantity.min(remaining);
        dispatch[bid.genco_id] += take;
        remaining -= take;
        clearing_price = bid.price;
    }
    // Residual form keeps the energy balance exact.
    let unserved = remaining.max(0.0);

    let mut payments = vec![0.0; n];
    for bid in bids {
        if bid.participate && dispatch.get(bid.genco_id).copied().unwrap_or(0.0) > 0.0 {
            let price = match mech.settlement {
                Settlement::PayAsBid => bid.price,
                Settlement::PayAsClear => clearing_price,
            };
            payments[bid.genco_id] = price * dispatch[bid.genco_id];
        }
    }

    Ok(HourlyClearingResult {
        dispatch,
        clearing_price,
        payments,
        unserved,
        demand,
    })
}

/// Draws the realized output of a scheduled unit.
///
/// Renewables realize `scheduled * (1 + e)` with `e ~ N(0, sigma^2)` truncated
/// to [-1, 1]; thermal units pass through unchanged.
pub fn realize_renewable<R: Rng>(spec: &GencoSpec, scheduled: f64, rng: &mut R) -> f64 {
    if spec.kind == GencoKind::Thermal || spec.forecast_sigma == 0.0 || scheduled == 0.0 {
        return scheduled;
    }
    let normal = Normal::new(0.0, spec.forecast_sigma).expect("sigma validated positive");
    // Truncation by rejection; at sigma <= 0.33 the loop essentially never repeats.
    let e = loop {
        let draw = normal.sample(rng);
        if (-1.0..=1.0).contains(&draw) {
            break draw;
        }
    };
    scheduled * (1.0 + e)
}

/// Hourly profit of one GENCO under the active mechanism.
///
/// payment - marginal_cost * dispatched - fixed_cost (if participated)
/// - switching_cost (if participation toggled) - penalty * |realized -
/// dispatched| * settlement price (renewables only). The settlement price is
/// the clearing price under pay-as-clear and the unit's own bid under
/// pay-as-bid.
pub fn genco_reward(
    spec: &GencoSpec,
    bid: &Bid,
    result: &HourlyClearingResult,
    realized: f64,
    prev_participation: bool,
    mech: &MechanismParams,
) -> f64 {
    let dispatched = result.dispatch.get(spec.id).copied().unwrap_or(0.0);
    let payment = result.payments.get(spec.id).copied().unwrap_or(0.0);

    let mut reward = payment - spec.marginal_cost * dispatched;
    if bid.participate {
        reward -= spec.fixed_cost;
    }
    if bid.participate != prev_participation {
        reward -= spec.switching_cost;
    }
    if spec.kind == GencoKind::Renewable {
        let settlement_price = match mech.settlement {
            Settlement::PayAsClear => result.clearing_price,
            Settlement::PayAsBid => bid.price,
        };
        reward -= mech.penalty_coeff * (realized - dispatched).abs() * settlement_price;
    }
    reward
}

/// Consumer value of served energy minus production cost, summed over hours.
/// Unserved demand earns nothing.
pub fn social_welfare(results: &[HourlyClearingResult], specs: &[GencoSpec], valuation: f64) -> f64 {
    results
        .iter()
        .map(|r| {
            let production_cost: f64 = specs
                .iter()
                .map(|s| s.marginal_cost * r.dispatch.get(s.id).copied().unwrap_or(0.0))
                .sum();
            valuation * r.served() - production_cost
        })
        .sum()
}

/// Aggregates one month of clearing results into upper-level indicators.
///
/// HHI is computed over monthly dispatched energy shares in percent; an
/// all-zero dispatch month degenerates to 10000 (monopoly convention). SDR
/// averages offered capacity over demand across hours, skipping demand-0
/// hours.
pub fn market_metrics(
    results: &[HourlyClearingResult],
    specs: &[GencoSpec],
    total_offered: &[f64],
    valuation: f64,
) -> MarketMetrics {
    assert!(!results.is_empty(), "need at least one hour of results");
    assert_eq!(results.len(), total_offered.len(), "one offered-capacity entry per hour");

    let n = specs.len();
    let mut energy = vec![0.0; n];
    for r in results {
        for (i, d) in r.dispatch.iter().enumerate() {
            if i < n {
                energy[i] += d;
            }
        }
    }
    let total: f64 = energy.iter().sum();

    let hhi = if total <= 0.0 {
        10000.0
    } else {
        energy.iter().map(|e| (100.0 * e / total).powi(2)).sum()
    };

    let renewable_energy: f64 = specs
        .iter()
        .filter(|s| s.kind == GencoKind::Renewable)
        .map(|s| energy[s.id])
        .sum();
    let renewable_penetration = if total > 0.0 { renewable_energy / total } else { 0.0 };

    let mut sdr_sum = 0.0;
    let mut sdr_hours = 0usize;
    for (r, offered) in results.iter().zip(total_offered) {
        if r.demand > 0.0 {
            sdr_sum += offered / r.demand;
            sdr_hours += 1;
        }
    }
    let supply_demand_ratio = if sdr_hours > 0 { sdr_sum / sdr_hours as f64 } else { 0.0 };

    MarketMetrics {
        social_welfare: social_welfare(results, specs, valuation),
        hhi,
        renewable_penetration,
        supply_demand_ratio,
    }
}

/// Formats one hour of clearing results as CSV rows
/// (hour, genco_id, dispatch, price, payment, unserved).
pub fn clearing_csv_rows(hour: usize, result: &HourlyClearingResult) -> String {
    let mut out = String::new();
    for (genco_id, dispatch) in result.dispatch.iter().enumerate() {
        out.push_str(&format!(
            "{hour},{genco_id},{dispatch},{},{},{}\n",
            result.clearing_price, result.payments[genco_id], result.unserved
        ));
    }
    out
}
