//! Upper-level objective pieces: EV utilities, rejection penalties,
//! operator revenue, the weighted performance index, price-bound
//! enforcement, and the fixed / time-of-use benchmark schedules.
//!
//! Charging payments are billed on session energy (`Q * Pr`), which keeps
//! the utility payment term dimensionally consistent with the revenue term
//! and equal to it in aggregate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{ChoiceEquilibrium, HourContext};
use crate::scenario::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum EconError {
    #[error(
        "price {value} out of bounds [{lo}, {hi}] for station {station} hour {hour}"
    )]
    PriceOutOfBounds {
        value: f64,
        lo: f64,
        hi: f64,
        station: usize,
        hour: usize,
    },
}

/// Economic constants of a scenario.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EconParams {
    /// Charging satisfaction, $/kWh.
    pub kappa: f64,
    /// Value of waiting time, $/h.
    pub vot: f64,
    /// Penalty per rejected or unserved EV, $.
    pub rejection_penalty: f64,
    /// Revenue weight in the performance index, in [0, 1].
    pub omega: f64,
    /// Global price floor, $/kWh.
    pub price_floor: f64,
    /// Global price ceiling, $/kWh.
    pub price_ceiling: f64,
}

impl Default for EconParams {
    fn default() -> Self {
        EconParams {
            kappa: 1.0,
            vot: 5.0,
            rejection_penalty: 30.0,
            omega: 0.5,
            price_floor: 0.20,
            price_ceiling: 0.80,
        }
    }
}

impl EconParams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(("omega", "must lie in [0, 1]".into()));
        }
        if self.price_floor > self.price_ceiling {
            return Err(("price_floor", "floor exceeds ceiling".into()));
        }
        if self.rejection_penalty < 0.0 {
            return Err(("rejection_penalty", "must be >= 0".into()));
        }
        if self.vot < 0.0 {
            return Err(("vot", "must be >= 0".into()));
        }
        Ok(())
    }

    /// Effective per-(station, hour) price band combining the global limits
    /// with the station's grid price and cap.
    pub fn band(&self, scenario: &Scenario, station: usize, hour: usize) -> (f64, f64) {
        let st = &scenario.stations[station];
        (
            st.grid_price[hour].max(self.price_floor),
            st.price_cap[hour].min(self.price_ceiling),
        )
    }
}

/// The leader's decision: one price per (station, hour), $/kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    /// `prices[station][hour]`.
    pub prices: Vec<Vec<f64>>,
}

impl PriceSchedule {
    pub fn hour_column(&self, hour: usize) -> Vec<f64> {
        self.prices.iter().map(|row| row[hour]).collect()
    }

    /// Checks every entry against the effective band.
    pub fn validate_bounds(&self, scenario: &Scenario) -> Result<(), EconError> {
        for (s, row) in self.prices.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                let (lo, hi) = scenario.econ.band(scenario, s, t);
                if v < lo - 1e-12 || v > hi + 1e-12 {
                    return Err(EconError::PriceOutOfBounds {
                        value: v,
                        lo,
                        hi,
                        station: s,
                        hour: t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-EV utility term: satisfaction minus energy payment minus wait loss.
pub fn utility_terms(kappa: f64, energy_kwh: f64, price: f64, wait_hours: f64, vot: f64) -> f64 {
    kappa * energy_kwh - energy_kwh * price - wait_hours * vot
}

/// Expected utility per EV for one hour, weighted by choice probabilities.
pub fn ev_utility(
    ctx: &HourContext,
    eq: &ChoiceEquilibrium,
    prices: &[f64],
    econ: &EconParams,
) -> Vec<f64> {
    ctx.per_ev
        .iter()
        .zip(&eq.probs)
        .map(|(costs, row)| {
            costs
                .eca
                .iter()
                .map(|&s| {
                    row[s]
                        * utility_terms(
                            econ.kappa,
                            costs.energy_kwh[s],
                            prices[s],
                            eq.waits[s],
                            econ.vot,
                        )
                })
                .sum()
        })
        .collect()
}

/// Aggregate EV utility: per-EV sum minus rejection penalties for queue
/// overflow and for EVs with no reachable station.
pub fn aggregate_ev_utility(
    per_ev: &[f64],
    rejected_rates: &[f64],
    unserved: usize,
    econ: &EconParams,
) -> f64 {
    let base: f64 = per_ev.iter().sum();
    let rejected: f64 = rejected_rates.iter().sum();
    base - econ.rejection_penalty * (rejected + unserved as f64)
}

/// Operator revenue for one hour: energy margin weighted by probabilities.
pub fn cs_revenue(
    scenario: &Scenario,
    ctx: &HourContext,
    eq: &ChoiceEquilibrium,
    prices: &[f64],
) -> f64 {
    let hour = ctx.hour;
    ctx.per_ev
        .iter()
        .zip(&eq.probs)
        .map(|(costs, row)| {
            costs
                .eca
                .iter()
                .map(|&s| {
                    row[s]
                        * costs.energy_kwh[s]
                        * (prices[s] - scenario.stations[s].grid_price[hour])
                })
                .sum::<f64>()
        })
        .sum()
}

/// Congestion loss for one hour: wait losses plus queue-rejection
/// penalties. Reported separately from the utility aggregate.
pub fn queue_penalty(
    ctx: &HourContext,
    eq: &ChoiceEquilibrium,
    econ: &EconParams,
) -> f64 {
    let wait_loss: f64 = ctx
        .per_ev
        .iter()
        .zip(&eq.probs)
        .map(|(costs, row)| {
            costs
                .eca
                .iter()
                .map(|&s| row[s] * eq.waits[s] * econ.vot)
                .sum::<f64>()
        })
        .sum();
    let rejection_loss: f64 = eq.rejected.iter().sum::<f64>() * econ.rejection_penalty;
    wait_loss + rejection_loss
}

/// Weighted performance index: `omega * revenue + (1 - omega) * utility`.
pub fn performance_index(revenue: f64, ev_utility: f64, econ: &EconParams) -> f64 {
    econ.omega * revenue + (1.0 - econ.omega) * ev_utility
}

/// Full economic breakdown, with the index recomputed from its own parts.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityBreakdown {
    pub ev_utility_total: f64,
    #[serde(skip)]
    pub per_ev: Vec<f64>,
    pub cs_revenue: f64,
    pub queue_penalty: f64,
    pub performance_index: f64,
}

impl UtilityBreakdown {
    pub fn new(per_ev: Vec<f64>, ev_utility_total: f64, cs_revenue: f64, queue_penalty: f64, econ: &EconParams) -> Self {
        UtilityBreakdown {
            performance_index: performance_index(cs_revenue, ev_utility_total, econ),
            ev_utility_total,
            per_ev,
            cs_revenue,
            queue_penalty,
        }
    }
}

/// Clamps every entry into its effective band.
pub fn clamp_prices(schedule: &PriceSchedule, scenario: &Scenario) -> PriceSchedule {
    let prices = schedule
        .prices
        .iter()
        .enumerate()
        .map(|(s, row)| {
            row.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let (lo, hi) = scenario.econ.band(scenario, s, t);
                    v.clamp(lo, hi)
                })
                .collect()
        })
        .collect();
    PriceSchedule { prices }
}

/// Constant price at every station and hour.
pub fn fixed_schedule(scenario: &Scenario, level: f64) -> Result<PriceSchedule, EconError> {
    let schedule = PriceSchedule {
        prices: vec![vec![level; scenario.horizon_hours]; scenario.stations.len()],
    };
    schedule.validate_bounds(scenario)?;
    Ok(schedule)
}

/// Two-level tariff: `peak` on the listed hours, `offpeak` elsewhere.
pub fn tou_schedule(
    scenario: &Scenario,
    peak_hours: &[usize],
    peak: f64,
    offpeak: f64,
) -> Result<PriceSchedule, EconError> {
    let schedule = PriceSchedule {
        prices: (0..scenario.stations.len())
            .map(|_| {
                (0..scenario.horizon_hours)
                    .map(|t| if peak_hours.contains(&t) { peak } else { offpeak })
                    .collect()
            })
            .collect(),
    };
    schedule.validate_bounds(scenario)?;
    Ok(schedule)
}

/// Default peak window, 08:00-17:59.
pub fn default_peak_hours() -> Vec<usize> {
    (8..=17).collect()
}
