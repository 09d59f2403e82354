//! Immutable world model: stations, EV population templates, demand,
//! travel times, and the JSON scenario loader.
//!
//! A [`Scenario`] is validated once at load and then shared read-only by
//! every evaluator; all sampling takes an explicit seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charging::CurveConfig;
use crate::choice::ChoiceConfig;
use crate::economics::EconParams;
use crate::optimizer::CemConfig;
use crate::rng::{rng_for, Stream};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant violation in `{field}`: {message}")]
    Invariant { field: String, message: String },
    #[error("travel-time lookup failed for station {station} at cell {cell}")]
    TravelLookup { station: usize, cell: usize },
}

impl ScenarioError {
    pub fn invariant(field: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invariant {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Charger level of a station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    L2,
    L3,
}

/// One charging station: capacity, service, price bounds, placement.
#[derive(Debug, Clone)]
pub struct Station {
    pub id: usize,
    pub level: Level,
    /// Number of charging poles (servers).
    pub poles: usize,
    /// Total system capacity: charging plus waiting spots.
    pub capacity: usize,
    /// Service rate per pole, vehicles/hour.
    pub service_rate: f64,
    /// Charging power, kW.
    pub power: f64,
    /// Grid electricity price per hour, $/kWh (price lower bound).
    pub grid_price: Vec<f64>,
    /// Maximum allowed price per hour, $/kWh.
    pub price_cap: Vec<f64>,
    /// Planar location, km.
    pub location: [f64; 2],
}

/// Per-vehicle state sampled from the scenario's template distributions.
#[derive(Debug, Clone)]
pub struct EvAgent {
    pub id: usize,
    /// State of charge on arrival, in [0, 1].
    pub initial_soc: f64,
    /// Battery capacity, kWh.
    pub battery_capacity: f64,
    /// Consumption rate, km/kWh.
    pub consumption_rate: f64,
    /// Vehicle age, years.
    pub age_years: f64,
    /// Risk aversion coefficient, in [0, 1).
    pub risk_aversion: f64,
    /// Battery degradation rate, 1/year.
    pub degradation_rate: f64,
    /// Planar location, km.
    pub location: [f64; 2],
    /// Hour of appearance, in [0, horizon).
    pub spawn_hour: usize,
}

/// Hourly demand counts with optional spatial clustering.
#[derive(Debug, Clone)]
pub struct DemandProfile {
    /// EVs spawning per hour; length equals the horizon.
    pub hourly_counts: Vec<u32>,
    /// Optional (location, weight) hotspots; empty means uniform placement.
    pub hotspots: Vec<([f64; 2], f64)>,
    /// Std-dev of the Gaussian scatter around a hotspot, km.
    pub hotspot_spread_km: f64,
    /// Spawn rectangle [[xmin, ymin], [xmax, ymax]], km.
    pub area: [[f64; 2]; 2],
}

/// Travel-time source.
#[derive(Debug, Clone)]
pub enum TravelTimeProvider {
    /// Straight-line distance divided by a constant speed.
    Euclidean { speed_kmh: f64 },
    /// Station x grid-cell lookup table of hours, optionally per hour of day.
    Matrix {
        origin: [f64; 2],
        cell_size_km: f64,
        grid_cols: usize,
        /// `times[station][cell]`; `None` marks a missing cell.
        times: Vec<Vec<Option<f64>>>,
        /// Optional `times_by_hour[hour][station][cell]` override.
        times_by_hour: Option<Vec<Vec<Vec<Option<f64>>>>>,
        /// Speed used to convert SOC range (km) into a time budget.
        reference_speed_kmh: f64,
    },
}

impl TravelTimeProvider {
    /// Speed used to turn a km range into an hours budget comparable with
    /// travel times.
    pub fn reference_speed_kmh(&self) -> f64 {
        match self {
            TravelTimeProvider::Euclidean { speed_kmh } => *speed_kmh,
            TravelTimeProvider::Matrix {
                reference_speed_kmh,
                ..
            } => *reference_speed_kmh,
        }
    }
}

/// Parameter ranges for sampling [`EvAgent`]s.
#[derive(Debug, Clone)]
pub struct EvDistributions {
    /// Uniform range for initial SOC.
    pub initial_soc: (f64, f64),
    pub battery_capacity_kwh: f64,
    pub consumption_km_per_kwh: f64,
    /// Uniform range for vehicle age, years.
    pub age_years: (f64, f64),
    /// Discrete uniform support for the risk-aversion coefficient.
    pub risk_aversion: Vec<f64>,
    pub degradation_rate_per_year: f64,
}

/// The immutable world description consumed by all downstream modules.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub stations: Vec<Station>,
    pub demand: DemandProfile,
    pub ev_distributions: EvDistributions,
    pub curves: CurveConfig,
    pub travel: TravelTimeProvider,
    pub horizon_hours: usize,
    pub econ: EconParams,
    pub choice: ChoiceConfig,
    pub cem: CemConfig,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// Raw (serde) schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn expand(&self, horizon: usize, field: &str) -> Result<Vec<f64>, ScenarioError> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; horizon]),
            ScalarOrVec::Vec(v) => {
                if v.len() != horizon {
                    return Err(ScenarioError::invariant(
                        field,
                        format!("expected {} hourly entries, got {}", horizon, v.len()),
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawStation {
    id: usize,
    level: Level,
    poles: usize,
    capacity: usize,
    service_rate: f64,
    power: f64,
    grid_price: ScalarOrVec,
    price_cap: ScalarOrVec,
    location: [f64; 2],
}

#[derive(Debug, Deserialize)]
struct RawHotspot {
    location: [f64; 2],
    weight: f64,
}

#[derive(Debug, Deserialize)]
struct RawDemand {
    hourly_counts: Vec<u32>,
    #[serde(default)]
    hotspot_weights: Vec<RawHotspot>,
    #[serde(default = "default_hotspot_spread")]
    hotspot_spread_km: f64,
    #[serde(default)]
    area: Option<[[f64; 2]; 2]>,
}

fn default_hotspot_spread() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct RawEvDistributions {
    #[serde(default = "default_soc_range")]
    initial_soc: (f64, f64),
    #[serde(default = "default_battery")]
    battery_capacity_kwh: f64,
    #[serde(default = "default_consumption")]
    consumption_km_per_kwh: f64,
    #[serde(default = "default_age_range")]
    age_years: (f64, f64),
    #[serde(default = "default_risk")]
    risk_aversion: Vec<f64>,
    #[serde(default = "default_degradation")]
    degradation_rate_per_year: f64,
    #[serde(default)]
    charging: Option<CurveConfig>,
}

fn default_soc_range() -> (f64, f64) {
    (0.1, 0.6)
}
fn default_battery() -> f64 {
    75.0
}
fn default_consumption() -> f64 {
    5.0
}
fn default_age_range() -> (f64, f64) {
    (0.0, 8.0)
}
fn default_risk() -> Vec<f64> {
    vec![0.0, 0.05, 0.15]
}
fn default_degradation() -> f64 {
    0.02
}

#[derive(Debug, Deserialize)]
#[serde(tag = "mode")]
enum RawTravel {
    #[serde(rename = "euclidean")]
    Euclidean { speed_kmh: f64 },
    #[serde(rename = "matrix")]
    Matrix {
        origin: [f64; 2],
        cell_size_km: f64,
        grid_cols: usize,
        times: Vec<Vec<Option<f64>>>,
        #[serde(default)]
        times_by_hour: Option<Vec<Vec<Vec<Option<f64>>>>>,
        #[serde(default = "default_reference_speed")]
        reference_speed_kmh: f64,
    },
}

fn default_reference_speed() -> f64 {
    40.0
}

#[derive(Debug, Deserialize)]
struct RawScenario {
    seed: u64,
    horizon_hours: usize,
    stations: Vec<RawStation>,
    demand: RawDemand,
    #[serde(default)]
    ev_distributions: Option<RawEvDistributions>,
    travel: RawTravel,
    #[serde(default)]
    econ: Option<EconParams>,
    #[serde(default)]
    choice: Option<ChoiceConfig>,
    #[serde(default)]
    cem: Option<CemConfig>,
}

// ---------------------------------------------------------------------------
// Loading and validation
// ---------------------------------------------------------------------------

/// Loads and fully validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scenario_from_str(&text)
}

/// Parses and validates a scenario from a JSON string.
pub fn scenario_from_str(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(raw)
}

fn validate(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let horizon = raw.horizon_hours;
    if horizon < 1 {
        return Err(ScenarioError::invariant("horizon_hours", "must be >= 1"));
    }
    if raw.stations.is_empty() {
        return Err(ScenarioError::invariant(
            "stations",
            "at least one station required",
        ));
    }

    let mut seen_ids = BTreeMap::new();
    let mut stations = Vec::with_capacity(raw.stations.len());
    for (idx, rs) in raw.stations.into_iter().enumerate() {
        if let Some(prev) = seen_ids.insert(rs.id, idx) {
            return Err(ScenarioError::invariant(
                "stations.id",
                format!("duplicate id {} (entries {} and {})", rs.id, prev, idx),
            ));
        }
        if rs.poles < 1 {
            return Err(ScenarioError::invariant(
                &format!("stations[{idx}].poles"),
                "must be >= 1",
            ));
        }
        if rs.capacity < rs.poles {
            return Err(ScenarioError::invariant(
                &format!("stations[{idx}].capacity"),
                format!("capacity {} < poles {}", rs.capacity, rs.poles),
            ));
        }
        if !(rs.service_rate > 0.0) {
            return Err(ScenarioError::invariant(
                &format!("stations[{idx}].service_rate"),
                "must be > 0",
            ));
        }
        if !(rs.power > 0.0) {
            return Err(ScenarioError::invariant(
                &format!("stations[{idx}].power"),
                "must be > 0",
            ));
        }
        let grid_price = rs
            .grid_price
            .expand(horizon, &format!("stations[{idx}].grid_price"))?;
        let price_cap = rs
            .price_cap
            .expand(horizon, &format!("stations[{idx}].price_cap"))?;
        for t in 0..horizon {
            if grid_price[t] < 0.0 {
                return Err(ScenarioError::invariant(
                    &format!("stations[{idx}].grid_price[{t}]"),
                    "must be >= 0",
                ));
            }
            if price_cap[t] <= grid_price[t] {
                return Err(ScenarioError::invariant(
                    &format!("stations[{idx}].price_cap[{t}]"),
                    format!(
                        "price cap {} must exceed grid price {}",
                        price_cap[t], grid_price[t]
                    ),
                ));
            }
        }
        stations.push(Station {
            id: rs.id,
            level: rs.level,
            poles: rs.poles,
            capacity: rs.capacity,
            service_rate: rs.service_rate,
            power: rs.power,
            grid_price,
            price_cap,
            location: rs.location,
        });
    }

    if raw.demand.hourly_counts.len() != horizon {
        return Err(ScenarioError::invariant(
            "demand.hourly_counts",
            format!(
                "length {} != horizon_hours {}",
                raw.demand.hourly_counts.len(),
                horizon
            ),
        ));
    }
    let area = raw.demand.area.unwrap_or_else(|| default_area(&stations));
    if area[0][0] >= area[1][0] || area[0][1] >= area[1][1] {
        return Err(ScenarioError::invariant(
            "demand.area",
            "min corner must be strictly below max corner",
        ));
    }
    for (h, hs) in raw.demand.hotspot_weights.iter().enumerate() {
        if !(hs.weight > 0.0) {
            return Err(ScenarioError::invariant(
                &format!("demand.hotspot_weights[{h}].weight"),
                "must be > 0",
            ));
        }
    }
    let demand = DemandProfile {
        hourly_counts: raw.demand.hourly_counts,
        hotspots: raw
            .demand
            .hotspot_weights
            .into_iter()
            .map(|h| (h.location, h.weight))
            .collect(),
        hotspot_spread_km: raw.demand.hotspot_spread_km,
        area,
    };

    let raw_ev = raw.ev_distributions.unwrap_or(RawEvDistributions {
        initial_soc: default_soc_range(),
        battery_capacity_kwh: default_battery(),
        consumption_km_per_kwh: default_consumption(),
        age_years: default_age_range(),
        risk_aversion: default_risk(),
        degradation_rate_per_year: default_degradation(),
        charging: None,
    });
    let (soc_lo, soc_hi) = raw_ev.initial_soc;
    if !(0.0..=1.0).contains(&soc_lo) || !(0.0..=1.0).contains(&soc_hi) || soc_lo > soc_hi {
        return Err(ScenarioError::invariant(
            "ev_distributions.initial_soc",
            "range must satisfy 0 <= lo <= hi <= 1",
        ));
    }
    if !(raw_ev.battery_capacity_kwh > 0.0) {
        return Err(ScenarioError::invariant(
            "ev_distributions.battery_capacity_kwh",
            "must be > 0",
        ));
    }
    if !(raw_ev.consumption_km_per_kwh > 0.0) {
        return Err(ScenarioError::invariant(
            "ev_distributions.consumption_km_per_kwh",
            "must be > 0",
        ));
    }
    if raw_ev.age_years.0 < 0.0 || raw_ev.age_years.0 > raw_ev.age_years.1 {
        return Err(ScenarioError::invariant(
            "ev_distributions.age_years",
            "range must satisfy 0 <= lo <= hi",
        ));
    }
    if raw_ev.risk_aversion.is_empty()
        || raw_ev
            .risk_aversion
            .iter()
            .any(|a| !(0.0..1.0).contains(a))
    {
        return Err(ScenarioError::invariant(
            "ev_distributions.risk_aversion",
            "need at least one value, each in [0, 1)",
        ));
    }
    if raw_ev.degradation_rate_per_year < 0.0 {
        return Err(ScenarioError::invariant(
            "ev_distributions.degradation_rate_per_year",
            "must be >= 0",
        ));
    }
    let curves = raw_ev.charging.unwrap_or_default();
    curves
        .validate()
        .map_err(|m| ScenarioError::invariant("ev_distributions.charging", m))?;
    let ev_distributions = EvDistributions {
        initial_soc: raw_ev.initial_soc,
        battery_capacity_kwh: raw_ev.battery_capacity_kwh,
        consumption_km_per_kwh: raw_ev.consumption_km_per_kwh,
        age_years: raw_ev.age_years,
        risk_aversion: raw_ev.risk_aversion,
        degradation_rate_per_year: raw_ev.degradation_rate_per_year,
    };

    let travel = match raw.travel {
        RawTravel::Euclidean { speed_kmh } => {
            if !(speed_kmh > 0.0) {
                return Err(ScenarioError::invariant("travel.speed_kmh", "must be > 0"));
            }
            TravelTimeProvider::Euclidean { speed_kmh }
        }
        RawTravel::Matrix {
            origin,
            cell_size_km,
            grid_cols,
            times,
            times_by_hour,
            reference_speed_kmh,
        } => {
            if !(cell_size_km > 0.0) {
                return Err(ScenarioError::invariant(
                    "travel.cell_size_km",
                    "must be > 0",
                ));
            }
            if grid_cols == 0 {
                return Err(ScenarioError::invariant("travel.grid_cols", "must be >= 1"));
            }
            if times.len() != stations.len() {
                return Err(ScenarioError::invariant(
                    "travel.times",
                    format!("need one row per station ({})", stations.len()),
                ));
            }
            let check_table = |table: &[Vec<Option<f64>>], field: &str| {
                for row in table {
                    for v in row.iter().flatten() {
                        if !(v.is_finite() && *v >= 0.0) {
                            return Err(ScenarioError::invariant(
                                field,
                                "travel times must be non-negative and finite",
                            ));
                        }
                    }
                }
                Ok(())
            };
            check_table(&times, "travel.times")?;
            if let Some(by_hour) = &times_by_hour {
                if by_hour.len() != horizon {
                    return Err(ScenarioError::invariant(
                        "travel.times_by_hour",
                        format!("need one table per hour ({horizon})"),
                    ));
                }
                for table in by_hour {
                    check_table(table, "travel.times_by_hour")?;
                }
            }
            if !(reference_speed_kmh > 0.0) {
                return Err(ScenarioError::invariant(
                    "travel.reference_speed_kmh",
                    "must be > 0",
                ));
            }
            TravelTimeProvider::Matrix {
                origin,
                cell_size_km,
                grid_cols,
                times,
                times_by_hour,
                reference_speed_kmh,
            }
        }
    };

    let econ = raw.econ.unwrap_or_default();
    econ.validate()
        .map_err(|(field, msg)| ScenarioError::invariant(&format!("econ.{field}"), msg))?;
    // Effective price bounds must leave a non-empty, strictly positive band
    // for every station-hour; the attraction function divides by price.
    for (idx, st) in stations.iter().enumerate() {
        for t in 0..horizon {
            let lo = st.grid_price[t].max(econ.price_floor);
            let hi = st.price_cap[t].min(econ.price_ceiling);
            if !(lo > 0.0) {
                return Err(ScenarioError::invariant(
                    &format!("stations[{idx}].grid_price[{t}]"),
                    "effective price lower bound must be > 0",
                ));
            }
            if lo > hi {
                return Err(ScenarioError::invariant(
                    &format!("stations[{idx}].price_cap[{t}]"),
                    format!("empty feasible price band [{lo}, {hi}]"),
                ));
            }
        }
    }

    let choice = raw.choice.unwrap_or_default();
    choice
        .validate()
        .map_err(|(field, msg)| ScenarioError::invariant(&format!("choice.{field}"), msg))?;
    let cem = raw.cem.unwrap_or_default();
    cem.validate()
        .map_err(|(field, msg)| ScenarioError::invariant(&format!("cem.{field}"), msg))?;

    Ok(Scenario {
        stations,
        demand,
        ev_distributions,
        curves,
        travel,
        horizon_hours: horizon,
        econ,
        choice,
        cem,
        seed: raw.seed,
    })
}

fn default_area(stations: &[Station]) -> [[f64; 2]; 2] {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for s in stations {
        for k in 0..2 {
            min[k] = min[k].min(s.location[k]);
            max[k] = max[k].max(s.location[k]);
        }
    }
    // Pad by 20% of the span (at least 1 km) so spawns are not pinned to
    // station coordinates even for single-station scenarios.
    let mut area = [[0.0; 2]; 2];
    for k in 0..2 {
        let pad = (0.2 * (max[k] - min[k])).max(1.0);
        area[0][k] = min[k] - pad;
        area[1][k] = max[k] + pad;
    }
    area
}

// ---------------------------------------------------------------------------
// Sampling and travel
// ---------------------------------------------------------------------------

/// Draws the hour's EV cohort from the template distributions.
///
/// Deterministic in `(scenario, hour, rng_seed)`; parallel callers pass
/// their own seeds and never share RNG state.
pub fn spawn_evs(scenario: &Scenario, hour: usize, rng_seed: u64) -> Vec<EvAgent> {
    assert!(
        hour < scenario.horizon_hours,
        "hour {hour} outside horizon {}",
        scenario.horizon_hours
    );
    let count = scenario.demand.hourly_counts[hour] as usize;
    let mut rng = rng_for(rng_seed, Stream::Spawn, &[hour as u64]);
    let dist = &scenario.ev_distributions;
    let demand = &scenario.demand;
    let total_weight: f64 = demand.hotspots.iter().map(|(_, w)| w).sum();

    let mut agents = Vec::with_capacity(count);
    for k in 0..count {
        let initial_soc = sample_range(&mut rng, dist.initial_soc);
        let age_years = sample_range(&mut rng, dist.age_years);
        let risk_idx = rng.random_range(0..dist.risk_aversion.len());
        let location = if demand.hotspots.is_empty() {
            [
                rng.random_range(demand.area[0][0]..demand.area[1][0]),
                rng.random_range(demand.area[0][1]..demand.area[1][1]),
            ]
        } else {
            let mut pick = rng.random_range(0.0..total_weight);
            let mut center = demand.hotspots[demand.hotspots.len() - 1].0;
            for (loc, w) in &demand.hotspots {
                if pick < *w {
                    center = *loc;
                    break;
                }
                pick -= w;
            }
            // Box-Muller scatter around the hotspot, clamped to the area.
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = demand.hotspot_spread_km * (-2.0 * u1.ln()).sqrt();
            [
                (center[0] + r * u2.cos()).clamp(demand.area[0][0], demand.area[1][0]),
                (center[1] + r * u2.sin()).clamp(demand.area[0][1], demand.area[1][1]),
            ]
        };
        agents.push(EvAgent {
            id: k,
            initial_soc,
            battery_capacity: dist.battery_capacity_kwh,
            consumption_rate: dist.consumption_km_per_kwh,
            age_years,
            risk_aversion: dist.risk_aversion[risk_idx],
            degradation_rate: dist.degradation_rate_per_year,
            location,
            spawn_hour: hour,
        });
    }
    agents
}

fn sample_range(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Travel time in hours from an EV's location to a station.
pub fn travel_time(
    provider: &TravelTimeProvider,
    ev: &EvAgent,
    station: &Station,
    hour: usize,
) -> Result<f64, ScenarioError> {
    match provider {
        TravelTimeProvider::Euclidean { speed_kmh } => {
            let dx = ev.location[0] - station.location[0];
            let dy = ev.location[1] - station.location[1];
            Ok((dx * dx + dy * dy).sqrt() / speed_kmh)
        }
        TravelTimeProvider::Matrix {
            origin,
            cell_size_km,
            grid_cols,
            times,
            times_by_hour,
            ..
        } => {
            let col = ((ev.location[0] - origin[0]) / cell_size_km).floor();
            let row = ((ev.location[1] - origin[1]) / cell_size_km).floor();
            let station_idx = station.id;
            if col < 0.0 || row < 0.0 || col as usize >= *grid_cols {
                return Err(ScenarioError::TravelLookup {
                    station: station_idx,
                    cell: usize::MAX,
                });
            }
            let cell = row as usize * grid_cols + col as usize;
            let table: &Vec<Vec<Option<f64>>> = match times_by_hour {
                Some(by_hour) => &by_hour[hour % by_hour.len()],
                None => times,
            };
            table
                .get(station_idx)
                .and_then(|row| row.get(cell).copied().flatten())
                .ok_or(ScenarioError::TravelLookup {
                    station: station_idx,
                    cell,
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "seed": 1,
            "horizon_hours": 1,
            "stations": [{
                "id": 0, "level": "L3", "poles": 2, "capacity": 4,
                "service_rate": 4.0, "power": 120.0,
                "grid_price": 0.2, "price_cap": 0.8, "location": [0.0, 0.0]
            }],
            "demand": { "hourly_counts": [3] },
            "travel": { "mode": "euclidean", "speed_kmh": 40.0 }
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_loads() {
        let sc = scenario_from_str(&minimal_json()).unwrap();
        assert_eq!(sc.stations.len(), 1);
        assert_eq!(sc.horizon_hours, 1);
        assert_eq!(sc.stations[0].grid_price, vec![0.2]);
    }

    #[test]
    fn capacity_below_poles_names_field() {
        let bad = minimal_json().replace("\"capacity\": 4", "\"capacity\": 1");
        let err = scenario_from_str(&bad).unwrap_err();
        match err {
            ScenarioError::Invariant { field, .. } => assert!(field.contains("capacity")),
            other => panic!("expected invariant error, got {other}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let err = scenario_from_str("{ not json").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert!(line >= 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn cap_not_above_grid_rejected() {
        let bad = minimal_json().replace("\"price_cap\": 0.8", "\"price_cap\": 0.2");
        assert!(scenario_from_str(&bad).is_err());
    }

    #[test]
    fn spawn_zero_demand_empty() {
        let json = minimal_json().replace("\"hourly_counts\": [3]", "\"hourly_counts\": [0]");
        let sc = scenario_from_str(&json).unwrap();
        assert!(spawn_evs(&sc, 0, 9).is_empty());
    }

    #[test]
    fn spawn_deterministic_under_seed() {
        let sc = scenario_from_str(&minimal_json()).unwrap();
        let a = spawn_evs(&sc, 0, 1234);
        let b = spawn_evs(&sc, 0, 1234);
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.initial_soc, y.initial_soc);
            assert_eq!(x.location, y.location);
            assert_eq!(x.risk_aversion, y.risk_aversion);
        }
        let c = spawn_evs(&sc, 0, 1235);
        assert!(a
            .iter()
            .zip(&c)
            .any(|(x, y)| x.initial_soc != y.initial_soc));
    }

    #[test]
    fn spawn_draws_risk_from_support() {
        let json = minimal_json().replace("\"hourly_counts\": [3]", "\"hourly_counts\": [50]");
        let sc = scenario_from_str(&json).unwrap();
        let agents = spawn_evs(&sc, 0, 7);
        assert_eq!(agents.len(), 50);
        for a in &agents {
            assert!([0.0, 0.05, 0.15].contains(&a.risk_aversion));
            assert!((0.1..=0.6).contains(&a.initial_soc));
        }
    }

    #[test]
    fn euclidean_travel_zero_and_direct() {
        let sc = scenario_from_str(&minimal_json()).unwrap();
        let mut ev = spawn_evs(&sc, 0, 1).remove(0);
        ev.location = sc.stations[0].location;
        let t = travel_time(&sc.travel, &ev, &sc.stations[0], 0).unwrap();
        assert_eq!(t, 0.0);
        ev.location = [30.0, 0.0];
        let provider = TravelTimeProvider::Euclidean { speed_kmh: 60.0 };
        let t = travel_time(&provider, &ev, &sc.stations[0], 0).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn euclidean_travel_symmetric() {
        let provider = TravelTimeProvider::Euclidean { speed_kmh: 50.0 };
        let sc = scenario_from_str(&minimal_json()).unwrap();
        let mut ev = spawn_evs(&sc, 0, 1).remove(0);
        let mut st = sc.stations[0].clone();
        ev.location = [1.5, -2.0];
        st.location = [4.0, 3.0];
        let forward = travel_time(&provider, &ev, &st, 0).unwrap();
        let mut ev2 = ev.clone();
        ev2.location = st.location;
        let mut st2 = st.clone();
        st2.location = ev.location;
        let back = travel_time(&provider, &ev2, &st2, 0).unwrap();
        assert!((forward - back).abs() < 1e-15);
    }

    #[test]
    fn matrix_travel_passthrough_and_missing() {
        let mut times = vec![vec![Some(0.1); 10], vec![None; 10], vec![Some(0.3); 10]];
        times[2][7] = Some(0.25);
        let provider = TravelTimeProvider::Matrix {
            origin: [0.0, 0.0],
            cell_size_km: 1.0,
            grid_cols: 10,
            times,
            times_by_hour: None,
            reference_speed_kmh: 40.0,
        };
        let sc = scenario_from_str(&minimal_json()).unwrap();
        let mut ev = spawn_evs(&sc, 0, 1).remove(0);
        ev.location = [7.5, 0.5]; // cell 7
        let mut st = sc.stations[0].clone();
        st.id = 2;
        let t = travel_time(&provider, &ev, &st, 0).unwrap();
        assert_eq!(t, 0.25);
        st.id = 1;
        assert!(matches!(
            travel_time(&provider, &ev, &st, 0),
            Err(ScenarioError::TravelLookup { station: 1, cell: 7 })
        ));
    }
}
