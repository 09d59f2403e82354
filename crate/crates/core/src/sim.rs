//! Hour-by-hour simulation of a price schedule.
//!
//! Vehicles whose charging session extends past an hour boundary keep
//! their poles into the following hours, shrinking the station's effective
//! server count there. The carry bookkeeping is shared by the plain
//! simulator and the rolling-horizon optimizer.

use std::collections::VecDeque;

use crate::choice::{
    equilibrium, sample_choices, ChoiceConfig, ChoiceEquilibrium, HourContext,
};
use crate::economics::{
    aggregate_ev_utility, cs_revenue, ev_utility, performance_index, queue_penalty, EconError,
    EconParams, PriceSchedule,
};
use crate::rng::{derive_seed, Stream};
use crate::scenario::{spawn_evs, Scenario};

/// Longest horizon, in hours, that one session's pole occupancy is carried
/// forward. Sessions longer than this are rare and truncated.
const MAX_CARRY_HOURS: usize = 8;

/// Expected pole occupancy carried into future hours, per station.
#[derive(Debug, Clone)]
pub struct CarryState {
    /// `pending[k][station]` = expected poles still busy during the k-th
    /// hour after the current one.
    pending: VecDeque<Vec<f64>>,
    n_stations: usize,
}

impl CarryState {
    pub fn new(n_stations: usize) -> Self {
        CarryState {
            pending: VecDeque::new(),
            n_stations,
        }
    }

    /// Expected occupancy applying to the next simulated hour.
    pub fn current(&self) -> Vec<f64> {
        self.pending
            .front()
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.n_stations])
    }

    /// Pops the occupancy for the hour about to be simulated.
    pub fn advance(&mut self) -> Vec<f64> {
        self.pending
            .pop_front()
            .unwrap_or_else(|| vec![0.0; self.n_stations])
    }

    fn add(&mut self, hours_ahead: usize, station: usize, amount: f64) {
        debug_assert!(hours_ahead >= 1);
        while self.pending.len() < hours_ahead {
            self.pending.push_back(vec![0.0; self.n_stations]);
        }
        self.pending[hours_ahead - 1][station] += amount;
    }

    /// Accumulates the hour's expected leftover pole occupancy. Arrivals
    /// are spread uniformly through the hour (matching the Poisson stream
    /// the queue model assumes); an admitted EV's session occupies a pole
    /// in a future hour for the expected overlap of [start, start+charge)
    /// with that hour. Rejected arrivals never hold a pole.
    pub fn absorb(&mut self, ctx: &HourContext, eq: &ChoiceEquilibrium) {
        for (costs, row) in ctx.per_ev.iter().zip(&eq.probs) {
            for &s in &costs.eca {
                let p = row[s];
                if p <= 0.0 {
                    continue;
                }
                let admit = if eq.arrival_rates[s] > 0.0 {
                    1.0 - eq.rejected[s] / eq.arrival_rates[s]
                } else {
                    1.0
                };
                let base = costs.travel_hours[s] + eq.waits[s];
                let duration = costs.charge_hours[s];
                if duration <= 0.0 || admit <= 0.0 {
                    continue;
                }
                for k in 1..=MAX_CARRY_HOURS {
                    if k as f64 >= base + 1.0 + duration {
                        break;
                    }
                    let occ = hour_overlap(base, duration, k as f64);
                    if occ > 0.0 {
                        self.add(k, s, p * admit * occ);
                    }
                }
            }
        }
    }
}

/// Expected overlap of a charging session with the hour [k, k+1), taken
/// over a uniform arrival offset within the spawn hour.
fn hour_overlap(base: f64, duration: f64, k: f64) -> f64 {
    const STEPS: usize = 64;
    let mut acc = 0.0;
    for i in 0..STEPS {
        let offset = (i as f64 + 0.5) / STEPS as f64;
        let start = offset + base;
        let end = start + duration;
        acc += (end.min(k + 1.0) - start.max(k)).max(0.0);
    }
    acc / STEPS as f64
}

/// Poles actually available given carried occupancy; at least one pole
/// stays active so the queue stays well-defined.
pub fn effective_servers(scenario: &Scenario, carried: &[f64]) -> Vec<usize> {
    scenario
        .stations
        .iter()
        .zip(carried)
        .map(|(st, &c)| {
            let taken = c.round() as usize;
            st.poles.saturating_sub(taken).max(1)
        })
        .collect()
}

/// One simulated hour: equilibrium, economics, and realized draws.
#[derive(Debug, Clone)]
pub struct HourRow {
    pub hour: usize,
    pub prices: Vec<f64>,
    pub lambda: Vec<f64>,
    pub waits: Vec<f64>,
    pub rejected: Vec<f64>,
    pub queue_penalty: f64,
    pub ev_utility: f64,
    pub cs_revenue: f64,
    pub performance_index: f64,
    pub unserved: usize,
    pub msa_converged: bool,
    /// Realized station picks from one categorical draw per EV.
    pub sampled_arrivals: Vec<u32>,
}

/// Column sums of the hourly rows.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct Totals {
    pub ev_utility: f64,
    pub cs_revenue: f64,
    pub queue_penalty: f64,
    pub performance_index: f64,
    pub rejected: f64,
    pub unserved: u64,
}

/// Full simulation output for one strategy run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub hourly: Vec<HourRow>,
    pub totals: Totals,
    pub sampled_arrivals: Vec<u64>,
    pub non_converged_hours: Vec<usize>,
    pub seed: u64,
    pub mode: String,
    pub strategy: String,
}

/// Simulates one hour under the given prices and pole availability.
pub fn hour_step(
    scenario: &Scenario,
    ctx: &HourContext,
    prices: &[f64],
    servers: &[usize],
    choice: &ChoiceConfig,
    econ: &EconParams,
    carry: &mut CarryState,
    sample_seed: u64,
) -> HourRow {
    let eq = equilibrium(scenario, ctx, prices, servers, choice);
    let per_ev = ev_utility(ctx, &eq, prices, econ);
    let agg = aggregate_ev_utility(&per_ev, &eq.rejected, eq.unserved, econ);
    let revenue = cs_revenue(scenario, ctx, &eq, prices);
    let penalty = queue_penalty(ctx, &eq, econ);
    let pi = performance_index(revenue, agg, econ);
    carry.absorb(ctx, &eq);

    let picks = sample_choices(&eq.probs, sample_seed);
    let mut sampled = vec![0u32; scenario.stations.len()];
    for pick in picks.into_iter().flatten() {
        sampled[pick] += 1;
    }

    HourRow {
        hour: ctx.hour,
        prices: prices.to_vec(),
        lambda: eq.arrival_rates.clone(),
        waits: eq.waits.clone(),
        rejected: eq.rejected.clone(),
        queue_penalty: penalty,
        ev_utility: agg,
        cs_revenue: revenue,
        performance_index: pi,
        unserved: eq.unserved,
        msa_converged: eq.converged,
        sampled_arrivals: sampled,
    }
}

/// Runs a full schedule through the horizon and aggregates totals.
pub fn simulate_schedule(
    scenario: &Scenario,
    schedule: &PriceSchedule,
    choice: &ChoiceConfig,
    seed: u64,
    strategy: &str,
) -> Result<RunReport, EconError> {
    schedule.validate_bounds(scenario)?;
    let n_stations = scenario.stations.len();
    let mut carry = CarryState::new(n_stations);
    let mut hourly = Vec::with_capacity(scenario.horizon_hours);
    for hour in 0..scenario.horizon_hours {
        let carried = carry.advance();
        let servers = effective_servers(scenario, &carried);
        let evs = spawn_evs(scenario, hour, seed);
        let ctx = HourContext::build(scenario, hour, evs, choice.gumbel_scale, seed);
        let prices = schedule.hour_column(hour);
        let sample_seed = derive_seed(seed, Stream::ChoiceSample, &[hour as u64]);
        hourly.push(hour_step(
            scenario,
            &ctx,
            &prices,
            &servers,
            choice,
            &scenario.econ,
            &mut carry,
            sample_seed,
        ));
    }
    Ok(assemble_report(scenario, hourly, seed, choice, strategy))
}

pub(crate) fn assemble_report(
    scenario: &Scenario,
    hourly: Vec<HourRow>,
    seed: u64,
    choice: &ChoiceConfig,
    strategy: &str,
) -> RunReport {
    let mut totals = Totals::default();
    let mut sampled = vec![0u64; scenario.stations.len()];
    let mut non_converged = Vec::new();
    for row in &hourly {
        totals.ev_utility += row.ev_utility;
        totals.cs_revenue += row.cs_revenue;
        totals.queue_penalty += row.queue_penalty;
        totals.performance_index += row.performance_index;
        totals.rejected += row.rejected.iter().sum::<f64>();
        totals.unserved += row.unserved as u64;
        for (acc, &c) in sampled.iter_mut().zip(&row.sampled_arrivals) {
            *acc += c as u64;
        }
        if !row.msa_converged {
            non_converged.push(row.hour);
        }
    }
    RunReport {
        hourly,
        totals,
        sampled_arrivals: sampled,
        non_converged_hours: non_converged,
        seed,
        mode: choice.mode.as_str().to_string(),
        strategy: strategy.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::fixed_schedule;
    use crate::scenario::scenario_from_str;
    use approx::assert_abs_diff_eq;

    fn small_scenario() -> Scenario {
        scenario_from_str(
            r#"{
            "seed": 11, "horizon_hours": 4,
            "stations": [
                {"id": 0, "level": "L3", "poles": 2, "capacity": 4, "service_rate": 3.0,
                 "power": 120.0, "grid_price": 0.2, "price_cap": 0.8, "location": [0.0, 0.0]},
                {"id": 1, "level": "L2", "poles": 2, "capacity": 4, "service_rate": 0.4,
                 "power": 20.0, "grid_price": 0.2, "price_cap": 0.8, "location": [3.0, 0.0]}
            ],
            "demand": { "hourly_counts": [6, 8, 4, 0] },
            "travel": { "mode": "euclidean", "speed_kmh": 40.0 }
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn totals_are_column_sums() {
        let sc = small_scenario();
        let schedule = fixed_schedule(&sc, 0.5).unwrap();
        let report = simulate_schedule(&sc, &schedule, &sc.choice, sc.seed, "fixed").unwrap();
        assert_eq!(report.hourly.len(), 4);
        let sum_pi: f64 = report.hourly.iter().map(|r| r.performance_index).sum();
        assert_abs_diff_eq!(report.totals.performance_index, sum_pi, epsilon = 1e-9);
        let sum_util: f64 = report.hourly.iter().map(|r| r.ev_utility).sum();
        assert_abs_diff_eq!(report.totals.ev_utility, sum_util, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_repeat_run() {
        let sc = small_scenario();
        let schedule = fixed_schedule(&sc, 0.5).unwrap();
        let a = simulate_schedule(&sc, &schedule, &sc.choice, 99, "fixed").unwrap();
        let b = simulate_schedule(&sc, &schedule, &sc.choice, 99, "fixed").unwrap();
        for (ra, rb) in a.hourly.iter().zip(&b.hourly) {
            assert_eq!(ra.lambda, rb.lambda);
            assert_eq!(ra.performance_index, rb.performance_index);
            assert_eq!(ra.sampled_arrivals, rb.sampled_arrivals);
        }
    }

    #[test]
    fn zero_demand_hour_is_idle() {
        let sc = small_scenario();
        let schedule = fixed_schedule(&sc, 0.3).unwrap();
        let report = simulate_schedule(&sc, &schedule, &sc.choice, 1, "fixed").unwrap();
        let idle = &report.hourly[3];
        assert_eq!(idle.lambda, vec![0.0, 0.0]);
        assert_eq!(idle.ev_utility, 0.0);
        assert_eq!(idle.cs_revenue, 0.0);
    }

    #[test]
    fn long_sessions_reduce_next_hour_servers() {
        // L2 sessions run for hours, so the L2 station must lose poles in
        // the hour after a busy one.
        let sc = small_scenario();
        let mut carry = CarryState::new(2);
        let evs = spawn_evs(&sc, 0, sc.seed);
        let ctx = HourContext::build(&sc, 0, evs, 0.0, sc.seed);
        let mut cfg = sc.choice;
        cfg.gumbel_scale = 0.0;
        let _ = hour_step(
            &sc,
            &ctx,
            &[0.5, 0.5],
            &[2, 2],
            &cfg,
            &sc.econ,
            &mut carry,
            7,
        );
        let next = carry.advance();
        assert!(next[1] > 0.0, "L2 occupancy should carry: {next:?}");
        let servers = effective_servers(&sc, &next);
        assert!(servers[1] <= 2);
        assert!(servers[1] >= 1);
    }

    #[test]
    fn carry_state_never_kills_last_pole() {
        let sc = small_scenario();
        let servers = effective_servers(&sc, &[50.0, 50.0]);
        assert_eq!(servers, vec![1, 1]);
    }
}
