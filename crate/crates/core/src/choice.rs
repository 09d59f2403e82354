//! Lower-level follower model: station attraction, MNL choice with Gumbel
//! perception error, induced arrival rates, and the MSA fixed point that
//! couples choice probabilities with queueing congestion.
//!
//! Three modes mirror the experimental strategies: deterministic direct
//! choice (argmax attraction), one-shot stochastic MNL, and MNL iterated to
//! a congestion equilibrium by the method of successive averages.

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::charging::{eca, ChargeSession};
use crate::queueing::{metrics, QueueParams};
use crate::rng::{rng_for, Stream};
use crate::scenario::{travel_time, EvAgent, Scenario};

/// Floor on the total time cost so the attraction's inverse-square term
/// stays finite for co-located EVs at idle stations.
pub const COST_FLOOR_HOURS: f64 = 1e-3;

/// Follower behavior selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceMode {
    /// One-hot choice of the highest-attraction station.
    DeterministicDc,
    /// Single-pass MNL draw, no congestion feedback.
    MnlStandard,
    /// MNL iterated to the congestion fixed point via MSA.
    MnlMsa,
}

impl ChoiceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChoiceMode::DeterministicDc => "dc",
            ChoiceMode::MnlStandard => "mnl",
            ChoiceMode::MnlMsa => "msa",
        }
    }
}

/// Follower-model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ChoiceConfig {
    /// MNL sensitivity multiplying the attraction.
    pub theta: f64,
    pub mode: ChoiceMode,
    /// Scale of the Gumbel perception error; 0 disables it.
    pub gumbel_scale: f64,
    pub msa_max_iters: usize,
    pub msa_tol: f64,
}

impl Default for ChoiceConfig {
    fn default() -> Self {
        ChoiceConfig {
            theta: 0.05,
            mode: ChoiceMode::MnlMsa,
            gumbel_scale: 1.0,
            msa_max_iters: 100,
            msa_tol: 1e-4,
        }
    }
}

impl ChoiceConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.theta > 0.0) {
            return Err(("theta", "must be > 0".into()));
        }
        if self.gumbel_scale < 0.0 {
            return Err(("gumbel_scale", "must be >= 0".into()));
        }
        if !(self.msa_tol > 0.0) {
            return Err(("msa_tol", "must be > 0".into()));
        }
        if self.msa_max_iters == 0 {
            return Err(("msa_max_iters", "must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fixed per-(EV, station) quantities that do not depend on prices or
/// congestion: reachability, travel time, and the planned charge session.
#[derive(Debug, Clone)]
pub struct EvStaticCosts {
    /// Reachable station indices, ascending.
    pub eca: Vec<usize>,
    /// Travel hours per station index; NaN outside the ECA.
    pub travel_hours: Vec<f64>,
    /// Charging hours per station index; NaN outside the ECA.
    pub charge_hours: Vec<f64>,
    /// Session energy per station index, kWh; NaN outside the ECA.
    pub energy_kwh: Vec<f64>,
}

/// Price- and congestion-independent context for one hour's choices.
#[derive(Debug, Clone)]
pub struct HourContext {
    pub hour: usize,
    pub evs: Vec<EvAgent>,
    pub per_ev: Vec<EvStaticCosts>,
    /// Gumbel perception errors, EV x station; zeros when the scale is 0.
    pub gumbel: Vec<Vec<f64>>,
}

impl HourContext {
    /// Builds the context for one hour. Gumbel draws are taken once, keyed
    /// by `(gumbel_seed, hour)`, and stay fixed across MSA iterations and
    /// across CEM samples sharing the seed.
    pub fn build(
        scenario: &Scenario,
        hour: usize,
        evs: Vec<EvAgent>,
        gumbel_scale: f64,
        gumbel_seed: u64,
    ) -> Self {
        let n_stations = scenario.stations.len();
        let per_ev: Vec<EvStaticCosts> = evs
            .iter()
            .map(|ev| {
                let reachable = eca(ev, scenario, hour);
                let mut travel_hours = vec![f64::NAN; n_stations];
                let mut charge_hours = vec![f64::NAN; n_stations];
                let mut energy_kwh = vec![f64::NAN; n_stations];
                for &s in &reachable {
                    let st = &scenario.stations[s];
                    travel_hours[s] = travel_time(&scenario.travel, ev, st, hour)
                        .expect("ECA membership implies a travel time");
                    let target = scenario.curves.target_soc(st.level).max(ev.initial_soc);
                    let session = ChargeSession::plan(
                        scenario.curves.curve_for(st.level),
                        ev.initial_soc,
                        target,
                        ev.battery_capacity,
                    )
                    .expect("validated targets are reachable");
                    charge_hours[s] = session.duration / 60.0;
                    energy_kwh[s] = session.energy;
                }
                EvStaticCosts {
                    eca: reachable,
                    travel_hours,
                    charge_hours,
                    energy_kwh,
                }
            })
            .collect();

        let gumbel = draw_gumbel(evs.len(), n_stations, gumbel_scale, gumbel_seed, hour);
        HourContext {
            hour,
            evs,
            per_ev,
            gumbel,
        }
    }
}

fn draw_gumbel(
    n_evs: usize,
    n_stations: usize,
    scale: f64,
    seed: u64,
    hour: usize,
) -> Vec<Vec<f64>> {
    if scale == 0.0 {
        return vec![vec![0.0; n_stations]; n_evs];
    }
    let mut rng = rng_for(seed, Stream::Gumbel, &[hour as u64]);
    let dist = Gumbel::new(0.0, scale).expect("positive scale");
    (0..n_evs)
        .map(|_| (0..n_stations).map(|_| dist.sample(&mut rng)).collect())
        .collect()
}

/// Total time-based cost in hours: travel + queue wait + charging.
pub fn total_cost(travel_hours: f64, wait_hours: f64, charge_hours: f64) -> f64 {
    travel_hours + wait_hours + charge_hours
}

/// Station attraction: poles x power over price times squared total cost.
/// The cost is floored at [`COST_FLOOR_HOURS`].
pub fn attractiveness(
    available_poles: usize,
    power_kw: f64,
    price_per_kwh: f64,
    total_cost_hours: f64,
) -> f64 {
    debug_assert!(price_per_kwh > 0.0, "attraction needs a positive price");
    let cost = total_cost_hours.max(COST_FLOOR_HOURS);
    available_poles as f64 * power_kw / (price_per_kwh * cost * cost)
}

/// Numerically stable softmax over the given utilities.
pub(crate) fn softmax(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn attraction_row(
    scenario: &Scenario,
    ctx: &HourContext,
    ev_idx: usize,
    prices: &[f64],
    waits: &[f64],
    servers: &[usize],
) -> Vec<(usize, f64)> {
    let costs = &ctx.per_ev[ev_idx];
    costs
        .eca
        .iter()
        .map(|&s| {
            let cost = total_cost(costs.travel_hours[s], waits[s], costs.charge_hours[s]);
            let attr =
                attractiveness(servers[s], scenario.stations[s].power, prices[s], cost);
            (s, attr)
        })
        .collect()
}

fn probability_row(
    scenario: &Scenario,
    ctx: &HourContext,
    ev_idx: usize,
    prices: &[f64],
    waits: &[f64],
    servers: &[usize],
    config: &ChoiceConfig,
) -> Vec<f64> {
    let n_stations = scenario.stations.len();
    let mut row = vec![0.0; n_stations];
    let attr = attraction_row(scenario, ctx, ev_idx, prices, waits, servers);
    if attr.is_empty() {
        return row;
    }
    match config.mode {
        ChoiceMode::DeterministicDc => {
            // Ties break to the lowest station index (ECA is ascending).
            let mut best = attr[0];
            for &cand in &attr[1..] {
                if cand.1 > best.1 {
                    best = cand;
                }
            }
            row[best.0] = 1.0;
        }
        ChoiceMode::MnlStandard | ChoiceMode::MnlMsa => {
            let utilities: Vec<f64> = attr
                .iter()
                .map(|&(s, a)| config.theta * a + ctx.gumbel[ev_idx][s])
                .collect();
            for (&(s, _), p) in attr.iter().zip(softmax(&utilities)) {
                row[s] = p;
            }
        }
    }
    row
}

/// Choice probability matrix (EV x station) for the given prices, waits,
/// and available poles. Rows over empty ECAs are all zero.
pub fn probabilities(
    scenario: &Scenario,
    ctx: &HourContext,
    prices: &[f64],
    waits: &[f64],
    servers: &[usize],
    config: &ChoiceConfig,
) -> Vec<Vec<f64>> {
    (0..ctx.evs.len())
        .map(|j| probability_row(scenario, ctx, j, prices, waits, servers, config))
        .collect()
}

/// Spec-shaped wrapper: builds a context with full pole availability and
/// returns the probability matrix. Gumbel draws derive from `rng_seed`.
pub fn choice_probabilities(
    evs: &[EvAgent],
    scenario: &Scenario,
    hour: usize,
    prices: &[f64],
    waits: &[f64],
    config: &ChoiceConfig,
    rng_seed: u64,
) -> Vec<Vec<f64>> {
    let ctx = HourContext::build(scenario, hour, evs.to_vec(), config.gumbel_scale, rng_seed);
    let servers: Vec<usize> = scenario.stations.iter().map(|s| s.poles).collect();
    probabilities(scenario, &ctx, prices, waits, &servers, config)
}

/// Expected arrivals per station: column sums of the probability matrix.
pub fn arrival_rates(probs: &[Vec<f64>], n_stations: usize) -> Vec<f64> {
    let mut rates = vec![0.0; n_stations];
    for row in probs {
        for (s, p) in row.iter().enumerate() {
            rates[s] += p;
        }
    }
    rates
}

/// Follower response for one hour: probabilities plus the congestion they
/// induce.
#[derive(Debug, Clone)]
pub struct ChoiceEquilibrium {
    /// EV x station probabilities; non-empty rows sum to 1.
    pub probs: Vec<Vec<f64>>,
    /// Expected arrivals per station, vehicles/hour.
    pub arrival_rates: Vec<f64>,
    /// Expected queue wait per station, hours.
    pub waits: Vec<f64>,
    /// Expected rejected arrivals per station, vehicles/hour.
    pub rejected: Vec<f64>,
    /// EVs with an empty reachable set.
    pub unserved: usize,
    pub iterations_used: usize,
    pub converged: bool,
}

fn station_waits(scenario: &Scenario, servers: &[usize], lambda: &[f64]) -> Vec<f64> {
    scenario
        .stations
        .iter()
        .enumerate()
        .map(|(s, st)| {
            let params = QueueParams::new(lambda[s], st.service_rate, servers[s], st.capacity);
            metrics(&params).wait_hours
        })
        .collect()
}

/// Computes the hour's follower response under the configured mode.
///
/// In MSA mode, probabilities and queue waits are iterated with 1/(n+1)
/// averaging until the largest probability change falls below `msa_tol`;
/// the Gumbel draws in the context stay fixed across iterations so the
/// fixed point is well-defined.
pub fn equilibrium(
    scenario: &Scenario,
    ctx: &HourContext,
    prices: &[f64],
    servers: &[usize],
    config: &ChoiceConfig,
) -> ChoiceEquilibrium {
    let n_stations = scenario.stations.len();
    let zero_waits = vec![0.0; n_stations];
    let mut probs = probabilities(scenario, ctx, prices, &zero_waits, servers, config);
    let mut iterations_used = 1;
    let mut converged = true;

    if config.mode == ChoiceMode::MnlMsa && !ctx.evs.is_empty() {
        converged = false;
        for n in 0..config.msa_max_iters {
            let lambda = arrival_rates(&probs, n_stations);
            let waits = station_waits(scenario, servers, &lambda);
            let target = probabilities(scenario, ctx, prices, &waits, servers, config);
            let step = 1.0 / (n as f64 + 1.0);
            let mut delta: f64 = 0.0;
            for (row, trow) in probs.iter_mut().zip(&target) {
                for (p, t) in row.iter_mut().zip(trow) {
                    let next = *p + (t - *p) * step;
                    delta = delta.max((next - *p).abs());
                    *p = next;
                }
            }
            iterations_used = n + 1;
            if delta < config.msa_tol {
                converged = true;
                break;
            }
        }
    }

    let arrival = arrival_rates(&probs, n_stations);
    let (waits, rejected): (Vec<f64>, Vec<f64>) = scenario
        .stations
        .iter()
        .enumerate()
        .map(|(s, st)| {
            let params =
                QueueParams::new(arrival[s], st.service_rate, servers[s], st.capacity);
            let m = metrics(&params);
            (m.wait_hours, m.rejected_rate)
        })
        .unzip();
    let unserved = ctx.per_ev.iter().filter(|c| c.eca.is_empty()).count();

    ChoiceEquilibrium {
        probs,
        arrival_rates: arrival,
        waits,
        rejected,
        unserved,
        iterations_used,
        converged,
    }
}

/// Spec-shaped wrapper over [`equilibrium`] with full pole availability.
pub fn msa_equilibrium(
    evs: &[EvAgent],
    scenario: &Scenario,
    hour: usize,
    prices: &[f64],
    config: &ChoiceConfig,
    rng_seed: u64,
) -> ChoiceEquilibrium {
    let ctx = HourContext::build(scenario, hour, evs.to_vec(), config.gumbel_scale, rng_seed);
    let servers: Vec<usize> = scenario.stations.iter().map(|s| s.poles).collect();
    equilibrium(scenario, &ctx, prices, &servers, config)
}

/// One categorical draw per EV row; empty rows yield `None`.
pub fn sample_choices(probs: &[Vec<f64>], rng_seed: u64) -> Vec<Option<usize>> {
    let mut rng = rng_for(rng_seed, Stream::ChoiceSample, &[]);
    probs
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return None;
            }
            let mut pick = rng.random_range(0.0..total);
            for (s, p) in row.iter().enumerate() {
                if pick < *p {
                    return Some(s);
                }
                pick -= p;
            }
            // Guard against accumulated rounding at the row tail.
            row.iter().rposition(|&p| p > 0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::scenario_from_str;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_station_json(poles0: usize, counts: &str) -> String {
        format!(
            r#"{{
            "seed": 5, "horizon_hours": 1,
            "stations": [
                {{"id": 0, "level": "L3", "poles": {poles0}, "capacity": {cap0}, "service_rate": 4.0,
                 "power": 120.0, "grid_price": 0.2, "price_cap": 0.8, "location": [-1.0, 0.0]}},
                {{"id": 1, "level": "L3", "poles": 1, "capacity": 3, "service_rate": 4.0,
                 "power": 120.0, "grid_price": 0.2, "price_cap": 0.8, "location": [1.0, 0.0]}}
            ],
            "demand": {{ "hourly_counts": {counts}, "area": [[-0.01, -0.01], [0.01, 0.01]] }},
            "travel": {{ "mode": "euclidean", "speed_kmh": 40.0 }},
            "choice": {{ "theta": 0.05, "mode": "mnl_msa", "gumbel_scale": 0.0,
                        "msa_max_iters": 200, "msa_tol": 1e-9 }}
        }}"#,
            poles0 = poles0,
            cap0 = poles0 + 2,
            counts = counts
        )
    }

    #[test]
    fn attraction_direct_substitution() {
        let a = attractiveness(4, 50.0, 0.5, 2.0);
        assert_abs_diff_eq!(a, 100.0, epsilon = 1e-12);
        // Doubling price halves it; doubling cost quarters it.
        assert_abs_diff_eq!(attractiveness(4, 50.0, 1.0, 2.0), 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(attractiveness(4, 50.0, 0.5, 4.0), 25.0, epsilon = 1e-12);
    }

    #[test]
    fn attraction_cost_floored() {
        let a = attractiveness(1, 10.0, 0.5, 0.0);
        let floored = attractiveness(1, 10.0, 0.5, COST_FLOOR_HOURS);
        assert_eq!(a, floored);
        assert!(a.is_finite());
    }

    #[test]
    fn total_cost_sums_components() {
        assert_eq!(total_cost(0.0, 0.0, 0.0), 0.0);
        assert_abs_diff_eq!(total_cost(0.5, 0.25, 1.0), 1.75, epsilon = 1e-12);
        // Co-located EV, idle L2 station, 0.2 -> 1.0 at 1/225 per minute.
        let charge_hours = 0.8 * 225.0 / 60.0;
        assert_abs_diff_eq!(total_cost(0.0, 0.0, charge_hours), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_frozen_values() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(p[0], 0.09003057317038046, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.24472847105479767, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.6652409557748219, epsilon = 1e-12);
    }

    #[test]
    fn singleton_eca_gets_probability_one() {
        let json = two_station_json(1, "[1]").replace(
            "\"location\": [1.0, 0.0]",
            "\"location\": [5000.0, 0.0]",
        );
        let sc = scenario_from_str(&json).unwrap();
        let evs = crate::scenario::spawn_evs(&sc, 0, 5);
        let probs = choice_probabilities(&evs, &sc, 0, &[0.5, 0.5], &[0.0, 0.0], &sc.choice, 5);
        assert_eq!(probs[0][0], 1.0);
        assert_eq!(probs[0][1], 0.0);
    }

    #[test]
    fn equal_attraction_splits_evenly() {
        let sc = scenario_from_str(&two_station_json(1, "[4]")).unwrap();
        // EVs centered between two identical stations; epsilon disabled.
        let evs = crate::scenario::spawn_evs(&sc, 0, 5);
        let mut centered = evs.clone();
        for ev in &mut centered {
            ev.location = [0.0, 0.0];
        }
        let probs =
            choice_probabilities(&centered, &sc, 0, &[0.5, 0.5], &[0.0, 0.0], &sc.choice, 5);
        for row in &probs {
            assert_abs_diff_eq!(row[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn dc_ties_break_to_lowest_id() {
        let sc = scenario_from_str(&two_station_json(1, "[2]")).unwrap();
        let mut config = sc.choice;
        config.mode = ChoiceMode::DeterministicDc;
        let mut evs = crate::scenario::spawn_evs(&sc, 0, 5);
        for ev in &mut evs {
            ev.location = [0.0, 0.0];
        }
        let probs = choice_probabilities(&evs, &sc, 0, &[0.5, 0.5], &[0.0, 0.0], &config, 5);
        for row in &probs {
            assert_eq!(row[0], 1.0);
            assert_eq!(row[1], 0.0);
        }
    }

    #[test]
    fn dc_choice_invariant_to_common_attr_shift() {
        // Shifting every reachable station's attraction by the same amount
        // cannot move the argmax.
        let attrs = [3.0, 1.0, 2.5];
        let argmax = |xs: &[f64]| {
            xs.iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| {
                    if v > acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                })
                .0
        };
        let shifted: Vec<f64> = attrs.iter().map(|a| a + 17.25).collect();
        assert_eq!(argmax(&attrs), argmax(&shifted));
    }

    #[test]
    fn arrival_rate_column_sums() {
        assert_eq!(arrival_rates(&[], 3), vec![0.0, 0.0, 0.0]);
        let one_hot = vec![vec![0.0, 0.0, 1.0]; 10];
        assert_eq!(arrival_rates(&one_hot, 3), vec![0.0, 0.0, 10.0]);
        let halves = vec![vec![0.5, 0.5]; 2];
        assert_eq!(arrival_rates(&halves, 2), vec![1.0, 1.0]);
    }

    #[test]
    fn symmetric_msa_fixed_point() {
        let n = 6;
        let sc = scenario_from_str(&two_station_json(1, &format!("[{}]", 2 * n))).unwrap();
        let mut evs = crate::scenario::spawn_evs(&sc, 0, 5);
        for ev in &mut evs {
            ev.location = [0.0, 0.0];
        }
        let eq = msa_equilibrium(&evs, &sc, 0, &[0.5, 0.5], &sc.choice, 5);
        assert!(eq.converged);
        assert_abs_diff_eq!(eq.arrival_rates[0], n as f64, epsilon = 1e-6);
        assert_abs_diff_eq!(eq.arrival_rates[1], n as f64, epsilon = 1e-6);
    }

    #[test]
    fn msa_single_station_immediate() {
        let json = two_station_json(1, "[3]").replace(
            "\"location\": [1.0, 0.0]",
            "\"location\": [5000.0, 0.0]",
        );
        let sc = scenario_from_str(&json).unwrap();
        let evs = crate::scenario::spawn_evs(&sc, 0, 5);
        let eq = msa_equilibrium(&evs, &sc, 0, &[0.5, 0.5], &sc.choice, 5);
        for row in &eq.probs {
            assert_eq!(row[0], 1.0);
        }
        assert_eq!(eq.arrival_rates[0], 3.0);
    }

    #[test]
    fn msa_empty_population() {
        let sc = scenario_from_str(&two_station_json(1, "[0]")).unwrap();
        let eq = msa_equilibrium(&[], &sc, 0, &[0.5, 0.5], &sc.choice, 5);
        assert!(eq.probs.is_empty());
        assert_eq!(eq.arrival_rates, vec![0.0, 0.0]);
        assert!(eq.converged);
    }

    #[test]
    fn msa_step_sizes_decay_like_one_over_n() {
        // Asymmetric congested instance: deltas must obey the structural
        // 2/(n+1) envelope of 1/(n+1) averaging.
        let sc = scenario_from_str(&two_station_json(3, "[30]")).unwrap();
        let mut config = sc.choice;
        config.msa_tol = 1e-12;
        config.msa_max_iters = 60;
        let evs = crate::scenario::spawn_evs(&sc, 0, 5);
        let ctx = HourContext::build(&sc, 0, evs, 0.0, 5);
        let servers = vec![3usize, 1usize];
        let zero = vec![0.0, 0.0];
        let mut probs = probabilities(&sc, &ctx, &[0.5, 0.5], &zero, &servers, &config);
        for n in 0..config.msa_max_iters {
            let lambda = arrival_rates(&probs, 2);
            let waits = station_waits(&sc, &servers, &lambda);
            let target = probabilities(&sc, &ctx, &[0.5, 0.5], &waits, &servers, &config);
            let step = 1.0 / (n as f64 + 1.0);
            let mut delta: f64 = 0.0;
            for (row, trow) in probs.iter_mut().zip(&target) {
                for (p, t) in row.iter_mut().zip(trow) {
                    let next = *p + (t - *p) * step;
                    delta = delta.max((next - *p).abs());
                    *p = next;
                }
            }
            assert!(delta <= 2.0 / (n as f64 + 1.0) + 1e-12);
        }
    }

    #[test]
    fn more_poles_never_lose_arrivals() {
        let run = |poles0: usize| {
            let sc = scenario_from_str(&two_station_json(poles0, "[20]")).unwrap();
            let mut evs = crate::scenario::spawn_evs(&sc, 0, 5);
            for ev in &mut evs {
                ev.location = [0.0, 0.0];
            }
            msa_equilibrium(&evs, &sc, 0, &[0.5, 0.5], &sc.choice, 5).arrival_rates[0]
        };
        assert!(run(2) >= run(1) - 1e-9);
        assert!(run(3) >= run(2) - 1e-9);
    }

    #[test]
    fn dc_agrees_with_high_theta_mnl_limit() {
        let sc = scenario_from_str(&two_station_json(2, "[100]")).unwrap();
        let evs = crate::scenario::spawn_evs(&sc, 0, 11);
        let mut dc = sc.choice;
        dc.mode = ChoiceMode::DeterministicDc;
        let mut limit = sc.choice;
        limit.mode = ChoiceMode::MnlStandard;
        limit.gumbel_scale = 0.0;
        limit.theta = 1e9;
        let p_dc = choice_probabilities(&evs, &sc, 0, &[0.4, 0.6], &[0.0, 0.0], &dc, 3);
        let p_limit = choice_probabilities(&evs, &sc, 0, &[0.4, 0.6], &[0.0, 0.0], &limit, 3);
        for (a, b) in p_dc.iter().zip(&p_limit) {
            for (x, y) in a.iter().zip(b) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sampling_deterministic_and_one_hot_stable() {
        let one_hot = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        for seed in [1, 2, 3, 999] {
            assert_eq!(sample_choices(&one_hot, seed), vec![Some(1), Some(0)]);
        }
        let mixed = vec![vec![0.3, 0.7]; 5];
        assert_eq!(sample_choices(&mixed, 42), sample_choices(&mixed, 42));
        assert_eq!(sample_choices(&[vec![0.0, 0.0]], 1), vec![None]);
    }

    #[test]
    fn sampling_frequency_matches_probability() {
        let row = vec![vec![0.5, 0.5]];
        let mut count1 = 0usize;
        let n = 100_000;
        for seed in 0..n {
            if sample_choices(&row, seed as u64) == vec![Some(1)] {
                count1 += 1;
            }
        }
        let freq = count1 as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(utils in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
            let p = softmax(&utils);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn softmax_shift_invariant(
            utils in proptest::collection::vec(-20.0f64..20.0, 2..8),
            shift in -100.0f64..100.0,
        ) {
            let base = softmax(&utils);
            let shifted: Vec<f64> = utils.iter().map(|u| u + shift).collect();
            let moved = softmax(&shifted);
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn equilibrium_rows_stochastic(seed in 0u64..50, count in 1u32..25) {
            let json = two_station_json(2, &format!("[{count}]"))
                .replace("\"gumbel_scale\": 0.0", "\"gumbel_scale\": 1.0");
            let sc = scenario_from_str(&json).unwrap();
            let evs = crate::scenario::spawn_evs(&sc, 0, seed);
            let eq = msa_equilibrium(&evs, &sc, 0, &[0.35, 0.62], &sc.choice, seed);
            for row in eq.probs.iter() {
                if row.iter().all(|&p| p == 0.0) {
                    continue;
                }
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
            let lam: f64 = eq.arrival_rates.iter().sum();
            let rows: f64 = eq.probs.iter()
                .map(|r| r.iter().sum::<f64>())
                .sum();
            prop_assert!((lam - rows).abs() < 1e-9);
        }
    }
}
