//! Rolling-horizon pricing optimization.
//!
//! The horizon splits into windows of `window_hours`; each window's
//! station-hour prices are optimized by the CEM loop against the follower
//! equilibrium, and sessions still charging at a window boundary keep
//! their poles in the following window.

use crate::choice::{ChoiceConfig, ChoiceEquilibrium, HourContext};
use crate::economics::{
    aggregate_ev_utility, cs_revenue, ev_utility, performance_index, queue_penalty,
    PriceSchedule,
};
use crate::rng::{derive_seed, Stream};
use crate::scenario::{spawn_evs, Scenario};
use crate::sim::{assemble_report, effective_servers, CarryState, HourRow, RunReport};

use super::{optimize_window, CemConfig, SamplingDistribution, TraceRow, WindowResult};

/// One simulated hour inside a window evaluation.
#[derive(Debug, Clone)]
pub struct HourEval {
    pub hour: usize,
    pub servers: Vec<usize>,
    pub eq: ChoiceEquilibrium,
    pub ev_utility: f64,
    pub cs_revenue: f64,
    pub queue_penalty: f64,
    pub performance_index: f64,
}

/// Cached artifact of evaluating one candidate price vector.
#[derive(Debug, Clone)]
pub struct WindowEval {
    pub per_hour: Vec<HourEval>,
    pub end_carry: CarryState,
}

/// The pricing problem for one window: decision vector is hour-major,
/// `theta[h * n_stations + s]`.
pub struct PricingObjective<'a> {
    pub scenario: &'a Scenario,
    pub hours: Vec<usize>,
    pub contexts: Vec<HourContext>,
    pub incoming: CarryState,
    pub choice: ChoiceConfig,
    bounds: Vec<(f64, f64)>,
}

impl<'a> PricingObjective<'a> {
    pub fn new(
        scenario: &'a Scenario,
        hours: Vec<usize>,
        contexts: Vec<HourContext>,
        incoming: CarryState,
        choice: ChoiceConfig,
    ) -> Self {
        let bounds = hours
            .iter()
            .flat_map(|&h| {
                (0..scenario.stations.len()).map(move |s| scenario.econ.band(scenario, s, h))
            })
            .collect();
        PricingObjective {
            scenario,
            hours,
            contexts,
            incoming,
            choice,
            bounds,
        }
    }

    fn n_stations(&self) -> usize {
        self.scenario.stations.len()
    }

    fn hour_economics(
        &self,
        h_idx: usize,
        eq: &ChoiceEquilibrium,
        prices: &[f64],
    ) -> (f64, f64, f64, f64) {
        let econ = &self.scenario.econ;
        let ctx = &self.contexts[h_idx];
        let per_ev = ev_utility(ctx, eq, prices, econ);
        let agg = aggregate_ev_utility(&per_ev, &eq.rejected, eq.unserved, econ);
        let rev = cs_revenue(self.scenario, ctx, eq, prices);
        let pen = queue_penalty(ctx, eq, econ);
        let pi = performance_index(rev, agg, econ);
        (agg, rev, pen, pi)
    }
}

impl super::WindowObjective for PricingObjective<'_> {
    type Detail = WindowEval;

    fn dim(&self) -> usize {
        self.hours.len() * self.n_stations()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.clone()
    }

    fn evaluate(&self, theta: &[f64]) -> (f64, WindowEval) {
        let ns = self.n_stations();
        // Every price entering an evaluation must respect its band.
        for (k, &p) in theta.iter().enumerate() {
            let (lo, hi) = self.bounds[k];
            assert!(
                p >= lo - 1e-9 && p <= hi + 1e-9,
                "price {p} outside [{lo}, {hi}] at coordinate {k}"
            );
        }
        let mut carry = self.incoming.clone();
        let mut total = 0.0;
        let mut per_hour = Vec::with_capacity(self.hours.len());
        for (h_idx, ctx) in self.contexts.iter().enumerate() {
            let prices = &theta[h_idx * ns..(h_idx + 1) * ns];
            let carried = carry.advance();
            let servers = effective_servers(self.scenario, &carried);
            let eq = crate::choice::equilibrium(self.scenario, ctx, prices, &servers, &self.choice);
            let (agg, rev, pen, pi) = self.hour_economics(h_idx, &eq, prices);
            carry.absorb(ctx, &eq);
            total += pi;
            per_hour.push(HourEval {
                hour: ctx.hour,
                servers,
                eq,
                ev_utility: agg,
                cs_revenue: rev,
                queue_penalty: pen,
                performance_index: pi,
            });
        }
        (
            total,
            WindowEval {
                per_hour,
                end_carry: carry,
            },
        )
    }

    /// Cheap frozen re-score: the cached equilibrium's probabilities and
    /// waits are held fixed (reachability never depends on price) and only
    /// the price-dependent economics of the affected hour are recomputed.
    fn evaluate_frozen(&self, theta: &[f64], k: usize, value: f64, detail: &WindowEval) -> f64 {
        let ns = self.n_stations();
        let h_idx = k / ns;
        let mut prices: Vec<f64> = theta[h_idx * ns..(h_idx + 1) * ns].to_vec();
        prices[k % ns] = value;
        let (_, _, _, pi) = self.hour_economics(h_idx, &detail.per_hour[h_idx].eq, &prices);
        detail
            .per_hour
            .iter()
            .enumerate()
            .map(|(i, he)| if i == h_idx { pi } else { he.performance_index })
            .sum()
    }
}

/// One optimized window plus the hours it covers.
#[derive(Debug)]
pub struct WindowRecord {
    pub hours: Vec<usize>,
    pub result: WindowResult<WindowEval>,
}

/// Full rolling-horizon product: the assembled schedule, per-window
/// results, the flattened trace, and a simulation-style report of the
/// winning prices.
#[derive(Debug)]
pub struct OptimizeOutcome {
    pub schedule: PriceSchedule,
    pub windows: Vec<WindowRecord>,
    pub trace: Vec<TraceRow>,
    pub report: RunReport,
    pub non_converged_windows: Vec<usize>,
}

/// Optimizes every window in order, carrying queue state across
/// boundaries. The sampling distribution restarts at the bound midpoints
/// each window unless `warm_start` reuses the previous window's winner.
pub fn rolling_horizon(
    scenario: &Scenario,
    cem: &CemConfig,
    choice: &ChoiceConfig,
    seed: u64,
) -> OptimizeOutcome {
    let ns = scenario.stations.len();
    let horizon = scenario.horizon_hours;
    let h = cem.window_hours.max(1);

    let mut carry = CarryState::new(ns);
    let mut prices = vec![vec![0.0; horizon]; ns];
    let mut windows = Vec::new();
    let mut trace = Vec::new();
    let mut hourly = Vec::with_capacity(horizon);
    let mut non_converged = Vec::new();
    let mut prev_best: Option<Vec<f64>> = None;

    let mut start = 0usize;
    let mut window_idx = 0usize;
    while start < horizon {
        let hours: Vec<usize> = (start..(start + h).min(horizon)).collect();
        let contexts: Vec<HourContext> = hours
            .iter()
            .map(|&hour| {
                HourContext::build(
                    scenario,
                    hour,
                    spawn_evs(scenario, hour, seed),
                    choice.gumbel_scale,
                    seed,
                )
            })
            .collect();
        let objective = PricingObjective::new(
            scenario,
            hours.clone(),
            contexts,
            carry.clone(),
            *choice,
        );

        let init = match (&prev_best, cem.warm_start) {
            (Some(prev), true) if prev.len() == super::WindowObjective::dim(&objective) => {
                let bounds = super::WindowObjective::bounds(&objective);
                let mut dist = SamplingDistribution::for_bounds(&bounds);
                for ((m, &p), &(lo, hi)) in dist.mean.iter_mut().zip(prev).zip(&bounds) {
                    *m = p.clamp(lo, hi);
                }
                Some(dist)
            }
            _ => None,
        };

        let result = optimize_window(&objective, cem, window_idx, seed, init);
        if !result.converged {
            non_converged.push(window_idx);
        }

        for (h_idx, &hour) in hours.iter().enumerate() {
            for s in 0..ns {
                prices[s][hour] = result.best_theta[h_idx * ns + s];
            }
            let he = &result.best_detail.per_hour[h_idx];
            let sample_seed = derive_seed(seed, Stream::ChoiceSample, &[hour as u64]);
            let picks = crate::choice::sample_choices(&he.eq.probs, sample_seed);
            let mut sampled = vec![0u32; ns];
            for pick in picks.into_iter().flatten() {
                sampled[pick] += 1;
            }
            hourly.push(HourRow {
                hour,
                prices: result.best_theta[h_idx * ns..(h_idx + 1) * ns].to_vec(),
                lambda: he.eq.arrival_rates.clone(),
                waits: he.eq.waits.clone(),
                rejected: he.eq.rejected.clone(),
                queue_penalty: he.queue_penalty,
                ev_utility: he.ev_utility,
                cs_revenue: he.cs_revenue,
                performance_index: he.performance_index,
                unserved: he.eq.unserved,
                msa_converged: he.eq.converged,
                sampled_arrivals: sampled,
            });
        }

        carry = result.best_detail.end_carry.clone();
        trace.extend(result.trace.iter().cloned());
        prev_best = Some(result.best_theta.clone());
        windows.push(WindowRecord { hours, result });
        start += h;
        window_idx += 1;
    }

    let schedule = PriceSchedule { prices };
    let report = assemble_report(scenario, hourly, seed, choice, "dynamic");
    OptimizeOutcome {
        schedule,
        windows,
        trace,
        report,
        non_converged_windows: non_converged,
    }
}

/// Convenience wrapper resolving the optimizer seed from the scenario.
pub fn optimize_schedule(scenario: &Scenario, cem: &CemConfig, choice: &ChoiceConfig) -> OptimizeOutcome {
    let seed = cem.seed.unwrap_or(scenario.seed);
    rolling_horizon(scenario, cem, choice, seed)
}
