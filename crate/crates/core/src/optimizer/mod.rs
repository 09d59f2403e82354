//! Upper-level solver: cross-entropy method with Gaussian sampling, elite
//! selection, smoothing, sigma clamping, and periodic relative-entropy
//! sensitivity screening that freezes low-influence coordinates.
//!
//! [`optimize_window`] is generic over a [`WindowObjective`] so the same
//! loop drives both the pricing problem and the analytic surrogates used
//! to validate convergence.

mod psa;
mod rolling;
mod sweep;

pub use psa::{gaussian_fit, gaussian_kl, psa_indices, SensitivityReport};
pub use rolling::{
    optimize_schedule, rolling_horizon, OptimizeOutcome, PricingObjective, WindowRecord,
};
pub use sweep::{omega_sweep, SweepCandidate, SweepOutcome};

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_for, Stream};

/// Independent Gaussian sampling distribution over the decision vector.
#[derive(Debug, Clone)]
pub struct SamplingDistribution {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SamplingDistribution {
    /// Fresh per-window distribution: means at the bound midpoints, stds at
    /// `sigma_max = span/4` with a small exploration floor.
    pub fn for_bounds(bounds: &[(f64, f64)]) -> Self {
        let span = bounds
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(0.0_f64, f64::max);
        let sigma_max = (span / 4.0).max(1e-6);
        let sigma_min = (0.005_f64).min(sigma_max);
        SamplingDistribution {
            mean: bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
            std: vec![sigma_max; bounds.len()],
            sigma_min,
            sigma_max,
        }
    }

    pub fn mean_sigma(&self) -> f64 {
        if self.std.is_empty() {
            return 0.0;
        }
        self.std.iter().sum::<f64>() / self.std.len() as f64
    }
}

/// Cross-entropy method settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    /// Samples per iteration.
    pub population: usize,
    /// Fraction of the population kept as elites, in (0, 1).
    pub elite_ratio: f64,
    /// Weight kept on the previous distribution parameters, in [0, 1].
    pub smoothing: f64,
    /// Relative elite-spread threshold for the stopping rule.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Sensitivity threshold (nats) for the active set.
    pub psa_threshold: f64,
    /// Run the sensitivity screen every this many iterations; 0 disables.
    pub psa_frequency: usize,
    /// Re-evaluate frozen populations through the full objective instead of
    /// the cached-equilibrium shortcut.
    pub psa_exact: bool,
    /// Hours per rolling window.
    pub window_hours: usize,
    /// Start each window from the previous window's best prices instead of
    /// the bound midpoints.
    pub warm_start: bool,
    /// Optimizer seed; falls back to the scenario seed when absent.
    pub seed: Option<u64>,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig {
            population: 1000,
            elite_ratio: 0.05,
            smoothing: 0.7,
            tolerance: 1e-3,
            max_iters: 100,
            psa_threshold: 0.05,
            psa_frequency: 5,
            psa_exact: false,
            window_hours: 1,
            warm_start: false,
            seed: None,
        }
    }
}

impl CemConfig {
    pub fn elite_count(&self) -> usize {
        ((self.elite_ratio * self.population as f64).ceil() as usize).max(1)
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.population < 1 {
            return Err(("population", "must be >= 1".into()));
        }
        if !(self.elite_ratio > 0.0 && self.elite_ratio < 1.0) {
            return Err(("elite_ratio", "must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(("smoothing", "must lie in [0, 1]".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(("tolerance", "must be > 0".into()));
        }
        if self.max_iters < 1 {
            return Err(("max_iters", "must be >= 1".into()));
        }
        if self.psa_threshold < 0.0 {
            return Err(("psa_threshold", "must be >= 0".into()));
        }
        if self.window_hours < 1 {
            return Err(("window_hours", "must be >= 1".into()));
        }
        Ok(())
    }
}

/// Elite slice of one iteration's population.
#[derive(Debug, Clone)]
pub struct EliteSet {
    pub samples: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    /// Worst elite score.
    pub threshold: f64,
    pub elite_mean: Vec<f64>,
    pub elite_std: Vec<f64>,
}

/// A problem the CEM loop can drive: bounded decision vector in, score out.
/// Scores are maximized.
pub trait WindowObjective: Sync {
    /// Evaluation artifact kept per sample; lets the sensitivity screen
    /// reuse expensive intermediate state.
    type Detail: Send + Sync;

    fn dim(&self) -> usize;
    fn bounds(&self) -> Vec<(f64, f64)>;
    fn evaluate(&self, theta: &[f64]) -> (f64, Self::Detail);

    /// Score with coordinate `k` overwritten by `value`. The default
    /// performs a full re-evaluation; objectives may shortcut it.
    fn evaluate_frozen(&self, theta: &[f64], k: usize, value: f64, _detail: &Self::Detail) -> f64 {
        let mut frozen = theta.to_vec();
        frozen[k] = value;
        self.evaluate(&frozen).0
    }
}

/// Draws `n` decision vectors from independent Gaussians, clamped into the
/// bounds. Sample `i` uses its own counter-derived RNG, so results do not
/// depend on evaluation order or thread count.
pub fn cem_sample(
    dist: &SamplingDistribution,
    n: usize,
    bounds: &[(f64, f64)],
    rng_seed: u64,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut rng = rng_for(rng_seed, Stream::CemSample, &[i as u64]);
            dist.mean
                .iter()
                .zip(&dist.std)
                .zip(bounds)
                .map(|((&m, &s), &(lo, hi))| {
                    // Box-Muller keeps the draw count per coordinate fixed.
                    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let z = (-2.0 * u1.ln()).sqrt() * u2.cos();
                    (m + s * z).clamp(lo, hi)
                })
                .collect()
        })
        .collect()
}

/// Selects the top `ceil(ratio * N)` samples by score, ties broken by
/// sample index. The threshold is the worst elite score.
pub fn elite_select(samples: &[Vec<f64>], scores: &[f64], elite_ratio: f64) -> EliteSet {
    assert_eq!(samples.len(), scores.len());
    assert!(!samples.is_empty(), "need at least one sample");
    let n = samples.len();
    let k = (((elite_ratio * n as f64).ceil()) as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let chosen = &order[..k];
    let dim = samples[0].len();
    let mut elite_mean = vec![0.0; dim];
    for &i in chosen {
        for (acc, v) in elite_mean.iter_mut().zip(&samples[i]) {
            *acc += v;
        }
    }
    for m in &mut elite_mean {
        *m /= k as f64;
    }
    let mut elite_std = vec![0.0; dim];
    for &i in chosen {
        for ((acc, v), m) in elite_std.iter_mut().zip(&samples[i]).zip(&elite_mean) {
            *acc += (v - m) * (v - m);
        }
    }
    for s in &mut elite_std {
        *s = (*s / k as f64).sqrt();
    }
    EliteSet {
        samples: chosen.iter().map(|&i| samples[i].clone()).collect(),
        scores: chosen.iter().map(|&i| scores[i]).collect(),
        threshold: scores[chosen[k - 1]],
        elite_mean,
        elite_std,
    }
}

/// Smoothed update toward the elite statistics for active coordinates;
/// frozen coordinates keep their parameters. Stds are clamped into
/// `[sigma_min, sigma_max]` afterwards.
pub fn cem_update(
    dist: &SamplingDistribution,
    elites: &EliteSet,
    active: &BTreeSet<usize>,
    smoothing: f64,
) -> SamplingDistribution {
    let mut next = dist.clone();
    for k in 0..dist.mean.len() {
        if active.contains(&k) {
            next.mean[k] = smoothing * dist.mean[k] + (1.0 - smoothing) * elites.elite_mean[k];
            next.std[k] = smoothing * dist.std[k] + (1.0 - smoothing) * elites.elite_std[k];
        }
        next.std[k] = next.std[k].clamp(dist.sigma_min, dist.sigma_max);
    }
    next
}

/// One optimization trace row.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub window: usize,
    pub iteration: usize,
    /// Best score seen so far in this window.
    pub best: f64,
    /// Mean score of this iteration's population.
    pub mean: f64,
    pub elite_min: f64,
    pub elite_max: f64,
    /// Mean sampling std after the update.
    pub mean_sigma: f64,
    pub active_count: usize,
}

/// Result of one optimized window.
#[derive(Debug)]
pub struct WindowResult<D> {
    pub window: usize,
    pub best_theta: Vec<f64>,
    pub best_score: f64,
    pub best_detail: D,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// Final sampling distribution, for warm starts and diagnostics.
    pub final_mean: Vec<f64>,
    pub last_sensitivity: Option<SensitivityReport>,
}

/// Runs the CEM loop on one window.
///
/// Iterations sample, evaluate in parallel, select elites, optionally run
/// the sensitivity screen (every `psa_frequency`-th iteration, counting
/// from 0), and update the distribution. The loop stops once the relative
/// elite spread stays below `tolerance` for two consecutive iterations, or
/// at `max_iters` (flagged as non-converged).
pub fn optimize_window<O: WindowObjective>(
    objective: &O,
    config: &CemConfig,
    window: usize,
    master_seed: u64,
    init: Option<SamplingDistribution>,
) -> WindowResult<O::Detail> {
    let bounds = objective.bounds();
    assert_eq!(bounds.len(), objective.dim());
    let mut dist = init.unwrap_or_else(|| SamplingDistribution::for_bounds(&bounds));
    assert_eq!(dist.mean.len(), bounds.len());

    let all_active: BTreeSet<usize> = (0..bounds.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut small_spread_streak = 0usize;
    let mut last_sensitivity = None;

    for iteration in 0..config.max_iters {
        let sample_seed = derive_seed(
            master_seed,
            Stream::CemSample,
            &[window as u64, iteration as u64],
        );
        let samples = cem_sample(&dist, config.population, &bounds, sample_seed);
        let (scores, details): (Vec<f64>, Vec<O::Detail>) = samples
            .par_iter()
            .map(|theta| objective.evaluate(theta))
            .collect::<Vec<_>>()
            .into_iter()
            .unzip();

        for (i, &score) in scores.iter().enumerate() {
            if best.as_ref().map_or(true, |(b, _)| score > *b) {
                best = Some((score, samples[i].clone()));
            }
        }

        let elites = elite_select(&samples, &scores, config.elite_ratio);

        let active = if config.psa_frequency > 0 && iteration % config.psa_frequency == 0 {
            let report = psa_indices(
                objective,
                &samples,
                &scores,
                &details,
                &elites,
                config.psa_threshold,
                config.psa_exact,
            );
            // An all-below-threshold screen carries no ranking information;
            // freezing every coordinate would only stall the iteration, so
            // fall back to the standard update.
            let set = if report.active_set.is_empty() {
                all_active.clone()
            } else {
                report.active_set.clone()
            };
            last_sensitivity = Some(report);
            set
        } else {
            all_active.clone()
        };

        dist = cem_update(&dist, &elites, &active, config.smoothing);

        let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
        let elite_max = elites.scores[0];
        let elite_min = *elites.scores.last().unwrap();
        trace.push(TraceRow {
            window,
            iteration,
            best: best.as_ref().map(|(s, _)| *s).unwrap_or(f64::NAN),
            mean: mean_score,
            elite_min,
            elite_max,
            mean_sigma: dist.mean_sigma(),
            active_count: active.len(),
        });

        let spread = (elite_max - elite_min).abs() / elite_max.abs().max(1e-12);
        if spread < config.tolerance {
            small_spread_streak += 1;
            if small_spread_streak >= 2 {
                converged = true;
                break;
            }
        } else {
            small_spread_streak = 0;
        }
    }

    let (best_score, best_theta) = best.expect("at least one iteration ran");
    // Deterministic objective: re-evaluating the winner reproduces the
    // detail without holding every sample's artifact across iterations.
    let (_, best_detail) = objective.evaluate(&best_theta);
    WindowResult {
        window,
        best_theta,
        best_score,
        best_detail,
        trace,
        converged,
        final_mean: dist.mean,
        last_sensitivity,
    }
}
