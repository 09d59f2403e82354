//! Relative-entropy sensitivity screening for the CEM population.
//!
//! The score distribution of the full population is fitted with a
//! Gaussian; for each decision coordinate, the population is re-scored
//! with that coordinate pinned to its elite mean and refitted. The KL
//! divergence between the frozen and unconditional fits ranks how much a
//! coordinate's variability moves the objective; coordinates below the
//! threshold are frozen for the next update.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use super::{EliteSet, WindowObjective};

#[derive(Debug, Error, PartialEq)]
#[error("standard deviations must be positive (got {sigma_p} and {sigma_q})")]
pub struct NonPositiveStd {
    pub sigma_p: f64,
    pub sigma_q: f64,
}

/// Maximum-likelihood Gaussian fit: (mean, population std).
pub fn gaussian_fit(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Closed-form KL divergence between univariate Gaussians,
/// `KL(p || q) = ln(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2`.
pub fn gaussian_kl(p: (f64, f64), q: (f64, f64)) -> Result<f64, NonPositiveStd> {
    let (mp, sp) = p;
    let (mq, sq) = q;
    if sp <= 0.0 || sq <= 0.0 {
        return Err(NonPositiveStd {
            sigma_p: sp,
            sigma_q: sq,
        });
    }
    Ok((sq / sp).ln() + (sp * sp + (mp - mq) * (mp - mq)) / (2.0 * sq * sq) - 0.5)
}

/// Per-coordinate sensitivity indices and the resulting active set.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    /// KL divergence per coordinate, nats.
    pub indices: Vec<f64>,
    /// Coordinates whose index exceeds the threshold.
    pub active_set: BTreeSet<usize>,
    /// Gaussian fit (mean, std) of the unconditional scores.
    pub unconditional_fit: (f64, f64),
    /// Gaussian fit per frozen-coordinate population.
    pub conditional_fits: Vec<(f64, f64)>,
}

/// Computes sensitivity indices over the current population.
///
/// `exact` forces full objective re-evaluations of each frozen population;
/// otherwise the objective's cached shortcut is used. Zero score variance
/// yields all-zero indices (no information to rank).
pub fn psa_indices<O: WindowObjective>(
    objective: &O,
    samples: &[Vec<f64>],
    scores: &[f64],
    details: &[O::Detail],
    elites: &EliteSet,
    threshold: f64,
    exact: bool,
) -> SensitivityReport {
    let dim = elites.elite_mean.len();
    let unconditional_fit = gaussian_fit(scores);

    let degenerate = unconditional_fit.1 <= 1e-12 || samples.len() < 2;
    let per_coord: Vec<((f64, f64), f64)> = (0..dim)
        .into_par_iter()
        .map(|k| {
            if degenerate {
                return ((unconditional_fit.0, 0.0), 0.0);
            }
            let pinned = elites.elite_mean[k];
            let frozen_scores: Vec<f64> = samples
                .iter()
                .zip(details)
                .map(|(theta, detail)| {
                    if exact {
                        let mut t = theta.clone();
                        t[k] = pinned;
                        objective.evaluate(&t).0
                    } else {
                        objective.evaluate_frozen(theta, k, pinned, detail)
                    }
                })
                .collect();
            let fit = gaussian_fit(&frozen_scores);
            let d = if fit.1 <= 1e-12 {
                // Freezing k collapsed the variance entirely; treat the
                // degenerate fit as maximally informative only through the
                // mean shift, with a vanishing-variance guard.
                gaussian_kl((fit.0, 1e-12), unconditional_fit).unwrap_or(0.0)
            } else {
                gaussian_kl(fit, unconditional_fit).unwrap_or(0.0)
            };
            (fit, d.max(0.0))
        })
        .collect();

    let indices: Vec<f64> = per_coord.iter().map(|(_, d)| *d).collect();
    let conditional_fits: Vec<(f64, f64)> = per_coord.iter().map(|(f, _)| *f).collect();
    let active_set = indices
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > threshold)
        .map(|(k, _)| k)
        .collect();

    SensitivityReport {
        indices,
        active_set,
        unconditional_fit,
        conditional_fits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{cem_sample, elite_select, SamplingDistribution, WindowObjective};
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        assert_abs_diff_eq!(
            gaussian_kl((3.0, 2.0), (3.0, 2.0)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kl_mean_shift_term() {
        assert_abs_diff_eq!(
            gaussian_kl((1.0, 1.0), (0.0, 1.0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kl_hand_evaluated_variance_term() {
        // KL(N(0,2) || N(0,1)) = 2 - ln 2 - 1/2
        let expect = 2.0 - (2.0f64).ln() - 0.5;
        assert_abs_diff_eq!(
            gaussian_kl((0.0, 2.0), (0.0, 1.0)).unwrap(),
            expect,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(expect, 0.8068528194400546, epsilon = 1e-15);
    }

    #[test]
    fn kl_rejects_nonpositive_std() {
        assert!(gaussian_kl((0.0, 0.0), (0.0, 1.0)).is_err());
        assert!(gaussian_kl((0.0, 1.0), (0.0, -2.0)).is_err());
    }

    struct Separable {
        weights: Vec<f64>,
    }

    impl WindowObjective for Separable {
        type Detail = ();
        fn dim(&self) -> usize {
            self.weights.len()
        }
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(-1.0, 1.0); self.weights.len()]
        }
        fn evaluate(&self, theta: &[f64]) -> (f64, ()) {
            (
                theta
                    .iter()
                    .zip(&self.weights)
                    .map(|(t, w)| w * t * t)
                    .sum(),
                (),
            )
        }
    }

    fn population_of(obj: &Separable, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<()>) {
        let bounds = obj.bounds();
        let dist = SamplingDistribution {
            mean: vec![0.2; obj.dim()],
            std: vec![0.4; obj.dim()],
            sigma_min: 0.005,
            sigma_max: 0.5,
        };
        let samples = cem_sample(&dist, 1000, &bounds, seed);
        let scores: Vec<f64> = samples.iter().map(|t| obj.evaluate(t).0).collect();
        let details = vec![(); samples.len()];
        (samples, scores, details)
    }

    #[test]
    fn null_coordinate_scores_zero() {
        // Second coordinate does not enter the objective at all.
        let obj = Separable {
            weights: vec![1.0, 0.0],
        };
        let (samples, scores, details) = population_of(&obj, 3);
        let elites = elite_select(&samples, &scores, 0.05);
        let report = psa_indices(&obj, &samples, &scores, &details, &elites, 0.1, false);
        assert_abs_diff_eq!(report.indices[1], 0.0, epsilon = 1e-9);
        assert!(!report.active_set.contains(&1));
    }

    #[test]
    fn dominant_coordinate_ranks_first() {
        let obj = Separable {
            weights: vec![10.0, 0.1],
        };
        for seed in 0..5 {
            let (samples, scores, details) = population_of(&obj, seed);
            let elites = elite_select(&samples, &scores, 0.05);
            let report = psa_indices(&obj, &samples, &scores, &details, &elites, 0.0, false);
            assert!(
                report.indices[0] > report.indices[1],
                "seed {seed}: {:?}",
                report.indices
            );
        }
    }

    #[test]
    fn indices_match_independent_kl_computation() {
        // Recompute one coordinate's index by hand: freeze, rescore, fit
        // both Gaussians, apply the closed form.
        let obj = Separable {
            weights: vec![10.0, 0.1],
        };
        let (samples, scores, details) = population_of(&obj, 11);
        let elites = elite_select(&samples, &scores, 0.05);
        let report = psa_indices(&obj, &samples, &scores, &details, &elites, 0.0, false);

        let pinned = elites.elite_mean[0];
        let frozen: Vec<f64> = samples
            .iter()
            .map(|t| obj.evaluate(&[pinned, t[1]]).0)
            .collect();
        let f_hat = gaussian_fit(&scores);
        let g_hat = gaussian_fit(&frozen);
        let want = gaussian_kl(g_hat, f_hat).unwrap();
        assert_abs_diff_eq!(report.indices[0], want, epsilon = 1e-12);
    }

    #[test]
    fn threshold_filters_active_set() {
        let report = SensitivityReport {
            indices: vec![0.5, 0.01],
            active_set: [0.5, 0.01]
                .iter()
                .enumerate()
                .filter(|(_, &d)| d > 0.1)
                .map(|(k, _)| k)
                .collect(),
            unconditional_fit: (0.0, 1.0),
            conditional_fits: vec![(0.0, 1.0); 2],
        };
        assert!(report.active_set.contains(&0));
        assert!(!report.active_set.contains(&1));
        assert_eq!(report.active_set.len(), 1);
    }

    #[test]
    fn zero_variance_population_yields_zero_indices() {
        let obj = Separable {
            weights: vec![1.0],
        };
        let samples = vec![vec![0.5]; 20];
        let scores = vec![0.25; 20];
        let details = vec![(); 20];
        let elites = elite_select(&samples, &scores, 0.1);
        let report = psa_indices(&obj, &samples, &scores, &details, &elites, 0.1, false);
        assert!(report.indices.iter().all(|&d| d == 0.0));
        assert!(report.active_set.is_empty());
    }

    #[test]
    fn all_indices_nonnegative() {
        let obj = Separable {
            weights: vec![3.0, -2.0, 0.5],
        };
        let (samples, scores, details) = population_of(&obj, 17);
        let elites = elite_select(&samples, &scores, 0.05);
        let report = psa_indices(&obj, &samples, &scores, &details, &elites, 0.05, false);
        assert!(report.indices.iter().all(|&d| d >= 0.0));
    }
}
