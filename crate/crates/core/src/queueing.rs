//! Exact M/M/s/c stationary analysis for one station.
//!
//! States count vehicles in the system (charging plus waiting), 0..=c.
//! Unnormalized state weights are built from per-step birth/death ratios
//! `lambda / (min(d, s) * mu)` in log space and normalized with
//! log-sum-exp, which stays finite where the textbook factorial/power
//! expressions overflow.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams {
    /// Arrival rate, vehicles/hour.
    pub arrival_rate: f64,
    /// Per-server service rate, vehicles/hour.
    pub service_rate: f64,
    /// Active servers (charging poles).
    pub servers: usize,
    /// Total capacity including waiting spots; `servers <= capacity`.
    pub capacity: usize,
}

impl QueueParams {
    pub fn new(arrival_rate: f64, service_rate: f64, servers: usize, capacity: usize) -> Self {
        assert!(arrival_rate >= 0.0, "arrival rate must be >= 0");
        assert!(service_rate > 0.0, "service rate must be > 0");
        assert!(servers >= 1, "need at least one server");
        assert!(capacity >= servers, "capacity must be >= servers");
        QueueParams {
            arrival_rate,
            service_rate,
            servers,
            capacity,
        }
    }
}

/// Stationary metrics of one station's queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMetrics {
    /// State probabilities pi_0..=pi_c; sums to 1.
    pub state_probs: Vec<f64>,
    /// Expected number waiting (excluding in service).
    pub queue_length: f64,
    /// Expected wait of an admitted vehicle, hours.
    pub wait_hours: f64,
    /// Blocking probability pi_c.
    pub rejection_prob: f64,
    /// Expected rejected arrivals, vehicles/hour.
    pub rejected_rate: f64,
}

/// Stationary distribution pi_0..=pi_c.
pub fn stationary_distribution(p: &QueueParams) -> Vec<f64> {
    let n = p.capacity + 1;
    if p.arrival_rate == 0.0 {
        let mut probs = vec![0.0; n];
        probs[0] = 1.0;
        return probs;
    }
    let mut log_w = Vec::with_capacity(n);
    let mut acc = 0.0_f64;
    log_w.push(acc);
    for d in 1..n {
        let ratio = p.arrival_rate / (d.min(p.servers) as f64 * p.service_rate);
        acc += ratio.ln();
        log_w.push(acc);
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for q in &mut probs {
        *q /= sum;
    }
    probs
}

/// Expected number waiting: sum over d > s of (d - s) pi_d.
pub fn expected_queue_length(p: &QueueParams) -> f64 {
    let probs = stationary_distribution(p);
    queue_length_from(&probs, p.servers)
}

fn queue_length_from(probs: &[f64], servers: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .skip(servers + 1)
        .map(|(d, pi)| (d - servers) as f64 * pi)
        .sum()
}

/// Expected wait of admitted vehicles via Little's law,
/// `W = L / (lambda (1 - pi_c))`; zero when throughput vanishes.
pub fn expected_wait(p: &QueueParams) -> f64 {
    let probs = stationary_distribution(p);
    wait_from(&probs, p)
}

fn wait_from(probs: &[f64], p: &QueueParams) -> f64 {
    let throughput = p.arrival_rate * (1.0 - probs[p.capacity]);
    if throughput <= 0.0 {
        return 0.0;
    }
    queue_length_from(probs, p.servers) / throughput
}

/// Expected rejected arrivals per hour: lambda * pi_c.
pub fn rejected_rate(p: &QueueParams) -> f64 {
    let probs = stationary_distribution(p);
    p.arrival_rate * probs[p.capacity]
}

/// All stationary metrics in one pass.
pub fn metrics(p: &QueueParams) -> QueueMetrics {
    let state_probs = stationary_distribution(p);
    let queue_length = queue_length_from(&state_probs, p.servers);
    let wait_hours = wait_from(&state_probs, p);
    let rejection_prob = state_probs[p.capacity];
    QueueMetrics {
        rejected_rate: p.arrival_rate * rejection_prob,
        queue_length,
        wait_hours,
        rejection_prob,
        state_probs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_state_symmetric_chain() {
        let p = QueueParams::new(1.0, 1.0, 1, 1);
        let probs = stationary_distribution(&p);
        assert_abs_diff_eq!(probs[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rejected_rate(&p), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn uniform_at_unit_load() {
        let p = QueueParams::new(1.0, 1.0, 1, 2);
        let probs = stationary_distribution(&p);
        for pi in &probs {
            assert_abs_diff_eq!(*pi, 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(expected_queue_length(&p), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_wait(&p), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn matches_frozen_balance_solve() {
        // Independent linear solve of the s=2, c=4, lambda=3, mu=1 generator.
        let p = QueueParams::new(3.0, 1.0, 2, 4);
        let probs = stationary_distribution(&p);
        let oracle = [
            0.039408866995073885,
            0.11822660098522156,
            0.17733990147783232,
            0.26600985221674855,
            0.3990147783251229,
        ];
        for (got, want) in probs.iter().zip(oracle) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(
            expected_queue_length(&p),
            1.0640394088669942,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(expected_wait(&p), 0.5901639344262288, epsilon = 1e-10);
        assert_abs_diff_eq!(rejected_rate(&p), 1.1970443349753688, epsilon = 1e-10);
    }

    #[test]
    fn zero_arrivals_idle_system() {
        let p = QueueParams::new(0.0, 2.0, 3, 5);
        let probs = stationary_distribution(&p);
        assert_eq!(probs[0], 1.0);
        assert!(probs[1..].iter().all(|&x| x == 0.0));
        assert_eq!(expected_wait(&p), 0.0);
        assert_eq!(rejected_rate(&p), 0.0);
    }

    #[test]
    fn no_waiting_room_zero_queue() {
        let p = QueueParams::new(4.0, 1.0, 3, 3);
        assert_eq!(expected_queue_length(&p), 0.0);
        assert_eq!(expected_wait(&p), 0.0);
    }

    #[test]
    fn large_capacity_stays_finite() {
        // The factorial form of pi_0 overflows around c = 170; the
        // ratio-product form must not.
        let p = QueueParams::new(500.0, 1.0, 10, 400);
        let probs = stationary_distribution(&p);
        assert!(probs.iter().all(|x| x.is_finite()));
        let sum: f64 = probs.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        assert!(probs[p.capacity] > 0.9); // heavily overloaded
    }

    proptest! {
        #[test]
        fn probabilities_normalized(
            lam in 0.0f64..20.0,
            mu in 0.1f64..5.0,
            s in 1usize..6,
            extra in 0usize..8,
        ) {
            let p = QueueParams::new(lam, mu, s, s + extra);
            let probs = stationary_distribution(&p);
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn throughput_below_service_capacity(
            lam in 0.0f64..30.0,
            mu in 0.1f64..5.0,
            s in 1usize..6,
            extra in 0usize..8,
        ) {
            let p = QueueParams::new(lam, mu, s, s + extra);
            let probs = stationary_distribution(&p);
            let throughput = lam * (1.0 - probs[p.capacity]);
            prop_assert!(throughput <= s as f64 * mu + 1e-9);
        }

        #[test]
        fn blocking_monotone_in_arrivals(
            lam in 0.1f64..15.0,
            bump in 0.01f64..5.0,
            mu in 0.2f64..4.0,
            s in 1usize..5,
            extra in 0usize..6,
        ) {
            let lo = QueueParams::new(lam, mu, s, s + extra);
            let hi = QueueParams::new(lam + bump, mu, s, s + extra);
            let p_lo = stationary_distribution(&lo)[lo.capacity];
            let p_hi = stationary_distribution(&hi)[hi.capacity];
            prop_assert!(p_hi >= p_lo - 1e-12);
        }
    }
}
