//! Charging curves, SOC/time conversions, session planning, and
//! SOC-limited reachability.
//!
//! L2 charging is linear in time; L3 fast charging follows a bi-exponential
//! curve `f(T) = 1 + a e^{-bT} - (1+a) e^{-cT}` (T in minutes, SOC
//! normalized) that saturates toward 1 and has no closed-form inverse, so
//! the inverse is computed by bisection on the monotone branch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{travel_time, EvAgent, Level, Scenario};

/// Default L3 bi-exponential coefficients (75 kWh fast-charge calibration).
pub const L3_A: f64 = 2.096;
pub const L3_B: f64 = 0.0749;
pub const L3_C: f64 = 0.0552;
/// Default L2 linear rate: full charge in 225 minutes.
pub const L2_RATE_PER_MINUTE: f64 = 1.0 / 225.0;

/// Upper bracket for the L3 numeric inverse, minutes. The curve is flat to
/// within f64 resolution well before this point.
const L3_INVERSE_BRACKET_MAX: f64 = 2000.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChargingError {
    #[error("target SOC {target} is unreachable on this curve")]
    UnreachableTarget { target: f64 },
    #[error("invalid SOC argument {soc}: {reason}")]
    InvalidSoc { soc: f64, reason: &'static str },
    #[error("target SOC {target} below initial SOC {initial}")]
    TargetBelowInitial { initial: f64, target: f64 },
}

/// SOC-versus-time model of a charger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChargingCurve {
    /// Linear: SOC = rate * minutes, clamped at 1.
    L2 { rate_per_minute: f64 },
    /// Bi-exponential: SOC = 1 + a e^{-bT} - (1+a) e^{-cT}.
    L3 { a: f64, b: f64, c: f64 },
}

impl ChargingCurve {
    pub fn default_l2() -> Self {
        ChargingCurve::L2 {
            rate_per_minute: L2_RATE_PER_MINUTE,
        }
    }

    pub fn default_l3() -> Self {
        ChargingCurve::L3 {
            a: L3_A,
            b: L3_B,
            c: L3_C,
        }
    }
}

/// Curve coefficients and charge targets, overridable per scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub l3: L3Coefficients,
    pub l2_rate_per_minute: f64,
    /// Fast charging stops here; keeps the session off the L3 asymptote.
    pub target_soc_l3: f64,
    pub target_soc_l2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct L3Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            l3: L3Coefficients {
                a: L3_A,
                b: L3_B,
                c: L3_C,
            },
            l2_rate_per_minute: L2_RATE_PER_MINUTE,
            target_soc_l3: 0.9,
            target_soc_l2: 1.0,
        }
    }
}

impl CurveConfig {
    pub fn curve_for(&self, level: Level) -> ChargingCurve {
        match level {
            Level::L2 => ChargingCurve::L2 {
                rate_per_minute: self.l2_rate_per_minute,
            },
            Level::L3 => ChargingCurve::L3 {
                a: self.l3.a,
                b: self.l3.b,
                c: self.l3.c,
            },
        }
    }

    pub fn target_soc(&self, level: Level) -> f64 {
        match level {
            Level::L2 => self.target_soc_l2,
            Level::L3 => self.target_soc_l3,
        }
    }

    /// Checks coefficient sanity: positive rates, and an L3 curve that is
    /// strictly increasing with f(0)=0 and limit 1 (requires b > c and
    /// (1+a)c > ab).
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l2_rate_per_minute > 0.0) {
            return Err("l2_rate_per_minute must be > 0".into());
        }
        let L3Coefficients { a, b, c } = self.l3;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err("l3 coefficients must be > 0".into());
        }
        if !(b > c) {
            return Err(format!("l3 requires b > c for saturation from below (b={b}, c={c})"));
        }
        if !((1.0 + a) * c > a * b) {
            return Err("l3 requires (1+a)c > ab for monotonicity".into());
        }
        if !(self.target_soc_l3 > 0.0 && self.target_soc_l3 < 1.0) {
            return Err("target_soc_l3 must lie in (0, 1)".into());
        }
        if !(self.target_soc_l2 > 0.0 && self.target_soc_l2 <= 1.0) {
            return Err("target_soc_l2 must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// One planned charging visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeSession {
    /// Curve time corresponding to the arrival SOC, minutes.
    pub initial_charge_time: f64,
    /// Plug-in duration, minutes.
    pub duration: f64,
    /// Energy drawn, kWh.
    pub energy: f64,
    pub target_soc: f64,
}

impl ChargeSession {
    /// Plans a session from arrival SOC to the target on the given curve.
    pub fn plan(
        curve: ChargingCurve,
        initial_soc: f64,
        target_soc: f64,
        battery_capacity: f64,
    ) -> Result<Self, ChargingError> {
        let initial_charge_time = time_from_soc(curve, initial_soc)?;
        let duration = charging_duration(curve, initial_soc, target_soc)?;
        Ok(ChargeSession {
            initial_charge_time,
            duration,
            energy: (target_soc - initial_soc) * battery_capacity,
            target_soc,
        })
    }
}

/// Distance to saturation, `1 - f(T)`. Evaluating the bi-exponential in
/// this residual form keeps full relative precision near saturation,
/// where the direct form loses everything below one ULP of 1.
fn l3_residual(a: f64, b: f64, c: f64, minutes: f64) -> f64 {
    (1.0 + a) * (-c * minutes).exp() - a * (-b * minutes).exp()
}

/// SOC reached after charging from empty for `minutes`.
pub fn soc_from_time(curve: ChargingCurve, minutes: f64) -> f64 {
    debug_assert!(minutes >= 0.0);
    match curve {
        ChargingCurve::L2 { rate_per_minute } => (rate_per_minute * minutes).min(1.0),
        ChargingCurve::L3 { a, b, c } => 1.0 - l3_residual(a, b, c, minutes),
    }
}

/// Minutes needed to charge from empty to `soc`.
///
/// The L3 inverse is found by bisection; the result satisfies
/// `soc_from_time(curve, t) == soc` to 1e-9 absolute.
pub fn time_from_soc(curve: ChargingCurve, soc: f64) -> Result<f64, ChargingError> {
    if soc < 0.0 {
        return Err(ChargingError::InvalidSoc {
            soc,
            reason: "must be >= 0",
        });
    }
    match curve {
        ChargingCurve::L2 { rate_per_minute } => {
            if soc > 1.0 {
                return Err(ChargingError::UnreachableTarget { target: soc });
            }
            Ok(soc / rate_per_minute)
        }
        ChargingCurve::L3 { a, b, c } => {
            if soc >= 1.0 {
                return Err(ChargingError::UnreachableTarget { target: soc });
            }
            if soc == 0.0 {
                return Ok(0.0);
            }
            // Bisect on the strictly decreasing residual; comparing
            // residuals instead of SOCs avoids the flat plateau of the
            // direct form near saturation.
            let z = 1.0 - soc;
            let (mut lo, mut hi) = (0.0_f64, L3_INVERSE_BRACKET_MAX);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if l3_residual(a, b, c, mid) > z {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 * hi.max(1.0) {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

/// Plug-in minutes to move from `initial_soc` to `target_soc`.
pub fn charging_duration(
    curve: ChargingCurve,
    initial_soc: f64,
    target_soc: f64,
) -> Result<f64, ChargingError> {
    if target_soc < initial_soc {
        return Err(ChargingError::TargetBelowInitial {
            initial: initial_soc,
            target: target_soc,
        });
    }
    let t_target = time_from_soc(curve, target_soc)?;
    let t_initial = time_from_soc(curve, initial_soc)?;
    Ok((t_target - t_initial).max(0.0))
}

/// Energy drawn over a session, kWh: battery capacity times the SOC lift.
pub fn energy_demand(
    ev: &EvAgent,
    curve: ChargingCurve,
    target_soc: f64,
) -> Result<f64, ChargingError> {
    if target_soc < ev.initial_soc {
        return Err(ChargingError::TargetBelowInitial {
            initial: ev.initial_soc,
            target: target_soc,
        });
    }
    match curve {
        ChargingCurve::L2 { .. } if target_soc > 1.0 => {
            return Err(ChargingError::UnreachableTarget { target: target_soc })
        }
        ChargingCurve::L3 { .. } if target_soc >= 1.0 => {
            return Err(ChargingError::UnreachableTarget { target: target_soc })
        }
        _ => {}
    }
    Ok((target_soc - ev.initial_soc) * ev.battery_capacity)
}

/// Travel-time budget from the current SOC: range in km (SOC x capacity x
/// km-per-kWh) divided by the travel speed.
pub fn max_range_hours(ev: &EvAgent, speed_kmh: f64) -> f64 {
    debug_assert!(speed_kmh > 0.0);
    ev.initial_soc * ev.battery_capacity * ev.consumption_rate / speed_kmh
}

/// Range budget shrunk for risk aversion and battery age:
/// `max_range x (1 - alpha_risk) x exp(-beta x age)`.
pub fn adjusted_range_hours(ev: &EvAgent, speed_kmh: f64) -> f64 {
    max_range_hours(ev, speed_kmh)
        * (1.0 - ev.risk_aversion)
        * (-ev.degradation_rate * ev.age_years).exp()
}

/// Reachable station set: stations whose travel time fits within the
/// adjusted range budget. May be empty.
pub fn eca(ev: &EvAgent, scenario: &Scenario, hour: usize) -> Vec<usize> {
    let budget = adjusted_range_hours(ev, scenario.travel.reference_speed_kmh());
    scenario
        .stations
        .iter()
        .enumerate()
        .filter(|(_, st)| match travel_time(&scenario.travel, ev, st, hour) {
            Ok(t) => t <= budget,
            Err(_) => false,
        })
        .map(|(idx, _)| idx)
        .collect()
}
