//! Simulation and bi-level optimization of dynamic EV-charging prices.
//!
//! A leader (the pricing authority) sets hourly station prices; follower EVs
//! respond through a stochastic multinomial-logit choice equilibrium with
//! M/M/s/c queuing congestion. The leader's search runs a cross-entropy
//! method guided by relative-entropy sensitivity analysis, one rolling
//! window at a time.
//!
//! Module map:
//! - [`scenario`]: immutable world model (stations, EV population, demand,
//!   travel times) plus the JSON loader.
//! - [`charging`]: charging curves, SOC/time conversions, reachability.
//! - [`queueing`]: exact M/M/s/c stationary analysis per station.
//! - [`choice`]: attraction, MNL probabilities, MSA fixed point.
//! - [`economics`]: EV utility, operator revenue, performance index,
//!   benchmark price schedules.
//! - [`optimizer`]: PSA-guided CEM and the rolling-horizon driver.
//! - [`sim`]: hour-by-hour simulation of a fixed price schedule.
//! - [`report`]: CSV/JSON/SVG emitters shared with the CLI.

pub mod charging;
pub mod choice;
pub mod economics;
pub mod optimizer;
pub mod queueing;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use scenario::{load_scenario, Scenario, ScenarioError};
