//! Command implementations and output-file assembly.

use std::path::Path;
use std::time::Instant;

use evpricer_core::choice::{ChoiceConfig, ChoiceMode};
use evpricer_core::economics::{fixed_schedule, tou_schedule, PriceSchedule};
use evpricer_core::optimizer::{omega_sweep, rolling_horizon, CemConfig};
use evpricer_core::report;
use evpricer_core::scenario::{load_scenario, Scenario};
use evpricer_core::sim::{simulate_schedule, RunReport};

use crate::{CemArgs, ChoiceArg, CliError, Command, CommonArgs, PricingArg};

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            common,
            pricing,
            price_level,
            peak_price,
            offpeak_price,
            peak_hours,
            prices_file,
            choice,
        } => cmd_run(
            common,
            pricing,
            price_level,
            peak_price,
            offpeak_price,
            &peak_hours,
            prices_file.as_deref(),
            choice,
        ),
        Command::Optimize {
            common,
            cem,
            choice,
        } => cmd_optimize(common, cem, choice),
        Command::Compare {
            common,
            cem,
            price_level,
            peak_price,
            offpeak_price,
            peak_hours,
        } => cmd_compare(common, cem, price_level, peak_price, offpeak_price, &peak_hours),
        Command::OmegaSweep {
            common,
            cem,
            omegas,
        } => cmd_omega_sweep(common, cem, &omegas),
    }
}

fn load(common: &CommonArgs) -> Result<(Scenario, u64), CliError> {
    let scenario =
        load_scenario(&common.scenario).map_err(|e| CliError::Validation(e.to_string()))?;
    let seed = common.seed.unwrap_or(scenario.seed);
    if let Some(n) = common.threads {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok((scenario, seed))
}

fn choice_config(scenario: &Scenario, flag: Option<ChoiceArg>) -> ChoiceConfig {
    let mut config = scenario.choice;
    if let Some(mode) = flag {
        config.mode = ChoiceMode::from(mode);
    }
    config
}

fn cem_config(scenario: &Scenario, args: &CemArgs) -> Result<CemConfig, CliError> {
    let mut cem = scenario.cem;
    if let Some(v) = args.population {
        cem.population = v;
    }
    if let Some(v) = args.elite_ratio {
        cem.elite_ratio = v;
    }
    if let Some(v) = args.smoothing {
        cem.smoothing = v;
    }
    if let Some(v) = args.tolerance {
        cem.tolerance = v;
    }
    if let Some(v) = args.max_iters {
        cem.max_iters = v;
    }
    if let Some(v) = args.psa_threshold {
        cem.psa_threshold = v;
    }
    if let Some(v) = args.psa_frequency {
        cem.psa_frequency = v;
    }
    if args.psa_exact {
        cem.psa_exact = true;
    }
    if let Some(v) = args.window_hours {
        cem.window_hours = v;
    }
    if args.warm_start {
        cem.warm_start = true;
    }
    cem.validate()
        .map_err(|(field, msg)| CliError::Usage(format!("cem.{field}: {msg}")))?;
    Ok(cem)
}

fn parse_peak_hours(text: &str, horizon: usize) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    let mut hours = Vec::new();
    if let Some((a, b)) = text.split_once('-') {
        let lo: usize = a
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad peak-hours range `{text}`")))?;
        let hi: usize = b
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad peak-hours range `{text}`")))?;
        if lo > hi {
            return Err(CliError::Usage(format!("empty peak-hours range `{text}`")));
        }
        hours.extend(lo..=hi);
    } else if !text.is_empty() {
        for part in text.split(',') {
            let h: usize = part
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad peak hour `{part}`")))?;
            hours.push(h);
        }
    }
    if hours.iter().any(|&h| h >= horizon) {
        return Err(CliError::Usage(format!(
            "peak hour outside horizon 0..{horizon}"
        )));
    }
    Ok(hours)
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    report::write_file(path, content)
        .map_err(|e| CliError::Validation(format!("writing {}: {e}", path.display())))
}

fn write_run_outputs(
    scenario: &Scenario,
    report_data: &RunReport,
    out: &Path,
    non_converged_windows: &[usize],
) -> Result<(), CliError> {
    write(
        &out.join("hourly.csv"),
        &report::hourly_csv(scenario, report_data),
    )?;
    write(
        &out.join("totals.json"),
        &report::totals_json(report_data, non_converged_windows),
    )?;
    Ok(())
}

fn print_summary(report_data: &RunReport, elapsed: f64) {
    println!(
        "strategy={} mode={} seed={}",
        report_data.strategy, report_data.mode, report_data.seed
    );
    println!(
        "  performance_index={:.3} ev_utility={:.3} cs_revenue={:.3} queue_penalty={:.3} rejected={:.3} unserved={}",
        report_data.totals.performance_index,
        report_data.totals.ev_utility,
        report_data.totals.cs_revenue,
        report_data.totals.queue_penalty,
        report_data.totals.rejected,
        report_data.totals.unserved
    );
    println!("  wall_time={elapsed:.2}s");
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    common: CommonArgs,
    pricing: PricingArg,
    price_level: f64,
    peak_price: f64,
    offpeak_price: f64,
    peak_hours: &str,
    prices_file: Option<&Path>,
    choice: Option<ChoiceArg>,
) -> Result<(), CliError> {
    let (scenario, seed) = load(&common)?;
    let config = choice_config(&scenario, choice);
    let (schedule, label) = match pricing {
        PricingArg::Fixed => (
            fixed_schedule(&scenario, price_level)
                .map_err(|e| CliError::Validation(e.to_string()))?,
            "fixed",
        ),
        PricingArg::Tou => {
            let hours = parse_peak_hours(peak_hours, scenario.horizon_hours)?;
            (
                tou_schedule(&scenario, &hours, peak_price, offpeak_price)
                    .map_err(|e| CliError::Validation(e.to_string()))?,
                "tou",
            )
        }
        PricingArg::DynamicFile => {
            let path = prices_file.ok_or_else(|| {
                CliError::Usage("--pricing dynamic-file requires --prices-file".into())
            })?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
            let schedule: PriceSchedule = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("parsing {}: {e}", path.display())))?;
            if schedule.prices.len() != scenario.stations.len()
                || schedule
                    .prices
                    .iter()
                    .any(|row| row.len() != scenario.horizon_hours)
            {
                return Err(CliError::Validation(format!(
                    "schedule shape mismatch: need {} stations x {} hours",
                    scenario.stations.len(),
                    scenario.horizon_hours
                )));
            }
            schedule
                .validate_bounds(&scenario)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            (schedule, "dynamic-file")
        }
    };

    let t0 = Instant::now();
    let report_data = simulate_schedule(&scenario, &schedule, &config, seed, label)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_run_outputs(&scenario, &report_data, &common.out, &[])?;
    print_summary(&report_data, t0.elapsed().as_secs_f64());
    if common.strict && !report_data.non_converged_hours.is_empty() {
        return Err(CliError::NonConverged(format!(
            "MSA did not converge in hours {:?}",
            report_data.non_converged_hours
        )));
    }
    Ok(())
}

fn cmd_optimize(
    common: CommonArgs,
    cem_args: CemArgs,
    choice: Option<ChoiceArg>,
) -> Result<(), CliError> {
    let (scenario, seed) = load(&common)?;
    let config = choice_config(&scenario, choice);
    let cem = cem_config(&scenario, &cem_args)?;

    let t0 = Instant::now();
    let outcome = rolling_horizon(&scenario, &cem, &config, seed);
    let elapsed = t0.elapsed().as_secs_f64();

    write(
        &common.out.join("prices.json"),
        &report::prices_json(&outcome.schedule),
    )?;
    write(&common.out.join("trace.csv"), &report::trace_csv(&outcome.trace))?;
    let series: Vec<(usize, f64)> = outcome
        .windows
        .iter()
        .map(|w| (w.result.window, w.result.best_score))
        .collect();
    write(
        &common.out.join("report.svg"),
        &report::convergence_svg(&series),
    )?;
    write(
        &common.out.join("totals.json"),
        &report::totals_json(&outcome.report, &outcome.non_converged_windows),
    )?;

    print_summary(&outcome.report, elapsed);
    if !outcome.non_converged_windows.is_empty() {
        println!(
            "  non-converged windows: {:?}",
            outcome.non_converged_windows
        );
    }
    if common.strict && !outcome.non_converged_windows.is_empty() {
        return Err(CliError::NonConverged(format!(
            "windows {:?} hit max_iters",
            outcome.non_converged_windows
        )));
    }
    Ok(())
}

fn cmd_compare(
    common: CommonArgs,
    cem_args: CemArgs,
    price_level: f64,
    peak_price: f64,
    offpeak_price: f64,
    peak_hours: &str,
) -> Result<(), CliError> {
    let (scenario, seed) = load(&common)?;
    // The comparison always runs the equilibrium follower model.
    let mut config = scenario.choice;
    config.mode = ChoiceMode::MnlMsa;
    let cem = cem_config(&scenario, &cem_args)?;
    let hours = parse_peak_hours(peak_hours, scenario.horizon_hours)?;

    let t0 = Instant::now();
    let fixed = simulate_schedule(
        &scenario,
        &fixed_schedule(&scenario, price_level).map_err(|e| CliError::Validation(e.to_string()))?,
        &config,
        seed,
        "fixed",
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let tou = simulate_schedule(
        &scenario,
        &tou_schedule(&scenario, &hours, peak_price, offpeak_price)
            .map_err(|e| CliError::Validation(e.to_string()))?,
        &config,
        seed,
        "tou",
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let dynamic = rolling_horizon(&scenario, &cem, &config, seed);

    let rows = vec![
        report::CompareRow::from_report(&fixed),
        report::CompareRow::from_report(&tou),
        report::CompareRow::from_report(&dynamic.report),
    ];
    write(&common.out.join("compare.csv"), &report::compare_csv(&rows))?;

    for row in &rows {
        println!(
            "{:>8}: PI={:.3} ev_utility={:.3} cs_revenue={:.3} queue_penalty={:.3}",
            row.strategy, row.performance_index, row.ev_utility, row.cs_revenue, row.queue_penalty
        );
    }
    println!("  wall_time={:.2}s", t0.elapsed().as_secs_f64());
    if common.strict && !dynamic.non_converged_windows.is_empty() {
        return Err(CliError::NonConverged(format!(
            "windows {:?} hit max_iters",
            dynamic.non_converged_windows
        )));
    }
    Ok(())
}

fn cmd_omega_sweep(common: CommonArgs, cem_args: CemArgs, omegas: &str) -> Result<(), CliError> {
    let (scenario, seed) = load(&common)?;
    let cem = cem_config(&scenario, &cem_args)?;
    let weights: Vec<f64> = omegas
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad omega `{w}`")))
        })
        .collect::<Result<_, _>>()?;
    if weights.is_empty() || weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(CliError::Usage("omegas must lie in [0, 1]".into()));
    }
    let t0 = Instant::now();
    let outcome = omega_sweep(&scenario, &cem, &scenario.choice, seed, &weights);
    for c in &outcome.candidates {
        let label = c
            .source_omega
            .map(|w| format!("omega={w:.2}"))
            .unwrap_or_else(|| "anchor".to_string());
        println!(
            "{label}: avg_price={:.4} cs_revenue={:.3} ev_utility={:.3}",
            c.avg_price, c.cs_revenue, c.ev_utility
        );
    }
    write(
        &common.out.join("omega_sweep.csv"),
        &report::omega_sweep_csv(&outcome.rows),
    )?;
    println!("  wall_time={:.2}s", t0.elapsed().as_secs_f64());
    if common.strict && !outcome.non_converged.is_empty() {
        return Err(CliError::NonConverged(format!(
            "non-converged windows for omega in {:?}",
            outcome.non_converged
        )));
    }
    Ok(())
}
