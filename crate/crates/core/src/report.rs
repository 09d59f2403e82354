//! File emitters shared with the CLI: hourly/trace/comparison CSVs,
//! totals and price JSON, and a dependency-free SVG convergence chart.
//!
//! CSVs are comma-separated with a header row, floats printed with six
//! decimals, UTF-8, LF line endings. Emitted totals are sums of the
//! rounded hourly values so that re-parsing the CSV reproduces them.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::economics::PriceSchedule;
use crate::optimizer::TraceRow;
use crate::scenario::Scenario;
use crate::sim::RunReport;

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn round6(x: f64) -> f64 {
    fmt6(x).parse().expect("formatted float reparses")
}

/// Renders the hourly table.
pub fn hourly_csv(scenario: &Scenario, report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("hour");
    for key in ["price", "lambda", "wait", "rejected"] {
        for st in &scenario.stations {
            let _ = write!(out, ",{key}_{}", st.id);
        }
    }
    out.push_str(",queue_penalty,ev_utility,cs_revenue,performance_index,unserved\n");
    for row in &report.hourly {
        let _ = write!(out, "{}", row.hour);
        for vals in [&row.prices, &row.lambda, &row.waits, &row.rejected] {
            for v in vals.iter() {
                let _ = write!(out, ",{}", fmt6(*v));
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            fmt6(row.queue_penalty),
            fmt6(row.ev_utility),
            fmt6(row.cs_revenue),
            fmt6(row.performance_index),
            row.unserved
        );
    }
    out
}

/// Renders totals JSON. Scalar totals are sums of the six-decimal
/// roundings used in the hourly CSV.
pub fn totals_json(report: &RunReport, non_converged_windows: &[usize]) -> String {
    let sum6 = |f: &dyn Fn(&crate::sim::HourRow) -> f64| -> f64 {
        round6(report.hourly.iter().map(|r| round6(f(r))).sum())
    };
    let body = serde_json::json!({
        "seed": report.seed,
        "mode": report.mode,
        "strategy": report.strategy,
        "ev_utility": sum6(&|r| r.ev_utility),
        "cs_revenue": sum6(&|r| r.cs_revenue),
        "queue_penalty": sum6(&|r| r.queue_penalty),
        "performance_index": sum6(&|r| r.performance_index),
        "rejected": sum6(&|r| r.rejected.iter().sum()),
        "unserved": report.totals.unserved,
        "sampled_arrivals": report.sampled_arrivals,
        "non_converged_hours": report.non_converged_hours,
        "non_converged_windows": non_converged_windows,
    });
    let mut text = serde_json::to_string_pretty(&body).expect("totals serialize");
    text.push('\n');
    text
}

/// Renders the optimization trace.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out =
        String::from("window,iteration,best,mean,elite_min,elite_max,mean_sigma,active_count\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.window,
            r.iteration,
            fmt6(r.best),
            fmt6(r.mean),
            fmt6(r.elite_min),
            fmt6(r.elite_max),
            fmt6(r.mean_sigma),
            r.active_count
        );
    }
    out
}

/// Renders the optimized schedule as JSON.
pub fn prices_json(schedule: &PriceSchedule) -> String {
    let mut text = serde_json::to_string_pretty(schedule).expect("schedule serialize");
    text.push('\n');
    text
}

/// One row of the strategy comparison table.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub strategy: String,
    pub ev_utility: f64,
    pub cs_revenue: f64,
    pub queue_penalty: f64,
    pub performance_index: f64,
}

impl CompareRow {
    pub fn from_report(report: &RunReport) -> Self {
        CompareRow {
            strategy: report.strategy.clone(),
            ev_utility: report.totals.ev_utility,
            cs_revenue: report.totals.cs_revenue,
            queue_penalty: report.totals.queue_penalty,
            performance_index: report.totals.performance_index,
        }
    }
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "strategy,total_ev_utility,total_cs_revenue,total_queue_penalty,total_pi\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.strategy,
            fmt6(r.ev_utility),
            fmt6(r.cs_revenue),
            fmt6(r.queue_penalty),
            fmt6(r.performance_index)
        );
    }
    out
}

/// One row of the omega sweep table.
#[derive(Debug, Clone)]
pub struct OmegaRow {
    pub omega: f64,
    pub avg_price: f64,
    pub cs_revenue: f64,
    pub ev_utility: f64,
    pub performance_index: f64,
}

pub fn omega_sweep_csv(rows: &[OmegaRow]) -> String {
    let mut out = String::from("omega,avg_price,cs_revenue,ev_utility,performance_index\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt6(r.omega),
            fmt6(r.avg_price),
            fmt6(r.cs_revenue),
            fmt6(r.ev_utility),
            fmt6(r.performance_index)
        );
    }
    out
}

/// Minimal SVG line chart of per-window best scores.
pub fn convergence_svg(series: &[(usize, f64)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 360.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle">best objective per window</text>"#,
        W / 2.0
    );

    if !series.is_empty() {
        let ys: Vec<f64> = series.iter().map(|&(_, y)| y).collect();
        let (mut ymin, mut ymax) = ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            });
        if (ymax - ymin).abs() < 1e-12 {
            ymin -= 1.0;
            ymax += 1.0;
        }
        let xmax = series.iter().map(|&(x, _)| x).max().unwrap_or(0).max(1) as f64;
        let px = |x: f64| ML + (W - ML - MR) * x / xmax;
        let py = |y: f64| H - MB - (H - MT - MB) * (y - ymin) / (ymax - ymin);

        // axes
        let _ = writeln!(
            svg,
            r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#,
            H - MB
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            H - MB,
            W - MR,
            H - MB
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            ML - 6.0,
            py(ymax) + 4.0,
            fmt6(ymax)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            ML - 6.0,
            py(ymin) + 4.0,
            fmt6(ymin)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">window</text>"#,
            (ML + W - MR) / 2.0,
            H - 12.0
        );

        let points: Vec<String> = series
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x as f64), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Parses a CSV produced by this module back into a header and numeric
/// rows (non-numeric cells become NaN).
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .map(|l| l.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|cell| cell.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn write_file(path: &Path, content: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)
}
