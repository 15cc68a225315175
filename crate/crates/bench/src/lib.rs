//! Load generator for a logchain service and the timing statistics derived
//! from its runs.

pub mod driver;
pub mod scenario;
pub mod stats;

use std::future::Future;
use std::io::Write;

use serde::Serialize;

pub use driver::{run_scenario, BenchError, Client, LocalRunner, RunOptions, RunResult, SubmitOutcome};
pub use scenario::{grid_scenarios, Scenario};
pub use stats::{
    internal_median, internal_median_ratio, ks_critical, ks_statistic, quantile, summarize, KindSummary, SixNumber,
};

/// One line of the grid report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub tps: f64,
    pub n: u32,
    pub gas_tier: Option<u64>,
    pub file_count: u32,
    pub accepted: u32,
    pub rejected: u32,
    pub internal_median: Option<f64>,
    pub sb: Option<SixNumber>,
}

impl GridRow {
    pub fn from_result(r: &RunResult) -> Self {
        let sb: Vec<f64> = r.sb_records().map(|t| t.seconds).collect();
        Self {
            tps: r.scenario.tps,
            n: r.scenario.n,
            gas_tier: r.scenario.gas_tier,
            file_count: r.scenario.file_count,
            accepted: r.accepted,
            rejected: r.scenario.file_count - r.accepted,
            internal_median: internal_median(&r.records),
            sb: SixNumber::of(&sb),
        }
    }
}

/// Runs every scenario through `runner`, in order.
pub async fn grid<F, Fut>(scenarios: &[Scenario], mut runner: F) -> Result<Vec<GridRow>, BenchError>
where
    F: FnMut(Scenario) -> Fut,
    Fut: Future<Output = Result<RunResult, BenchError>>,
{
    let mut rows = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let result = runner(s.clone()).await?;
        tracing::info!(tps = s.tps, n = s.n, gas_tier = ?s.gas_tier, accepted = result.accepted, "scenario done");
        rows.push(GridRow::from_result(&result));
    }
    Ok(rows)
}

pub fn write_grid_csv(rows: &[GridRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tps",
        "n",
        "gas_tier",
        "file_count",
        "accepted",
        "rejected",
        "internal_median",
        "sb_min",
        "sb_q1",
        "sb_median",
        "sb_mean",
        "sb_q3",
        "sb_max",
    ])?;
    let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    for r in rows {
        let sb = r.sb;
        w.write_record([
            r.tps.to_string(),
            r.n.to_string(),
            r.gas_tier.map_or("none".into(), |g| g.to_string()),
            r.file_count.to_string(),
            r.accepted.to_string(),
            r.rejected.to_string(),
            f(r.internal_median),
            f(sb.map(|s| s.min)),
            f(sb.map(|s| s.q1)),
            f(sb.map(|s| s.median)),
            f(sb.map(|s| s.mean)),
            f(sb.map(|s| s.q3)),
            f(sb.map(|s| s.max)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
