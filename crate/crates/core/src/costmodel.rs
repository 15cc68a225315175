//! Daily cost of anchoring super blocks on a private (hourly-billed) chain
//! versus a public (gas-priced) chain.
//!
//! Private: each hour in which a submission happens is billed at the full
//! rate, idle hours at the reduced rate, and from 24 submissions a day every
//! hour is full.
//!
//! Public: submissions are spread evenly over the day starting at 23:50 UTC,
//! each snapped to the 5-minute sampling grid. The cost sums the
//! minute-of-day average gas price at each submission minute, times gas units
//! per submission, times the gwei to USD rate.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::anchor::GAS_UNITS_PER_SB;

pub const MINUTES_PER_DAY: u32 = 1440;
/// Daily low of public gas prices.
pub const ANCHOR_MINUTE: u32 = 23 * 60 + 50;
pub const GRID_MINUTES: u32 = 5;
/// Grid points per day, and the largest supported submission count.
pub const MAX_SUBMISSIONS: u32 = MINUTES_PER_DAY / GRID_MINUTES;
/// Largest tolerated distance from a submission minute to observed data.
pub const MAX_MINUTE_GAP: u32 = 10;

/// Synthetic two-day, four-scenario gas series with a daily low at 23:50 UTC,
/// calibrated so one to three daily submissions cost what was observed.
pub const CALIBRATED_SERIES_CSV: &str = include_str!("../fixtures/gas_series.csv");

pub fn calibrated_series() -> GasPriceSeries {
    GasPriceSeries::from_csv(CALIBRATED_SERIES_CSV.as_bytes()).expect("bundled series is valid")
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CostError {
    #[error("submission count must be in 1..={MAX_SUBMISSIONS}, got {0}")]
    InvalidCount(u32),
    #[error("no {scenario} gas quote within {MAX_MINUTE_GAP} minutes of {minute:04}")]
    MissingMinute { scenario: Scenario, minute: u32 },
    #[error("gas price series: {0}")]
    InvalidSeries(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Slow,
    Average,
    Fast,
    Fastest,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Slow, Scenario::Average, Scenario::Fast, Scenario::Fastest];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Slow => "slow",
            Scenario::Average => "average",
            Scenario::Fast => "fast",
            Scenario::Fastest => "fastest",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = CostError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CostError::InvalidSeries(format!("unknown scenario {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasQuote {
    pub timestamp: DateTime<Utc>,
    pub scenario: Scenario,
    pub gwei: f64,
}

/// Timestamped gas quotes for any subset of scenarios.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GasPriceSeries {
    quotes: Vec<GasQuote>,
}

#[derive(Deserialize)]
struct CsvRow {
    timestamp: String,
    scenario: String,
    gwei: f64,
}

impl GasPriceSeries {
    pub fn new(quotes: Vec<GasQuote>) -> Result<Self, CostError> {
        for w in quotes.windows(2) {
            if w[1].timestamp < w[0].timestamp {
                return Err(CostError::InvalidSeries(format!("timestamps decrease at {}", w[1].timestamp)));
            }
        }
        if let Some(q) = quotes.iter().find(|q| !q.gwei.is_finite() || q.gwei <= 0.0) {
            return Err(CostError::InvalidSeries(format!("non-positive price {} at {}", q.gwei, q.timestamp)));
        }
        Ok(Self { quotes })
    }

    /// Parses `timestamp,scenario,gwei` CSV with a header row.
    pub fn from_csv(reader: impl Read) -> Result<Self, CostError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut quotes = Vec::new();
        for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| CostError::InvalidSeries(e.to_string()))?;
            let timestamp = DateTime::parse_from_rfc3339(&row.timestamp)
                .map_err(|e| CostError::InvalidSeries(format!("row {}: {e}", line + 1)))?
                .with_timezone(&Utc);
            quotes.push(GasQuote { timestamp, scenario: row.scenario.parse()?, gwei: row.gwei });
        }
        Self::new(quotes)
    }

    /// Same price for every 5-minute slot of one day.
    pub fn constant(scenario: Scenario, gwei: f64) -> Self {
        let day = DateTime::UNIX_EPOCH;
        let quotes = (0..MAX_SUBMISSIONS)
            .map(|slot| GasQuote {
                timestamp: day + chrono::Duration::minutes((slot * GRID_MINUTES) as i64),
                scenario,
                gwei,
            })
            .collect();
        Self { quotes }
    }

    pub fn quotes(&self) -> &[GasQuote] {
        &self.quotes
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut s: Vec<_> = self.quotes.iter().map(|q| q.scenario).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Mean price per minute of day for one scenario.
    pub fn minute_averages(&self, scenario: Scenario) -> BTreeMap<u32, f64> {
        let mut acc: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        for q in self.quotes.iter().filter(|q| q.scenario == scenario) {
            let minute = q.timestamp.hour() * 60 + q.timestamp.minute();
            let e = acc.entry(minute).or_default();
            e.0 += q.gwei;
            e.1 += 1;
        }
        acc.into_iter().map(|(m, (sum, n))| (m, sum / n as f64)).collect()
    }
}

/// Hourly rates in USD. `full_hourly` and `reduced_hourly` already include
/// the IP address share.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub full_hourly: f64,
    pub reduced_hourly: f64,
    pub ip_monthly: f64,
    pub gas_units_per_sb: u64,
    pub gwei_to_usd: f64,
}

impl CostParams {
    /// Builds rates from base hourly prices plus a monthly IP charge over 30 days.
    pub fn from_base(full_base: f64, reduced_base: f64, ip_monthly: f64) -> Self {
        let ip_hourly = ip_monthly / 30.0 / 24.0;
        Self {
            full_hourly: full_base + ip_hourly,
            reduced_hourly: reduced_base + ip_hourly,
            ip_monthly,
            gas_units_per_sb: GAS_UNITS_PER_SB,
            gwei_to_usd: 3.02e-7,
        }
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self::from_base(1.19, 0.41, 16.00)
    }
}

fn check_count(s: u32) -> Result<(), CostError> {
    if (1..=MAX_SUBMISSIONS).contains(&s) {
        Ok(())
    } else {
        Err(CostError::InvalidCount(s))
    }
}

/// Daily USD cost of the hourly-billed private chain for `s` submissions.
pub fn private_daily_cost(s: u32, params: &CostParams) -> Result<f64, CostError> {
    if s < 1 {
        return Err(CostError::InvalidCount(s));
    }
    let (f, r) = (params.full_hourly, params.reduced_hourly);
    Ok(if s < 24 { s as f64 * f + (24 - s) as f64 * r } else { 24.0 * f })
}

/// Minutes of day for `s` evenly spaced submissions starting at 23:50 UTC,
/// in submission order.
pub fn equidistribute(s: u32) -> Result<Vec<u32>, CostError> {
    equidistribute_from(s, ANCHOR_MINUTE)
}

pub fn equidistribute_from(s: u32, anchor_minute: u32) -> Result<Vec<u32>, CostError> {
    check_count(s)?;
    let spacing = MINUTES_PER_DAY as f64 / s as f64;
    Ok((0..s)
        .map(|k| {
            let t = anchor_minute as f64 + k as f64 * spacing;
            let snapped = (t / GRID_MINUTES as f64).round() as u32 * GRID_MINUTES;
            snapped % MINUTES_PER_DAY
        })
        .collect())
}

fn circular_distance(a: u32, b: u32) -> u32 {
    let d = a.abs_diff(b) % MINUTES_PER_DAY;
    d.min(MINUTES_PER_DAY - d)
}

fn closest(averages: &BTreeMap<u32, f64>, minute: u32) -> Option<(u32, f64)> {
    averages
        .iter()
        .map(|(&m, &p)| (circular_distance(m, minute), m, p))
        .min_by_key(|&(d, m, _)| (d, m))
        .map(|(_, m, p)| (m, p))
}

/// Daily USD cost of `s` public-chain submissions under `scenario` prices.
pub fn public_daily_cost(
    s: u32,
    scenario: Scenario,
    series: &GasPriceSeries,
    params: &CostParams,
) -> Result<f64, CostError> {
    let minutes = equidistribute(s)?;
    let averages = series.minute_averages(scenario);
    let mut z = 0.0;
    for minute in minutes {
        match closest(&averages, minute) {
            Some((m, price)) if circular_distance(m, minute) <= MAX_MINUTE_GAP => z += price,
            _ => return Err(CostError::MissingMinute { scenario, minute }),
        }
    }
    Ok(z * params.gas_units_per_sb as f64 * params.gwei_to_usd)
}

/// Smallest submission count at which the private chain is strictly cheaper.
/// `None` if the public chain stays cheaper up to one submission per 5 minutes.
pub fn breakeven(scenario: Scenario, series: &GasPriceSeries, params: &CostParams) -> Result<Option<u32>, CostError> {
    for s in 1..=MAX_SUBMISSIONS {
        if private_daily_cost(s, params)? < public_daily_cost(s, scenario, series, params)? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub scenario: String,
    pub s: u32,
    pub daily_usd: f64,
}

/// One row of the cost curve: private cost plus public cost per scenario
/// present in the series.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub s: u32,
    pub private: f64,
    pub public: BTreeMap<Scenario, f64>,
}

pub fn cost_curve(series: &GasPriceSeries, params: &CostParams) -> Result<Vec<CurveRow>, CostError> {
    let scenarios = series.scenarios();
    (1..=MAX_SUBMISSIONS)
        .map(|s| {
            let public = scenarios
                .iter()
                .map(|&sc| public_daily_cost(s, sc, series, params).map(|c| (sc, c)))
                .collect::<Result<_, _>>()?;
            Ok(CurveRow { s, private: private_daily_cost(s, params)?, public })
        })
        .collect()
}

/// Writes `s,private,<scenario>...` CSV.
pub fn write_curve_csv(rows: &[CurveRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let scenarios: Vec<Scenario> = rows.first().map(|r| r.public.keys().copied().collect()).unwrap_or_default();
    let mut header = vec!["s".to_string(), "private".to_string()];
    header.extend(scenarios.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.s.to_string(), format!("{:.4}", r.private)];
        rec.extend(scenarios.iter().map(|s| format!("{:.4}", r.public[s])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
