//! `logchain` command line: serve the API, verify a ledger directory, drive
//! benchmarks and evaluate the anchoring cost model.
//!
//! Exit codes: 0 success, 1 integrity failure (or any other runtime failure),
//! 2 anchoring gap, 64 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logchain_bench::{
    grid, grid_scenarios, summarize, write_grid_csv, Client, LocalRunner, RunOptions, RunResult, Scenario,
};
use logchain_core::anchor::BackendKind;
use logchain_core::costmodel::{self, CostError, CostParams, CostReport, GasPriceSeries, Scenario as GasScenario};
use logchain_core::node::{self, LedgerAudit};
use logchain_service::{Service, ServiceConfig};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTEGRITY: i32 = 1;
pub const EXIT_ANCHORING: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "logchain", version, about = "Tamper-evident log ledger with anchored super blocks")]
pub struct Cli {
    /// Emit one JSON document on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service in the foreground.
    Serve(ServeArgs),
    /// Verify a ledger directory offline.
    Verify(VerifyArgs),
    /// Drive load against a service and summarize block timings.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Daily anchoring cost on private and public backends.
    #[command(subcommand)]
    Cost(CostCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Public,
    Private,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Public => BackendKind::Public,
            BackendArg::Private => BackendKind::Private,
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML configuration file.
    #[arg(long, env = "LOGCHAIN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Listening address.
    #[arg(long)]
    pub bind: Option<IpAddr>,
    /// Listening port; 0 picks a free one. Overrides LOGCHAIN_PORT.
    #[arg(long)]
    pub port: Option<u16>,
    /// Ledger directory.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Required hex prefix of block hashes, e.g. 000.
    #[arg(long)]
    pub difficulty: Option<String>,
    /// Data blocks per circled chain.
    #[arg(long)]
    pub cb_capacity: Option<u32>,
    /// API key file (TOML, `[[keys]]` entries).
    #[arg(long)]
    pub api_keys: Option<PathBuf>,
    /// Pending submissions before requests get 429.
    #[arg(long)]
    pub queue_depth: Option<usize>,
    /// Anchoring backend.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Simulator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gas price in gwei for public anchoring.
    #[arg(long)]
    pub gas_price: Option<u64>,
    /// Serve verification endpoints only; the store is never written.
    #[arg(long)]
    pub read_only: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Ledger directory.
    pub path: PathBuf,
    /// First block index to check (inclusive).
    #[arg(long)]
    pub from: Option<u64>,
    /// Last block index to check (exclusive).
    #[arg(long)]
    pub to: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Run one scenario.
    Run(BenchRunArgs),
    /// Run every scenario for one backend kind.
    Grid(BenchGridArgs),
}

#[derive(Debug, Args)]
pub struct BenchRunArgs {
    #[arg(long, default_value_t = 1.0)]
    pub tps: f64,
    #[arg(long, default_value_t = 10)]
    pub n: u32,
    /// Gas price in gwei; selects the public backend.
    #[arg(long)]
    pub gas_tier: Option<u64>,
    /// Number of digests; defaults to 200, or 1000 for n > 10.
    #[arg(long)]
    pub files: Option<u32>,
    #[arg(long, default_value = "000")]
    pub difficulty: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target an existing service instead of starting one in-process.
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long, env = "LOGCHAIN_API_KEY")]
    pub api_key: Option<String>,
    #[command(flatten)]
    pub common: BenchCommon,
}

#[derive(Debug, Args)]
pub struct BenchGridArgs {
    #[arg(long, value_enum, default_value = "public")]
    pub backend: BackendArg,
    /// Override the per-scenario digest count.
    #[arg(long)]
    pub files: Option<u32>,
    #[command(flatten)]
    pub common: BenchCommon,
}

#[derive(Debug, Args)]
pub struct BenchCommon {
    /// Directory for CSV output.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub workers: usize,
    /// Real seconds slept per simulated second of anchoring latency.
    #[arg(long, default_value_t = 0.0)]
    pub time_scale: f64,
    /// Seconds to wait for super blocks to be anchored after the last submission.
    #[arg(long, default_value_t = 120)]
    pub anchor_timeout: u64,
}

#[derive(Debug, Subcommand)]
pub enum CostCommand {
    /// Private backend cost for S submissions a day.
    Private {
        #[arg(long)]
        s: u32,
        #[command(flatten)]
        params: CostParamArgs,
    },
    /// Public backend cost for S submissions a day.
    Public {
        #[arg(long)]
        scenario: GasScenario,
        #[arg(long)]
        s: u32,
        #[command(flatten)]
        series: SeriesArg,
        #[command(flatten)]
        params: CostParamArgs,
    },
    /// Smallest S for which the private backend is cheaper.
    Breakeven {
        /// Limit to one scenario; default is every scenario in the series.
        #[arg(long)]
        scenario: Option<GasScenario>,
        #[command(flatten)]
        series: SeriesArg,
        #[command(flatten)]
        params: CostParamArgs,
    },
    /// Cost curve for S = 1..=288 as CSV.
    Curve {
        #[command(flatten)]
        series: SeriesArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: CostParamArgs,
    },
}

#[derive(Debug, Args)]
pub struct SeriesArg {
    /// Gas price CSV (timestamp,scenario,gwei); the bundled calibrated series when absent.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostParamArgs {
    /// Full hourly rate including the IP share.
    #[arg(long)]
    pub full_hourly: Option<f64>,
    /// Reduced hourly rate including the IP share.
    #[arg(long)]
    pub reduced_hourly: Option<f64>,
    #[arg(long)]
    pub gas_units: Option<u64>,
    #[arg(long)]
    pub gwei_usd: Option<f64>,
}

impl CostParamArgs {
    fn params(&self) -> Result<CostParams, Failure> {
        let d = CostParams::default();
        let p = CostParams {
            full_hourly: self.full_hourly.unwrap_or(d.full_hourly),
            reduced_hourly: self.reduced_hourly.unwrap_or(d.reduced_hourly),
            ip_monthly: d.ip_monthly,
            gas_units_per_sb: self.gas_units.unwrap_or(d.gas_units_per_sb),
            gwei_to_usd: self.gwei_usd.unwrap_or(d.gwei_to_usd),
        };
        let positive = [p.full_hourly, p.reduced_hourly, p.gwei_to_usd].iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive || p.gas_units_per_sb == 0 {
            return Err(Failure::Usage("cost parameters must be positive".into()));
        }
        Ok(p)
    }
}

impl SeriesArg {
    fn load(&self) -> Result<GasPriceSeries, Failure> {
        match &self.series {
            None => Ok(costmodel::calibrated_series()),
            Some(path) => {
                let file = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                GasPriceSeries::from_csv(file).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
            }
        }
    }
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Integrity(String),
    Anchoring(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Integrity(_) | Failure::Runtime(_) => EXIT_INTEGRITY,
            Failure::Anchoring(_) => EXIT_ANCHORING,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Integrity(m) | Failure::Anchoring(m) => m.clone(),
            Failure::Runtime(e) => format!("{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn cost_failure(e: CostError) -> Failure {
    match e {
        CostError::InvalidCount(_) | CostError::InvalidSeries(_) | CostError::MissingMinute { .. } => {
            Failure::Usage(e.to_string())
        }
    }
}

/// Where command output goes.
pub struct Output<'a> {
    pub json: bool,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Output<'_> {
    fn emit(&mut self, doc: &Value, text: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
        if self.json {
            writeln!(self.out, "{doc}")
        } else {
            text(self.out)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let mut output = Output { json: cli.json, out, err };
    match execute(cli.command, &mut output) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            if output.json {
                let kind = match f.exit_code() {
                    EXIT_USAGE => "usage_error",
                    EXIT_ANCHORING => "anchoring_gap",
                    _ => "failure",
                };
                // Commands that already printed a report leave the message empty.
                if !f.message().is_empty() {
                    let _ = writeln!(output.out, "{}", json!({ "status": kind, "error": f.message() }));
                }
            } else if !f.message().is_empty() {
                let _ = writeln!(output.err, "logchain: {}", f.message());
            }
            f.exit_code()
        }
    }
}

fn execute(command: Command, out: &mut Output<'_>) -> Result<(), Failure> {
    match command {
        Command::Serve(args) => serve(args, out),
        Command::Verify(args) => verify(args, out),
        Command::Bench(cmd) => bench(cmd, out),
        Command::Cost(cmd) => cost(cmd, out),
    }
}

fn init_tracing(json_logs: bool, default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(io::stderr);
    let _ = if json_logs { builder.json().try_init() } else { builder.try_init() };
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

/// Defaults, then the config file, then LOGCHAIN_PORT, then flags.
pub fn serve_config(args: &ServeArgs) -> Result<ServiceConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ServiceConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env().map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(v) = args.bind {
        cfg.bind = v;
    }
    if let Some(v) = args.port {
        cfg.port = v;
    }
    if let Some(v) = &args.store {
        cfg.store_path = Some(v.clone());
    }
    if let Some(v) = &args.difficulty {
        cfg.difficulty = v.clone();
    }
    if let Some(v) = args.cb_capacity {
        cfg.cb_capacity = v;
        cfg.capacities = None;
    }
    if let Some(v) = &args.api_keys {
        cfg.api_keys_file = Some(v.clone());
    }
    if let Some(v) = args.queue_depth {
        cfg.queue_depth = v;
    }
    if let Some(v) = args.backend {
        cfg.backend.kind = v.into();
    }
    if let Some(v) = args.seed {
        cfg.backend.seed = v;
    }
    if let Some(v) = args.gas_price {
        cfg.backend.gas_price = Some(v);
    }
    if args.read_only {
        cfg.read_only = true;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

async fn shutdown_signal() {
    let ctrl_c = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term =
            tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("signal handler");
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = ctrl_c.await;
    }
}

fn serve(args: ServeArgs, out: &mut Output<'_>) -> Result<(), Failure> {
    let cfg = serve_config(&args)?;
    init_tracing(true, "info");
    let rt = runtime()?;
    rt.block_on(async {
        let service = Service::from_config(&cfg)?;
        let listener = tokio::net::TcpListener::bind(cfg.addr()).await?;
        let addr = listener.local_addr()?;
        let url = format!("http://{addr}");
        out.emit(&json!({ "status": "listening", "url": url }), |w| writeln!(w, "listening on {url}"))?;
        out.out.flush()?;
        tracing::info!(%addr, "service started");
        service.serve(listener, shutdown_signal()).await?;
        tracing::info!("service stopped");
        Ok(())
    })
}

fn audit_json(audit: &LedgerAudit, status: &str) -> Value {
    let failures: Vec<&logchain_core::ledger::BlockCheck> = audit.chain.failures().take(20).collect();
    let bad_chains: Vec<_> = audit.circled.iter().filter(|c| !c.ok()).take(20).collect();
    let bad_supers: Vec<_> = audit.super_chain.checks.iter().filter(|c| !c.ok()).take(20).collect();
    json!({
        "status": status,
        "blocks": audit.blocks,
        "super_blocks": audit.super_blocks,
        "sealed_chains": audit.circled.len(),
        "first_bad_index": audit.first_bad_index(),
        "first_bad_super": audit.first_bad_super(),
        "unanchored": audit.unanchored,
        "torn_tail_offset": audit.torn_tail,
        "block_failures": failures,
        "chain_failures": bad_chains,
        "super_failures": bad_supers,
    })
}

fn write_audit(w: &mut dyn Write, a: &LedgerAudit, status: &str) -> io::Result<()> {
    writeln!(w, "ledger: {} blocks, {} super blocks, {} sealed chains", a.blocks, a.super_blocks, a.circled.len())?;
    match a.chain.first_failure() {
        None => writeln!(w, "blocks: ok ({} checked)", a.chain.checks.len())?,
        Some(c) => writeln!(
            w,
            "blocks: FAILED, first bad index {} (readable={} structure={} binding={} pow={}){}",
            c.index,
            c.readable,
            c.structure_ok,
            c.binding_ok,
            c.pow_ok,
            c.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
        )?,
    }
    match a.circled.iter().find(|c| !c.ok()) {
        None => writeln!(w, "circled chains: ok")?,
        Some(c) => writeln!(
            w,
            "circled chains: FAILED, chain {} (terminal index {}): payload={} aggr={} rederived={} range={} super={}",
            c.ordinal, c.terminal_index, c.payload_ok, c.aggr_ok, c.rederived_ok, c.range_ok, c.super_ok
        )?,
    }
    if a.circled.len() as u64 != a.super_blocks {
        writeln!(w, "super blocks: {} for {} sealed chains", a.super_blocks, a.circled.len())?;
    }
    match a.first_bad_super() {
        None => writeln!(w, "super chain: ok")?,
        Some(k) => writeln!(w, "super chain: FAILED, first bad super block {k}")?,
    }
    if let Some(off) = a.torn_tail {
        writeln!(w, "segment: torn record at byte {off}")?;
    }
    if a.unanchored.is_empty() {
        writeln!(w, "anchoring: all {} super blocks anchored", a.super_blocks)?;
    } else {
        writeln!(w, "anchoring: {} super blocks without receipt: {:?}", a.unanchored.len(), a.unanchored)?;
    }
    writeln!(w, "result: {status}")
}

fn verify(args: VerifyArgs, out: &mut Output<'_>) -> Result<(), Failure> {
    if !args.path.is_dir() {
        return Err(Failure::Usage(format!("{} is not a ledger directory", args.path.display())));
    }
    let range = match (args.from, args.to) {
        (None, None) => None,
        (from, to) => {
            let ledger =
                logchain_core::Ledger::open_read_only(&args.path).map_err(|e| Failure::Integrity(e.to_string()))?;
            Some(from.unwrap_or(0)..to.unwrap_or(ledger.len()))
        }
    };
    let audit = match node::audit_dir(&args.path, range) {
        Ok(a) => a,
        Err(node::NodeError::Ledger(e @ logchain_core::ledger::LedgerError::RangeOutOfBounds { .. })) => {
            return Err(Failure::Usage(e.to_string()))
        }
        Err(e) => return Err(Failure::Integrity(format!("cannot open ledger: {e}"))),
    };
    let status = if !audit.integrity_ok() {
        "integrity_failure"
    } else if !audit.anchoring_ok() {
        "anchoring_gap"
    } else {
        "ok"
    };
    out.emit(&audit_json(&audit, status), |w| write_audit(w, &audit, status))?;
    match status {
        "ok" => Ok(()),
        "anchoring_gap" => Err(Failure::Anchoring(String::new())),
        _ => Err(Failure::Integrity(String::new())),
    }
}

fn write_run_outputs(dir: &Path, result: &RunResult) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    logchain_bench::stats::write_timings_csv(&result.records, BufWriter::new(File::create(dir.join("timings.csv"))?))?;
    let summary = summarize(&result.records);
    logchain_bench::stats::write_summary_csv(&summary, BufWriter::new(File::create(dir.join("summary.csv"))?))?;
    Ok(())
}

fn run_options(c: &BenchCommon) -> RunOptions {
    RunOptions { workers: c.workers, anchor_timeout: Duration::from_secs(c.anchor_timeout), ..RunOptions::default() }
}

fn local_runner(c: &BenchCommon) -> LocalRunner {
    let mut base = ServiceConfig::default();
    base.backend.time_scale = c.time_scale;
    LocalRunner { base, options: run_options(c) }
}

fn bench(cmd: BenchCommand, out: &mut Output<'_>) -> Result<(), Failure> {
    init_tracing(false, "warn");
    let rt = runtime()?;
    match cmd {
        BenchCommand::Run(args) => {
            if !(args.tps > 0.0 && args.tps.is_finite()) || args.n == 0 {
                return Err(Failure::Usage("--tps must be positive and --n at least 1".into()));
            }
            let mut scenario = Scenario::new(args.tps, args.n, args.gas_tier);
            scenario.difficulty = args.difficulty.clone();
            scenario.seed = args.seed;
            if let Some(f) = args.files {
                scenario.file_count = f;
            }
            let result = rt.block_on(async {
                match &args.url {
                    Some(url) => {
                        let key = args.api_key.clone().ok_or_else(|| Failure::Usage("--url needs --api-key".into()))?;
                        Ok::<_, Failure>(
                            logchain_bench::run_scenario(&Client::new(url, key), &scenario, &run_options(&args.common))
                                .await?,
                        )
                    }
                    None => Ok(local_runner(&args.common).run(&scenario).await?),
                }
            })?;
            write_run_outputs(&args.common.out, &result)?;
            let summary = summarize(&result.records);
            let doc = json!({
                "status": "ok",
                "accepted": result.accepted,
                "rejected": result.rejected,
                "failed": result.failed,
                "anchored": result.anchored,
                "wall_seconds": result.wall_seconds,
                "summary": summary,
            });
            out.emit(&doc, |w| {
                writeln!(
                    w,
                    "accepted {} rejected {} failed {} anchored {} in {:.2} s",
                    result.accepted, result.rejected, result.failed, result.anchored, result.wall_seconds
                )?;
                writeln!(
                    w,
                    "{:<4} {:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
                    "kind", "count", "min", "q1", "median", "mean", "q3", "max"
                )?;
                for k in &summary {
                    let s = k.stats;
                    writeln!(
                        w,
                        "{:<4} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                        k.kind.as_str(),
                        k.count,
                        s.min,
                        s.q1,
                        s.median,
                        s.mean,
                        s.q3,
                        s.max
                    )?;
                }
                Ok(())
            })?;
            if result.accepted < scenario.file_count || result.anchored < scenario.expected_supers() as u64 {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{} of {} submissions accepted, {} of {} super blocks anchored",
                    result.accepted,
                    scenario.file_count,
                    result.anchored,
                    scenario.expected_supers()
                )));
            }
            Ok(())
        }
        BenchCommand::Grid(args) => {
            let mut scenarios = grid_scenarios(args.backend.into());
            if let Some(f) = args.files {
                scenarios.iter_mut().for_each(|s| s.file_count = f);
            }
            let runner = local_runner(&args.common);
            let rows = rt.block_on(grid(&scenarios, |s| {
                let runner = runner.clone();
                async move { runner.run(&s).await }
            }))?;
            std::fs::create_dir_all(&args.common.out)?;
            let path = args.common.out.join("grid.csv");
            write_grid_csv(&rows, BufWriter::new(File::create(&path)?))?;
            out.emit(&json!({ "status": "ok", "rows": rows, "csv": path }), |w| {
                writeln!(w, "{} scenarios written to {}", rows.len(), path.display())
            })?;
            Ok(())
        }
    }
}

fn report(scenario: &str, s: u32, daily_usd: f64) -> CostReport {
    CostReport { scenario: scenario.into(), s, daily_usd }
}

fn cost(cmd: CostCommand, out: &mut Output<'_>) -> Result<(), Failure> {
    match cmd {
        CostCommand::Private { s, params } => {
            let d = costmodel::private_daily_cost(s, &params.params()?).map_err(cost_failure)?;
            let r = report("private", s, d);
            out.emit(&json!(r), |w| writeln!(w, "{d:.2}"))?;
        }
        CostCommand::Public { scenario, s, series, params } => {
            let d =
                costmodel::public_daily_cost(s, scenario, &series.load()?, &params.params()?).map_err(cost_failure)?;
            let r = report(scenario.as_str(), s, d);
            out.emit(&json!(r), |w| writeln!(w, "{d:.2}"))?;
        }
        CostCommand::Breakeven { scenario, series, params } => {
            let series = series.load()?;
            let params = params.params()?;
            let scenarios = match scenario {
                Some(s) => vec![s],
                None => series.scenarios(),
            };
            let mut rows = Vec::new();
            for sc in scenarios {
                rows.push((sc, costmodel::breakeven(sc, &series, &params).map_err(cost_failure)?));
            }
            let doc = json!(rows.iter().map(|(sc, s)| json!({ "scenario": sc, "s": s })).collect::<Vec<_>>());
            out.emit(&doc, |w| {
                for (sc, s) in &rows {
                    match s {
                        Some(s) => writeln!(w, "{sc}: {s}")?,
                        None => writeln!(w, "{sc}: none up to {}", costmodel::MAX_SUBMISSIONS)?,
                    }
                }
                Ok(())
            })?;
        }
        CostCommand::Curve { series, out: path, params } => {
            let rows = costmodel::cost_curve(&series.load()?, &params.params()?).map_err(cost_failure)?;
            match path {
                Some(p) => {
                    costmodel::write_curve_csv(&rows, BufWriter::new(File::create(&p)?))?;
                    out.emit(&json!({ "status": "ok", "rows": rows.len(), "csv": p }), |w| {
                        writeln!(w, "{} rows written to {}", rows.len(), p.display())
                    })?;
                }
                None => {
                    if out.json {
                        let doc: Vec<Value> = rows
                            .iter()
                            .map(|r| json!({ "s": r.s, "private": r.private, "public": r.public }))
                            .collect();
                        writeln!(out.out, "{}", Value::Array(doc))?;
                    } else {
                        costmodel::write_curve_csv(&rows, &mut *out.out)?;
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("logchain").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_capture(&[]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["cost", "private"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["cost", "private", "--s", "0"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["cost", "public", "--scenario", "turbo", "--s", "1"]).0, EXIT_USAGE);
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("verify"));
        assert_eq!(run_capture(&["--version"]).0, EXIT_OK);
    }

    #[test]
    fn private_cost_text_and_json() {
        assert_eq!(run_capture(&["cost", "private", "--s", "288"]).1.trim(), "29.09");
        let (code, out, _) = run_capture(&["--json", "cost", "private", "--s", "1"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["scenario"], "private");
        assert_eq!(v["s"], 1);
        assert!((v["daily_usd"].as_f64().unwrap() - 11.1533).abs() < 1e-3);
    }

    #[test]
    fn breakeven_on_bundled_series() {
        let (code, out, _) = run_capture(&["cost", "breakeven"]);
        assert_eq!(code, 0);
        assert_eq!(out, "slow: 3\naverage: 3\nfast: 2\nfastest: 2\n");
    }

    #[test]
    fn config_precedence() {
        let args = ServeArgs {
            config: None,
            bind: None,
            port: Some(0),
            store: None,
            difficulty: Some("00".into()),
            cb_capacity: Some(4),
            api_keys: None,
            queue_depth: None,
            backend: Some(BackendArg::Public),
            seed: None,
            gas_price: Some(20),
            read_only: false,
        };
        let cfg = serve_config(&args).unwrap();
        assert_eq!((cfg.port, cfg.cb_capacity, cfg.difficulty.as_str()), (0, 4, "00"));
        assert_eq!(cfg.backend.kind, BackendKind::Public);
        let read_only = ServeArgs { read_only: true, ..args };
        assert!(matches!(serve_config(&read_only), Err(Failure::Usage(_))), "read-only needs a store");
        let bad = ServeArgs { cb_capacity: Some(0), read_only: false, ..read_only };
        assert!(matches!(serve_config(&bad), Err(Failure::Usage(_))));
    }
}
