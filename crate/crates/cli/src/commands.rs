use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use adapterd_core::engine::run_scenario;
use adapterd_core::metrics::{format_table, write_csv};
use adapterd_core::profiler::{
    compute_profile, correlation_report, lift_table, parse_jsonl, read_profiles_csv,
    read_quality_csv, CorrelationMatrix, LiftRow, QualityMetric, RmseMode, TaskProfile,
};
use adapterd_core::{RunReport, Scenario, SummaryStats, WorkloadConfig};
use adapterd_gateway::{BenchOptions, BenchOutcome, ServerConfig};
use anyhow::{Context, Result};

use crate::scenarios;

/// Bad input: exits with status 2 rather than 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

/// 2 for configuration and input errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err
        .chain()
        .any(|e| e.downcast_ref::<UsageError>().is_some())
    {
        2
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    scenarios::resolve(name_or_path).map_err(|e| usage(format!("scenario {name_or_path}: {e}")))
}

/// Applies overrides and validates. Warnings go to stderr.
fn prepare(mut scenario: Scenario, seed: Option<u64>, users: Option<u32>) -> Result<Scenario> {
    if let Some(seed) = seed {
        scenario.workload.seed = seed;
    }
    if let Some(users) = users {
        scenario.workload.users = users;
    }
    for warning in scenario.validate().map_err(usage)? {
        eprintln!("warning: {warning}");
    }
    Ok(scenario)
}

fn write_output(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn footer(summary: &SummaryStats) -> String {
    let mut out = format!("requests: {}", summary.request_count);
    if let Some(agg) = summary.aggregate_throughput_tok_s {
        let _ = write!(out, ", aggregate throughput: {agg:.2} tok/s");
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub scenario: String,
    pub seed: Option<u64>,
    pub users: Option<u32>,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Keep per-request records in the JSON report.
    pub records: bool,
}

/// Runs a scenario in virtual time. Returns the report and the text table.
pub fn simulate(args: &SimulateArgs) -> Result<(RunReport, String)> {
    let scenario = prepare(load_scenario(&args.scenario)?, args.seed, args.users)?;
    let report = run_scenario(&scenario)?;
    if let Some(path) = &args.output {
        let bytes = match args.format {
            Format::Json => {
                let shown = if args.records {
                    report.clone()
                } else {
                    report.clone().without_records()
                };
                let mut json = shown.to_json()?;
                json.push('\n');
                json.into_bytes()
            }
            Format::Csv => {
                let mut buf = Vec::new();
                write_csv(&report.records, &mut buf)?;
                buf
            }
        };
        write_output(path, &bytes)?;
    }
    let label = format!("{} users", scenario.workload.users);
    let mut table = format_table(&[(label, &report.summary)]);
    table.push_str(&footer(&report.summary));
    Ok((report, table))
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub scenario: String,
    pub seed: Option<u64>,
    /// Replaces the scenario's own sweep.
    pub users: Option<Vec<u32>>,
    pub output: Option<PathBuf>,
}

/// Runs a scenario once per user count, one table column each.
pub fn sweep(args: &SweepArgs) -> Result<(Vec<RunReport>, String)> {
    let base = load_scenario(&args.scenario)?;
    let counts = args
        .users
        .clone()
        .or_else(|| base.user_sweep.clone())
        .ok_or_else(|| usage("no user counts: pass --users or use a scenario with user_sweep"))?;
    if counts.is_empty() {
        return Err(usage("empty user sweep"));
    }
    let mut reports = Vec::with_capacity(counts.len());
    for &users in &counts {
        let scenario = prepare(base.clone(), args.seed, Some(users))?;
        reports.push(run_scenario(&scenario)?.without_records());
    }
    if let Some(path) = &args.output {
        let mut json = serde_json::to_string_pretty(&reports)?;
        json.push('\n');
        write_output(path, json.as_bytes())?;
    }
    let columns: Vec<(String, &SummaryStats)> = counts
        .iter()
        .zip(&reports)
        .map(|(u, r)| (u.to_string(), &r.summary))
        .collect();
    let mut table = String::from("# concurrent users\n");
    table.push_str(&format_table(&columns));
    Ok((reports, table))
}

#[derive(Debug, Clone, Default)]
pub struct ServeArgs {
    pub scenario: Option<String>,
    pub port: u16,
    pub adapters: Option<u32>,
}

fn server_config(args: &ServeArgs) -> Result<ServerConfig> {
    let (engine, mut n_adapters, warm) = match &args.scenario {
        Some(name) => {
            let s = prepare(load_scenario(name)?, None, None)?;
            (s.engine, s.workload.n_adapters, s.workload.warm_start)
        }
        None => (Default::default(), 25, false),
    };
    if let Some(n) = args.adapters {
        n_adapters = n;
    }
    Ok(ServerConfig {
        engine,
        n_adapters,
        warm_start: warm,
    })
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let config = server_config(args)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let port = adapterd_gateway::port_from_env(args.port);
        let handle =
            adapterd_gateway::spawn(config, SocketAddr::from(([0, 0, 0, 0], port))).await?;
        eprintln!("listening on {}", handle.addr);
        handle.wait().await
    })?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub urls: Vec<String>,
    pub users: u32,
    pub duration_s: f64,
    pub adapters: u32,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// Closed-loop benchmark against running services.
pub fn bench(args: &BenchArgs) -> Result<(BenchOutcome, String)> {
    if args.urls.is_empty() {
        return Err(usage("at least one --url is required"));
    }
    let workload = WorkloadConfig {
        n_adapters: args.adapters,
        users: args.users,
        duration_ms: args.duration_s * 1000.0,
        seed: args.seed,
        ..Default::default()
    };
    adapterd_core::validate_config(Default::default(), workload.clone()).map_err(usage)?;
    let runtime = tokio::runtime::Runtime::new()?;
    let outcome = runtime.block_on(adapterd_gateway::bench(
        args.urls.clone(),
        BenchOptions {
            workload,
            retry_pause: Duration::from_millis(50),
        },
    ))?;
    if let Some(path) = &args.output {
        let mut json = outcome.report.to_json()?;
        json.push('\n');
        write_output(path, json.as_bytes())?;
    }
    let label = format!("{} users", args.users);
    let mut table = format_table(&[(label, &outcome.report.summary)]);
    table.push_str(&footer(&outcome.report.summary));
    if !outcome.report.per_replica.is_empty() {
        let _ = writeln!(table, "per replica: {:?}", outcome.report.per_replica);
    }
    if outcome.report.failures > 0 {
        let _ = writeln!(table, "failures: {}", outcome.report.failures);
        if let Some(first) = outcome.errors.first() {
            let _ = writeln!(table, "first failure: {first}");
        }
    }
    Ok((outcome, table))
}

/// Bench counts as failed when nothing completed.
pub fn bench_failed(outcome: &BenchOutcome) -> bool {
    outcome.report.summary.is_empty()
}

pub fn profile(dataset: &Path, name: Option<&str>, output: Option<&Path>) -> Result<TaskProfile> {
    let file = fs::File::open(dataset).map_err(|e| usage(format!("{}: {e}", dataset.display())))?;
    let examples = parse_jsonl(BufReader::new(file))
        .map_err(|e| usage(format!("{}: {e}", dataset.display())))?;
    let name = name.map(str::to_owned).unwrap_or_else(|| {
        dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let profile = compute_profile(&examples, &name).map_err(usage)?;
    if let Some(path) = output {
        let mut json = serde_json::to_string_pretty(&profile)?;
        json.push('\n');
        write_output(path, json.as_bytes())?;
    }
    Ok(profile)
}

fn read_inputs(
    profiles: &Path,
    quality: &Path,
) -> Result<(
    Vec<TaskProfile>,
    Vec<adapterd_core::profiler::QualityRecord>,
)> {
    let open = |p: &Path| fs::File::open(p).map_err(|e| usage(format!("{}: {e}", p.display())));
    let tasks = read_profiles_csv(open(profiles)?)
        .map_err(|e| usage(format!("{}: {e}", profiles.display())))?;
    let scores = read_quality_csv(open(quality)?)
        .map_err(|e| usage(format!("{}: {e}", quality.display())))?;
    Ok((tasks, scores))
}

#[derive(Debug, Clone)]
pub struct LiftArgs {
    pub profiles: PathBuf,
    pub quality: PathBuf,
    /// A quality metric name; `None` fits every metric.
    pub target: Option<String>,
    pub mode: RmseMode,
    pub output: Option<PathBuf>,
}

/// Fits the lift models and renders weights and RMSE per target.
pub fn lift(args: &LiftArgs) -> Result<(Vec<LiftRow>, String)> {
    let (tasks, scores) = read_inputs(&args.profiles, &args.quality)?;
    let target = match args.target.as_deref() {
        None | Some("all") => None,
        Some(name) => Some(QualityMetric::from_name(name).ok_or_else(|| {
            let known: Vec<_> = QualityMetric::ALL.iter().map(|m| m.name()).collect();
            usage(format!(
                "unknown target {name}; expected one of {}",
                known.join(", ")
            ))
        })?),
    };
    let mut rows = lift_table(&tasks, &scores, args.mode).map_err(usage)?;
    if let Some(t) = target {
        rows.retain(|r| r.target == t.name());
    }
    if let Some(path) = &args.output {
        let mut json = serde_json::to_string_pretty(&rows)?;
        json.push('\n');
        write_output(path, json.as_bytes())?;
    }

    let mut out = String::new();
    for row in &rows {
        let _ = writeln!(out, "target: {}", row.target);
        let _ = writeln!(out, "  {:<24}{:>10.4}", "intercept", row.model.intercept);
        for (f, w) in row.model.features.iter().zip(&row.model.weights) {
            let _ = writeln!(out, "  {f:<24}{w:>10.4}");
        }
        for d in &row.model.dropped {
            let _ = writeln!(out, "  {d:<24}{:>10}", "dropped");
        }
        out.push('\n');
    }
    let cv = args.mode == RmseMode::LeaveOneOut;
    let _ = write!(out, "{:<18}{:>12}{:>12}", "metric", "RMSE", "+avg base");
    if cv {
        let _ = write!(out, "{:>12}{:>12}", "LOO", "LOO +base");
    }
    out.push('\n');
    let cell = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
    for row in &rows {
        let _ = write!(
            out,
            "{:<18}{:>12}{:>12}",
            row.target,
            cell(Some(row.rmse_without)),
            cell(row.rmse_with_base)
        );
        if cv {
            let _ = write!(
                out,
                "{:>12}{:>12}",
                cell(row.loo_without),
                cell(row.loo_with_base)
            );
        }
        out.push('\n');
    }
    Ok((rows, out))
}

/// Heuristic × quality correlation matrix as a text table.
pub fn correlate(profiles: &Path, quality: &Path) -> Result<(CorrelationMatrix, String)> {
    let (tasks, scores) = read_inputs(profiles, quality)?;
    let matrix = correlation_report(&tasks, &scores).map_err(usage)?;
    let mut out = format!("{:<22}", "");
    for m in &matrix.metrics {
        let _ = write!(out, "{:>16}", m);
    }
    out.push('\n');
    for (h, row) in matrix.heuristics.iter().zip(&matrix.values) {
        let _ = write!(out, "{h:<22}");
        for v in row {
            match v {
                Some(v) => {
                    let _ = write!(out, "{v:>16.2}");
                }
                None => {
                    let _ = write!(out, "{:>16}", "-");
                }
            }
        }
        out.push('\n');
    }
    Ok((matrix, out))
}
