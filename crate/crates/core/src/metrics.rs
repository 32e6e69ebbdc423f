//! Per-request timing records, derived latency metrics and run reports.
//!
//! All times are milliseconds. For one request:
//!
//! * TTFT = first token - submit
//! * token streaming time = last token - first token
//! * total request time = TTFT + streaming time
//! * throughput = (tokens - 1) / streaming seconds, undefined for one token,
//!   since streaming time spans the gaps between tokens.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::cache::ResidencyStats;
use crate::config::{EngineConfig, WorkloadConfig};
use crate::error::{Error, Result};
use crate::workload::{AdapterId, RequestId};

pub const CSV_HEADER: &str =
    "request_id,adapter,input_tokens,output_tokens,submit_ms,first_token_ms,last_token_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub request_id: RequestId,
    pub adapter: AdapterId,
    pub input_tokens: u32,
    /// Tokens actually emitted.
    pub output_tokens: u32,
    pub submit_ms: f64,
    pub first_token_ms: f64,
    pub last_token_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub total_ms: f64,
    pub ttft_ms: f64,
    pub streaming_ms: f64,
    pub throughput_tok_s: Option<f64>,
}

pub fn derive(record: &RequestRecord) -> Derived {
    let ttft_ms = record.first_token_ms - record.submit_ms;
    let streaming_ms = record.last_token_ms - record.first_token_ms;
    let throughput_tok_s = (record.output_tokens >= 2 && streaming_ms > 0.0)
        .then(|| (record.output_tokens - 1) as f64 / (streaming_ms / 1000.0));
    Derived {
        total_ms: ttft_ms + streaming_ms,
        ttft_ms,
        streaming_ms,
        throughput_tok_s,
    }
}

/// Nearest-rank percentile: the element at 1-based rank `ceil(p * n)` of the
/// ascending sort.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::BadPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Guard against p * n landing a hair above an integer (0.9 * 10).
    let rank = ((p * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub average: f64,
    pub p90: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        Some(Stat {
            average: values.iter().sum::<f64>() / values.len() as f64,
            p90: percentile(values, 0.9).expect("non-empty"),
        })
    }
}

/// Average and p90 of each metric. Metrics are absent when there is nothing
/// to summarize: all of them for an empty run, throughput alone when every
/// request produced a single token.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryStats {
    pub request_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_request_ms: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttft_ms: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streaming_ms: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_tok_s: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate_throughput_tok_s: Option<f64>,
}

impl SummaryStats {
    pub fn is_empty(&self) -> bool {
        self.request_count == 0
    }
}

pub fn summarize(records: &[RequestRecord], run_duration_ms: f64) -> SummaryStats {
    if records.is_empty() {
        return SummaryStats::default();
    }
    let derived: Vec<Derived> = records.iter().map(derive).collect();
    let column = |f: fn(&Derived) -> f64| derived.iter().map(f).collect::<Vec<_>>();
    let throughput: Vec<f64> = derived.iter().filter_map(|d| d.throughput_tok_s).collect();
    let tokens: u64 = records.iter().map(|r| r.output_tokens as u64).sum();
    SummaryStats {
        request_count: records.len() as u64,
        total_request_ms: Stat::of(&column(|d| d.total_ms)),
        ttft_ms: Stat::of(&column(|d| d.ttft_ms)),
        streaming_ms: Stat::of(&column(|d| d.streaming_ms)),
        throughput_tok_s: Stat::of(&throughput),
        aggregate_throughput_tok_s: (run_duration_ms > 0.0)
            .then(|| tokens as f64 / (run_duration_ms / 1000.0)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub engine: EngineConfig,
    pub workload: WorkloadConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub summary: SummaryStats,
    pub per_adapter: BTreeMap<String, u64>,
    pub cache: ResidencyStats,
    /// Span of the run used for aggregate throughput.
    pub elapsed_ms: f64,
    /// Requests that failed outright (live bench only).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub failures: u64,
    /// Completed requests per replica, in replica order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_replica: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<RequestRecord>,
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

impl RunReport {
    pub fn new(
        config: ConfigEcho,
        records: Vec<RequestRecord>,
        cache: ResidencyStats,
        elapsed_ms: f64,
    ) -> Self {
        let summary = summarize(&records, elapsed_ms);
        let mut per_adapter = BTreeMap::new();
        for r in &records {
            *per_adapter.entry(r.adapter.to_string()).or_insert(0) += 1;
        }
        RunReport {
            config,
            summary,
            per_adapter,
            cache,
            elapsed_ms,
            failures: 0,
            per_replica: Vec::new(),
            records,
        }
    }

    /// Same report without the raw records.
    pub fn without_records(mut self) -> Self {
        self.records.clear();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        write_csv(&self.records, out)
    }
}

/// Combines replica reports: records are concatenated in order and
/// re-summarized, counts are summed, and the span is the longest one.
pub fn merge(reports: &[RunReport]) -> Result<RunReport> {
    let first = reports.first().ok_or(Error::EmptyInput("reports"))?;
    if reports.len() == 1 {
        return Ok(first.clone());
    }
    if reports
        .iter()
        .any(|r| r.config.engine != first.config.engine)
    {
        return Err(Error::IncompatibleReports);
    }
    if reports
        .iter()
        .any(|r| r.records.len() as u64 != r.summary.request_count)
    {
        return Err(Error::EmptyInput("records (needed to re-summarize)"));
    }
    let records: Vec<RequestRecord> = reports.iter().flat_map(|r| r.records.clone()).collect();
    let elapsed = reports.iter().map(|r| r.elapsed_ms).fold(0.0, f64::max);
    let cache = reports
        .iter()
        .fold(ResidencyStats::default(), |acc, r| acc.add(&r.cache));
    let mut merged = RunReport::new(first.config.clone(), records, cache, elapsed);
    merged.failures = reports.iter().map(|r| r.failures).sum();
    merged.per_replica = reports
        .iter()
        .flat_map(|r| {
            if r.per_replica.is_empty() {
                vec![r.summary.request_count]
            } else {
                r.per_replica.clone()
            }
        })
        .collect();
    Ok(merged)
}

pub fn write_csv<W: io::Write>(records: &[RequestRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(io::Error::other(e.to_string()))
}

/// Text table with metrics as rows and one average/p90 column pair per run.
pub fn format_table(columns: &[(String, &SummaryStats)]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<32}{:<9}", "", "");
    for (label, _) in columns {
        let _ = write!(out, "{label:>12}");
    }
    out.push('\n');
    type Pick = fn(&SummaryStats) -> Option<Stat>;
    let rows: [(&str, Pick); 4] = [
        ("Total request time (ms)", |s| s.total_request_ms),
        ("Time to first token, TTFT (ms)", |s| s.ttft_ms),
        ("Token streaming time (ms)", |s| s.streaming_ms),
        ("Throughput (token/s)", |s| s.throughput_tok_s),
    ];
    for (name, pick) in rows {
        if columns.iter().all(|(_, s)| pick(s).is_none()) {
            continue;
        }
        for (i, kind) in ["average", "p90"].into_iter().enumerate() {
            let label = if i == 0 { name } else { "" };
            let _ = write!(out, "{label:<32}{kind:<9}");
            for (_, s) in columns {
                match pick(s) {
                    Some(stat) => {
                        let v = if i == 0 { stat.average } else { stat.p90 };
                        let _ = write!(out, "{v:>12.2}");
                    }
                    None => {
                        let _ = write!(out, "{:>12}", "-");
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: u64, submit: f64, first: f64, last: f64, out: u32) -> RequestRecord {
        RequestRecord {
            request_id: RequestId(id),
            adapter: AdapterId::BASE,
            input_tokens: 10,
            output_tokens: out,
            submit_ms: submit,
            first_token_ms: first,
            last_token_ms: last,
        }
    }

    fn report(records: Vec<RequestRecord>) -> RunReport {
        let echo = ConfigEcho {
            engine: EngineConfig::default(),
            workload: WorkloadConfig::default(),
        };
        RunReport::new(echo, records, ResidencyStats::default(), 1000.0)
    }

    #[test]
    fn derive_five_tokens() {
        let d = derive(&record(1, 0.0, 107.5, 157.5, 5));
        assert_eq!(d.total_ms, 157.5);
        assert_eq!(d.ttft_ms, 107.5);
        assert_eq!(d.streaming_ms, 50.0);
        assert_eq!(d.throughput_tok_s, Some(80.0));
    }

    #[test]
    fn single_token_has_no_throughput() {
        assert_eq!(
            derive(&record(1, 0.0, 90.0, 90.0, 1)).throughput_tok_s,
            None
        );
    }

    #[test]
    fn percentile_examples() {
        let tens: Vec<f64> = (1..=10).map(|i| i as f64 * 10.0).collect();
        assert_eq!(percentile(&tens, 0.9).unwrap(), 90.0);
        assert_eq!(percentile(&[7.0], 0.9).unwrap(), 7.0);
        assert_eq!(percentile(&[7.0], 0.01).unwrap(), 7.0);
        assert_eq!(percentile(&[5.0, 1.0, 3.0], 1.0).unwrap(), 5.0);
        assert!(matches!(percentile(&[], 0.5), Err(Error::EmptySample)));
        assert!(percentile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn identical_records_summary() {
        let s = summarize(
            &[record(1, 0.0, 10.0, 30.0, 3), record(2, 0.0, 10.0, 30.0, 3)],
            1000.0,
        );
        let total = s.total_request_ms.unwrap();
        assert_eq!(total.average, 30.0);
        assert_eq!(total.p90, 30.0);
        assert_eq!(s.throughput_tok_s.unwrap().average, 100.0);
        assert_eq!(s.aggregate_throughput_tok_s, Some(6.0));
    }

    #[test]
    fn empty_and_single_token_summaries() {
        let empty = summarize(&[], 1000.0);
        assert!(empty.is_empty());
        assert!(empty.ttft_ms.is_none());

        let s = summarize(&[record(1, 0.0, 5.0, 5.0, 1)], 1000.0);
        assert!(s.throughput_tok_s.is_none());
        assert!(s.ttft_ms.is_some() && s.streaming_ms.is_some());
        let json = serde_json::to_string(&s).unwrap();
        assert!(!json.contains("\"throughput_tok_s\""));
    }

    #[test]
    fn merge_singleton_and_pair() {
        let a = report(vec![record(1, 0.0, 10.0, 20.0, 2)]);
        assert_eq!(merge(std::slice::from_ref(&a)).unwrap(), a);

        let b = report(vec![record(2, 5.0, 30.0, 90.0, 4)]);
        let m = merge(&[a.clone(), b.clone()]).unwrap();
        let union = [a.records.clone(), b.records.clone()].concat();
        assert_eq!(m.summary, summarize(&union, 1000.0));
        assert_eq!(m.per_replica, vec![1, 1]);
        assert_eq!(m.per_adapter["base"], 2);
    }

    #[test]
    fn merge_rejects_mismatched_engines() {
        let a = report(vec![record(1, 0.0, 10.0, 20.0, 2)]);
        let mut b = report(vec![record(2, 0.0, 10.0, 20.0, 2)]);
        b.config.engine.decode_base_ms = 11.0;
        assert!(matches!(merge(&[a, b]), Err(Error::IncompatibleReports)));
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_csv(&[record(1, 0.0, 1.5, 2.5, 2)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "1,base,10,2,0.0,1.5,2.5");

        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_HEADER);
    }

    #[test]
    fn table_omits_absent_metrics() {
        let s = summarize(&[record(1, 0.0, 5.0, 5.0, 1)], 1000.0);
        let table = format_table(&[("1 user".to_string(), &s)]);
        assert!(table.contains("TTFT"));
        assert!(!table.contains("Throughput"));
    }
}
