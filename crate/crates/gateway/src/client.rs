use std::sync::{Arc, Mutex};
use std::time::Duration;

use adapterd_core::metrics::{merge, ConfigEcho};
use adapterd_core::workload::{UserAction, UserState};
use adapterd_core::{
    EngineConfig, ReplicaSet, RequestId, RequestRecord, Rng, RunReport, VirtualTime, WorkloadConfig,
};
use futures_util::StreamExt;
use tokio::time::Instant;

use crate::error::{Error, Result};
use crate::server::GenerateRequest;

/// Client-side timestamps of one streamed request, in milliseconds since
/// the caller's epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTiming {
    pub token_indices: Vec<u32>,
    pub sent_ms: f64,
    pub first_ms: f64,
    pub last_ms: f64,
    pub done_ms: f64,
}

fn ms_since(epoch: Instant) -> f64 {
    epoch.elapsed().as_secs_f64() * 1000.0
}

/// Sends one streaming generate request and checks the event stream:
/// token indices count up from 0 and `[DONE]` comes last.
pub async fn generate(
    client: &reqwest::Client,
    base_url: &str,
    request: &GenerateRequest,
    epoch: Instant,
) -> Result<StreamTiming> {
    let body = serde_json::to_vec(&GenerateRequest {
        stream: true,
        ..request.clone()
    })
    .expect("serializable");
    let sent_ms = ms_since(epoch);
    let response = client
        .post(format!("{}/v1/generate", base_url.trim_end_matches('/')))
        .header("content-type", "application/json")
        .body(body)
        .send()
        .await?;
    let status = response.status();
    if !status.is_success() {
        return Err(Error::Status {
            status: status.as_u16(),
            body: response.text().await.unwrap_or_default(),
        });
    }

    let mut timing = StreamTiming {
        token_indices: Vec::new(),
        sent_ms,
        first_ms: f64::NAN,
        last_ms: f64::NAN,
        done_ms: f64::NAN,
    };
    let mut buf = String::new();
    let mut chunks = response.bytes_stream();
    while let Some(chunk) = chunks.next().await {
        let chunk = chunk?;
        let now = ms_since(epoch);
        buf.push_str(std::str::from_utf8(&chunk).map_err(|e| Error::Protocol(e.to_string()))?);
        while let Some(end) = buf.find("\n\n") {
            let event: String = buf.drain(..end + 2).collect();
            let Some(data) = event
                .lines()
                .find_map(|l| l.strip_prefix("data:").map(str::trim))
            else {
                continue;
            };
            if !timing.done_ms.is_nan() {
                return Err(Error::Protocol("event after [DONE]".into()));
            }
            if data == "[DONE]" {
                timing.done_ms = now;
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(data).map_err(|e| Error::Protocol(e.to_string()))?;
            let index = value["token_index"]
                .as_u64()
                .ok_or_else(|| Error::Protocol(format!("no token_index in {data}")))?
                as u32;
            if index as usize != timing.token_indices.len() {
                return Err(Error::Protocol(format!(
                    "token_index {index} after {} tokens",
                    timing.token_indices.len()
                )));
            }
            if timing.token_indices.is_empty() {
                timing.first_ms = now;
            }
            timing.last_ms = now;
            timing.token_indices.push(index);
        }
    }
    if timing.done_ms.is_nan() {
        return Err(Error::Protocol("stream ended without [DONE]".into()));
    }
    if timing.token_indices.is_empty() {
        return Err(Error::Protocol("no tokens before [DONE]".into()));
    }
    Ok(timing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// Users, duration, payload shape and seed. Adapters are drawn from
    /// `n_adapters`; 0 sends everything to the base model.
    pub workload: WorkloadConfig,
    /// Pause after a failed request before the user tries again.
    pub retry_pause: Duration,
}

impl BenchOptions {
    pub fn new(workload: WorkloadConfig) -> Self {
        BenchOptions {
            workload,
            retry_pause: Duration::from_millis(50),
        }
    }
}

/// One completed request as the client saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSample {
    pub replica: usize,
    pub record: RequestRecord,
    /// When `[DONE]` arrived.
    pub done_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    /// Replica reports merged; `failures` counts failed attempts.
    pub report: RunReport,
    pub samples: Vec<ClientSample>,
    /// One message per failed attempt.
    pub errors: Vec<String>,
}

#[derive(Default)]
struct Collected {
    samples: Vec<ClientSample>,
    errors: Vec<String>,
}

/// The serving engine's configuration, read from the first endpoint that
/// answers `/v1/metrics`. Used only to label the report.
async fn remote_engine(client: &reqwest::Client, urls: &[String]) -> EngineConfig {
    for url in urls {
        let got = async {
            let resp = client
                .get(format!("{}/v1/metrics", url.trim_end_matches('/')))
                .send()
                .await
                .ok()?;
            let bytes = resp.bytes().await.ok()?;
            serde_json::from_slice::<RunReport>(&bytes).ok()
        }
        .await;
        if let Some(report) = got {
            return report.config.engine;
        }
    }
    EngineConfig::default()
}

/// Runs `workload.users` closed-loop users against `urls` for
/// `workload.duration_ms` of wall time, picking endpoints round-robin per
/// request. Requests sent before the deadline are allowed to finish.
pub async fn bench(urls: Vec<String>, options: BenchOptions) -> Result<BenchOutcome> {
    let replicas = Arc::new(Mutex::new(ReplicaSet::new(urls.clone())?));
    let client = reqwest::Client::builder()
        .connect_timeout(Duration::from_secs(2))
        .build()?;
    let engine = remote_engine(&client, &urls).await;
    let workload = options.workload.clone();
    let epoch = Instant::now();
    let deadline = VirtualTime::from_ms(workload.duration_ms);
    let collected = Arc::new(Mutex::new(Collected::default()));
    let next_id = Arc::new(std::sync::atomic::AtomicU64::new(0));
    let root = Rng::new(workload.seed);

    let mut tasks = Vec::new();
    for user in 0..workload.users {
        let mut state = UserState::new(user, &root);
        let replicas = replicas.clone();
        let client = client.clone();
        let collected = collected.clone();
        let next_id = next_id.clone();
        let workload = workload.clone();
        let pause = options.retry_pause;
        tasks.push(tokio::spawn(async move {
            loop {
                let id = RequestId(next_id.fetch_add(1, std::sync::atomic::Ordering::Relaxed));
                let now = VirtualTime::from_ms(ms_since(epoch));
                let payload = match state.tick(now, deadline, &workload, id) {
                    UserAction::Submit(p) => p,
                    UserAction::Wait | UserAction::Stop => break,
                };
                let (replica, url) = replicas.lock().expect("not poisoned").pick();
                let request = GenerateRequest {
                    adapter: (!payload.adapter.is_base()).then(|| payload.adapter.to_string()),
                    input_tokens: Some(payload.input_tokens),
                    prompt: None,
                    max_new_tokens: Some(payload.output_tokens),
                    stream: true,
                };
                let result = generate(&client, &url, &request, epoch).await;
                state.complete(id);
                match result {
                    Ok(t) => {
                        let record = RequestRecord {
                            request_id: id,
                            adapter: payload.adapter,
                            input_tokens: payload.input_tokens,
                            output_tokens: t.token_indices.len() as u32,
                            submit_ms: t.sent_ms,
                            first_token_ms: t.first_ms,
                            last_token_ms: t.last_ms,
                        };
                        collected
                            .lock()
                            .expect("not poisoned")
                            .samples
                            .push(ClientSample {
                                replica,
                                record,
                                done_ms: t.done_ms,
                            });
                    }
                    Err(e) => {
                        collected
                            .lock()
                            .expect("not poisoned")
                            .errors
                            .push(format!("{url}: {e}"));
                        tokio::time::sleep(pause).await;
                    }
                }
            }
        }));
    }
    for task in tasks {
        task.await
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let elapsed = ms_since(epoch);

    let Collected {
        mut samples,
        errors,
    } = std::mem::take(&mut *collected.lock().expect("not poisoned"));
    samples.sort_by(|a, b| a.record.submit_ms.total_cmp(&b.record.submit_ms));
    let echo = ConfigEcho { engine, workload };
    let reports: Vec<RunReport> = (0..urls.len())
        .map(|r| {
            let records: Vec<RequestRecord> = samples
                .iter()
                .filter(|s| s.replica == r)
                .map(|s| s.record.clone())
                .collect();
            RunReport::new(echo.clone(), records, Default::default(), elapsed)
        })
        .collect();
    let mut report = merge(&reports)?;
    report.failures = errors.len() as u64;
    if urls.len() > 1 {
        report.per_replica = reports.iter().map(|r| r.summary.request_count).collect();
    }
    Ok(BenchOutcome {
        report,
        samples,
        errors,
    })
}
