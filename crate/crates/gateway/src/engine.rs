//! The live engine loop: one task owns the replica, everything else talks
//! to it over a channel.

use std::collections::HashMap;
use std::time::Duration;

use adapterd_core::metrics::ConfigEcho;
use adapterd_core::{
    AdapterId, EngineConfig, Replica, Request, RequestId, RequestRecord, RunReport, VirtualTime,
    WorkloadConfig,
};
use tokio::sync::{mpsc, oneshot};
use tokio::time::{sleep_until, Instant};

/// What a connection receives for its request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Emit {
    Token(u32),
    Done,
}

pub(crate) struct Submission {
    pub adapter: AdapterId,
    pub input_tokens: u32,
    pub max_new_tokens: u32,
    /// Milliseconds since the engine clock started, taken when the HTTP
    /// request arrived.
    pub submit_ms: f64,
    pub events: mpsc::UnboundedSender<Emit>,
}

pub(crate) enum Command {
    Submit(Submission),
    Report(oneshot::Sender<RunReport>),
}

pub(crate) struct EngineLoop {
    replica: Replica,
    echo: ConfigEcho,
    epoch: Instant,
    next_id: u64,
    streams: HashMap<RequestId, mpsc::UnboundedSender<Emit>>,
    records: Vec<RequestRecord>,
    /// End of the last step on the engine's own schedule.
    last_end: f64,
}

impl EngineLoop {
    pub fn new(
        engine: &EngineConfig,
        n_adapters: u32,
        warm: bool,
        epoch: Instant,
    ) -> adapterd_core::Result<Self> {
        Ok(EngineLoop {
            replica: Replica::new(engine, n_adapters, warm)?,
            echo: ConfigEcho {
                engine: engine.clone(),
                workload: WorkloadConfig {
                    n_adapters,
                    users: 0,
                    warm_start: warm,
                    ..Default::default()
                },
            },
            epoch,
            next_id: 0,
            streams: HashMap::new(),
            records: Vec::new(),
            last_end: 0.0,
        })
    }

    fn wall_ms(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() * 1000.0
    }

    fn at(&self, ms: f64) -> Instant {
        self.epoch + Duration::from_secs_f64(ms.max(0.0) / 1000.0)
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Submit(s) => {
                let id = RequestId(self.next_id);
                self.next_id += 1;
                let request = Request {
                    id,
                    adapter: s.adapter,
                    input_tokens: s.input_tokens,
                    max_new_tokens: s.max_new_tokens,
                    submit_time: VirtualTime::from_ms(s.submit_ms),
                };
                if self.replica.submit(request).is_ok() {
                    self.streams.insert(id, s.events);
                }
            }
            Command::Report(reply) => {
                let report = RunReport::new(
                    self.echo.clone(),
                    self.records.clone(),
                    self.replica.cache().residency_stats(),
                    self.wall_ms(),
                );
                let _ = reply.send(report);
            }
        }
    }

    /// Runs until every sender of `rx` is dropped.
    pub async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        loop {
            while let Ok(cmd) = rx.try_recv() {
                self.handle(cmd);
            }
            // While busy the engine keeps its own schedule so sleep overshoot
            // does not accumulate; an idle engine resyncs to the wall clock.
            let now = if self.replica.batch().is_empty() {
                self.wall_ms().max(self.last_end)
            } else {
                self.last_end
            };
            let step = match self.replica.begin_step(VirtualTime::from_ms(now), true) {
                Ok(step) => step,
                Err(_) => return,
            };
            match step {
                Some(step) => {
                    let mut tokens = step.tokens.clone();
                    tokens.sort_by(|a, b| a.at_ms.total_cmp(&b.at_ms));
                    let last_index: HashMap<RequestId, u32> = step
                        .finished
                        .iter()
                        .map(|f| (f.record.request_id, f.record.output_tokens - 1))
                        .collect();
                    for tok in tokens {
                        sleep_until(self.at(tok.at_ms)).await;
                        let Some(tx) = self.streams.get(&tok.request_id) else {
                            continue;
                        };
                        let _ = tx.send(Emit::Token(tok.token_index));
                        if last_index.get(&tok.request_id) == Some(&tok.token_index) {
                            let _ = tx.send(Emit::Done);
                            self.streams.remove(&tok.request_id);
                        }
                    }
                    self.records
                        .extend(step.finished.into_iter().map(|f| f.record));
                    self.last_end = step.end_ms;
                    sleep_until(self.at(step.end_ms)).await;
                }
                None => {
                    let wake = self.replica.next_wake().map(|t| self.at(t.as_ms()));
                    tokio::select! {
                        cmd = rx.recv() => match cmd {
                            Some(cmd) => self.handle(cmd),
                            None => return,
                        },
                        _ = sleep_until(wake.unwrap_or_else(|| Instant::now() + Duration::from_secs(3600))), if wake.is_some() => {}
                    }
                }
            }
        }
    }
}
