use std::collections::BTreeSet;

use crate::cache::AdapterCache;
use crate::config::EngineConfig;
use crate::error::Result;
use crate::metrics::RequestRecord;
use crate::scheduler::{AdmissionPlan, Scheduler};
use crate::time::VirtualTime;
use crate::workload::{AdapterId, Request, RequestId};

use super::{decode_time, prefill_phase};

/// One sequence in the decode batch.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub request: Request,
    /// Adapter applied to this batch slot.
    pub adapter: AdapterId,
    pub tokens_emitted: u32,
    pub first_token_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenEvent {
    pub request_id: RequestId,
    /// 0 for the first token.
    pub token_index: u32,
    pub at_ms: f64,
}

/// Per-slot adapter binding seen while the step ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskEntry {
    pub request_id: RequestId,
    pub request_adapter: AdapterId,
    pub slot_adapter: AdapterId,
}

#[derive(Debug, Clone)]
pub struct FinishedSequence {
    pub record: RequestRecord,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub step: i64,
    pub start_ms: f64,
    /// Prefill phase length, including adapter switch overhead.
    pub prefill_ms: f64,
    pub step_duration: f64,
    pub end_ms: f64,
    pub admitted: usize,
    pub decoded: usize,
    pub new_adapters: usize,
    pub first_token_ids: Vec<RequestId>,
    pub finished: Vec<FinishedSequence>,
    pub tokens: Vec<TokenEvent>,
    pub tokens_emitted: usize,
    pub mask: Vec<MaskEntry>,
    pub skipped_nonresident: BTreeSet<AdapterId>,
}

/// A single serving replica: adapter cache, scheduler and decode batch.
///
/// The replica does not own a clock. The caller starts a step at some time,
/// receives every token timestamp of that step at once, and must not start
/// the next step before `end_ms`.
#[derive(Debug, Clone)]
pub struct Replica {
    config: EngineConfig,
    cache: AdapterCache,
    scheduler: Scheduler,
    batch: Vec<Sequence>,
    step: i64,
    prev_adapters: BTreeSet<AdapterId>,
    tokens_emitted: u64,
}

impl Replica {
    pub fn new(config: &EngineConfig, n_adapters: u32, warm: bool) -> Result<Self> {
        let adapters = (0..n_adapters).map(AdapterId::new);
        let mut cache = AdapterCache::new(config, adapters.clone());
        if warm {
            cache.preload(adapters)?;
        }
        Ok(Replica {
            config: config.clone(),
            cache,
            scheduler: Scheduler::new(),
            batch: Vec::new(),
            step: 0,
            prev_adapters: BTreeSet::new(),
            tokens_emitted: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn cache(&self) -> &AdapterCache {
        &self.cache
    }

    pub fn batch(&self) -> &[Sequence] {
        &self.batch
    }

    pub fn queued(&self) -> usize {
        self.scheduler.queued_len()
    }

    pub fn tokens_emitted(&self) -> u64 {
        self.tokens_emitted
    }

    /// Whether `adapter` can be served here at all.
    pub fn knows(&self, adapter: AdapterId) -> bool {
        adapter.is_base() || self.cache.entry(adapter).is_some()
    }

    pub fn submit(&mut self, request: Request) -> Result<()> {
        self.scheduler.enqueue(request)
    }

    pub fn discard_queued(&mut self) -> Vec<Request> {
        self.scheduler.discard_queued()
    }

    /// When an idle replica with queued work should look again: the next
    /// adapter load completion.
    pub fn next_wake(&self) -> Option<VirtualTime> {
        if self.scheduler.queued_len() == 0 {
            None
        } else {
            self.cache.next_ready_at()
        }
    }

    /// Runs one step starting at `now`. Returns `None` when there is
    /// nothing to decode and nothing admissible.
    pub fn begin_step(&mut self, now: VirtualTime, admit: bool) -> Result<Option<StepOutcome>> {
        self.cache.on_clock(now)?;
        let plan = if admit {
            let free = (self.config.max_batch_size as usize).saturating_sub(self.batch.len());
            self.scheduler.plan_admission(
                &mut self.cache,
                now,
                free,
                self.config.admission_per_step as usize,
                self.step,
            )?
        } else {
            AdmissionPlan::default()
        };
        if self.batch.is_empty() && plan.admitted.is_empty() {
            return Ok(None);
        }

        let start = now.as_ms();
        let decoding = self.batch.len();
        let new_adapters: BTreeSet<AdapterId> = plan
            .admitted
            .iter()
            .map(|(_, a)| *a)
            .filter(|a| !a.is_base() && !self.prev_adapters.contains(a))
            .collect();
        let prefills: Vec<u32> = plan.admitted.iter().map(|(r, _)| r.input_tokens).collect();
        let prefill_ms = prefill_phase(&self.config, &prefills, new_adapters.len());
        let decode_ms = if decoding > 0 {
            decode_time(&self.config, decoding)
        } else {
            0.0
        };
        let step_duration = prefill_ms + decode_ms;
        let first_at = start + prefill_ms;
        let end = start + step_duration;

        let mut tokens = Vec::with_capacity(decoding + plan.admitted.len());
        let mut finished = Vec::new();
        let mut mask = Vec::with_capacity(decoding + plan.admitted.len());
        let mut step_adapters = BTreeSet::new();

        let mut survivors = Vec::with_capacity(decoding + plan.admitted.len());
        for mut seq in std::mem::take(&mut self.batch) {
            mask.push(MaskEntry {
                request_id: seq.request.id,
                request_adapter: seq.request.adapter,
                slot_adapter: seq.adapter,
            });
            step_adapters.insert(seq.adapter);
            tokens.push(TokenEvent {
                request_id: seq.request.id,
                token_index: seq.tokens_emitted,
                at_ms: end,
            });
            seq.tokens_emitted += 1;
            if seq.tokens_emitted >= seq.request.max_new_tokens {
                finished.push(finish(&seq, end));
            } else {
                survivors.push(seq);
            }
        }

        let mut first_token_ids = Vec::with_capacity(plan.admitted.len());
        for (request, adapter) in plan.admitted {
            mask.push(MaskEntry {
                request_id: request.id,
                request_adapter: request.adapter,
                slot_adapter: adapter,
            });
            step_adapters.insert(adapter);
            first_token_ids.push(request.id);
            tokens.push(TokenEvent {
                request_id: request.id,
                token_index: 0,
                at_ms: first_at,
            });
            let seq = Sequence {
                request,
                adapter,
                tokens_emitted: 1,
                first_token_ms: first_at,
            };
            if seq.request.max_new_tokens <= 1 {
                finished.push(finish(&seq, first_at));
            } else {
                survivors.push(seq);
            }
        }

        for done in &finished {
            self.scheduler.on_complete(done.record.request_id)?;
        }
        self.batch = survivors;
        self.prev_adapters = step_adapters;
        self.tokens_emitted += tokens.len() as u64;
        let step = self.step;
        self.step += 1;

        Ok(Some(StepOutcome {
            step,
            start_ms: start,
            prefill_ms,
            step_duration,
            end_ms: end,
            admitted: first_token_ids.len(),
            decoded: decoding,
            new_adapters: new_adapters.len(),
            first_token_ids,
            finished,
            tokens_emitted: tokens.len(),
            tokens,
            mask,
            skipped_nonresident: plan.skipped_nonresident,
        }))
    }
}

fn finish(seq: &Sequence, at_ms: f64) -> FinishedSequence {
    FinishedSequence {
        record: RequestRecord {
            request_id: seq.request.id,
            adapter: seq.request.adapter,
            input_tokens: seq.request.input_tokens,
            output_tokens: seq.tokens_emitted,
            submit_ms: seq.request.submit_time.as_ms(),
            first_token_ms: seq.first_token_ms,
            last_token_ms: at_ms,
        },
    }
}
