//! Serving engine: latency model, one replica's step loop, and the
//! discrete-event driver.
//!
//! A step has two phases. First the requests admitted at the step boundary
//! are prefilled together; each emits its first token when the prefill phase
//! ends. Then every sequence that was already decoding emits one more token.
//! Both phases are charged to the same step, so a heavy admission delays the
//! whole batch.

mod replica;
mod sim;

pub use replica::{FinishedSequence, MaskEntry, Replica, Sequence, StepOutcome, TokenEvent};
pub use sim::{run, run_replicas, run_scenario, StepObserver};

use crate::config::EngineConfig;
use crate::error::{Error, Result};

/// Time to prefill one request of `input_tokens` tokens.
pub fn prefill_time(config: &EngineConfig, input_tokens: u32) -> f64 {
    config.prefill_base_ms + config.prefill_per_token_ms * input_tokens as f64
}

/// Cost of one decode pass over `batch_size` sequences.
pub fn decode_time(config: &EngineConfig, batch_size: usize) -> f64 {
    config.decode_base_ms + config.decode_per_seq_ms * batch_size as f64
}

/// Duration of one step.
///
/// `batch_size` counts sequences that decode in this step (admitted requests
/// are not among them; they are covered by `prefills`). It may be zero only
/// when something is being prefilled.
pub fn step_duration(
    config: &EngineConfig,
    batch_size: usize,
    prefills: &[u32],
    new_adapters: usize,
) -> Result<f64> {
    if batch_size == 0 && prefills.is_empty() {
        return Err(Error::EmptyStep);
    }
    Ok(prefill_phase(config, prefills, new_adapters)
        + if batch_size > 0 {
            decode_time(config, batch_size)
        } else {
            0.0
        })
}

pub(crate) fn prefill_phase(config: &EngineConfig, prefills: &[u32], new_adapters: usize) -> f64 {
    prefills
        .iter()
        .map(|&n| prefill_time(config, n))
        .sum::<f64>()
        + config.switch_overhead_ms * new_adapters as f64
}

/// Client-observed timings of a lone request on an idle replica whose
/// adapter is resident and already in use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timeline {
    pub ttft_ms: f64,
    pub streaming_ms: f64,
    pub total_ms: f64,
}

pub fn single_request_timeline(
    config: &EngineConfig,
    input_tokens: u32,
    output_tokens: u32,
) -> Result<Timeline> {
    if output_tokens == 0 {
        return Err(Error::ZeroCount("output_tokens"));
    }
    if input_tokens == 0 {
        return Err(Error::ZeroCount("input_tokens"));
    }
    let ttft_ms = config.request_overhead_ms + prefill_time(config, input_tokens);
    let streaming_ms = (output_tokens - 1) as f64 * decode_time(config, 1);
    Ok(Timeline {
        ttft_ms,
        streaming_ms,
        total_ms: ttft_ms + streaming_ms,
    })
}
