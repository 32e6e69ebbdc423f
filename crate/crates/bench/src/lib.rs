//! Benchmark fixtures shared by the criterion targets.

use adapterd_core::{AdapterId, EngineConfig, Request, RequestId, VirtualTime, WorkloadConfig};

/// Engine constants used by the bundled scenarios.
pub fn calibrated() -> EngineConfig {
    EngineConfig {
        prefill_base_ms: 0.5,
        prefill_per_token_ms: 0.01,
        request_overhead_ms: 115.0,
        ..Default::default()
    }
}

pub fn workload(users: u32, seconds: f64) -> WorkloadConfig {
    WorkloadConfig {
        n_adapters: 25,
        users,
        duration_ms: seconds * 1000.0,
        warm_start: true,
        ..Default::default()
    }
}

/// `n` requests spread round the first `adapters` adapters.
pub fn requests(n: u64, adapters: u32) -> Vec<Request> {
    (0..n)
        .map(|i| Request {
            id: RequestId(i),
            adapter: AdapterId::new((i % adapters as u64) as u32),
            input_tokens: 100 + (i % 400) as u32,
            max_new_tokens: 1 + (i % 120) as u32,
            submit_time: VirtualTime::ZERO,
        })
        .collect()
}

/// Deterministic word lists for text metrics.
pub fn sentence(words: usize, seed: u64) -> String {
    let mut x = seed | 1;
    (0..words)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            format!("w{}", x % 50)
        })
        .collect::<Vec<_>>()
        .join(" ")
}
