//! Random touch/on_clock traces replayed against a naive tier model.

mod common;

use adapterd_core::EngineConfig;
use common::replay_cache;

#[test]
fn matches_naive_model_default_latencies() {
    let cfg = EngineConfig {
        gpu_slots: 8,
        cpu_slots: 12,
        ..Default::default()
    };
    for seed in [1, 2, 3] {
        replay_cache(&cfg, seed, 10_000, 50).unwrap();
    }
}

#[test]
fn matches_naive_model_with_instant_gpu_hop() {
    let cfg = EngineConfig {
        gpu_slots: 4,
        cpu_slots: 6,
        t_download_ms: 300.0,
        t_disk_to_cpu_ms: 20.0,
        t_cpu_to_gpu_ms: 0.0,
        ..Default::default()
    };
    replay_cache(&cfg, 99, 10_000, 50).unwrap();
}

#[test]
fn matches_naive_model_tiny_tiers() {
    let cfg = EngineConfig {
        gpu_slots: 1,
        cpu_slots: 1,
        t_download_ms: 50.0,
        t_disk_to_cpu_ms: 10.0,
        t_cpu_to_gpu_ms: 2.0,
        ..Default::default()
    };
    replay_cache(&cfg, 7, 10_000, 50).unwrap();
}
