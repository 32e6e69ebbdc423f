//! Whole-run properties of the virtual-time driver.

use std::collections::HashSet;

use adapterd_core::metrics::derive;
use adapterd_core::{run, run_replicas, EngineConfig, StepOutcome, WorkloadConfig};

mod common;

use common::fair::symmetric_run;

fn calibrated() -> EngineConfig {
    EngineConfig {
        prefill_base_ms: 0.5,
        prefill_per_token_ms: 0.01,
        request_overhead_ms: 115.0,
        ..Default::default()
    }
}

fn workload(users: u32, n_adapters: u32, seconds: f64, warm: bool) -> WorkloadConfig {
    WorkloadConfig {
        n_adapters,
        users,
        duration_ms: seconds * 1000.0,
        seed: 11,
        warm_start: warm,
        ..Default::default()
    }
}

#[derive(Default)]
struct Trace {
    steps: Vec<(usize, StepOutcome)>,
}

#[test]
fn steps_are_consistent() {
    let cfg = EngineConfig {
        gpu_slots: 6,
        cpu_slots: 10,
        ..calibrated()
    };
    let wl = workload(40, 25, 30.0, false);
    let mut trace = Trace::default();
    let reports = run_replicas(&cfg, &wl, 2, &mut |r: usize, s: &StepOutcome| {
        trace.steps.push((r, s.clone()))
    })
    .unwrap();

    let mut last_end = [f64::NEG_INFINITY; 2];
    let mut admitted = 0;
    let mut finished = 0;
    let mut started = HashSet::new();
    for (replica, s) in &trace.steps {
        // Clock monotonicity: steps never overlap and never run backwards.
        assert!(s.start_ms >= last_end[*replica]);
        assert!(s.end_ms >= s.start_ms);
        assert!((s.end_ms - s.start_ms - s.step_duration).abs() < 1e-9);
        last_end[*replica] = s.end_ms;

        // Mask integrity: every slot runs its own request's adapter.
        for m in &s.mask {
            assert_eq!(m.request_adapter, m.slot_adapter, "{:?}", m.request_id);
        }
        assert!(s.decoded + s.admitted <= cfg.max_batch_size as usize);
        assert!(s.admitted <= cfg.admission_per_step as usize);
        // Closed loop: never more live requests than users.
        assert!(s.decoded + s.admitted <= wl.users as usize);
        for id in &s.first_token_ids {
            assert!(started.insert(*id), "first token twice for {id:?}");
        }
        admitted += s.admitted;
        finished += s.finished.len();
    }
    // Conservation: everything admitted finished, everything finished is reported.
    assert_eq!(admitted, finished);
    let reported: usize = reports.iter().map(|r| r.records.len()).sum();
    assert_eq!(reported, finished);
    for report in &reports {
        let per_adapter: u64 = report.per_adapter.values().sum();
        assert_eq!(per_adapter, report.summary.request_count);
        assert_eq!(report.cache.total(), 25);
    }
}

#[test]
fn record_identities_hold_exactly() {
    for (users, adapters) in [(1, 0), (10, 25), (50, 5)] {
        let report = run(
            &calibrated(),
            &workload(users, adapters, 20.0, false),
            &mut (),
        )
        .unwrap();
        for r in &report.records {
            let d = derive(r);
            assert_eq!(d.total_ms, d.ttft_ms + d.streaming_ms);
            assert!(r.submit_ms <= r.first_token_ms);
            assert!(r.first_token_ms <= r.last_token_ms);
            assert!(r.output_tokens >= 1);
        }
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let wl = workload(20, 25, 15.0, false);
    let a = run(&calibrated(), &wl, &mut ()).unwrap().to_json().unwrap();
    let b = run(&calibrated(), &wl, &mut ()).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let other = WorkloadConfig { seed: 12, ..wl };
    let c = run(&calibrated(), &other, &mut ())
        .unwrap()
        .to_json()
        .unwrap();
    assert_ne!(a, c);
}

#[test]
fn fairness_across_adapters() {
    let deadline = 120_000.0;
    for cfg in [
        calibrated(),
        // Batch far smaller than the user count: adapters compete for slots.
        EngineConfig {
            max_batch_size: 16,
            admission_per_step: 3,
            ..calibrated()
        },
    ] {
        let run = symmetric_run(&cfg, 25, 4, deadline);
        let mean = run.served.iter().sum::<u64>() as f64 / 25.0;
        assert!(mean > 50.0);
        for (adapter, n) in run.served.iter().enumerate() {
            let off = (*n as f64 - mean).abs() / mean;
            assert!(off <= 0.10, "adapter {adapter}: {n} vs mean {mean:.1}");
        }
        // No starvation: whatever was submitted well before the deadline got
        // admitted, and nothing admitted is left unfinished.
        for (id, at) in &run.submitted {
            if *at < deadline - 30_000.0 {
                assert!(
                    run.admitted.contains(id),
                    "{id:?} submitted at {at} never ran"
                );
            }
        }
        assert!(run.queued_at_end <= 100);
    }
}

#[test]
fn sampled_load_reaches_every_adapter() {
    let wl = workload(100, 25, 120.0, true);
    let report = run(&calibrated(), &wl, &mut ()).unwrap();
    assert_eq!(report.per_adapter.len(), 25);
    // Queueing delay stays within a few steps under the default batch size.
    let worst_ttft = report
        .records
        .iter()
        .map(|r| derive(r).ttft_ms)
        .fold(0.0, f64::max);
    assert!(worst_ttft < 1_000.0, "worst ttft {worst_ttft}");
}
