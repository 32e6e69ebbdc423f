use adapterd_bench::{calibrated, requests, sentence, workload};
use adapterd_core::profiler::rouge_l;
use adapterd_core::scheduler::Scheduler;
use adapterd_core::{run, AdapterCache, AdapterId, VirtualTime};
use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

fn cache_touch(c: &mut Criterion) {
    let cfg = calibrated();
    c.bench_function("cache_touch_50_adapters", |b| {
        b.iter_batched(
            || AdapterCache::new(&cfg, (0..50).map(AdapterId::new)),
            |mut cache| {
                for i in 0..1000u32 {
                    let t = VirtualTime::from_ms(i as f64 * 5.0);
                    black_box(cache.touch(AdapterId::new(i * 7 % 50), t).unwrap());
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn plan_admission(c: &mut Criterion) {
    let cfg = calibrated();
    let adapters = || (0..25).map(AdapterId::new);
    c.bench_function("plan_admission_500_queued", |b| {
        b.iter_batched(
            || {
                let mut cache = AdapterCache::new(&cfg, adapters());
                cache.preload(adapters()).unwrap();
                let mut scheduler = Scheduler::new();
                for r in requests(500, 25) {
                    scheduler.enqueue(r).unwrap();
                }
                (cache, scheduler)
            },
            |(mut cache, mut scheduler)| {
                for step in 0..60 {
                    let now = VirtualTime::from_ms(step as f64 * 40.0);
                    black_box(
                        scheduler
                            .plan_admission(&mut cache, now, 128, 8, step)
                            .unwrap(),
                    );
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn simulation(c: &mut Criterion) {
    let cfg = calibrated();
    let wl = workload(50, 10.0);
    c.bench_function("simulate_50_users_10s", |b| {
        b.iter(|| black_box(run(&cfg, &wl, &mut ()).unwrap()))
    });
}

fn rouge(c: &mut Criterion) {
    let a = sentence(200, 1);
    let b = sentence(200, 2);
    c.bench_function("rouge_l_200_words", |bench| {
        bench.iter(|| black_box(rouge_l(&a, &b)))
    });
}

criterion_group!(benches, cache_touch, plan_admission, simulation, rouge);
criterion_main!(benches);
