use std::net::SocketAddr;
use std::time::Duration;

use adapterd_core::metrics::derive;
use adapterd_core::{run, EngineConfig, RunReport, WorkloadConfig};
use adapterd_gateway::{bench, generate, spawn, BenchOptions, GenerateRequest, ServerConfig};
use tokio::time::Instant;

fn local() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

/// Only a constant 10 ms decode step; everything else is free.
fn ten_ms_engine() -> EngineConfig {
    EngineConfig {
        t_download_ms: 0.0,
        t_disk_to_cpu_ms: 0.0,
        t_cpu_to_gpu_ms: 0.0,
        decode_base_ms: 10.0,
        decode_per_seq_ms: 0.0,
        prefill_base_ms: 0.0,
        prefill_per_token_ms: 0.0,
        switch_overhead_ms: 0.0,
        ..Default::default()
    }
}

async fn post(url: &str, body: &str) -> (u16, String) {
    let resp = reqwest::Client::new()
        .post(format!("{url}/v1/generate"))
        .header("content-type", "application/json")
        .body(body.to_owned())
        .send()
        .await
        .unwrap();
    (resp.status().as_u16(), resp.text().await.unwrap())
}

#[tokio::test]
async fn health_and_stream_shape() {
    let server = spawn(ServerConfig::new(ten_ms_engine(), 3), local())
        .await
        .unwrap();
    let url = server.url();
    let health = reqwest::get(format!("{url}/healthz")).await.unwrap();
    assert_eq!(health.status().as_u16(), 200);
    assert_eq!(health.text().await.unwrap(), "ok");

    let (status, body) = post(
        &url,
        r#"{"input_tokens":1,"max_new_tokens":1,"stream":true}"#,
    )
    .await;
    assert_eq!(status, 200);
    assert_eq!(body, "data: {\"token_index\":0}\n\ndata: [DONE]\n\n");

    let client = reqwest::Client::new();
    let req = GenerateRequest {
        adapter: Some("adapter-2".into()),
        prompt: Some("four words of prompt".into()),
        max_new_tokens: Some(5),
        ..Default::default()
    };
    let t = generate(&client, &url, &req, Instant::now()).await.unwrap();
    assert_eq!(t.token_indices, [0, 1, 2, 3, 4]);
    assert!(t.sent_ms <= t.first_ms && t.first_ms <= t.last_ms && t.last_ms <= t.done_ms);
    // Four decode steps of 10 ms between first and last token.
    assert!(t.last_ms - t.first_ms >= 39.0, "{t:?}");

    let report = fetch_report(&url).await;
    assert_eq!(report.summary.request_count, 2);
    assert_eq!(report.config.engine, ten_ms_engine());
    server.shutdown().await.unwrap();
}

async fn fetch_report(url: &str) -> RunReport {
    let bytes = reqwest::get(format!("{url}/v1/metrics"))
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    serde_json::from_slice(&bytes)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&bytes)))
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    let server = spawn(ServerConfig::new(ten_ms_engine(), 3), local())
        .await
        .unwrap();
    let url = server.url();

    let (status, body) = post(&url, r#"{"input_tokens":0,"max_new_tokens":0}"#).await;
    assert_eq!(status, 400);
    let errors: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(errors["errors"].as_array().unwrap().len(), 2, "{body}");

    let (status, _) = post(&url, "{not json").await;
    assert_eq!(status, 400);
    let (status, _) = post(&url, r#"{"max_new_tokens":2}"#).await;
    assert_eq!(status, 400);
    let (status, _) = post(
        &url,
        r#"{"adapter":"nope","input_tokens":1,"max_new_tokens":1}"#,
    )
    .await;
    assert_eq!(status, 400);
    let (status, _) = post(
        &url,
        r#"{"adapter":"adapter-3","input_tokens":1,"max_new_tokens":1}"#,
    )
    .await;
    assert_eq!(status, 404);

    let (status, body) = post(
        &url,
        r#"{"input_tokens":3,"max_new_tokens":3,"stream":false}"#,
    )
    .await;
    assert_eq!(status, 200);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["tokens"], 3);
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn one_user_bench_identity() {
    let server = spawn(ServerConfig::new(ten_ms_engine(), 0), local())
        .await
        .unwrap();
    let workload = WorkloadConfig {
        n_adapters: 0,
        users: 1,
        duration_ms: 2_000.0,
        output_tokens_max: 20,
        seed: 4,
        ..Default::default()
    };
    let out = bench(vec![server.url()], BenchOptions::new(workload))
        .await
        .unwrap();
    assert!(!out.samples.is_empty());
    assert_eq!(out.report.failures, 0);
    for s in &out.samples {
        let d = derive(&s.record);
        let total = s.done_ms - s.record.submit_ms;
        assert!((total - (d.ttft_ms + d.streaming_ms)).abs() <= 5.0, "{s:?}");
    }
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn round_robin_across_two_services() {
    let a = spawn(ServerConfig::new(ten_ms_engine(), 0), local())
        .await
        .unwrap();
    let b = spawn(ServerConfig::new(ten_ms_engine(), 0), local())
        .await
        .unwrap();
    let workload = WorkloadConfig {
        n_adapters: 0,
        users: 1,
        duration_ms: 1_500.0,
        output_tokens_max: 8,
        ..Default::default()
    };
    let out = bench(vec![a.url(), b.url()], BenchOptions::new(workload))
        .await
        .unwrap();
    let counts = &out.report.per_replica;
    assert_eq!(counts.len(), 2);
    assert!(counts[0] + counts[1] >= 4);
    assert!(counts[0].abs_diff(counts[1]) <= 1, "{counts:?}");
    a.shutdown().await.unwrap();
    b.shutdown().await.unwrap();
}

#[tokio::test]
async fn dead_endpoint_counts_failures() {
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind(local())
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut options = BenchOptions::new(WorkloadConfig {
        users: 2,
        duration_ms: 300.0,
        ..Default::default()
    });
    options.retry_pause = Duration::from_millis(20);
    let out = bench(vec![format!("http://127.0.0.1:{port}")], options)
        .await
        .unwrap();
    assert!(out.report.failures > 0);
    assert_eq!(out.report.failures as usize, out.errors.len());
    assert!(out.report.summary.is_empty());
    assert!(out.samples.is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn live_tracks_virtual_time() {
    let engine = ten_ms_engine();
    let workload = WorkloadConfig {
        n_adapters: 0,
        users: 1,
        duration_ms: 2_500.0,
        output_tokens_max: 40,
        seed: 9,
        ..Default::default()
    };
    let server = spawn(ServerConfig::new(engine.clone(), 0), local())
        .await
        .unwrap();
    let live = bench(vec![server.url()], BenchOptions::new(workload.clone()))
        .await
        .unwrap();
    server.shutdown().await.unwrap();
    let virt = run(&engine, &workload, &mut ()).unwrap();

    // Same seed, same payload sequence: compare request by request over the
    // prefix both runs completed.
    let n = live.samples.len().min(virt.records.len());
    assert!(n >= 5, "only {n} requests");
    let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
    let live_total = mean(
        live.samples[..n]
            .iter()
            .map(|s| derive(&s.record).total_ms)
            .collect(),
    );
    let virt_total = mean(
        virt.records[..n]
            .iter()
            .map(|r| derive(r).total_ms)
            .collect(),
    );
    for (s, r) in live.samples[..n].iter().zip(&virt.records[..n]) {
        assert_eq!(s.record.output_tokens, r.output_tokens);
    }
    let off = (live_total - virt_total).abs() / virt_total;
    assert!(
        off <= 0.10,
        "live {live_total:.2} vs virtual {virt_total:.2}"
    );
}
