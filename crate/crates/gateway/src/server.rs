use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use adapterd_core::{AdapterId, EngineConfig, RunReport};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::engine::{Command, Emit, EngineLoop, Submission};
use crate::error::{Error, Result};

/// What one service instance runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub engine: EngineConfig,
    pub n_adapters: u32,
    /// Preload every adapter before accepting traffic.
    pub warm_start: bool,
}

impl ServerConfig {
    pub fn new(engine: EngineConfig, n_adapters: u32) -> Self {
        ServerConfig {
            engine,
            n_adapters,
            warm_start: false,
        }
    }
}

/// Body of `POST /v1/generate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    /// `adapter-N`, `base`, or absent for the base model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_tokens: Option<u32>,
    /// Used for its whitespace token count when `input_tokens` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_new_tokens: Option<u32>,
    #[serde(default = "yes")]
    pub stream: bool,
}

fn yes() -> bool {
    true
}

struct Checked {
    adapter: AdapterId,
    input_tokens: u32,
    max_new_tokens: u32,
}

fn check(req: &GenerateRequest) -> std::result::Result<Checked, Vec<String>> {
    let mut violations = Vec::new();
    let adapter = match req.adapter.as_deref() {
        None => AdapterId::BASE,
        Some(s) => s.parse().unwrap_or_else(|_| {
            violations.push("adapter: expected adapter-N or base".to_owned());
            AdapterId::BASE
        }),
    };
    let input_tokens = match (req.input_tokens, req.prompt.as_deref()) {
        (Some(0), _) => {
            violations.push("input_tokens: must be at least 1".to_owned());
            0
        }
        (Some(n), _) => n,
        (None, Some(p)) => {
            let n = p.split_whitespace().count() as u32;
            if n == 0 {
                violations.push("prompt: must contain at least one token".to_owned());
            }
            n
        }
        (None, None) => {
            violations.push("input_tokens: required unless prompt is given".to_owned());
            0
        }
    };
    let max_new_tokens = match req.max_new_tokens {
        Some(n) if n >= 1 => n,
        Some(_) => {
            violations.push("max_new_tokens: must be at least 1".to_owned());
            0
        }
        None => {
            violations.push("max_new_tokens: required".to_owned());
            0
        }
    };
    if violations.is_empty() {
        Ok(Checked {
            adapter,
            input_tokens,
            max_new_tokens,
        })
    } else {
        Err(violations)
    }
}

struct AppState {
    commands: mpsc::Sender<Command>,
    epoch: Instant,
    n_adapters: u32,
    overhead: Duration,
}

type Shared = Arc<AppState>;

fn bad_request(violations: Vec<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "errors": violations })),
    )
        .into_response()
}

async fn generate(State(app): State<Shared>, body: Bytes) -> Response {
    let submit_ms = app.epoch.elapsed().as_secs_f64() * 1000.0;
    let req: GenerateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(vec![format!("body: {e}")]),
    };
    let checked = match check(&req) {
        Ok(c) => c,
        Err(v) => return bad_request(v),
    };
    if let Some(i) = checked.adapter.index() {
        if i >= app.n_adapters {
            return (
                StatusCode::NOT_FOUND,
                Json(json!({ "errors": [format!("adapter: {} is not registered", checked.adapter)] })),
            )
                .into_response();
        }
    }
    if !app.overhead.is_zero() {
        tokio::time::sleep(app.overhead).await;
    }
    let (tx, mut rx) = mpsc::unbounded_channel();
    let submission = Submission {
        adapter: checked.adapter,
        input_tokens: checked.input_tokens,
        max_new_tokens: checked.max_new_tokens,
        submit_ms,
        events: tx,
    };
    if app
        .commands
        .send(Command::Submit(submission))
        .await
        .is_err()
    {
        return (StatusCode::SERVICE_UNAVAILABLE, "engine stopped").into_response();
    }

    if req.stream {
        let events = stream::unfold(Some(rx), |rx| async move {
            let mut rx = rx?;
            match rx.recv().await? {
                Emit::Token(i) => {
                    let event = Event::default().data(json!({ "token_index": i }).to_string());
                    Some((Ok::<_, Infallible>(event), Some(rx)))
                }
                Emit::Done => Some((Ok(Event::default().data("[DONE]")), None)),
            }
        });
        return Sse::new(events).into_response();
    }

    let mut tokens = 0u32;
    let mut first_ms = None;
    while let Some(emit) = rx.recv().await {
        match emit {
            Emit::Token(_) => {
                tokens += 1;
                first_ms.get_or_insert(app.epoch.elapsed().as_secs_f64() * 1000.0);
            }
            Emit::Done => break,
        }
    }
    let done_ms = app.epoch.elapsed().as_secs_f64() * 1000.0;
    Json(json!({
        "tokens": tokens,
        "ttft_ms": first_ms.unwrap_or(done_ms) - submit_ms,
        "total_ms": done_ms - submit_ms,
    }))
    .into_response()
}

async fn healthz() -> &'static str {
    "ok"
}

async fn metrics(State(app): State<Shared>) -> Response {
    let (tx, rx) = oneshot::channel();
    if app.commands.send(Command::Report(tx)).await.is_err() {
        return (StatusCode::SERVICE_UNAVAILABLE, "engine stopped").into_response();
    }
    match rx.await {
        Ok(report) => Json::<RunReport>(report).into_response(),
        Err(_) => (StatusCode::SERVICE_UNAVAILABLE, "engine stopped").into_response(),
    }
}

/// A running service. Dropping the handle leaves it running; call
/// [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) -> Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task
            .await
            .map_err(|e| Error::Io(std::io::Error::other(e)))??;
        Ok(())
    }

    /// Waits until the service stops on its own.
    pub async fn wait(self) -> Result<()> {
        self.task
            .await
            .map_err(|e| Error::Io(std::io::Error::other(e)))??;
        Ok(())
    }
}

fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/generate", post(generate))
        .route("/v1/metrics", get(metrics))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Binds `addr` and serves in the background. Port 0 picks a free port.
pub async fn spawn(config: ServerConfig, addr: SocketAddr) -> Result<ServerHandle> {
    adapterd_core::validate_config(
        config.engine.clone(),
        adapterd_core::WorkloadConfig {
            n_adapters: config.n_adapters,
            ..Default::default()
        },
    )?;
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let epoch = Instant::now();
    let engine = EngineLoop::new(&config.engine, config.n_adapters, config.warm_start, epoch)?;
    let (commands, rx) = mpsc::channel(1024);
    tokio::spawn(engine.run(rx));
    let state = Arc::new(AppState {
        commands,
        epoch,
        n_adapters: config.n_adapters,
        overhead: Duration::from_secs_f64(config.engine.request_overhead_ms / 1000.0),
    });
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServerHandle {
        addr,
        stop: Some(stop),
        task,
    })
}

/// `ADAPTERD_PORT` when set and valid, otherwise `default`.
pub fn port_from_env(default: u16) -> u16 {
    std::env::var("ADAPTERD_PORT")
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(default)
}

/// Serves on all interfaces until interrupted.
pub async fn serve(config: ServerConfig, port: u16) -> Result<()> {
    let port = port_from_env(port);
    let handle = spawn(config, SocketAddr::from(([0, 0, 0, 0], port))).await?;
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await
}
