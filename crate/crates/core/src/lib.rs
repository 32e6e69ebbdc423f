//! Core of `adapterd`: a multi-adapter (LoRA) serving model.
//!
//! The crate holds the pieces every front end shares:
//!
//! * [`config`] - engine/workload configuration and validation
//! * [`rng`] - the SplitMix64 generator all traces are derived from
//! * [`cache`] - tiered GPU/CPU/disk adapter residency with LRU demotion
//! * [`scheduler`] - per-adapter FIFO queues and fair admission
//! * [`engine`] - the step latency model, a single serving replica and the
//!   discrete-event driver that runs closed-loop users against replicas
//! * [`workload`] - payload sampling and the closed-loop user model
//! * [`metrics`] - per-request records, summaries and run reports
//! * [`balance`] - round-robin replica selection
//! * [`profiler`] - task-complexity heuristics and lift regression

pub mod balance;
pub mod cache;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod profiler;
pub mod rng;
pub mod scheduler;
pub mod time;
pub mod workload;

pub use balance::ReplicaSet;
pub use cache::{AdapterCache, CacheOutcome, ResidencyStats, Tier};
pub use config::{validate_config, EngineConfig, Scenario, WorkloadConfig};
pub use engine::{run, run_replicas, Replica, StepOutcome};
pub use error::{ConfigViolation, Error, Result};
pub use metrics::{RequestRecord, RunReport, SummaryStats};
pub use rng::Rng;
pub use time::VirtualTime;
pub use workload::{AdapterId, Payload, Request, RequestId};
