//! Engine and workload configuration.
//!
//! Scenario files are JSON documents with `engine` and `workload` objects whose
//! keys are exactly the field names below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigViolation, Error, Result};

/// Latency model and capacity of one serving replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub gpu_slots: u32,
    pub cpu_slots: u32,
    pub t_download_ms: f64,
    pub t_disk_to_cpu_ms: f64,
    pub t_cpu_to_gpu_ms: f64,
    /// Fixed cost of one decode pass.
    pub decode_base_ms: f64,
    /// Extra decode cost per sequence in the batch.
    pub decode_per_seq_ms: f64,
    pub prefill_base_ms: f64,
    pub prefill_per_token_ms: f64,
    /// Charged once per adapter that joins the batch.
    pub switch_overhead_ms: f64,
    pub max_batch_size: u32,
    pub admission_per_step: u32,
    /// Client-to-scheduler latency that does not occupy the GPU (network,
    /// HTTP parsing, tokenization). Added before a request becomes schedulable.
    pub request_overhead_ms: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            gpu_slots: 32,
            cpu_slots: 256,
            t_download_ms: 2000.0,
            t_disk_to_cpu_ms: 200.0,
            t_cpu_to_gpu_ms: 5.0,
            decode_base_ms: 12.0,
            decode_per_seq_ms: 0.6,
            prefill_base_ms: 80.0,
            prefill_per_token_ms: 0.15,
            switch_overhead_ms: 0.1,
            max_batch_size: 128,
            admission_per_step: 8,
            request_overhead_ms: 0.0,
        }
    }
}

/// Input/output token ranges of one task, used to shape payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRange {
    pub name: String,
    pub input_min: u32,
    pub input_p95: u32,
    pub output_min: u32,
    pub output_p95: u32,
}

/// Closed-loop load shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    /// 0 routes every request to the base model.
    pub n_adapters: u32,
    pub users: u32,
    pub duration_ms: f64,
    pub input_tokens_min: u32,
    pub input_tokens_max: u32,
    pub output_tokens_min: u32,
    pub output_tokens_max: u32,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_profiles: Option<Vec<TaskRange>>,
    /// Preload every adapter before the clock starts.
    pub warm_start: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            n_adapters: 25,
            users: 1,
            duration_ms: 120_000.0,
            input_tokens_min: 30,
            input_tokens_max: 500,
            output_tokens_min: 1,
            output_tokens_max: 120,
            seed: 0,
            task_profiles: None,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Virtual,
    Live,
}

/// A named, runnable benchmark setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub workload: WorkloadConfig,
    #[serde(default = "one")]
    pub replicas: u32,
    #[serde(default)]
    pub mode: Mode,
    /// User counts swept by the `sweep` command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_sweep: Option<Vec<u32>>,
}

fn one() -> u32 {
    1
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    /// Validates the scenario. Replica counts that do not match the user
    /// count are reported back as warnings, not errors.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut violations = collect_violations(&self.engine, &self.workload, false);
        if self.replicas == 0 {
            violations.push(ConfigViolation::new("replicas", "replicas ≥ 1"));
        }
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations));
        }
        let mut warnings = Vec::new();
        if self.replicas >= 2 && self.workload.users < self.replicas {
            warnings.push(format!(
                "{} replicas but only {} users; scale users with replicas",
                self.replicas, self.workload.users
            ));
        }
        Ok(warnings)
    }
}

/// Checks every invariant of both configs and reports all violations.
pub fn validate_config(
    engine: EngineConfig,
    workload: WorkloadConfig,
) -> Result<(EngineConfig, WorkloadConfig)> {
    let violations = collect_violations(&engine, &workload, false);
    if violations.is_empty() {
        Ok((engine, workload))
    } else {
        Err(Error::InvalidConfig(violations))
    }
}

/// Same as [`validate_config`] but lets `duration_ms` be zero, which the
/// engine treats as an empty run.
pub(crate) fn validate_for_run(engine: &EngineConfig, workload: &WorkloadConfig) -> Result<()> {
    let violations = collect_violations(engine, workload, true);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(violations))
    }
}

fn collect_violations(
    engine: &EngineConfig,
    workload: &WorkloadConfig,
    allow_zero_duration: bool,
) -> Vec<ConfigViolation> {
    let mut v = Vec::new();

    if engine.gpu_slots < 1 {
        v.push(ConfigViolation::new("gpu_slots", "gpu_slots ≥ 1"));
    }
    let latencies = [
        ("t_download_ms", engine.t_download_ms),
        ("t_disk_to_cpu_ms", engine.t_disk_to_cpu_ms),
        ("t_cpu_to_gpu_ms", engine.t_cpu_to_gpu_ms),
        ("decode_base_ms", engine.decode_base_ms),
        ("decode_per_seq_ms", engine.decode_per_seq_ms),
        ("prefill_base_ms", engine.prefill_base_ms),
        ("prefill_per_token_ms", engine.prefill_per_token_ms),
        ("switch_overhead_ms", engine.switch_overhead_ms),
        ("request_overhead_ms", engine.request_overhead_ms),
    ];
    for (field, value) in latencies {
        if !value.is_finite() {
            v.push(ConfigViolation::new(field, "finite"));
        } else if value < 0.0 {
            v.push(ConfigViolation::new(field, format!("{field} ≥ 0")));
        }
    }
    if engine.decode_base_ms.is_finite() && engine.decode_base_ms <= 0.0 {
        v.push(ConfigViolation::new("decode_base_ms", "decode_base_ms > 0"));
    }
    if engine.max_batch_size < 1 {
        v.push(ConfigViolation::new("max_batch_size", "max_batch_size ≥ 1"));
    }
    if engine.admission_per_step < 1 {
        v.push(ConfigViolation::new(
            "admission_per_step",
            "admission_per_step ≥ 1",
        ));
    }

    if workload.users < 1 {
        v.push(ConfigViolation::new("users", "users ≥ 1"));
    }
    if !workload.duration_ms.is_finite() {
        v.push(ConfigViolation::new("duration_ms", "finite"));
    } else if workload.duration_ms < 0.0 || (workload.duration_ms == 0.0 && !allow_zero_duration) {
        v.push(ConfigViolation::new("duration_ms", "duration_ms > 0"));
    }
    check_range(
        &mut v,
        "input_tokens",
        workload.input_tokens_min,
        workload.input_tokens_max,
    );
    check_range(
        &mut v,
        "output_tokens",
        workload.output_tokens_min,
        workload.output_tokens_max,
    );
    if let Some(profiles) = &workload.task_profiles {
        if profiles.is_empty() {
            v.push(ConfigViolation::new(
                "task_profiles",
                "non-empty when present",
            ));
        }
        for (i, p) in profiles.iter().enumerate() {
            check_range(
                &mut v,
                &format!("task_profiles[{i}].input"),
                p.input_min,
                p.input_p95,
            );
            check_range(
                &mut v,
                &format!("task_profiles[{i}].output"),
                p.output_min,
                p.output_p95,
            );
        }
    }
    v
}

fn check_range(v: &mut Vec<ConfigViolation>, field: &str, min: u32, max: u32) {
    if min < 1 {
        v.push(ConfigViolation::new(format!("{field}_min"), "min ≥ 1"));
    }
    if min > max {
        v.push(ConfigViolation::new(field, "min ≤ max"));
    }
}
