//! Requests, payload sampling and the closed-loop user model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::WorkloadConfig;
use crate::rng::Rng;
use crate::time::VirtualTime;

/// Adapter identifier. Adapters are numbered `0..n_adapters` and print as
/// `adapter-N`; [`AdapterId::BASE`] stands for the bare base model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdapterId(u32);

impl AdapterId {
    pub const BASE: AdapterId = AdapterId(u32::MAX);

    pub fn new(index: u32) -> Self {
        assert!(index != u32::MAX, "reserved for the base model");
        AdapterId(index)
    }

    pub fn is_base(self) -> bool {
        self == Self::BASE
    }

    pub fn index(self) -> Option<u32> {
        (!self.is_base()).then_some(self.0)
    }
}

impl fmt::Display for AdapterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index() {
            Some(i) => write!(f, "adapter-{i}"),
            None => f.write_str("base"),
        }
    }
}

impl FromStr for AdapterId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "base" {
            return Ok(AdapterId::BASE);
        }
        s.strip_prefix("adapter-")
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|&n| n != u32::MAX)
            .map(AdapterId)
            .ok_or_else(|| format!("bad adapter identifier {s:?}"))
    }
}

impl Serialize for AdapterId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AdapterId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One generation request as seen by the server.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub adapter: AdapterId,
    pub input_tokens: u32,
    pub max_new_tokens: u32,
    pub submit_time: VirtualTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Payload {
    pub adapter: AdapterId,
    pub input_tokens: u32,
    pub output_tokens: u32,
}

/// Draws one payload. Draw order is fixed: adapter (if any adapters are
/// configured), task (if task profiles are given), input length, output length.
pub fn sample_payload(rng: &mut Rng, workload: &WorkloadConfig) -> Payload {
    let adapter = if workload.n_adapters == 0 {
        AdapterId::BASE
    } else {
        AdapterId::new(rng.index(workload.n_adapters as usize) as u32)
    };
    let (in_range, out_range) = match workload.task_profiles.as_deref() {
        Some(tasks) if !tasks.is_empty() => {
            let task = &tasks[rng.index(tasks.len())];
            (
                (task.input_min, task.input_p95),
                (task.output_min, task.output_p95),
            )
        }
        _ => (
            (workload.input_tokens_min, workload.input_tokens_max),
            (workload.output_tokens_min, workload.output_tokens_max),
        ),
    };
    let draw = |rng: &mut Rng, (lo, hi): (u32, u32)| {
        rng.uniform(lo as i64, hi as i64).expect("validated range") as u32
    };
    let input_tokens = draw(rng, in_range);
    let output_tokens = draw(rng, out_range);
    Payload {
        adapter,
        input_tokens,
        output_tokens,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserPhase {
    Idle,
    Waiting(RequestId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UserAction {
    Submit(Payload),
    Wait,
    Stop,
}

/// A closed-loop user: submit, wait for the full response, resubmit at once.
#[derive(Debug, Clone)]
pub struct UserState {
    pub user_id: u32,
    pub rng: Rng,
    pub phase: UserPhase,
}

impl UserState {
    /// User `index` draws from `root.split(index)`, so its payload sequence
    /// does not depend on how the engine interleaves users.
    pub fn new(index: u32, root: &Rng) -> Self {
        UserState {
            user_id: index,
            rng: root.split(index as u64),
            phase: UserPhase::Idle,
        }
    }

    /// Advances the user at `now`. `next_id` names the request if one is submitted.
    pub fn tick(
        &mut self,
        now: VirtualTime,
        deadline: VirtualTime,
        workload: &WorkloadConfig,
        next_id: RequestId,
    ) -> UserAction {
        match self.phase {
            UserPhase::Waiting(_) => UserAction::Wait,
            UserPhase::Idle if now >= deadline => UserAction::Stop,
            UserPhase::Idle => {
                let payload = sample_payload(&mut self.rng, workload);
                self.phase = UserPhase::Waiting(next_id);
                UserAction::Submit(payload)
            }
        }
    }

    /// Marks the outstanding request as answered.
    pub fn complete(&mut self, id: RequestId) {
        debug_assert_eq!(self.phase, UserPhase::Waiting(id));
        self.phase = UserPhase::Idle;
    }
}
