use std::collections::{HashMap, HashSet};

use adapterd_core::{AdapterId, EngineConfig, Replica, Request, RequestId, VirtualTime};

/// Drives one replica with `per_adapter` closed-loop users pinned to each
/// adapter. Users with the same rank draw the same payload sequence, so
/// every adapter sees identical demand.
pub fn symmetric_run(
    cfg: &EngineConfig,
    adapters: u32,
    per_adapter: u32,
    deadline: f64,
) -> Symmetric {
    let mut replica = Replica::new(cfg, adapters, true).unwrap();
    let users = adapters * per_adapter;
    let mut load = PinnedUsers {
        adapters,
        next_id: 0,
        owner: HashMap::new(),
        sent: vec![0; users as usize],
        submitted: Vec::new(),
    };
    let mut served = vec![0u64; adapters as usize];
    let mut admitted = HashSet::new();
    for user in 0..users {
        replica.submit(load.next(user, 0.0)).unwrap();
    }
    let mut now = 0.0;
    while let Some(step) = replica
        .begin_step(VirtualTime::from_ms(now), now < deadline)
        .unwrap()
    {
        admitted.extend(step.first_token_ids.iter().copied());
        for done in &step.finished {
            served[done.record.adapter.index().unwrap() as usize] += 1;
            let user = load.owner[&done.record.request_id];
            if done.record.last_token_ms < deadline {
                replica
                    .submit(load.next(user, done.record.last_token_ms))
                    .unwrap();
            }
        }
        now = step.end_ms;
    }
    Symmetric {
        served,
        submitted: load.submitted,
        admitted,
        queued_at_end: replica.queued(),
    }
}

struct PinnedUsers {
    adapters: u32,
    next_id: u64,
    owner: HashMap<RequestId, u32>,
    sent: Vec<u32>,
    submitted: Vec<(RequestId, f64)>,
}

impl PinnedUsers {
    fn next(&mut self, user: u32, at: f64) -> Request {
        let rank = user / self.adapters;
        let k = self.sent[user as usize];
        self.sent[user as usize] += 1;
        let id = RequestId(self.next_id);
        self.next_id += 1;
        self.owner.insert(id, user);
        self.submitted.push((id, at));
        Request {
            id,
            adapter: AdapterId::new(user % self.adapters),
            input_tokens: 30 + (rank * 131 + k * 17) % 470,
            max_new_tokens: 1 + (rank * 37 + k * 53) % 120,
            submit_time: VirtualTime::from_ms(at),
        }
    }
}

pub struct Symmetric {
    pub served: Vec<u64>,
    pub submitted: Vec<(RequestId, f64)>,
    pub admitted: HashSet<RequestId>,
    pub queued_at_end: usize,
}

impl Symmetric {
    /// Largest relative distance of a per-adapter count from the mean.
    pub fn max_deviation(&self) -> f64 {
        let mean = self.served.iter().sum::<u64>() as f64 / self.served.len() as f64;
        self.served
            .iter()
            .map(|n| (*n as f64 - mean).abs() / mean)
            .fold(0.0, f64::max)
    }

    /// Requests submitted before `cutoff_ms` that were never admitted.
    pub fn starved(&self, cutoff_ms: f64) -> usize {
        self.submitted
            .iter()
            .filter(|(id, at)| *at < cutoff_ms && !self.admitted.contains(id))
            .count()
    }
}
