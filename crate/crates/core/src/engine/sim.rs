use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::balance::ReplicaSet;
use crate::config::{validate_for_run, EngineConfig, Scenario, WorkloadConfig};
use crate::error::Result;
use crate::metrics::{merge, ConfigEcho, RequestRecord, RunReport};
use crate::rng::Rng;
use crate::time::VirtualTime;
use crate::workload::{Request, RequestId, UserAction, UserState};

use super::{Replica, StepOutcome};

/// Hook called after every step the driver starts.
pub trait StepObserver {
    fn on_step(&mut self, replica: usize, outcome: &StepOutcome);
}

impl StepObserver for () {
    fn on_step(&mut self, _: usize, _: &StepOutcome) {}
}

impl<F: FnMut(usize, &StepOutcome)> StepObserver for F {
    fn on_step(&mut self, replica: usize, outcome: &StepOutcome) {
        self(replica, outcome)
    }
}

#[derive(Debug)]
enum Kind {
    /// A user's request finished; the user may resubmit.
    Completion {
        user: u32,
        id: RequestId,
    },
    /// A request reaches a replica's scheduler.
    Arrival {
        replica: usize,
        request: Request,
    },
    StepEnd {
        replica: usize,
    },
    Wake {
        replica: usize,
    },
}

impl Kind {
    // Same-instant order: users react to completions, arrivals are queued,
    // then replicas pick their next step.
    fn class(&self) -> u8 {
        match self {
            Kind::Completion { .. } => 0,
            Kind::Arrival { .. } => 1,
            Kind::StepEnd { .. } | Kind::Wake { .. } => 2,
        }
    }
}

#[derive(Debug)]
struct Event {
    at: VirtualTime,
    seq: u64,
    kind: Kind,
}

impl Event {
    fn key(&self) -> (VirtualTime, u8, u64) {
        (self.at, self.kind.class(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other.key().cmp(&self.key())
    }
}

struct Node {
    replica: Replica,
    busy: bool,
    wake_at: Option<VirtualTime>,
    records: Vec<RequestRecord>,
}

struct Driver<'a, O: StepObserver> {
    workload: &'a WorkloadConfig,
    overhead_ms: f64,
    deadline: VirtualTime,
    nodes: Vec<Node>,
    users: Vec<UserState>,
    owner: HashMap<RequestId, u32>,
    balancer: ReplicaSet<usize>,
    queue: BinaryHeap<Event>,
    seq: u64,
    next_request: u64,
    last_event: VirtualTime,
    observer: &'a mut O,
}

impl<O: StepObserver> Driver<'_, O> {
    fn push(&mut self, at: VirtualTime, kind: Kind) {
        self.seq += 1;
        self.queue.push(Event {
            at,
            seq: self.seq,
            kind,
        });
    }

    fn tick_user(&mut self, user: u32, now: VirtualTime) {
        let id = RequestId(self.next_request);
        let action = self.users[user as usize].tick(now, self.deadline, self.workload, id);
        if let UserAction::Submit(payload) = action {
            self.next_request += 1;
            self.owner.insert(id, user);
            let (replica, _) = self.balancer.pick();
            let request = Request {
                id,
                adapter: payload.adapter,
                input_tokens: payload.input_tokens,
                max_new_tokens: payload.output_tokens,
                submit_time: now,
            };
            self.push(now + self.overhead_ms, Kind::Arrival { replica, request });
        }
    }

    fn try_start(&mut self, index: usize, now: VirtualTime) -> Result<()> {
        let admit = now < self.deadline;
        let node = &mut self.nodes[index];
        if node.busy {
            return Ok(());
        }
        if !admit {
            node.replica.discard_queued();
        }
        match node.replica.begin_step(now, admit)? {
            Some(outcome) => {
                node.busy = true;
                let end = VirtualTime::from_ms(outcome.end_ms);
                let mut completions = Vec::with_capacity(outcome.finished.len());
                for done in &outcome.finished {
                    node.records.push(done.record.clone());
                    let id = done.record.request_id;
                    completions.push((VirtualTime::from_ms(done.record.last_token_ms), id));
                }
                self.observer.on_step(index, &outcome);
                self.push(end, Kind::StepEnd { replica: index });
                for (at, id) in completions {
                    let user = self.owner.remove(&id).expect("request has an owner");
                    self.push(at, Kind::Completion { user, id });
                }
            }
            None => {
                let wake = node.replica.next_wake();
                if let Some(at) = wake.filter(|_| wake != node.wake_at) {
                    node.wake_at = wake;
                    self.push(at, Kind::Wake { replica: index });
                }
            }
        }
        Ok(())
    }

    fn drive(&mut self) -> Result<()> {
        for user in 0..self.users.len() as u32 {
            self.tick_user(user, VirtualTime::ZERO);
        }
        while let Some(event) = self.queue.pop() {
            let now = event.at;
            self.last_event = now;
            match event.kind {
                Kind::Completion { user, id } => {
                    self.users[user as usize].complete(id);
                    self.tick_user(user, now);
                }
                Kind::Arrival { replica, request } => {
                    if now < self.deadline {
                        self.nodes[replica].replica.submit(request)?;
                        if !self.nodes[replica].busy {
                            self.push(now, Kind::Wake { replica });
                        }
                    }
                }
                Kind::StepEnd { replica } => {
                    self.nodes[replica].busy = false;
                    self.try_start(replica, now)?;
                }
                Kind::Wake { replica } => {
                    if self.nodes[replica].wake_at == Some(now) {
                        self.nodes[replica].wake_at = None;
                    }
                    self.try_start(replica, now)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs closed-loop users against `replicas` independent engines, routing
/// requests round-robin. Returns one report per replica.
pub fn run_replicas<O: StepObserver>(
    engine: &EngineConfig,
    workload: &WorkloadConfig,
    replicas: usize,
    observer: &mut O,
) -> Result<Vec<RunReport>> {
    validate_for_run(engine, workload)?;
    let replicas = replicas.max(1);
    let nodes = (0..replicas)
        .map(|_| {
            Ok(Node {
                replica: Replica::new(engine, workload.n_adapters, workload.warm_start)?,
                busy: false,
                wake_at: None,
                records: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let root = Rng::new(workload.seed);
    let mut driver = Driver {
        workload,
        overhead_ms: engine.request_overhead_ms,
        deadline: VirtualTime::from_ms(workload.duration_ms),
        nodes,
        users: (0..workload.users)
            .map(|i| UserState::new(i, &root))
            .collect(),
        owner: HashMap::new(),
        balancer: ReplicaSet::new((0..replicas).collect())?,
        queue: BinaryHeap::new(),
        seq: 0,
        next_request: 0,
        last_event: VirtualTime::ZERO,
        observer,
    };
    driver.drive()?;

    let elapsed = driver.last_event.as_ms().max(workload.duration_ms);
    let echo = ConfigEcho {
        engine: engine.clone(),
        workload: workload.clone(),
    };
    Ok(driver
        .nodes
        .into_iter()
        .map(|node| {
            RunReport::new(
                echo.clone(),
                node.records,
                node.replica.cache().residency_stats(),
                elapsed,
            )
        })
        .collect())
}

/// Single-replica run.
pub fn run<O: StepObserver>(
    engine: &EngineConfig,
    workload: &WorkloadConfig,
    observer: &mut O,
) -> Result<RunReport> {
    let mut reports = run_replicas(engine, workload, 1, observer)?;
    Ok(reports.pop().expect("one replica"))
}

/// Runs a scenario in virtual time and merges the replica reports.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    let reports = run_replicas(
        &scenario.engine,
        &scenario.workload,
        scenario.replicas as usize,
        &mut (),
    )?;
    merge(&reports)
}
