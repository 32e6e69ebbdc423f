//! Continuous multi-adapter admission.
//!
//! Each adapter has its own FIFO. At every step the scheduler sweeps the
//! adapters with queued work, least recently served first (ties by adapter
//! id), taking one head-of-queue request per resident adapter per pass until
//! the step budget or the free batch slots run out. Adapters whose weights are
//! not on the GPU get a background load started and sit the step out.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::cache::{AdapterCache, CacheOutcome};
use crate::error::{Error, Result};
use crate::time::VirtualTime;
use crate::workload::{AdapterId, Request, RequestId};

#[derive(Debug, Clone)]
pub struct AdapterQueue {
    pub adapter: AdapterId,
    pub pending: VecDeque<Request>,
    /// Step at which this adapter last contributed a request, -1 if never.
    pub last_served_step: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmissionPlan {
    /// Admitted requests, each bound to the adapter whose queue it came from.
    pub admitted: Vec<(Request, AdapterId)>,
    pub skipped_nonresident: BTreeSet<AdapterId>,
    /// Earliest completion among loads this plan is waiting on.
    pub next_ready_at: Option<VirtualTime>,
}

#[derive(Debug, Clone, Default)]
pub struct Scheduler {
    queues: BTreeMap<AdapterId, AdapterQueue>,
    queued: HashSet<RequestId>,
    in_flight: HashSet<RequestId>,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, request: Request) -> Result<()> {
        if self.queued.contains(&request.id) || self.in_flight.contains(&request.id) {
            return Err(Error::DuplicateRequest(request.id));
        }
        self.queued.insert(request.id);
        self.queues
            .entry(request.adapter)
            .or_insert_with(|| AdapterQueue {
                adapter: request.adapter,
                pending: VecDeque::new(),
                last_served_step: -1,
            })
            .pending
            .push_back(request);
        Ok(())
    }

    pub fn queue(&self, adapter: AdapterId) -> Option<&AdapterQueue> {
        self.queues.get(&adapter)
    }

    pub fn queue_count(&self) -> usize {
        self.queues.len()
    }

    pub fn queued_len(&self) -> usize {
        self.queued.len()
    }

    pub fn in_flight_len(&self) -> usize {
        self.in_flight.len()
    }

    pub fn is_in_flight(&self, id: RequestId) -> bool {
        self.in_flight.contains(&id)
    }

    pub fn plan_admission(
        &mut self,
        cache: &mut AdapterCache,
        now: VirtualTime,
        free_slots: usize,
        budget: usize,
        step: i64,
    ) -> Result<AdmissionPlan> {
        let limit = free_slots.min(budget);
        let mut plan = AdmissionPlan::default();

        let mut order: Vec<(i64, AdapterId)> = self
            .queues
            .values()
            .filter(|q| !q.pending.is_empty())
            .map(|q| (q.last_served_step, q.adapter))
            .collect();
        order.sort();

        let mut contributed = BTreeSet::new();
        'sweep: loop {
            let mut progress = false;
            for &(_, adapter) in &order {
                if plan.admitted.len() >= limit {
                    break 'sweep;
                }
                if plan.skipped_nonresident.contains(&adapter) {
                    continue;
                }
                let queue = self.queues.get_mut(&adapter).expect("ordered from queues");
                if queue.pending.is_empty() {
                    continue;
                }
                match cache.touch(adapter, now)? {
                    CacheOutcome::ResidentGpu => {
                        let request = queue.pending.pop_front().expect("non-empty");
                        self.queued.remove(&request.id);
                        self.in_flight.insert(request.id);
                        plan.admitted.push((request, adapter));
                        contributed.insert(adapter);
                        progress = true;
                    }
                    CacheOutcome::Pending { ready_at } => {
                        plan.skipped_nonresident.insert(adapter);
                        plan.next_ready_at =
                            Some(plan.next_ready_at.map_or(ready_at, |t| t.min(ready_at)));
                    }
                }
            }
            if !progress {
                break;
            }
        }

        for adapter in contributed {
            self.queues
                .get_mut(&adapter)
                .expect("exists")
                .last_served_step = step;
        }
        Ok(plan)
    }

    pub fn on_complete(&mut self, id: RequestId) -> Result<()> {
        if self.in_flight.remove(&id) {
            Ok(())
        } else {
            Err(Error::UnknownRequest(id))
        }
    }

    /// Drops every queued (not yet admitted) request and returns them.
    pub fn discard_queued(&mut self) -> Vec<Request> {
        self.queued.clear();
        self.queues
            .values_mut()
            .flat_map(|q| q.pending.drain(..))
            .collect()
    }
}
