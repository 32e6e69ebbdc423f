//! Tiered adapter weight cache.
//!
//! Adapters live in one of four places: remote storage, local disk, CPU
//! memory, or GPU memory. A request for a non-resident adapter starts a
//! background promotion toward the GPU; the caller gets back the time at
//! which the weights will be usable and keeps serving other adapters in the
//! meantime. Promotion hops are sequential and their latencies add up.
//!
//! GPU and CPU tiers are bounded. When a load lands on a full GPU, the least
//! recently used GPU entry is demoted to CPU, which may in turn push the least
//! recently used CPU entry to disk. Disk is unbounded and in-transit entries
//! are never chosen as victims. Recency ties break on the adapter identifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::time::VirtualTime;
use crate::workload::AdapterId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Remote,
    Disk,
    Cpu,
    Gpu,
    /// Being promoted to the GPU; usable from `ready_at`.
    InTransit {
        ready_at: VirtualTime,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdapterEntry {
    pub adapter: AdapterId,
    pub tier: Tier,
    pub last_used: VirtualTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    ResidentGpu,
    Pending { ready_at: VirtualTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheEvent {
    LoadStarted {
        adapter: AdapterId,
        ready_at: VirtualTime,
    },
    Loaded {
        adapter: AdapterId,
        at: VirtualTime,
    },
    Demoted {
        adapter: AdapterId,
        from: Tier,
        to: Tier,
        at: VirtualTime,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidencyStats {
    pub remote: u32,
    pub disk: u32,
    pub cpu: u32,
    pub gpu: u32,
    pub in_transit: u32,
}

impl ResidencyStats {
    pub fn total(&self) -> u32 {
        self.remote + self.disk + self.cpu + self.gpu + self.in_transit
    }

    pub fn add(&self, other: &ResidencyStats) -> ResidencyStats {
        ResidencyStats {
            remote: self.remote + other.remote,
            disk: self.disk + other.disk,
            cpu: self.cpu + other.cpu,
            gpu: self.gpu + other.gpu,
            in_transit: self.in_transit + other.in_transit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdapterCache {
    gpu_slots: usize,
    cpu_slots: usize,
    t_download_ms: f64,
    t_disk_to_cpu_ms: f64,
    t_cpu_to_gpu_ms: f64,
    entries: BTreeMap<AdapterId, AdapterEntry>,
    clock: VirtualTime,
    events: Vec<CacheEvent>,
}

impl AdapterCache {
    /// A cache that knows `adapters`, all starting in remote storage.
    pub fn new(config: &EngineConfig, adapters: impl IntoIterator<Item = AdapterId>) -> Self {
        let entries = adapters
            .into_iter()
            .filter(|a| !a.is_base())
            .map(|adapter| {
                (
                    adapter,
                    AdapterEntry {
                        adapter,
                        tier: Tier::Remote,
                        last_used: VirtualTime::ZERO,
                    },
                )
            })
            .collect();
        AdapterCache {
            gpu_slots: config.gpu_slots as usize,
            cpu_slots: config.cpu_slots as usize,
            t_download_ms: config.t_download_ms,
            t_disk_to_cpu_ms: config.t_disk_to_cpu_ms,
            t_cpu_to_gpu_ms: config.t_cpu_to_gpu_ms,
            entries,
            clock: VirtualTime::ZERO,
            events: Vec::new(),
        }
    }

    /// Places adapters directly, filling GPU first, then CPU, then disk.
    pub fn preload(&mut self, adapters: impl IntoIterator<Item = AdapterId>) -> Result<()> {
        for adapter in adapters {
            if adapter.is_base() {
                continue;
            }
            let stats = self.residency_stats();
            let tier = if (stats.gpu as usize) < self.gpu_slots {
                Tier::Gpu
            } else if (stats.cpu as usize) < self.cpu_slots {
                Tier::Cpu
            } else {
                Tier::Disk
            };
            let entry = self
                .entries
                .get_mut(&adapter)
                .ok_or(Error::UnknownAdapter(adapter))?;
            entry.tier = tier;
        }
        Ok(())
    }

    pub fn clock(&self) -> VirtualTime {
        self.clock
    }

    pub fn entry(&self, adapter: AdapterId) -> Option<&AdapterEntry> {
        self.entries.get(&adapter)
    }

    pub fn tier(&self, adapter: AdapterId) -> Option<Tier> {
        if adapter.is_base() {
            return Some(Tier::Gpu);
        }
        self.entries.get(&adapter).map(|e| e.tier)
    }

    pub fn is_resident(&self, adapter: AdapterId) -> bool {
        self.tier(adapter) == Some(Tier::Gpu)
    }

    /// Requests `adapter` at `now`, starting a background load if needed.
    pub fn touch(&mut self, adapter: AdapterId, now: VirtualTime) -> Result<CacheOutcome> {
        if adapter.is_base() {
            return Ok(CacheOutcome::ResidentGpu);
        }
        if !self.entries.contains_key(&adapter) {
            return Err(Error::UnknownAdapter(adapter));
        }
        self.on_clock(now)?;

        let remaining = {
            let entry = self.entries.get_mut(&adapter).expect("checked above");
            entry.last_used = now;
            match entry.tier {
                Tier::Gpu => return Ok(CacheOutcome::ResidentGpu),
                Tier::InTransit { ready_at } => return Ok(CacheOutcome::Pending { ready_at }),
                Tier::Remote => self.t_download_ms + self.t_disk_to_cpu_ms + self.t_cpu_to_gpu_ms,
                Tier::Disk => self.t_disk_to_cpu_ms + self.t_cpu_to_gpu_ms,
                Tier::Cpu => self.t_cpu_to_gpu_ms,
            }
        };

        if remaining <= 0.0 {
            // Out of its old tier before a victim is chosen.
            self.entries.get_mut(&adapter).expect("checked above").tier =
                Tier::InTransit { ready_at: now };
            self.land(adapter, now);
            return Ok(CacheOutcome::ResidentGpu);
        }
        let ready_at = now + remaining;
        self.entries.get_mut(&adapter).expect("checked above").tier = Tier::InTransit { ready_at };
        self.events
            .push(CacheEvent::LoadStarted { adapter, ready_at });
        Ok(CacheOutcome::Pending { ready_at })
    }

    /// Completes every load whose `ready_at` is at or before `now`, in
    /// `(ready_at, adapter)` order.
    pub fn on_clock(&mut self, now: VirtualTime) -> Result<()> {
        if now < self.clock {
            return Err(Error::TimeRegression {
                now: now.as_ms(),
                last: self.clock.as_ms(),
            });
        }
        let mut due: Vec<(VirtualTime, AdapterId)> = self
            .entries
            .values()
            .filter_map(|e| match e.tier {
                Tier::InTransit { ready_at } if ready_at <= now => Some((ready_at, e.adapter)),
                _ => None,
            })
            .collect();
        due.sort();
        for (ready_at, adapter) in due {
            self.land(adapter, ready_at);
        }
        self.clock = now;
        Ok(())
    }

    /// Earliest pending load completion.
    pub fn next_ready_at(&self) -> Option<VirtualTime> {
        self.entries
            .values()
            .filter_map(|e| match e.tier {
                Tier::InTransit { ready_at } => Some(ready_at),
                _ => None,
            })
            .min()
    }

    pub fn residency_stats(&self) -> ResidencyStats {
        let mut stats = ResidencyStats::default();
        for e in self.entries.values() {
            match e.tier {
                Tier::Remote => stats.remote += 1,
                Tier::Disk => stats.disk += 1,
                Tier::Cpu => stats.cpu += 1,
                Tier::Gpu => stats.gpu += 1,
                Tier::InTransit { .. } => stats.in_transit += 1,
            }
        }
        stats
    }

    /// Events recorded since the last call.
    pub fn drain_events(&mut self) -> Vec<CacheEvent> {
        std::mem::take(&mut self.events)
    }

    fn count(&self, tier: Tier) -> usize {
        self.entries.values().filter(|e| e.tier == tier).count()
    }

    fn lru(&self, tier: Tier) -> Option<AdapterId> {
        self.entries
            .values()
            .filter(|e| e.tier == tier)
            .min_by_key(|e| (e.last_used, e.adapter))
            .map(|e| e.adapter)
    }

    fn demote(&mut self, adapter: AdapterId, to: Tier, at: VirtualTime) {
        let entry = self.entries.get_mut(&adapter).expect("victim exists");
        let from = entry.tier;
        entry.tier = to;
        self.events.push(CacheEvent::Demoted {
            adapter,
            from,
            to,
            at,
        });
    }

    fn land(&mut self, adapter: AdapterId, at: VirtualTime) {
        if self.count(Tier::Gpu) >= self.gpu_slots {
            if let Some(victim) = self.lru(Tier::Gpu) {
                self.demote(victim, Tier::Cpu, at);
                if self.count(Tier::Cpu) > self.cpu_slots {
                    let spill = self.lru(Tier::Cpu).expect("cpu tier non-empty");
                    self.demote(spill, Tier::Disk, at);
                }
            }
        }
        self.entries.get_mut(&adapter).expect("known adapter").tier = Tier::Gpu;
        self.events.push(CacheEvent::Loaded { adapter, at });
    }
}
