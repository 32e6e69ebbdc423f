//! Independent reference models shared by the test suites.
//!
//! Each is written the slow, obvious way and shares no code with the crate
//! beyond its public types.
#![allow(dead_code)]

pub mod fair;
pub mod rouge;

use adapterd_core::cache::CacheEvent;
use adapterd_core::{AdapterCache, AdapterId, CacheOutcome, EngineConfig, Tier, VirtualTime};

/// Plain-vector model of the tiers: no maps, linear scans everywhere.
pub struct Naive {
    pub gpu: usize,
    pub cpu: usize,
    hops: [f64; 3],
    pub tier: Vec<Tier>,
    last: Vec<f64>,
    clock: f64,
    pub events: Vec<CacheEvent>,
}

impl Naive {
    pub fn new(cfg: &EngineConfig, n: usize) -> Self {
        Naive {
            gpu: cfg.gpu_slots as usize,
            cpu: cfg.cpu_slots as usize,
            hops: [cfg.t_download_ms, cfg.t_disk_to_cpu_ms, cfg.t_cpu_to_gpu_ms],
            tier: vec![Tier::Remote; n],
            last: vec![0.0; n],
            clock: 0.0,
            events: Vec::new(),
        }
    }

    fn id(i: usize) -> AdapterId {
        AdapterId::new(i as u32)
    }

    fn oldest(&self, tier: Tier) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.tier.len() {
            if self.tier[i] != tier {
                continue;
            }
            best = match best {
                Some(b) if self.last[b] <= self.last[i] => Some(b),
                _ => Some(i),
            };
        }
        best
    }

    fn count(&self, tier: Tier) -> usize {
        self.tier.iter().filter(|t| **t == tier).count()
    }

    fn land(&mut self, i: usize, at: f64) {
        let at_t = VirtualTime::from_ms(at);
        if self.count(Tier::Gpu) >= self.gpu {
            if let Some(v) = self.oldest(Tier::Gpu) {
                self.tier[v] = Tier::Cpu;
                self.events.push(CacheEvent::Demoted {
                    adapter: Self::id(v),
                    from: Tier::Gpu,
                    to: Tier::Cpu,
                    at: at_t,
                });
                if self.count(Tier::Cpu) > self.cpu {
                    let s = self.oldest(Tier::Cpu).unwrap();
                    self.tier[s] = Tier::Disk;
                    self.events.push(CacheEvent::Demoted {
                        adapter: Self::id(s),
                        from: Tier::Cpu,
                        to: Tier::Disk,
                        at: at_t,
                    });
                }
            }
        }
        self.tier[i] = Tier::Gpu;
        self.events.push(CacheEvent::Loaded {
            adapter: Self::id(i),
            at: at_t,
        });
    }

    pub fn on_clock(&mut self, now: f64) {
        loop {
            // Smallest (ready_at, index) still due.
            let mut next: Option<(f64, usize)> = None;
            for i in 0..self.tier.len() {
                if let Tier::InTransit { ready_at } = self.tier[i] {
                    let r = ready_at.as_ms();
                    if r <= now && next.is_none_or(|(br, _)| r < br) {
                        next = Some((r, i));
                    }
                }
            }
            match next {
                Some((r, i)) => self.land(i, r),
                None => break,
            }
        }
        self.clock = now;
    }

    pub fn touch(&mut self, i: usize, now: f64) -> CacheOutcome {
        self.on_clock(now);
        self.last[i] = now;
        let remaining = match self.tier[i] {
            Tier::Gpu => return CacheOutcome::ResidentGpu,
            Tier::InTransit { ready_at } => return CacheOutcome::Pending { ready_at },
            Tier::Remote => self.hops[0] + self.hops[1] + self.hops[2],
            Tier::Disk => self.hops[1] + self.hops[2],
            Tier::Cpu => self.hops[2],
        };
        if remaining <= 0.0 {
            self.tier[i] = Tier::InTransit {
                ready_at: VirtualTime::from_ms(now),
            };
            self.land(i, now);
            return CacheOutcome::ResidentGpu;
        }
        let ready_at = VirtualTime::from_ms(now + remaining);
        self.tier[i] = Tier::InTransit { ready_at };
        self.events.push(CacheEvent::LoadStarted {
            adapter: Self::id(i),
            ready_at,
        });
        CacheOutcome::Pending { ready_at }
    }
}

/// xorshift64*, independent of the crate's generator.
pub struct Xs(pub u64);

impl Xs {
    pub fn next(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Replays `ops` random operations on both models and reports the first
/// divergence.
pub fn replay_cache(cfg: &EngineConfig, seed: u64, ops: usize, n: usize) -> Result<(), String> {
    let mut cache = AdapterCache::new(cfg, (0..n as u32).map(AdapterId::new));
    let mut naive = Naive::new(cfg, n);
    let mut rng = Xs(seed | 1);
    let mut now = 0.0;
    for op in 0..ops {
        // Small steps with occasional long gaps so loads overlap and land.
        now += match rng.below(10) {
            0 => rng.below(3000) as f64,
            1 => 0.0,
            _ => rng.below(40) as f64 * 0.5,
        };
        let t = VirtualTime::from_ms(now);
        if rng.below(4) == 0 {
            cache.on_clock(t).unwrap();
            naive.on_clock(now);
        } else {
            // Skewed popularity: a hot set plus a long tail.
            let i = if rng.below(2) == 0 {
                rng.below(6) as usize
            } else {
                rng.below(n as u64) as usize
            };
            let got = cache.touch(AdapterId::new(i as u32), t).unwrap();
            let want = naive.touch(i, now);
            if got != want {
                return Err(format!(
                    "op {op}: touch({i}) gave {got:?}, expected {want:?}"
                ));
            }
        }
        for i in 0..n {
            let got = cache.tier(AdapterId::new(i as u32));
            if got != Some(naive.tier[i]) {
                return Err(format!(
                    "op {op}: adapter {i} in {got:?}, expected {:?}",
                    naive.tier[i]
                ));
            }
        }
        let got = cache.drain_events();
        let want = std::mem::take(&mut naive.events);
        if got != want {
            return Err(format!("op {op}: events {got:?}, expected {want:?}"));
        }
        let stats = cache.residency_stats();
        if stats.gpu as usize > naive.gpu || stats.cpu as usize > naive.cpu {
            return Err(format!("op {op}: over capacity {stats:?}"));
        }
    }
    Ok(())
}
