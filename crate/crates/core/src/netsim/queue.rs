//! Drop-tail FIFO service station with optional capacity fading and a
//! per-flow setup cost.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sched::Micros;

/// Two-state (good/bad) Markov modulation of a leg's service rate.
///
/// Sojourn times in each state are exponential. The schedule is drawn
/// from its own RNG stream, so it does not depend on the traffic offered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fading {
    /// Service rate while degraded, bytes/s.
    pub bad_rate: f64,
    pub mean_good_s: f64,
    pub mean_bad_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueParams {
    pub capacity_pkts: usize,
    /// Bytes per second.
    pub service_rate: f64,
    pub prop_delay_us: Micros,
    #[serde(default)]
    pub fading: Option<Fading>,
    /// Extra service time for a packet whose flow is not in the flow cache.
    #[serde(default)]
    pub flow_setup_us: Micros,
    /// Flow cache entries (LRU). Ignored when `flow_setup_us` is 0.
    #[serde(default)]
    pub flow_cache: usize,
}

impl QueueParams {
    pub fn simple(capacity_pkts: usize, service_rate: f64, prop_delay_us: Micros) -> Self {
        Self {
            capacity_pkts,
            service_rate,
            prop_delay_us,
            fading: None,
            flow_setup_us: 0,
            flow_cache: 0,
        }
    }
}

/// Service time at `rate` bytes/s, rounded up to whole microseconds.
pub fn service_time_us(size_bytes: usize, rate: f64) -> Micros {
    (size_bytes as f64 * 1e6 / rate).ceil() as Micros
}

#[derive(Debug)]
struct RateSchedule {
    good_rate: f64,
    fading: Option<Fading>,
    rng: ChaCha8Rng,
    /// (start, is_good) of the current segment, and its end.
    seg_start: Micros,
    seg_end: Micros,
    good: bool,
}

impl RateSchedule {
    fn new(good_rate: f64, fading: Option<Fading>, seed: u64) -> Self {
        let mut s = Self {
            good_rate,
            fading,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seg_start: 0,
            seg_end: Micros::MAX,
            good: true,
        };
        if let Some(f) = fading {
            s.seg_end = s.draw(f.mean_good_s);
        }
        s
    }

    fn draw(&mut self, mean_s: f64) -> Micros {
        let u: f64 = self.rng.random::<f64>();
        let d = -(1.0 - u).ln() * mean_s * 1e6;
        (d.ceil() as Micros).max(1)
    }

    /// Rate in effect at `t`. Queries must be nondecreasing in `t`.
    fn rate_at(&mut self, t: Micros) -> f64 {
        let Some(f) = self.fading else {
            return self.good_rate;
        };
        while t >= self.seg_end {
            self.good = !self.good;
            self.seg_start = self.seg_end;
            let mean = if self.good { f.mean_good_s } else { f.mean_bad_s };
            self.seg_end = self.seg_start + self.draw(mean);
        }
        if self.good { self.good_rate } else { f.bad_rate }
    }
}

/// Small LRU set of flow keys.
#[derive(Debug, Default)]
struct FlowCache {
    cap: usize,
    entries: VecDeque<u64>,
}

impl FlowCache {
    /// Returns true on a hit. Inserts on a miss.
    fn touch(&mut self, key: u64) -> bool {
        if let Some(i) = self.entries.iter().position(|&k| k == key) {
            self.entries.remove(i);
            self.entries.push_back(key);
            return true;
        }
        if self.entries.len() >= self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back(key);
        false
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub arrivals: u64,
    pub departures: u64,
    pub drops: u64,
    pub flow_misses: u64,
}

/// Result of offering a packet to a queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    /// Accepted; service starts at `start` and the last bit leaves at `depart`.
    Accepted { start: Micros, depart: Micros },
    Dropped,
}

#[derive(Debug)]
pub struct LinkQueue {
    pub params: QueueParams,
    /// Departure times of packets still in the system, FIFO.
    in_system: VecDeque<Micros>,
    last_departure: Micros,
    schedule: RateSchedule,
    flows: FlowCache,
    stats: QueueStats,
}

impl LinkQueue {
    pub fn new(params: QueueParams, seed: u64) -> Self {
        Self {
            params,
            in_system: VecDeque::new(),
            last_departure: 0,
            schedule: RateSchedule::new(params.service_rate, params.fading, seed),
            flows: FlowCache {
                cap: params.flow_cache.max(1),
                entries: VecDeque::new(),
            },
            stats: QueueStats::default(),
        }
    }

    fn retire(&mut self, at: Micros) {
        while let Some(&d) = self.in_system.front() {
            if d > at {
                break;
            }
            self.in_system.pop_front();
            self.stats.departures += 1;
        }
    }

    /// Packets in the system (waiting or in service) at time `at`.
    pub fn occupancy(&mut self, at: Micros) -> usize {
        self.retire(at);
        self.in_system.len()
    }

    /// Offer a packet arriving at `at`. Arrivals must be nondecreasing.
    pub fn offer(&mut self, at: Micros, size_bytes: usize, flow_key: u64) -> Admission {
        self.stats.arrivals += 1;
        if self.occupancy(at) >= self.params.capacity_pkts {
            self.stats.drops += 1;
            return Admission::Dropped;
        }
        let start = self.last_departure.max(at);
        let mut service = service_time_us(size_bytes, self.schedule.rate_at(start));
        if self.params.flow_setup_us > 0 && !self.flows.touch(flow_key) {
            self.stats.flow_misses += 1;
            service += self.params.flow_setup_us;
        }
        let depart = start + service;
        self.last_departure = depart;
        self.in_system.push_back(depart);
        Admission::Accepted { start, depart }
    }

    /// Counters; departures are counted up to time `at`.
    pub fn stats_at(&mut self, at: Micros) -> QueueStats {
        self.retire(at);
        self.stats
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }
}
