//! User-plane attack traffic: constant-rate floods and random-port bursts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{Injection, Micros, MICROS_PER_SEC};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("bad traffic profile: {0}")]
    BadProfile(String),
    #[error("unknown UE {0:?}")]
    UnknownUe(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficKind {
    ConstantUdp {
        pps: f64,
        payload_bytes: usize,
    },
    BurstPortChurn {
        on_ms: f64,
        off_ms: f64,
        payload_bytes: usize,
        /// Inclusive destination port range.
        port_range: [u16; 2],
        /// Packet rate inside an ON interval.
        bursts_pps: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficProfile {
    pub kind: TrafficKind,
    /// Emitting UE (for `UE_UPLINK`) or data-network host (for `CORE_SIDE`).
    pub source: String,
    /// Victim UE.
    pub target: String,
    /// Destination port for constant floods.
    #[serde(default = "default_port")]
    pub dst_port: u16,
    #[serde(default = "default_src_port")]
    pub src_port: u16,
    pub injection_point: Injection,
    /// Marks a core-side flood standing in for UPF ingress stress. Purely
    /// descriptive; the traffic is generated the same way.
    #[serde(default)]
    pub upf_stress: bool,
}

fn default_port() -> u16 {
    14551
}

fn default_src_port() -> u16 {
    40000
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |m: &str| Err(ProfileError::BadProfile(m.to_string()));
        match &self.kind {
            TrafficKind::ConstantUdp { pps, .. } => {
                if !(*pps > 0.0 && pps.is_finite()) {
                    return bad("pps must be > 0");
                }
            }
            TrafficKind::BurstPortChurn {
                on_ms,
                off_ms,
                port_range,
                bursts_pps,
                ..
            } => {
                if !(*on_ms > 0.0) {
                    return bad("on_ms must be > 0");
                }
                if !(*off_ms >= 0.0) {
                    return bad("off_ms must be >= 0");
                }
                if !(*bursts_pps > 0.0 && bursts_pps.is_finite()) {
                    return bad("bursts_pps must be > 0");
                }
                if port_range[0] > port_range[1] {
                    return bad("port_range is empty");
                }
            }
        }
        Ok(())
    }

    /// Mean offered packet rate over a long window.
    pub fn mean_pps(&self) -> f64 {
        match &self.kind {
            TrafficKind::ConstantUdp { pps, .. } => *pps,
            TrafficKind::BurstPortChurn {
                on_ms,
                off_ms,
                bursts_pps,
                ..
            } => bursts_pps * on_ms / (on_ms + off_ms),
        }
    }

    pub fn payload_bytes(&self) -> usize {
        match &self.kind {
            TrafficKind::ConstantUdp { payload_bytes, .. } | TrafficKind::BurstPortChurn { payload_bytes, .. } => {
                *payload_bytes
            }
        }
    }
}

/// One attack datagram to inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injected {
    pub at: Micros,
    pub dst_port: u16,
    pub payload_bytes: usize,
}

/// Lazy, deterministic packet schedule for one profile over `[start, end)`.
pub struct TrafficGen {
    kind: TrafficKind,
    dst_port: u16,
    start: Micros,
    end: Micros,
    /// Burst index (bursts) or 0.
    window: u64,
    /// Packet index within the current burst, or overall for floods.
    n: u64,
    rng: ChaCha8Rng,
}

impl TrafficGen {
    fn next_inner(&mut self) -> Option<Injected> {
        match self.kind {
            TrafficKind::ConstantUdp { pps, payload_bytes } => {
                let at = self.start + (self.n as f64 * MICROS_PER_SEC as f64 / pps) as Micros;
                if at >= self.end {
                    return None;
                }
                self.n += 1;
                Some(Injected {
                    at,
                    dst_port: self.dst_port,
                    payload_bytes,
                })
            }
            TrafficKind::BurstPortChurn {
                on_ms,
                off_ms,
                payload_bytes,
                port_range,
                bursts_pps,
            } => loop {
                let period_us = (on_ms + off_ms) * 1000.0;
                let w_start = self.start + (self.window as f64 * period_us) as Micros;
                if w_start >= self.end {
                    return None;
                }
                let offset = self.n as f64 * MICROS_PER_SEC as f64 / bursts_pps;
                let at = w_start + offset as Micros;
                if offset >= on_ms * 1000.0 || at >= self.end {
                    self.window += 1;
                    self.n = 0;
                    continue;
                }
                self.n += 1;
                let dst_port = self.rng.random_range(port_range[0]..=port_range[1]);
                return Some(Injected {
                    at,
                    dst_port,
                    payload_bytes,
                });
            },
        }
    }

    /// ON windows that start inside the generation window.
    pub fn burst_windows(&self) -> u64 {
        match self.kind {
            TrafficKind::BurstPortChurn { on_ms, off_ms, .. } => {
                let period_us = (on_ms + off_ms) * 1000.0;
                ((self.end.saturating_sub(self.start)) as f64 / period_us).ceil() as u64
            }
            TrafficKind::ConstantUdp { .. } => 0,
        }
    }
}

impl Iterator for TrafficGen {
    type Item = Injected;
    fn next(&mut self) -> Option<Injected> {
        self.next_inner()
    }
}

fn generator(profile: &TrafficProfile, start: Micros, end: Micros, seed: u64) -> Result<TrafficGen, ProfileError> {
    profile.validate()?;
    Ok(TrafficGen {
        kind: profile.kind.clone(),
        dst_port: profile.dst_port,
        start,
        end: end.max(start),
        window: 0,
        n: 0,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6275_7273_7470_6f72),
    })
}

/// Constant-rate flood over `[start, end)`.
pub fn run_flood(profile: &TrafficProfile, start: Micros, end: Micros) -> Result<TrafficGen, ProfileError> {
    if !matches!(profile.kind, TrafficKind::ConstantUdp { .. }) {
        return Err(ProfileError::BadProfile("run_flood needs a constant_udp profile".into()));
    }
    generator(profile, start, end, 0)
}

/// Random-port bursts over `[start, end)`; ports drawn from a seeded stream.
pub fn run_burst(profile: &TrafficProfile, start: Micros, end: Micros, seed: u64) -> Result<TrafficGen, ProfileError> {
    if !matches!(profile.kind, TrafficKind::BurstPortChurn { .. }) {
        return Err(ProfileError::BadProfile("run_burst needs a burst_port_churn profile".into()));
    }
    generator(profile, start, end, seed)
}

/// Dispatches on the profile kind.
pub fn traffic(profile: &TrafficProfile, start: Micros, end: Micros, seed: u64) -> Result<TrafficGen, ProfileError> {
    generator(profile, start, end, seed)
}
