//! The two ends of the C2 loop.
//!
//! Agents never touch the network themselves. `tick` returns [`Emission`]s
//! for the caller to send, `receive` consumes delivered payloads, and
//! `next_wakeup` says when `tick` next has work.

pub mod gcs;
pub mod uav;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mavlink::signing::SigningTime;
use crate::netsim::{secs, Micros};

pub use gcs::{CommandSend, Gcs, GcsRx, ProbeRecord};
pub use uav::{CommandOutcome, FailsafeEvent, Uav, UavMode, UavRx, UavState};

pub const GCS_SYS_ID: u8 = 255;
pub const GCS_COMP_ID: u8 = 190;
pub const UAV_SYS_ID: u8 = 1;
pub const UAV_COMP_ID: u8 = 1;

/// Unix time that sim time zero maps to (2026-01-01T00:00:00Z).
pub const SIM_EPOCH_UNIX_S: u64 = 1_767_225_600;

/// Signing clock reading for sim time `at`, shifted by `offset_s`.
pub fn signing_time(at: Micros, offset_s: f64) -> SigningTime {
    let unix_us = SIM_EPOCH_UNIX_S as f64 * 1e6 + at as f64 + offset_s * 1e6;
    SigningTime::from_unix_micros(unix_us.max(0.0) as u64)
}

/// Shared link key for a run, derived from the seed.
pub fn derive_key(seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"uavc2 link key");
    h.update(seed.to_le_bytes());
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C2Config {
    pub command_interval_s: f64,
    /// Offset of the first command slot from the start of the run.
    pub command_offset_s: f64,
    /// Each command is sent at a uniformly drawn offset in
    /// `[0, command_jitter_s)` within its slot.
    pub command_jitter_s: f64,
    pub telemetry_rate_hz: f64,
    pub heartbeat_rate_hz: f64,
    pub rtt_probe_rate_hz: f64,
    pub probe_timeout_s: f64,
    pub watchdog_timeout_s: f64,
    pub signing_enabled: bool,
    pub gcs_port: u16,
    pub uav_port: u16,
    pub max_speed_mps: f64,
    pub uav_tick_s: f64,
    /// Offset of the GCS signing clock from sim time.
    pub gcs_clock_offset_s: f64,
    /// LOCAL_NED waypoints; the last one is repeated once the list is exhausted.
    pub mission: Vec<[f32; 3]>,
    /// Geodetic origin of the local frame: latitude, longitude (deg), altitude (m).
    pub origin_geo: [f64; 3],
}

impl Default for C2Config {
    fn default() -> Self {
        Self {
            command_interval_s: 5.0,
            command_offset_s: 0.0,
            command_jitter_s: 0.0,
            telemetry_rate_hz: 5.0,
            heartbeat_rate_hz: 1.0,
            rtt_probe_rate_hz: 10.0,
            probe_timeout_s: 1.0,
            watchdog_timeout_s: 5.0,
            signing_enabled: false,
            gcs_port: 14550,
            uav_port: 14551,
            max_speed_mps: 5.0,
            uav_tick_s: 0.02,
            gcs_clock_offset_s: 0.0,
            mission: vec![[20.0, 0.0, -10.0], [20.0, 20.0, -10.0], [0.0, 20.0, -10.0], [10.0, 10.0, -10.0]],
            origin_geo: [47.397742, 8.545594, 488.0],
        }
    }
}

impl C2Config {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let rates = [
            ("command_interval_s", self.command_interval_s),
            ("telemetry_rate_hz", self.telemetry_rate_hz),
            ("heartbeat_rate_hz", self.heartbeat_rate_hz),
            ("rtt_probe_rate_hz", self.rtt_probe_rate_hz),
            ("probe_timeout_s", self.probe_timeout_s),
            ("max_speed_mps", self.max_speed_mps),
            ("uav_tick_s", self.uav_tick_s),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err((name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.command_jitter_s >= 0.0 && self.command_jitter_s < self.command_interval_s) {
            return Err(("command_jitter_s", "must be in [0, command_interval_s)".into()));
        }
        if !(self.command_offset_s >= 0.0 && self.command_offset_s + self.command_jitter_s < self.command_interval_s) {
            return Err(("command_offset_s", "offset + jitter must be in [0, command_interval_s)".into()));
        }
        if self.watchdog_timeout_s <= 1.0 / self.heartbeat_rate_hz {
            return Err(("watchdog_timeout_s", "must exceed the heartbeat period".into()));
        }
        if self.mission.is_empty() {
            return Err(("mission", "needs at least one waypoint".into()));
        }
        if self.gcs_port == self.uav_port {
            return Err(("uav_port", "must differ from gcs_port".into()));
        }
        Ok(())
    }

    fn period(hz: f64) -> Micros {
        secs(1.0 / hz).max(1)
    }
}

/// What a packet carries, for correlation by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Heartbeat,
    Telemetry,
    Command(u32),
    Probe(u32),
    Echo(u32),
    Attack,
}

impl Tag {
    pub fn to_u64(self) -> u64 {
        let (k, v) = match self {
            Tag::Heartbeat => (1, 0),
            Tag::Telemetry => (2, 0),
            Tag::Command(s) => (3, s),
            Tag::Probe(s) => (4, s),
            Tag::Echo(s) => (5, s),
            Tag::Attack => (6, 0),
        };
        (k << 32) | v as u64
    }

    pub fn from_u64(x: u64) -> Option<Self> {
        let v = x as u32;
        Some(match x >> 32 {
            1 => Tag::Heartbeat,
            2 => Tag::Telemetry,
            3 => Tag::Command(v),
            4 => Tag::Probe(v),
            5 => Tag::Echo(v),
            6 => Tag::Attack,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub payload: Vec<u8>,
    pub tag: Tag,
}

const PROBE_MAGIC: &[u8; 3] = b"PRB";
pub const PROBE_LEN: usize = 15;

pub fn encode_probe(seq: u32, t_send: Micros) -> Vec<u8> {
    let mut v = Vec::with_capacity(PROBE_LEN);
    v.extend_from_slice(PROBE_MAGIC);
    v.extend_from_slice(&seq.to_le_bytes());
    v.extend_from_slice(&t_send.to_le_bytes());
    v
}

pub fn decode_probe(b: &[u8]) -> Option<(u32, Micros)> {
    if b.len() != PROBE_LEN || &b[..3] != PROBE_MAGIC {
        return None;
    }
    let seq = u32::from_le_bytes(b[3..7].try_into().ok()?);
    let t = u64::from_le_bytes(b[7..15].try_into().ok()?);
    Some((seq, t))
}

/// Fixed-rate schedule: the `n`-th event is due at `start + n * period`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cadence {
    start: Micros,
    period: Micros,
    n: u64,
}

impl Cadence {
    pub(crate) fn new(start: Micros, period: Micros) -> Self {
        Self { start, period, n: 0 }
    }
    pub(crate) fn due(&self) -> Micros {
        self.start + self.n * self.period
    }
    /// Pops one due occurrence at or before `at`.
    pub(crate) fn take(&mut self, at: Micros) -> Option<Micros> {
        let d = self.due();
        if d <= at {
            self.n += 1;
            Some(d)
        } else {
            None
        }
    }
}
