//! UAV autopilot-lite: first-order kinematics toward the active position
//! target, telemetry and heartbeat emission, a heartbeat watchdog and an
//! absorbing failsafe.

use super::{decode_probe, signing_time, C2Config, Cadence, Emission, Tag};
use super::{GCS_SYS_ID, UAV_COMP_ID, UAV_SYS_ID};
use crate::mavlink::{
    self, CoordinateFrame, FrameHeader, GlobalPositionInt, Heartbeat, MavError, MavMessage, SigningContext,
};
use crate::netsim::{secs, Micros};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Equirectangular projection of a local NED offset around `origin`
/// (lat deg, lon deg, alt m). Returns 1e-7 deg lat/lon and mm altitude.
pub fn ned_to_geo(origin: [f64; 3], ned: [f64; 3]) -> (i32, i32, i32) {
    let lat0 = origin[0].to_radians();
    let lat = origin[0] + (ned[0] / EARTH_RADIUS_M).to_degrees();
    let lon = origin[1] + (ned[1] / (EARTH_RADIUS_M * lat0.cos())).to_degrees();
    let alt = origin[2] - ned[2];
    ((lat * 1e7).round() as i32, (lon * 1e7).round() as i32, (alt * 1e3).round() as i32)
}

/// Inverse of [`ned_to_geo`] relative to a reference fix in the same units.
pub fn geo_to_ned(reference: (i32, i32, i32), fix: (i32, i32, i32)) -> [f64; 3] {
    let lat0 = (reference.0 as f64 * 1e-7).to_radians();
    let dlat = ((fix.0 - reference.0) as f64 * 1e-7).to_radians();
    let dlon = ((fix.1 - reference.1) as f64 * 1e-7).to_radians();
    [
        dlat * EARTH_RADIUS_M,
        dlon * EARTH_RADIUS_M * lat0.cos(),
        -((fix.2 - reference.2) as f64) * 1e-3,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavMode {
    Mission,
    Failsafe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub pos_ned: [f64; 3],
    pub vel_ned: [f64; 3],
    pub mode: UavMode,
    pub origin_geo: [f64; 3],
    pub last_heartbeat_rx: Micros,
    pub boot_time: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailsafeEvent {
    pub at: Micros,
    /// Time since the last GCS heartbeat.
    pub heartbeat_gap: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommandOutcome {
    Accepted { target: [f64; 3], frame: CoordinateFrame },
    /// Failed signature or replay verification.
    VerificationFailed(MavError),
    /// Arrived after failsafe; not executed.
    IgnoredFailsafe,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UavRx {
    /// Probe echo to send back.
    Echo(Emission),
    Heartbeat,
    Command(CommandOutcome),
    /// Frame rejected before it could be interpreted.
    Rejected(MavError),
    Ignored,
}

pub struct Uav {
    cfg: C2Config,
    state: UavState,
    target: Option<[f64; 3]>,
    signing: Option<SigningContext>,
    mav_seq: u8,
    tick: Cadence,
    heartbeat: Cadence,
    telemetry: Cadence,
    tamper_count: u64,
    rejected_count: u64,
    commands_accepted: u64,
    failsafe: Option<FailsafeEvent>,
}

impl Uav {
    pub fn new(cfg: &C2Config, key: [u8; 32], start: Micros) -> Self {
        let signing = cfg.signing_enabled.then(|| SigningContext::new(key, 0));
        Self {
            state: UavState {
                pos_ned: [0.0; 3],
                vel_ned: [0.0; 3],
                mode: UavMode::Mission,
                origin_geo: cfg.origin_geo,
                last_heartbeat_rx: start,
                boot_time: start,
            },
            target: None,
            signing,
            mav_seq: 0,
            // Each tick integrates the interval that ends at it.
            tick: Cadence::new(start + secs(cfg.uav_tick_s).max(1), secs(cfg.uav_tick_s).max(1)),
            heartbeat: Cadence::new(start, C2Config::period(cfg.heartbeat_rate_hz)),
            // Offset so telemetry does not share instants with heartbeats.
            telemetry: Cadence::new(start + 1000, C2Config::period(cfg.telemetry_rate_hz)),
            tamper_count: 0,
            rejected_count: 0,
            commands_accepted: 0,
            failsafe: None,
            cfg: cfg.clone(),
        }
    }

    pub fn state(&self) -> &UavState {
        &self.state
    }

    pub fn target(&self) -> Option<[f64; 3]> {
        self.target
    }

    pub fn tamper_count(&self) -> u64 {
        self.tamper_count
    }

    pub fn rejected_count(&self) -> u64 {
        self.rejected_count
    }

    pub fn commands_accepted(&self) -> u64 {
        self.commands_accepted
    }

    pub fn failsafe(&self) -> Option<FailsafeEvent> {
        self.failsafe
    }

    pub fn next_wakeup(&self) -> Micros {
        self.tick.due().min(self.heartbeat.due()).min(self.telemetry.due())
    }

    fn frame(&mut self, msg: &MavMessage, at: Micros) -> Vec<u8> {
        let hdr = FrameHeader {
            seq: self.mav_seq,
            sys_id: UAV_SYS_ID,
            comp_id: UAV_COMP_ID,
        };
        self.mav_seq = self.mav_seq.wrapping_add(1);
        mavlink::encode_frame(msg, hdr, self.signing.as_mut(), signing_time(at, 0.0)).expect("fixed-size message")
    }

    fn integrate(&mut self, dt_s: f64) {
        let Some(tgt) = self.target else {
            self.state.vel_ned = [0.0; 3];
            return;
        };
        let p = &mut self.state.pos_ned;
        let d = [tgt[0] - p[0], tgt[1] - p[1], tgt[2] - p[2]];
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let step = (self.cfg.max_speed_mps * dt_s).min(dist);
        if dist <= 0.0 {
            self.state.vel_ned = [0.0; 3];
            return;
        }
        for i in 0..3 {
            let di = d[i] / dist * step;
            p[i] = if step == dist { tgt[i] } else { p[i] + di };
            self.state.vel_ned[i] = di / dt_s;
        }
    }

    /// Failsafe check at `at`; fires at most once per run.
    pub fn watchdog_check(&mut self, at: Micros) -> Option<FailsafeEvent> {
        let gap = at.saturating_sub(self.state.last_heartbeat_rx);
        if self.state.mode == UavMode::Mission && gap > secs(self.cfg.watchdog_timeout_s) {
            self.state.mode = UavMode::Failsafe;
            self.target = None;
            let ev = FailsafeEvent { at, heartbeat_gap: gap };
            self.failsafe = Some(ev);
            return Some(ev);
        }
        None
    }

    fn gpi(&self, at: Micros) -> MavMessage {
        let s = &self.state;
        let (lat, lon, alt) = ned_to_geo(s.origin_geo, s.pos_ned);
        let hdg = if s.vel_ned[0] == 0.0 && s.vel_ned[1] == 0.0 {
            u16::MAX
        } else {
            (s.vel_ned[1].atan2(s.vel_ned[0]).to_degrees().rem_euclid(360.0) * 100.0) as u16
        };
        MavMessage::GlobalPositionInt(GlobalPositionInt {
            time_boot_ms: ((at - s.boot_time) / 1000) as u32,
            lat,
            lon,
            alt,
            relative_alt: (-s.pos_ned[2] * 1e3).round() as i32,
            vx: (s.vel_ned[0] * 100.0).round() as i16,
            vy: (s.vel_ned[1] * 100.0).round() as i16,
            vz: (s.vel_ned[2] * 100.0).round() as i16,
            hdg,
        })
    }

    /// Advances kinematics and the watchdog through `at` and emits due
    /// heartbeats and telemetry.
    pub fn tick(&mut self, at: Micros) -> (Vec<Emission>, Option<FailsafeEvent>) {
        let mut fs = None;
        let dt = self.cfg.uav_tick_s;
        while let Some(t) = self.tick.take(at) {
            self.integrate(dt);
            fs = fs.or(self.watchdog_check(t));
        }
        let mut out = Vec::new();
        while self.heartbeat.take(at).is_some() {
            let status = if self.state.mode == UavMode::Failsafe { 5 } else { 4 };
            let hb = MavMessage::Heartbeat(Heartbeat {
                system_status: status,
                ..Default::default()
            });
            out.push(Emission {
                payload: self.frame(&hb, at),
                tag: Tag::Heartbeat,
            });
        }
        while self.telemetry.take(at).is_some() {
            let m = self.gpi(at);
            out.push(Emission {
                payload: self.frame(&m, at),
                tag: Tag::Telemetry,
            });
        }
        (out, fs)
    }

    pub fn receive(&mut self, at: Micros, payload: &[u8]) -> UavRx {
        if let Some((seq, _)) = decode_probe(payload) {
            return UavRx::Echo(Emission {
                payload: payload.to_vec(),
                tag: Tag::Echo(seq),
            });
        }
        let now = signing_time(at, 0.0);
        let (frame, msg) = match mavlink::decode_frame(payload, self.signing.as_mut(), now) {
            Ok(x) => x,
            Err(e) => {
                let verification = matches!(
                    e,
                    MavError::BadSignature | MavError::StaleTimestamp | MavError::UnsignedButRequired
                );
                if e == MavError::BadSignature {
                    self.tamper_count += 1;
                } else {
                    self.rejected_count += 1;
                }
                let is_cmd = mavlink::parse_frame(payload)
                    .is_ok_and(|f| f.msg_id == mavlink::message::MSG_ID_SET_POSITION_TARGET_LOCAL_NED);
                return if verification && is_cmd {
                    UavRx::Command(CommandOutcome::VerificationFailed(e))
                } else {
                    UavRx::Rejected(e)
                };
            }
        };
        if frame.sys_id != GCS_SYS_ID {
            return UavRx::Ignored;
        }
        match msg {
            MavMessage::Heartbeat(_) => {
                self.state.last_heartbeat_rx = at;
                UavRx::Heartbeat
            }
            MavMessage::SetPositionTargetLocalNed(c) if c.target_system == UAV_SYS_ID => {
                if self.state.mode == UavMode::Failsafe {
                    return UavRx::Command(CommandOutcome::IgnoredFailsafe);
                }
                let v = [c.x as f64, c.y as f64, c.z as f64];
                let p = self.state.pos_ned;
                let target = match c.coordinate_frame {
                    CoordinateFrame::LocalNed => v,
                    CoordinateFrame::LocalOffsetNed => [p[0] + v[0], p[1] + v[1], p[2] + v[2]],
                };
                self.target = Some(target);
                self.commands_accepted += 1;
                UavRx::Command(CommandOutcome::Accepted {
                    target,
                    frame: c.coordinate_frame,
                })
            }
            _ => UavRx::Ignored,
        }
    }
}
