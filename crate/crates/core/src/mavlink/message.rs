//! The three MAVLink messages the C2 loop exchanges, with their wire layouts.
//!
//! Field order follows the MAVLink-2 convention (fields sorted by type size,
//! largest first), little-endian.

use super::MavError;

pub const MSG_ID_HEARTBEAT: u32 = 0;
pub const MSG_ID_GLOBAL_POSITION_INT: u32 = 33;
pub const MSG_ID_SET_POSITION_TARGET_LOCAL_NED: u32 = 84;

const HEARTBEAT_LEN: usize = 9;
const GLOBAL_POSITION_INT_LEN: usize = 28;
const SET_POSITION_TARGET_LOCAL_NED_LEN: usize = 53;

/// CRC_EXTRA seed byte for a message id, `None` for unsupported ids.
pub fn crc_extra(msg_id: u32) -> Option<u8> {
    match msg_id {
        MSG_ID_HEARTBEAT => Some(50),
        MSG_ID_GLOBAL_POSITION_INT => Some(104),
        MSG_ID_SET_POSITION_TARGET_LOCAL_NED => Some(143),
        _ => None,
    }
}

/// Full (untruncated) payload length for a message id.
pub fn payload_len(msg_id: u32) -> Option<usize> {
    match msg_id {
        MSG_ID_HEARTBEAT => Some(HEARTBEAT_LEN),
        MSG_ID_GLOBAL_POSITION_INT => Some(GLOBAL_POSITION_INT_LEN),
        MSG_ID_SET_POSITION_TARGET_LOCAL_NED => Some(SET_POSITION_TARGET_LOCAL_NED_LEN),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heartbeat {
    pub custom_mode: u32,
    pub mav_type: u8,
    pub autopilot: u8,
    pub base_mode: u8,
    pub system_status: u8,
    pub mavlink_version: u8,
}

impl Default for Heartbeat {
    fn default() -> Self {
        // Quadrotor, generic autopilot, active, MAVLink version 3.
        Self {
            custom_mode: 0,
            mav_type: 2,
            autopilot: 0,
            base_mode: 0,
            system_status: 4,
            mavlink_version: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GlobalPositionInt {
    pub time_boot_ms: u32,
    /// Latitude, 1e-7 degrees.
    pub lat: i32,
    /// Longitude, 1e-7 degrees.
    pub lon: i32,
    /// Altitude MSL, millimetres.
    pub alt: i32,
    /// Altitude above home, millimetres.
    pub relative_alt: i32,
    /// Ground speed, cm/s.
    pub vx: i16,
    pub vy: i16,
    pub vz: i16,
    /// Heading, centidegrees.
    pub hdg: u16,
}

/// `MAV_FRAME` values accepted in position targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordinateFrame {
    #[default]
    LocalNed,
    LocalOffsetNed,
}

impl CoordinateFrame {
    pub fn to_wire(self) -> u8 {
        match self {
            CoordinateFrame::LocalNed => 1,
            CoordinateFrame::LocalOffsetNed => 7,
        }
    }

    pub fn from_wire(value: u8) -> Option<Self> {
        match value {
            1 => Some(CoordinateFrame::LocalNed),
            7 => Some(CoordinateFrame::LocalOffsetNed),
            _ => None,
        }
    }
}

/// Position setpoint. `type_mask` is carried on the wire but the
/// autopilot in this crate only honours the position fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SetPositionTargetLocalNed {
    pub time_boot_ms: u32,
    pub target_system: u8,
    pub target_component: u8,
    pub coordinate_frame: CoordinateFrame,
    pub type_mask: u16,
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub vx: f32,
    pub vy: f32,
    pub vz: f32,
    pub afx: f32,
    pub afy: f32,
    pub afz: f32,
    pub yaw: f32,
    pub yaw_rate: f32,
}

/// Supported MAVLink messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MavMessage {
    Heartbeat(Heartbeat),
    GlobalPositionInt(GlobalPositionInt),
    SetPositionTargetLocalNed(SetPositionTargetLocalNed),
}

impl MavMessage {
    pub fn msg_id(&self) -> u32 {
        match self {
            MavMessage::Heartbeat(_) => MSG_ID_HEARTBEAT,
            MavMessage::GlobalPositionInt(_) => MSG_ID_GLOBAL_POSITION_INT,
            MavMessage::SetPositionTargetLocalNed(_) => MSG_ID_SET_POSITION_TARGET_LOCAL_NED,
        }
    }

    /// Full-length little-endian payload (before trailing-zero truncation).
    pub fn serialize_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SET_POSITION_TARGET_LOCAL_NED_LEN);
        match self {
            MavMessage::Heartbeat(m) => {
                out.extend_from_slice(&m.custom_mode.to_le_bytes());
                out.extend_from_slice(&[
                    m.mav_type,
                    m.autopilot,
                    m.base_mode,
                    m.system_status,
                    m.mavlink_version,
                ]);
            }
            MavMessage::GlobalPositionInt(m) => {
                out.extend_from_slice(&m.time_boot_ms.to_le_bytes());
                out.extend_from_slice(&m.lat.to_le_bytes());
                out.extend_from_slice(&m.lon.to_le_bytes());
                out.extend_from_slice(&m.alt.to_le_bytes());
                out.extend_from_slice(&m.relative_alt.to_le_bytes());
                out.extend_from_slice(&m.vx.to_le_bytes());
                out.extend_from_slice(&m.vy.to_le_bytes());
                out.extend_from_slice(&m.vz.to_le_bytes());
                out.extend_from_slice(&m.hdg.to_le_bytes());
            }
            MavMessage::SetPositionTargetLocalNed(m) => {
                out.extend_from_slice(&m.time_boot_ms.to_le_bytes());
                for v in [
                    m.x, m.y, m.z, m.vx, m.vy, m.vz, m.afx, m.afy, m.afz, m.yaw, m.yaw_rate,
                ] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&m.type_mask.to_le_bytes());
                out.push(m.target_system);
                out.push(m.target_component);
                out.push(m.coordinate_frame.to_wire());
            }
        }
        out
    }

    /// Parse a (possibly truncated) payload; missing trailing bytes read as zero.
    pub fn parse_payload(msg_id: u32, payload: &[u8]) -> Result<Self, MavError> {
        let full = payload_len(msg_id).ok_or(MavError::UnknownMsgId(msg_id))?;
        let mut buf = [0u8; SET_POSITION_TARGET_LOCAL_NED_LEN];
        let n = payload.len().min(full);
        buf[..n].copy_from_slice(&payload[..n]);
        let mut r = Reader { buf: &buf, pos: 0 };
        let msg = match msg_id {
            MSG_ID_HEARTBEAT => MavMessage::Heartbeat(Heartbeat {
                custom_mode: r.u32(),
                mav_type: r.u8(),
                autopilot: r.u8(),
                base_mode: r.u8(),
                system_status: r.u8(),
                mavlink_version: r.u8(),
            }),
            MSG_ID_GLOBAL_POSITION_INT => MavMessage::GlobalPositionInt(GlobalPositionInt {
                time_boot_ms: r.u32(),
                lat: r.i32(),
                lon: r.i32(),
                alt: r.i32(),
                relative_alt: r.i32(),
                vx: r.i16(),
                vy: r.i16(),
                vz: r.i16(),
                hdg: r.u16(),
            }),
            _ => {
                let time_boot_ms = r.u32();
                let mut f = [0f32; 11];
                for v in f.iter_mut() {
                    *v = r.f32();
                }
                let type_mask = r.u16();
                let target_system = r.u8();
                let target_component = r.u8();
                let raw_frame = r.u8();
                let coordinate_frame = CoordinateFrame::from_wire(raw_frame)
                    .ok_or(MavError::UnsupportedFrame(raw_frame))?;
                MavMessage::SetPositionTargetLocalNed(SetPositionTargetLocalNed {
                    time_boot_ms,
                    target_system,
                    target_component,
                    coordinate_frame,
                    type_mask,
                    x: f[0],
                    y: f[1],
                    z: f[2],
                    vx: f[3],
                    vy: f[4],
                    vz: f[5],
                    afx: f[6],
                    afy: f[7],
                    afz: f[8],
                    yaw: f[9],
                    yaw_rate: f[10],
                })
            }
        };
        Ok(msg)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
}

/// Drop trailing zero bytes, keeping at least one payload byte.
pub fn truncate_payload(payload: &mut Vec<u8>) {
    while payload.len() > 1 && payload.last() == Some(&0) {
        payload.pop();
    }
}
