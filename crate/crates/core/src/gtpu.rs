//! GTP-U G-PDU encapsulation with a hardened inner IPv4/UDP parser.
//!
//! Only the 8-byte mandatory header is produced or accepted (version 1,
//! protocol type GTP, no E/S/PN optional fields, message type G-PDU).
//! Every length field is checked against the bytes actually present before
//! anything past it is read.
//!
//! ```text
//! 0x30 | 0xFF | length (BE16) | TEID (BE32) | IPv4 header | UDP header | payload
//! ```

use std::net::Ipv4Addr;

use thiserror::Error;

/// N3 user-plane port.
pub const GTPU_PORT: u16 = 2152;
pub const GTPU_HEADER_LEN: usize = 8;
pub const IPV4_MIN_HEADER_LEN: usize = 20;
pub const UDP_HEADER_LEN: usize = 8;
/// Outer IPv4 + UDP + GTP-U bytes added on N3 legs.
pub const N3_OVERHEAD: usize = IPV4_MIN_HEADER_LEN + UDP_HEADER_LEN + GTPU_HEADER_LEN;

const VERSION_FLAGS: u8 = 0x30;
const MSG_TYPE_GPDU: u8 = 0xFF;
const IP_PROTO_UDP: u8 = 17;
const DEFAULT_TTL: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GtpuError {
    #[error("buffer shorter than a declared length")]
    Truncated,
    #[error("unsupported GTP version/flags byte {0:#04x}")]
    BadVersion(u8),
    #[error("message type {0:#04x} is not a G-PDU")]
    NotGpdu(u8),
    #[error("GTP length {declared} does not match {actual} payload bytes")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("inner packet is not IPv4/UDP")]
    InnerNotUdp,
    #[error("inner IPv4/UDP header lengths overrun the datagram")]
    InnerHeaderOverrun,
}

impl GtpuError {
    /// Stable name of the error arm, used by fuzz coverage accounting.
    pub fn arm(&self) -> &'static str {
        match self {
            GtpuError::Truncated => "Truncated",
            GtpuError::BadVersion(_) => "BadVersion",
            GtpuError::NotGpdu(_) => "NotGpdu",
            GtpuError::LengthMismatch { .. } => "LengthMismatch",
            GtpuError::InnerNotUdp => "InnerNotUdp",
            GtpuError::InnerHeaderOverrun => "InnerHeaderOverrun",
        }
    }

    pub const ARMS: [&'static str; 6] = [
        "Truncated",
        "BadVersion",
        "NotGpdu",
        "LengthMismatch",
        "InnerNotUdp",
        "InnerHeaderOverrun",
    ];
}

/// IPv4/UDP datagram carried inside a G-PDU.
///
/// Encoding always uses a 20-byte IPv4 header; options on parsed packets
/// are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerDatagram {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Vec<u8>,
}

impl InnerDatagram {
    pub fn new(src_ip: Ipv4Addr, dst_ip: Ipv4Addr, src_port: u16, dst_port: u16, payload: Vec<u8>) -> Self {
        Self { src_ip, dst_ip, src_port, dst_port, payload }
    }

    /// Header length in 32-bit words.
    pub fn ihl(&self) -> u8 {
        5
    }

    pub fn udp_length(&self) -> usize {
        UDP_HEADER_LEN + self.payload.len()
    }

    pub fn total_length(&self) -> usize {
        IPV4_MIN_HEADER_LEN + self.udp_length()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let total = self.total_length();
        let mut out = Vec::with_capacity(total);
        out.push(0x45);
        out.push(0);
        out.extend_from_slice(&(total as u16).to_be_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]); // id, flags/fragment
        out.push(DEFAULT_TTL);
        out.push(IP_PROTO_UDP);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.src_ip.octets());
        out.extend_from_slice(&self.dst_ip.octets());
        let ip_csum = internet_checksum(&[&out[..IPV4_MIN_HEADER_LEN]]);
        out[10..12].copy_from_slice(&ip_csum.to_be_bytes());

        let udp_len = self.udp_length() as u16;
        let udp_start = out.len();
        out.extend_from_slice(&self.src_port.to_be_bytes());
        out.extend_from_slice(&self.dst_port.to_be_bytes());
        out.extend_from_slice(&udp_len.to_be_bytes());
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.payload);

        let mut pseudo = [0u8; 12];
        pseudo[..4].copy_from_slice(&self.src_ip.octets());
        pseudo[4..8].copy_from_slice(&self.dst_ip.octets());
        pseudo[9] = IP_PROTO_UDP;
        pseudo[10..12].copy_from_slice(&udp_len.to_be_bytes());
        let mut udp_csum = internet_checksum(&[&pseudo, &out[udp_start..]]);
        if udp_csum == 0 {
            udp_csum = 0xFFFF;
        }
        out[udp_start + 6..udp_start + 8].copy_from_slice(&udp_csum.to_be_bytes());
        out
    }

    /// Validates every length field before reading past it.
    pub fn parse(buf: &[u8]) -> Result<Self, GtpuError> {
        let first = *buf.first().ok_or(GtpuError::InnerHeaderOverrun)?;
        if first >> 4 != 4 {
            // IPv6 and anything else is outside the data path.
            return Err(GtpuError::InnerNotUdp);
        }
        if buf.len() < IPV4_MIN_HEADER_LEN {
            return Err(GtpuError::InnerHeaderOverrun);
        }
        let ihl_bytes = usize::from(first & 0x0F) * 4;
        let total = usize::from(u16::from_be_bytes([buf[2], buf[3]]));
        if ihl_bytes < IPV4_MIN_HEADER_LEN
            || total < ihl_bytes + UDP_HEADER_LEN
            || total > buf.len()
        {
            return Err(GtpuError::InnerHeaderOverrun);
        }
        if buf[9] != IP_PROTO_UDP {
            return Err(GtpuError::InnerNotUdp);
        }
        let udp = &buf[ihl_bytes..total];
        let udp_len = usize::from(u16::from_be_bytes([udp[4], udp[5]]));
        if udp_len != udp.len() {
            return Err(GtpuError::InnerHeaderOverrun);
        }
        Ok(Self {
            src_ip: Ipv4Addr::new(buf[12], buf[13], buf[14], buf[15]),
            dst_ip: Ipv4Addr::new(buf[16], buf[17], buf[18], buf[19]),
            src_port: u16::from_be_bytes([udp[0], udp[1]]),
            dst_port: u16::from_be_bytes([udp[2], udp[3]]),
            payload: udp[UDP_HEADER_LEN..].to_vec(),
        })
    }
}

/// RFC 1071 ones'-complement sum over the concatenation of `parts`.
fn internet_checksum(parts: &[&[u8]]) -> u16 {
    let mut sum: u32 = 0;
    let mut odd: Option<u8> = None;
    for part in parts {
        for &b in *part {
            match odd.take() {
                Some(hi) => sum += u32::from(u16::from_be_bytes([hi, b])),
                None => odd = Some(b),
            }
        }
    }
    if let Some(hi) = odd {
        sum += u32::from(hi) << 8;
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

/// Wraps `inner` in a G-PDU for tunnel `teid`.
pub fn gtpu_encap(teid: u32, inner: &InnerDatagram) -> Vec<u8> {
    let body = inner.to_bytes();
    let mut out = Vec::with_capacity(GTPU_HEADER_LEN + body.len());
    out.push(VERSION_FLAGS);
    out.push(MSG_TYPE_GPDU);
    out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    out.extend_from_slice(&teid.to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Parses a G-PDU. Total: every input maps to a datagram or one named error.
pub fn gtpu_parse(bytes: &[u8]) -> Result<(u32, InnerDatagram), GtpuError> {
    if bytes.len() < GTPU_HEADER_LEN {
        return Err(GtpuError::Truncated);
    }
    let flags = bytes[0];
    if flags != VERSION_FLAGS {
        return Err(GtpuError::BadVersion(flags));
    }
    if bytes[1] != MSG_TYPE_GPDU {
        return Err(GtpuError::NotGpdu(bytes[1]));
    }
    let declared = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
    let actual = bytes.len() - GTPU_HEADER_LEN;
    if declared > actual {
        return Err(GtpuError::Truncated);
    }
    if declared < actual {
        return Err(GtpuError::LengthMismatch { declared, actual });
    }
    let teid = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let inner = InnerDatagram::parse(&bytes[GTPU_HEADER_LEN..])?;
    Ok((teid, inner))
}
