//! MAVLink-2 framing for the C2 loop: encode, decode, sign and verify.
//!
//! ```text
//! magic len incompat compat seq sys comp msgid[3] payload[len] crc[2] (signature[13])
//! ```
//!
//! Only the messages in [`message`] are understood. Frames are carried as
//! opaque UDP payloads by the simulator.

pub mod crc;
pub mod message;
pub mod signing;

use thiserror::Error;

pub use crc::crc_x25;
pub use message::{
    CoordinateFrame, GlobalPositionInt, Heartbeat, MavMessage, SetPositionTargetLocalNed,
};
pub use signing::{SignatureBlock, SigningContext, SigningTime};

/// MAVLink-2 start byte.
pub const MAGIC_V2: u8 = 0xFD;
/// Bytes from the magic through the 24-bit message id.
pub const HEADER_LEN: usize = 10;
pub const CHECKSUM_LEN: usize = 2;
pub const INCOMPAT_FLAG_SIGNED: u8 = 0x01;
pub const MAX_PAYLOAD_LEN: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MavError {
    #[error("frame truncated")]
    Truncated,
    #[error("bad start byte {0:#04x}")]
    BadMagic(u8),
    #[error("checksum mismatch")]
    BadCrc,
    #[error("signature does not verify")]
    BadSignature,
    #[error("signature timestamp is stale or outside the acceptance window")]
    StaleTimestamp,
    #[error("unsigned frame where signing is required")]
    UnsignedButRequired,
    #[error("unknown message id {0}")]
    UnknownMsgId(u32),
    #[error("unsupported coordinate frame {0}")]
    UnsupportedFrame(u8),
    #[error("{0} bytes after the end of the frame")]
    TrailingBytes(usize),
    #[error("payload of {0} bytes exceeds 255")]
    PayloadTooLarge(usize),
}

/// A decoded (or about-to-be-encoded) wire frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MavFrame {
    pub incompat_flags: u8,
    pub compat_flags: u8,
    pub seq: u8,
    pub sys_id: u8,
    pub comp_id: u8,
    pub msg_id: u32,
    /// Payload as carried on the wire (possibly truncated).
    pub payload: Vec<u8>,
    pub checksum: u16,
    pub signature: Option<SignatureBlock>,
}

impl MavFrame {
    pub fn is_signed(&self) -> bool {
        self.incompat_flags & INCOMPAT_FLAG_SIGNED != 0
    }

    fn header_bytes(&self) -> [u8; HEADER_LEN] {
        let id = self.msg_id.to_le_bytes();
        [
            MAGIC_V2,
            self.payload.len() as u8,
            self.incompat_flags,
            self.compat_flags,
            self.seq,
            self.sys_id,
            self.comp_id,
            id[0],
            id[1],
            id[2],
        ]
    }

    /// Checksum over len..payload plus the message's CRC_EXTRA byte.
    pub fn compute_checksum(&self) -> Result<u16, MavError> {
        let extra = message::crc_extra(self.msg_id).ok_or(MavError::UnknownMsgId(self.msg_id))?;
        let mut crc = crc::Crc16::new();
        crc.update(&self.header_bytes()[1..]);
        crc.update(&self.payload);
        crc.accumulate(extra);
        Ok(crc.value())
    }

    /// Magic through checksum, i.e. the bytes that are signed.
    fn unsigned_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() + CHECKSUM_LEN);
        out.extend_from_slice(&self.header_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.checksum.to_le_bytes());
        out
    }

    /// Serializes the frame exactly as its fields say; the checksum and
    /// signature are not recomputed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.unsigned_bytes();
        if let Some(sig) = &self.signature {
            out.extend_from_slice(&sig.to_bytes());
        }
        out
    }

    /// Replaces the payload with `msg` (truncated), recomputes the checksum,
    /// and leaves flags and any signature block untouched.
    pub fn replace_message(&mut self, msg: &MavMessage) {
        let mut payload = msg.serialize_payload();
        message::truncate_payload(&mut payload);
        self.msg_id = msg.msg_id();
        self.payload = payload;
        self.checksum = self
            .compute_checksum()
            .expect("supported messages have a CRC_EXTRA");
    }

    pub fn message(&self) -> Result<MavMessage, MavError> {
        MavMessage::parse_payload(self.msg_id, &self.payload)
    }
}

/// Header values for an outgoing frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub seq: u8,
    pub sys_id: u8,
    pub comp_id: u8,
}

/// Builds a wire frame for `msg`. With a signing context the frame is
/// signed at `now` and the context's sender timestamp advances.
pub fn encode_frame(
    msg: &MavMessage,
    header: FrameHeader,
    signing: Option<&mut SigningContext>,
    now: SigningTime,
) -> Result<Vec<u8>, MavError> {
    let mut payload = msg.serialize_payload();
    if payload.len() > MAX_PAYLOAD_LEN {
        return Err(MavError::PayloadTooLarge(payload.len()));
    }
    message::truncate_payload(&mut payload);
    let mut frame = MavFrame {
        incompat_flags: if signing.is_some() { INCOMPAT_FLAG_SIGNED } else { 0 },
        compat_flags: 0,
        seq: header.seq,
        sys_id: header.sys_id,
        comp_id: header.comp_id,
        msg_id: msg.msg_id(),
        payload,
        checksum: 0,
        signature: None,
    };
    frame.checksum = frame.compute_checksum()?;
    if let Some(ctx) = signing {
        let timestamp = ctx.next_send_timestamp(header.sys_id, header.comp_id, now);
        let sig = signing::compute_signature(
            &ctx.secret_key,
            &frame.unsigned_bytes(),
            ctx.link_id,
            timestamp,
        );
        frame.signature = Some(SignatureBlock {
            link_id: ctx.link_id,
            timestamp,
            sig,
        });
    }
    Ok(frame.to_bytes())
}

/// Parses the framing layer only: lengths, magic and signature presence.
/// Neither the checksum nor the signature is verified.
pub fn parse_frame(bytes: &[u8]) -> Result<MavFrame, MavError> {
    if bytes.is_empty() {
        return Err(MavError::Truncated);
    }
    if bytes[0] != MAGIC_V2 {
        return Err(MavError::BadMagic(bytes[0]));
    }
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(MavError::Truncated);
    }
    let len = usize::from(bytes[1]);
    let incompat_flags = bytes[2];
    let signed = incompat_flags & INCOMPAT_FLAG_SIGNED != 0;
    let body_end = HEADER_LEN + len;
    let total = body_end + CHECKSUM_LEN + if signed { SignatureBlock::LEN } else { 0 };
    if bytes.len() < total {
        return Err(MavError::Truncated);
    }
    if bytes.len() > total {
        return Err(MavError::TrailingBytes(bytes.len() - total));
    }
    let signature = signed.then(|| {
        let mut blk = [0u8; SignatureBlock::LEN];
        blk.copy_from_slice(&bytes[body_end + CHECKSUM_LEN..total]);
        SignatureBlock::from_bytes(&blk)
    });
    Ok(MavFrame {
        incompat_flags,
        compat_flags: bytes[3],
        seq: bytes[4],
        sys_id: bytes[5],
        comp_id: bytes[6],
        msg_id: u32::from_le_bytes([bytes[7], bytes[8], bytes[9], 0]),
        payload: bytes[HEADER_LEN..body_end].to_vec(),
        checksum: u16::from_le_bytes([bytes[body_end], bytes[body_end + 1]]),
        signature,
    })
}

/// Decodes and validates a frame. With a signing context, signed frames are
/// authenticated and replay-checked against `now`, and the verifier state
/// advances only when the whole frame is accepted.
pub fn decode_frame(
    bytes: &[u8],
    signing: Option<&mut SigningContext>,
    now: SigningTime,
) -> Result<(MavFrame, MavMessage), MavError> {
    let frame = parse_frame(bytes)?;
    if message::crc_extra(frame.msg_id).is_none() {
        return Err(MavError::UnknownMsgId(frame.msg_id));
    }
    if frame.compute_checksum()? != frame.checksum {
        return Err(MavError::BadCrc);
    }
    let Some(ctx) = signing else {
        let msg = frame.message()?;
        return Ok((frame, msg));
    };
    let Some(sig) = frame.signature else {
        if ctx.require_signed {
            return Err(MavError::UnsignedButRequired);
        }
        let msg = frame.message()?;
        return Ok((frame, msg));
    };
    let expected =
        signing::compute_signature(&ctx.secret_key, &frame.unsigned_bytes(), sig.link_id, sig.timestamp);
    if expected != sig.sig {
        return Err(MavError::BadSignature);
    }
    let key = (sig.link_id, frame.sys_id, frame.comp_id);
    if !ctx.timestamp_acceptable(key, sig.timestamp, now) {
        return Err(MavError::StaleTimestamp);
    }
    let msg = frame.message()?;
    ctx.commit(key, sig.timestamp);
    Ok((frame, msg))
}
