//! MAVLink-2 message signing state.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

/// Unix time of the signing epoch, 2015-01-01T00:00:00Z.
pub const SIGNING_EPOCH_UNIX_S: u64 = 1_420_070_400;

/// 60 s expressed in 10 µs timestamp units.
pub const DEFAULT_ACCEPTANCE_WINDOW: u64 = 6_000_000;

/// Signing timestamp: 48-bit count of 10 µs units since the signing epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SigningTime(pub u64);

impl SigningTime {
    pub const MAX: u64 = (1 << 48) - 1;

    /// Converts a Unix time in microseconds. Times before the epoch clamp to 0.
    pub fn from_unix_micros(unix_us: u64) -> Self {
        let epoch_us = SIGNING_EPOCH_UNIX_S * 1_000_000;
        Self((unix_us.saturating_sub(epoch_us) / 10).min(Self::MAX))
    }

    pub fn from_unix_secs(unix_s: u64) -> Self {
        Self::from_unix_micros(unix_s * 1_000_000)
    }
}

/// Trailer appended to signed frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureBlock {
    pub link_id: u8,
    pub timestamp: u64,
    pub sig: [u8; 6],
}

impl SignatureBlock {
    pub const LEN: usize = 13;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[0] = self.link_id;
        out[1..7].copy_from_slice(&self.timestamp.to_le_bytes()[..6]);
        out[7..].copy_from_slice(&self.sig);
        out
    }

    pub fn from_bytes(b: &[u8; Self::LEN]) -> Self {
        let mut ts = [0u8; 8];
        ts[..6].copy_from_slice(&b[1..7]);
        let mut sig = [0u8; 6];
        sig.copy_from_slice(&b[7..]);
        Self {
            link_id: b[0],
            timestamp: u64::from_le_bytes(ts),
            sig,
        }
    }
}

/// First six bytes of SHA-256(key ‖ header ‖ payload ‖ crc ‖ link_id ‖ timestamp).
///
/// `frame_prefix` is everything from the magic byte through the checksum.
pub fn compute_signature(key: &[u8; 32], frame_prefix: &[u8], link_id: u8, timestamp: u64) -> [u8; 6] {
    let mut h = Sha256::new();
    h.update(key);
    h.update(frame_prefix);
    h.update([link_id]);
    h.update(&timestamp.to_le_bytes()[..6]);
    let digest = h.finalize();
    let mut out = [0u8; 6];
    out.copy_from_slice(&digest[..6]);
    out
}

/// `(link_id, sys_id, comp_id)` identifies one signed stream.
pub type StreamKey = (u8, u8, u8);

/// Key material plus the sender and verifier replay state for one agent.
///
/// A context must not be shared between agents.
#[derive(Debug, Clone)]
pub struct SigningContext {
    pub secret_key: [u8; 32],
    pub link_id: u8,
    /// Maximum distance, in timestamp units, between a received timestamp
    /// and the verifier's clock.
    pub acceptance_window: u64,
    /// Reject unsigned frames when verifying.
    pub require_signed: bool,
    last_sent: BTreeMap<StreamKey, u64>,
    last_accepted: BTreeMap<StreamKey, u64>,
}

impl SigningContext {
    pub fn new(secret_key: [u8; 32], link_id: u8) -> Self {
        Self {
            secret_key,
            link_id,
            acceptance_window: DEFAULT_ACCEPTANCE_WINDOW,
            require_signed: true,
            last_sent: BTreeMap::new(),
            last_accepted: BTreeMap::new(),
        }
    }

    /// Next outgoing timestamp for a stream: the clock, or one past the
    /// previous timestamp if the clock has not advanced.
    pub(crate) fn next_send_timestamp(&mut self, sys_id: u8, comp_id: u8, now: SigningTime) -> u64 {
        let key = (self.link_id, sys_id, comp_id);
        let ts = match self.last_sent.get(&key) {
            Some(&prev) if now.0 <= prev => prev + 1,
            _ => now.0,
        }
        .min(SigningTime::MAX);
        self.last_sent.insert(key, ts);
        ts
    }

    pub fn last_accepted(&self, key: StreamKey) -> Option<u64> {
        self.last_accepted.get(&key).copied()
    }

    pub(crate) fn timestamp_acceptable(&self, key: StreamKey, ts: u64, now: SigningTime) -> bool {
        if let Some(&last) = self.last_accepted.get(&key) {
            if ts <= last {
                return false;
            }
        }
        ts.abs_diff(now.0) <= self.acceptance_window
    }

    pub(crate) fn commit(&mut self, key: StreamKey, ts: u64) {
        self.last_accepted.insert(key, ts);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_mapping() {
        assert_eq!(SigningTime::from_unix_secs(SIGNING_EPOCH_UNIX_S), SigningTime(0));
        assert_eq!(SigningTime::from_unix_secs(SIGNING_EPOCH_UNIX_S + 1), SigningTime(100_000));
        assert_eq!(SigningTime::from_unix_secs(0), SigningTime(0));
    }

    #[test]
    fn sender_timestamps_strictly_increase() {
        let mut ctx = SigningContext::new([0; 32], 0);
        let a = ctx.next_send_timestamp(1, 1, SigningTime(500));
        let b = ctx.next_send_timestamp(1, 1, SigningTime(500));
        let c = ctx.next_send_timestamp(1, 1, SigningTime(400));
        let d = ctx.next_send_timestamp(1, 1, SigningTime(900));
        assert_eq!((a, b, c, d), (500, 501, 502, 900));
        // Independent stream.
        assert_eq!(ctx.next_send_timestamp(2, 1, SigningTime(10)), 10);
    }

    #[test]
    fn block_bytes_roundtrip() {
        let blk = SignatureBlock {
            link_id: 9,
            timestamp: 0x0000_A1B2_C3D4_E5F6,
            sig: [1, 2, 3, 4, 5, 6],
        };
        assert_eq!(SignatureBlock::from_bytes(&blk.to_bytes()), blk);
    }
}
