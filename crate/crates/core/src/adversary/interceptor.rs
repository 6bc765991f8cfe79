//! gNB-side rewriter: sees cleartext MAVLink above PDCP and displaces
//! position targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::uav::geo_to_ned;
use crate::gtpu::{gtpu_encap, gtpu_parse};
use crate::mavlink::{self, message::MSG_ID_SET_POSITION_TARGET_LOCAL_NED, CoordinateFrame, MavMessage};
use crate::netsim::{GnbHook, HookContext, HookVerdict, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResignPolicy {
    /// Recompute the checksum so the frame still parses.
    #[default]
    FixCrcOnly,
    /// Leave the original checksum in place.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteRule {
    pub target_sys: u8,
    /// Attacker displacement from the GCS intent, NED metres.
    pub displacement: [f64; 3],
    #[serde(default)]
    pub resign_policy: ResignPolicy,
    /// Rewrites happen only inside `[active_from_s, active_until_s)`.
    #[serde(default)]
    pub active_from_s: f64,
    #[serde(default = "forever")]
    pub active_until_s: f64,
}

fn forever() -> f64 {
    f64::INFINITY
}

impl RewriteRule {
    pub fn new(target_sys: u8, displacement: [f64; 3]) -> Self {
        Self {
            target_sys,
            displacement,
            resign_policy: ResignPolicy::FixCrcOnly,
            active_from_s: 0.0,
            active_until_s: f64::INFINITY,
        }
    }

    fn active(&self, now: Micros) -> bool {
        let t = now as f64 / 1e6;
        t >= self.active_from_s && t < self.active_until_s
    }
}

/// Position estimate built from overheard GLOBAL_POSITION_INT.
#[derive(Debug, Clone, Copy)]
struct Track {
    reference: (i32, i32, i32),
    latest: (i32, i32, i32),
}

impl Track {
    fn ned(&self) -> [f64; 3] {
        geo_to_ned(self.reference, self.latest)
    }
}

pub struct Interceptor {
    rule: RewriteRule,
    tracks: BTreeMap<u8, Track>,
    rewrites: u64,
    /// (time, original target, position estimate) per rewrite.
    log: Vec<(Micros, [f64; 3], Option<[f64; 3]>)>,
}

pub fn make_interceptor(rule: RewriteRule) -> Interceptor {
    Interceptor {
        rule,
        tracks: BTreeMap::new(),
        rewrites: 0,
        log: Vec::new(),
    }
}

impl Interceptor {
    pub fn rule(&self) -> &RewriteRule {
        &self.rule
    }

    pub fn rewrites(&self) -> u64 {
        self.rewrites
    }

    /// Current local-NED estimate for `sys`, relative to its first overheard fix.
    pub fn estimate(&self, sys: u8) -> Option<[f64; 3]> {
        self.tracks.get(&sys).map(Track::ned)
    }

    fn observe(&mut self, sys: u8, g: &mavlink::GlobalPositionInt) {
        let fix = (g.lat, g.lon, g.alt);
        self.tracks
            .entry(sys)
            .and_modify(|t| t.latest = fix)
            .or_insert(Track {
                reference: fix,
                latest: fix,
            });
    }

    /// Returns the rewritten MAVLink bytes, or `None` to forward untouched.
    fn rewrite_mavlink(&mut self, now: Micros, bytes: &[u8]) -> Option<Vec<u8>> {
        // Parse structurally only: the attacker has no key, so signatures
        // are never checked here.
        let mut frame = mavlink::parse_frame(bytes).ok()?;
        match frame.message().ok()? {
            MavMessage::GlobalPositionInt(g) => {
                self.observe(frame.sys_id, &g);
                None
            }
            MavMessage::SetPositionTargetLocalNed(mut c)
                if frame.msg_id == MSG_ID_SET_POSITION_TARGET_LOCAL_NED
                    && c.target_system == self.rule.target_sys
                    && self.rule.active(now) =>
            {
                let est = self.estimate(c.target_system);
                let v = [c.x as f64, c.y as f64, c.z as f64];
                let base = est.unwrap_or([0.0; 3]);
                let intent = match c.coordinate_frame {
                    CoordinateFrame::LocalNed => v,
                    CoordinateFrame::LocalOffsetNed => [base[0] + v[0], base[1] + v[1], base[2] + v[2]],
                };
                let d = self.rule.displacement;
                let offset = [
                    intent[0] + d[0] - base[0],
                    intent[1] + d[1] - base[1],
                    intent[2] + d[2] - base[2],
                ];
                c.coordinate_frame = CoordinateFrame::LocalOffsetNed;
                c.x = offset[0] as f32;
                c.y = offset[1] as f32;
                c.z = offset[2] as f32;
                let stale_crc = frame.checksum;
                frame.replace_message(&MavMessage::SetPositionTargetLocalNed(c));
                if self.rule.resign_policy == ResignPolicy::None {
                    frame.checksum = stale_crc;
                }
                self.rewrites += 1;
                self.log.push((now, intent, est));
                Some(frame.to_bytes())
            }
            _ => None,
        }
    }

    /// Rewrite history: time, GCS intent and the position estimate used.
    pub fn history(&self) -> &[(Micros, [f64; 3], Option<[f64; 3]>)] {
        &self.log
    }
}

impl GnbHook for Interceptor {
    fn process(&mut self, ctx: &HookContext, gtpu_pdu: &[u8]) -> HookVerdict {
        let Ok((teid, mut inner)) = gtpu_parse(gtpu_pdu) else {
            return HookVerdict::Pass;
        };
        match self.rewrite_mavlink(ctx.now, &inner.payload) {
            Some(new_payload) => {
                inner.payload = new_payload;
                HookVerdict::Replace(gtpu_encap(teid, &inner))
            }
            None => HookVerdict::Pass,
        }
    }

    fn rewrite_count(&self) -> u64 {
        self.rewrites
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::uav::ned_to_geo;
    use crate::agents::{signing_time, GCS_SYS_ID, UAV_SYS_ID};
    use crate::gtpu::InnerDatagram;
    use crate::mavlink::{FrameHeader, GlobalPositionInt, MavError, SetPositionTargetLocalNed, SigningContext};
    use crate::netsim::{secs, GnbId};
    use proptest::prelude::*;
    use std::net::Ipv4Addr;

    const ORIGIN: [f64; 3] = [47.397742, 8.545594, 488.0];

    fn ctx(now: Micros) -> HookContext {
        HookContext { gnb: GnbId(0), now }
    }

    fn wrap(payload: Vec<u8>) -> Vec<u8> {
        let inner = InnerDatagram::new(Ipv4Addr::new(10, 45, 0, 2), Ipv4Addr::new(10, 45, 0, 3), 14550, 14551, payload);
        gtpu_encap(0x1000, &inner)
    }

    fn frame(msg: MavMessage, sys: u8, signing: Option<&mut SigningContext>) -> Vec<u8> {
        let hdr = FrameHeader {
            seq: 3,
            sys_id: sys,
            comp_id: 1,
        };
        mavlink::encode_frame(&msg, hdr, signing, signing_time(0, 0.0)).unwrap()
    }

    fn gpi_at(ned: [f64; 3]) -> MavMessage {
        let (lat, lon, alt) = ned_to_geo(ORIGIN, ned);
        MavMessage::GlobalPositionInt(GlobalPositionInt {
            lat,
            lon,
            alt,
            ..Default::default()
        })
    }

    fn cmd(x: f32, y: f32, z: f32) -> MavMessage {
        MavMessage::SetPositionTargetLocalNed(SetPositionTargetLocalNed {
            target_system: UAV_SYS_ID,
            coordinate_frame: CoordinateFrame::LocalNed,
            type_mask: 0x0DF8,
            x,
            y,
            z,
            ..Default::default()
        })
    }

    fn unwrap_inner(pdu: &[u8]) -> Vec<u8> {
        gtpu_parse(pdu).unwrap().1.payload
    }

    #[test]
    fn rewrite_targets_intent_plus_displacement() {
        let mut h = make_interceptor(RewriteRule::new(UAV_SYS_ID, [0.0, 50.0, 0.0]));
        assert_eq!(h.process(&ctx(0), &wrap(frame(gpi_at([0.0; 3]), UAV_SYS_ID, None))), HookVerdict::Pass);
        assert_eq!(
            h.process(&ctx(1), &wrap(frame(gpi_at([3.0, 4.0, -10.0]), UAV_SYS_ID, None))),
            HookVerdict::Pass
        );
        let orig = wrap(frame(cmd(10.0, 0.0, -10.0), GCS_SYS_ID, None));
        let HookVerdict::Replace(out) = h.process(&ctx(2), &orig) else {
            panic!("command not rewritten");
        };
        let (teid, inner) = gtpu_parse(&out).unwrap();
        let (teid0, inner0) = gtpu_parse(&orig).unwrap();
        assert_eq!(teid, teid0);
        assert_eq!(
            (inner.src_ip, inner.dst_ip, inner.src_port, inner.dst_port),
            (inner0.src_ip, inner0.dst_ip, inner0.src_port, inner0.dst_port)
        );
        let (_, m) = mavlink::decode_frame(&inner.payload, None, signing_time(0, 0.0)).unwrap();
        let MavMessage::SetPositionTargetLocalNed(c) = m else { panic!() };
        assert_eq!(c.coordinate_frame, CoordinateFrame::LocalOffsetNed);
        // est (3,4,-10) + offset = (10,50,-10)
        assert!((c.x - 7.0).abs() < 0.02 && (c.y - 46.0).abs() < 0.02 && c.z.abs() < 0.01);
        assert_eq!(h.rewrite_count(), 1);
    }

    #[test]
    fn non_matching_traffic_passes() {
        let mut h = make_interceptor(RewriteRule::new(UAV_SYS_ID, [0.0, 50.0, 0.0]));
        let hb = MavMessage::Heartbeat(Default::default());
        let other_target = MavMessage::SetPositionTargetLocalNed(SetPositionTargetLocalNed {
            target_system: 7,
            ..Default::default()
        });
        for p in [
            b"PRB\0\0\0\0\0\0\0\0\0\0\0\0".to_vec(),
            vec![0xFD, 1, 2],
            frame(hb, GCS_SYS_ID, None),
            frame(other_target, GCS_SYS_ID, None),
        ] {
            assert_eq!(h.process(&ctx(0), &wrap(p)), HookVerdict::Pass);
        }
        assert_eq!(h.process(&ctx(0), &[0u8; 5]), HookVerdict::Pass);
        assert_eq!(h.rewrite_count(), 0);
    }

    #[test]
    fn window_bounds_rewrites() {
        let mut h = make_interceptor(RewriteRule {
            active_from_s: 10.0,
            active_until_s: 20.0,
            ..RewriteRule::new(UAV_SYS_ID, [0.0, 50.0, 0.0])
        });
        let c = wrap(frame(cmd(1.0, 1.0, 1.0), GCS_SYS_ID, None));
        assert_eq!(h.process(&ctx(secs(9.9)), &c), HookVerdict::Pass);
        assert!(matches!(h.process(&ctx(secs(10.0)), &c), HookVerdict::Replace(_)));
        assert_eq!(h.process(&ctx(secs(20.0)), &c), HookVerdict::Pass);
    }

    #[test]
    fn signed_rewrite_keeps_crc_but_fails_signature() {
        let key = [5u8; 32];
        let mut tx = SigningContext::new(key, 0);
        let orig = frame(cmd(10.0, 0.0, -10.0), GCS_SYS_ID, Some(&mut tx));
        let mut h = make_interceptor(RewriteRule::new(UAV_SYS_ID, [0.0, 50.0, 0.0]));
        let HookVerdict::Replace(out) = h.process(&ctx(0), &wrap(orig.clone())) else { panic!() };
        let bytes = unwrap_inner(&out);
        let f = mavlink::parse_frame(&bytes).unwrap();
        assert_eq!(f.compute_checksum().unwrap(), f.checksum);
        // Signature block copied byte for byte.
        assert_eq!(bytes[bytes.len() - 13..], orig[orig.len() - 13..]);
        let mut rx = SigningContext::new(key, 0);
        assert_eq!(
            mavlink::decode_frame(&bytes, Some(&mut rx), signing_time(0, 0.0)).unwrap_err(),
            MavError::BadSignature
        );
    }

    #[test]
    fn no_resign_leaves_crc_stale() {
        let mut h = make_interceptor(RewriteRule {
            resign_policy: ResignPolicy::None,
            ..RewriteRule::new(UAV_SYS_ID, [0.0, 50.0, 0.0])
        });
        let HookVerdict::Replace(out) = h.process(&ctx(0), &wrap(frame(cmd(1.0, 2.0, 3.0), GCS_SYS_ID, None))) else {
            panic!()
        };
        assert_eq!(
            mavlink::decode_frame(&unwrap_inner(&out), None, signing_time(0, 0.0)).unwrap_err(),
            MavError::BadCrc
        );
    }

    proptest! {
        #[test]
        fn output_always_crc_valid_never_signature_valid(
            x in -1000f32..1000.0, y in -1000f32..1000.0, z in -100f32..0.0,
            d in prop::array::uniform3(-100f64..100.0),
            key in prop::array::uniform32(any::<u8>()),
        ) {
            let mut tx = SigningContext::new(key, 0);
            let orig = frame(cmd(x, y, z), GCS_SYS_ID, Some(&mut tx));
            let mut h = make_interceptor(RewriteRule::new(UAV_SYS_ID, d));
            if let HookVerdict::Replace(out) = h.process(&ctx(0), &wrap(orig)) {
                let bytes = unwrap_inner(&out);
                let f = mavlink::parse_frame(&bytes).unwrap();
                prop_assert_eq!(f.compute_checksum().unwrap(), f.checksum);
                let mut rx = SigningContext::new(key, 0);
                let r = mavlink::decode_frame(&bytes, Some(&mut rx), signing_time(0, 0.0));
                prop_assert!(r.is_err());
            } else {
                prop_assert!(false, "matching command passed through");
            }
        }
    }
}
