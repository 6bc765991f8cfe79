//! Ground control station: heartbeats, RTT probes and scripted position
//! targets out; heartbeats, telemetry and probe echoes in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{decode_probe, encode_probe, signing_time, C2Config, Cadence, Emission, Tag};
use super::{GCS_COMP_ID, GCS_SYS_ID, UAV_SYS_ID};
use crate::mavlink::{
    self, CoordinateFrame, FrameHeader, GlobalPositionInt, Heartbeat, MavMessage, SetPositionTargetLocalNed,
    SigningContext,
};
use crate::netsim::{secs, Micros};

/// position-only type mask: ignore velocity, acceleration, yaw and yaw rate.
const POSITION_ONLY_MASK: u16 = 0x0DF8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeRecord {
    pub seq: u32,
    pub t_send: Micros,
    /// `None` until an echo arrives within the probe timeout.
    pub rtt: Option<Micros>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandSend {
    pub seq: u32,
    pub t_send: Micros,
    pub target: [f32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum GcsRx {
    Heartbeat,
    Telemetry(GlobalPositionInt),
    Echo { seq: u32, rtt: Micros, in_time: bool },
    Rejected(mavlink::MavError),
    Unknown,
}

pub struct Gcs {
    cfg: C2Config,
    signing: Option<SigningContext>,
    mav_seq: u8,
    heartbeat: Cadence,
    probe: Cadence,
    /// Slot start of the next command.
    cmd_slot: Cadence,
    next_cmd_at: Micros,
    rng: ChaCha8Rng,
    probes: Vec<ProbeRecord>,
    commands: Vec<CommandSend>,
    heartbeats_rx: u64,
    telemetry_rx: u64,
    last_telemetry: Option<(Micros, GlobalPositionInt)>,
    start: Micros,
}

impl Gcs {
    /// Starts all cadences at `start`. `key` enables signing when the config asks for it.
    pub fn new(cfg: &C2Config, key: [u8; 32], seed: u64, start: Micros) -> Self {
        let signing = cfg.signing_enabled.then(|| SigningContext::new(key, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6763_735f_636d_6473);
        let slot = Cadence::new(start + secs(cfg.command_offset_s), secs(cfg.command_interval_s));
        let next_cmd_at = slot.due() + draw_jitter(&mut rng, cfg.command_jitter_s);
        Self {
            heartbeat: Cadence::new(start, C2Config::period(cfg.heartbeat_rate_hz)),
            probe: Cadence::new(start, C2Config::period(cfg.rtt_probe_rate_hz)),
            cmd_slot: slot,
            next_cmd_at,
            rng,
            cfg: cfg.clone(),
            signing,
            mav_seq: 0,
            probes: Vec::new(),
            commands: Vec::new(),
            heartbeats_rx: 0,
            telemetry_rx: 0,
            last_telemetry: None,
            start,
        }
    }

    pub fn next_wakeup(&self) -> Micros {
        self.heartbeat.due().min(self.probe.due()).min(self.next_cmd_at)
    }

    fn frame(&mut self, msg: &MavMessage, at: Micros) -> Vec<u8> {
        let hdr = FrameHeader {
            seq: self.mav_seq,
            sys_id: GCS_SYS_ID,
            comp_id: GCS_COMP_ID,
        };
        self.mav_seq = self.mav_seq.wrapping_add(1);
        let now = signing_time(at, self.cfg.gcs_clock_offset_s);
        mavlink::encode_frame(msg, hdr, self.signing.as_mut(), now).expect("fixed-size message")
    }

    fn time_boot_ms(&self, at: Micros) -> u32 {
        ((at - self.start) / 1000) as u32
    }

    /// Emits everything due at or before `at`.
    pub fn tick(&mut self, at: Micros) -> Vec<Emission> {
        let mut out = Vec::new();
        while self.heartbeat.take(at).is_some() {
            let hb = MavMessage::Heartbeat(Heartbeat {
                mav_type: 6, // GCS
                autopilot: 8, // invalid: not an autopilot
                ..Default::default()
            });
            out.push(Emission {
                payload: self.frame(&hb, at),
                tag: Tag::Heartbeat,
            });
        }
        while self.probe.take(at).is_some() {
            let seq = self.probes.len() as u32;
            self.probes.push(ProbeRecord { seq, t_send: at, rtt: None });
            out.push(Emission {
                payload: encode_probe(seq, at),
                tag: Tag::Probe(seq),
            });
        }
        while self.next_cmd_at <= at {
            let seq = self.commands.len() as u32;
            let wp = self.cfg.mission[(seq as usize).min(self.cfg.mission.len() - 1)];
            let cmd = MavMessage::SetPositionTargetLocalNed(SetPositionTargetLocalNed {
                time_boot_ms: self.time_boot_ms(at),
                target_system: UAV_SYS_ID,
                target_component: 1,
                coordinate_frame: CoordinateFrame::LocalNed,
                type_mask: POSITION_ONLY_MASK,
                x: wp[0],
                y: wp[1],
                z: wp[2],
                ..Default::default()
            });
            self.commands.push(CommandSend {
                seq,
                t_send: at,
                target: wp,
            });
            out.push(Emission {
                payload: self.frame(&cmd, at),
                tag: Tag::Command(seq),
            });
            self.cmd_slot.take(Micros::MAX);
            self.next_cmd_at = self.cmd_slot.due() + draw_jitter(&mut self.rng, self.cfg.command_jitter_s);
        }
        out
    }

    pub fn receive(&mut self, at: Micros, payload: &[u8]) -> GcsRx {
        if let Some((seq, t_send)) = decode_probe(payload) {
            let rtt = at.saturating_sub(t_send);
            let in_time = rtt <= secs(self.cfg.probe_timeout_s);
            if let Some(p) = self.probes.get_mut(seq as usize) {
                if in_time && p.rtt.is_none() && p.t_send == t_send {
                    p.rtt = Some(rtt);
                }
            }
            return GcsRx::Echo { seq, rtt, in_time };
        }
        // The GCS accepts unsigned telemetry only when signing is off.
        let now = signing_time(at, self.cfg.gcs_clock_offset_s);
        match mavlink::decode_frame(payload, self.signing.as_mut(), now) {
            Ok((_, MavMessage::Heartbeat(_))) => {
                self.heartbeats_rx += 1;
                GcsRx::Heartbeat
            }
            Ok((_, MavMessage::GlobalPositionInt(g))) => {
                self.telemetry_rx += 1;
                self.last_telemetry = Some((at, g));
                GcsRx::Telemetry(g)
            }
            Ok(_) => GcsRx::Unknown,
            Err(e) => GcsRx::Rejected(e),
        }
    }

    pub fn probes(&self) -> &[ProbeRecord] {
        &self.probes
    }

    pub fn commands(&self) -> &[CommandSend] {
        &self.commands
    }

    pub fn heartbeats_received(&self) -> u64 {
        self.heartbeats_rx
    }

    pub fn telemetry_received(&self) -> u64 {
        self.telemetry_rx
    }

    pub fn last_telemetry(&self) -> Option<&GlobalPositionInt> {
        self.last_telemetry.as_ref().map(|(_, g)| g)
    }

    /// Age of the newest GLOBAL_POSITION_INT, or time since start if none arrived.
    pub fn telemetry_age(&self, at: Micros) -> Micros {
        at.saturating_sub(self.last_telemetry.map_or(self.start, |(t, _)| t))
    }
}

fn draw_jitter(rng: &mut ChaCha8Rng, jitter_s: f64) -> Micros {
    if jitter_s <= 0.0 {
        0
    } else {
        secs(rng.random::<f64>() * jitter_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(cfg: &C2Config, until: Micros) -> (Gcs, Vec<(Micros, Emission)>) {
        let mut g = Gcs::new(cfg, [7; 32], 1, 0);
        let mut out = Vec::new();
        loop {
            let t = g.next_wakeup();
            if t >= until {
                break;
            }
            out.extend(g.tick(t).into_iter().map(|e| (t, e)));
        }
        (g, out)
    }

    #[test]
    fn command_cadence_180s() {
        let (g, em) = run(&C2Config::default(), secs(180.0));
        assert_eq!(g.commands().len(), 36);
        assert_eq!(em.iter().filter(|(_, e)| e.tag == Tag::Heartbeat).count(), 180);
        assert_eq!(g.probes().len(), 1800);
    }

    #[test]
    fn jitter_keeps_one_command_per_slot() {
        let cfg = C2Config {
            command_jitter_s: 4.0,
            ..Default::default()
        };
        let (g, _) = run(&cfg, secs(180.0));
        assert_eq!(g.commands().len(), 36);
        for c in g.commands() {
            let slot = c.seq as u64 * secs(5.0);
            assert!(c.t_send >= slot && c.t_send < slot + secs(4.0));
        }
    }

    #[test]
    fn probe_echo_rtt_and_timeout() {
        let mut g = Gcs::new(&C2Config::default(), [0; 32], 1, 0);
        let em = g.tick(0);
        let probe = em.iter().find(|e| matches!(e.tag, Tag::Probe(0))).unwrap();
        // 630 µs each way.
        let rx = g.receive(1260, &probe.payload);
        assert_eq!(rx, GcsRx::Echo { seq: 0, rtt: 1260, in_time: true });
        assert_eq!(g.probes()[0].rtt, Some(1260));
        assert!((g.probes()[0].rtt.unwrap() as f64 / 1000.0 - 1.26).abs() < 1e-9);

        let em = g.tick(100_000);
        let probe = em.iter().find(|e| matches!(e.tag, Tag::Probe(1))).unwrap();
        let rx = g.receive(100_000 + secs(1.5), &probe.payload);
        assert!(matches!(rx, GcsRx::Echo { in_time: false, .. }));
        assert_eq!(g.probes()[1].rtt, None);
    }

    #[test]
    fn signed_commands_verify() {
        let cfg = C2Config {
            signing_enabled: true,
            ..Default::default()
        };
        let mut g = Gcs::new(&cfg, [9; 32], 1, 0);
        let em = g.tick(0);
        let cmd = em.iter().find(|e| matches!(e.tag, Tag::Command(0))).unwrap();
        let mut v = SigningContext::new([9; 32], 0);
        let (f, m) = mavlink::decode_frame(&cmd.payload, Some(&mut v), signing_time(0, 0.0)).unwrap();
        assert!(f.is_signed());
        assert!(matches!(m, MavMessage::SetPositionTargetLocalNed(_)));
    }
}
