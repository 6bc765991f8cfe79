//! One simulated run: network, core, agents and adversary driven by a
//! single event loop.

use std::collections::BTreeMap;
use std::iter::Peekable;

use super::config::ExperimentConfig;
use super::metrics::{
    CmdRecord, CmdStatus, EventRecord, RttRecord, EV_FAILSAFE, EV_PHASE_START, EV_POSITION, EV_REWRITE, EV_TAMPER,
};
use super::HarnessError;
use crate::adversary::{self, make_interceptor, TrafficGen};
use crate::agents::{derive_key, CommandOutcome, Emission, Gcs, Tag, Uav, UavRx, UAV_SYS_ID};
use crate::corecp::{CoreCp, CpEvent, NfKind, SbiOutcome, SessionState};
use crate::netsim::{secs, Endpoint, GnbId, Injection, Micros, NetEvent, Network, SimPacket, UeId};

/// Counters that are not part of the record streams.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunCounters {
    pub attack_sent: u64,
    /// Refused at submission (no session, unreachable).
    pub attack_refused: u64,
    pub attack_delivered: u64,
    /// Attack packets delivered to the UAV's C2 port.
    pub attack_to_uav_port: u64,
    pub attack_dropped: u64,
    pub attack_filtered: u64,
    pub c2_refused: u64,
    pub c2_dropped: u64,
    pub gcs_heartbeats_rx: u64,
    pub gcs_telemetry_rx: u64,
    pub uav_tamper_count: u64,
    pub rewrites: u64,
    /// NRF downtime at the end of the run.
    pub nrf_downtime_us: Micros,
    pub final_position: [f64; 3],
    /// Last target the GCS sent.
    pub gcs_final_target: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub run_id: String,
    pub rtt: Vec<RttRecord>,
    pub cmd: Vec<CmdRecord>,
    pub events: Vec<EventRecord>,
    pub counters: RunCounters,
}

pub fn run_id(cfg: &ExperimentConfig) -> String {
    format!("s{}", cfg.seed)
}

struct Gen {
    gen: Peekable<TrafficGen>,
    src: Endpoint,
    dst: Endpoint,
    src_port: u16,
}

struct World<'a> {
    cfg: &'a ExperimentConfig,
    run_id: String,
    net: Network,
    core: CoreCp,
    gcs: Gcs,
    uav: Uav,
    gcs_ue: UeId,
    uav_ue: UeId,
    hook_gnb: Option<GnbId>,
    last_rewrites: u64,
    /// Command seq -> (status, latency).
    cmd_status: BTreeMap<u32, (CmdStatus, Option<Micros>)>,
    events: Vec<EventRecord>,
    counters: RunCounters,
}

fn clean(s: &str) -> String {
    s.replace(',', ";")
}

impl World<'_> {
    fn log(&mut self, t: Micros, entity: &str, event: &str, detail: String) {
        self.events.push(EventRecord {
            run_id: self.run_id.clone(),
            t,
            entity: clean(entity),
            event: event.into(),
            detail: clean(&detail),
        });
    }

    fn log_core(&mut self, evs: Vec<CpEvent>) {
        if evs.is_empty() {
            return;
        }
        for e in evs {
            self.log(e.at, &e.entity(), e.event(), e.detail());
        }
        self.sync_sessions();
    }

    /// Mirrors core session state into the user plane.
    fn sync_sessions(&mut self) {
        for s in self.core.sessions() {
            let Some(ue) = self.net.ue(&s.ue_id) else {
                continue;
            };
            self.net.set_session_active(ue, s.state == SessionState::Active);
            if let Some(g) = self.net.gnb(&s.serving_gnb) {
                if self.net.serving_gnb(ue) != g {
                    self.net.set_serving_gnb(ue, g).expect("known gNB");
                }
            }
        }
    }

    fn send_c2(&mut self, from: UeId, to: UeId, e: Emission, at: Micros) {
        let c = &self.cfg.c2;
        let (src_port, dst_port) = if from == self.gcs_ue {
            (c.gcs_port, c.uav_port)
        } else {
            (c.uav_port, c.gcs_port)
        };
        let pkt = SimPacket {
            src: Endpoint::Ue(from),
            dst: Endpoint::Ue(to),
            src_port,
            dst_port,
            payload: e.payload,
            tag: e.tag.to_u64(),
        };
        if self.net.send(pkt, at).is_err() {
            self.counters.c2_refused += 1;
        }
    }

    fn position_event(&mut self, t: Micros, phase: &str) {
        let p = self.uav.state().pos_ned;
        self.log(t, "UAV", EV_POSITION, format!("phase={phase} n={:.3} e={:.3} d={:.3}", p[0], p[1], p[2]));
    }

    fn on_net_event(&mut self, ev: NetEvent) {
        let (pkt, delivered_at) = match ev {
            NetEvent::Delivered { at, pkt, .. } => (pkt, Some(at)),
            NetEvent::Dropped { pkt, .. } | NetEvent::HookDropped { pkt, .. } => {
                if Tag::from_u64(pkt.tag) == Some(Tag::Attack) {
                    self.counters.attack_dropped += 1;
                } else {
                    self.counters.c2_dropped += 1;
                }
                (pkt, None)
            }
            NetEvent::Filtered { pkt, .. } => {
                if Tag::from_u64(pkt.tag) == Some(Tag::Attack) {
                    self.counters.attack_filtered += 1;
                } else {
                    self.counters.c2_dropped += 1;
                }
                (pkt, None)
            }
        };
        let Some(at) = delivered_at else {
            return;
        };
        let tag = Tag::from_u64(pkt.tag);
        let c2 = &self.cfg.c2;
        if tag == Some(Tag::Attack) {
            self.counters.attack_delivered += 1;
            if pkt.dst == Endpoint::Ue(self.uav_ue) && pkt.dst_port == c2.uav_port {
                self.counters.attack_to_uav_port += 1;
            }
        }
        if pkt.dst == Endpoint::Ue(self.uav_ue) && pkt.dst_port == c2.uav_port {
            let tamper_before = self.uav.tamper_count();
            let rx = self.uav.receive(at, &pkt.payload);
            if self.uav.tamper_count() > tamper_before {
                self.log(at, "UAV", EV_TAMPER, format!("tag={:?}", tag.unwrap_or(Tag::Attack)));
            }
            let seq = match tag {
                Some(Tag::Command(s)) => Some(s),
                _ => None,
            };
            match (rx, seq) {
                (UavRx::Echo(e), _) => {
                    let (u, g) = (self.uav_ue, self.gcs_ue);
                    self.send_c2(u, g, e, at);
                }
                (UavRx::Command(CommandOutcome::Accepted { .. } | CommandOutcome::IgnoredFailsafe), Some(s)) => {
                    let t_send = self.gcs.commands()[s as usize].t_send;
                    self.cmd_status.insert(s, (CmdStatus::Delivered, Some(at - t_send)));
                }
                (UavRx::Command(CommandOutcome::VerificationFailed(_)) | UavRx::Rejected(_), Some(s)) => {
                    self.cmd_status.insert(s, (CmdStatus::TamperDropped, None));
                }
                _ => {}
            }
        } else if pkt.dst == Endpoint::Ue(self.gcs_ue) && pkt.dst_port == c2.gcs_port {
            self.gcs.receive(at, &pkt.payload);
        }
    }

    fn check_rewrites(&mut self, at: Micros) {
        let Some(g) = self.hook_gnb else {
            return;
        };
        let n = self.net.interceptor(g).map_or(0, |h| h.rewrite_count());
        if n > self.last_rewrites {
            let name = self.net.gnb_name(g).to_string();
            for _ in self.last_rewrites..n {
                self.log(at, &name, EV_REWRITE, format!("target_sys={UAV_SYS_ID}"));
            }
            self.last_rewrites = n;
        }
    }
}

fn internal(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Internal(e.to_string())
}

/// Runs a single repeat of `cfg` (its `repeats` field is ignored).
pub fn run_once(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let run_id = run_id(cfg);
    let topo = cfg.effective_topology();
    let mut net = Network::build(&topo, &cfg.effective_links(), cfg.seed).map_err(|e| HarnessError::Config {
        path: "topology".into(),
        msg: e.to_string(),
    })?;
    let c2 = cfg.c2_config();
    let gcs_ue = net.ue(&cfg.roles.gcs).ok_or_else(|| internal("gcs UE missing"))?;
    let uav_ue = net.ue(&cfg.roles.uav).ok_or_else(|| internal("uav UE missing"))?;

    let ue_gnbs: Vec<(String, String)> = topo
        .ues
        .iter()
        .map(|u| {
            let id = net.ue(&u.id).expect("built from topology");
            (u.id.clone(), net.gnb_name(net.serving_gnb(id)).to_string())
        })
        .collect();
    let core = CoreCp::new(cfg.core_config(), topo.gnbs.clone(), &ue_gnbs);

    if cfg.mitigations.port_filter {
        let rule = cfg.port_filter_rule();
        for s in &topo.slices {
            let id = net.slice(&s.id).expect("built from topology");
            net.install_filter(id, rule.clone()).map_err(internal)?;
        }
    }

    // Phase boundaries.
    let mut starts = Vec::with_capacity(cfg.phases.len());
    let mut t = 0.0;
    for p in &cfg.phases {
        starts.push(secs(t));
        t += p.duration_s;
    }
    let end = secs(t);
    let phase_bounds = |name: &str| -> (Micros, Micros) {
        let i = cfg.phases.iter().position(|p| p.name == name).expect("validated phase");
        (starts[i], starts.get(i + 1).copied().unwrap_or(end))
    };

    let mut hook_gnb = None;
    let mut attack_marks: Vec<(Micros, String, &str, String)> = Vec::new();
    if let Some(ic) = &cfg.adversary.interceptor {
        let g = net.gnb(&ic.gnb).ok_or_else(|| internal("interceptor gNB missing"))?;
        let (from, _) = phase_bounds(&ic.phase);
        let mut rule = ic.rule.clone();
        rule.active_from_s = rule.active_from_s.max(from as f64 / 1e6);
        let d = rule.displacement;
        let detail = format!("kind=interceptor displacement={}/{}/{}", d[0], d[1], d[2]);
        attack_marks.push((from, ic.gnb.clone(), "ATTACK_START", detail));
        net.set_gnb_interceptor(g, Some(Box::new(make_interceptor(rule)))).map_err(internal)?;
        hook_gnb = Some(g);
    }

    let mut gens = Vec::new();
    for (i, entry) in cfg.adversary.traffic.iter().enumerate() {
        let p = &entry.profile;
        let (from, until) = phase_bounds(&entry.phase);
        let src = match p.injection_point {
            Injection::UeUplink => Endpoint::Ue(net.ue(&p.source).ok_or_else(|| internal("unknown source UE"))?),
            Injection::CoreSide => Endpoint::Host(net.host(&p.source).ok_or_else(|| internal("unknown source host"))?),
        };
        let dst = Endpoint::Ue(net.ue(&p.target).ok_or_else(|| internal("unknown target UE"))?);
        let seed = cfg.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let gen = adversary::traffic(p, from, until, seed).map_err(internal)?;
        let kind = match p.kind {
            adversary::TrafficKind::ConstantUdp { .. } => "constant_udp",
            adversary::TrafficKind::BurstPortChurn { .. } => "burst_port_churn",
        };
        let detail = format!("kind={kind} target={} mean_pps={:.1}", p.target, p.mean_pps());
        attack_marks.push((from, p.source.clone(), "ATTACK_START", detail.clone()));
        attack_marks.push((until, p.source.clone(), "ATTACK_STOP", detail));
        gens.push(Gen {
            gen: gen.peekable(),
            src,
            dst,
            src_port: p.src_port,
        });
    }
    attack_marks.sort_by_key(|m| m.0);

    let sbi_steps = cfg.adversary.sbi.as_ref().map(|s| s.steps()).unwrap_or_default();
    let sbi_caller = cfg.adversary.sbi.as_ref().map(|s| s.caller_id.clone()).unwrap_or_default();
    let mut handovers = cfg.handovers.clone();
    handovers.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
    let handovers: Vec<_> = handovers.into_iter().map(|h| (secs(h.at_s), h)).collect();

    let key = derive_key(cfg.seed);
    let mut w = World {
        cfg,
        run_id,
        gcs: Gcs::new(&c2, key, cfg.seed, 0),
        uav: Uav::new(&c2, key, 0),
        net,
        core,
        gcs_ue,
        uav_ue,
        hook_gnb,
        last_rewrites: 0,
        cmd_status: BTreeMap::new(),
        events: Vec::new(),
        counters: RunCounters::default(),
    };
    w.sync_sessions();

    let (mut next_phase, mut next_sbi, mut next_ho, mut next_mark) = (0usize, 0usize, 0usize, 0usize);
    loop {
        let candidates = [
            starts.get(next_phase).copied(),
            w.core.next_due(),
            sbi_steps.get(next_sbi).map(|s| s.at),
            handovers.get(next_ho).map(|h| h.0),
            attack_marks.get(next_mark).map(|m| m.0),
            w.net.peek_time(),
            Some(w.gcs.next_wakeup()),
            Some(w.uav.next_wakeup()),
        ];
        let t = candidates
            .into_iter()
            .flatten()
            .chain(gens.iter_mut().filter_map(|g| g.gen.peek().map(|p| p.at)))
            .min()
            .unwrap_or(end);
        if t >= end {
            break;
        }

        while starts.get(next_phase).is_some_and(|&s| s <= t) {
            if next_phase > 0 {
                let prev = cfg.phases[next_phase - 1].name.clone();
                w.position_event(t, &prev);
            }
            w.log(t, "HARNESS", EV_PHASE_START, cfg.phases[next_phase].name.clone());
            next_phase += 1;
        }
        while attack_marks.get(next_mark).is_some_and(|m| m.0 <= t) {
            let (at, entity, ev, detail) = attack_marks[next_mark].clone();
            w.log(at, &entity, ev, detail);
            next_mark += 1;
        }

        if w.core.next_due().is_some_and(|d| d <= t) {
            let evs = w.core.advance_lifecycle(t);
            w.log_core(evs);
        }

        while w.net.peek_time().is_some_and(|p| p <= t) {
            if let Some(Some(ev)) = w.net.step() {
                w.on_net_event(ev);
            }
            w.check_rewrites(t);
        }

        while sbi_steps.get(next_sbi).is_some_and(|s| s.at <= t) {
            let step = &sbi_steps[next_sbi];
            let entry = adversary::submit_step(&mut w.core, step);
            let target = entry.target.to_string();
            let (ev, detail) = match &entry.outcome {
                Ok(SbiOutcome::Accepted { .. }) => ("SBI_ACCEPTED", format!("target={target}")),
                Ok(SbiOutcome::Rejected { reason, .. }) => {
                    ("SBI_REJECTED", format!("target={target} reason={}", reason.as_str()))
                }
                Ok(SbiOutcome::Crashed { nf }) => ("SBI_CRASH", format!("target={target} crashed={nf}")),
                Err(e) => ("SBI_ERROR", format!("target={target} error={e}")),
            };
            w.log_core(entry.events);
            w.log(step.at, &sbi_caller, ev, detail);
            next_sbi += 1;
        }

        while handovers.get(next_ho).is_some_and(|h| h.0 <= t) {
            let (at, h) = &handovers[next_ho];
            match w.core.handover(&h.ue, &h.from, &h.to, *at) {
                Ok((_, evs)) => w.log_core(evs),
                Err(e) => w.log(*at, &h.ue, "HANDOVER_REJECTED", e.to_string()),
            }
            next_ho += 1;
        }

        if w.gcs.next_wakeup() <= t {
            for e in w.gcs.tick(t) {
                let (g, u) = (w.gcs_ue, w.uav_ue);
                w.send_c2(g, u, e, t);
            }
        }
        if w.uav.next_wakeup() <= t {
            let (ems, fs) = w.uav.tick(t);
            if let Some(f) = fs {
                w.log(f.at, "UAV", EV_FAILSAFE, format!("heartbeat_gap_s={:.3}", f.heartbeat_gap as f64 / 1e6));
            }
            for e in ems {
                let (u, g) = (w.uav_ue, w.gcs_ue);
                w.send_c2(u, g, e, t);
            }
        }

        for g in gens.iter_mut() {
            while let Some(p) = g.gen.next_if(|p| p.at <= t) {
                let pkt = SimPacket {
                    src: g.src,
                    dst: g.dst,
                    src_port: g.src_port,
                    dst_port: p.dst_port,
                    payload: vec![0; p.payload_bytes],
                    tag: Tag::Attack.to_u64(),
                };
                w.counters.attack_sent += 1;
                if w.net.send(pkt, p.at).is_err() {
                    w.counters.attack_refused += 1;
                }
            }
        }
    }
    // Marks due exactly at the end of the run (ATTACK_STOP of the last phase).
    while let Some((at, entity, ev, detail)) = attack_marks.get(next_mark).cloned() {
        w.log(at, &entity, ev, detail);
        next_mark += 1;
    }
    let last = cfg.phases.last().expect("validated").name.clone();
    w.position_event(end, &last);

    let phase_of = |t: Micros| -> String {
        let i = starts.iter().rposition(|&s| s <= t).unwrap_or(0);
        cfg.phases[i].name.clone()
    };
    let rtt = w
        .gcs
        .probes()
        .iter()
        .map(|p| RttRecord {
            run_id: w.run_id.clone(),
            phase: phase_of(p.t_send),
            seq: p.seq,
            t_send: p.t_send,
            rtt: p.rtt,
        })
        .collect();
    let cmd = w
        .gcs
        .commands()
        .iter()
        .map(|c| {
            let (status, latency) = w.cmd_status.get(&c.seq).copied().unwrap_or((CmdStatus::Lost, None));
            CmdRecord {
                run_id: w.run_id.clone(),
                phase: phase_of(c.t_send),
                seq: c.seq,
                t_send: c.t_send,
                status,
                latency,
            }
        })
        .collect();

    let mut counters = std::mem::take(&mut w.counters);
    counters.gcs_heartbeats_rx = w.gcs.heartbeats_received();
    counters.gcs_telemetry_rx = w.gcs.telemetry_received();
    counters.uav_tamper_count = w.uav.tamper_count();
    counters.rewrites = w.last_rewrites;
    counters.nrf_downtime_us = w.core.nf(NfKind::Nrf).map_or(0, |n| n.downtime_at(end));
    counters.final_position = w.uav.state().pos_ned;
    counters.gcs_final_target = w.gcs.commands().last().map(|c| c.target.map(|x| x as f64));

    let mut events = std::mem::take(&mut w.events);
    events.sort_by_key(|e| e.t);
    Ok(RunOutput {
        run_id: w.run_id,
        rtt,
        cmd,
        events,
        counters,
    })
}
