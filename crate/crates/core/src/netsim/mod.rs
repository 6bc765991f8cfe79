//! Discrete-event model of the user-plane forwarding graph.
//!
//! Legs, in path order:
//!
//! * `ul:<ue>`: UE radio uplink into its serving gNB, one per UE.
//! * `n3ul:<gnb>/<slice>`: gNB to UPF, shared by every UE of the slice on that gNB.
//! * `n3dl:<gnb>/<slice>`: UPF back through the gNB to the UE, shared likewise.
//! * `n6:<host>`: UPF to a data-network host.
//!
//! UE to UE traffic takes `ul`, `n3ul`, `n3dl`. UE to host takes `ul`, `n3ul`,
//! `n6`. Host traffic toward a UE is core-side injection and enters directly
//! at `n3dl`, bypassing the uplink queues. The gNB interception hook sees
//! uplink packets between `ul` and `n3ul`. Slice filters are enforced at UPF
//! egress, i.e. on entry to `n3dl` or `n6`.

pub mod queue;
pub mod sched;
pub mod topology;
pub mod trace;

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::gtpu::{self, InnerDatagram, N3_OVERHEAD};
pub use queue::{Admission, Fading, LinkQueue, QueueParams, QueueStats};
pub use sched::{millis, secs, Micros, Scheduler, MICROS_PER_SEC};
pub use topology::{Calibration, HostSpec, LinkProfile, SliceSpec, TopologyConfig, UeSpec};
pub use trace::{TraceEvent, TraceRecord};

/// IPv4 + UDP header bytes carried on every leg.
pub const INNER_HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("bad topology: {0}")]
    BadTopology(String),
    #[error("unknown slice {0}")]
    UnknownSlice(usize),
    #[error("unknown gNB {0}")]
    UnknownGnb(usize),
    #[error("unknown UE {0}")]
    UnknownUe(usize),
}

/// Synchronous refusal of a send.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SendError {
    #[error("destination unreachable: {0}")]
    Unreachable(&'static str),
    #[error("no active PDU session for UE {0}")]
    NoSession(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UeId(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GnbId(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SliceId(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LegId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Ue(UeId),
    Host(HostId),
}

/// Where a packet entered the forwarding graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Injection {
    UeUplink,
    CoreSide,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimPacket {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Vec<u8>,
    /// Opaque correlation tag for the sender's bookkeeping.
    pub tag: u64,
}

impl SimPacket {
    pub fn injected_at(&self) -> Injection {
        match self.src {
            Endpoint::Ue(_) => Injection::UeUplink,
            Endpoint::Host(_) => Injection::CoreSide,
        }
    }

    /// Bare inner datagram size (UE and N6 legs).
    pub fn inner_size(&self) -> usize {
        self.payload.len() + INNER_HEADER_LEN
    }

    pub fn size_on(&self, kind: LegKind) -> usize {
        match kind {
            LegKind::N3Uplink | LegKind::N3Downlink => self.inner_size() + N3_OVERHEAD,
            LegKind::RadioUplink | LegKind::N6 => self.inner_size(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LegKind {
    RadioUplink,
    N3Uplink,
    N3Downlink,
    N6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterDirection {
    /// Toward a UE (enforced on entry to the downlink leg).
    Downlink,
    /// Toward a data-network host (enforced on entry to the N6 leg).
    Uplink,
}

/// Drop rule evaluated at UPF egress for one slice.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRule {
    pub direction: FilterDirection,
    /// Match only packets that entered at this point; `None` matches any.
    #[serde(default)]
    pub origin: Option<Injection>,
    /// Destination ports; empty matches every port.
    #[serde(default)]
    pub dst_ports: Vec<u16>,
}

impl FilterRule {
    fn matches(&self, dir: FilterDirection, pkt: &SimPacket) -> bool {
        self.direction == dir
            && self.origin.is_none_or(|o| o == pkt.injected_at())
            && (self.dst_ports.is_empty() || self.dst_ports.contains(&pkt.dst_port))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FilterId(pub u64);

pub struct HookContext {
    pub gnb: GnbId,
    pub now: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HookVerdict {
    Pass,
    Replace(Vec<u8>),
    Drop,
}

/// Interception point in a gNB's uplink forwarder. Receives the G-PDU the
/// gNB is about to put on N3.
pub trait GnbHook {
    fn process(&mut self, ctx: &HookContext, gtpu_pdu: &[u8]) -> HookVerdict;

    /// Number of packets this hook has rewritten so far.
    fn rewrite_count(&self) -> u64 {
        0
    }
}

impl<F: FnMut(&HookContext, &[u8]) -> HookVerdict> GnbHook for F {
    fn process(&mut self, ctx: &HookContext, gtpu_pdu: &[u8]) -> HookVerdict {
        self(ctx, gtpu_pdu)
    }
}

/// Asynchronous outcome of a packet in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetEvent {
    Delivered { id: PacketId, at: Micros, pkt: SimPacket },
    /// Tail drop at a full queue.
    Dropped { id: PacketId, at: Micros, leg: LegId, pkt: SimPacket },
    /// Removed by a slice filter; unreachable at the enforcement leg.
    Filtered { id: PacketId, at: Micros, leg: LegId, pkt: SimPacket },
    /// Discarded by a gNB hook, or replaced with bytes that do not parse.
    HookDropped { id: PacketId, at: Micros, gnb: GnbId, pkt: SimPacket },
}

struct Ue {
    name: String,
    ip: Ipv4Addr,
    teid: u32,
    gnb: usize,
    slice: usize,
    session_active: bool,
}

struct Host {
    name: String,
    ip: Ipv4Addr,
    upf: usize,
    leg: usize,
}

struct Slice {
    spec: SliceSpec,
    upf: usize,
    filters: Vec<(FilterId, FilterRule)>,
}

struct Leg {
    name: String,
    kind: LegKind,
    queue: LinkQueue,
}

struct InFlight {
    pkt: SimPacket,
    path: Vec<usize>,
    /// Gnb whose hook applies before `path[1]`, if uplink through a gNB.
    gnb: Option<usize>,
}

struct Hop {
    id: u64,
    hop: usize,
}

/// Stable 64-bit FNV-1a; used to derive per-leg RNG streams.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct Network {
    gnbs: Vec<String>,
    upfs: Vec<String>,
    slices: Vec<Slice>,
    ues: Vec<Ue>,
    hosts: Vec<Host>,
    legs: Vec<Leg>,
    ul: Vec<usize>,
    /// `[gnb][slice]` leg indices.
    n3ul: Vec<Vec<usize>>,
    n3dl: Vec<Vec<usize>>,
    hooks: Vec<Option<Box<dyn GnbHook>>>,
    sched: Scheduler<Hop>,
    inflight: BTreeMap<u64, InFlight>,
    next_id: u64,
    next_filter: u64,
    trace: Option<Vec<TraceRecord>>,
}

impl Network {
    pub fn build(topo: &TopologyConfig, links: &LinkProfile, seed: u64) -> Result<Self, NetError> {
        topology::validate(topo)?;
        let idx = |list: &[String], name: &str| list.iter().position(|n| n == name);
        let mut legs = Vec::new();
        let mut add_leg = |name: String, kind: LegKind, params: QueueParams| {
            let q = LinkQueue::new(params, seed ^ fnv1a(&name));
            legs.push(Leg { name, kind, queue: q });
            legs.len() - 1
        };

        let slices: Vec<Slice> = topo
            .slices
            .iter()
            .map(|s| Slice {
                spec: s.clone(),
                upf: s.upf.as_deref().and_then(|u| idx(&topo.upfs, u)).unwrap_or(0),
                filters: Vec::new(),
            })
            .collect();

        let mut ues = Vec::new();
        let mut ul = Vec::new();
        for (i, u) in topo.ues.iter().enumerate() {
            let gnb = idx(&topo.gnbs, u.gnb.as_deref().unwrap_or_default()).expect("validated");
            let slice = topo.slices.iter().position(|s| s.id == u.slice).expect("validated");
            ues.push(Ue {
                name: u.id.clone(),
                ip: Ipv4Addr::new(10, 45, (i / 250) as u8, (i % 250 + 2) as u8),
                teid: 0x1000 + i as u32,
                gnb,
                slice,
                session_active: true,
            });
            ul.push(add_leg(format!("ul:{}", u.id), LegKind::RadioUplink, links.radio_uplink));
        }

        let mut n3ul = Vec::new();
        let mut n3dl = Vec::new();
        for g in &topo.gnbs {
            let mut up = Vec::new();
            let mut down = Vec::new();
            for s in &topo.slices {
                up.push(add_leg(format!("n3ul:{g}/{}", s.id), LegKind::N3Uplink, links.n3_uplink));
                down.push(add_leg(format!("n3dl:{g}/{}", s.id), LegKind::N3Downlink, links.n3_downlink));
            }
            n3ul.push(up);
            n3dl.push(down);
        }

        let mut hosts = Vec::new();
        for (i, h) in topo.hosts.iter().enumerate() {
            hosts.push(Host {
                name: h.id.clone(),
                ip: Ipv4Addr::new(10, 100, (i / 250) as u8, (i % 250 + 2) as u8),
                upf: h.upf.as_deref().and_then(|u| idx(&topo.upfs, u)).unwrap_or(0),
                leg: add_leg(format!("n6:{}", h.id), LegKind::N6, links.n6),
            });
        }

        Ok(Self {
            gnbs: topo.gnbs.clone(),
            upfs: topo.upfs.clone(),
            hooks: topo.gnbs.iter().map(|_| None).collect(),
            slices,
            ues,
            hosts,
            legs,
            ul,
            n3ul,
            n3dl,
            sched: Scheduler::new(),
            inflight: BTreeMap::new(),
            next_id: 0,
            next_filter: 0,
            trace: None,
        })
    }

    pub fn ue(&self, name: &str) -> Option<UeId> {
        self.ues.iter().position(|u| u.name == name).map(UeId)
    }
    pub fn host(&self, name: &str) -> Option<HostId> {
        self.hosts.iter().position(|h| h.name == name).map(HostId)
    }
    pub fn gnb(&self, name: &str) -> Option<GnbId> {
        self.gnbs.iter().position(|g| g == name).map(GnbId)
    }
    pub fn slice(&self, name: &str) -> Option<SliceId> {
        self.slices.iter().position(|s| s.spec.id == name).map(SliceId)
    }
    pub fn ue_name(&self, ue: UeId) -> &str {
        &self.ues[ue.0].name
    }
    pub fn gnb_name(&self, g: GnbId) -> &str {
        &self.gnbs[g.0]
    }
    pub fn upf_names(&self) -> &[String] {
        &self.upfs
    }
    pub fn endpoint_name(&self, e: Endpoint) -> &str {
        match e {
            Endpoint::Ue(u) => &self.ues[u.0].name,
            Endpoint::Host(h) => &self.hosts[h.0].name,
        }
    }
    pub fn endpoint_ip(&self, e: Endpoint) -> Ipv4Addr {
        match e {
            Endpoint::Ue(u) => self.ues[u.0].ip,
            Endpoint::Host(h) => self.hosts[h.0].ip,
        }
    }
    pub fn ue_teid(&self, ue: UeId) -> u32 {
        self.ues[ue.0].teid
    }

    pub fn now(&self) -> Micros {
        self.sched.now()
    }

    pub fn serving_gnb(&self, ue: UeId) -> GnbId {
        GnbId(self.ues[ue.0].gnb)
    }

    pub fn set_serving_gnb(&mut self, ue: UeId, gnb: GnbId) -> Result<(), NetError> {
        if gnb.0 >= self.gnbs.len() {
            return Err(NetError::UnknownGnb(gnb.0));
        }
        self.ues.get_mut(ue.0).ok_or(NetError::UnknownUe(ue.0))?.gnb = gnb.0;
        Ok(())
    }

    pub fn session_active(&self, ue: UeId) -> bool {
        self.ues[ue.0].session_active
    }

    /// Enables or blanks user-plane delivery for a UE.
    pub fn set_session_active(&mut self, ue: UeId, active: bool) {
        self.ues[ue.0].session_active = active;
    }

    /// N3 uplink leg a UE's traffic currently feeds.
    pub fn n3_uplink_leg(&self, ue: UeId) -> LegId {
        let u = &self.ues[ue.0];
        LegId(self.n3ul[u.gnb][u.slice])
    }

    pub fn n3_downlink_leg(&self, ue: UeId) -> LegId {
        let u = &self.ues[ue.0];
        LegId(self.n3dl[u.gnb][u.slice])
    }

    pub fn leg_count(&self) -> usize {
        self.legs.len()
    }

    pub fn leg_name(&self, leg: LegId) -> &str {
        &self.legs[leg.0].name
    }

    /// Queue counters for every leg, departures counted up to `at`.
    pub fn leg_stats(&mut self, at: Micros) -> Vec<(String, QueueStats, usize)> {
        self.legs
            .iter_mut()
            .map(|l| {
                let occ = l.queue.occupancy(at);
                (l.name.clone(), l.queue.stats_at(at), occ)
            })
            .collect()
    }

    pub fn install_filter(&mut self, slice: SliceId, rule: FilterRule) -> Result<FilterId, NetError> {
        let s = self.slices.get_mut(slice.0).ok_or(NetError::UnknownSlice(slice.0))?;
        let id = FilterId(self.next_filter);
        self.next_filter += 1;
        s.filters.push((id, rule));
        Ok(id)
    }

    /// Returns whether the filter existed.
    pub fn remove_filter(&mut self, slice: SliceId, id: FilterId) -> Result<bool, NetError> {
        let s = self.slices.get_mut(slice.0).ok_or(NetError::UnknownSlice(slice.0))?;
        let before = s.filters.len();
        s.filters.retain(|(f, _)| *f != id);
        Ok(s.filters.len() != before)
    }

    /// Installs `hook` on a gNB, returning any hook it replaces.
    pub fn set_gnb_interceptor(
        &mut self,
        gnb: GnbId,
        hook: Option<Box<dyn GnbHook>>,
    ) -> Result<Option<Box<dyn GnbHook>>, NetError> {
        let slot = self.hooks.get_mut(gnb.0).ok_or(NetError::UnknownGnb(gnb.0))?;
        Ok(std::mem::replace(slot, hook))
    }

    pub fn interceptor(&self, gnb: GnbId) -> Option<&dyn GnbHook> {
        self.hooks.get(gnb.0)?.as_deref()
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn route(&self, pkt: &SimPacket) -> Result<(Vec<usize>, Option<usize>), SendError> {
        let check_session = |u: UeId| {
            if self.ues[u.0].session_active {
                Ok(())
            } else {
                Err(SendError::NoSession(u.0))
            }
        };
        match (pkt.src, pkt.dst) {
            (Endpoint::Ue(a), Endpoint::Ue(b)) => {
                check_session(a)?;
                check_session(b)?;
                let (ua, ub) = (&self.ues[a.0], &self.ues[b.0]);
                if ua.slice != ub.slice {
                    return Err(SendError::Unreachable("UEs are in different slices"));
                }
                if !self.slices[ua.slice].spec.ue_to_ue_reachable {
                    return Err(SendError::Unreachable("slice forbids UE-to-UE traffic"));
                }
                let path = vec![self.ul[a.0], self.n3ul[ua.gnb][ua.slice], self.n3dl[ub.gnb][ub.slice]];
                Ok((path, Some(ua.gnb)))
            }
            (Endpoint::Ue(a), Endpoint::Host(h)) => {
                check_session(a)?;
                let ua = &self.ues[a.0];
                let host = &self.hosts[h.0];
                if self.slices[ua.slice].upf != host.upf {
                    return Err(SendError::Unreachable("host is behind another UPF"));
                }
                Ok((vec![self.ul[a.0], self.n3ul[ua.gnb][ua.slice], host.leg], Some(ua.gnb)))
            }
            (Endpoint::Host(h), Endpoint::Ue(b)) => {
                check_session(b)?;
                let ub = &self.ues[b.0];
                if self.slices[ub.slice].upf != self.hosts[h.0].upf {
                    return Err(SendError::Unreachable("host is behind another UPF"));
                }
                Ok((vec![self.n3dl[ub.gnb][ub.slice]], None))
            }
            (Endpoint::Host(_), Endpoint::Host(_)) => Err(SendError::Unreachable("no host-to-host path")),
        }
    }

    /// Submit a packet at time `at` (not earlier than [`Network::now`]).
    pub fn send(&mut self, pkt: SimPacket, at: Micros) -> Result<PacketId, SendError> {
        let (path, gnb) = self.route(&pkt)?;
        let id = self.next_id;
        self.next_id += 1;
        self.inflight.insert(id, InFlight { pkt, path, gnb });
        self.sched.schedule(at, Hop { id, hop: 0 });
        Ok(PacketId(id))
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.sched.peek_time()
    }

    pub fn in_flight(&self) -> usize {
        self.inflight.len()
    }

    fn record(&mut self, at: Micros, leg: usize, event: TraceEvent, pkt_idx: u64, times: Option<(Micros, Micros)>) {
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        let f = &self.inflight[&pkt_idx];
        let kind = self.legs[leg].kind;
        let name = |e: Endpoint| match e {
            Endpoint::Ue(u) => self.ues[u.0].name.clone(),
            Endpoint::Host(h) => self.hosts[h.0].name.clone(),
        };
        trace.push(TraceRecord {
            time_us: at,
            leg: self.legs[leg].name.clone(),
            event,
            size: f.pkt.size_on(kind),
            src: name(f.pkt.src),
            dst: name(f.pkt.dst),
            src_port: f.pkt.src_port,
            dst_port: f.pkt.dst_port,
            start_us: times.map(|t| t.0),
            depart_us: times.map(|t| t.1),
        });
    }

    /// Runs the gNB hook on an uplink packet. Returns false if it is dropped.
    fn apply_hook(&mut self, gnb: usize, id: u64, at: Micros) -> bool {
        let Some(hook) = self.hooks[gnb].as_mut() else {
            return true;
        };
        let f = &self.inflight[&id];
        let src_ip = match f.pkt.src {
            Endpoint::Ue(u) => self.ues[u.0].ip,
            Endpoint::Host(h) => self.hosts[h.0].ip,
        };
        let dst_ip = match f.pkt.dst {
            Endpoint::Ue(u) => self.ues[u.0].ip,
            Endpoint::Host(h) => self.hosts[h.0].ip,
        };
        let teid = match f.pkt.src {
            Endpoint::Ue(u) => self.ues[u.0].teid,
            Endpoint::Host(_) => 0,
        };
        let inner = InnerDatagram::new(src_ip, dst_ip, f.pkt.src_port, f.pkt.dst_port, f.pkt.payload.clone());
        let pdu = gtpu::gtpu_encap(teid, &inner);
        let ctx = HookContext { gnb: GnbId(gnb), now: at };
        match hook.process(&ctx, &pdu) {
            HookVerdict::Pass => true,
            HookVerdict::Drop => false,
            HookVerdict::Replace(bytes) => match gtpu::gtpu_parse(&bytes) {
                Ok((_, inner)) => {
                    let f = self.inflight.get_mut(&id).expect("in flight");
                    f.pkt.src_port = inner.src_port;
                    f.pkt.dst_port = inner.dst_port;
                    f.pkt.payload = inner.payload;
                    true
                }
                Err(_) => false,
            },
        }
    }

    fn filtered(&self, leg: usize, pkt: &SimPacket) -> bool {
        let (dir, slice) = match (self.legs[leg].kind, pkt.dst, pkt.src) {
            (LegKind::N3Downlink, Endpoint::Ue(u), _) => (FilterDirection::Downlink, self.ues[u.0].slice),
            (LegKind::N6, _, Endpoint::Ue(u)) => (FilterDirection::Uplink, self.ues[u.0].slice),
            _ => return false,
        };
        self.slices[slice].filters.iter().any(|(_, r)| r.matches(dir, pkt))
    }

    /// Processes the next internal event. Returns an outcome when a packet
    /// leaves the graph; `None` for intermediate hops or an empty queue.
    pub fn step(&mut self) -> Option<Option<NetEvent>> {
        let (at, Hop { id, hop }) = self.sched.pop()?;
        Some(self.process(at, id, hop))
    }

    /// Steps until the next packet outcome or until no event is due at or
    /// before `until`.
    pub fn next_outcome(&mut self, until: Micros) -> Option<NetEvent> {
        while self.peek_time().is_some_and(|t| t <= until) {
            if let Some(Some(ev)) = self.step() {
                return Some(ev);
            }
        }
        None
    }

    fn process(&mut self, at: Micros, id: u64, hop: usize) -> Option<NetEvent> {
        let f = &self.inflight[&id];
        if hop == f.path.len() {
            let last = *f.path.last().expect("nonempty path");
            self.record(at, last, TraceEvent::Deliver, id, None);
            let f = self.inflight.remove(&id).expect("in flight");
            return Some(NetEvent::Delivered { id: PacketId(id), at, pkt: f.pkt });
        }
        let leg = f.path[hop];
        let kind = self.legs[leg].kind;

        if kind == LegKind::N3Uplink {
            if let Some(g) = f.gnb {
                if !self.apply_hook(g, id, at) {
                    self.record(at, leg, TraceEvent::HookDrop, id, None);
                    let f = self.inflight.remove(&id).expect("in flight");
                    return Some(NetEvent::HookDropped { id: PacketId(id), at, gnb: GnbId(g), pkt: f.pkt });
                }
            }
        }
        let f = &self.inflight[&id];
        if self.filtered(leg, &f.pkt) {
            self.record(at, leg, TraceEvent::Filter, id, None);
            let f = self.inflight.remove(&id).expect("in flight");
            return Some(NetEvent::Filtered { id: PacketId(id), at, leg: LegId(leg), pkt: f.pkt });
        }

        let size = f.pkt.size_on(kind);
        let flow = match f.pkt.dst {
            Endpoint::Ue(u) => (u.0 as u64) << 32,
            Endpoint::Host(h) => (1 << 63) | (h.0 as u64) << 32,
        } | (f.pkt.dst_port as u64) << 16
            | f.pkt.src_port as u64;
        let q = &mut self.legs[leg].queue;
        match q.offer(at, size, flow) {
            Admission::Dropped => {
                self.record(at, leg, TraceEvent::Drop, id, None);
                let f = self.inflight.remove(&id).expect("in flight");
                Some(NetEvent::Dropped { id: PacketId(id), at, leg: LegId(leg), pkt: f.pkt })
            }
            Admission::Accepted { start, depart } => {
                let prop = q.params.prop_delay_us;
                self.record(at, leg, TraceEvent::Enqueue, id, Some((start, depart)));
                self.sched.schedule(depart + prop, Hop { id, hop: hop + 1 });
                None
            }
        }
    }
}
