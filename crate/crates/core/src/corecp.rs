//! Control-plane availability model: NRF/SMF/AMF lifecycles, SBI request
//! handling, crash-loop backoff and the handover procedure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{millis, secs, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NfKind {
    Nrf,
    Smf,
    Amf,
}

impl NfKind {
    pub const ALL: [NfKind; 3] = [NfKind::Nrf, NfKind::Smf, NfKind::Amf];

    pub fn as_str(self) -> &'static str {
        match self {
            NfKind::Nrf => "NRF",
            NfKind::Smf => "SMF",
            NfKind::Amf => "AMF",
        }
    }
}

impl fmt::Display for NfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NfPhase {
    Up,
    Crashed,
    BackoffWait,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackoffConfig {
    pub initial_s: f64,
    pub max_s: f64,
    /// Up time after which the consecutive-crash count resets.
    pub reset_after_s: f64,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self {
            initial_s: 10.0,
            max_s: 300.0,
            reset_after_s: 600.0,
        }
    }
}

impl BackoffConfig {
    /// Wait before restart after the `k`-th consecutive crash (1-based).
    pub fn wait(&self, k: u32) -> Micros {
        let exp = k.saturating_sub(1).min(62) as i32;
        secs((self.initial_s * 2f64.powi(exp)).min(self.max_s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreConfig {
    pub backoff: BackoffConfig,
    /// User-plane blank during a handover with a healthy core. Typical
    /// Xn/N2 handovers complete in tens to low hundreds of milliseconds.
    pub interruption_ms: f64,
    /// How long handover coordination waits for SMF service before the
    /// session is declared lost.
    pub cp_deadline_ms: f64,
    /// Session re-establishment round trip once the core is healthy again.
    pub reestablish_ms: f64,
    /// Interval at which an unregistered SMF/AMF retries NRF registration.
    pub registration_retry_s: f64,
    /// Semantic validation of subscribe URIs and session-modify requests.
    pub hardened: bool,
    /// Caller identities admitted by the SBI gate. `None` disables the gate.
    pub allowlist: Option<Vec<String>>,
    /// Fixed per-request cost of the gate, microseconds.
    pub gate_latency_us: Micros,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            backoff: BackoffConfig::default(),
            interruption_ms: 150.0,
            cp_deadline_ms: 2000.0,
            reestablish_ms: 500.0,
            registration_retry_s: 2.0,
            hardened: false,
            allowlist: None,
            gate_latency_us: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NfState {
    pub nf_kind: NfKind,
    pub phase: NfPhase,
    pub restart_count: u32,
    pub consecutive_crashes: u32,
    pub next_restart_at: Option<Micros>,
    pub registered_with_nrf: bool,
    pub hardened: bool,
    pub identity_allowlist: Option<BTreeSet<String>>,
    up_since: Micros,
    crashed_at: Option<Micros>,
    next_register_at: Option<Micros>,
    downtime: Micros,
    /// (crash time, restart time) per completed or ongoing outage.
    outages: Vec<(Micros, Option<Micros>)>,
}

impl NfState {
    fn new(kind: NfKind, cfg: &CoreConfig) -> Self {
        Self {
            nf_kind: kind,
            phase: NfPhase::Up,
            restart_count: 0,
            consecutive_crashes: 0,
            next_restart_at: None,
            registered_with_nrf: kind != NfKind::Nrf,
            hardened: cfg.hardened,
            identity_allowlist: cfg.allowlist.as_ref().map(|l| l.iter().cloned().collect()),
            up_since: 0,
            crashed_at: None,
            next_register_at: None,
            downtime: 0,
            outages: Vec::new(),
        }
    }

    pub fn is_up(&self) -> bool {
        self.phase == NfPhase::Up
    }

    /// Up and, for SMF/AMF, registered with the NRF.
    pub fn is_serving(&self) -> bool {
        self.is_up() && (self.nf_kind == NfKind::Nrf || self.registered_with_nrf)
    }

    /// Total time not Up, counted through `at`.
    pub fn downtime_at(&self, at: Micros) -> Micros {
        self.downtime + self.crashed_at.map_or(0, |c| at.saturating_sub(c))
    }

    pub fn outages(&self) -> &[(Micros, Option<Micros>)] {
        &self.outages
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestIndication {
    UeReqPduSesMod,
    NwReqPduSesMod,
    UeReqPduSesRel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UpCnxState {
    Activated,
    Deactivated,
    Suspended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SbiKind {
    NfStatusSubscribe {
        notification_uri: String,
    },
    PduSessionModify {
        session_ref: u32,
        request_indication: RequestIndication,
        up_cnx_state: UpCnxState,
    },
    Heartbeat,
    Register,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbiRequest {
    pub caller_id: String,
    pub target: NfKind,
    #[serde(flatten)]
    pub kind: SbiKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Unauthorized,
    Unavailable,
    BadUri,
    StateMismatch,
    NotSupported,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Unauthorized => "Unauthorized",
            RejectReason::Unavailable => "Unavailable",
            RejectReason::BadUri => "BadUri",
            RejectReason::StateMismatch => "StateMismatch",
            RejectReason::NotSupported => "NotSupported",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbiOutcome {
    Accepted { latency_us: Micros },
    Rejected { reason: RejectReason, latency_us: Micros },
    /// The target crashed while handling the request.
    Crashed { nf: NfKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpError {
    #[error("unknown SBI target {0}")]
    UnknownTarget(NfKind),
    #[error("unknown session {0}")]
    UnknownSession(u32),
    #[error("unknown UE {0:?}")]
    UnknownUe(String),
    #[error("unknown gNB {0:?}")]
    UnknownGnb(String),
    #[error("UE {ue:?} is not served by {gnb:?}")]
    NotServing { ue: String, gnb: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionState {
    Active,
    Suspended,
    Releasing,
    Down,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Active => "ACTIVE",
            SessionState::Suspended => "SUSPENDED",
            SessionState::Releasing => "RELEASING",
            SessionState::Down => "DOWN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PduSessionRecord {
    pub ue_id: String,
    pub session_ref: u32,
    pub state: SessionState,
    pub serving_gnb: String,
    pub up_cnx_state: UpCnxState,
    pub pfcp_flags: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandoverOutcome {
    /// Source and target are the same gNB.
    NoOp,
    /// Healthy core; user plane resumes at `resume_at`.
    Started { resume_at: Micros },
    /// Core cannot coordinate yet; the session is lost if SMF service does
    /// not return before `deadline`.
    Pending { deadline: Micros },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpEventKind {
    NfCrashed { nf: NfKind, restart_count: u32 },
    NfBackoff { nf: NfKind, wait: Micros },
    NfRestarted { nf: NfKind, restart_count: u32 },
    NfRegistered { nf: NfKind },
    NfRegistrationFailed { nf: NfKind },
    HandoverStarted { ue: String, from: String, to: String },
    Session { ue: String, state: SessionState, gnb: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpEvent {
    pub at: Micros,
    pub kind: CpEventKind,
}

impl CpEvent {
    pub fn entity(&self) -> String {
        match &self.kind {
            CpEventKind::NfCrashed { nf, .. }
            | CpEventKind::NfBackoff { nf, .. }
            | CpEventKind::NfRestarted { nf, .. }
            | CpEventKind::NfRegistered { nf }
            | CpEventKind::NfRegistrationFailed { nf } => nf.to_string(),
            CpEventKind::HandoverStarted { ue, .. } | CpEventKind::Session { ue, .. } => ue.clone(),
        }
    }

    pub fn event(&self) -> &'static str {
        match &self.kind {
            CpEventKind::NfCrashed { .. } => "NF_CRASH",
            CpEventKind::NfBackoff { .. } => "NF_BACKOFF",
            CpEventKind::NfRestarted { .. } => "NF_RESTART",
            CpEventKind::NfRegistered { .. } => "NF_REGISTERED",
            CpEventKind::NfRegistrationFailed { .. } => "NF_REGISTER_FAILED",
            CpEventKind::HandoverStarted { .. } => "HANDOVER",
            CpEventKind::Session { state, .. } => match state {
                SessionState::Active => "SESSION_ACTIVE",
                SessionState::Suspended => "SESSION_SUSPENDED",
                SessionState::Releasing => "SESSION_RELEASING",
                SessionState::Down => "SESSION_DOWN",
            },
        }
    }

    pub fn detail(&self) -> String {
        match &self.kind {
            CpEventKind::NfCrashed { restart_count, .. } | CpEventKind::NfRestarted { restart_count, .. } => {
                format!("restart_count={restart_count}")
            }
            CpEventKind::NfBackoff { wait, .. } => format!("wait_s={:.3}", *wait as f64 / 1e6),
            CpEventKind::NfRegistered { .. } | CpEventKind::NfRegistrationFailed { .. } => String::new(),
            CpEventKind::HandoverStarted { from, to, .. } => format!("from={from} to={to}"),
            CpEventKind::Session { gnb, .. } => format!("gnb={gnb}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Pending {
    /// Healthy-path resume.
    Resume { at: Micros },
    /// Waiting for the core; lost at `deadline`.
    Coordinating { started: Micros, deadline: Micros },
    /// Session lost; waiting for SMF service to re-establish.
    Lost,
    /// Re-establishment in progress, completes at `at`.
    Reestablishing { at: Micros },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Procedure {
    session: usize,
    to_gnb: String,
    step: Pending,
}

/// Notification URIs that name a host and port but no resource path.
fn uri_pathless(uri: &url::Url) -> bool {
    uri.has_host() && uri.path().trim_matches('/').is_empty()
}

pub struct CoreCp {
    cfg: CoreConfig,
    gnbs: Vec<String>,
    nfs: BTreeMap<NfKind, NfState>,
    sessions: Vec<PduSessionRecord>,
    procedures: Vec<Procedure>,
    subscriptions: u64,
}

impl CoreCp {
    /// `ues` lists `(ue_id, serving_gnb)`; each gets an Active session with
    /// `session_ref` equal to its index + 1.
    pub fn new(cfg: CoreConfig, gnbs: Vec<String>, ues: &[(String, String)]) -> Self {
        Self::with_nfs(cfg, gnbs, ues, &NfKind::ALL)
    }

    pub fn with_nfs(cfg: CoreConfig, gnbs: Vec<String>, ues: &[(String, String)], kinds: &[NfKind]) -> Self {
        let nfs = kinds.iter().map(|&k| (k, NfState::new(k, &cfg))).collect();
        let sessions = ues
            .iter()
            .enumerate()
            .map(|(i, (ue, gnb))| PduSessionRecord {
                ue_id: ue.clone(),
                session_ref: i as u32 + 1,
                state: SessionState::Active,
                serving_gnb: gnb.clone(),
                up_cnx_state: UpCnxState::Activated,
                pfcp_flags: 0,
            })
            .collect();
        Self {
            cfg,
            gnbs,
            nfs,
            sessions,
            procedures: Vec::new(),
            subscriptions: 0,
        }
    }

    pub fn config(&self) -> &CoreConfig {
        &self.cfg
    }

    pub fn nf(&self, kind: NfKind) -> Option<&NfState> {
        self.nfs.get(&kind)
    }

    pub fn sessions(&self) -> &[PduSessionRecord] {
        &self.sessions
    }

    pub fn session_for(&self, ue: &str) -> Option<&PduSessionRecord> {
        self.sessions.iter().find(|s| s.ue_id == ue)
    }

    pub fn accepted_subscriptions(&self) -> u64 {
        self.subscriptions
    }

    /// Hash of all NF and session state.
    pub fn state_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for nf in self.nfs.values() {
            nf.hash(&mut h);
        }
        self.sessions.hash(&mut h);
        self.procedures.hash(&mut h);
        self.subscriptions.hash(&mut h);
        h.finish()
    }

    fn serving(&self, kind: NfKind) -> bool {
        self.nfs.get(&kind).is_some_and(|n| n.is_serving())
    }

    /// SMF and AMF both Up and registered.
    pub fn core_healthy(&self) -> bool {
        self.serving(NfKind::Smf) && self.serving(NfKind::Amf)
    }

    fn crash(&mut self, kind: NfKind, at: Micros, out: &mut Vec<CpEvent>) {
        let backoff = self.cfg.backoff;
        let nf = self.nfs.get_mut(&kind).expect("known NF");
        if at.saturating_sub(nf.up_since) >= secs(backoff.reset_after_s) {
            nf.consecutive_crashes = 0;
        }
        nf.consecutive_crashes += 1;
        nf.phase = NfPhase::Crashed;
        nf.crashed_at = Some(at);
        nf.next_restart_at = Some(at + backoff.wait(nf.consecutive_crashes));
        nf.next_register_at = None;
        nf.outages.push((at, None));
        out.push(CpEvent {
            at,
            kind: CpEventKind::NfCrashed {
                nf: kind,
                restart_count: nf.restart_count,
            },
        });
    }

    /// Inject a crash directly (fault injection independent of any request).
    pub fn force_crash(&mut self, kind: NfKind, at: Micros) -> Vec<CpEvent> {
        let mut out = self.advance_lifecycle(at);
        if self.nfs.get(&kind).is_some_and(|n| n.is_up()) {
            self.crash(kind, at, &mut out);
        }
        out
    }

    pub fn sbi_submit(&mut self, req: &SbiRequest, at: Micros) -> Result<(SbiOutcome, Vec<CpEvent>), CpError> {
        let mut events = self.advance_lifecycle(at);
        let nf = self.nfs.get(&req.target).ok_or(CpError::UnknownTarget(req.target))?;
        let gated = nf.identity_allowlist.is_some();
        let latency_us = if gated { self.cfg.gate_latency_us } else { 0 };
        let reject = |reason| Ok(SbiOutcome::Rejected { reason, latency_us });

        let outcome = 'o: {
            if let Some(allow) = &nf.identity_allowlist {
                if !allow.contains(&req.caller_id) {
                    break 'o reject(RejectReason::Unauthorized);
                }
            }
            if !nf.is_serving() {
                break 'o reject(RejectReason::Unavailable);
            }
            let hardened = nf.hardened;
            match (&req.kind, req.target) {
                (SbiKind::NfStatusSubscribe { notification_uri }, NfKind::Nrf) => {
                    match url::Url::parse(notification_uri) {
                        Ok(u) if !uri_pathless(&u) => {
                            self.subscriptions += 1;
                            Ok(SbiOutcome::Accepted { latency_us })
                        }
                        Ok(_) if !hardened => {
                            self.crash(NfKind::Nrf, at, &mut events);
                            Ok(SbiOutcome::Crashed { nf: NfKind::Nrf })
                        }
                        _ => reject(RejectReason::BadUri),
                    }
                }
                (
                    SbiKind::PduSessionModify {
                        session_ref,
                        request_indication,
                        up_cnx_state,
                    },
                    NfKind::Smf,
                ) => {
                    let Some(i) = self.sessions.iter().position(|s| s.session_ref == *session_ref) else {
                        break 'o Err(CpError::UnknownSession(*session_ref));
                    };
                    let mismatch = *request_indication == RequestIndication::UeReqPduSesMod
                        && *up_cnx_state == UpCnxState::Suspended
                        && self.sessions[i].state == SessionState::Active;
                    if mismatch {
                        if hardened {
                            break 'o reject(RejectReason::StateMismatch);
                        }
                        self.crash(NfKind::Smf, at, &mut events);
                        break 'o Ok(SbiOutcome::Crashed { nf: NfKind::Smf });
                    }
                    self.sessions[i].pfcp_flags = self.sessions[i].pfcp_flags.wrapping_add(1);
                    Ok(SbiOutcome::Accepted { latency_us })
                }
                (SbiKind::Heartbeat | SbiKind::Register, _) => Ok(SbiOutcome::Accepted { latency_us }),
                _ => reject(RejectReason::NotSupported),
            }
        }?;
        events.extend(self.advance_lifecycle(at));
        Ok((outcome, events))
    }

    /// Earliest time at which [`CoreCp::advance_lifecycle`] has work.
    pub fn next_due(&self) -> Option<Micros> {
        let nf_due = self.nfs.values().filter_map(|n| match n.phase {
            NfPhase::Crashed => n.crashed_at,
            NfPhase::BackoffWait => n.next_restart_at,
            NfPhase::Up => n.next_register_at,
        });
        let proc_due = self.procedures.iter().filter_map(|p| match p.step {
            Pending::Resume { at } | Pending::Reestablishing { at } => Some(at),
            Pending::Coordinating { deadline, .. } => Some(deadline),
            Pending::Lost => None,
        });
        nf_due.chain(proc_due).min()
    }

    fn set_session(&mut self, i: usize, state: SessionState, gnb: Option<&str>, at: Micros, out: &mut Vec<CpEvent>) {
        let s = &mut self.sessions[i];
        if let Some(g) = gnb {
            s.serving_gnb = g.to_string();
        }
        s.state = state;
        out.push(CpEvent {
            at,
            kind: CpEventKind::Session {
                ue: s.ue_id.clone(),
                state,
                gnb: s.serving_gnb.clone(),
            },
        });
    }

    /// Applies every lifecycle transition due at or before `at`, in time order.
    pub fn advance_lifecycle(&mut self, at: Micros) -> Vec<CpEvent> {
        let mut out = Vec::new();
        while let Some(t) = self.next_due().filter(|&t| t <= at) {
            self.step_at(t, &mut out);
        }
        // Transitions that depend on health (not on a timer).
        self.resolve_waiting(at);
        out
    }

    fn step_at(&mut self, t: Micros, out: &mut Vec<CpEvent>) {
        let nrf_up = self.nfs.get(&NfKind::Nrf).is_some_and(|n| n.is_up());
        let retry = secs(self.cfg.registration_retry_s);
        for (&kind, nf) in self.nfs.iter_mut() {
            match nf.phase {
                NfPhase::Crashed if nf.crashed_at == Some(t) => {
                    nf.phase = NfPhase::BackoffWait;
                    let wait = nf.next_restart_at.expect("scheduled") - t;
                    out.push(CpEvent {
                        at: t,
                        kind: CpEventKind::NfBackoff { nf: kind, wait },
                    });
                }
                NfPhase::BackoffWait if nf.next_restart_at == Some(t) => {
                    nf.phase = NfPhase::Up;
                    nf.restart_count += 1;
                    nf.up_since = t;
                    nf.next_restart_at = None;
                    if let Some(c) = nf.crashed_at.take() {
                        nf.downtime += t - c;
                    }
                    if let Some(o) = nf.outages.last_mut() {
                        o.1 = Some(t);
                    }
                    out.push(CpEvent {
                        at: t,
                        kind: CpEventKind::NfRestarted {
                            nf: kind,
                            restart_count: nf.restart_count,
                        },
                    });
                    if kind != NfKind::Nrf {
                        nf.registered_with_nrf = false;
                        nf.next_register_at = Some(t);
                    }
                }
                NfPhase::Up if nf.next_register_at == Some(t) => {
                    if nrf_up {
                        nf.registered_with_nrf = true;
                        nf.next_register_at = None;
                        out.push(CpEvent {
                            at: t,
                            kind: CpEventKind::NfRegistered { nf: kind },
                        });
                    } else {
                        nf.next_register_at = Some(t + retry);
                        if nf.restart_count > 0 && t == nf.up_since {
                            out.push(CpEvent {
                                at: t,
                                kind: CpEventKind::NfRegistrationFailed { nf: kind },
                            });
                        }
                    }
                }
                _ => {}
            }
        }

        let mut procs = std::mem::take(&mut self.procedures);
        for p in procs.iter_mut() {
            match p.step {
                Pending::Resume { at } | Pending::Reestablishing { at } if at == t => {
                    let to = p.to_gnb.clone();
                    self.set_session(p.session, SessionState::Active, Some(&to), t, out);
                    p.step = Pending::Resume { at: Micros::MAX };
                }
                Pending::Coordinating { deadline, .. } if deadline == t => {
                    if self.core_healthy() {
                        p.step = Pending::Resume { at: t };
                        let to = p.to_gnb.clone();
                        self.set_session(p.session, SessionState::Active, Some(&to), t, out);
                        p.step = Pending::Resume { at: Micros::MAX };
                    } else {
                        self.set_session(p.session, SessionState::Down, None, t, out);
                        p.step = Pending::Lost;
                    }
                }
                _ => {}
            }
        }
        procs.retain(|p| p.step != Pending::Resume { at: Micros::MAX });
        self.procedures = procs;
        self.resolve_waiting(t);
    }

    fn resolve_waiting(&mut self, t: Micros) {
        if !self.core_healthy() {
            return;
        }
        let interruption = millis(self.cfg.interruption_ms);
        let reestablish = millis(self.cfg.reestablish_ms);
        for p in self.procedures.iter_mut() {
            match p.step {
                Pending::Coordinating { started, .. } => {
                    p.step = Pending::Resume {
                        at: (started + interruption).max(t),
                    };
                }
                Pending::Lost => {
                    p.step = Pending::Reestablishing { at: t + reestablish };
                }
                _ => {}
            }
        }
    }

    pub fn handover(&mut self, ue: &str, from: &str, to: &str, at: Micros) -> Result<(HandoverOutcome, Vec<CpEvent>), CpError> {
        let mut out = self.advance_lifecycle(at);
        let i = self
            .sessions
            .iter()
            .position(|s| s.ue_id == ue)
            .ok_or_else(|| CpError::UnknownUe(ue.to_string()))?;
        for g in [from, to] {
            if !self.gnbs.iter().any(|x| x == g) {
                return Err(CpError::UnknownGnb(g.to_string()));
            }
        }
        if self.sessions[i].serving_gnb != from {
            return Err(CpError::NotServing {
                ue: ue.to_string(),
                gnb: from.to_string(),
            });
        }
        if from == to {
            return Ok((HandoverOutcome::NoOp, out));
        }
        out.push(CpEvent {
            at,
            kind: CpEventKind::HandoverStarted {
                ue: ue.to_string(),
                from: from.to_string(),
                to: to.to_string(),
            },
        });
        self.set_session(i, SessionState::Suspended, None, at, &mut out);
        self.procedures.retain(|p| p.session != i);
        let outcome = if self.core_healthy() {
            let resume_at = at + millis(self.cfg.interruption_ms);
            self.procedures.push(Procedure {
                session: i,
                to_gnb: to.to_string(),
                step: Pending::Resume { at: resume_at },
            });
            HandoverOutcome::Started { resume_at }
        } else {
            let deadline = at + millis(self.cfg.cp_deadline_ms);
            self.procedures.push(Procedure {
                session: i,
                to_gnb: to.to_string(),
                step: Pending::Coordinating { started: at, deadline },
            });
            HandoverOutcome::Pending { deadline }
        };
        Ok((outcome, out))
    }
}
