//! Control-plane attack script against the simulated core.

use serde::{Deserialize, Serialize};

use crate::corecp::{
    CoreCp, CpError, CpEvent, NfKind, RequestIndication, SbiKind, SbiOutcome, SbiRequest, UpCnxState,
};
use crate::netsim::{secs, Micros};

/// One request and its submission time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbiStep {
    pub at: Micros,
    pub request: SbiRequest,
}

/// Parameters of the NRF crash loop followed by the SMF state-mismatch crash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStageScript {
    pub caller_id: String,
    pub notification_uri: String,
    /// First subscription, seconds.
    pub loop_start_s: f64,
    /// No subscriptions at or after this time.
    pub loop_end_s: f64,
    pub loop_interval_s: f64,
    /// When the malformed session modify is sent.
    pub smf_modify_at_s: f64,
    pub session_ref: u32,
}

impl Default for TwoStageScript {
    fn default() -> Self {
        Self {
            caller_id: "rogue-af".into(),
            notification_uri: "http://10.45.0.99:8080".into(),
            loop_start_s: 180.0,
            loop_end_s: 540.0,
            loop_interval_s: 0.5,
            smf_modify_at_s: 260.3,
            session_ref: 1,
        }
    }
}

impl TwoStageScript {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.loop_interval_s > 0.0) {
            return Err(("loop_interval_s", "must be > 0".into()));
        }
        if !(self.loop_start_s >= 0.0 && self.loop_end_s >= self.loop_start_s) {
            return Err(("loop_end_s", "must be >= loop_start_s >= 0".into()));
        }
        if !(self.smf_modify_at_s >= 0.0) {
            return Err(("smf_modify_at_s", "must be >= 0".into()));
        }
        Ok(())
    }

    /// Expands into a time-ordered request list.
    pub fn steps(&self) -> Vec<SbiStep> {
        let start = secs(self.loop_start_s);
        let end = secs(self.loop_end_s);
        let step = secs(self.loop_interval_s).max(1);
        let mut out: Vec<SbiStep> = (0..)
            .map(|n| start + n * step)
            .take_while(|&t| t < end)
            .map(|at| SbiStep {
                at,
                request: SbiRequest {
                    caller_id: self.caller_id.clone(),
                    target: NfKind::Nrf,
                    kind: SbiKind::NfStatusSubscribe {
                        notification_uri: self.notification_uri.clone(),
                    },
                },
            })
            .collect();
        out.push(SbiStep {
            at: secs(self.smf_modify_at_s),
            request: SbiRequest {
                caller_id: self.caller_id.clone(),
                target: NfKind::Smf,
                kind: SbiKind::PduSessionModify {
                    session_ref: self.session_ref,
                    request_indication: RequestIndication::UeReqPduSesMod,
                    up_cnx_state: UpCnxState::Suspended,
                },
            },
        });
        // Stable: a modify tied with a subscription goes after it.
        out.sort_by_key(|s| s.at);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbiLogEntry {
    pub at: Micros,
    pub target: NfKind,
    pub outcome: Result<SbiOutcome, CpError>,
    /// Lifecycle events produced up to and by this request.
    pub events: Vec<CpEvent>,
}

pub fn submit_step(core: &mut CoreCp, step: &SbiStep) -> SbiLogEntry {
    let (outcome, events) = match core.sbi_submit(&step.request, step.at) {
        Ok((o, ev)) => (Ok(o), ev),
        Err(e) => (Err(e), Vec::new()),
    };
    SbiLogEntry {
        at: step.at,
        target: step.request.target,
        outcome,
        events,
    }
}

/// Submits every step in order. Rejections are logged, not raised.
pub fn run_sbi_attack(core: &mut CoreCp, script: &[SbiStep]) -> Vec<SbiLogEntry> {
    script.iter().map(|s| submit_step(core, s)).collect()
}
