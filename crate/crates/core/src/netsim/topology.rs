//! Declarative topology and per-leg link parameters.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::queue::{Fading, QueueParams};
use super::NetError;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub id: String,
    pub s_nssai: String,
    pub dnn: String,
    #[serde(default = "default_true")]
    pub ue_to_ue_reachable: bool,
    /// Anchoring UPF; defaults to the first UPF.
    #[serde(default)]
    pub upf: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub id: String,
    /// Serving gNB at attach time.
    #[serde(default)]
    pub gnb: Option<String>,
    pub slice: String,
}

/// A data-network host behind a UPF (reflectors, application servers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostSpec {
    pub id: String,
    #[serde(default)]
    pub upf: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub gnbs: Vec<String>,
    pub upfs: Vec<String>,
    pub slices: Vec<SliceSpec>,
    pub ues: Vec<UeSpec>,
    #[serde(default)]
    pub hosts: Vec<HostSpec>,
}

/// Link parameters by leg kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProfile {
    /// UE to gNB, one queue per UE.
    pub radio_uplink: QueueParams,
    /// gNB to UPF, shared per (gNB, slice).
    pub n3_uplink: QueueParams,
    /// UPF to gNB to UE, shared per (gNB, slice).
    pub n3_downlink: QueueParams,
    /// UPF to a data-network host.
    pub n6: QueueParams,
}

/// Built-in calibration regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Calibration {
    /// Software user plane on one host: sub-millisecond base RTT.
    #[default]
    Softpath,
    /// Commercial deployment over distance: tens of milliseconds base RTT.
    Widearea,
}

impl Calibration {
    pub fn links(self) -> LinkProfile {
        let (radio_prop, n3_prop) = match self {
            Calibration::Softpath => (100, 100),
            Calibration::Widearea => (5_000, 1_200),
        };
        LinkProfile {
            radio_uplink: QueueParams::simple(128, 2_000_000.0, radio_prop),
            n3_uplink: QueueParams {
                capacity_pkts: 64,
                service_rate: 1_500_000.0,
                prop_delay_us: n3_prop,
                fading: Some(Fading {
                    bad_rate: 500_000.0,
                    mean_good_s: 3.0,
                    mean_bad_s: 1.0,
                }),
                flow_setup_us: 0,
                flow_cache: 0,
            },
            n3_downlink: QueueParams {
                capacity_pkts: 256,
                service_rate: 12_500_000.0,
                prop_delay_us: n3_prop + radio_prop,
                fading: None,
                flow_setup_us: 5_000,
                flow_cache: 64,
            },
            n6: QueueParams::simple(1024, 12_500_000.0, 50),
        }
    }
}

pub(crate) fn validate(t: &TopologyConfig) -> Result<(), NetError> {
    let bad = |m: String| Err(NetError::BadTopology(m));
    if t.upfs.is_empty() {
        return bad("at least one UPF is required".into());
    }
    if t.gnbs.is_empty() {
        return bad("at least one gNB is required".into());
    }
    if t.ues.len() < 2 {
        return bad("at least two UEs are required".into());
    }
    let mut names = BTreeSet::new();
    let all = t
        .gnbs
        .iter()
        .chain(&t.upfs)
        .chain(t.slices.iter().map(|s| &s.id))
        .chain(t.ues.iter().map(|u| &u.id))
        .chain(t.hosts.iter().map(|h| &h.id));
    for n in all {
        if !names.insert(n.as_str()) {
            return bad(format!("duplicate id {n:?}"));
        }
    }
    let mut keys = BTreeSet::new();
    for s in &t.slices {
        if !keys.insert((&s.s_nssai, &s.dnn)) {
            return bad(format!("slice {:?} repeats (s_nssai, dnn) of another slice", s.id));
        }
        if let Some(u) = &s.upf {
            if !t.upfs.contains(u) {
                return bad(format!("slice {:?} names unknown UPF {u:?}", s.id));
            }
        }
    }
    for u in &t.ues {
        match &u.gnb {
            None => return bad(format!("UE {:?} has no serving gNB", u.id)),
            Some(g) if !t.gnbs.contains(g) => {
                return bad(format!("UE {:?} names unknown gNB {g:?}", u.id))
            }
            _ => {}
        }
        if !t.slices.iter().any(|s| s.id == u.slice) {
            return bad(format!("UE {:?} names unknown slice {:?}", u.id, u.slice));
        }
    }
    for h in &t.hosts {
        if let Some(u) = &h.upf {
            if !t.upfs.contains(u) {
                return bad(format!("host {:?} names unknown UPF {u:?}", h.id));
            }
        }
    }
    Ok(())
}
