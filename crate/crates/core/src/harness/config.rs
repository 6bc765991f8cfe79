//! Experiment configuration: a single TOML document.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adversary::{RewriteRule, TrafficProfile, TwoStageScript};
use crate::agents::C2Config;
use crate::corecp::{BackoffConfig, CoreConfig};
use crate::netsim::{Calibration, FilterDirection, FilterRule, Injection, LinkProfile, SliceSpec, TopologyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub name: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mitigations {
    /// Moves every untrusted UE into a slice of its own.
    pub slice_isolation: bool,
    /// Drops core-side downlink traffic toward the C2 ports at the UPF.
    pub port_filter: bool,
    /// Admits SBI requests only from the core's own NF identities.
    pub sbi_gate: bool,
    /// Semantic validation in NRF and SMF.
    pub nf_hardening: bool,
    /// MAVLink-2 signing on both C2 ends.
    pub signing: bool,
}

/// Which UEs play the C2 roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub gcs: String,
    pub uav: String,
}

impl Default for Roles {
    fn default() -> Self {
        Self {
            gcs: "gcs".into(),
            uav: "uav".into(),
        }
    }
}

/// Traffic generator active during one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficEntry {
    pub phase: String,
    pub profile: TrafficProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterceptorEntry {
    pub gnb: String,
    /// Phase at whose start rewriting begins; it continues to the end of the run.
    pub phase: String,
    pub rule: RewriteRule,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Adversary {
    /// UEs controlled by the attacker; subject to slice isolation.
    pub untrusted_ues: Vec<String>,
    pub traffic: Vec<TrafficEntry>,
    pub sbi: Option<TwoStageScript>,
    pub interceptor: Option<InterceptorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverEntry {
    pub ue: String,
    pub from: String,
    pub to: String,
    pub at_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreSection {
    pub backoff: BackoffConfig,
    pub interruption_ms: f64,
    pub cp_deadline_ms: f64,
    pub reestablish_ms: f64,
    pub registration_retry_s: f64,
    /// Identities admitted when the SBI gate is on.
    pub nf_identities: Vec<String>,
    pub gate_latency_us: u64,
}

impl Default for CoreSection {
    fn default() -> Self {
        let c = CoreConfig::default();
        Self {
            backoff: c.backoff,
            interruption_ms: c.interruption_ms,
            cp_deadline_ms: c.cp_deadline_ms,
            reestablish_ms: c.reestablish_ms,
            registration_retry_s: c.registration_retry_s,
            nf_identities: vec!["nrf".into(), "smf".into(), "amf".into()],
            gate_latency_us: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: u32,
    #[serde(default)]
    pub calibration: Calibration,
    /// Replaces the calibration's link parameters wholesale.
    #[serde(default)]
    pub links: Option<LinkProfile>,
    pub phases: Vec<Phase>,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub roles: Roles,
    #[serde(default)]
    pub c2: C2Config,
    #[serde(default)]
    pub core: CoreSection,
    #[serde(default)]
    pub mitigations: Mitigations,
    #[serde(default)]
    pub adversary: Adversary,
    #[serde(default)]
    pub handovers: Vec<HandoverEntry>,
}

fn one() -> u32 {
    1
}

pub const ISOLATED_SLICE: &str = "isolated";

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::Config {
            path: String::new(),
            msg: e.message().to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Config {
            path: e.path().to_string(),
            msg: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |path: &str, msg: String| {
            Err(HarnessError::Config {
                path: path.to_string(),
                msg,
            })
        };
        if self.repeats == 0 {
            return bad("repeats", "must be >= 1".into());
        }
        if self.phases.is_empty() {
            return bad("phases", "at least one phase is required".into());
        }
        let mut names = BTreeSet::new();
        for (i, p) in self.phases.iter().enumerate() {
            if !(p.duration_s > 0.0 && p.duration_s.is_finite()) {
                return bad(&format!("phases[{i}].duration_s"), format!("must be > 0, got {}", p.duration_s));
            }
            if !names.insert(p.name.as_str()) {
                return bad(&format!("phases[{i}].name"), format!("duplicate phase {:?}", p.name));
            }
        }
        if let Err((field, msg)) = self.c2.validate() {
            return bad(&format!("c2.{field}"), msg);
        }
        let topo = self.effective_topology();
        let ues: BTreeSet<&str> = topo.ues.iter().map(|u| u.id.as_str()).collect();
        let hosts: BTreeSet<&str> = topo.hosts.iter().map(|h| h.id.as_str()).collect();
        crate::netsim::topology::validate(&topo).or_else(|e| bad("topology", e.to_string()))?;
        for (f, v) in [("roles.gcs", &self.roles.gcs), ("roles.uav", &self.roles.uav)] {
            if !ues.contains(v.as_str()) {
                return bad(f, format!("{v:?} is not a UE"));
            }
        }
        if self.roles.gcs == self.roles.uav {
            return bad("roles.uav", "must differ from roles.gcs".into());
        }
        for (i, u) in self.adversary.untrusted_ues.iter().enumerate() {
            if !ues.contains(u.as_str()) {
                return bad(&format!("adversary.untrusted_ues[{i}]"), format!("unknown UE {u:?}"));
            }
        }
        for (i, t) in self.adversary.traffic.iter().enumerate() {
            let at = |f: &str| format!("adversary.traffic[{i}].{f}");
            if !names.contains(t.phase.as_str()) {
                return bad(&at("phase"), format!("unknown phase {:?}", t.phase));
            }
            if let Err(e) = t.profile.validate() {
                return bad(&at("profile.kind"), e.to_string());
            }
            let src_ok = match t.profile.injection_point {
                Injection::UeUplink => ues.contains(t.profile.source.as_str()),
                Injection::CoreSide => hosts.contains(t.profile.source.as_str()),
            };
            if !src_ok {
                return bad(
                    &at("profile.source"),
                    format!("{:?} is not a {} endpoint", t.profile.source, match t.profile.injection_point {
                        Injection::UeUplink => "UE",
                        Injection::CoreSide => "host",
                    }),
                );
            }
            if !ues.contains(t.profile.target.as_str()) {
                return bad(&at("profile.target"), format!("unknown UE {:?}", t.profile.target));
            }
        }
        if let Some(s) = &self.adversary.sbi {
            if let Err((field, msg)) = s.validate() {
                return bad(&format!("adversary.sbi.{field}"), msg);
            }
        }
        if let Some(ic) = &self.adversary.interceptor {
            if !topo.gnbs.contains(&ic.gnb) {
                return bad("adversary.interceptor.gnb", format!("unknown gNB {:?}", ic.gnb));
            }
            if !names.contains(ic.phase.as_str()) {
                return bad("adversary.interceptor.phase", format!("unknown phase {:?}", ic.phase));
            }
        }
        for (i, h) in self.handovers.iter().enumerate() {
            let at = |f: &str| format!("handovers[{i}].{f}");
            if !ues.contains(h.ue.as_str()) {
                return bad(&at("ue"), format!("unknown UE {:?}", h.ue));
            }
            for (f, g) in [("from", &h.from), ("to", &h.to)] {
                if !topo.gnbs.contains(g) {
                    return bad(&at(f), format!("unknown gNB {g:?}"));
                }
            }
            if !(h.at_s >= 0.0) {
                return bad(&at("at_s"), "must be >= 0".into());
            }
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_s).sum()
    }

    /// Phase start times, seconds.
    pub fn phase_start_s(&self, name: &str) -> Option<f64> {
        let mut t = 0.0;
        for p in &self.phases {
            if p.name == name {
                return Some(t);
            }
            t += p.duration_s;
        }
        None
    }

    /// Topology after the slice-isolation transform.
    pub fn effective_topology(&self) -> TopologyConfig {
        let mut t = self.topology.clone();
        if !self.mitigations.slice_isolation || self.adversary.untrusted_ues.is_empty() {
            return t;
        }
        let upf = t.upfs.first().cloned();
        t.slices.push(SliceSpec {
            id: ISOLATED_SLICE.into(),
            s_nssai: "isolated-sst".into(),
            dnn: "isolated-dnn".into(),
            ue_to_ue_reachable: false,
            upf,
        });
        for u in t.ues.iter_mut() {
            if self.adversary.untrusted_ues.contains(&u.id) {
                u.slice = ISOLATED_SLICE.into();
            }
        }
        t
    }

    pub fn effective_links(&self) -> LinkProfile {
        self.links.unwrap_or_else(|| self.calibration.links())
    }

    pub fn core_config(&self) -> CoreConfig {
        let c = &self.core;
        CoreConfig {
            backoff: c.backoff,
            interruption_ms: c.interruption_ms,
            cp_deadline_ms: c.cp_deadline_ms,
            reestablish_ms: c.reestablish_ms,
            registration_retry_s: c.registration_retry_s,
            hardened: self.mitigations.nf_hardening,
            allowlist: self.mitigations.sbi_gate.then(|| c.nf_identities.clone()),
            gate_latency_us: c.gate_latency_us,
        }
    }

    pub fn c2_config(&self) -> C2Config {
        C2Config {
            signing_enabled: self.c2.signing_enabled || self.mitigations.signing,
            ..self.c2.clone()
        }
    }

    /// Filter rules the port-filter mitigation installs on every slice.
    pub fn port_filter_rule(&self) -> FilterRule {
        FilterRule {
            direction: FilterDirection::Downlink,
            origin: Some(Injection::CoreSide),
            dst_ports: vec![self.c2.gcs_port, self.c2.uav_port],
        }
    }

    /// Same run with every attack removed; untrusted UEs stay in place.
    pub fn without_adversary(&self) -> Self {
        Self {
            adversary: Adversary {
                untrusted_ues: self.adversary.untrusted_ues.clone(),
                ..Default::default()
            },
            ..self.clone()
        }
    }

    /// Copy for repeat `i`: seed + i.
    pub fn for_repeat(&self, i: u32) -> Self {
        Self {
            seed: self.seed.wrapping_add(i as u64),
            repeats: 1,
            ..self.clone()
        }
    }

    /// Sets one dotted key, e.g. `adversary.traffic.0.pps` or `seed`, from
    /// a TOML literal. Used by sweeps.
    pub fn with_param(&self, key: &str, value: &str) -> Result<Self, HarnessError> {
        let mut doc: toml::Value = toml::Value::try_from(self).expect("config serializes");
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut cur = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            let next = match cur {
                toml::Value::Table(t) => {
                    if last {
                        t.insert(part.to_string(), parsed.clone());
                        break;
                    }
                    t.get_mut(*part)
                }
                toml::Value::Array(a) => {
                    let idx: usize = part.parse().map_err(|_| HarnessError::Config {
                        path: key.into(),
                        msg: format!("{part:?} is not an array index"),
                    })?;
                    if last {
                        match a.get_mut(idx) {
                            Some(slot) => {
                                *slot = parsed.clone();
                                break;
                            }
                            None => None,
                        }
                    } else {
                        a.get_mut(idx)
                    }
                }
                _ => None,
            };
            cur = next.ok_or_else(|| HarnessError::Config {
                path: key.into(),
                msg: format!("no such key {part:?}"),
            })?;
        }
        let text = toml::to_string(&doc).expect("document serializes");
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenarios;

    #[test]
    fn scenarios_roundtrip_through_toml() {
        for name in scenarios::NAMES {
            for mitigated in [false, true] {
                let c = scenarios::build(name, mitigated).unwrap();
                let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
                assert_eq!(back, c, "{name}");
            }
        }
    }

    #[test]
    fn unknown_key_reports_path() {
        let mut text = scenarios::build("tm1", false).unwrap().to_toml();
        text = text.replace("[mitigations]", "[mitigations]\nslice_isolaton = true");
        match ExperimentConfig::from_toml(&text) {
            Err(HarnessError::Config { path, msg }) => {
                assert!(path.starts_with("mitigations"), "{path}");
                assert!(msg.contains("slice_isolaton"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_duration_phase_rejected() {
        let c = scenarios::build("tm1", false).unwrap();
        let e = c.with_param("phases.1.duration_s", "0.0").unwrap_err();
        assert!(matches!(e, HarnessError::Config { ref path, .. } if path == "phases[1].duration_s"), "{e:?}");
    }

    #[test]
    fn with_param_sets_nested_values() {
        let c = scenarios::build("tm1", false).unwrap();
        let d = c.with_param("adversary.traffic.0.profile.kind.pps", "900").unwrap();
        match d.adversary.traffic[0].profile.kind {
            crate::adversary::TrafficKind::ConstantUdp { pps, .. } => assert_eq!(pps, 900.0),
            _ => panic!(),
        }
        assert_eq!(c.with_param("seed", "42").unwrap().seed, 42);
        assert!(c.with_param("nope.x", "1").is_err());
    }

    #[test]
    fn isolation_moves_untrusted_ues() {
        let mut c = scenarios::build("tm1", true).unwrap();
        c.mitigations.slice_isolation = true;
        let t = c.effective_topology();
        let rogue = t.ues.iter().find(|u| u.id == "rogue").unwrap();
        assert_eq!(rogue.slice, ISOLATED_SLICE);
        assert!(t.ues.iter().filter(|u| u.id != "rogue").all(|u| u.slice != ISOLATED_SLICE));
    }
}
