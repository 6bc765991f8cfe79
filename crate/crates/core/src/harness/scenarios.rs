//! Built-in threat-model scenarios.

use super::config::{Adversary, ExperimentConfig, HandoverEntry, InterceptorEntry, Phase, TrafficEntry};
use super::HarnessError;
use crate::adversary::{RewriteRule, TrafficKind, TrafficProfile, TwoStageScript};
use crate::agents::{C2Config, UAV_SYS_ID};
use crate::netsim::{HostSpec, Injection, SliceSpec, TopologyConfig, UeSpec};

pub const NAMES: [&str; 4] = ["tm1", "tm1-reflect", "tm2", "tm3"];

/// Mean rate of the TM1 flood, packets/s.
pub const TM1_FLOOD_PPS: f64 = 1150.0;
pub const TM1_PAYLOAD: usize = 800;
/// Flood rates of the TM1 sweep.
pub const TM1_SWEEP_PPS: [f64; 3] = [900.0, 1150.0, 1400.0];
pub const TM3_DISPLACEMENT: [f64; 3] = [0.0, 50.0, 0.0];

fn phases(plan: &[(&str, f64)]) -> Vec<Phase> {
    plan.iter()
        .map(|&(name, duration_s)| Phase {
            name: name.into(),
            duration_s,
        })
        .collect()
}

fn ue(id: &str, gnb: &str) -> UeSpec {
    UeSpec {
        id: id.into(),
        gnb: Some(gnb.into()),
        slice: "embb".into(),
    }
}

fn topology(gnbs: &[&str], ues: Vec<UeSpec>, hosts: &[&str]) -> TopologyConfig {
    TopologyConfig {
        gnbs: gnbs.iter().map(|s| s.to_string()).collect(),
        upfs: vec!["upf1".into()],
        slices: vec![SliceSpec {
            id: "embb".into(),
            s_nssai: "1-000001".into(),
            dnn: "internet".into(),
            ue_to_ue_reachable: true,
            upf: None,
        }],
        ues,
        hosts: hosts
            .iter()
            .map(|h| HostSpec {
                id: h.to_string(),
                upf: None,
            })
            .collect(),
    }
}

fn base(name: &str, plan: &[(&str, f64)], topo: TopologyConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        repeats: 1,
        calibration: Default::default(),
        links: None,
        phases: phases(plan),
        topology: topo,
        roles: Default::default(),
        c2: C2Config::default(),
        core: Default::default(),
        mitigations: Default::default(),
        adversary: Adversary::default(),
        handovers: Vec::new(),
    }
}

const THREE_PHASES: [(&str, f64); 3] = [("baseline", 180.0), ("attack", 180.0), ("recovery", 180.0)];

/// Commands sampled at uniformly spread instants, clear of phase boundaries.
fn tm1_c2() -> C2Config {
    C2Config {
        command_offset_s: 0.5,
        command_jitter_s: 4.0,
        ..Default::default()
    }
}

fn tm1() -> ExperimentConfig {
    let mut c = base(
        "tm1",
        &THREE_PHASES,
        topology(&["gnb1"], vec![ue("gcs", "gnb1"), ue("uav", "gnb1"), ue("rogue", "gnb1")], &[]),
    );
    c.repeats = 5;
    c.c2 = tm1_c2();
    c.adversary = Adversary {
        untrusted_ues: vec!["rogue".into()],
        traffic: vec![TrafficEntry {
            phase: "attack".into(),
            profile: TrafficProfile {
                kind: TrafficKind::ConstantUdp {
                    pps: TM1_FLOOD_PPS,
                    payload_bytes: TM1_PAYLOAD,
                },
                source: "rogue".into(),
                target: "uav".into(),
                dst_port: 14551,
                src_port: 40000,
                injection_point: Injection::UeUplink,
                upf_stress: false,
            },
        }],
        ..Default::default()
    };
    c
}

/// Burst rate whose mean over the 5/2500 ms duty cycle equals the flood rate.
pub fn reflect_bursts_pps(mean_pps: f64) -> f64 {
    mean_pps * (5.0 + 2500.0) / 5.0
}

fn tm1_reflect() -> ExperimentConfig {
    let mut c = base(
        "tm1-reflect",
        &THREE_PHASES,
        topology(&["gnb1"], vec![ue("gcs", "gnb1"), ue("uav", "gnb1")], &["reflector"]),
    );
    c.repeats = 5;
    c.c2 = tm1_c2();
    c.adversary.traffic = vec![TrafficEntry {
        phase: "attack".into(),
        profile: TrafficProfile {
            kind: TrafficKind::BurstPortChurn {
                on_ms: 5.0,
                off_ms: 2500.0,
                payload_bytes: TM1_PAYLOAD,
                port_range: [1024, 65535],
                bursts_pps: reflect_bursts_pps(TM1_FLOOD_PPS),
            },
            source: "reflector".into(),
            target: "uav".into(),
            dst_port: 14551,
            src_port: 53,
            injection_point: Injection::CoreSide,
            upf_stress: false,
        },
    }];
    c
}

fn tm2() -> ExperimentConfig {
    let mut c = base(
        "tm2",
        &[("baseline", 180.0), ("attack", 360.0), ("recovery", 300.0)],
        topology(&["gnb1", "gnb2"], vec![ue("uav", "gnb1"), ue("gcs", "gnb2")], &[]),
    );
    c.adversary.sbi = Some(TwoStageScript::default());
    c.handovers = vec![HandoverEntry {
        ue: "uav".into(),
        from: "gnb1".into(),
        to: "gnb2".into(),
        at_s: 280.0,
    }];
    c
}

fn tm3() -> ExperimentConfig {
    let mut c = base(
        "tm3",
        &[("baseline", 180.0), ("attack", 180.0)],
        topology(&["gnb1"], vec![ue("gcs", "gnb1"), ue("uav", "gnb1")], &[]),
    );
    c.adversary.interceptor = Some(InterceptorEntry {
        gnb: "gnb1".into(),
        phase: "attack".into(),
        rule: RewriteRule::new(UAV_SYS_ID, TM3_DISPLACEMENT),
    });
    c
}

/// Builds a scenario; `mitigated` turns on its matching defence.
pub fn build(name: &str, mitigated: bool) -> Result<ExperimentConfig, HarnessError> {
    let mut c = match name {
        "tm1" => tm1(),
        "tm1-reflect" => tm1_reflect(),
        "tm2" => tm2(),
        "tm3" => tm3(),
        other => {
            return Err(HarnessError::Config {
                path: "scenario".into(),
                msg: format!("unknown scenario {other:?}; expected one of {}", NAMES.join(", ")),
            })
        }
    };
    if mitigated {
        let m = &mut c.mitigations;
        match name {
            "tm1" => m.slice_isolation = true,
            "tm1-reflect" => m.port_filter = true,
            "tm2" => m.sbi_gate = true,
            _ => m.signing = true,
        }
        c.name.push_str("-mitigated");
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_scenarios_validate() {
        for n in NAMES {
            build(n, false).unwrap();
            build(n, true).unwrap();
        }
        assert!(matches!(build("tm9", false), Err(HarnessError::Config { .. })));
    }

    #[test]
    fn reflect_mean_matches_flood() {
        let c = build("tm1-reflect", false).unwrap();
        let m = c.adversary.traffic[0].profile.mean_pps();
        assert!((m - TM1_FLOOD_PPS).abs() < 1e-9);
    }
}
