//! Record streams, per-phase summaries and their CSV forms.
//!
//! Every summary column is a function of the three record streams, so a
//! summary can be recomputed from `rtt.csv`, `cmd.csv` and `events.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::HarnessError;
use crate::netsim::Micros;

pub const RTT_HEADER: &str = "run_id,phase,seq,t_send_ms,status,rtt_ms";
pub const CMD_HEADER: &str = "run_id,phase,seq,t_send_ms,status,latency_ms";
pub const EVENTS_HEADER: &str = "run_id,t_ms,entity,event,detail";
pub const SUMMARY_HEADER: &str = "run_id,phase,probes,timeouts,loss_pct,rtt_median_ms,rtt_p95_ms,rtt_p99_ms,rtt_max_ms,\
cmd_sent,cmd_delivered,cmd_lost,cmd_tamper_dropped,cmd_loss_pct,cmd_latency_median_ms,\
failsafe_count,tamper_count,rewrite_count,nf_crash_count,pos_n_m,pos_e_m,pos_d_m";

pub const NA: &str = "NA";
pub const POOLED: &str = "pooled";

pub const EV_PHASE_START: &str = "PHASE_START";
pub const EV_POSITION: &str = "POSITION";
pub const EV_FAILSAFE: &str = "FAILSAFE";
pub const EV_TAMPER: &str = "TAMPER";
pub const EV_REWRITE: &str = "REWRITE";
pub const EV_NF_CRASH: &str = "NF_CRASH";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RttRecord {
    pub run_id: String,
    pub phase: String,
    pub seq: u32,
    pub t_send: Micros,
    /// `None` is a timeout.
    pub rtt: Option<Micros>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdStatus {
    Delivered,
    Lost,
    TamperDropped,
}

impl CmdStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CmdStatus::Delivered => "DELIVERED",
            CmdStatus::Lost => "LOST",
            CmdStatus::TamperDropped => "TAMPER_DROPPED",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "DELIVERED" => CmdStatus::Delivered,
            "LOST" => CmdStatus::Lost,
            "TAMPER_DROPPED" => CmdStatus::TamperDropped,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmdRecord {
    pub run_id: String,
    pub phase: String,
    pub seq: u32,
    pub t_send: Micros,
    pub status: CmdStatus,
    /// One-way latency for delivered commands.
    pub latency: Option<Micros>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub run_id: String,
    pub t: Micros,
    pub entity: String,
    pub event: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run_id: String,
    pub phase: String,
    pub probes: u64,
    pub timeouts: u64,
    pub rtt_median: Option<Micros>,
    pub rtt_p95: Option<Micros>,
    pub rtt_p99: Option<Micros>,
    pub rtt_max: Option<Micros>,
    pub cmd_sent: u64,
    pub cmd_delivered: u64,
    pub cmd_lost: u64,
    pub cmd_tamper_dropped: u64,
    pub cmd_latency_median: Option<Micros>,
    pub failsafe_count: u64,
    pub tamper_count: u64,
    pub rewrite_count: u64,
    pub nf_crash_count: u64,
    /// UAV position at the end of the phase (single runs only).
    pub position: Option<[f64; 3]>,
}

impl SummaryRow {
    pub fn loss_pct(&self) -> f64 {
        pct(self.timeouts, self.probes)
    }

    pub fn cmd_loss_pct(&self) -> f64 {
        pct(self.cmd_lost, self.cmd_sent)
    }

    /// p99 over median; `None` without completed probes.
    pub fn tail_ratio(&self) -> Option<f64> {
        Some(self.rtt_p99? as f64 / self.rtt_median?.max(1) as f64)
    }

    pub fn to_csv(&self) -> String {
        let pos = match self.position {
            Some(p) => format!("{:.3},{:.3},{:.3}", p[0], p[1], p[2]),
            None => format!("{NA},{NA},{NA}"),
        };
        format!(
            "{},{},{},{},{:.3},{},{},{},{},{},{},{},{},{:.3},{},{},{},{},{},{}",
            self.run_id,
            self.phase,
            self.probes,
            self.timeouts,
            self.loss_pct(),
            ms_opt(self.rtt_median),
            ms_opt(self.rtt_p95),
            ms_opt(self.rtt_p99),
            ms_opt(self.rtt_max),
            self.cmd_sent,
            self.cmd_delivered,
            self.cmd_lost,
            self.cmd_tamper_dropped,
            self.cmd_loss_pct(),
            ms_opt(self.cmd_latency_median),
            self.failsafe_count,
            self.tamper_count,
            self.rewrite_count,
            self.nf_crash_count,
            pos
        )
    }
}

fn pct(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 * 100.0 / d as f64
    }
}

/// Exact millisecond rendering of a microsecond count.
pub fn ms(us: Micros) -> String {
    format!("{}.{:03}", us / 1000, us % 1000)
}

fn ms_opt(us: Option<Micros>) -> String {
    us.map_or_else(|| NA.to_string(), ms)
}

fn parse_ms(s: &str) -> Option<Micros> {
    let (a, b) = s.split_once('.')?;
    if b.len() != 3 {
        return None;
    }
    Some(a.parse::<Micros>().ok()? * 1000 + b.parse::<Micros>().ok()?)
}

/// Nearest-rank percentile: the `ceil(q/100 * n)`-th smallest value.
pub fn nearest_rank(sorted: &[Micros], q: f64) -> Option<Micros> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Phases of each run, in order, from `PHASE_START` events.
fn phases_by_run(events: &[EventRecord]) -> BTreeMap<&str, Vec<(&str, Micros)>> {
    let mut m: BTreeMap<&str, Vec<(&str, Micros)>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.event == EV_PHASE_START) {
        m.entry(&e.run_id).or_default().push((&e.detail, e.t));
    }
    m
}

fn phase_of<'a>(phases: &[(&'a str, Micros)], t: Micros) -> Option<&'a str> {
    phases.iter().rev().find(|(_, s)| *s <= t).map(|(n, _)| *n)
}

fn parse_position(detail: &str) -> Option<(String, [f64; 3])> {
    let mut phase = None;
    let mut p = [None; 3];
    for kv in detail.split(' ') {
        let (k, v) = kv.split_once('=')?;
        match k {
            "phase" => phase = Some(v.to_string()),
            "n" => p[0] = v.parse().ok(),
            "e" => p[1] = v.parse().ok(),
            "d" => p[2] = v.parse().ok(),
            _ => {}
        }
    }
    Some((phase?, [p[0]?, p[1]?, p[2]?]))
}

#[derive(Default)]
struct Acc {
    rtts: Vec<Micros>,
    probes: u64,
    timeouts: u64,
    cmd_lat: Vec<Micros>,
    cmd: [u64; 3],
    failsafe: u64,
    tamper: u64,
    rewrite: u64,
    crash: u64,
    position: Option<[f64; 3]>,
}

impl Acc {
    fn row(mut self, run_id: &str, phase: &str) -> SummaryRow {
        self.rtts.sort_unstable();
        self.cmd_lat.sort_unstable();
        SummaryRow {
            run_id: run_id.into(),
            phase: phase.into(),
            probes: self.probes,
            timeouts: self.timeouts,
            rtt_median: nearest_rank(&self.rtts, 50.0),
            rtt_p95: nearest_rank(&self.rtts, 95.0),
            rtt_p99: nearest_rank(&self.rtts, 99.0),
            rtt_max: self.rtts.last().copied(),
            cmd_sent: self.cmd.iter().sum(),
            cmd_delivered: self.cmd[0],
            cmd_lost: self.cmd[1],
            cmd_tamper_dropped: self.cmd[2],
            cmd_latency_median: nearest_rank(&self.cmd_lat, 50.0),
            failsafe_count: self.failsafe,
            tamper_count: self.tamper,
            rewrite_count: self.rewrite,
            nf_crash_count: self.crash,
            position: self.position,
        }
    }
}

/// One row per (run, phase) in phase order; with more than one run, also
/// one pooled row per phase.
pub fn summarize(rtt: &[RttRecord], cmd: &[CmdRecord], events: &[EventRecord]) -> Vec<SummaryRow> {
    let phases = phases_by_run(events);
    let mut acc: BTreeMap<(&str, &str), Acc> = BTreeMap::new();
    let mut pooled: BTreeMap<&str, Acc> = BTreeMap::new();

    for r in rtt {
        for a in [acc.entry((&r.run_id, &r.phase)).or_default(), pooled.entry(&r.phase).or_default()] {
            a.probes += 1;
            match r.rtt {
                Some(v) => a.rtts.push(v),
                None => a.timeouts += 1,
            }
        }
    }
    for c in cmd {
        for a in [acc.entry((&c.run_id, &c.phase)).or_default(), pooled.entry(&c.phase).or_default()] {
            let i = match c.status {
                CmdStatus::Delivered => 0,
                CmdStatus::Lost => 1,
                CmdStatus::TamperDropped => 2,
            };
            a.cmd[i] += 1;
            if let Some(l) = c.latency {
                a.cmd_lat.push(l);
            }
        }
    }
    for e in events {
        let Some(ph) = phases.get(e.run_id.as_str()) else {
            continue;
        };
        if e.event == EV_POSITION {
            if let Some((phase, p)) = parse_position(&e.detail) {
                if let Some((name, _)) = ph.iter().find(|(n, _)| *n == phase) {
                    acc.entry((&e.run_id, name)).or_default().position = Some(p);
                }
            }
            continue;
        }
        let Some(phase) = phase_of(ph, e.t) else {
            continue;
        };
        for a in [acc.entry((&e.run_id, phase)).or_default(), pooled.entry(phase).or_default()] {
            match e.event.as_str() {
                EV_FAILSAFE => a.failsafe += 1,
                EV_TAMPER => a.tamper += 1,
                EV_REWRITE => a.rewrite += 1,
                EV_NF_CRASH => a.crash += 1,
                _ => {}
            }
        }
    }

    let mut rows = Vec::new();
    for (run, ph) in &phases {
        for (name, _) in ph {
            rows.push(acc.remove(&(*run, *name)).unwrap_or_default().row(run, name));
        }
    }
    if phases.len() > 1 {
        let order: Vec<&str> = phases.values().next().map(|p| p.iter().map(|(n, _)| *n).collect()).unwrap_or_default();
        for name in order {
            let mut a = pooled.remove(name).unwrap_or_default();
            a.position = None;
            rows.push(a.row(POOLED, name));
        }
    }
    rows
}

pub fn render_rtt(rows: &[RttRecord]) -> String {
    let mut s = String::from(RTT_HEADER);
    s.push('\n');
    for r in rows {
        let (status, v) = match r.rtt {
            Some(x) => ("OK", ms(x)),
            None => ("TIMEOUT", NA.to_string()),
        };
        let _ = writeln!(s, "{},{},{},{},{},{}", r.run_id, r.phase, r.seq, ms(r.t_send), status, v);
    }
    s
}

pub fn render_cmd(rows: &[CmdRecord]) -> String {
    let mut s = String::from(CMD_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.run_id,
            r.phase,
            r.seq,
            ms(r.t_send),
            r.status.as_str(),
            ms_opt(r.latency)
        );
    }
    s
}

pub fn render_events(rows: &[EventRecord]) -> String {
    let mut s = String::from(EVENTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.run_id, ms(r.t), r.entity, r.event, r.detail);
    }
    s
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

fn rows<'a>(text: &'a str, header: &str, file: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, HarnessError> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(HarnessError::Schema(format!("{file}: header mismatch")));
    }
    let n = header.split(',').count();
    let out: Vec<(usize, Vec<&str>)> = lines
        .enumerate()
        .map(|(i, l)| (i + 2, l.splitn(n, ',').collect::<Vec<_>>()))
        .collect();
    if let Some((line, _)) = out.iter().find(|(_, f)| f.len() != n) {
        return Err(HarnessError::Schema(format!("{file}:{line}: expected {n} columns")));
    }
    Ok(out.into_iter())
}

fn field<T: std::str::FromStr>(v: &str, file: &str, line: usize) -> Result<T, HarnessError> {
    v.parse()
        .map_err(|_| HarnessError::Schema(format!("{file}:{line}: bad value {v:?}")))
}

fn ms_field(v: &str, file: &str, line: usize) -> Result<Micros, HarnessError> {
    parse_ms(v).ok_or_else(|| HarnessError::Schema(format!("{file}:{line}: bad time {v:?}")))
}

pub fn parse_rtt(text: &str) -> Result<Vec<RttRecord>, HarnessError> {
    rows(text, RTT_HEADER, "rtt.csv")?
        .map(|(line, f)| {
            let rtt = match (f[4], f[5]) {
                ("OK", v) => Some(ms_field(v, "rtt.csv", line)?),
                ("TIMEOUT", NA) => None,
                _ => return Err(HarnessError::Schema(format!("rtt.csv:{line}: bad status"))),
            };
            Ok(RttRecord {
                run_id: f[0].into(),
                phase: f[1].into(),
                seq: field(f[2], "rtt.csv", line)?,
                t_send: ms_field(f[3], "rtt.csv", line)?,
                rtt,
            })
        })
        .collect()
}

pub fn parse_cmd(text: &str) -> Result<Vec<CmdRecord>, HarnessError> {
    rows(text, CMD_HEADER, "cmd.csv")?
        .map(|(line, f)| {
            let status =
                CmdStatus::parse(f[4]).ok_or_else(|| HarnessError::Schema(format!("cmd.csv:{line}: bad status")))?;
            let latency = if f[5] == NA {
                None
            } else {
                Some(ms_field(f[5], "cmd.csv", line)?)
            };
            Ok(CmdRecord {
                run_id: f[0].into(),
                phase: f[1].into(),
                seq: field(f[2], "cmd.csv", line)?,
                t_send: ms_field(f[3], "cmd.csv", line)?,
                status,
                latency,
            })
        })
        .collect()
}

pub fn parse_events(text: &str) -> Result<Vec<EventRecord>, HarnessError> {
    rows(text, EVENTS_HEADER, "events.csv")?
        .map(|(line, f)| {
            Ok(EventRecord {
                run_id: f[0].into(),
                t: ms_field(f[1], "events.csv", line)?,
                entity: f[2].into(),
                event: f[3].into(),
                detail: f[4].into(),
            })
        })
        .collect()
}
