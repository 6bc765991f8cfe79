//! Per-leg packet trace.
//!
//! One CSV line per record, in event order:
//!
//! ```text
//! time_us,leg,event,size,src,dst,src_port,dst_port,start_us,depart_us
//! ```
//!
//! `start_us`/`depart_us` are set only for `ENQ` (service start and last-bit
//! departure) and empty otherwise.

use std::fmt;

use super::sched::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceEvent {
    Enqueue,
    Drop,
    Filter,
    HookDrop,
    Deliver,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Enqueue => "ENQ",
            TraceEvent::Drop => "DROP",
            TraceEvent::Filter => "FILTER",
            TraceEvent::HookDrop => "HOOK_DROP",
            TraceEvent::Deliver => "DELIVER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time_us: Micros,
    pub leg: String,
    pub event: TraceEvent,
    pub size: usize,
    pub src: String,
    pub dst: String,
    pub src_port: u16,
    pub dst_port: u16,
    pub start_us: Option<Micros>,
    pub depart_us: Option<Micros>,
}

pub const TRACE_HEADER: &str = "time_us,leg,event,size,src,dst,src_port,dst_port,start_us,depart_us";

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<Micros>| v.map(|x| x.to_string()).unwrap_or_default();
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{}",
            self.time_us,
            self.leg,
            self.event.as_str(),
            self.size,
            self.src,
            self.dst,
            self.src_port,
            self.dst_port,
            opt(self.start_us),
            opt(self.depart_us)
        )
    }
}

/// Renders a trace with its header line.
pub fn render(records: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}
