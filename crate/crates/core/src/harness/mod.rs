//! Scenario orchestration, metrics and CSV output.

pub mod config;
pub mod metrics;
pub mod scenarios;
pub mod world;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::ExperimentConfig;
pub use metrics::{summarize, CmdRecord, CmdStatus, EventRecord, RttRecord, SummaryRow};
pub use world::{run_once, RunCounters, RunOutput};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record file: {0}")]
    Schema(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            _ => 1,
        }
    }
}

/// Records of every repeat plus the summary computed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub runs: Vec<RunOutput>,
    pub summary: Vec<SummaryRow>,
}

impl MetricsLog {
    pub fn rtt(&self) -> Vec<RttRecord> {
        self.runs.iter().flat_map(|r| r.rtt.iter().cloned()).collect()
    }

    pub fn cmd(&self) -> Vec<CmdRecord> {
        self.runs.iter().flat_map(|r| r.cmd.iter().cloned()).collect()
    }

    pub fn events(&self) -> Vec<EventRecord> {
        self.runs.iter().flat_map(|r| r.events.iter().cloned()).collect()
    }

    /// Summary row for one run (or `"pooled"`) and phase.
    pub fn row(&self, run_id: &str, phase: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.run_id == run_id && r.phase == phase)
    }

    /// The pooled row with several repeats, the only run's row otherwise.
    pub fn overall(&self, phase: &str) -> Option<&SummaryRow> {
        self.row(metrics::POOLED, phase)
            .or_else(|| self.runs.first().and_then(|r| self.row(&r.run_id, phase)))
    }
}

/// Runs all repeats (seed + i) in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsLog, HarnessError> {
    cfg.validate()?;
    let runs = (0..cfg.repeats)
        .into_par_iter()
        .map(|i| run_once(&cfg.for_repeat(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let log = MetricsLog {
        summary: Vec::new(),
        runs,
    };
    let summary = summarize(&log.rtt(), &log.cmd(), &log.events());
    Ok(MetricsLog { summary, ..log })
}

fn write(path: PathBuf, text: &str) -> Result<(), HarnessError> {
    std::fs::write(&path, text).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn mkdir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes `runs/<run_id>/*.csv`, the merged CSVs and `config.toml` under `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, log: &MetricsLog) -> Result<(), HarnessError> {
    mkdir(dir)?;
    for r in &log.runs {
        let d = dir.join("runs").join(&r.run_id);
        mkdir(&d)?;
        write(d.join("rtt.csv"), &metrics::render_rtt(&r.rtt))?;
        write(d.join("cmd.csv"), &metrics::render_cmd(&r.cmd))?;
        write(d.join("events.csv"), &metrics::render_events(&r.events))?;
        let rows: Vec<_> = log.summary.iter().filter(|s| s.run_id == r.run_id).cloned().collect();
        write(d.join("summary.csv"), &metrics::render_summary(&rows))?;
    }
    write(dir.join("rtt.csv"), &metrics::render_rtt(&log.rtt()))?;
    write(dir.join("cmd.csv"), &metrics::render_cmd(&log.cmd()))?;
    write(dir.join("events.csv"), &metrics::render_events(&log.events()))?;
    write(dir.join("summary.csv"), &metrics::render_summary(&log.summary))?;
    write(dir.join("config.toml"), &cfg.to_toml())
}

/// Reads merged record CSVs from `dir` and recomputes the summary.
pub fn resummarize(dir: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| HarnessError::Io {
            path: p.display().to_string(),
            source: e,
        })
    };
    let rtt = metrics::parse_rtt(&read("rtt.csv")?)?;
    let cmd = metrics::parse_cmd(&read("cmd.csv")?)?;
    let events = metrics::parse_events(&read("events.csv")?)?;
    Ok(summarize(&rtt, &cmd, &events))
}
