use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uavc2::harness::{self, metrics, scenarios, ExperimentConfig, HarnessError, MetricsLog};

#[derive(Parser)]
#[command(name = "uavc2", about = "UAV C2 over simulated 5G SA: deterministic attack experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (default: out/<name>-<timestamp>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config once per value of one dotted parameter.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`, e.g. `adversary.traffic.0.profile.kind.pps=900,1150,1400`.
        #[arg(long)]
        param: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in scenario.
    Scenario {
        #[arg(value_parser = scenarios::NAMES)]
        name: String,
        /// Enable the scenario's mitigation.
        #[arg(long)]
        mitigated: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the scenario config and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the version.
    Version,
}

fn default_out(name: &str) -> PathBuf {
    let ts = chrono::Local::now().format("%Y%m%d-%H%M%S");
    PathBuf::from("out").join(format!("{name}-{ts}"))
}

fn run_to(cfg: &ExperimentConfig, dir: &Path) -> Result<MetricsLog, HarnessError> {
    let log = harness::run_experiment(cfg)?;
    harness::write_outputs(dir, cfg, &log)?;
    Ok(log)
}

fn print_summary(log: &MetricsLog) {
    print!("{}", metrics::render_summary(&log.summary));
}

fn sweep(cfg: &ExperimentConfig, param: &str, out: &Path) -> Result<(), HarnessError> {
    let (key, values) = param.split_once('=').ok_or_else(|| HarnessError::Config {
        path: "--param".into(),
        msg: "expected key=v1,v2,...".into(),
    })?;
    let mut merged = format!("param,value,{}\n", metrics::SUMMARY_HEADER);
    for v in values.split(',').filter(|v| !v.is_empty()) {
        let c = cfg.with_param(key, v)?;
        let dir = out.join(format!("{key}={v}"));
        let log = run_to(&c, &dir)?;
        for r in &log.summary {
            merged.push_str(&format!("{key},{v},{}\n", r.to_csv()));
        }
        eprintln!("{key}={v}: done");
    }
    let p = out.join("sweep.csv");
    std::fs::write(&p, &merged).map_err(|e| HarnessError::Io {
        path: p.display().to_string(),
        source: e,
    })?;
    print!("{merged}");
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| default_out(&cfg.name));
            let log = run_to(&cfg, &dir)?;
            print_summary(&log);
            eprintln!("wrote {}", dir.display());
        }
        Cmd::Sweep { config, param, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| default_out(&format!("{}-sweep", cfg.name)));
            sweep(&cfg, &param, &dir)?;
            eprintln!("wrote {}", dir.display());
        }
        Cmd::Scenario {
            name,
            mitigated,
            seed,
            repeats,
            out,
            dump_config,
        } => {
            let mut cfg = scenarios::build(&name, mitigated)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            cfg.validate()?;
            if dump_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let dir = out.unwrap_or_else(|| default_out(&cfg.name));
            let log = run_to(&cfg, &dir)?;
            print_summary(&log);
            eprintln!("wrote {}", dir.display());
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}: ok ({} phases, {:.0} s)", cfg.name, cfg.phases.len(), cfg.total_duration_s());
        }
        Cmd::Version => println!("uavc2 {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
