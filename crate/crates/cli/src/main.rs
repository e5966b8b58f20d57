//! `manet-sim`: run scenarios, sweeps and analytic comparisons.
//!
//! Scenario settings come from an optional `key=value` file, then from
//! trailing `--key value` flags whose names are the same dotted keys.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manet_core::analytics::{mpr_utilization, MprUtilizationParams};
use manet_core::audit;
use manet_core::config::{parse_override_args, ConfigError};
use manet_core::experiment::{
    compare, render_aggregate, render_csv, run_scenario_with, run_sweep, workers_from_env, SweepFamily, SweepSpec,
    COMPARISON_HEADER,
};
use manet_core::sim::SimError;
use manet_core::{Preset, ProtocolKind, ScenarioConfig};

#[derive(Parser)]
#[command(name = "manet-sim", version, about = "Packet-level simulator for proactive MANET routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its result record.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Result table; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-event audit log here.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Run a sweep family over protocols, presets, points and seeds.
    Sweep {
        #[arg(long)]
        family: SweepFamily,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        /// Comma-separated points; the family's own points when omitted.
        #[arg(long, value_delimiter = ',')]
        points: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        protocols: Vec<ProtocolKind>,
        #[arg(long, value_delimiter = ',')]
        presets: Vec<Preset>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// One record per run; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mean and sample standard deviation per sweep point.
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
    /// Run one scenario and compare its control overhead with the analytic model.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the MPR utilization score.
    MprUtil {
        /// Available bandwidth at the relay, bit/s.
        #[arg(long)]
        b_available: f64,
        /// Requested bandwidth, bit/s.
        #[arg(long)]
        b_requested: f64,
        /// Available energy, J.
        #[arg(long)]
        e_available: f64,
        /// Energy per transmission, J.
        #[arg(long)]
        e_transmit: f64,
        /// Source-to-relay delay, s.
        #[arg(long)]
        delay: f64,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file of `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Setting overrides as `--key value` or `--key=value`, e.g.
    /// `--protocol olsr --protocol.olsr.hello_interval 1`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, Failure> {
        let mut config = ScenarioConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        for (key, value) in parse_override_args(&self.overrides)? {
            config.set(&key, &value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Output destinations, written only once every result is ready.
struct Outputs(Vec<(Option<PathBuf>, String)>);

impl Outputs {
    fn write(self) -> Result<(), Failure> {
        for (path, text) in self.0 {
            match path {
                Some(p) => write_file(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

fn execute(command: Command) -> Result<Outputs, Failure> {
    match command {
        Command::Run { scenario, out, audit: audit_path } => {
            let config = scenario.load()?;
            let run = run_scenario_with(config, audit_path.is_some())?;
            let mut outputs = vec![(out, render_csv(std::slice::from_ref(&run)))];
            if let (Some(p), Some(log)) = (audit_path, &run.audit) {
                outputs.push((Some(p), audit::render(log)));
            }
            Ok(Outputs(outputs))
        }
        Command::Sweep {
            family,
            seeds,
            points,
            protocols,
            presets,
            scenario,
            out,
            aggregate,
        } => {
            let base = scenario.load()?;
            let mut spec = SweepSpec::new(family, seeds, base);
            if !points.is_empty() {
                spec.points = points;
            }
            if !protocols.is_empty() {
                spec.protocols = protocols;
            }
            if !presets.is_empty() {
                spec.presets = presets;
            }
            let runs = run_sweep(&spec, workers_from_env()).map_err(|e| match e {
                manet_core::experiment::SweepError::Empty => Failure::Config(e.to_string()),
                other => Failure::Runtime(other.to_string()),
            })?;
            let mut outputs = vec![(out, render_csv(&runs))];
            if let Some(p) = aggregate {
                outputs.push((Some(p), render_aggregate(&runs)));
            }
            Ok(Outputs(outputs))
        }
        Command::Compare { scenario, out } => {
            let config = scenario.load()?;
            let run = run_scenario_with(config, false)?;
            let cmp = compare(&run).map_err(|e| Failure::Runtime(e.to_string()))?;
            Ok(Outputs(vec![(out, format!("{COMPARISON_HEADER}\n{}\n", cmp.csv_row()))]))
        }
        Command::MprUtil {
            b_available,
            b_requested,
            e_available,
            e_transmit,
            delay,
        } => {
            let score = mpr_utilization(&MprUtilizationParams {
                b_available,
                b_requested,
                e_available,
                e_transmit,
                delay,
            })
            .map_err(|e| Failure::Config(e.to_string()))?;
            Ok(Outputs(vec![(None, format!("{score}\n"))]))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command).and_then(Outputs::write) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("manet-sim: {msg}");
            ExitCode::from(f.code())
        }
    }
}
