//! Single runs, sweep families and their tabular output.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analytics::{cost_dsdv, cost_fsr, cost_olsr, AnalyticError, Counters, MetricsReport};
use crate::audit::AuditRecord;
use crate::config::{Preset, ProtocolKind, ScenarioConfig};
use crate::routing::DropCause;
use crate::sim::{SimError, SimStats, Simulation};
use crate::analytics::AnalyticParams;

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "MANET_SIM_WORKERS";

pub const CSV_HEADER: &str = "protocol,preset,nodes,rate,seed,throughput_bps,avg_e2ed_s,nrl,delivered,generated,control_tx,drops_noroute,drops_ttl,drops_queue,drops_link";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub metrics: MetricsReport,
    pub counters: Counters,
    pub stats: SimStats,
    pub analytic: AnalyticParams,
    pub in_flight: u64,
    pub audit: Option<Vec<AuditRecord>>,
}

impl RunOutput {
    pub fn csv_row(&self) -> String {
        let m = &self.metrics;
        let c = &self.config;
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.protocol,
            c.preset,
            c.nodes,
            c.traffic.rate,
            c.seed,
            m.throughput,
            opt(m.avg_e2ed),
            opt(m.nrl),
            m.delivered,
            m.generated,
            m.control_transmissions,
        );
        for cause in DropCause::ALL {
            let _ = write!(row, ",{}", self.counters.drops(cause));
        }
        row
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Runs one scenario to completion.
pub fn run_scenario(config: ScenarioConfig) -> Result<RunOutput, SimError> {
    run_scenario_with(config, false)
}

/// Like [`run_scenario`], optionally keeping the audit log.
pub fn run_scenario_with(config: ScenarioConfig, audit: bool) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(config.clone())?;
    if audit {
        sim.enable_audit();
    }
    let end = sim.end();
    sim.run_until(end);
    let analytic = sim.analytic_params();
    let result = sim.into_result();
    Ok(RunOutput {
        metrics: result.metrics(),
        config,
        counters: result.counters,
        stats: result.stats,
        analytic,
        in_flight: result.in_flight,
        audit: result.audit,
    })
}

pub fn render_csv(runs: &[RunOutput]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in runs {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFamily {
    /// Node count varies; 512-byte packets.
    Scalability,
    /// Packet rate varies; 50 nodes, 64-byte packets.
    Traffic,
}

impl SweepFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepFamily::Scalability => "scalability",
            SweepFamily::Traffic => "traffic",
        }
    }

    pub fn default_points(self) -> Vec<f64> {
        match self {
            SweepFamily::Scalability => (1..=10).map(|i| f64::from(i * 10)).collect(),
            SweepFamily::Traffic => vec![2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

impl std::str::FromStr for SweepFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scalability" => Ok(SweepFamily::Scalability),
            "traffic" => Ok(SweepFamily::Traffic),
            _ => Err(format!("expected scalability or traffic; got {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub points: Vec<f64>,
    pub seeds: Vec<u64>,
    pub protocols: Vec<ProtocolKind>,
    pub presets: Vec<Preset>,
    /// Settings shared by every run; the family then fixes its own fields.
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn new(family: SweepFamily, seeds: Vec<u64>, base: ScenarioConfig) -> Self {
        SweepSpec {
            family,
            points: family.default_points(),
            seeds,
            protocols: ProtocolKind::ALL.to_vec(),
            presets: Preset::ALL.to_vec(),
            base,
        }
    }

    /// Configuration of one sweep cell.
    pub fn scenario(&self, protocol: ProtocolKind, preset: Preset, point: f64, seed: u64) -> ScenarioConfig {
        let mut c = self.base.clone();
        c.protocol = protocol;
        c.preset = preset;
        c.seed = seed;
        match self.family {
            SweepFamily::Scalability => {
                c.nodes = point as usize;
                c.traffic.packet_size = 512;
            }
            SweepFamily::Traffic => {
                c.nodes = 50;
                c.traffic.packet_size = 64;
                c.traffic.rate = point;
            }
        }
        c
    }

    /// Every run in output order: protocol, preset, point, seed.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            for &preset in &self.presets {
                for &point in &self.points {
                    for &seed in &self.seeds {
                        out.push(self.scenario(protocol, preset, point, seed));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep needs at least one point, seed, protocol and preset")]
    Empty,
    #[error("{protocol}/{preset} nodes={nodes} rate={rate} seed={seed}: {source}")]
    Run {
        protocol: ProtocolKind,
        preset: Preset,
        nodes: usize,
        rate: f64,
        seed: u64,
        #[source]
        source: SimError,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every cell of a sweep on a pool of `workers` threads (all cores
/// when `None`). Output order does not depend on completion order.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<RunOutput>, SweepError> {
    if spec.points.is_empty() || spec.seeds.is_empty() || spec.protocols.is_empty() || spec.presets.is_empty() {
        return Err(SweepError::Empty);
    }
    let jobs = spec.scenarios();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| SweepError::Pool(e.to_string()))?;
    pool.install(|| {
        jobs.into_par_iter()
            .map(|c| {
                run_scenario(c.clone()).map_err(|source| SweepError::Run {
                    protocol: c.protocol,
                    preset: c.preset,
                    nodes: c.nodes,
                    rate: c.traffic.rate,
                    seed: c.seed,
                    source,
                })
            })
            .collect()
    })
}

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

pub const AGGREGATE_HEADER: &str = "protocol,preset,nodes,rate,runs,throughput_bps_mean,throughput_bps_std,avg_e2ed_s_mean,avg_e2ed_s_std,nrl_mean,nrl_std,control_tx_mean,control_tx_std";

/// One row per (protocol, preset, point) with mean and sample standard
/// deviation over seeds. Undefined per-run values are left out of the
/// statistics.
pub fn render_aggregate(runs: &[RunOutput]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    let mut i = 0;
    while i < runs.len() {
        let key = |r: &RunOutput| (r.config.protocol, r.config.preset, r.config.nodes, r.config.traffic.rate.to_bits());
        let k = key(&runs[i]);
        let mut j = i;
        while j < runs.len() && key(&runs[j]) == k {
            j += 1;
        }
        let group = &runs[i..j];
        let column = |f: &dyn Fn(&RunOutput) -> Option<f64>| -> String {
            let vals: Vec<f64> = group.iter().filter_map(f).collect();
            let (m, s) = mean_std(&vals);
            format!("{},{}", opt(m), opt(s))
        };
        let c = &group[0].config;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.protocol,
            c.preset,
            c.nodes,
            c.traffic.rate,
            group.len(),
            column(&|r| Some(r.metrics.throughput)),
            column(&|r| r.metrics.avg_e2ed),
            column(&|r| r.metrics.nrl),
            column(&|r| Some(r.metrics.control_transmissions as f64)),
        );
        i = j;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub protocol: ProtocolKind,
    pub preset: Preset,
    pub simulated_control_tx: u64,
    pub simulated_originations: u64,
    pub predicted_control_tx: f64,
    pub abs_deviation: f64,
    /// `None` when the prediction is zero.
    pub rel_deviation: Option<f64>,
}

pub const COMPARISON_HEADER: &str =
    "protocol,preset,simulated_control_tx,simulated_originations,predicted_control_tx,abs_deviation,rel_deviation";

impl Comparison {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.protocol,
            self.preset,
            self.simulated_control_tx,
            self.simulated_originations,
            self.predicted_control_tx,
            self.abs_deviation,
            opt(self.rel_deviation)
        )
    }
}

/// Predicted control transmissions for a finished run. OLSR's prediction
/// counts originations only, so relayed TCs are compared separately.
pub fn predicted_control(run: &RunOutput) -> Result<f64, AnalyticError> {
    let p = &run.analytic;
    Ok(match run.config.protocol {
        ProtocolKind::Dsdv => cost_dsdv(p)?.total,
        ProtocolKind::Fsr => cost_fsr(p)?.emissions,
        ProtocolKind::Olsr => cost_olsr(p)?.total,
    })
}

pub fn compare(run: &RunOutput) -> Result<Comparison, AnalyticError> {
    let predicted = predicted_control(run)?;
    let simulated = run.counters.control_total();
    let originations: u64 = run
        .counters
        .control_tx
        .iter()
        .filter(|(k, _)| k.is_origination())
        .map(|(_, v)| v)
        .sum();
    let observed = match run.config.protocol {
        ProtocolKind::Olsr => originations,
        _ => simulated,
    } as f64;
    let abs = (observed - predicted).abs();
    Ok(Comparison {
        protocol: run.config.protocol,
        preset: run.config.preset,
        simulated_control_tx: simulated,
        simulated_originations: originations,
        predicted_control_tx: predicted,
        abs_deviation: abs,
        rel_deviation: (predicted != 0.0).then(|| abs / predicted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MobilityKind;

    fn small(protocol: ProtocolKind) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            protocol,
            nodes: 8,
            sim_time: 30.0,
            ..ScenarioConfig::default()
        };
        c.area.width = 500.0;
        c.area.height = 500.0;
        c.traffic.num_flows = 4;
        c
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, Some(5.0));
        assert!((s.unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0]), (Some(3.0), None));
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn single_node_has_undefined_ratios() {
        let mut c = small(ProtocolKind::Dsdv);
        c.nodes = 1;
        c.traffic.num_flows = 0;
        let out = run_scenario(c).unwrap();
        assert_eq!(out.metrics.delivered, 0);
        let row = out.csv_row();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.split(',').count());
        assert_eq!(fields[6], "NA");
        assert_eq!(fields[7], "NA");
    }

    #[test]
    fn identical_runs_give_identical_rows() {
        for p in ProtocolKind::ALL {
            let a = run_scenario(small(p)).unwrap().csv_row();
            let b = run_scenario(small(p)).unwrap().csv_row();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sweep_cell_counts_and_order() {
        let mut base = small(ProtocolKind::Dsdv);
        base.sim_time = 5.0;
        let mut spec = SweepSpec::new(SweepFamily::Traffic, vec![2, 1], base);
        assert_eq!(spec.scenarios().len(), 3 * 2 * 5 * 2);
        spec.points = vec![2.0, 8.0];
        spec.base.traffic.num_flows = 2;
        let runs = run_sweep(&spec, Some(2)).unwrap();
        let keys: Vec<_> = runs
            .iter()
            .map(|r| (r.config.protocol, r.config.preset, r.config.traffic.rate.to_bits(), r.config.seed))
            .collect();
        assert_eq!(keys.len(), 24);
        assert_eq!(keys[0], (ProtocolKind::Dsdv, Preset::Original, 2.0f64.to_bits(), 2));
        assert_eq!(keys[1].3, 1);
        assert!(runs.iter().all(|r| r.config.nodes == 50 && r.config.traffic.packet_size == 64));
        let agg = render_aggregate(&runs);
        assert_eq!(agg.lines().count(), 1 + 3 * 2 * 2);
    }

    #[test]
    fn scalability_points() {
        let spec = SweepSpec::new(SweepFamily::Scalability, vec![1], ScenarioConfig::default());
        let nodes: Vec<usize> = spec.points.iter().map(|&p| spec.scenario(ProtocolKind::Fsr, Preset::Original, p, 1).nodes).collect();
        assert_eq!(nodes, vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
    }

    #[test]
    fn single_seed_leaves_std_undefined() {
        let mut base = small(ProtocolKind::Olsr);
        base.sim_time = 3.0;
        let mut spec = SweepSpec::new(SweepFamily::Scalability, vec![1], base);
        spec.points = vec![5.0];
        spec.protocols = vec![ProtocolKind::Olsr];
        spec.presets = vec![Preset::Original];
        let agg = render_aggregate(&run_sweep(&spec, Some(1)).unwrap());
        let row: Vec<&str> = agg.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[6], "NA");
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut spec = SweepSpec::new(SweepFamily::Traffic, vec![], ScenarioConfig::default());
        assert!(matches!(run_sweep(&spec, None), Err(SweepError::Empty)));
        spec.seeds = vec![1];
        spec.points.clear();
        assert!(matches!(run_sweep(&spec, None), Err(SweepError::Empty)));
    }

    #[test]
    fn static_dsdv_comparison_is_close() {
        let mut c = small(ProtocolKind::Dsdv);
        c.mobility.model = MobilityKind::Static;
        c.traffic.num_flows = 0;
        c.sim_time = 150.0;
        let cmp = compare(&run_scenario(c).unwrap()).unwrap();
        assert_eq!(cmp.predicted_control_tx, 80.0);
        assert!(cmp.abs_deviation <= 8.0, "{cmp:?}");
    }
}
