//! Run metrics and closed-form control-overhead models.
//!
//! The overhead models count one packet per member of each summed set
//! (cardinality reading). FSR additionally has an entry-weighted form in
//! which an update costs as many units as the entries it carries.

use std::collections::BTreeMap;

use crate::config::ProtocolKind;
use crate::protocol::ControlKind;
use crate::routing::DropCause;

/// Raw per-run counters, as kept by the engine or rebuilt from an audit log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub generated: u64,
    pub delivered: u64,
    pub delivered_bytes: u64,
    /// Sum of end-to-end delays of delivered packets, nanoseconds.
    pub delay_sum_ns: u128,
    pub control_tx: BTreeMap<ControlKind, u64>,
    pub drops: BTreeMap<DropCause, u64>,
}

impl Counters {
    pub fn control_total(&self) -> u64 {
        self.control_tx.values().sum()
    }

    pub fn control(&self, kind: ControlKind) -> u64 {
        self.control_tx.get(&kind).copied().unwrap_or(0)
    }

    pub fn drops(&self, cause: DropCause) -> u64 {
        self.drops.get(&cause).copied().unwrap_or(0)
    }

    pub fn drops_total(&self) -> u64 {
        self.drops.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Delivered bits per second of simulated time.
    pub throughput: f64,
    /// Mean end-to-end delay in seconds; `None` when nothing was delivered.
    pub avg_e2ed: Option<f64>,
    /// Control transmissions per delivered packet; `None` when nothing was delivered.
    pub nrl: Option<f64>,
    pub delivered: u64,
    pub generated: u64,
    pub control_transmissions: u64,
    pub drops_by_cause: BTreeMap<DropCause, u64>,
}

pub fn compute_metrics(counters: &Counters, tau_nl: f64) -> MetricsReport {
    let throughput = if tau_nl > 0.0 {
        counters.delivered_bytes as f64 * 8.0 / tau_nl
    } else {
        0.0
    };
    let delivered = counters.delivered;
    let control = counters.control_total();
    MetricsReport {
        throughput,
        avg_e2ed: (delivered > 0).then(|| counters.delay_sum_ns as f64 / 1e9 / delivered as f64),
        nrl: (delivered > 0).then(|| control as f64 / delivered as f64),
        delivered,
        generated: counters.generated,
        control_transmissions: control,
        drops_by_cause: DropCause::ALL.iter().map(|&c| (c, counters.drops(c))).collect(),
    }
}

/// Packet cost, time cost and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub packet_cost: f64,
    pub time_cost: f64,
    pub combined: f64,
}

impl CostReport {
    /// Control transmissions times mean end-to-end delay; the time cost is
    /// zero when nothing was delivered.
    pub fn from_metrics(report: &MetricsReport) -> Self {
        let packet_cost = report.control_transmissions as f64;
        let time_cost = report.avg_e2ed.unwrap_or(0.0);
        CostReport {
            packet_cost,
            time_cost,
            combined: packet_cost * time_cost,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyticParams {
    pub n: f64,
    pub tau_nl: f64,
    pub tau_per: f64,
    /// Link changes on active routes over the run.
    pub link_changes: f64,
    pub tau_in: f64,
    pub tau_out: f64,
    /// Average destinations per node inside / outside the fisheye scope.
    pub n_in: f64,
    pub n_out: f64,
    pub tau_hello: f64,
    pub tau_tc: f64,
    /// MPR-set change events over the run.
    pub mpr_changes: f64,
    pub avg_nbr: f64,
    pub avg_mpr: f64,
    /// Nodes with a nonempty MPR-selector set.
    pub n_selected: f64,
    /// Advertisement rates, per second.
    pub alpha: f64,
    pub alpha_in: f64,
    pub alpha_out: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
}

fn positive(name: &'static str, v: f64) -> Result<f64, AnalyticError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(AnalyticError::NonPositive(name))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<f64, AnalyticError> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(AnalyticError::Negative(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsdvCost {
    pub periodic: f64,
    pub trigger: f64,
    pub total: f64,
}

pub fn cost_dsdv(p: &AnalyticParams) -> Result<DsdvCost, AnalyticError> {
    let tau_per = positive("tau_per", p.tau_per)?;
    let n = nonnegative("n", p.n)?;
    let periodic = nonnegative("tau_nl", p.tau_nl)? / tau_per * n;
    let trigger = nonnegative("link_changes", p.link_changes)? * n;
    Ok(DsdvCost {
        periodic,
        trigger,
        total: periodic + trigger,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsrCost {
    /// Update packets: every node emits once per inner and once per outer interval.
    pub emissions: f64,
    /// Carried entries: each update costs the size of the scope it serves.
    pub entry_weighted: f64,
}

pub fn cost_fsr(p: &AnalyticParams) -> Result<FsrCost, AnalyticError> {
    let tau_in = positive("tau_in", p.tau_in)?;
    let tau_out = positive("tau_out", p.tau_out)?;
    let n = nonnegative("n", p.n)?;
    let tau = nonnegative("tau_nl", p.tau_nl)?;
    let n_in = nonnegative("n_in", p.n_in)?;
    let n_out = nonnegative("n_out", p.n_out)?;
    Ok(FsrCost {
        emissions: n * tau * (1.0 / tau_in + 1.0 / tau_out),
        entry_weighted: n * tau * (n_in / tau_in + n_out / tau_out),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsrCost {
    pub hello: f64,
    pub tc_trigger: f64,
    pub tc_default: f64,
    pub total: f64,
}

pub fn cost_olsr(p: &AnalyticParams) -> Result<OlsrCost, AnalyticError> {
    let tau_hello = positive("tau_hello", p.tau_hello)?;
    let tau_tc = positive("tau_tc", p.tau_tc)?;
    let n = nonnegative("n", p.n)?;
    let tau = nonnegative("tau_nl", p.tau_nl)?;
    let hello = tau / tau_hello * n;
    let tc_trigger = nonnegative("mpr_changes", p.mpr_changes)? * nonnegative("avg_mpr", p.avg_mpr)? * n;
    let tc_default = tau / tau_tc * nonnegative("n_selected", p.n_selected)?;
    Ok(OlsrCost {
        hello,
        tc_trigger,
        tc_default,
        total: hello + tc_trigger + tc_default,
    })
}

/// Advertised-entry utilization. OLSR has no closed form here.
pub fn util_model(protocol: ProtocolKind, p: &AnalyticParams) -> Option<f64> {
    match protocol {
        ProtocolKind::Dsdv => Some(p.n * p.tau_nl * p.alpha),
        ProtocolKind::Fsr => Some(p.n_in * p.tau_nl * p.alpha_in + p.n_out * p.tau_nl * p.alpha_out),
        ProtocolKind::Olsr => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MprUtilizationParams {
    /// Free bandwidth at the relay, bits per second.
    pub b_available: f64,
    /// Bandwidth requested by the source, bits per second.
    pub b_requested: f64,
    /// Joules.
    pub e_available: f64,
    /// Joules per relay transmission.
    pub e_transmit: f64,
    /// Seconds from source to relay.
    pub delay: f64,
}

/// Bandwidth factor times energy factor over delay.
pub fn mpr_utilization(q: &MprUtilizationParams) -> Result<f64, AnalyticError> {
    let b_available = positive("b_available", q.b_available)?;
    let b_requested = positive("b_requested", q.b_requested)?;
    let e_available = positive("e_available", q.e_available)?;
    let e_transmit = positive("e_transmit", q.e_transmit)?;
    let delay = positive("delay", q.delay)?;
    Ok(b_available / b_requested * (e_available / e_transmit) / delay)
}
