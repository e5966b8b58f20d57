//! Scenario description and its flat `key=value` text form.
//!
//! ```text
//! # comments and blank lines are ignored
//! protocol = olsr
//! preset = modified
//! nodes = 50
//! protocol.olsr.hello_interval = 1.0
//! ```
//!
//! Command-line overrides use the same dotted keys as `--key value` or
//! `--key=value`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::dsdv::DsdvConfig;
use crate::fsr::FsrConfig;
use crate::mobility::{Field, MobilityModel};
use crate::olsr::OlsrConfig;
use crate::radio::RadioModel;
use crate::routing::DEFAULT_TTL;
use crate::traffic::FlowTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolKind {
    Dsdv,
    Fsr,
    Olsr,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Dsdv, ProtocolKind::Fsr, ProtocolKind::Olsr];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Dsdv => "dsdv",
            ProtocolKind::Fsr => "fsr",
            ProtocolKind::Olsr => "olsr",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("expected one of dsdv, fsr, olsr; got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    Original,
    Modified,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Original, Preset::Modified];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Original => "original",
            Preset::Modified => "modified",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("expected original or modified; got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityKind {
    RandomWaypoint,
    Static,
}

impl MobilityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MobilityKind::RandomWaypoint => "random-waypoint",
            MobilityKind::Static => "static",
        }
    }
}

impl FromStr for MobilityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-waypoint" => Ok(MobilityKind::RandomWaypoint),
            "static" => Ok(MobilityKind::Static),
            _ => Err(format!("expected random-waypoint or static; got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    pub model: MobilityKind,
    /// Meters per second.
    pub speed: f64,
    /// Seconds.
    pub pause: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            model: MobilityKind::RandomWaypoint,
            speed: 20.0,
            pause: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub preset: Preset,
    pub nodes: usize,
    pub area: Field,
    /// Seconds.
    pub sim_time: f64,
    pub seed: u64,
    pub radio: RadioModel,
    pub mobility: MobilityConfig,
    /// Redraw the initial placement until the topology is connected.
    pub placement_connected: bool,
    pub traffic: FlowTemplate,
    pub ttl: u32,
    /// Per-protocol timer overrides keyed like `olsr.hello_interval`.
    pub protocol_overrides: BTreeMap<String, f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: ProtocolKind::Dsdv,
            preset: Preset::Original,
            nodes: 50,
            area: Field {
                width: 1000.0,
                height: 1000.0,
            },
            sim_time: 900.0,
            seed: 1,
            radio: RadioModel::default(),
            mobility: MobilityConfig::default(),
            placement_connected: false,
            traffic: FlowTemplate::default(),
            ttl: DEFAULT_TTL,
            protocol_overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
}

const PROTOCOL_KEYS: &[(&str, Kind)] = &[
    ("dsdv.periodic_interval", Kind::Real),
    ("dsdv.trigger_update_time", Kind::Real),
    ("dsdv.settling_count", Kind::Count),
    ("dsdv.npdu_capacity", Kind::Count),
    ("dsdv.loss_threshold", Kind::Count),
    ("fsr.inner_interval", Kind::Real),
    ("fsr.outer_interval", Kind::Real),
    ("fsr.scope_radius", Kind::Count),
    ("fsr.loss_threshold", Kind::Count),
    ("fsr.entry_lifetime_intervals", Kind::Real),
    ("olsr.hello_interval", Kind::Real),
    ("olsr.tc_interval", Kind::Real),
    ("olsr.hello_loss_threshold", Kind::Count),
    ("olsr.trigger_min_gap", Kind::Real),
    ("olsr.topology_hold_intervals", Kind::Real),
];

/// Every key accepted by [`ScenarioConfig::set`].
pub fn known_keys() -> Vec<String> {
    let mut keys: Vec<String> = [
        "protocol",
        "preset",
        "nodes",
        "area.x",
        "area.y",
        "sim_time",
        "seed",
        "radio.range",
        "radio.bandwidth",
        "radio.processing_delay",
        "radio.loss_probability",
        "radio.queue_capacity",
        "mobility.model",
        "mobility.speed",
        "mobility.pause",
        "placement.connected",
        "traffic.num_flows",
        "traffic.rate",
        "traffic.packet_size",
        "traffic.stagger",
        "routing.ttl",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    keys.extend(PROTOCOL_KEYS.iter().map(|(k, _)| format!("protocol.{k}")));
    keys
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| invalid(key, value, e.to_string()))
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(key, value)?;
    if !v.is_finite() {
        return Err(invalid(key, value, "must be finite"));
    }
    Ok(v)
}

impl ScenarioConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "protocol" => self.protocol = parse(key, value)?,
            "preset" => self.preset = parse(key, value)?,
            "nodes" => self.nodes = parse(key, value)?,
            "area.x" => self.area.width = real(key, value)?,
            "area.y" => self.area.height = real(key, value)?,
            "sim_time" => self.sim_time = real(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "radio.range" => self.radio.range = real(key, value)?,
            "radio.bandwidth" => self.radio.bandwidth = real(key, value)?,
            "radio.processing_delay" => self.radio.per_hop_processing_delay = real(key, value)?,
            "radio.loss_probability" => self.radio.loss_probability = real(key, value)?,
            "radio.queue_capacity" => self.radio.queue_capacity = parse(key, value)?,
            "mobility.model" => self.mobility.model = parse(key, value)?,
            "mobility.speed" => self.mobility.speed = real(key, value)?,
            "mobility.pause" => self.mobility.pause = real(key, value)?,
            "placement.connected" => self.placement_connected = parse(key, value)?,
            "traffic.num_flows" => self.traffic.num_flows = parse(key, value)?,
            "traffic.rate" => self.traffic.rate = real(key, value)?,
            "traffic.packet_size" => self.traffic.packet_size = parse(key, value)?,
            "traffic.stagger" => self.traffic.stagger = real(key, value)?,
            "routing.ttl" => self.ttl = parse(key, value)?,
            _ => {
                let sub = key
                    .strip_prefix("protocol.")
                    .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
                let (_, kind) = PROTOCOL_KEYS
                    .iter()
                    .find(|(k, _)| *k == sub)
                    .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
                let v = match kind {
                    Kind::Real => real(key, value)?,
                    Kind::Count => parse::<u32>(key, value)? as f64,
                };
                self.protocol_overrides.insert(sub.to_string(), v);
            }
        }
        Ok(())
    }

    /// Reads the value of `key` back in its canonical text form.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "protocol" => self.protocol.to_string(),
            "preset" => self.preset.to_string(),
            "nodes" => self.nodes.to_string(),
            "area.x" => self.area.width.to_string(),
            "area.y" => self.area.height.to_string(),
            "sim_time" => self.sim_time.to_string(),
            "seed" => self.seed.to_string(),
            "radio.range" => self.radio.range.to_string(),
            "radio.bandwidth" => self.radio.bandwidth.to_string(),
            "radio.processing_delay" => self.radio.per_hop_processing_delay.to_string(),
            "radio.loss_probability" => self.radio.loss_probability.to_string(),
            "radio.queue_capacity" => self.radio.queue_capacity.to_string(),
            "mobility.model" => self.mobility.model.as_str().to_string(),
            "mobility.speed" => self.mobility.speed.to_string(),
            "mobility.pause" => self.mobility.pause.to_string(),
            "placement.connected" => self.placement_connected.to_string(),
            "traffic.num_flows" => self.traffic.num_flows.to_string(),
            "traffic.rate" => self.traffic.rate.to_string(),
            "traffic.packet_size" => self.traffic.packet_size.to_string(),
            "traffic.stagger" => self.traffic.stagger.to_string(),
            "routing.ttl" => self.ttl.to_string(),
            _ => return self.protocol_overrides.get(key.strip_prefix("protocol.")?).map(|v| v.to_string()),
        })
    }

    /// Parses a config file on top of the defaults. Values are not
    /// validated; call [`ScenarioConfig::validate`] before running.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = ScenarioConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in known_keys() {
            if let Some(v) = self.get(&key) {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }

    fn override_or(&self, key: &str, default: f64) -> f64 {
        self.protocol_overrides.get(key).copied().unwrap_or(default)
    }

    pub fn dsdv_config(&self) -> DsdvConfig {
        let base = match self.preset {
            Preset::Original => DsdvConfig::original(),
            Preset::Modified => DsdvConfig::modified(),
        };
        DsdvConfig {
            periodic_interval: self.override_or("dsdv.periodic_interval", base.periodic_interval),
            trigger_update_time: self.override_or("dsdv.trigger_update_time", base.trigger_update_time),
            settling_count: self.override_or("dsdv.settling_count", base.settling_count as f64) as u32,
            npdu_capacity: self.override_or("dsdv.npdu_capacity", base.npdu_capacity as f64) as usize,
            loss_threshold: self.override_or("dsdv.loss_threshold", base.loss_threshold as f64) as u32,
        }
    }

    pub fn fsr_config(&self) -> FsrConfig {
        let base = match self.preset {
            Preset::Original => FsrConfig::original(),
            Preset::Modified => FsrConfig::modified(),
        };
        FsrConfig {
            inner_interval: self.override_or("fsr.inner_interval", base.inner_interval),
            outer_interval: self.override_or("fsr.outer_interval", base.outer_interval),
            scope_radius: self.override_or("fsr.scope_radius", base.scope_radius as f64) as u32,
            loss_threshold: self.override_or("fsr.loss_threshold", base.loss_threshold as f64) as u32,
            entry_lifetime_intervals: self
                .override_or("fsr.entry_lifetime_intervals", base.entry_lifetime_intervals),
        }
    }

    pub fn olsr_config(&self) -> OlsrConfig {
        let base = match self.preset {
            Preset::Original => OlsrConfig::original(),
            Preset::Modified => OlsrConfig::modified(),
        };
        OlsrConfig {
            hello_interval: self.override_or("olsr.hello_interval", base.hello_interval),
            tc_interval: self.override_or("olsr.tc_interval", base.tc_interval),
            hello_loss_threshold: self
                .override_or("olsr.hello_loss_threshold", base.hello_loss_threshold as f64)
                as u32,
            trigger_min_gap: self.override_or("olsr.trigger_min_gap", base.trigger_min_gap),
            topology_hold_intervals: self
                .override_or("olsr.topology_hold_intervals", base.topology_hold_intervals),
        }
    }

    pub fn mobility_model(&self) -> MobilityModel {
        match self.mobility.model {
            MobilityKind::Static => MobilityModel::Static,
            MobilityKind::RandomWaypoint => MobilityModel::RandomWaypoint {
                speed: self.mobility.speed,
                pause: self.mobility.pause,
            },
        }
    }

    // Negated comparisons so that NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.nodes == 0 {
            return bad("nodes must be at least 1".into());
        }
        if self.nodes > u32::MAX as usize {
            return bad("too many nodes".into());
        }
        if !(self.area.width > 0.0 && self.area.height > 0.0) {
            return bad("area dimensions must be positive".into());
        }
        if !(self.sim_time > 0.0) || self.sim_time > 1e9 {
            return bad("sim_time must be positive and at most 1e9 s".into());
        }
        if !(self.radio.range > 0.0) || !(self.radio.bandwidth > 0.0) {
            return bad("radio range and bandwidth must be positive".into());
        }
        if !(self.radio.per_hop_processing_delay >= 0.0) {
            return bad("radio.processing_delay must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.radio.loss_probability) {
            return bad("radio.loss_probability must lie in [0, 1]".into());
        }
        if self.mobility.model == MobilityKind::RandomWaypoint && !(self.mobility.speed > 0.0) {
            return bad("mobility.speed must be positive for random-waypoint".into());
        }
        if !(self.mobility.pause >= 0.0) {
            return bad("mobility.pause must be nonnegative".into());
        }
        if !(self.traffic.rate > 0.0) {
            return bad("traffic.rate must be positive".into());
        }
        if self.traffic.packet_size == 0 {
            return bad("traffic.packet_size must be positive".into());
        }
        if !(self.traffic.stagger >= 0.0) {
            return bad("traffic.stagger must be nonnegative".into());
        }
        let pairs = self.nodes.saturating_mul(self.nodes - 1);
        if self.traffic.num_flows > pairs {
            return bad(format!(
                "traffic.num_flows = {} exceeds the {pairs} ordered node pairs",
                self.traffic.num_flows
            ));
        }
        if self.ttl == 0 {
            return bad("routing.ttl must be positive".into());
        }
        let d = self.dsdv_config();
        if !(d.periodic_interval > 0.0 && d.trigger_update_time > 0.0)
            || d.settling_count == 0
            || d.npdu_capacity == 0
            || d.loss_threshold == 0
        {
            return bad("DSDV parameters must all be positive".into());
        }
        let f = self.fsr_config();
        if !(f.inner_interval > 0.0) || !(f.outer_interval > 0.0) {
            return bad("FSR intervals must be positive".into());
        }
        if f.inner_interval > f.outer_interval {
            return bad("fsr.inner_interval must not exceed fsr.outer_interval".into());
        }
        if f.scope_radius == 0 || f.loss_threshold == 0 || !(f.entry_lifetime_intervals > 0.0) {
            return bad("FSR scope radius, loss threshold and entry lifetime must be positive".into());
        }
        let o = self.olsr_config();
        if !(o.hello_interval > 0.0 && o.tc_interval > 0.0 && o.topology_hold_intervals > 0.0)
            || o.hello_loss_threshold == 0
            || !(o.trigger_min_gap >= 0.0)
        {
            return bad("OLSR parameters must be positive".into());
        }
        Ok(())
    }
}

/// Splits command-line overrides of the form `--key value` or `--key=value`.
pub fn parse_override_args<S: AsRef<str>>(args: &[S]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut iter = args.iter().map(AsRef::as_ref);
    while let Some(arg) = iter.next() {
        let body = arg.strip_prefix("--").ok_or_else(|| ConfigError::Syntax {
            line: 0,
            message: format!("expected --key, got {arg:?}"),
        })?;
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = iter.next().ok_or_else(|| ConfigError::Syntax {
                    line: 0,
                    message: format!("missing value for --{body}"),
                })?;
                (body.to_string(), v.to_string())
            }
        };
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: 0,
                message: "empty flag name".into(),
            });
        }
        out.push((key, value));
    }
    Ok(out)
}
