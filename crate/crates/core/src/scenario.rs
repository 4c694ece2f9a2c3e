//! Scenario files: a TOML document describing one experiment. Every table
//! rejects unknown keys, so a typo is an error rather than a silently ignored
//! setting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AttackProfile, CollusionDirection, FaultProfile};
use crate::crypto::MAX_ROUNDS;
use crate::topology::ChannelModel;
use crate::trust::TrustConfig;
use crate::watchdog::WatchdogConfig;

/// Largest field side representable in the decimetre wire coordinates.
pub const MAX_FIELD_SIDE: f64 = 6553.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot resolve sweep parameter `{path}`: {reason}")]
    SweepPath { path: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorName {
    /// The non-sink node that relays the most static greedy routes.
    BusiestRelay,
    /// The non-sink node with the most neighbors.
    MaxDegree,
    /// A uniformly drawn non-sink node.
    Random,
}

/// Picks a node either by id or by a named rule evaluated on the deployed
/// topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSelector {
    Id(u16),
    Named(SelectorName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberRule {
    /// `ceil(d/2) - 1` of the target's `d` neighbors.
    Minority,
    /// `floor(d/2) + 1` of the target's `d` neighbors.
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MemberSpec {
    Count(usize),
    Rule(MemberRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompromiseSpec {
    pub node: NodeSelector,
    /// Activation tick; must be positive.
    pub at: u64,
    #[serde(default)]
    pub profile: AttackProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub node: NodeSelector,
    #[serde(default)]
    pub profile: FaultProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollusionSpec {
    #[serde(default)]
    pub group: u16,
    pub target: NodeSelector,
    pub direction: CollusionDirection,
    pub members: MemberSpec,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustQuerySpec {
    pub querier: u16,
    pub remote: u16,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<toml::Value>,
    pub replicas: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timing {
    pub sensing_period: u64,
    pub beacon_period: u64,
    pub epoch: u64,
    /// Per-hop processing delay in ticks.
    pub processing: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            sensing_period: 5_000,
            beacon_period: 5_000,
            epoch: 10_000,
            processing: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sensing {
    pub field_mean: f64,
    /// Spread of honest readings around the mean.
    pub field_sigma: f64,
}

impl Default for Sensing {
    fn default() -> Self {
        Sensing {
            field_mean: 20.0,
            field_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    /// The sink acknowledges every delivered reading back to its originator.
    pub end_to_end_ack: bool,
    /// Relays check the originator's tag on every frame handed to them.
    pub hop_verify: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            end_to_end_ack: false,
            hop_verify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CryptoConfig {
    pub rounds: u32,
}

impl Default for CryptoConfig {
    fn default() -> Self {
        CryptoConfig { rounds: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Inclusive epoch range averaged for the steady-state trust metric;
    /// defaults to the last 100 epochs of the run.
    pub steady_window: Option<[u64; 2]>,
    /// Keep the full per-event rule log (needed for `rule_events.csv`).
    pub rule_log: Option<bool>,
    /// Keep the textual event trace (needed for `event_trace.txt`).
    pub keep_trace: bool,
}

fn default_seed() -> u64 {
    1
}
fn default_nodes() -> usize {
    50
}
fn default_field() -> [f64; 2] {
    [200.0, 200.0]
}
fn default_range() -> f64 {
    50.0
}
fn default_run() -> u64 {
    1_000_000
}
fn default_replicas() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_field")]
    pub field: [f64; 2],
    #[serde(default = "default_range")]
    pub radio_range: f64,
    /// Sink (node 0) location; defaults to the field centre.
    #[serde(default)]
    pub sink: Option<[f64; 2]>,
    /// Explicit placement of every node, sink first. Random uniform placement
    /// when absent.
    #[serde(default)]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Random placement is redrawn until every node outside the sink's range
    /// has at least this many neighbors strictly closer to the sink. Zero
    /// accepts the first draw, routing voids included.
    #[serde(default)]
    pub min_progress: usize,
    #[serde(default = "default_run")]
    pub run_ticks: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    /// Extra nodes whose trust trajectories are exported.
    #[serde(default)]
    pub monitor: Vec<NodeSelector>,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub sensing: Sensing,
    #[serde(default)]
    pub watchdog: WatchdogConfig,
    #[serde(default)]
    pub trust: TrustConfig,
    #[serde(default)]
    pub crypto: CryptoConfig,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub compromise: Vec<CompromiseSpec>,
    #[serde(default)]
    pub fault: Vec<FaultSpec>,
    #[serde(default)]
    pub collusion: Vec<CollusionSpec>,
    #[serde(default)]
    pub trust_query: Vec<TrustQuerySpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn epochs(&self) -> u64 {
        self.run_ticks / self.timing.epoch
    }

    pub fn steady_window(&self) -> [u64; 2] {
        self.metrics.steady_window.unwrap_or_else(|| {
            let last = self.epochs();
            [last.saturating_sub(100), last]
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes < 1 || self.nodes > u16::MAX as usize {
            return Err(invalid("nodes", "must be between 1 and 65535"));
        }
        let [w, h] = self.field;
        if !(w > 0.0 && h > 0.0 && w <= MAX_FIELD_SIDE && h <= MAX_FIELD_SIDE) {
            return Err(invalid(
                "field",
                format!("sides must be in (0, {MAX_FIELD_SIDE}] m"),
            ));
        }
        if !(self.radio_range > 0.0 && self.radio_range.is_finite()) {
            return Err(invalid("radio_range", "must be positive"));
        }
        let inside = |p: [f64; 2]| (0.0..=w).contains(&p[0]) && (0.0..=h).contains(&p[1]);
        if let Some(s) = self.sink {
            if !inside(s) {
                return Err(invalid("sink", "must lie inside the field"));
            }
        }
        if let Some(ps) = &self.positions {
            if ps.len() != self.nodes {
                return Err(invalid(
                    "positions",
                    format!("has {} entries for {} nodes", ps.len(), self.nodes),
                ));
            }
            if let Some(i) = ps.iter().position(|&p| !inside(p)) {
                return Err(invalid(
                    format!("positions[{i}]"),
                    "must lie inside the field",
                ));
            }
            if self.sink.is_some() {
                return Err(invalid(
                    "sink",
                    "cannot be combined with explicit positions",
                ));
            }
        }
        if self.run_ticks == 0 {
            return Err(invalid("run_ticks", "must be positive"));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        let t = &self.timing;
        for (key, v) in [
            ("timing.sensing_period", t.sensing_period),
            ("timing.beacon_period", t.beacon_period),
            ("timing.epoch", t.epoch),
        ] {
            if v == 0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        let c = &self.channel;
        for (key, v) in [
            ("channel.loss_prob", c.loss_prob),
            ("channel.ack_loss_prob", c.ack_loss_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(key, "must be in [0, 1]"));
            }
        }
        if c.bandwidth_bps == 0 {
            return Err(invalid("channel.bandwidth_bps", "must be positive"));
        }
        if self.sensing.field_sigma.is_nan() || self.sensing.field_sigma < 0.0 {
            return Err(invalid("sensing.field_sigma", "must be non-negative"));
        }
        let wd = &self.watchdog;
        if !(0.0..=1.0).contains(&wd.p_watch) {
            return Err(invalid("watchdog.p_watch", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&wd.theta_pdr) {
            return Err(invalid("watchdog.theta_pdr", "must be in [0, 1]"));
        }
        if wd.t_ack == 0 {
            return Err(invalid("watchdog.t_ack", "must be positive"));
        }
        let tr = &self.trust;
        if !(tr.theta > 0.0 && tr.theta < 1.0) {
            return Err(invalid("trust.theta", "must be in (0, 1)"));
        }
        if let Some(r) = tr.theta_route {
            if !(0.0..=1.0).contains(&r) {
                return Err(invalid("trust.theta_route", "must be in [0, 1]"));
            }
        }
        if !(tr.lambda > 0.0 && tr.lambda <= 1.0) {
            return Err(invalid("trust.lambda", "must be in (0, 1]"));
        }
        if tr.vote_window == 0 {
            return Err(invalid("trust.vote_window", "must be positive"));
        }
        if !(1..=MAX_ROUNDS as u32).contains(&self.crypto.rounds) {
            return Err(invalid(
                "crypto.rounds",
                format!("must be in 1..={MAX_ROUNDS}"),
            ));
        }
        let check_id = |key: String, sel: &NodeSelector| match sel {
            NodeSelector::Id(id) if *id as usize >= self.nodes => {
                Err(invalid(key, format!("node {id} does not exist")))
            }
            _ => Ok(()),
        };
        for (i, sel) in self.monitor.iter().enumerate() {
            check_id(format!("monitor[{i}]"), sel)?;
        }
        for (i, c) in self.compromise.iter().enumerate() {
            check_id(format!("compromise[{i}].node"), &c.node)?;
            if c.node == NodeSelector::Id(0) {
                return Err(invalid(
                    format!("compromise[{i}].node"),
                    "the sink cannot be compromised",
                ));
            }
            if c.at == 0 {
                return Err(invalid(
                    format!("compromise[{i}].at"),
                    "no node may be compromised at bootstrap (time 0)",
                ));
            }
            c.profile
                .validate()
                .map_err(|e| invalid(format!("compromise[{i}].profile"), e.to_string()))?;
        }
        for (i, f) in self.fault.iter().enumerate() {
            check_id(format!("fault[{i}].node"), &f.node)?;
            if f.node == NodeSelector::Id(0) {
                return Err(invalid(
                    format!("fault[{i}].node"),
                    "the sink cannot be faulty",
                ));
            }
            if f.profile.onset == 0 {
                return Err(invalid(
                    format!("fault[{i}].profile.onset"),
                    "no node may be faulty at bootstrap (time 0)",
                ));
            }
            f.profile
                .validate()
                .map_err(|e| invalid(format!("fault[{i}].profile"), e.to_string()))?;
        }
        for (i, c) in self.collusion.iter().enumerate() {
            check_id(format!("collusion[{i}].target"), &c.target)?;
            if c.at == 0 {
                return Err(invalid(format!("collusion[{i}].at"), "must be positive"));
            }
        }
        for (i, q) in self.trust_query.iter().enumerate() {
            for (key, id) in [("querier", q.querier), ("remote", q.remote)] {
                if id as usize >= self.nodes {
                    return Err(invalid(
                        format!("trust_query[{i}].{key}"),
                        format!("node {id} does not exist"),
                    ));
                }
            }
            if q.querier == q.remote {
                return Err(invalid(
                    format!("trust_query[{i}]"),
                    "querier and remote must differ",
                ));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.len() < 2 {
                return Err(invalid("sweep.values", "needs at least two values"));
            }
        }
        Ok(())
    }

    /// Returns a copy with the value at a dotted path replaced, e.g.
    /// `compromise.0.profile.drop_rate` or `trust.theta`. The result is
    /// re-validated.
    pub fn with_param(&self, path: &str, value: toml::Value) -> Result<Scenario, ConfigError> {
        let mut root =
            toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        set_path(&mut root, path, value)?;
        let s: Scenario = root
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::SweepPath {
                path: path.to_string(),
                reason: e.to_string(),
            })?;
        s.validate()?;
        Ok(s)
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let err = |reason: &str| ConfigError::SweepPath {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(err("empty path segment"));
    }
    let mut cur = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    return Ok(());
                }
                if !t.contains_key(*seg) {
                    t.insert(seg.to_string(), toml::Value::Table(Default::default()));
                }
                t.get_mut(*seg).expect("just inserted")
            }
            toml::Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| err("array index expected"))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| err(&format!("index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(err(&format!("`{seg}` is inside a scalar"))),
        };
    }
    Err(err("path does not name a value"))
}

/// Parses a sweep value given on the command line: integers, floats and
/// booleans keep their TOML type, anything else is a string.
pub fn parse_cli_value(text: &str) -> toml::Value {
    let t = text.trim();
    if let Ok(i) = t.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = t.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match t {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(t.to_string()),
    }
}
