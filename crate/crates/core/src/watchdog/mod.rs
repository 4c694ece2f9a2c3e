//! Per-node neighborhood monitoring. Every piece of reputation evidence in
//! the system is a [`RuleEvent`], and rule events can only be built by the
//! rule functions in this module: votes, alerts and other received claims
//! have no way to turn into evidence.

mod buffer;
mod rules;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;
use crate::topology::NodeId;

pub use buffer::{WatchBuffer, WatchEntry, WatchKey};
pub use rules::{
    audit_traffic, check_auth, check_beacon, expected_traffic, replay_detected, resolve_ack,
    self_delivery_check, validate_reading, watch_resolved, AckOutcome, BeaconView, DataVerdict,
    NeighborObservation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    Ack,
    Auth,
    DataValid,
    Traffic,
    PdrSelf,
    Memory,
    InSitu,
}

impl Rule {
    pub fn label(self) -> &'static str {
        match self {
            Rule::Ack => "ACK",
            Rule::Auth => "AUTH",
            Rule::DataValid => "DATA_VALID",
            Rule::Traffic => "TRAFFIC",
            Rule::PdrSelf => "PDR_SELF",
            Rule::Memory => "MEMORY",
            Rule::InSitu => "INSITU",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    DirectZero,
}

impl Polarity {
    pub fn label(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::DirectZero => "direct_zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subject {
    Neighbor(NodeId),
    SelfNode,
}

/// One locally generated detection outcome.
///
/// Fields and constructors are private, so nothing outside this module can
/// fabricate evidence:
///
/// ```compile_fail
/// use sentinel_core::watchdog::{Polarity, Rule, RuleEvent, Subject};
/// use sentinel_core::sim::SimTime;
/// use sentinel_core::topology::NodeId;
/// let forged = RuleEvent {
///     rule: Rule::Traffic,
///     subject: Subject::Neighbor(NodeId(1)),
///     polarity: Polarity::Positive,
///     weight: 1.0,
///     at: SimTime(0),
/// };
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleEvent {
    rule: Rule,
    subject: Subject,
    polarity: Polarity,
    weight: f64,
    at: SimTime,
}

impl RuleEvent {
    fn positive(rule: Rule, subject: NodeId, weight: f64, at: SimTime) -> Self {
        RuleEvent {
            rule,
            subject: Subject::Neighbor(subject),
            polarity: Polarity::Positive,
            weight,
            at,
        }
    }

    fn negative(rule: Rule, subject: NodeId, weight: f64, at: SimTime) -> Self {
        RuleEvent {
            rule,
            subject: Subject::Neighbor(subject),
            polarity: Polarity::Negative,
            weight,
            at,
        }
    }

    fn direct_zero(rule: Rule, subject: NodeId, at: SimTime) -> Self {
        debug_assert!(matches!(rule, Rule::Memory | Rule::InSitu));
        RuleEvent {
            rule,
            subject: Subject::Neighbor(subject),
            polarity: Polarity::DirectZero,
            weight: 0.0,
            at,
        }
    }

    fn about_self(rule: Rule, at: SimTime) -> Self {
        RuleEvent {
            rule,
            subject: Subject::SelfNode,
            polarity: Polarity::Negative,
            weight: 0.0,
            at,
        }
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn subject(&self) -> Subject {
        self.subject
    }

    pub fn neighbor(&self) -> Option<NodeId> {
        match self.subject {
            Subject::Neighbor(id) => Some(id),
            Subject::SelfNode => None,
        }
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn at(&self) -> SimTime {
        self.at
    }
}

/// Monitoring thresholds. Every value here is a tunable default, not a
/// measured constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WatchdogConfig {
    /// Probability that a sent or overheard unicast DATA frame is copied to
    /// the watch buffer.
    pub p_watch: f64,
    pub buffer_capacity: usize,
    /// Acknowledgment / forwarding deadline in ticks.
    pub t_ack: u64,
    /// Data-validation z-score bound.
    pub k: f64,
    /// Minimum number of other neighbors needed before judging a reading.
    pub m: usize,
    /// Per-neighbor reading window length.
    pub window: usize,
    /// Allowed relative excess over expected traffic.
    pub delta: f64,
    pub theta_pdr: f64,
    /// Minimum originated packets before the self delivery check runs.
    pub min_pdr_packets: usize,
    /// Location change (m) tolerated between consecutive beacons.
    pub eps_loc: f64,
    /// Floor on the data-validation spread; defaults to a tenth of the
    /// sensing field's standard deviation.
    pub sigma_min: Option<f64>,
    /// Weight of one negative data-validation event.
    pub w_data: f64,
    /// Weight of the small once-per-epoch positive events (data validation,
    /// traffic conformity, beacon consistency).
    pub small_positive: f64,
}

impl Default for WatchdogConfig {
    fn default() -> Self {
        WatchdogConfig {
            p_watch: 0.25,
            buffer_capacity: 8,
            t_ack: 80,
            k: 3.0,
            m: 4,
            window: 10,
            delta: 0.5,
            theta_pdr: 0.8,
            min_pdr_packets: 5,
            eps_loc: 5.0,
            sigma_min: None,
            w_data: 1.0,
            small_positive: 0.1,
        }
    }
}
