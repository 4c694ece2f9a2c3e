//! Reputation records, neighborhood voting and remote trust probes.

mod record;
mod remote;
mod voting;

use serde::{Deserialize, Serialize};

use crate::watchdog::Rule;

pub use record::{trust_value, Applied, IsolationCause, ReputationRecord, TrustStatus};
pub use remote::{
    hop_estimate, probe_budget, probe_next_hop, ProbeCandidate, ProbeOutcome, RemoteQueryError,
};
pub use voting::{tally, Ballot, Tally, Verdict, VotingRound};

/// Multipliers on positive evidence per rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActivityWeights {
    pub ack: f64,
    pub data_valid: f64,
    pub traffic: f64,
}

impl Default for ActivityWeights {
    fn default() -> Self {
        ActivityWeights {
            ack: 1.0,
            data_valid: 1.0,
            traffic: 1.0,
        }
    }
}

impl ActivityWeights {
    pub fn for_rule(&self, rule: Rule) -> f64 {
        match rule {
            Rule::Ack => self.ack,
            Rule::DataValid => self.data_valid,
            Rule::Traffic => self.traffic,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustConfig {
    /// Suspicion threshold; a record strictly below it raises an alert.
    pub theta: f64,
    /// Forwarding eligibility floor; defaults to `theta`.
    pub theta_route: Option<f64>,
    /// Per-epoch aging factor applied to both counters.
    pub lambda: f64,
    /// Ticks a voting round stays open.
    pub vote_window: u64,
    /// Count every non-isolated vote with weight 1.
    pub plain_majority: bool,
    /// Extra hops a remote probe may take beyond the distance estimate.
    pub probe_slack: u8,
    /// Retries after a probe times out before giving up as undecided.
    pub probe_retries: u8,
    pub activity_weights: ActivityWeights,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            theta: 0.25,
            theta_route: None,
            lambda: 0.9,
            vote_window: 2000,
            plain_majority: false,
            probe_slack: 2,
            probe_retries: 1,
            activity_weights: ActivityWeights::default(),
        }
    }
}

impl TrustConfig {
    pub fn route_floor(&self) -> f64 {
        self.theta_route.unwrap_or(self.theta)
    }
}
