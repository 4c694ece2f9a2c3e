//! Behavior overrides for compromised and faulty nodes.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("{field} must lie in [0, 1], got {value}")]
    RateOutOfRange { field: &'static str, value: f64 },
    #[error("node {0} cannot be compromised at time 0: the network bootstraps clean")]
    AtBootstrap(NodeId),
    #[error("node {0} is the sink, which is trusted infrastructure")]
    Sink(NodeId),
    #[error("node {node} does not exist in a {count}-node network")]
    UnknownNode { node: NodeId, count: usize },
    #[error("{0:?} attacks are named but not simulated")]
    Unsimulated(PlaceholderAttack),
    #[error("{field} must be finite and non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
}

/// Attacks from the taxonomy that need channel or identity machinery this
/// simulator does not model. Naming one in a scenario is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaceholderAttack {
    Wormhole,
    HelloFlood,
    Sybil,
    Replication,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataBias {
    pub offset: f64,
    pub sigma: f64,
}

/// Misbehavior of a compromised node. The default profile is honest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackProfile {
    pub drop_rate: f64,
    pub delay_ticks: u64,
    pub alter_rate: f64,
    pub replay_rate: f64,
    pub sinkhole: bool,
    /// Per-tick probability of putting noise on the air.
    pub jam_rate: f64,
    pub data_bias: DataBias,
    /// Per-tick probability of broadcasting a bogus QUERY.
    pub bogus_query_rate: f64,
    /// Fraction of epochs spent behaving honestly.
    pub byzantine_duty: f64,
    /// Physical displacement (dx, dy) in metres applied at activation.
    pub relocate: Option<[f64; 2]>,
    pub code_delta: bool,
    pub collusion_group: Option<u16>,
    pub placeholder: Option<PlaceholderAttack>,
}

fn check_rate(field: &'static str, value: f64) -> Result<(), AdversaryError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AdversaryError::RateOutOfRange { field, value })
    }
}

fn check_non_negative(field: &'static str, value: f64) -> Result<(), AdversaryError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(AdversaryError::Negative { field, value })
    }
}

impl AttackProfile {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        check_rate("drop_rate", self.drop_rate)?;
        check_rate("alter_rate", self.alter_rate)?;
        check_rate("replay_rate", self.replay_rate)?;
        check_rate("jam_rate", self.jam_rate)?;
        check_rate("bogus_query_rate", self.bogus_query_rate)?;
        check_rate("byzantine_duty", self.byzantine_duty)?;
        check_non_negative("data_bias.sigma", self.data_bias.sigma)?;
        if let Some(p) = self.placeholder {
            return Err(AdversaryError::Unsimulated(p));
        }
        Ok(())
    }

    pub fn forward_rates(&self) -> ForwardRates {
        ForwardRates {
            drop: self.drop_rate,
            alter: self.alter_rate,
            delay: self.delay_ticks,
            replay: self.replay_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", deny_unknown_fields)]
pub enum FailurePattern {
    /// Faulty from onset until the end of the run.
    Persistent,
    /// Faulty for `duration` ticks after onset.
    Transient { duration: u64 },
    /// Faulty in each epoch after onset with probability `p` (per mille).
    Probabilistic { per_mille: u16 },
}

/// Benign malfunction of a faulty node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultProfile {
    pub alter_rate: f64,
    /// Per-tick probability of a spurious broadcast.
    pub broadcast_rate: f64,
    pub sense_error_sigma: f64,
    pub drop_rate: f64,
    pub onset: u64,
    pub pattern: FailurePattern,
}

impl Default for FaultProfile {
    fn default() -> Self {
        FaultProfile {
            alter_rate: 0.0,
            broadcast_rate: 0.0,
            sense_error_sigma: 0.0,
            drop_rate: 0.0,
            onset: 0,
            pattern: FailurePattern::Persistent,
        }
    }
}

impl FaultProfile {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        check_rate("alter_rate", self.alter_rate)?;
        check_rate("broadcast_rate", self.broadcast_rate)?;
        check_rate("drop_rate", self.drop_rate)?;
        check_non_negative("sense_error_sigma", self.sense_error_sigma)?;
        if let FailurePattern::Probabilistic { per_mille } = self.pattern {
            if per_mille > 1000 {
                return Err(AdversaryError::RateOutOfRange {
                    field: "pattern.per_mille",
                    value: per_mille as f64 / 1000.0,
                });
            }
        }
        Ok(())
    }

    pub fn forward_rates(&self) -> ForwardRates {
        ForwardRates {
            drop: self.drop_rate,
            alter: self.alter_rate,
            delay: 0,
            replay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForwardRates {
    pub drop: f64,
    pub alter: f64,
    pub delay: u64,
    pub replay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardAction {
    Forward,
    Drop,
    Delay(u64),
    Alter,
    Replay,
}

/// Picks the relay action with priority drop > alter > delay > replay.
/// Zero rates consume no randomness.
pub fn misbehave_forward<R: Rng + ?Sized>(rates: &ForwardRates, rng: &mut R) -> ForwardAction {
    if rates.drop > 0.0 && rng.random::<f64>() < rates.drop {
        return ForwardAction::Drop;
    }
    if rates.alter > 0.0 && rng.random::<f64>() < rates.alter {
        return ForwardAction::Alter;
    }
    if rates.delay > 0 {
        return ForwardAction::Delay(rates.delay);
    }
    if rates.replay > 0.0 && rng.random::<f64>() < rates.replay {
        return ForwardAction::Replay;
    }
    ForwardAction::Forward
}

/// A sensed value after adversarial bias or sensing error.
pub fn fabricate_reading<R: Rng + ?Sized>(bias: &DataBias, true_value: f64, rng: &mut R) -> f64 {
    let mut v = true_value + bias.offset;
    if bias.sigma > 0.0 {
        v += Normal::new(0.0, bias.sigma)
            .expect("finite sigma")
            .sample(rng);
    }
    v
}

/// Whether a Byzantine node with honest fraction `duty` behaves in epoch
/// `epoch`. Honest epochs are spread evenly: epoch k is honest when
/// `floor((k+1)·duty) > floor(k·duty)`.
pub fn honest_in_epoch(epoch: u64, duty: f64) -> bool {
    if duty <= 0.0 {
        return false;
    }
    if duty >= 1.0 {
        return true;
    }
    ((epoch + 1) as f64 * duty).floor() > (epoch as f64 * duty).floor()
}

/// Ticks until the next event of a per-tick Bernoulli(p) process (>= 1).
pub fn next_gap<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    1 + Geometric::new(p).expect("rate in (0, 1)").sample(rng)
}

/// Flips one payload bit chosen at random.
pub fn alter_payload<R: Rng + ?Sized>(payload: &mut [u8], rng: &mut R) {
    if payload.is_empty() {
        return;
    }
    let i = rng.random_range(0..payload.len());
    payload[i] ^= 1 << rng.random_range(0..8);
}

/// Digest a compromised node reports once its code has been tampered with.
pub fn tampered_digest(digest: u32) -> u32 {
    digest ^ 0x5A5A_5A5A
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollusionDirection {
    /// Alert about and vote to isolate an honest target.
    BadMouth,
    /// Vote to keep a misbehaving target.
    FalsePraise,
}

/// A node whose votes about `target` ignore its own evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Colluder {
    pub group: u16,
    pub target: NodeId,
    pub direction: CollusionDirection,
    pub active_from: SimTime,
}

impl Colluder {
    pub fn vote(&self) -> crate::protocol::VoteDirection {
        match self.direction {
            CollusionDirection::BadMouth => crate::protocol::VoteDirection::Isolate,
            CollusionDirection::FalsePraise => crate::protocol::VoteDirection::Keep,
        }
    }
}

/// Compromise entry after selectors have been resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Compromise {
    pub node: NodeId,
    pub profile: AttackProfile,
    pub activation: SimTime,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompromiseSchedule {
    pub entries: Vec<Compromise>,
}

impl CompromiseSchedule {
    pub fn validate(&self, node_count: usize) -> Result<(), AdversaryError> {
        for e in &self.entries {
            if e.node.index() >= node_count {
                return Err(AdversaryError::UnknownNode {
                    node: e.node,
                    count: node_count,
                });
            }
            if e.node == NodeId::SINK {
                return Err(AdversaryError::Sink(e.node));
            }
            if e.activation == SimTime::ZERO {
                return Err(AdversaryError::AtBootstrap(e.node));
            }
            e.profile.validate()?;
        }
        Ok(())
    }
}
