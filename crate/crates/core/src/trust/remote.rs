use thiserror::Error;

use crate::protocol::greedy_next_hop;
use crate::topology::{Field, Location, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    Trusted,
    Untrusted,
    Undecided,
}

impl ProbeOutcome {
    pub fn label(self) -> &'static str {
        match self {
            ProbeOutcome::Trusted => "trusted",
            ProbeOutcome::Untrusted => "untrusted",
            ProbeOutcome::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RemoteQueryError {
    #[error("remote location ({x}, {y}) lies outside the {w}x{h} field")]
    OutsideField { x: f64, y: f64, w: f64, h: f64 },
}

/// Estimated hop count to a node `distance` metres away: `ceil(d / range)`,
/// at least one.
pub fn hop_estimate(distance: f64, radio_range: f64) -> u32 {
    ((distance / radio_range).ceil() as u32).max(1)
}

/// Hop budget carried by a probe.
pub fn probe_budget(
    querier: Location,
    remote: Location,
    radio_range: f64,
    slack: u8,
    field: &Field,
) -> Result<(u32, u8), RemoteQueryError> {
    if !field.contains(&remote) {
        return Err(RemoteQueryError::OutsideField {
            x: remote.x,
            y: remote.y,
            w: field.width,
            h: field.height,
        });
    }
    let h = hop_estimate(querier.distance(&remote), radio_range);
    Ok((h, (h + slack as u32).min(u8::MAX as u32) as u8))
}

/// A neighbor as seen by a probe relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeCandidate {
    pub id: NodeId,
    pub location: Location,
    pub trust: f64,
    pub isolated: bool,
}

/// Next probe hop: the remote itself when it is a trusted neighbor,
/// otherwise the trusted neighbor strictly closer to the remote location
/// with the most progress.
pub fn probe_next_hop(
    here: Location,
    remote: NodeId,
    remote_loc: Location,
    candidates: &[ProbeCandidate],
    theta: f64,
) -> Option<NodeId> {
    let trusted = |c: &ProbeCandidate| !c.isolated && c.trust >= theta;
    if candidates.iter().any(|c| c.id == remote && trusted(c)) {
        return Some(remote);
    }
    greedy_next_hop(
        here,
        remote_loc,
        candidates.iter().map(|c| (c.id, c.location)),
        |id| candidates.iter().any(|c| c.id == id && trusted(c)),
    )
    .ok()
}
