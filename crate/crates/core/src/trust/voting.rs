use std::collections::BTreeMap;

use crate::protocol::VoteDirection;
use crate::sim::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ballot {
    pub voter: NodeId,
    pub direction: VoteDirection,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Isolate,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tally {
    pub isolate: f64,
    pub keep: f64,
    pub verdict: Verdict,
}

/// Weighted majority. Isolation needs a strict majority of weight; a tie
/// keeps the suspect.
pub fn tally<I: IntoIterator<Item = Ballot>>(ballots: I) -> Tally {
    let (mut isolate, mut keep) = (0.0, 0.0);
    for b in ballots {
        match b.direction {
            VoteDirection::Isolate => isolate += b.weight,
            VoteDirection::Keep => keep += b.weight,
        }
    }
    let verdict = if isolate > keep {
        Verdict::Isolate
    } else {
        Verdict::Keep
    };
    Tally {
        isolate,
        keep,
        verdict,
    }
}

/// One tallier's open round about one suspect.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingRound {
    pub suspect: NodeId,
    pub opened_at: SimTime,
    pub deadline: SimTime,
    votes: BTreeMap<NodeId, VoteDirection>,
}

impl VotingRound {
    pub fn new(suspect: NodeId, opened_at: SimTime, window: u64) -> Self {
        VotingRound {
            suspect,
            opened_at,
            deadline: opened_at + window,
            votes: BTreeMap::new(),
        }
    }

    /// Records a vote; a second vote from the same voter is ignored.
    pub fn add(&mut self, voter: NodeId, direction: VoteDirection) -> bool {
        if voter == self.suspect || self.votes.contains_key(&voter) {
            return false;
        }
        self.votes.insert(voter, direction);
        true
    }

    pub fn votes(&self) -> impl Iterator<Item = (NodeId, VoteDirection)> + '_ {
        self.votes.iter().map(|(v, d)| (*v, *d))
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn close<F: FnMut(NodeId) -> f64>(&self, mut weight: F) -> Tally {
        tally(self.votes().map(|(voter, direction)| Ballot {
            voter,
            direction,
            weight: weight(voter),
        }))
    }
}
