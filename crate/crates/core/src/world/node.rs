use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::adversary::{AttackProfile, Colluder, FaultProfile};
use crate::protocol::{Packet, VoteDirection};
use crate::sim::{EventHandle, RandomStream, SimTime, StreamId, StreamPurpose};
use crate::topology::{Location, NodeId};
use crate::trust::{ReputationRecord, VotingRound};
use crate::watchdog::{NeighborObservation, WatchBuffer, WatchKey};

/// Unicast DATA handed to a next hop and not yet acknowledged.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PendingAck {
    pub next_hop: NodeId,
    pub timer: EventHandle,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ActiveProbe {
    pub query: usize,
    pub attempts: u8,
    pub timer: EventHandle,
}

/// Bounded set of recently seen (src, seq) keys.
#[derive(Debug, Clone)]
pub(crate) struct SeenWindow {
    cap: usize,
    order: VecDeque<WatchKey>,
    set: BTreeSet<WatchKey>,
}

impl SeenWindow {
    pub fn new(cap: usize) -> Self {
        SeenWindow {
            cap,
            order: VecDeque::with_capacity(cap),
            set: BTreeSet::new(),
        }
    }

    /// Inserts `key`; false when it was already present.
    pub fn insert(&mut self, key: WatchKey) -> bool {
        if self.set.contains(&key) {
            return false;
        }
        if self.order.len() == self.cap {
            if let Some(old) = self.order.pop_front() {
                self.set.remove(&old);
            }
        }
        self.order.push_back(key);
        self.set.insert(key);
        true
    }
}

/// Outcome bookkeeping for readings this node originated (end-to-end ACKs).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Originated {
    pub epoch: u64,
    pub seq: u16,
    pub acked: bool,
}

#[derive(Debug)]
pub(crate) struct Node {
    pub id: NodeId,
    pub next_seq: u16,
    pub code_digest: u32,
    pub self_pdr: f64,
    /// Believed neighbor locations, learned from beacons (seeded at bootstrap).
    pub neighbor_locs: BTreeMap<NodeId, Location>,
    pub records: BTreeMap<NodeId, ReputationRecord>,
    pub obs: BTreeMap<NodeId, NeighborObservation>,
    pub watch: WatchBuffer,
    pub pending: BTreeMap<WatchKey, PendingAck>,
    pub seen_data: SeenWindow,
    pub seen_control: SeenWindow,
    pub rounds: BTreeMap<NodeId, VotingRound>,
    pub stash: BTreeMap<NodeId, Vec<(NodeId, VoteDirection, SimTime)>>,
    pub originated: VecDeque<Originated>,
    pub probe_routes: BTreeMap<(NodeId, u16), NodeId>,
    pub probes: BTreeMap<u16, ActiveProbe>,
    pub next_probe: u16,
    pub replay_stash: VecDeque<Packet>,
    pub attack: Option<(AttackProfile, SimTime)>,
    pub fault: Option<FaultProfile>,
    /// Whether a probabilistic fault is active in the current epoch.
    pub fault_on: bool,
    pub colluder: Vec<Colluder>,
    pub rng_sense: RandomStream,
    pub rng_watch: RandomStream,
    pub rng_adv: RandomStream,
    pub rng_chan: RandomStream,
    pub rng_sched: RandomStream,
}

impl Node {
    pub fn new(id: NodeId, seed: u64, buffer_capacity: usize) -> Self {
        let s = |p| RandomStream::derive(seed, StreamId::node(id.0, p));
        Node {
            id,
            next_seq: 0,
            code_digest: 0xC0DE_0000 ^ id.0 as u32,
            self_pdr: 1.0,
            neighbor_locs: BTreeMap::new(),
            records: BTreeMap::new(),
            obs: BTreeMap::new(),
            watch: WatchBuffer::new(buffer_capacity),
            pending: BTreeMap::new(),
            seen_data: SeenWindow::new(64),
            seen_control: SeenWindow::new(256),
            rounds: BTreeMap::new(),
            stash: BTreeMap::new(),
            originated: VecDeque::new(),
            probe_routes: BTreeMap::new(),
            probes: BTreeMap::new(),
            next_probe: 0,
            replay_stash: VecDeque::new(),
            attack: None,
            fault: None,
            fault_on: true,
            colluder: Vec::new(),
            rng_sense: s(StreamPurpose::Sensing),
            rng_watch: s(StreamPurpose::Watch),
            rng_adv: s(StreamPurpose::Adversary),
            rng_chan: s(StreamPurpose::Channel),
            rng_sched: s(StreamPurpose::Schedule),
        }
    }

    pub fn take_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        s
    }

    pub fn is_isolated(&self, other: NodeId) -> bool {
        self.records.get(&other).is_some_and(|r| r.is_isolated())
    }

    pub fn colluder_for(&self, target: NodeId, now: SimTime) -> Option<&Colluder> {
        self.colluder
            .iter()
            .find(|c| c.target == target && now >= c.active_from)
    }
}
