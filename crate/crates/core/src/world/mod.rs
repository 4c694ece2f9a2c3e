//! One simulated network: nodes, the shared medium and the event loop that
//! drives sensing, forwarding, watchdog rules, trust and isolation.

mod control;
mod node;
mod traffic;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::adversary::{Colluder, Compromise, FailurePattern, FaultProfile};
use crate::crypto::{open, seal, ExpandedKey, SecretKey};
use crate::metrics::{
    summarize, AlertRow, BadKind, BadNode, Counters, IsolationRow, QueryRow, RuleLogRow, RunReport,
    SummaryInputs, TrajectoryRow,
};
use crate::protocol::{
    greedy_next_hop, quantize, HandlerId, Packet, PacketHeader, Payload, RoutingVoid,
};
use crate::radio::{Medium, TxId};
use crate::scenario::{MemberRule, MemberSpec, NodeSelector, Scenario, SelectorName};
use crate::sim::{
    EventHandle, EventQueue, EventTrace, RandomStream, SimTime, StreamId, TraceEvent,
};
use crate::topology::{Field, Location, NodeId, Topology, TopologyError};
use crate::trust::{Applied, IsolationCause, TrustStatus};
use crate::watchdog::{RuleEvent, Subject, WatchKey};

use node::Node;

const MAX_PLACEMENT_DRAWS: usize = 10_000;

/// Smallest number of strictly-closer neighbors over every node that cannot
/// reach the sink in one hop. `usize::MAX` when every node can.
pub fn min_progress(topo: &Topology) -> usize {
    let pos = topo.positions();
    let sink = pos[0];
    let mut least = usize::MAX;
    for (i, p) in pos.iter().enumerate().skip(1) {
        let own = p.distance(&sink);
        let nbrs = &topo.neighbors(NodeId(i as u16)).expect("placed node");
        if nbrs.contains(&NodeId::SINK) {
            continue;
        }
        let closer = nbrs
            .iter()
            .filter(|n| pos[n.index()].distance(&sink) < own)
            .count();
        least = least.min(closer);
    }
    least
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Crypto(#[from] crate::crypto::CryptoError),
    #[error("{0}")]
    Setup(String),
}

/// Everything that can happen in a world.
#[derive(Debug, Clone)]
pub enum Event {
    Sense(NodeId),
    Beacon(NodeId),
    Epoch(u64),
    Transmit(NodeId, Box<Packet>),
    Noise(NodeId),
    Delivery(TxId),
    AckTimeout(NodeId, WatchKey),
    WatchExpiry(NodeId, WatchKey, NodeId),
    VoteDeadline(NodeId, NodeId),
    Activate(usize),
    Jam(NodeId),
    BogusQuery(NodeId),
    SpuriousBroadcast(NodeId),
    Replay(NodeId),
    QueryStart(usize),
    ProbeTimeout(NodeId, u16),
}

impl TraceEvent for Event {
    fn kind_label(&self) -> &'static str {
        match self {
            Event::Sense(_) => "sense",
            Event::Beacon(_) => "beacon",
            Event::Epoch(_) => "epoch",
            Event::Transmit(_, p) => match p.header.handler {
                HandlerId::Data => "tx-data",
                HandlerId::Ack => "tx-ack",
                HandlerId::Alert => "tx-alert",
                HandlerId::Vote => "tx-vote",
                HandlerId::Beacon => "tx-beacon",
                HandlerId::Query => "tx-query",
                HandlerId::TrustProbe => "tx-probe",
                HandlerId::IsolationNotice => "tx-notice",
            },
            Event::Noise(_) => "noise",
            Event::Delivery(_) => "delivery",
            Event::AckTimeout(..) => "ack-timeout",
            Event::WatchExpiry(..) => "watch-expiry",
            Event::VoteDeadline(..) => "vote-deadline",
            Event::Activate(_) => "activate",
            Event::Jam(_) => "jam",
            Event::BogusQuery(_) => "bogus-query",
            Event::SpuriousBroadcast(_) => "spurious",
            Event::Replay(_) => "replay",
            Event::QueryStart(_) => "query-start",
            Event::ProbeTimeout(..) => "probe-timeout",
        }
    }

    fn subject(&self) -> u32 {
        match self {
            Event::Sense(n)
            | Event::Beacon(n)
            | Event::Transmit(n, _)
            | Event::Noise(n)
            | Event::AckTimeout(n, _)
            | Event::WatchExpiry(n, ..)
            | Event::VoteDeadline(n, _)
            | Event::Jam(n)
            | Event::BogusQuery(n)
            | Event::SpuriousBroadcast(n)
            | Event::Replay(n)
            | Event::ProbeTimeout(n, _) => n.0 as u32,
            Event::Epoch(k) => *k as u32,
            Event::Delivery(tx) => tx.0 as u32,
            Event::Activate(i) | Event::QueryStart(i) => *i as u32,
        }
    }
}

/// A trust query as resolved at world build time.
#[derive(Debug, Clone)]
struct QueryPlan {
    querier: NodeId,
    remote: NodeId,
    at: u64,
}

/// Probe status carried from start to outcome.
#[derive(Debug, Clone, Copy)]
struct QueryProgress {
    distance: f64,
    hop_estimate: u32,
    budget: u8,
    remote_loc: Location,
}

pub struct World {
    cfg: Scenario,
    seed: u64,
    queue: EventQueue<Event>,
    trace: EventTrace,
    topo: Topology,
    medium: Medium<Packet>,
    keys: Vec<ExpandedKey>,
    nodes: Vec<Node>,
    sink_loc: Location,
    airtime: u64,
    sigma_floor: f64,
    compromises: Vec<Compromise>,
    bad: Vec<BadNode>,
    bad_set: BTreeSet<NodeId>,
    tracked: BTreeSet<NodeId>,
    targets: Vec<NodeId>,
    monitored: Vec<NodeId>,
    queries: Vec<QueryPlan>,
    query_progress: BTreeMap<usize, QueryProgress>,
    counters: Counters,
    rule_log: Option<Vec<RuleLogRow>>,
    isolations: Vec<IsolationRow>,
    alerts: Vec<AlertRow>,
    query_rows: Vec<QueryRow>,
    trajectories: Vec<TrajectoryRow>,
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World")
            .field("seed", &self.seed)
            .field("nodes", &self.nodes.len())
            .field("now", &self.queue.now())
            .finish()
    }
}

impl World {
    /// Builds the world for one replica. `seed` replaces the scenario seed.
    pub fn new(cfg: &Scenario, seed: u64) -> Result<World, WorldError> {
        cfg.validate()
            .map_err(|e| WorldError::Setup(e.to_string()))?;
        let field = Field {
            width: cfg.field[0],
            height: cfg.field[1],
        };
        let topo = match &cfg.positions {
            Some(ps) => Topology::new(
                ps.iter().map(|p| Location::new(p[0], p[1])).collect(),
                cfg.radio_range,
                field,
            )?,
            None => {
                let mut rng = RandomStream::derive(seed, StreamId::Subsystem("placement"));
                let [sx, sy] = cfg.sink.unwrap_or([field.width / 2.0, field.height / 2.0]);
                let mut attempt = 0;
                loop {
                    let placed =
                        Topology::place_uniform(cfg.nodes, field, cfg.radio_range, &mut rng)?;
                    let mut positions = placed.positions().to_vec();
                    positions[0] = Location::new(sx, sy);
                    let topo = Topology::new(positions, cfg.radio_range, field)?;
                    if min_progress(&topo) >= cfg.min_progress {
                        break topo;
                    }
                    attempt += 1;
                    if attempt == MAX_PLACEMENT_DRAWS {
                        return Err(WorldError::Setup(format!(
                            "no placement with min_progress {} in {MAX_PLACEMENT_DRAWS} draws",
                            cfg.min_progress
                        )));
                    }
                }
            }
        };
        let sink_loc = topo.position(NodeId::SINK)?;

        let mut key_rng = RandomStream::derive(seed, StreamId::Subsystem("keys"));
        let keys = (0..cfg.nodes)
            .map(|_| ExpandedKey::new(&SecretKey::from_rng(&mut key_rng), cfg.crypto.rounds))
            .collect::<Result<Vec<_>, _>>()?;

        let mut nodes: Vec<Node> = (0..cfg.nodes)
            .map(|i| Node::new(NodeId(i as u16), seed, cfg.watchdog.buffer_capacity))
            .collect();
        for node in nodes.iter_mut() {
            for &nb in topo.neighbors(node.id)? {
                node.records.insert(nb, Default::default());
                node.obs.insert(
                    nb,
                    crate::watchdog::NeighborObservation::new(cfg.watchdog.window),
                );
                node.neighbor_locs.insert(nb, quantize(topo.position(nb)?));
            }
        }

        let airtime = cfg.channel.airtime(crate::protocol::MAX_PACKET_LEN);
        let sigma_floor = cfg
            .watchdog
            .sigma_min
            .unwrap_or(cfg.sensing.field_sigma / 10.0);
        let mut world = World {
            cfg: cfg.clone(),
            seed,
            queue: EventQueue::new(),
            trace: EventTrace::new(cfg.metrics.keep_trace),
            medium: Medium::new(cfg.channel, cfg.nodes),
            topo,
            keys,
            nodes,
            sink_loc,
            airtime,
            sigma_floor,
            compromises: Vec::new(),
            bad: Vec::new(),
            bad_set: BTreeSet::new(),
            tracked: BTreeSet::new(),
            targets: Vec::new(),
            monitored: Vec::new(),
            queries: Vec::new(),
            query_progress: BTreeMap::new(),
            counters: Counters::default(),
            rule_log: cfg.metrics.rule_log.unwrap_or(true).then(Vec::new),
            isolations: Vec::new(),
            alerts: Vec::new(),
            query_rows: Vec::new(),
            trajectories: Vec::new(),
        };
        world.install_adversaries()?;
        world.schedule_bootstrap();
        Ok(world)
    }

    fn install_adversaries(&mut self) -> Result<(), WorldError> {
        let mut sel_rng = RandomStream::derive(self.seed, StreamId::Subsystem("selectors"));
        let cfg = self.cfg.clone();
        let mut taken: BTreeSet<NodeId> = BTreeSet::new();
        for (i, spec) in cfg.compromise.iter().enumerate() {
            let id = self.resolve(spec.node, &taken, &mut sel_rng)?;
            if !taken.insert(id) {
                return Err(WorldError::Setup(format!(
                    "compromise[{i}] selects node {id} twice"
                )));
            }
            let activation = SimTime(spec.at);
            self.nodes[id.index()].attack = Some((spec.profile.clone(), activation));
            self.compromises.push(Compromise {
                node: id,
                profile: spec.profile.clone(),
                activation,
            });
            self.mark_bad(id, BadKind::Compromised, spec.at);
        }
        for (i, spec) in cfg.fault.iter().enumerate() {
            let id = self.resolve(spec.node, &taken, &mut sel_rng)?;
            if !taken.insert(id) {
                return Err(WorldError::Setup(format!(
                    "fault[{i}] selects node {id}, which is already bad"
                )));
            }
            self.nodes[id.index()].fault = Some(spec.profile.clone());
            self.mark_bad(id, BadKind::Faulty, spec.profile.onset);
        }
        let mut col_rng = RandomStream::derive(self.seed, StreamId::Subsystem("collusion"));
        for (i, spec) in cfg.collusion.iter().enumerate() {
            let target = self.resolve(spec.target, &BTreeSet::new(), &mut sel_rng)?;
            self.tracked.insert(target);
            self.targets.push(target);
            let nbrs = self.topo.neighbors(target)?.to_vec();
            let d = nbrs.len();
            let want = match spec.members {
                MemberSpec::Count(c) => c,
                MemberSpec::Rule(MemberRule::Minority) => d.div_ceil(2).saturating_sub(1),
                MemberSpec::Rule(MemberRule::Majority) => d / 2 + 1,
            };
            let mut pool: Vec<NodeId> = nbrs
                .into_iter()
                .filter(|n| *n != NodeId::SINK && !taken.contains(n))
                .collect();
            if pool.len() < want || want == 0 {
                return Err(WorldError::Setup(format!(
                    "collusion[{i}]: target {target} has {d} neighbors, {} eligible, {want} colluders requested",
                    pool.len()
                )));
            }
            pool.shuffle(&mut col_rng);
            for &m in &pool[..want] {
                taken.insert(m);
                self.nodes[m.index()].colluder.push(Colluder {
                    group: spec.group,
                    target,
                    direction: spec.direction,
                    active_from: SimTime(spec.at),
                });
                self.mark_bad(m, BadKind::Colluder, spec.at);
            }
        }
        for sel in &cfg.monitor {
            let id = self.resolve(*sel, &BTreeSet::new(), &mut sel_rng)?;
            self.tracked.insert(id);
            self.monitored.push(id);
        }
        for q in &cfg.trust_query {
            self.queries.push(QueryPlan {
                querier: NodeId(q.querier),
                remote: NodeId(q.remote),
                at: q.at,
            });
        }
        let bad_ids: Vec<NodeId> = self.bad.iter().map(|b| b.id).collect();
        self.bad_set = bad_ids.iter().copied().collect();
        self.tracked.extend(bad_ids);
        for b in self.bad.iter_mut() {
            b.honest_neighbors = self
                .topo
                .neighbors(b.id)?
                .iter()
                .copied()
                .filter(|n| !self.bad_set.contains(n))
                .collect();
        }
        Ok(())
    }

    fn mark_bad(&mut self, id: NodeId, kind: BadKind, activation: u64) {
        if self.bad.iter().all(|b| b.id != id) {
            self.bad.push(BadNode {
                id,
                kind,
                activation,
                honest_neighbors: Vec::new(),
            });
        }
    }

    /// Resolves a selector to a non-sink node outside `exclude`.
    fn resolve(
        &self,
        sel: NodeSelector,
        exclude: &BTreeSet<NodeId>,
        rng: &mut RandomStream,
    ) -> Result<NodeId, WorldError> {
        let n = self.nodes.len();
        let eligible = |id: NodeId| id != NodeId::SINK && !exclude.contains(&id);
        let pick_max = |score: &dyn Fn(NodeId) -> usize| {
            (1..n)
                .map(|i| NodeId(i as u16))
                .filter(|id| eligible(*id))
                .max_by_key(|id| (score(*id), std::cmp::Reverse(*id)))
        };
        let found = match sel {
            NodeSelector::Id(id) => Some(NodeId(id)),
            NodeSelector::Named(SelectorName::MaxDegree) => {
                pick_max(&|id| self.topo.neighbors(id).map_or(0, |v| v.len()))
            }
            NodeSelector::Named(SelectorName::BusiestRelay) => {
                let load = self.relay_load();
                pick_max(&|id| load[id.index()])
            }
            NodeSelector::Named(SelectorName::Random) => {
                let pool: Vec<NodeId> = (1..n)
                    .map(|i| NodeId(i as u16))
                    .filter(|id| eligible(*id))
                    .collect();
                (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())])
            }
        };
        found.ok_or_else(|| WorldError::Setup(format!("selector {sel:?} matches no eligible node")))
    }

    /// Number of static greedy paths to the sink that pass through each node.
    fn relay_load(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut load = vec![0usize; n];
        for origin in 1..n {
            let mut here = NodeId(origin as u16);
            for _ in 0..n {
                let Ok(pos) = self.topo.position(here) else {
                    break;
                };
                let nbrs = self.topo.neighbors(here).unwrap_or(&[]);
                let next = greedy_next_hop(
                    pos,
                    self.sink_loc,
                    nbrs.iter()
                        .filter_map(|&b| self.topo.position(b).ok().map(|l| (b, l))),
                    |_| true,
                );
                match next {
                    Ok(NodeId::SINK) | Err(_) => break,
                    Ok(nh) => {
                        load[nh.index()] += 1;
                        here = nh;
                    }
                }
            }
        }
        load
    }

    fn schedule_bootstrap(&mut self) {
        let t = self.cfg.timing.clone();
        for i in 0..self.nodes.len() {
            let id = NodeId(i as u16);
            if id != NodeId::SINK {
                let phase = self.nodes[i].rng_sched.random_range(1..=t.sensing_period);
                self.at(SimTime(phase), Event::Sense(id));
            }
            let phase = self.nodes[i].rng_sched.random_range(1..=t.beacon_period);
            self.at(SimTime(phase), Event::Beacon(id));
        }
        self.at(SimTime(t.epoch), Event::Epoch(1));
        for i in 0..self.compromises.len() {
            let at = self.compromises[i].activation;
            self.at(at, Event::Activate(i));
        }
        for i in 0..self.nodes.len() {
            let Some(f) = self.nodes[i].fault.clone() else {
                continue;
            };
            if f.broadcast_rate > 0.0 {
                let gap = crate::adversary::next_gap(f.broadcast_rate, &mut self.nodes[i].rng_adv);
                self.at(
                    SimTime(f.onset) + gap,
                    Event::SpuriousBroadcast(NodeId(i as u16)),
                );
            }
        }
        for i in 0..self.queries.len() {
            let at = SimTime(self.queries[i].at);
            self.at(at, Event::QueryStart(i));
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn bad_nodes(&self) -> &[BadNode] {
        &self.bad
    }

    /// `observer`'s record for `subject`, as (p, n, trust, status).
    pub fn record(
        &self,
        observer: NodeId,
        subject: NodeId,
    ) -> Option<(f64, f64, f64, TrustStatus)> {
        let r = self.nodes.get(observer.index())?.records.get(&subject)?;
        Some((r.p(), r.n(), r.trust(), r.status()))
    }

    /// Runs to the configured end and returns the report.
    pub fn run(mut self) -> RunReport {
        let end = SimTime(self.cfg.run_ticks);
        self.run_until(end);
        self.finish()
    }

    /// Dispatches every event up to and including `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while let Some(ev) = self.queue.pop_due(t) {
            self.trace.record(&ev);
            self.counters.events += 1;
            self.dispatch(ev.kind);
        }
        self.queue.advance_to(t);
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::Sense(n) => self.on_sense(n),
            Event::Beacon(n) => self.on_beacon_timer(n),
            Event::Epoch(k) => self.on_epoch(k),
            Event::Transmit(n, p) => self.on_transmit(n, *p),
            Event::Noise(n) => self.on_noise(n),
            Event::Delivery(tx) => self.on_delivery(tx),
            Event::AckTimeout(n, key) => self.on_ack_timeout(n, key),
            Event::WatchExpiry(n, key, fwd) => self.on_watch_expiry(n, key, fwd),
            Event::VoteDeadline(n, s) => self.on_vote_deadline(n, s),
            Event::Activate(i) => self.on_activate(i),
            Event::Jam(n) => self.on_jam(n),
            Event::BogusQuery(n) => self.on_bogus_query(n),
            Event::SpuriousBroadcast(n) => self.on_spurious(n),
            Event::Replay(n) => self.on_replay(n),
            Event::QueryStart(i) => self.on_query_start(i),
            Event::ProbeTimeout(n, id) => self.on_probe_timeout(n, id),
        }
    }

    pub fn finish(self) -> RunReport {
        let mut final_status = BTreeMap::new();
        for node in &self.nodes {
            if self.bad_set.contains(&node.id) {
                continue;
            }
            for (&subj, rec) in &node.records {
                final_status.insert((node.id, subj), rec.status());
            }
        }
        let summary = summarize(SummaryInputs {
            node_count: self.nodes.len(),
            bad: &self.bad,
            isolations: &self.isolations,
            trajectories: &self.trajectories,
            final_status: &final_status,
            steady_window: self.cfg.steady_window(),
            counters: self.counters.clone(),
        });
        let (trace_digest, trace_text) = self.trace.into_parts();
        RunReport {
            seed: self.seed,
            node_count: self.nodes.len(),
            epochs: self.cfg.epochs(),
            summary,
            bad_nodes: self.bad,
            collusion_targets: self.targets,
            monitored: self.monitored,
            trajectories: self.trajectories,
            rule_events: self.rule_log.unwrap_or_default(),
            isolations: self.isolations,
            alerts: self.alerts,
            queries: self.query_rows,
            trace_digest,
            trace_text,
        }
    }

    // ---- shared helpers -------------------------------------------------

    fn at(&mut self, t: SimTime, ev: Event) -> EventHandle {
        let t = t.max(self.queue.now());
        self.queue.schedule(t, ev).expect("never in the past")
    }

    fn after(&mut self, delay: u64, ev: Event) -> EventHandle {
        self.queue.schedule_in(delay, ev)
    }

    fn epoch_of(&self, t: SimTime) -> u64 {
        t.0 / self.cfg.timing.epoch
    }

    /// The attack profile in force at `id` right now, if any.
    fn active_attack(&self, id: NodeId) -> Option<&crate::adversary::AttackProfile> {
        let (profile, at) = self.nodes[id.index()].attack.as_ref()?;
        let now = self.queue.now();
        if now < *at {
            return None;
        }
        let duty = profile.byzantine_duty;
        if duty > 0.0 && crate::adversary::honest_in_epoch(self.epoch_of(now), duty) {
            return None;
        }
        Some(profile)
    }

    fn active_fault(&self, id: NodeId) -> Option<&FaultProfile> {
        let node = &self.nodes[id.index()];
        let f = node.fault.as_ref()?;
        let now = self.queue.now().0;
        if now < f.onset {
            return None;
        }
        let on = match f.pattern {
            FailurePattern::Persistent => true,
            FailurePattern::Transient { duration } => now < f.onset.saturating_add(duration),
            FailurePattern::Probabilistic { .. } => node.fault_on,
        };
        on.then_some(f)
    }

    fn make_packet(&mut self, from: NodeId, dst: NodeId, payload: Payload) -> Packet {
        let seq = self.nodes[from.index()].take_seq();
        let header = PacketHeader {
            src: from,
            dst,
            handler: payload.handler(),
            seq,
            payload_len: crate::crypto::MAX_SEALED_PAYLOAD as u8,
        };
        let sealed = seal(
            &self.keys[from.index()],
            &header.seal_context(),
            &payload.to_bytes(),
        )
        .expect("payloads fit one packet");
        Packet {
            header,
            payload: sealed.payload,
            mac: sealed.mac,
        }
    }

    /// Verifies and decrypts a packet with its originator's key.
    fn open_packet(&self, pkt: &Packet) -> Option<Payload> {
        let key = self.keys.get(pkt.header.src.index())?;
        let plain = open(key, &pkt.header.seal_context(), &pkt.payload, &pkt.mac).ok()?;
        Payload::parse(pkt.header.handler, &plain).ok()
    }

    fn verify_packet(&self, pkt: &Packet) -> bool {
        self.keys.get(pkt.header.src.index()).is_some_and(|k| {
            crate::crypto::verify(k, &pkt.header.seal_context(), &pkt.payload, &pkt.mac)
        })
    }

    fn location_of(&self, id: NodeId) -> Location {
        self.topo.position(id).expect("node exists")
    }

    /// Greedy next hop from `from` toward `dest` over neighbors it still
    /// trusts enough to route through.
    fn next_hop(&self, from: NodeId, dest: Location) -> Result<NodeId, RoutingVoid> {
        let node = &self.nodes[from.index()];
        let floor = self.cfg.trust.route_floor();
        greedy_next_hop(
            self.location_of(from),
            dest,
            node.neighbor_locs.iter().map(|(id, loc)| (*id, *loc)),
            |id| {
                node.records
                    .get(&id)
                    .is_some_and(|r| !r.is_isolated() && r.trust() >= floor)
            },
        )
    }

    fn send_at(&mut self, t: SimTime, from: NodeId, pkt: Packet) {
        self.at(t, Event::Transmit(from, Box::new(pkt)));
    }

    /// Creates records for a neighbor first heard after bootstrap.
    fn ensure_record(&mut self, observer: NodeId, subject: NodeId) {
        let window = self.cfg.watchdog.window;
        let node = &mut self.nodes[observer.index()];
        node.records.entry(subject).or_default();
        node.obs
            .entry(subject)
            .or_insert_with(|| crate::watchdog::NeighborObservation::new(window));
    }

    /// Feeds a locally generated rule event into `observer`'s records.
    fn apply_event(&mut self, observer: NodeId, ev: Option<RuleEvent>) {
        let Some(ev) = ev else { return };
        if let Some(log) = self.rule_log.as_mut() {
            log.push(RuleLogRow {
                tick: ev.at().0,
                observer,
                subject: ev.neighbor(),
                rule: ev.rule(),
                polarity: ev.polarity(),
                weight: ev.weight(),
            });
        }
        let Subject::Neighbor(subject) = ev.subject() else {
            return;
        };
        let trust_cfg = &self.cfg.trust;
        let Some(rec) = self.nodes[observer.index()].records.get_mut(&subject) else {
            return;
        };
        if let Applied::Isolated = rec.apply(&ev, trust_cfg) {
            let cause = rec.cause().expect("isolated records carry a cause");
            self.on_isolated(observer, subject, cause);
        }
    }

    fn on_isolated(&mut self, observer: NodeId, subject: NodeId, cause: IsolationCause) {
        let now = self.queue.now();
        self.isolations.push(IsolationRow {
            tick: now.0,
            observer,
            subject,
            cause,
        });
        self.counters.isolations += 1;
        let node = &mut self.nodes[observer.index()];
        node.rounds.remove(&subject);
        node.stash.remove(&subject);
        node.neighbor_locs.remove(&subject);
        let notice = self.make_packet(
            observer,
            NodeId::BROADCAST,
            Payload::Notice(crate::protocol::NoticePayload { isolated: subject }),
        );
        let p = self.cfg.timing.processing;
        self.send_at(now + p, observer, notice);
    }
}
