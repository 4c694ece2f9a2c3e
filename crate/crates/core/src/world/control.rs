//! Epoch processing, alerts and voting, adversary processes and remote
//! trust probes.

use rand::Rng;

use super::node::ActiveProbe;
use super::{Event, QueryProgress, World};
use crate::adversary::{next_gap, CollusionDirection, FailurePattern, ForwardAction};
use crate::metrics::{AlertRow, QueryRow, TrajectoryRow};
use crate::protocol::{
    quantize, AlertPayload, AlertReason, Packet, Payload, ProbePayload, ProbePhase, QueryPayload,
    VoteDirection, VotePayload,
};
use crate::sim::SimTime;
use crate::topology::{Location, NodeId};
use crate::trust::{
    probe_budget, probe_next_hop, IsolationCause, ProbeCandidate, ProbeOutcome, Verdict,
    VotingRound,
};
use crate::watchdog::{expected_traffic, self_delivery_check};

impl World {
    pub(super) fn on_epoch(&mut self, k: u64) {
        let now = self.queue.now();
        let e = self.cfg.timing.epoch;
        if (k + 1) * e <= self.cfg.run_ticks {
            self.at(SimTime((k + 1) * e), Event::Epoch(k + 1));
        }
        for i in 0..self.nodes.len() {
            let id = NodeId(i as u16);
            self.draw_fault_phase(id);
            self.close_epoch_at(id, now);
            if self.cfg.toggles.end_to_end_ack && id != NodeId::SINK {
                self.delivery_self_check(id, k);
            }
            self.collude(id);
            self.evaluate_records(id);
        }
        self.sample_trajectories(k);
    }

    fn draw_fault_phase(&mut self, id: NodeId) {
        let node = &mut self.nodes[id.index()];
        if let Some(FailurePattern::Probabilistic { per_mille }) =
            node.fault.as_ref().map(|f| f.pattern)
        {
            node.fault_on = node.rng_adv.random_range(0..1000u16) < per_mille;
        }
    }

    fn close_epoch_at(&mut self, id: NodeId, now: SimTime) {
        let lambda = self.cfg.trust.lambda;
        let t = &self.cfg.timing;
        let (e, sensing, beacon) = (t.epoch, t.sensing_period, t.beacon_period);
        let node = &mut self.nodes[id.index()];
        for rec in node.records.values_mut() {
            rec.age(lambda);
        }
        let mut events = Vec::new();
        for (&subject, o) in node.obs.iter_mut() {
            if node.records.get(&subject).is_some_and(|r| r.is_isolated()) {
                continue;
            }
            let senses = (subject != NodeId::SINK).then_some(sensing);
            let expected = expected_traffic(e, senses, beacon);
            events.extend(o.close_epoch(subject, expected, &self.cfg.watchdog, now));
        }
        for ev in events {
            self.apply_event(id, Some(ev));
        }
    }

    /// End-to-end delivery self-check over readings sent two epochs back, so
    /// every acknowledgment has had time to return.
    fn delivery_self_check(&mut self, id: NodeId, k: u64) {
        let now = self.queue.now();
        let node = &mut self.nodes[id.index()];
        let (mut sent, mut acked) = (0usize, 0usize);
        while node.originated.front().is_some_and(|o| o.epoch + 2 <= k) {
            let o = node.originated.pop_front().expect("checked");
            sent += 1;
            acked += o.acked as usize;
        }
        if sent > 0 {
            node.self_pdr = acked as f64 / sent as f64;
        }
        let ev = self_delivery_check(sent, acked, &self.cfg.watchdog, now);
        let alarm = ev.is_some();
        self.apply_event(id, ev);
        if !alarm {
            return;
        }
        self.counters.jamming_alarms += 1;
        let alert = Payload::Alert(AlertPayload {
            suspect: id,
            reason: AlertReason::JammingSuspected,
            issuer: id,
        });
        let p = self.cfg.timing.processing;
        let pkt = self.make_packet(id, NodeId::BROADCAST, alert);
        self.send_at(now + p, id, pkt);
        if let Ok(nh) = self.next_hop(id, self.sink_loc) {
            let routed = self.make_packet(id, nh, alert);
            self.send_at(now + p + self.airtime + p, id, routed);
        }
    }

    /// Bad-mouthing colluders accuse their target every epoch they can.
    fn collude(&mut self, id: NodeId) {
        let now = self.queue.now();
        let targets: Vec<NodeId> = self.nodes[id.index()]
            .colluder
            .iter()
            .filter(|c| c.direction == CollusionDirection::BadMouth && now >= c.active_from)
            .map(|c| c.target)
            .collect();
        for s in targets {
            let node = &self.nodes[id.index()];
            let live = node.records.get(&s).is_some_and(|r| !r.is_isolated());
            if live && !node.rounds.contains_key(&s) {
                self.raise_alert(id, s);
            }
        }
    }

    fn evaluate_records(&mut self, id: NodeId) {
        let theta = self.cfg.trust.theta;
        let now = self.queue.now();
        let mut to_alert = Vec::new();
        let node = &mut self.nodes[id.index()];
        for (&s, rec) in node.records.iter_mut() {
            rec.evaluate(theta);
            if rec.alert_pending() {
                rec.mark_alerted();
                let shielded = node.colluder.iter().any(|c| {
                    c.target == s
                        && c.direction == CollusionDirection::FalsePraise
                        && now >= c.active_from
                });
                if !shielded {
                    to_alert.push(s);
                }
            }
        }
        for s in to_alert {
            self.raise_alert(id, s);
        }
    }

    fn sample_trajectories(&mut self, epoch: u64) {
        if self.tracked.is_empty() {
            return;
        }
        for node in &self.nodes {
            for &s in &self.tracked {
                if let Some(rec) = node.records.get(&s) {
                    self.trajectories.push(TrajectoryRow {
                        epoch,
                        observer: node.id,
                        subject: s,
                        p: rec.p(),
                        n: rec.n(),
                        trust: rec.trust(),
                        status: rec.status(),
                    });
                }
            }
        }
    }

    fn broadcast(&mut self, from: NodeId, payload: Payload) {
        let pkt = self.make_packet(from, NodeId::BROADCAST, payload);
        let at = self.queue.now() + self.cfg.timing.processing;
        self.send_at(at, from, pkt);
    }

    fn raise_alert(&mut self, id: NodeId, suspect: NodeId) {
        let now = self.queue.now();
        self.alerts.push(AlertRow {
            tick: now.0,
            issuer: id,
            suspect,
        });
        self.counters.alerts += 1;
        self.broadcast(
            id,
            Payload::Alert(AlertPayload {
                suspect,
                reason: AlertReason::LowTrust,
                issuer: id,
            }),
        );
        let node = &self.nodes[id.index()];
        if !node.rounds.contains_key(&suspect) && !node.is_isolated(suspect) {
            self.open_round(id, suspect);
        }
    }

    fn own_vote(&self, id: NodeId, suspect: NodeId) -> (VoteDirection, f64) {
        let node = &self.nodes[id.index()];
        let trust = node.records.get(&suspect).map_or(1.0, |r| r.trust());
        if let Some(c) = node.colluder_for(suspect, self.queue.now()) {
            return (c.vote(), trust);
        }
        let dir = if trust < self.cfg.trust.theta {
            VoteDirection::Isolate
        } else {
            VoteDirection::Keep
        };
        (dir, trust)
    }

    fn open_round(&mut self, id: NodeId, suspect: NodeId) {
        let now = self.queue.now();
        let window = self.cfg.trust.vote_window;
        let (dir, trust) = self.own_vote(id, suspect);
        let mut round = VotingRound::new(suspect, now, window);
        round.add(id, dir);
        let node = &mut self.nodes[id.index()];
        if let Some(stashed) = node.stash.remove(&suspect) {
            for (voter, d, at) in stashed {
                if now - at <= window {
                    round.add(voter, d);
                }
            }
        }
        node.rounds.insert(suspect, round);
        self.at(now + window, Event::VoteDeadline(id, suspect));
        self.counters.votes += 1;
        self.broadcast(
            id,
            Payload::Vote(VotePayload {
                suspect,
                direction: dir,
                trust_claim: trust,
            }),
        );
    }

    pub(super) fn on_alert(&mut self, r: NodeId, _src: NodeId, a: AlertPayload) {
        if a.reason != AlertReason::LowTrust || a.suspect == r {
            return;
        }
        let s = a.suspect;
        let node = &self.nodes[r.index()];
        let Some(rec) = node.records.get(&s) else {
            return;
        };
        if rec.is_isolated() {
            self.counters.votes += 1;
            self.broadcast(
                r,
                Payload::Vote(VotePayload {
                    suspect: s,
                    direction: VoteDirection::Isolate,
                    trust_claim: 0.0,
                }),
            );
            return;
        }
        if !node.rounds.contains_key(&s) {
            self.open_round(r, s);
        }
    }

    pub(super) fn on_vote(&mut self, r: NodeId, voter: NodeId, v: VotePayload) {
        let s = v.suspect;
        if s == r || voter == r {
            return;
        }
        let now = self.queue.now();
        let window = self.cfg.trust.vote_window;
        let node = &mut self.nodes[r.index()];
        if !node.records.get(&s).is_some_and(|rec| !rec.is_isolated()) {
            return;
        }
        if let Some(round) = node.rounds.get_mut(&s) {
            round.add(voter, v.direction);
        } else {
            let stash = node.stash.entry(s).or_default();
            stash.retain(|(_, _, at)| now - *at <= window);
            stash.push((voter, v.direction, now));
        }
    }

    pub(super) fn on_vote_deadline(&mut self, id: NodeId, suspect: NodeId) {
        let Some(round) = self.nodes[id.index()].rounds.remove(&suspect) else {
            return;
        };
        let plain = self.cfg.trust.plain_majority;
        let node = &self.nodes[id.index()];
        let tally = round.close(|voter| {
            if voter == id {
                return 1.0;
            }
            match node.records.get(&voter) {
                Some(r) if r.is_isolated() => 0.0,
                Some(_) if plain => 1.0,
                Some(r) => r.trust(),
                // A relayed vote from beyond radio range: no record to weigh it by.
                None => 1.0,
            }
        });
        if tally.verdict == Verdict::Isolate {
            let isolated = self.nodes[id.index()]
                .records
                .get_mut(&suspect)
                .is_some_and(|r| r.isolate_by_vote());
            if isolated {
                self.on_isolated(id, suspect, IsolationCause::Vote);
            }
        }
    }

    pub(super) fn on_activate(&mut self, i: usize) {
        let c = self.compromises[i].clone();
        let id = c.node;
        if let Some([dx, dy]) = c.profile.relocate {
            let here = self.location_of(id);
            let to = self
                .topo
                .field()
                .clamp(Location::new(here.x + dx, here.y + dy));
            self.topo.relocate(id, to).expect("node exists");
        }
        let rng = &mut self.nodes[id.index()].rng_adv;
        let jam = (c.profile.jam_rate > 0.0).then(|| next_gap(c.profile.jam_rate, rng));
        let query =
            (c.profile.bogus_query_rate > 0.0).then(|| next_gap(c.profile.bogus_query_rate, rng));
        if let Some(gap) = jam {
            self.after(gap, Event::Jam(id));
        }
        if let Some(gap) = query {
            self.after(gap, Event::BogusQuery(id));
        }
    }

    pub(super) fn on_jam(&mut self, id: NodeId) {
        let Some(rate) = self.nodes[id.index()]
            .attack
            .as_ref()
            .map(|(p, _)| p.jam_rate)
        else {
            return;
        };
        if self.active_attack(id).is_some() {
            let now = self.queue.now();
            self.at(now, Event::Noise(id));
        }
        let gap = next_gap(rate, &mut self.nodes[id.index()].rng_adv);
        self.after(gap, Event::Jam(id));
    }

    pub(super) fn on_bogus_query(&mut self, id: NodeId) {
        let Some(rate) = self.nodes[id.index()]
            .attack
            .as_ref()
            .map(|(p, _)| p.bogus_query_rate)
        else {
            return;
        };
        if self.active_attack(id).is_some() {
            self.spurious_query(id);
        }
        let gap = next_gap(rate, &mut self.nodes[id.index()].rng_adv);
        self.after(gap, Event::BogusQuery(id));
    }

    pub(super) fn on_spurious(&mut self, id: NodeId) {
        let Some(rate) = self.nodes[id.index()]
            .fault
            .as_ref()
            .map(|f| f.broadcast_rate)
        else {
            return;
        };
        if self.active_fault(id).is_some() {
            self.spurious_query(id);
        }
        let gap = next_gap(rate, &mut self.nodes[id.index()].rng_adv);
        self.after(gap, Event::SpuriousBroadcast(id));
    }

    fn spurious_query(&mut self, id: NodeId) {
        let n = self.nodes.len() as u16;
        let rng = &mut self.nodes[id.index()].rng_adv;
        let target = NodeId(rng.random_range(0..n));
        let nonce = rng.random();
        self.broadcast(id, Payload::Query(QueryPayload { target, nonce }));
    }

    // ---- remote trust probes ----------------------------------------------

    pub(super) fn on_query_start(&mut self, i: usize) {
        let plan = self.queries[i].clone();
        let here = self.location_of(plan.querier);
        let remote_loc = quantize(self.location_of(plan.remote));
        let field = self.topo.field();
        let range = self.topo.radio_range();
        let Ok((h, budget)) =
            probe_budget(here, remote_loc, range, self.cfg.trust.probe_slack, &field)
        else {
            self.finish_query(i, 0, 0, ProbeOutcome::Undecided);
            return;
        };
        self.query_progress.insert(
            i,
            QueryProgress {
                distance: here.distance(&remote_loc),
                hop_estimate: h,
                budget,
                remote_loc,
            },
        );
        self.start_probe(i, 1);
    }

    fn start_probe(&mut self, i: usize, attempts: u8) {
        let plan = self.queries[i].clone();
        let prog = self.query_progress[&i];
        let q = plan.querier;
        let node = &mut self.nodes[q.index()];
        let probe_id = node.next_probe;
        node.next_probe = node.next_probe.wrapping_add(1);
        let timeout = (2 * prog.budget as u64 + 2) * (self.airtime + 4);
        let timer = self.after(timeout, Event::ProbeTimeout(q, probe_id));
        self.nodes[q.index()].probes.insert(
            probe_id,
            ActiveProbe {
                query: i,
                attempts,
                timer,
            },
        );
        let probe = ProbePayload {
            phase: ProbePhase::Probe,
            probe_id,
            querier: q,
            remote: plan.remote,
            remote_loc: prog.remote_loc,
            budget: prog.budget,
            hops: 0,
        };
        self.forward_probe(q, probe, None);
    }

    /// Sends a probe one hop further, or turns it back when no trusted
    /// neighbor makes progress or the hop budget is spent.
    fn forward_probe(&mut self, x: NodeId, probe: ProbePayload, prev: Option<NodeId>) {
        let theta = self.cfg.trust.theta;
        let node = &self.nodes[x.index()];
        let candidates: Vec<ProbeCandidate> = node
            .records
            .iter()
            .filter_map(|(&id, rec)| {
                node.neighbor_locs.get(&id).map(|&location| ProbeCandidate {
                    id,
                    location,
                    trust: rec.trust(),
                    isolated: rec.is_isolated(),
                })
            })
            .collect();
        let next = probe_next_hop(
            self.location_of(x),
            probe.remote,
            probe.remote_loc,
            &candidates,
            theta,
        );
        match next {
            Some(nh) if probe.hops < probe.budget => {
                let out = ProbePayload {
                    hops: probe.hops + 1,
                    ..probe
                };
                self.send_probe(x, nh, out);
            }
            _ => self.turn_back(x, probe, prev, ProbePhase::Reject),
        }
    }

    fn turn_back(
        &mut self,
        x: NodeId,
        probe: ProbePayload,
        prev: Option<NodeId>,
        phase: ProbePhase,
    ) {
        let reply = ProbePayload { phase, ..probe };
        match prev {
            Some(p) => self.send_probe(x, p, reply),
            None => self.resolve_probe(x, reply),
        }
    }

    fn send_probe(&mut self, from: NodeId, to: NodeId, probe: ProbePayload) {
        let pkt = self.make_packet(from, to, Payload::Probe(probe));
        let at = self.queue.now() + self.cfg.timing.processing;
        self.send_at(at, from, pkt);
    }

    pub(super) fn on_probe(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let Some(Payload::Probe(probe)) = self.open_packet(pkt) else {
            return;
        };
        if self.forward_action(r) == ForwardAction::Drop {
            self.counters.attack_drops += 1;
            return;
        }
        match probe.phase {
            ProbePhase::Probe => {
                let theta = self.cfg.trust.theta;
                let node = &self.nodes[r.index()];
                let trusted = node
                    .records
                    .get(&t)
                    .is_some_and(|rec| !rec.is_isolated() && rec.trust() >= theta);
                if !trusted {
                    self.send_probe(
                        r,
                        t,
                        ProbePayload {
                            phase: ProbePhase::Reject,
                            ..probe
                        },
                    );
                } else if probe.remote == r {
                    self.send_probe(
                        r,
                        t,
                        ProbePayload {
                            phase: ProbePhase::Confirm,
                            ..probe
                        },
                    );
                } else {
                    self.nodes[r.index()]
                        .probe_routes
                        .insert((probe.querier, probe.probe_id), t);
                    self.forward_probe(r, probe, Some(t));
                }
            }
            ProbePhase::Confirm | ProbePhase::Reject => {
                if probe.querier == r {
                    self.resolve_probe(r, probe);
                } else if let Some(prev) = self.nodes[r.index()]
                    .probe_routes
                    .remove(&(probe.querier, probe.probe_id))
                {
                    self.send_probe(r, prev, probe);
                }
            }
        }
    }

    fn resolve_probe(&mut self, q: NodeId, reply: ProbePayload) {
        let Some(active) = self.nodes[q.index()].probes.remove(&reply.probe_id) else {
            return;
        };
        self.queue.cancel(active.timer);
        let outcome = if reply.phase == ProbePhase::Confirm {
            ProbeOutcome::Trusted
        } else {
            ProbeOutcome::Untrusted
        };
        self.finish_query(active.query, active.attempts, reply.hops, outcome);
    }

    pub(super) fn on_probe_timeout(&mut self, q: NodeId, probe_id: u16) {
        let Some(active) = self.nodes[q.index()].probes.remove(&probe_id) else {
            return;
        };
        if active.attempts <= self.cfg.trust.probe_retries {
            self.start_probe(active.query, active.attempts + 1);
        } else {
            self.finish_query(active.query, active.attempts, 0, ProbeOutcome::Undecided);
        }
    }

    fn finish_query(&mut self, i: usize, attempts: u8, hops: u8, outcome: ProbeOutcome) {
        let plan = &self.queries[i];
        let prog = self.query_progress.get(&i).copied();
        self.query_rows.push(QueryRow {
            tick: self.queue.now().0,
            querier: plan.querier,
            remote: plan.remote,
            distance: prog.map_or(f64::NAN, |p| p.distance),
            hop_estimate: prog.map_or(0, |p| p.hop_estimate),
            budget: prog.map_or(0, |p| p.budget),
            attempts,
            outcome,
            hops,
        });
    }
}
