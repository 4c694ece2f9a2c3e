//! Sensing, beacons, the medium, DATA forwarding, acknowledgments and the
//! watch buffer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::node::{Originated, PendingAck};
use super::{Event, World};
use crate::adversary::{
    alter_payload, fabricate_reading, misbehave_forward, tampered_digest, ForwardAction,
    ForwardRates,
};
use crate::protocol::{
    quantize, AckKind, AckPayload, AlertReason, BeaconPayload, HandlerId, Packet, Payload,
    ReadingPayload,
};
use crate::radio::TxId;
use crate::sim::SimTime;
use crate::topology::{Location, NodeId};
use crate::watchdog::{
    check_auth, check_beacon, replay_detected, resolve_ack, validate_reading, watch_resolved,
    AckOutcome, BeaconView, WatchEntry, WatchKey,
};

/// Replayed copies are held back this long before going out again.
const REPLAY_HOLD: u64 = 500;
const REPLAY_STASH: usize = 8;

impl World {
    pub(super) fn on_sense(&mut self, id: NodeId) {
        let period = self.cfg.timing.sensing_period;
        self.after(period, Event::Sense(id));
        let now = self.queue.now();
        let s = &self.cfg.sensing;
        let (mean, sigma) = (s.field_mean, s.field_sigma);
        let mut value = mean;
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).expect("finite sigma");
            value += noise.sample(&mut self.nodes[id.index()].rng_sense);
        }
        if let Some(bias) = self.active_attack(id).map(|a| a.data_bias) {
            if bias.offset != 0.0 || bias.sigma > 0.0 {
                value = fabricate_reading(&bias, value, &mut self.nodes[id.index()].rng_adv);
            }
        }
        if let Some(err) = self.active_fault(id).map(|f| f.sense_error_sigma) {
            if err > 0.0 {
                let noise = Normal::new(0.0, err).expect("finite sigma");
                value += noise.sample(&mut self.nodes[id.index()].rng_adv);
            }
        }
        let reading = Payload::Reading(ReadingPayload {
            value,
            origin_loc: quantize(self.location_of(id)),
            sensed_at: (now.0 & 0xFFFF) as u16,
            origin: id,
        });
        self.counters.readings_originated += 1;
        let Ok(nh) = self.next_hop(id, self.sink_loc) else {
            self.counters.routing_voids += 1;
            // Still consume a sequence number so the reading is accounted for.
            self.nodes[id.index()].take_seq();
            return;
        };
        let pkt = self.make_packet(id, nh, reading);
        if self.cfg.toggles.end_to_end_ack {
            let epoch = self.epoch_of(now);
            self.nodes[id.index()].originated.push_back(Originated {
                epoch,
                seq: pkt.header.seq,
                acked: false,
            });
        }
        self.send_data(id, pkt, now);
    }

    pub(super) fn on_beacon_timer(&mut self, id: NodeId) {
        let period = self.cfg.timing.beacon_period;
        self.after(period, Event::Beacon(id));
        let mut location = self.location_of(id);
        let mut digest = self.nodes[id.index()].code_digest;
        if let Some(attack) = self.active_attack(id) {
            if attack.sinkhole {
                // Claim a spot a metre from the sink on this node's side.
                let d = location.distance(&self.sink_loc).max(1e-9);
                let s = self.sink_loc;
                location =
                    Location::new(s.x + (location.x - s.x) / d, s.y + (location.y - s.y) / d);
                location = self.topo.field().clamp(location);
            }
            if attack.code_delta {
                digest = tampered_digest(digest);
            }
        }
        let payload = Payload::Beacon(BeaconPayload {
            location: quantize(location),
            code_digest: digest,
            self_pdr: self.nodes[id.index()].self_pdr,
        });
        let pkt = self.make_packet(id, NodeId::BROADCAST, payload);
        let now = self.queue.now();
        self.send_at(now, id, pkt);
    }

    pub(super) fn on_transmit(&mut self, from: NodeId, pkt: Packet) {
        let len = pkt.wire_len() as u64;
        self.counters.frames += 1;
        self.counters.bytes_total += len;
        if pkt.header.handler.is_control() {
            self.counters.bytes_control += len;
        }
        let extra_loss = if pkt.header.handler == HandlerId::Ack {
            self.cfg.channel.ack_loss_prob
        } else {
            0.0
        };
        let airtime = self.medium.channel().airtime(pkt.wire_len());
        let now = self.queue.now();
        let tx = self.medium.begin(
            now,
            from,
            Some(pkt),
            extra_loss,
            &self.topo,
            &mut self.nodes[from.index()].rng_chan,
        );
        self.after(airtime, Event::Delivery(tx));
    }

    pub(super) fn on_noise(&mut self, from: NodeId) {
        self.counters.noise_frames += 1;
        let now = self.queue.now();
        let tx = self.medium.begin(
            now,
            from,
            None,
            0.0,
            &self.topo,
            &mut self.nodes[from.index()].rng_chan,
        );
        let airtime = self.airtime;
        self.after(airtime, Event::Delivery(tx));
    }

    pub(super) fn on_delivery(&mut self, tx: TxId) {
        let Some(done) = self.medium.finish(tx) else {
            return;
        };
        let Some(pkt) = done.frame.as_ref() else {
            return;
        };
        for (r, fate) in &done.receivers {
            if *fate == crate::radio::RxFate::Received {
                self.receive(*r, done.transmitter, pkt);
            }
        }
    }

    /// One copy of a frame arriving intact at `r` from `t`.
    fn receive(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        if self.nodes[r.index()].is_isolated(t) {
            self.counters.frames_from_isolated += 1;
            return;
        }
        self.ensure_record(r, t);
        let h = pkt.header.handler;
        if pkt.header.src == t
            && matches!(h, HandlerId::Data | HandlerId::Beacon | HandlerId::Query)
        {
            if let Some(o) = self.nodes[r.index()].obs.get_mut(&t) {
                o.count_tx();
            }
        }
        let dst = pkt.header.dst;
        if dst == r {
            match h {
                HandlerId::Data => self.on_data(r, t, pkt),
                HandlerId::Ack => self.on_ack(r, t, pkt),
                HandlerId::Alert => self.on_routed_alert(r, t, pkt),
                HandlerId::TrustProbe => self.guarded(r, |w| w.on_probe(r, t, pkt)),
                _ => {}
            }
        } else if dst == NodeId::BROADCAST {
            self.on_broadcast(r, t, pkt);
        } else if h == HandlerId::Data {
            self.on_overheard_data(r, t, pkt);
        }
    }

    /// Runs a handler for a received control message and checks that it left
    /// the receiver's counters alone.
    pub(super) fn guarded<F: FnOnce(&mut World)>(&mut self, r: NodeId, f: F) {
        let before: Vec<(f64, f64)> = self.nodes[r.index()]
            .records
            .values()
            .map(|x| (x.p(), x.n()))
            .collect();
        f(self);
        let after: Vec<(f64, f64)> = self.nodes[r.index()]
            .records
            .values()
            .map(|x| (x.p(), x.n()))
            .collect();
        let changed = after.len() != before.len() || before.iter().zip(&after).any(|(a, b)| a != b);
        if changed {
            self.counters.remote_counter_updates += 1;
        }
    }

    fn on_data(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let now = self.queue.now();
        // The next hop of a watched forwarder sees the forward too.
        let key = (pkt.header.src, pkt.header.seq);
        self.nodes[r.index()]
            .watch
            .observe_forward(t, key, &pkt.payload, &pkt.mac);
        let hop_verify = self.cfg.toggles.hop_verify;
        if hop_verify || r == NodeId::SINK {
            let valid = self.verify_packet(pkt);
            if !valid {
                if hop_verify {
                    self.counters.auth_failures += 1;
                    self.apply_event(r, check_auth(t, false, now));
                } else {
                    self.counters.e2e_failures += 1;
                }
                return;
            }
        }
        if !self.nodes[r.index()].seen_data.insert(key) {
            self.counters.replays_detected += 1;
            self.apply_event(r, Some(replay_detected(t, now)));
            return;
        }
        if pkt.header.src == t {
            self.validate_data(r, t, pkt);
        }
        if r == NodeId::SINK {
            self.deliver_at_sink(t, pkt);
        } else {
            self.relay_data(r, t, pkt);
        }
    }

    fn hop_ack(&mut self, from: NodeId, to: NodeId, pkt: &Packet) {
        let ack = Payload::Ack(AckPayload {
            kind: AckKind::Hop,
            src: pkt.header.src,
            seq: pkt.header.seq,
            dest_loc: Location::new(0.0, 0.0),
        });
        let ack = self.make_packet(from, to, ack);
        let at = self.queue.now() + self.cfg.timing.processing;
        self.send_at(at, from, ack);
    }

    fn deliver_at_sink(&mut self, t: NodeId, pkt: &Packet) {
        let sink = NodeId::SINK;
        let Some(Payload::Reading(reading)) = self.open_packet(pkt) else {
            self.counters.e2e_failures += 1;
            return;
        };
        self.hop_ack(sink, t, pkt);
        if reading.origin != pkt.header.src {
            self.counters.e2e_failures += 1;
            return;
        }
        self.counters.readings_delivered += 1;
        if self.cfg.toggles.end_to_end_ack {
            let ack = Payload::Ack(AckPayload {
                kind: AckKind::EndToEnd,
                src: pkt.header.src,
                seq: pkt.header.seq,
                dest_loc: reading.origin_loc,
            });
            if let Ok(nh) = self.next_hop(sink, reading.origin_loc) {
                let ack = self.make_packet(sink, nh, ack);
                let p = self.cfg.timing.processing;
                let at = self.queue.now() + p + self.airtime + p;
                self.send_at(at, sink, ack);
            }
        }
    }

    /// Forwarding behavior of `id` for one packet, honest or not.
    pub(super) fn forward_action(&mut self, id: NodeId) -> ForwardAction {
        let rates = if let Some(a) = self.active_attack(id) {
            a.forward_rates()
        } else if let Some(f) = self.active_fault(id) {
            f.forward_rates()
        } else {
            ForwardRates::default()
        };
        if rates == ForwardRates::default() {
            return ForwardAction::Forward;
        }
        misbehave_forward(&rates, &mut self.nodes[id.index()].rng_adv)
    }

    fn relay_data(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let action = self.forward_action(r);
        if action == ForwardAction::Drop {
            self.counters.attack_drops += 1;
            return;
        }
        self.hop_ack(r, t, pkt);
        let Ok(nh) = self.next_hop(r, self.sink_loc) else {
            self.counters.routing_voids += 1;
            return;
        };
        let mut fwd = pkt.clone();
        fwd.header.dst = nh;
        let mut delay = 0;
        match action {
            ForwardAction::Alter => {
                alter_payload(&mut fwd.payload, &mut self.nodes[r.index()].rng_adv)
            }
            ForwardAction::Delay(d) => delay = d,
            _ => {}
        }
        let p = self.cfg.timing.processing;
        let start = self.queue.now() + p + self.airtime + p + delay;
        if self.active_attack(r).is_some_and(|a| a.replay_rate > 0.0) {
            let stash = &mut self.nodes[r.index()].replay_stash;
            if stash.len() == REPLAY_STASH {
                stash.pop_front();
            }
            stash.push_back(fwd.clone());
        }
        if action == ForwardAction::Replay {
            self.at(start + REPLAY_HOLD, Event::Replay(r));
        }
        self.send_data(r, fwd, start);
    }

    /// Sends unicast DATA and arms the hop ACK timer and, with probability
    /// p_watch, a watch on the next hop's forward.
    fn send_data(&mut self, from: NodeId, pkt: Packet, start: SimTime) {
        let nh = pkt.header.dst;
        let key = (pkt.header.src, pkt.header.seq);
        let deadline = start + self.cfg.watchdog.t_ack;
        let timer = self.at(deadline, Event::AckTimeout(from, key));
        if let Some(old) = self.nodes[from.index()].pending.insert(
            key,
            PendingAck {
                next_hop: nh,
                timer,
            },
        ) {
            self.queue.cancel(old.timer);
        }
        if nh != NodeId::SINK && self.draw_watch(from) {
            self.nodes[from.index()].watch.insert(WatchEntry {
                key,
                mac: pkt.mac,
                payload: pkt.payload.clone(),
                forwarder: nh,
                deadline,
                overheard: false,
            });
        }
        self.send_at(start, from, pkt);
    }

    fn draw_watch(&mut self, id: NodeId) -> bool {
        let p = self.cfg.watchdog.p_watch;
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            self.nodes[id.index()].rng_watch.random::<f64>() < p
        }
    }

    fn on_ack(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let Some(Payload::Ack(ack)) = self.open_packet(pkt) else {
            if self.cfg.toggles.hop_verify {
                self.counters.auth_failures += 1;
                let now = self.queue.now();
                self.apply_event(r, check_auth(t, false, now));
            }
            return;
        };
        match ack.kind {
            AckKind::Hop => {
                let key = (ack.src, ack.seq);
                let node = &mut self.nodes[r.index()];
                if node.pending.get(&key).is_some_and(|p| p.next_hop == t) {
                    let pending = node.pending.remove(&key).expect("checked");
                    node.watch.take(key, t);
                    self.queue.cancel(pending.timer);
                    let now = self.queue.now();
                    self.apply_event(r, resolve_ack(t, AckOutcome::Acked, now));
                }
            }
            AckKind::EndToEnd => {
                if ack.src == r {
                    if let Some(o) = self.nodes[r.index()]
                        .originated
                        .iter_mut()
                        .find(|o| o.seq == ack.seq)
                    {
                        o.acked = true;
                    }
                    return;
                }
                if self.forward_action(r) == ForwardAction::Drop {
                    self.counters.attack_drops += 1;
                    return;
                }
                if let Ok(nh) = self.next_hop(r, ack.dest_loc) {
                    let mut fwd = pkt.clone();
                    fwd.header.dst = nh;
                    let p = self.cfg.timing.processing;
                    let at = self.queue.now() + p;
                    self.send_at(at, r, fwd);
                }
            }
        }
    }

    /// A jamming alarm routed hop by hop toward the sink.
    fn on_routed_alert(&mut self, r: NodeId, _t: NodeId, pkt: &Packet) {
        let Some(Payload::Alert(alert)) = self.open_packet(pkt) else {
            return;
        };
        if alert.reason != AlertReason::JammingSuspected {
            return;
        }
        if r == NodeId::SINK {
            self.counters.jamming_alarms_at_sink += 1;
            return;
        }
        if self.forward_action(r) == ForwardAction::Drop {
            self.counters.attack_drops += 1;
            return;
        }
        if let Ok(nh) = self.next_hop(r, self.sink_loc) {
            let mut fwd = pkt.clone();
            fwd.header.dst = nh;
            let at = self.queue.now() + self.cfg.timing.processing;
            self.send_at(at, r, fwd);
        }
    }

    pub(super) fn on_ack_timeout(&mut self, id: NodeId, key: WatchKey) {
        let node = &mut self.nodes[id.index()];
        let Some(pending) = node.pending.remove(&key) else {
            return;
        };
        let overheard = node
            .watch
            .take(key, pending.next_hop)
            .is_some_and(|e| e.overheard);
        let outcome = if overheard {
            AckOutcome::TimedOutOverheard
        } else {
            AckOutcome::TimedOutSilent
        };
        let now = self.queue.now();
        self.apply_event(id, resolve_ack(pending.next_hop, outcome, now));
    }

    pub(super) fn on_watch_expiry(&mut self, id: NodeId, key: WatchKey, forwarder: NodeId) {
        let Some(entry) = self.nodes[id.index()].watch.take(key, forwarder) else {
            return;
        };
        let now = self.queue.now();
        self.apply_event(id, Some(watch_resolved(forwarder, entry.overheard, now)));
    }

    fn on_overheard_data(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let key = (pkt.header.src, pkt.header.seq);
        self.nodes[r.index()]
            .watch
            .observe_forward(t, key, &pkt.payload, &pkt.mac);
        if pkt.header.src == t {
            self.validate_data(r, t, pkt);
        }
        let b = pkt.header.dst;
        let watchable = b != NodeId::SINK
            && b != t
            && self.nodes[r.index()]
                .records
                .get(&b)
                .is_some_and(|rec| !rec.is_isolated());
        if watchable && self.draw_watch(r) {
            let deadline = self.queue.now() + self.cfg.watchdog.t_ack;
            self.nodes[r.index()].watch.insert(WatchEntry {
                key,
                mac: pkt.mac,
                payload: pkt.payload.clone(),
                forwarder: b,
                deadline,
                overheard: false,
            });
            self.at(deadline, Event::WatchExpiry(r, key, b));
        }
    }

    /// Data-validation rule on a reading heard directly from its originator.
    fn validate_data(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let Some(Payload::Reading(reading)) = self.open_packet(pkt) else {
            return;
        };
        let now = self.queue.now();
        let node = &self.nodes[r.index()];
        let others = node
            .obs
            .iter()
            .filter(|(id, _)| **id != t && !node.is_isolated(**id))
            .map(|(_, o)| o.readings());
        let (verdict, ev) = validate_reading(
            t,
            reading.value,
            others,
            &self.cfg.watchdog,
            self.sigma_floor,
            now,
        );
        if let Some(o) = self.nodes[r.index()].obs.get_mut(&t) {
            o.push_reading(reading.value, verdict);
        }
        self.apply_event(r, ev);
    }

    fn on_broadcast(&mut self, r: NodeId, t: NodeId, pkt: &Packet) {
        let now = self.queue.now();
        let Some(payload) = self.open_packet(pkt) else {
            if self.cfg.toggles.hop_verify {
                self.counters.auth_failures += 1;
                self.apply_event(r, check_auth(t, false, now));
            }
            return;
        };
        match payload {
            Payload::Beacon(b) => {
                if pkt.header.src == t {
                    self.on_beacon(r, t, b);
                }
            }
            Payload::Alert(_) | Payload::Vote(_) | Payload::Notice(_) => {
                let key = (pkt.header.src, pkt.header.seq);
                if !self.nodes[r.index()].seen_control.insert(key) {
                    return;
                }
                self.guarded(r, |w| match payload {
                    Payload::Alert(a) => w.on_alert(r, pkt.header.src, a),
                    Payload::Vote(v) => w.on_vote(r, pkt.header.src, v),
                    _ => {}
                });
                let relay = pkt.header.src == t && !matches!(payload, Payload::Notice(_));
                if relay {
                    self.relay_broadcast(r, pkt);
                }
            }
            _ => {}
        }
    }

    /// Relays a first-hop ALERT or VOTE once so it reaches two hops.
    fn relay_broadcast(&mut self, r: NodeId, pkt: &Packet) {
        let mut copy = pkt.clone();
        match self.forward_action(r) {
            ForwardAction::Drop => {
                self.counters.attack_drops += 1;
                return;
            }
            ForwardAction::Alter => {
                alter_payload(&mut copy.payload, &mut self.nodes[r.index()].rng_adv)
            }
            _ => {}
        }
        let jitter = self.nodes[r.index()].rng_sched.random_range(1..=50);
        let at = self.queue.now() + self.cfg.timing.processing + jitter;
        self.send_at(at, r, copy);
    }

    fn on_beacon(&mut self, r: NodeId, t: NodeId, b: BeaconPayload) {
        let now = self.queue.now();
        let view = BeaconView {
            location: b.location,
            code_digest: b.code_digest,
        };
        let prev = self.nodes[r.index()]
            .obs
            .get(&t)
            .and_then(|o| o.last_beacon);
        let ev = check_beacon(t, prev, view, &self.cfg.watchdog, now);
        if let Some(o) = self.nodes[r.index()].obs.get_mut(&t) {
            o.last_beacon = Some(view);
        }
        self.apply_event(r, ev);
        if !self.nodes[r.index()].is_isolated(t) {
            self.nodes[r.index()].neighbor_locs.insert(t, b.location);
        }
    }

    pub(super) fn on_replay(&mut self, id: NodeId) {
        let Some(mut old) = self.nodes[id.index()].replay_stash.pop_front() else {
            return;
        };
        let Ok(nh) = self.next_hop(id, self.sink_loc) else {
            return;
        };
        old.header.dst = nh;
        let now = self.queue.now();
        self.send_at(now, id, old);
    }
}
