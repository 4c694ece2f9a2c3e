//! Shared broadcast medium: every in-range node receives every frame (the
//! addressed next hop and promiscuous overhearers alike), subject to
//! independent loss and receiver-local collisions.

use std::collections::HashMap;

use rand::Rng;

use crate::sim::SimTime;
use crate::topology::{ChannelModel, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub u64);

/// What happened to one copy of a frame at one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxFate {
    Received,
    Lost,
    Collided,
}

/// A transmission on the air.
#[derive(Debug, Clone)]
pub struct InFlight<F> {
    pub transmitter: NodeId,
    pub started: SimTime,
    /// `None` for jamming noise, which occupies the channel but carries nothing.
    pub frame: Option<F>,
    pub receivers: Vec<(NodeId, RxFate)>,
}

impl<F> InFlight<F> {
    pub fn delivered(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.receivers
            .iter()
            .filter(|(_, fate)| *fate == RxFate::Received)
            .map(|(id, _)| *id)
    }
}

#[derive(Debug, Clone, Copy)]
struct ActiveRx {
    tx: TxId,
    start: SimTime,
}

/// Tracks transmissions in flight and resolves collisions per receiver.
#[derive(Debug)]
pub struct Medium<F> {
    channel: ChannelModel,
    next_tx: u64,
    in_flight: HashMap<TxId, InFlight<F>>,
    active: Vec<Vec<ActiveRx>>,
}

impl<F> Medium<F> {
    pub fn new(channel: ChannelModel, nodes: usize) -> Self {
        Medium {
            channel,
            next_tx: 0,
            in_flight: HashMap::new(),
            active: vec![Vec::new(); nodes],
        }
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    /// Puts a frame (or noise, when `frame` is `None`) on the air from `src`.
    /// `extra_loss` is an additional per-receiver loss probability for this
    /// frame. Returns the transmission id; delivery is due one airtime later.
    pub fn begin<R: Rng + ?Sized>(
        &mut self,
        now: SimTime,
        src: NodeId,
        frame: Option<F>,
        extra_loss: f64,
        topology: &Topology,
        rng: &mut R,
    ) -> TxId {
        let id = TxId(self.next_tx);
        self.next_tx += 1;
        let window = self.channel.collision_window;
        let loss = 1.0 - (1.0 - self.channel.loss_prob) * (1.0 - extra_loss);
        let neighbors = topology.neighbors(src).unwrap_or(&[]);
        let mut receivers = Vec::with_capacity(neighbors.len());
        for &r in neighbors {
            let mut fate = RxFate::Received;
            if loss > 0.0 && rng.random::<f64>() < loss {
                fate = RxFate::Lost;
            }
            if window > 0 {
                let slot = &mut self.active[r.index()];
                slot.retain(|a| a.start + window > now);
                for a in slot.iter() {
                    fate = RxFate::Collided;
                    if let Some(other) = self.in_flight.get_mut(&a.tx) {
                        if let Some(entry) = other.receivers.iter_mut().find(|(n, _)| *n == r) {
                            entry.1 = RxFate::Collided;
                        }
                    }
                }
                slot.push(ActiveRx { tx: id, start: now });
            }
            receivers.push((r, fate));
        }
        self.in_flight.insert(
            id,
            InFlight {
                transmitter: src,
                started: now,
                frame,
                receivers,
            },
        );
        id
    }

    /// Removes a finished transmission and hands back its per-receiver fates.
    pub fn finish(&mut self, tx: TxId) -> Option<InFlight<F>> {
        self.in_flight.remove(&tx)
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}
