//! Discrete-event engine: virtual clock, ordered event queue and seeded
//! per-entity random streams.
//!
//! Events are dispatched in strict `(fire_at, seq)` order, where `seq` is a
//! global insertion counter. Randomness is split into independent streams keyed
//! by entity, so one node drawing more values never shifts another node's
//! sequence.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;
use std::ops::{Add, Sub};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Simulated time in ticks. One tick is one millisecond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime(secs * 1000)
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0.saturating_add(rhs))
    }
}

impl Sub for SimTime {
    type Output = u64;

    fn sub(self, rhs: SimTime) -> u64 {
        self.0.saturating_sub(rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("cannot schedule at tick {requested}: clock is already at {now}")]
    InThePast { requested: u64, now: u64 },
}

/// Cancellation token returned by [`EventQueue::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A dispatched event together with its ordering key.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<E> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: E,
}

/// Priority queue of timestamped events with a monotone clock.
#[derive(Debug)]
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    order: BinaryHeap<Reverse<(SimTime, u64)>>,
    payloads: HashMap<u64, E>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            order: BinaryHeap::new(),
            payloads: HashMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of live (not cancelled, not yet dispatched) events.
    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn schedule(&mut self, fire_at: SimTime, kind: E) -> Result<EventHandle, ClockError> {
        if fire_at < self.now {
            return Err(ClockError::InThePast {
                requested: fire_at.0,
                now: self.now.0,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.order.push(Reverse((fire_at, seq)));
        self.payloads.insert(seq, kind);
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` ticks after the current clock; never fails.
    pub fn schedule_in(&mut self, delay: u64, kind: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, kind)
            .expect("relative scheduling is never in the past")
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.payloads.remove(&handle.0).is_some()
    }

    /// Pops the next event with `fire_at <= until`, advancing the clock to it.
    pub fn pop_due(&mut self, until: SimTime) -> Option<SimEvent<E>> {
        while let Some(&Reverse((at, seq))) = self.order.peek() {
            if at > until {
                return None;
            }
            self.order.pop();
            if let Some(kind) = self.payloads.remove(&seq) {
                self.now = at;
                return Some(SimEvent {
                    fire_at: at,
                    seq,
                    kind,
                });
            }
        }
        None
    }

    /// Moves the clock forward without dispatching. Never moves it back.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Dispatches every event with `fire_at <= t` through `handler` and leaves
    /// the clock at `t`. The handler may schedule further events.
    pub fn run_until<F>(&mut self, t: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut EventQueue<E>, SimEvent<E>),
    {
        let mut count = 0;
        while let Some(ev) = self.pop_due(t) {
            handler(self, ev);
            count += 1;
        }
        self.advance_to(t);
        count
    }
}

/// Something that can be written as one line of the event trace.
pub trait TraceEvent {
    fn kind_label(&self) -> &'static str;
    fn subject(&self) -> u32;
}

/// Event-trace recorder. Always maintains a SHA-256 digest of the trace; the
/// full text is kept only when requested.
pub struct EventTrace {
    hasher: Sha256,
    lines: Option<String>,
    events: u64,
}

impl fmt::Debug for EventTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventTrace")
            .field("events", &self.events)
            .field("keeps_text", &self.lines.is_some())
            .finish()
    }
}

impl EventTrace {
    pub fn new(keep_text: bool) -> Self {
        EventTrace {
            hasher: Sha256::new(),
            lines: keep_text.then(String::new),
            events: 0,
        }
    }

    pub fn record<E: TraceEvent>(&mut self, ev: &SimEvent<E>) {
        let line = format!(
            "{},{},{},{}\n",
            ev.fire_at.0,
            ev.seq,
            ev.kind.kind_label(),
            ev.kind.subject()
        );
        self.hasher.update(line.as_bytes());
        if let Some(buf) = self.lines.as_mut() {
            buf.push_str(&line);
        }
        self.events += 1;
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn text(&self) -> Option<&str> {
        self.lines.as_deref()
    }

    pub fn into_parts(self) -> (String, Option<String>) {
        let digest = self.hasher.finalize();
        let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
        (hex, self.lines)
    }
}

/// Purpose of a per-node random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum StreamPurpose {
    Sensing = 1,
    Watch = 2,
    Adversary = 3,
    Channel = 4,
    Schedule = 5,
}

/// Identifies an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreamId {
    Node { id: u16, purpose: StreamPurpose },
    Subsystem(&'static str),
}

impl StreamId {
    pub fn node(id: u16, purpose: StreamPurpose) -> Self {
        StreamId::Node { id, purpose }
    }

    fn stream_number(&self) -> u64 {
        match *self {
            StreamId::Node { id, purpose } => ((purpose as u64) << 32) | id as u64,
            StreamId::Subsystem(label) => {
                // FNV-1a, top bit set so it never aliases a node stream.
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for b in label.bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
                h | (1 << 63)
            }
        }
    }
}

/// A deterministic random stream derived from `(master seed, stream id)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    id: StreamId,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn derive(master_seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(id.stream_number());
        RandomStream { id, rng }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Registry of lazily created streams for one simulation world.
#[derive(Debug)]
pub struct RandomStreams {
    master_seed: u64,
    streams: BTreeMap<StreamId, RandomStream>,
}

impl RandomStreams {
    pub fn new(master_seed: u64) -> Self {
        RandomStreams {
            master_seed,
            streams: BTreeMap::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Returns the stream for `id`, creating it on first use. Repeated lookups
    /// return the same stream at its current position.
    pub fn stream_for(&mut self, id: StreamId) -> &mut RandomStream {
        let seed = self.master_seed;
        self.streams
            .entry(id)
            .or_insert_with(|| RandomStream::derive(seed, id))
    }
}

/// Derives the seed of replica `index` from a master seed (SplitMix64 finaliser).
pub fn replica_seed(master: u64, index: u32) -> u64 {
    if index == 0 {
        return master;
    }
    let mut z = master.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
