use std::collections::VecDeque;

use crate::crypto::Mac8;
use crate::sim::SimTime;
use crate::topology::NodeId;

/// Identity of a watched packet: originator and sequence number.
pub type WatchKey = (NodeId, u16);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatchEntry {
    pub key: WatchKey,
    /// Tag of the copy handed to the forwarder; a forward carrying a different
    /// tag or payload is not a faithful forward.
    pub mac: Mac8,
    pub payload: Vec<u8>,
    pub forwarder: NodeId,
    pub deadline: SimTime,
    pub overheard: bool,
}

/// Bounded FIFO of packets whose forwarding this node is checking.
#[derive(Debug, Clone)]
pub struct WatchBuffer {
    capacity: usize,
    entries: VecDeque<WatchEntry>,
    evicted: u64,
}

impl WatchBuffer {
    pub fn new(capacity: usize) -> Self {
        WatchBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            evicted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    /// Inserts an entry, evicting the oldest one when full. A zero-capacity
    /// buffer stores nothing.
    pub fn insert(&mut self, entry: WatchEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            self.evicted += 1;
        }
        self.entries.push_back(entry);
    }

    /// Marks a matching entry as overheard when `forwarder` retransmits the
    /// same packet unchanged. Returns true on a match.
    pub fn observe_forward(
        &mut self,
        forwarder: NodeId,
        key: WatchKey,
        payload: &[u8],
        mac: &Mac8,
    ) -> bool {
        match self
            .entries
            .iter_mut()
            .find(|e| e.key == key && e.forwarder == forwarder && !e.overheard)
        {
            Some(e) if e.payload == payload && &e.mac == mac => {
                e.overheard = true;
                true
            }
            _ => false,
        }
    }

    pub fn get(&self, key: WatchKey, forwarder: NodeId) -> Option<&WatchEntry> {
        self.entries
            .iter()
            .find(|e| e.key == key && e.forwarder == forwarder)
    }

    /// Removes and returns the entry for `key`/`forwarder`, if it was not
    /// evicted in the meantime.
    pub fn take(&mut self, key: WatchKey, forwarder: NodeId) -> Option<WatchEntry> {
        let pos = self
            .entries
            .iter()
            .position(|e| e.key == key && e.forwarder == forwarder)?;
        self.entries.remove(pos)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WatchEntry> {
        self.entries.iter()
    }
}
