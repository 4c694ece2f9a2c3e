//! Plaintext layouts carried inside the 14-byte sealed payload. Coordinates
//! travel as unsigned decimetres, readings as signed thousandths.

use crate::crypto::MAX_SEALED_PAYLOAD;
use crate::topology::{Location, NodeId};

use super::packet::{CodecError, HandlerId};

pub(crate) fn coord_to_wire(v: f64) -> u16 {
    (v * 10.0).round().clamp(0.0, u16::MAX as f64) as u16
}

pub(crate) fn coord_from_wire(v: u16) -> f64 {
    v as f64 / 10.0
}

/// Rounds a location to the precision it has on the wire.
pub fn quantize(loc: Location) -> Location {
    Location::new(
        coord_from_wire(coord_to_wire(loc.x)),
        coord_from_wire(coord_to_wire(loc.y)),
    )
}

fn ratio_to_wire(v: f64) -> u16 {
    (v * 10_000.0).round().clamp(0.0, 10_000.0) as u16
}

fn ratio_from_wire(v: u16) -> f64 {
    v as f64 / 10_000.0
}

struct Writer {
    buf: [u8; MAX_SEALED_PAYLOAD],
    at: usize,
}

impl Writer {
    fn new() -> Self {
        Writer {
            buf: [0; MAX_SEALED_PAYLOAD],
            at: 0,
        }
    }
    fn u8(&mut self, v: u8) -> &mut Self {
        self.buf[self.at] = v;
        self.at += 1;
        self
    }
    fn u16(&mut self, v: u16) -> &mut Self {
        self.buf[self.at..self.at + 2].copy_from_slice(&v.to_be_bytes());
        self.at += 2;
        self
    }
    fn u32(&mut self, v: u32) -> &mut Self {
        self.buf[self.at..self.at + 4].copy_from_slice(&v.to_be_bytes());
        self.at += 4;
        self
    }
    fn loc(&mut self, l: Location) -> &mut Self {
        self.u16(coord_to_wire(l.x)).u16(coord_to_wire(l.y))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let s = self
            .buf
            .get(self.at..self.at + N)
            .ok_or(CodecError::BadPayload(self.what))?;
        self.at += N;
        Ok(s.try_into().expect("slice of N bytes"))
    }
    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_be_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take()?))
    }
    fn loc(&mut self) -> Result<Location, CodecError> {
        let x = coord_from_wire(self.u16()?);
        Ok(Location::new(x, coord_from_wire(self.u16()?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadingPayload {
    pub value: f64,
    pub origin_loc: Location,
    pub sensed_at: u16,
    pub origin: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckKind {
    Hop = 0,
    EndToEnd = 1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckPayload {
    pub kind: AckKind,
    /// Originator and sequence number of the acknowledged DATA packet.
    pub src: NodeId,
    pub seq: u16,
    /// Where an end-to-end ACK is headed; unused for hop ACKs.
    pub dest_loc: Location,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconPayload {
    pub location: Location,
    pub code_digest: u32,
    pub self_pdr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlertReason {
    LowTrust = 1,
    JammingSuspected = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlertPayload {
    pub suspect: NodeId,
    pub reason: AlertReason,
    pub issuer: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteDirection {
    Keep = 0,
    Isolate = 1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VotePayload {
    pub suspect: NodeId,
    pub direction: VoteDirection,
    pub trust_claim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryPayload {
    pub target: NodeId,
    pub nonce: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbePhase {
    Probe = 0,
    Confirm = 1,
    Reject = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePayload {
    pub phase: ProbePhase,
    pub probe_id: u16,
    pub querier: NodeId,
    pub remote: NodeId,
    pub remote_loc: Location,
    pub budget: u8,
    pub hops: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoticePayload {
    pub isolated: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Reading(ReadingPayload),
    Ack(AckPayload),
    Alert(AlertPayload),
    Vote(VotePayload),
    Beacon(BeaconPayload),
    Query(QueryPayload),
    Probe(ProbePayload),
    Notice(NoticePayload),
}

impl Payload {
    pub fn handler(&self) -> HandlerId {
        match self {
            Payload::Reading(_) => HandlerId::Data,
            Payload::Ack(_) => HandlerId::Ack,
            Payload::Alert(_) => HandlerId::Alert,
            Payload::Vote(_) => HandlerId::Vote,
            Payload::Beacon(_) => HandlerId::Beacon,
            Payload::Query(_) => HandlerId::Query,
            Payload::Probe(_) => HandlerId::TrustProbe,
            Payload::Notice(_) => HandlerId::IsolationNotice,
        }
    }

    /// Every payload is zero-padded to the full 14 bytes so all frames are
    /// the same 30-byte size on the air.
    pub fn to_bytes(&self) -> [u8; MAX_SEALED_PAYLOAD] {
        let mut w = Writer::new();
        match *self {
            Payload::Reading(r) => {
                let milli = (r.value * 1000.0)
                    .round()
                    .clamp(i32::MIN as f64, i32::MAX as f64) as i32;
                w.u32(milli as u32)
                    .loc(r.origin_loc)
                    .u16(r.sensed_at)
                    .u16(r.origin.0);
            }
            Payload::Ack(a) => {
                w.u8(a.kind as u8).u16(a.src.0).u16(a.seq).loc(a.dest_loc);
            }
            Payload::Alert(a) => {
                w.u16(a.suspect.0).u8(a.reason as u8).u16(a.issuer.0);
            }
            Payload::Vote(v) => {
                w.u16(v.suspect.0)
                    .u8(v.direction as u8)
                    .u16(ratio_to_wire(v.trust_claim));
            }
            Payload::Beacon(b) => {
                w.loc(b.location)
                    .u32(b.code_digest)
                    .u16(ratio_to_wire(b.self_pdr));
            }
            Payload::Query(q) => {
                w.u16(q.target.0).u32(q.nonce);
            }
            Payload::Probe(p) => {
                w.u8(p.phase as u8)
                    .u16(p.probe_id)
                    .u16(p.querier.0)
                    .u16(p.remote.0)
                    .loc(p.remote_loc)
                    .u8(p.budget)
                    .u8(p.hops);
            }
            Payload::Notice(n) => {
                w.u16(n.isolated.0);
            }
        }
        w.buf
    }

    pub fn parse(handler: HandlerId, bytes: &[u8]) -> Result<Payload, CodecError> {
        let mut r = Reader {
            buf: bytes,
            at: 0,
            what: handler.label(),
        };
        let bad = CodecError::BadPayload(handler.label());
        Ok(match handler {
            HandlerId::Data => Payload::Reading(ReadingPayload {
                value: r.u32()? as i32 as f64 / 1000.0,
                origin_loc: r.loc()?,
                sensed_at: r.u16()?,
                origin: NodeId(r.u16()?),
            }),
            HandlerId::Ack => Payload::Ack(AckPayload {
                kind: match r.u8()? {
                    0 => AckKind::Hop,
                    1 => AckKind::EndToEnd,
                    _ => return Err(bad),
                },
                src: NodeId(r.u16()?),
                seq: r.u16()?,
                dest_loc: r.loc()?,
            }),
            HandlerId::Alert => Payload::Alert(AlertPayload {
                suspect: NodeId(r.u16()?),
                reason: match r.u8()? {
                    1 => AlertReason::LowTrust,
                    2 => AlertReason::JammingSuspected,
                    _ => return Err(bad),
                },
                issuer: NodeId(r.u16()?),
            }),
            HandlerId::Vote => Payload::Vote(VotePayload {
                suspect: NodeId(r.u16()?),
                direction: match r.u8()? {
                    0 => VoteDirection::Keep,
                    1 => VoteDirection::Isolate,
                    _ => return Err(bad),
                },
                trust_claim: ratio_from_wire(r.u16()?),
            }),
            HandlerId::Beacon => Payload::Beacon(BeaconPayload {
                location: r.loc()?,
                code_digest: r.u32()?,
                self_pdr: ratio_from_wire(r.u16()?),
            }),
            HandlerId::Query => Payload::Query(QueryPayload {
                target: NodeId(r.u16()?),
                nonce: r.u32()?,
            }),
            HandlerId::TrustProbe => Payload::Probe(ProbePayload {
                phase: match r.u8()? {
                    0 => ProbePhase::Probe,
                    1 => ProbePhase::Confirm,
                    2 => ProbePhase::Reject,
                    _ => return Err(bad),
                },
                probe_id: r.u16()?,
                querier: NodeId(r.u16()?),
                remote: NodeId(r.u16()?),
                remote_loc: r.loc()?,
                budget: r.u8()?,
                hops: r.u8()?,
            }),
            HandlerId::IsolationNotice => Payload::Notice(NoticePayload {
                isolated: NodeId(r.u16()?),
            }),
        })
    }
}
