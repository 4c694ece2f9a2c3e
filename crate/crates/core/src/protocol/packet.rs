use thiserror::Error;

use crate::crypto::{Mac8, SealContext, MAX_SEALED_PAYLOAD};
use crate::topology::NodeId;

pub const HEADER_LEN: usize = 8;
pub const MAC_LEN: usize = 8;
pub const MAX_PACKET_LEN: usize = HEADER_LEN + MAX_SEALED_PAYLOAD + MAC_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum HandlerId {
    Data = 1,
    Ack = 2,
    Alert = 3,
    Vote = 4,
    Beacon = 5,
    Query = 6,
    TrustProbe = 7,
    IsolationNotice = 8,
}

impl HandlerId {
    pub const ALL: [HandlerId; 8] = [
        HandlerId::Data,
        HandlerId::Ack,
        HandlerId::Alert,
        HandlerId::Vote,
        HandlerId::Beacon,
        HandlerId::Query,
        HandlerId::TrustProbe,
        HandlerId::IsolationNotice,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get((b as usize).wrapping_sub(1)).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            HandlerId::Data => "DATA",
            HandlerId::Ack => "ACK",
            HandlerId::Alert => "ALERT",
            HandlerId::Vote => "VOTE",
            HandlerId::Beacon => "BEACON",
            HandlerId::Query => "QUERY",
            HandlerId::TrustProbe => "TRUST_PROBE",
            HandlerId::IsolationNotice => "ISOLATION_NOTICE",
        }
    }

    /// Trust-maintenance traffic counted as control overhead.
    pub fn is_control(self) -> bool {
        matches!(
            self,
            HandlerId::Alert | HandlerId::Vote | HandlerId::Beacon | HandlerId::TrustProbe
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub src: NodeId,
    pub dst: NodeId,
    pub handler: HandlerId,
    pub seq: u16,
    pub payload_len: u8,
}

impl PacketHeader {
    pub fn seal_context(&self) -> SealContext {
        SealContext {
            src: self.src.0,
            handler: self.handler as u8,
            seq: self.seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub header: PacketHeader,
    pub payload: Vec<u8>,
    pub mac: Mac8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("frame of {0} bytes is shorter than header plus tag")]
    Truncated(usize),
    #[error("payload_len {0} exceeds the maximum of {MAX_SEALED_PAYLOAD}")]
    BadPayloadLen(u8),
    #[error("payload_len {declared} does not match frame length {actual}")]
    LengthMismatch { declared: u8, actual: usize },
    #[error("unknown handler id {0}")]
    UnknownHandler(u8),
    #[error("payload does not parse as {0}")]
    BadPayload(&'static str),
}

impl Packet {
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + MAC_LEN
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&h.src.0.to_be_bytes());
        out.extend_from_slice(&h.dst.0.to_be_bytes());
        out.push(h.handler as u8);
        out.extend_from_slice(&h.seq.to_be_bytes());
        out.push(h.payload_len);
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN + MAC_LEN {
            return Err(CodecError::Truncated(bytes.len()));
        }
        let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
        let handler = HandlerId::from_byte(bytes[4]).ok_or(CodecError::UnknownHandler(bytes[4]))?;
        let payload_len = bytes[7];
        if payload_len as usize > MAX_SEALED_PAYLOAD {
            return Err(CodecError::BadPayloadLen(payload_len));
        }
        if bytes.len() != HEADER_LEN + payload_len as usize + MAC_LEN {
            return Err(CodecError::LengthMismatch {
                declared: payload_len,
                actual: bytes.len(),
            });
        }
        let body_end = HEADER_LEN + payload_len as usize;
        Ok(Packet {
            header: PacketHeader {
                src: NodeId(u16_at(0)),
                dst: NodeId(u16_at(2)),
                handler,
                seq: u16_at(5),
                payload_len,
            },
            payload: bytes[HEADER_LEN..body_end].to_vec(),
            mac: bytes[body_end..].try_into().expect("8-byte tag"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Packet {
        Packet {
            header: PacketHeader {
                src: NodeId(0x0102),
                dst: NodeId(0xFFFF),
                handler: HandlerId::Beacon,
                seq: 0x0A0B,
                payload_len: 14,
            },
            payload: (0x10..0x1E).collect(),
            mac: [0xA0, 0xA1, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7],
        }
    }

    #[test]
    fn golden_bytes() {
        let wire = sample().encode();
        let expected: Vec<u8> = [
            &[0x01, 0x02, 0xFF, 0xFF, 0x05, 0x0A, 0x0B, 0x0E][..],
            &(0x10..0x1E).collect::<Vec<u8>>(),
            &[0xA0, 0xA1, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7],
        ]
        .concat();
        assert_eq!(wire, expected);
        assert_eq!(wire.len(), 30);
    }

    #[test]
    fn malformed_frames_are_codec_errors() {
        let wire = sample().encode();
        assert_eq!(Packet::decode(&wire[..10]), Err(CodecError::Truncated(10)));
        assert!(matches!(
            Packet::decode(&wire[..29]),
            Err(CodecError::LengthMismatch {
                declared: 14,
                actual: 29
            })
        ));
        let mut bad = wire.clone();
        bad[4] = 0;
        assert_eq!(Packet::decode(&bad), Err(CodecError::UnknownHandler(0)));
        let mut bad = wire;
        bad[7] = 15;
        assert_eq!(Packet::decode(&bad), Err(CodecError::BadPayloadLen(15)));
    }

    fn arb_packet() -> impl Strategy<Value = Packet> {
        (
            any::<u16>(),
            any::<u16>(),
            1u8..=8,
            any::<u16>(),
            proptest::collection::vec(any::<u8>(), 0..=14),
            any::<[u8; 8]>(),
        )
            .prop_map(|(src, dst, h, seq, payload, mac)| Packet {
                header: PacketHeader {
                    src: NodeId(src),
                    dst: NodeId(dst),
                    handler: HandlerId::from_byte(h).unwrap(),
                    seq,
                    payload_len: payload.len() as u8,
                },
                payload,
                mac,
            })
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(p in arb_packet()) {
            let wire = p.encode();
            prop_assert_eq!(wire.len(), p.wire_len());
            prop_assert_eq!(Packet::decode(&wire).unwrap(), p);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..40)) {
            if let Ok(p) = Packet::decode(&bytes) {
                prop_assert_eq!(p.encode(), bytes);
            }
        }
    }
}
