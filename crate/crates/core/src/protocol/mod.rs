//! Wire format, typed payloads and greedy geographic routing.

mod packet;
mod payload;
mod routing;

pub use packet::{
    CodecError, HandlerId, Packet, PacketHeader, HEADER_LEN, MAC_LEN, MAX_PACKET_LEN,
};
pub use payload::{
    quantize, AckKind, AckPayload, AlertPayload, AlertReason, BeaconPayload, NoticePayload,
    Payload, ProbePayload, ProbePhase, QueryPayload, ReadingPayload, VoteDirection, VotePayload,
};
pub use routing::{greedy_next_hop, RoutingVoid};
