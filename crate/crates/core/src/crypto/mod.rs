//! Link-layer security primitives: RC5-32 with a 16-byte key, output-feedback
//! encryption, and an 8-byte CBC-MAC, plus the per-packet seal/open pair built
//! from them.

mod modes;
mod rc5;
mod seal;

pub use modes::{cbc_mac, ofb_crypt, Iv, Mac8};
pub use rc5::{Block, CryptoError, ExpandedKey, SecretKey, DEFAULT_ROUNDS, MAX_ROUNDS};
pub use seal::{
    mac_input, open, seal, verify, AuthFailure, SealContext, Sealed, MAX_SEALED_PAYLOAD,
};
