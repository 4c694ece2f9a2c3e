use thiserror::Error;

use super::modes::{cbc_mac, ofb_crypt, Iv, Mac8};
use super::rc5::{CryptoError, ExpandedKey};

/// Largest payload that fits a 30-byte packet after the 8-byte header and
/// 8-byte tag.
pub const MAX_SEALED_PAYLOAD: usize = 14;

/// Header fields bound into the tag. The destination is deliberately not
/// covered: relays rewrite it hop by hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SealContext {
    pub src: u16,
    pub handler: u8,
    pub seq: u16,
}

impl SealContext {
    pub fn iv(&self) -> Iv {
        let mut iv = [0u8; 8];
        iv[..2].copy_from_slice(&self.src.to_be_bytes());
        iv[2..4].copy_from_slice(&self.seq.to_be_bytes());
        iv
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sealed {
    pub payload: Vec<u8>,
    pub mac: Mac8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("message authentication failed")]
pub struct AuthFailure;

/// Bytes the tag is computed over: encrypted payload, handler, seq, src.
pub fn mac_input(ctx: &SealContext, enc_payload: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(enc_payload.len() + 5);
    m.extend_from_slice(enc_payload);
    m.push(ctx.handler);
    m.extend_from_slice(&ctx.seq.to_be_bytes());
    m.extend_from_slice(&ctx.src.to_be_bytes());
    m
}

pub fn seal(ek: &ExpandedKey, ctx: &SealContext, payload: &[u8]) -> Result<Sealed, CryptoError> {
    if payload.len() > MAX_SEALED_PAYLOAD {
        return Err(CryptoError::PayloadTooLong {
            len: payload.len(),
            max: MAX_SEALED_PAYLOAD,
        });
    }
    let enc = ofb_crypt(ek, &ctx.iv(), payload);
    let mac = cbc_mac(ek, &mac_input(ctx, &enc));
    Ok(Sealed { payload: enc, mac })
}

/// Verifies the tag and decrypts. Tag comparison runs over all 8 bytes.
pub fn open(
    ek: &ExpandedKey,
    ctx: &SealContext,
    enc_payload: &[u8],
    mac: &Mac8,
) -> Result<Vec<u8>, AuthFailure> {
    if !verify(ek, ctx, enc_payload, mac) {
        return Err(AuthFailure);
    }
    Ok(ofb_crypt(ek, &ctx.iv(), enc_payload))
}

/// Tag check without decryption, as done by relays.
pub fn verify(ek: &ExpandedKey, ctx: &SealContext, enc_payload: &[u8], mac: &Mac8) -> bool {
    let expected = cbc_mac(ek, &mac_input(ctx, enc_payload));
    expected
        .iter()
        .zip(mac)
        .fold(0u8, |acc, (a, b)| acc | (a ^ b))
        == 0
}
