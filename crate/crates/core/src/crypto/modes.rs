use super::rc5::{Block, ExpandedKey};

pub type Mac8 = [u8; 8];
pub type Iv = [u8; 8];

/// Output-feedback encryption. The keystream is E(iv), E(E(iv)), ...; the
/// same call decrypts.
pub fn ofb_crypt(ek: &ExpandedKey, iv: &Iv, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let mut pad: Block = *iv;
    for chunk in data.chunks(8) {
        pad = ek.encrypt_block(&pad);
        out.extend(chunk.iter().zip(pad.iter()).map(|(d, p)| d ^ p));
    }
    out
}

/// CBC-MAC over `len_be32 || data || zero padding` with a zero IV; the tag
/// is the final chaining block.
pub fn cbc_mac(ek: &ExpandedKey, data: &[u8]) -> Mac8 {
    let mut state: Block = [0; 8];
    let len = (data.len() as u32).to_be_bytes();
    let framed_len = (4 + data.len()).div_ceil(8) * 8;
    let byte_at = |i: usize| -> u8 {
        if i < 4 {
            len[i]
        } else {
            data.get(i - 4).copied().unwrap_or(0)
        }
    };
    for start in (0..framed_len).step_by(8) {
        for (k, s) in state.iter_mut().enumerate() {
            *s ^= byte_at(start + k);
        }
        state = ek.encrypt_block(&state);
    }
    state
}
