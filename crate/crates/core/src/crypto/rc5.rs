use thiserror::Error;

const P32: u32 = 0xB7E1_5163;
const Q32: u32 = 0x9E37_79B9;

/// Rounds used unless configured otherwise: 8 rounds give an 18-word (72-byte)
/// expanded table.
pub const DEFAULT_ROUNDS: u8 = 8;
pub const MAX_ROUNDS: u8 = 32;

pub type Block = [u8; 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("rc5 rounds must be in 1..={MAX_ROUNDS}, got {0}")]
    RoundsOutOfRange(u32),
    #[error("payload of {len} bytes exceeds the {max}-byte sealed payload limit")]
    PayloadTooLong { len: usize, max: usize },
}

/// Per-node 16-byte secret shared with the sink.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey(pub [u8; 16]);

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl SecretKey {
    pub fn from_rng<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; 16];
        rng.fill_bytes(&mut k);
        SecretKey(k)
    }
}

/// RC5-32 round-key table for a 16-byte key.
#[derive(Clone)]
pub struct ExpandedKey {
    rounds: u8,
    s: [u32; 2 * (MAX_ROUNDS as usize + 1)],
}

impl std::fmt::Debug for ExpandedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpandedKey")
            .field("rounds", &self.rounds)
            .finish_non_exhaustive()
    }
}

impl ExpandedKey {
    pub fn new(key: &SecretKey, rounds: u32) -> Result<Self, CryptoError> {
        if rounds == 0 || rounds > MAX_ROUNDS as u32 {
            return Err(CryptoError::RoundsOutOfRange(rounds));
        }
        let t = 2 * (rounds as usize + 1);
        let mut l = [0u32; 4];
        for (i, chunk) in key.0.chunks_exact(4).enumerate() {
            l[i] = u32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        let mut s = [0u32; 2 * (MAX_ROUNDS as usize + 1)];
        s[0] = P32;
        for i in 1..t {
            s[i] = s[i - 1].wrapping_add(Q32);
        }
        let (mut a, mut b, mut i, mut j) = (0u32, 0u32, 0usize, 0usize);
        for _ in 0..3 * t.max(l.len()) {
            a = s[i].wrapping_add(a).wrapping_add(b).rotate_left(3);
            s[i] = a;
            b = l[j]
                .wrapping_add(a)
                .wrapping_add(b)
                .rotate_left(a.wrapping_add(b));
            l[j] = b;
            i = (i + 1) % t;
            j = (j + 1) % l.len();
        }
        Ok(ExpandedKey {
            rounds: rounds as u8,
            s,
        })
    }

    pub fn rounds(&self) -> u32 {
        self.rounds as u32
    }

    pub fn words(&self) -> &[u32] {
        &self.s[..2 * (self.rounds as usize + 1)]
    }

    /// Storage footprint of the round-key table in bytes.
    pub fn byte_size(&self) -> usize {
        self.words().len() * 4
    }

    pub fn encrypt_block(&self, block: &Block) -> Block {
        let s = self.words();
        let mut a = u32::from_le_bytes([block[0], block[1], block[2], block[3]]).wrapping_add(s[0]);
        let mut b = u32::from_le_bytes([block[4], block[5], block[6], block[7]]).wrapping_add(s[1]);
        for r in 1..=self.rounds as usize {
            a = (a ^ b).rotate_left(b).wrapping_add(s[2 * r]);
            b = (b ^ a).rotate_left(a).wrapping_add(s[2 * r + 1]);
        }
        join(a, b)
    }

    pub fn decrypt_block(&self, block: &Block) -> Block {
        let s = self.words();
        let mut a = u32::from_le_bytes([block[0], block[1], block[2], block[3]]);
        let mut b = u32::from_le_bytes([block[4], block[5], block[6], block[7]]);
        for r in (1..=self.rounds as usize).rev() {
            b = b.wrapping_sub(s[2 * r + 1]).rotate_right(a) ^ a;
            a = a.wrapping_sub(s[2 * r]).rotate_right(b) ^ b;
        }
        join(a.wrapping_sub(s[0]), b.wrapping_sub(s[1]))
    }
}

fn join(a: u32, b: u32) -> Block {
    let mut out = [0u8; 8];
    out[..4].copy_from_slice(&a.to_le_bytes());
    out[4..].copy_from_slice(&b.to_le_bytes());
    out
}
