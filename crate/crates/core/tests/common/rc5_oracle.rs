//! Second RC5-32/r/b implementation written straight from Rivest's reference
//! description, sharing no code with the library. Keys are loaded byte by
//! byte (the `L[i/u] = (L[i/u] << 8) + K[i]` loop), rotations are spelled out
//! with shifts, and blocks are handled as (A, B) word pairs.

pub struct OracleRc5 {
    rounds: usize,
    s: Vec<u32>,
}

#[allow(clippy::manual_rotate)]
fn rotl(x: u32, y: u32) -> u32 {
    let y = y & 31;
    if y == 0 {
        x
    } else {
        (x << y) | (x >> (32 - y))
    }
}

#[allow(clippy::manual_rotate)]
fn rotr(x: u32, y: u32) -> u32 {
    let y = y & 31;
    if y == 0 {
        x
    } else {
        (x >> y) | (x << (32 - y))
    }
}

impl OracleRc5 {
    pub fn new(key: &[u8], rounds: usize) -> Self {
        const P: u32 = 0xb7e15163;
        const Q: u32 = 0x9e3779b9;
        let u = 4;
        let c = key.len().div_ceil(u).max(1);
        let mut l = vec![0u32; c];
        for i in (0..key.len()).rev() {
            l[i / u] = (l[i / u] << 8).wrapping_add(key[i] as u32);
        }
        let t = 2 * (rounds + 1);
        let mut s = vec![0u32; t];
        s[0] = P;
        for i in 1..t {
            s[i] = s[i - 1].wrapping_add(Q);
        }
        let mut a = 0u32;
        let mut b = 0u32;
        let mut i = 0;
        let mut j = 0;
        let n = 3 * if t > c { t } else { c };
        for _ in 0..n {
            s[i] = rotl(s[i].wrapping_add(a.wrapping_add(b)), 3);
            a = s[i];
            l[j] = rotl(l[j].wrapping_add(a.wrapping_add(b)), a.wrapping_add(b));
            b = l[j];
            i = (i + 1) % t;
            j = (j + 1) % c;
        }
        OracleRc5 { rounds, s }
    }

    pub fn table(&self) -> &[u32] {
        &self.s
    }

    pub fn encrypt_words(&self, pt: [u32; 2]) -> [u32; 2] {
        let mut a = pt[0].wrapping_add(self.s[0]);
        let mut b = pt[1].wrapping_add(self.s[1]);
        for i in 1..=self.rounds {
            a = rotl(a ^ b, b).wrapping_add(self.s[2 * i]);
            b = rotl(b ^ a, a).wrapping_add(self.s[2 * i + 1]);
        }
        [a, b]
    }

    pub fn decrypt_words(&self, ct: [u32; 2]) -> [u32; 2] {
        let mut b = ct[1];
        let mut a = ct[0];
        let mut i = self.rounds;
        while i >= 1 {
            b = rotr(b.wrapping_sub(self.s[2 * i + 1]), a) ^ a;
            a = rotr(a.wrapping_sub(self.s[2 * i]), b) ^ b;
            i -= 1;
        }
        [a.wrapping_sub(self.s[0]), b.wrapping_sub(self.s[1])]
    }

    /// Block bytes are the two words in little-endian order.
    pub fn encrypt_bytes(&self, block: &[u8; 8]) -> [u8; 8] {
        let w = |k: usize| {
            (block[k] as u32)
                | (block[k + 1] as u32) << 8
                | (block[k + 2] as u32) << 16
                | (block[k + 3] as u32) << 24
        };
        let [a, b] = self.encrypt_words([w(0), w(4)]);
        let mut out = [0u8; 8];
        for k in 0..4 {
            out[k] = (a >> (8 * k)) as u8;
            out[4 + k] = (b >> (8 * k)) as u8;
        }
        out
    }
}

/// Published RC5-32/12/16 vectors: (key, plaintext words, ciphertext words).
pub const PUBLISHED_VECTORS: [([u8; 16], [u32; 2], [u32; 2]); 3] = [
    (
        [0; 16],
        [0x0000_0000, 0x0000_0000],
        [0xEEDB_A521, 0x6D8F_4B15],
    ),
    (
        [
            0x91, 0x5F, 0x46, 0x19, 0xBE, 0x41, 0xB2, 0x51, 0x63, 0x55, 0xA5, 0x01, 0x10, 0xA9,
            0xCE, 0x91,
        ],
        [0xEEDB_A521, 0x6D8F_4B15],
        [0xAC13_C0F7, 0x5289_2B5B],
    ),
    (
        [
            0x78, 0x33, 0x48, 0xE7, 0x5A, 0xEB, 0x0F, 0x2F, 0xD7, 0xB1, 0x69, 0xBB, 0x8D, 0xC1,
            0x67, 0x87,
        ],
        [0xAC13_C0F7, 0x5289_2B5B],
        [0xB7B3_422F, 0x92FC_6903],
    ),
];
