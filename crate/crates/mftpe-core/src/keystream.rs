//! Deterministic keyed byte streams with domain separation.
//!
//! All randomness in the cipher is derived from SHA-256 in counter mode.
//! The master key and nonce are bound into a per-(round, channel, block)
//! key once; group subkeys and the permutation stream hang off that block
//! key under distinct labels, so every context yields an independent
//! stream and identical contexts replay identical bytes.

use sha2::{Digest, Sha256};

const LABEL_BLOCK: &[u8] = b"mftpe/block";
const LABEL_SUBKEY: &[u8] = b"sub";
const LABEL_PERM: &[u8] = b"perm";
const LABEL_WEIGHTS: &[u8] = b"mftpe/weights";

/// Master secret plus public nonce, the root of every derived stream.
#[derive(Clone)]
pub struct KeyMaterial {
    key: [u8; 32],
    nonce: [u8; 16],
}

impl KeyMaterial {
    pub fn new(key: [u8; 32], nonce: [u8; 16]) -> Self {
        KeyMaterial { key, nonce }
    }

    pub fn nonce(&self) -> [u8; 16] {
        self.nonce
    }

    /// Key bound to one (round, channel, block) position.
    pub fn block_key(&self, round: u32, channel: u8, block: u32) -> BlockKey {
        let mut h = Sha256::new();
        h.update(LABEL_BLOCK);
        h.update(self.key);
        h.update(self.nonce);
        h.update(round.to_le_bytes());
        h.update([channel]);
        h.update(block.to_le_bytes());
        BlockKey(h.finalize().into())
    }

    /// Weighted-mean weights, three values in `[1, 8]` fixed by
    /// (key, nonce) alone so the decrypter can re-derive them.
    pub fn derive_weights(&self) -> [u8; 3] {
        let mut h = Sha256::new();
        h.update(LABEL_WEIGHTS);
        h.update(self.key);
        h.update(self.nonce);
        let digest = h.finalize();
        [
            (digest[0] & 7) + 1,
            (digest[1] & 7) + 1,
            (digest[2] & 7) + 1,
        ]
    }
}

/// Derived key for one block position within one round.
pub struct BlockKey([u8; 32]);

impl BlockKey {
    /// 128-bit substitution subkey for the group at `index`.
    pub fn subkey(&self, index: u32) -> u128 {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(LABEL_SUBKEY);
        h.update(index.to_le_bytes());
        let digest = h.finalize();
        u128::from_le_bytes(digest[..16].try_into().unwrap())
    }

    /// Byte stream driving the within-block permutation.
    pub fn permutation_stream(&self) -> Keystream {
        Keystream::new(self.0, LABEL_PERM)
    }
}

/// SHA-256 counter-mode stream: block `i` is `H(seed || label || i)`.
pub struct Keystream {
    seed: [u8; 32],
    label: &'static [u8],
    counter: u64,
    buf: [u8; 32],
    pos: usize,
}

impl Keystream {
    fn new(seed: [u8; 32], label: &'static [u8]) -> Self {
        Keystream {
            seed,
            label,
            counter: 0,
            buf: [0; 32],
            pos: 32,
        }
    }

    fn refill(&mut self) {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(self.label);
        h.update(self.counter.to_le_bytes());
        self.buf = h.finalize().into();
        self.counter += 1;
        self.pos = 0;
    }

    pub fn next_byte(&mut self) -> u8 {
        if self.pos == 32 {
            self.refill();
        }
        let b = self.buf[self.pos];
        self.pos += 1;
        b
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut bytes = [0u8; 8];
        for b in bytes.iter_mut() {
            *b = self.next_byte();
        }
        u64::from_le_bytes(bytes)
    }

    /// Uniform draw from `[0, bound)` by rejection sampling, so the index
    /// distribution carries no modulo bias.
    pub fn next_below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0);
        let bound = bound as u64;
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % bound) as u32;
            }
        }
    }
}
