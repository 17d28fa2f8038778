//! Keyed, domain-separated pseudorandom streams.
//!
//! The stream is the ChaCha12 keystream under the 256-bit secret key with the
//! domain label as the 64-bit stream id. Keystream bytes are consumed in
//! order; a `u64` is the next eight bytes read big-endian and a bit string is
//! the next bits, most significant first. A uniform real in `[0, 1)` is never
//! materialized: callers use the raw `u64` as a 64-bit fixed-point fraction.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::bitstream::{BitString, SecretKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrgError {
    #[error("pseudorandom stream exhausted (2^64 keystream blocks consumed)")]
    Exhausted,
}

/// Stream label mixed into the cipher nonce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Randomness for alias sampling.
    Sampling = 0,
    /// Validation suffix bits.
    Suffix = 1,
}

// 2^64 blocks of 64 bytes, counted in u64 words.
const MAX_WORDS: u128 = 1 << 67;

pub struct PrgStream {
    rng: ChaCha12Rng,
    domain: Domain,
    // Index of the next unread u64 word.
    next_word: u128,
    // Low `pending_bits` bits of `pending` are read but not yet consumed.
    pending: u64,
    pending_bits: u32,
}

impl PrgStream {
    pub fn new(key: &SecretKey, domain: Domain) -> Self {
        let mut rng = ChaCha12Rng::from_seed(*key.as_bytes());
        rng.set_stream(domain as u64);
        Self {
            rng,
            domain,
            next_word: 0,
            pending: 0,
            pending_bits: 0,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Bits consumed so far.
    pub fn position(&self) -> u128 {
        self.next_word * 64 - self.pending_bits as u128
    }

    fn reserve(&mut self, words: u128) -> Result<(), PrgError> {
        if self.next_word + words > MAX_WORDS {
            return Err(PrgError::Exhausted);
        }
        self.next_word += words;
        Ok(())
    }

    #[inline]
    fn raw_word(&mut self) -> u64 {
        // rand_chacha assembles u64s little-endian from the keystream.
        self.rng.next_u64().swap_bytes()
    }

    pub fn next_u64(&mut self) -> Result<u64, PrgError> {
        self.reserve(1)?;
        let w = self.raw_word();
        if self.pending_bits == 0 {
            return Ok(w);
        }
        let pb = self.pending_bits;
        let out = (self.pending << (64 - pb)) | (w >> pb);
        self.pending = w & ((1u64 << pb) - 1);
        Ok(out)
    }

    /// Fills `out` with consecutive `next_u64` values.
    pub fn fill_u64(&mut self, out: &mut [u64]) -> Result<(), PrgError> {
        if self.pending_bits != 0 {
            for slot in out.iter_mut() {
                *slot = self.next_u64()?;
            }
            return Ok(());
        }
        self.reserve(out.len() as u128)?;
        for slot in out.iter_mut() {
            *slot = self.raw_word();
        }
        Ok(())
    }

    pub fn next_bits(&mut self, k: usize) -> Result<BitString, PrgError> {
        let mut out = BitString::with_capacity(k);
        let mut need = k;
        while need > 0 {
            if self.pending_bits == 0 {
                self.reserve(1)?;
                self.pending = self.raw_word();
                self.pending_bits = 64;
            }
            let take = need.min(self.pending_bits as usize) as u32;
            let shift = self.pending_bits - take;
            out.push_bits(self.pending >> shift, take);
            self.pending_bits = shift;
            self.pending = if shift == 0 {
                0
            } else {
                self.pending & ((1u64 << shift) - 1)
            };
            need -= take as usize;
        }
        Ok(out)
    }
}
