//! Variable-length bit strings with 1-based positional access, and the shared
//! secret key.
//!
//! Bits are packed most-significant-first into `u64` words, so comparing the
//! word vectors of two equal-length strings is the same as comparing them
//! lexicographically (and as big-endian integers).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitError {
    #[error("bit range {start}..={end} is out of bounds for a string of {len} bits")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("invalid bit character {0:?}")]
    InvalidChar(char),
    #[error("payload header declares {declared} bits but {available} bytes of body follow")]
    Truncated { declared: u64, available: usize },
    #[error("payload has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("payload padding bits are not zero")]
    NonzeroPadding,
    #[error("secret key must be exactly 64 hex characters")]
    InvalidKey,
}

const WORD_BITS: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    // Unused low-order bits of the last word are always zero.
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(WORD_BITS)),
            len: 0,
        }
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn from_u64(value: u64, width: u32) -> Self {
        let mut s = Self::with_capacity(width as usize);
        s.push_bits(value, width);
        s
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = Self::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// Packs whole bytes, eight bits each, most significant bit first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut s = Self::with_capacity(bytes.len() * 8);
        for &b in bytes {
            s.push_bits(b as u64, 8);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn clear(&mut self) {
        self.words.clear();
        self.len = 0;
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at 1-based position `i`.
    pub fn get(&self, i: usize) -> Result<bool, BitError> {
        if i == 0 || i > self.len {
            return Err(BitError::OutOfRange {
                start: i,
                end: i,
                len: self.len,
            });
        }
        Ok(self.bit0(i - 1))
    }

    #[inline]
    fn bit0(&self, i: usize) -> bool {
        (self.words[i / WORD_BITS] >> (WORD_BITS - 1 - i % WORD_BITS)) & 1 == 1
    }

    pub fn push(&mut self, bit: bool) {
        self.push_bits(bit as u64, 1);
    }

    /// Appends the low `width` bits of `value` (`width <= 64`).
    pub fn push_bits(&mut self, value: u64, width: u32) {
        assert!(width <= 64, "push_bits width {width} exceeds 64");
        if width == 0 {
            return;
        }
        let value = if width == 64 {
            value
        } else {
            value & ((1u64 << width) - 1)
        };
        let used = self.len % WORD_BITS;
        let width_us = width as usize;
        if used == 0 {
            self.words.push(if width == 64 { value } else { value << (64 - width) });
        } else {
            let free = WORD_BITS - used;
            let last = self.words.last_mut().unwrap();
            if width_us <= free {
                *last |= value << (free - width_us);
            } else {
                let spill = width_us - free;
                *last |= value >> spill;
                self.words.push(value << (WORD_BITS - spill));
            }
        }
        self.len += width_us;
    }

    pub fn extend_from(&mut self, other: &BitString) {
        if self.len.is_multiple_of(WORD_BITS) {
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        let mut remaining = other.len;
        for &w in &other.words {
            let take = remaining.min(WORD_BITS);
            self.push_bits(w >> (WORD_BITS - take), take as u32);
            remaining -= take;
        }
    }

    /// `a ‖ b`.
    pub fn concat(a: &BitString, b: &BitString) -> BitString {
        let mut out = Self::with_capacity(a.len + b.len);
        out.extend_from(a);
        out.extend_from(b);
        out
    }

    /// The first `k` bits.
    pub fn prefix(&self, k: usize) -> Result<BitString, BitError> {
        if k > self.len {
            return Err(BitError::OutOfRange {
                start: 1,
                end: k,
                len: self.len,
            });
        }
        let mut words = self.words[..k.div_ceil(WORD_BITS)].to_vec();
        if !k.is_multiple_of(WORD_BITS) {
            let last = words.last_mut().unwrap();
            *last &= !0u64 << (WORD_BITS - k % WORD_BITS);
        }
        Ok(BitString { words, len: k })
    }

    /// Bits `i..=j` (1-based, inclusive). `i = j + 1` yields the empty string.
    pub fn slice(&self, i: usize, j: usize) -> Result<BitString, BitError> {
        if i == 0 || i > j + 1 || j > self.len {
            return Err(BitError::OutOfRange {
                start: i,
                end: j,
                len: self.len,
            });
        }
        let mut out = Self::with_capacity(j + 1 - i);
        let mut pos = i - 1;
        while pos < j {
            let take = (j - pos).min(WORD_BITS);
            out.push_bits(self.read_bits0(pos, take as u32), take as u32);
            pos += take;
        }
        Ok(out)
    }

    /// `width` bits starting at 0-based offset `start`, as an integer.
    pub(crate) fn read_bits0(&self, start: usize, width: u32) -> u64 {
        debug_assert!(width <= 64 && start + width as usize <= self.len);
        if width == 0 {
            return 0;
        }
        let w = start / WORD_BITS;
        let off = start % WORD_BITS;
        let hi = self.words[w] << off;
        let combined = if off + width as usize > WORD_BITS {
            hi | (self.words[w + 1] >> (WORD_BITS - off))
        } else {
            hi
        };
        combined >> (64 - width)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bit0(i))
    }

    /// Packed bits, most significant first, zero-padded in the final byte.
    pub fn packed_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_be_bytes())
            .take(nbytes)
            .collect()
    }

    /// Secret payload serialization: 8-byte big-endian bit count, then the
    /// packed bits.
    pub fn to_payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u64).to_be_bytes());
        out.extend_from_slice(&self.packed_bytes());
        out
    }

    pub fn from_payload_bytes(bytes: &[u8]) -> Result<BitString, BitError> {
        if bytes.len() < 8 {
            return Err(BitError::Truncated {
                declared: 0,
                available: bytes.len(),
            });
        }
        let declared = u64::from_be_bytes(bytes[..8].try_into().unwrap());
        let body = &bytes[8..];
        let need = declared.div_ceil(8);
        if (body.len() as u64) < need {
            return Err(BitError::Truncated {
                declared,
                available: body.len(),
            });
        }
        if body.len() as u64 > need {
            return Err(BitError::TrailingBytes(body.len() - need as usize));
        }
        let mut s = BitString::from_bytes(body);
        let declared = declared as usize;
        if s.iter().skip(declared).any(|b| b) {
            return Err(BitError::NonzeroPadding);
        }
        s = s.prefix(declared).expect("length checked above");
        Ok(s)
    }
}

impl Ord for BitString {
    /// Lexicographic order; a proper prefix sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        let common = self.len.min(other.len);
        let full = common / WORD_BITS;
        for k in 0..full {
            match self.words[k].cmp(&other.words[k]) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        let rest = common % WORD_BITS;
        if rest > 0 {
            let mask = !0u64 << (WORD_BITS - rest);
            match (self.words[full] & mask).cmp(&(other.words[full] & mask)) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString(len={})", self.len)
        }
    }
}

impl FromStr for BitString {
    type Err = BitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = BitString::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                other => return Err(BitError::InvalidChar(other)),
            }
        }
        Ok(out)
    }
}

/// 256-bit shared secret.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn from_hex(s: &str) -> Result<Self, BitError> {
        let s = s.trim();
        if s.len() != 64 {
            return Err(BitError::InvalidKey);
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| BitError::InvalidKey)?;
        Ok(Self(out))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}
