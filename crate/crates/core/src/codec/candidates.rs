//! The bounded candidate list shared by encoder and decoder.
//!
//! Members are equal-length bit strings kept in strictly ascending order.
//! Filtering keeps a subsequence and expansion replaces every member by its
//! `2^e` extensions in order, so the order never needs re-establishing.
//!
//! Storing each member in full costs `|M| * l` bits per step, which is
//! prohibitive for long payloads. Instead each member holds up to 64 recent
//! bits inline (`tail`) and a reference to a shared prefix node. When a tail
//! would overflow, every member's tail is frozen into a new node level. All
//! members always have the same tail length, so levels line up. Levels are
//! compacted after each freeze, dropping prefixes no member descends from.

use std::cmp::Ordering;

use crate::bitstream::BitString;

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Member {
    node: u32,
    tail: u64,
}

#[derive(Debug, Clone, Default)]
struct Level {
    parents: Vec<u32>,
    bits: Vec<u64>,
    width: u32,
}

#[derive(Debug, Clone)]
pub struct CandidateList {
    bit_length: usize,
    tail_bits: u32,
    levels: Vec<Level>,
    members: Vec<Member>,
    scratch: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateError {
    UnequalLengths,
    NotAscending,
    Empty,
}

impl CandidateList {
    /// All `2^n` strings of length `n`, ascending.
    pub fn full(n: u32) -> Self {
        assert!((1..=32).contains(&n), "initial list width {n} out of range");
        let members = (0..1u64 << n)
            .map(|v| Member {
                node: NO_PARENT,
                tail: v,
            })
            .collect();
        Self {
            bit_length: n as usize,
            tail_bits: n,
            levels: Vec::new(),
            members,
            scratch: Vec::new(),
        }
    }

    /// A list with the given members, which must be non-empty, of equal
    /// length, and strictly ascending.
    pub fn from_members(members: &[BitString]) -> Result<Self, CandidateError> {
        let first = members.first().ok_or(CandidateError::Empty)?;
        let len = first.len();
        if members.iter().any(|m| m.len() != len) {
            return Err(CandidateError::UnequalLengths);
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CandidateError::NotAscending);
        }
        let full_levels = len / 64;
        let tail_bits = (len - full_levels * 64) as u32;
        let mut levels = Vec::with_capacity(full_levels);
        for d in 0..full_levels {
            let level = Level {
                parents: (0..members.len() as u32)
                    .map(|i| if d == 0 { NO_PARENT } else { i })
                    .collect(),
                bits: members.iter().map(|m| m.read_bits0(d * 64, 64)).collect(),
                width: 64,
            };
            levels.push(level);
        }
        let members = members
            .iter()
            .enumerate()
            .map(|(i, m)| Member {
                node: if full_levels == 0 { NO_PARENT } else { i as u32 },
                tail: m.read_bits0(full_levels * 64, tail_bits),
            })
            .collect();
        Ok(Self {
            bit_length: len,
            tail_bits,
            levels,
            members,
            scratch: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Common length `l` of all members.
    pub fn bit_length(&self) -> usize {
        self.bit_length
    }

    /// Node count across all prefix levels (memory diagnostics).
    pub fn stored_nodes(&self) -> usize {
        self.levels.iter().map(|l| l.parents.len()).sum()
    }

    /// Writes member `idx` into `out`, replacing its contents.
    pub fn write_member(&self, idx: usize, out: &mut BitString) {
        let m = self.members[idx];
        out.clear();
        let depth = self.levels.len();
        if depth > 0 {
            let mut chain = vec![0u32; depth];
            let mut node = m.node;
            for d in (0..depth).rev() {
                chain[d] = node;
                node = self.levels[d].parents[node as usize];
            }
            for (d, &n) in chain.iter().enumerate() {
                let level = &self.levels[d];
                out.push_bits(level.bits[n as usize], level.width);
            }
        }
        out.push_bits(m.tail, self.tail_bits);
    }

    pub fn member(&self, idx: usize) -> BitString {
        let mut out = BitString::new();
        self.write_member(idx, &mut out);
        out
    }

    pub fn members(&self) -> Vec<BitString> {
        (0..self.len()).map(|i| self.member(i)).collect()
    }

    /// Index of `target` by binary search over the ascending members.
    pub fn position_of(&self, target: &BitString) -> Option<usize> {
        if target.len() != self.bit_length {
            return None;
        }
        let mut buf = BitString::new();
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            self.write_member(mid, &mut buf);
            match buf.cmp(target) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Keeps the members whose mapped sample equals `token`; returns how many
    /// remain.
    pub fn filter(&mut self, samples: &[u32], token: u32) -> usize {
        assert_eq!(samples.len(), self.members.len(), "one sample per member");
        let mut kept = 0;
        for i in 0..self.members.len() {
            if samples[i] == token {
                self.members[kept] = self.members[i];
                kept += 1;
            }
        }
        self.members.truncate(kept);
        kept
    }

    /// Appends every `e`-bit suffix to every member, preserving order.
    pub fn expand(&mut self, e: u32) {
        if e == 0 || self.members.is_empty() {
            return;
        }
        assert!(e <= 32, "expansion by {e} bits at once");
        if self.tail_bits + e > 64 {
            self.freeze_tails();
        }
        let fan = 1u64 << e;
        self.scratch.clear();
        self.scratch.reserve(self.members.len() << e);
        for m in &self.members {
            let base = m.tail << e;
            self.scratch.extend((0..fan).map(|v| Member {
                node: m.node,
                tail: base | v,
            }));
        }
        std::mem::swap(&mut self.members, &mut self.scratch);
        self.tail_bits += e;
        self.bit_length += e as usize;
    }

    fn freeze_tails(&mut self) {
        let level = Level {
            parents: self.members.iter().map(|m| m.node).collect(),
            bits: self.members.iter().map(|m| m.tail).collect(),
            width: self.tail_bits,
        };
        for (i, m) in self.members.iter_mut().enumerate() {
            *m = Member {
                node: i as u32,
                tail: 0,
            };
        }
        self.levels.push(level);
        self.tail_bits = 0;
        self.compact();
    }

    /// Drops prefix nodes that no member descends from.
    fn compact(&mut self) {
        for d in (1..self.levels.len()).rev() {
            let (lower, upper) = self.levels.split_at_mut(d);
            let below = &mut lower[d - 1];
            let above = &mut upper[0];
            let mut remap = vec![NO_PARENT; below.parents.len()];
            for &p in &above.parents {
                remap[p as usize] = 0;
            }
            let mut next = 0u32;
            let mut write = 0usize;
            for read in 0..below.parents.len() {
                if remap[read] != NO_PARENT {
                    remap[read] = next;
                    below.parents[write] = below.parents[read];
                    below.bits[write] = below.bits[read];
                    write += 1;
                    next += 1;
                }
            }
            below.parents.truncate(write);
            below.bits.truncate(write);
            for p in above.parents.iter_mut() {
                *p = remap[*p as usize];
            }
        }
    }
}
