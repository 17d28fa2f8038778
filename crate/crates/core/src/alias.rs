//! Walker alias tables built in exact integer arithmetic.
//!
//! Probabilities are scaled by the vocabulary size: token `i` carries
//! `|V| * w_i` units against a per-slot capacity of `2^32` units. Tokens below
//! capacity are "small", the rest "large". Slots are filled in order by
//! pairing the smallest-id small token with the smallest-id large token; the
//! large token donates the shortfall and is demoted once it drops below
//! capacity. Tokens still waiting when either list empties get a slot of
//! their own.
//!
//! Both worklists stay sorted without a heap: large tokens are only ever
//! consumed from the front, so demotions arrive in ascending id order and the
//! small list is the merge of two ascending queues. Construction is linear in
//! `|V|`.

use crate::dist::{QuantizedDistribution, GRID};

/// Slot threshold meaning "always the primary token".
pub const FULL_THRESHOLD: u128 = 1 << 64;

#[derive(Debug, Clone)]
pub struct AliasTable {
    primary: Vec<u32>,
    alias: Vec<u32>,
    // P(primary) as a 64-bit fixed-point fraction. Full slots store u64::MAX
    // and have alias == primary, so the comparison result is irrelevant.
    cut: Vec<u64>,
    full: Vec<bool>,
}

impl AliasTable {
    pub fn build(d: &QuantizedDistribution) -> Self {
        let weights = d.weights();
        let v = weights.len();
        let vocab = v as u64;
        let mut units: Vec<u64> = weights.iter().map(|&w| w * vocab).collect();

        let mut initial_small = Vec::new();
        let mut large = Vec::new();
        for (i, &q) in units.iter().enumerate() {
            if q < GRID {
                initial_small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        let mut demoted: Vec<u32> = Vec::new();
        let (mut si, mut di, mut gi) = (0usize, 0usize, 0usize);

        let mut table = AliasTable {
            primary: Vec::with_capacity(v),
            alias: Vec::with_capacity(v),
            cut: Vec::with_capacity(v),
            full: Vec::with_capacity(v),
        };

        loop {
            let small = match (initial_small.get(si), demoted.get(di)) {
                (Some(&a), Some(&b)) if a < b => Some((a, true)),
                (Some(_), Some(&b)) => Some((b, false)),
                (Some(&a), None) => Some((a, true)),
                (None, Some(&b)) => Some((b, false)),
                (None, None) => None,
            };
            let (Some((j, from_initial)), Some(&k)) = (small, large.get(gi)) else {
                break;
            };
            if from_initial {
                si += 1;
            } else {
                di += 1;
            }
            let qj = units[j as usize];
            table.primary.push(j);
            table.alias.push(k);
            table.cut.push(qj << 32);
            table.full.push(false);
            units[k as usize] -= GRID - qj;
            if units[k as usize] < GRID {
                gi += 1;
                demoted.push(k);
            }
        }

        // With exact arithmetic every leftover holds exactly one slot's worth.
        let mut leftovers: Vec<u32> = initial_small[si..]
            .iter()
            .chain(&demoted[di..])
            .chain(&large[gi..])
            .copied()
            .collect();
        leftovers.sort_unstable();
        for t in leftovers {
            debug_assert_eq!(units[t as usize], GRID, "leftover token {t} is not exactly full");
            table.primary.push(t);
            table.alias.push(t);
            table.cut.push(u64::MAX);
            table.full.push(true);
        }
        debug_assert_eq!(table.primary.len(), v);
        table
    }

    pub fn vocab_size(&self) -> usize {
        self.primary.len()
    }

    pub fn primary(&self, slot: usize) -> u32 {
        self.primary[slot]
    }

    pub fn alias(&self, slot: usize) -> u32 {
        self.alias[slot]
    }

    /// Probability that `slot` yields its primary token, scaled by 2^64.
    pub fn threshold(&self, slot: usize) -> u128 {
        if self.full[slot] {
            FULL_THRESHOLD
        } else {
            self.cut[slot] as u128
        }
    }

    /// Draws `randoms.len() / 2` tokens. Sample `i` picks slot
    /// `floor(|V| * randoms[2i] / 2^64)` and returns its primary token when
    /// `randoms[2i+1]` is below the slot threshold, else the alias.
    pub fn sample_batch(&self, randoms: &[u64]) -> Vec<u32> {
        let mut out = vec![0u32; randoms.len() / 2];
        self.sample_into(randoms, &mut out);
        out
    }

    pub fn sample_into(&self, randoms: &[u64], out: &mut [u32]) {
        assert!(randoms.len().is_multiple_of(2), "alias sampling needs pairs of randoms");
        assert_eq!(out.len(), randoms.len() / 2);
        let v = self.primary.len() as u128;
        for (pair, slot_out) in randoms.chunks_exact(2).zip(out.iter_mut()) {
            let x = ((v * pair[0] as u128) >> 64) as usize;
            *slot_out = if pair[1] < self.cut[x] {
                self.primary[x]
            } else {
                self.alias[x]
            };
        }
    }
}
