//! Capacity metrics, theoretical bounds, and the goodness-of-fit test kit.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::bitstream::BitString;
use crate::codec::{filter_slack, StegoTrace};
use crate::dist::{QuantizedDistribution, GRID};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("utilization is undefined for a stegotext carrying no information")]
    ZeroInformation,
    #[error("bit strings differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("observed counts cover {observed} tokens, distribution has {expected}")]
    SupportMismatch { observed: usize, expected: usize },
    #[error("no observations")]
    NoObservations,
    #[error("fewer than two categories remain after pooling")]
    DegenerateSupport,
}

/// Self-information of a stegotext under the weights it was drawn from:
/// `sum -log2(w_i / 2^32)`.
pub fn information_content(weights: &[u64]) -> f64 {
    weights
        .iter()
        .map(|&w| {
            debug_assert!((1..=GRID).contains(&w));
            32.0 - (w as f64).log2()
        })
        .sum()
}

pub fn utilization(information: f64, payload_len: usize) -> Result<f64, MetricsError> {
    if payload_len == 0 {
        return Ok(0.0);
    }
    if information <= 0.0 {
        return Err(MetricsError::ZeroInformation);
    }
    Ok(payload_len as f64 / information)
}

/// `(1 - K/|m*|) * (1 - n_all * sqrt(lambda / 2^N) / (ln 2 * I))`, clamped to
/// `[0, 1]`. A factor that goes negative makes the bound vacuous (0) rather
/// than letting two negatives multiply into a large value.
pub fn utilization_bound(
    lambda: u32,
    list_bits: u32,
    n_all: usize,
    information: f64,
    payload_len: usize,
    overhead: usize,
) -> f64 {
    let head = 1.0 - overhead as f64 / payload_len as f64;
    let tail = 1.0
        - n_all as f64 * filter_slack(lambda, list_bits) / (std::f64::consts::LN_2 * information);
    (head.max(0.0) * tail.max(0.0)).clamp(0.0, 1.0)
}

/// Bits of overhead beyond the payload: `max(0, b - N)`.
pub fn overhead_bits(suffix_bits: usize, list_bits: u32) -> usize {
    suffix_bits.saturating_sub(list_bits as usize)
}

/// Fraction of positions where `sent` and `received` agree.
pub fn success_rate(sent: &BitString, received: &BitString) -> Result<f64, MetricsError> {
    if sent.len() != received.len() {
        return Err(MetricsError::LengthMismatch(sent.len(), received.len()));
    }
    if sent.is_empty() {
        return Ok(1.0);
    }
    let same = sent.iter().zip(received.iter()).filter(|(a, b)| a == b).count();
    Ok(same as f64 / sent.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub embedded_bits: usize,
    pub tokens: usize,
    pub suffix_tokens: usize,
    pub suffix_bits: usize,
    pub list_bits: u32,
    pub lambda: u32,
    pub total_information: f64,
    pub entropy_per_token: f64,
    pub embed_rate: f64,
    pub utilization: f64,
    pub utilization_bound: f64,
    pub overhead_bits: usize,
}

impl CapacityReport {
    pub fn from_trace(trace: &StegoTrace) -> Self {
        let info = information_content(&trace.weights);
        let n_all = trace.tokens.len();
        let overhead = overhead_bits(trace.suffix_bits, trace.list_bits);
        let per_token = |x: f64| if n_all == 0 { 0.0 } else { x / n_all as f64 };
        Self {
            embedded_bits: trace.payload_len,
            tokens: n_all,
            suffix_tokens: trace.suffix_tokens,
            suffix_bits: trace.suffix_bits,
            list_bits: trace.list_bits,
            lambda: trace.lambda,
            total_information: info,
            entropy_per_token: per_token(info),
            embed_rate: per_token(trace.payload_len as f64),
            utilization: utilization(info, trace.payload_len).unwrap_or(0.0),
            utilization_bound: if info > 0.0 {
                utilization_bound(
                    trace.lambda,
                    trace.list_bits,
                    n_all,
                    info,
                    trace.payload_len,
                    overhead,
                )
            } else {
                0.0
            },
            overhead_bits: overhead,
        }
    }

    /// True when the measured utilization meets the theoretical lower bound.
    pub fn meets_bound(&self) -> bool {
        self.utilization >= self.utilization_bound
    }

    /// One `key=value` per line, fixed field order.
    pub fn to_key_value(&self) -> String {
        format!(
            "embedded_bits={}\ntokens={}\nsuffix_tokens={}\nsuffix_bits={}\nlist_bits={}\n\
             lambda={}\ntotal_information={:.6}\nentropy_per_token={:.6}\nembed_rate={:.6}\n\
             utilization={:.6}\nutilization_bound={:.6}\noverhead_bits={}\n",
            self.embedded_bits,
            self.tokens,
            self.suffix_tokens,
            self.suffix_bits,
            self.list_bits,
            self.lambda,
            self.total_information,
            self.entropy_per_token,
            self.embed_rate,
            self.utilization,
            self.utilization_bound,
            self.overhead_bits,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Upper tail `P(X >= x)` of a chi-square variable with `k` degrees of freedom.
pub fn chi_square_sf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 / 2.0, x / 2.0)
}

/// Pearson goodness-of-fit of `observed` counts against `expected`.
///
/// Tokens whose expected count is below 5 are pooled into one category; a
/// pool that is itself below 5 is merged into the smallest regular cell.
pub fn chi_square_gof(
    observed: &[u64],
    expected: &QuantizedDistribution,
) -> Result<ChiSquare, MetricsError> {
    if observed.len() != expected.vocab_size() {
        return Err(MetricsError::SupportMismatch {
            observed: observed.len(),
            expected: expected.vocab_size(),
        });
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(MetricsError::NoObservations);
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &w) in observed.iter().zip(expected.weights()) {
        let e = total as f64 * w as f64 / GRID as f64;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool_e > 0.0 || pool_o > 0.0 {
        if pool_e >= 5.0 || cells.is_empty() {
            cells.push((pool_o, pool_e));
        } else {
            // Fold a thin pool into the smallest regular cell.
            let smallest = cells
                .iter_mut()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            smallest.0 += pool_o;
            smallest.1 += pool_e;
        }
    }
    if cells.len() < 2 {
        return Err(MetricsError::DegenerateSupport);
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else { f64::INFINITY })
        .sum();
    let df = cells.len() - 1;
    Ok(ChiSquare {
        statistic,
        degrees_of_freedom: df,
        p_value: chi_square_sf(statistic, df),
    })
}

/// Total-variation distance between an empirical histogram and a
/// probability vector.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
        / 2.0
}
