//! List-decoding steganographic encoder and decoder.
//!
//! Both sides hold the same candidate list, initially every `N`-bit string.
//! Each step draws one model sample per candidate from the keyed sampling
//! stream, emits (or observes) the sample mapped to the true message prefix,
//! discards every candidate whose sample differs, and doubles the list until
//! it holds more than `2^(N-1)` members again. A keyed validation suffix
//! appended to the payload singles out the true candidate at the end.

mod bounds;
mod candidates;
pub mod format;

use thiserror::Error;

use crate::alias::AliasTable;
use crate::bitstream::{BitString, SecretKey};
use crate::dist::{ModelError, ModelSource, QuantizedDistribution};
use crate::prg::{Domain, PrgError, PrgStream};

pub use bounds::{collision_bound, filter_slack, suffix_length};
pub use candidates::{CandidateError, CandidateList};

/// Largest supported list exponent `N`.
pub const MAX_LIST_BITS: u32 = 26;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("decoder desynchronized at step {step}: no candidate maps to the observed token")]
    Desync { step: usize },
    #[error("stegotext truncated: {consumed} tokens consumed before the message was complete")]
    Truncated { consumed: usize },
    #[error("no candidate carries the validation suffix")]
    NoMatch,
    #[error("{candidates} suffix-matching candidates disagree on the payload")]
    Ambiguous { candidates: usize },
    #[error("encoder lost the true message prefix at step {step}")]
    InternalDesync { step: usize },
    #[error("token budget of {limit} exhausted before the message was embedded")]
    TokenLimit {
        limit: usize,
        partial: Box<StegoTrace>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prg(#[from] PrgError),
}

/// How the validation suffix length `b` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuffixLength {
    Fixed(usize),
    /// Smallest `b` satisfying the collision bound for the number of tokens
    /// the suffix actually took, found by extending the encode in place.
    Auto,
}

#[derive(Debug, Clone)]
pub struct CodecParams {
    pub key: SecretKey,
    /// `N`: the list holds at most `2^N` candidates.
    pub list_bits: u32,
    pub suffix: SuffixLength,
    /// Security parameter.
    pub lambda: u32,
    /// Encoder gives up after this many tokens.
    pub max_tokens: Option<usize>,
}

impl CodecParams {
    pub fn new(key: SecretKey, list_bits: u32, lambda: u32, suffix: SuffixLength) -> Self {
        Self {
            key,
            list_bits,
            suffix,
            lambda,
            max_tokens: None,
        }
    }

    pub fn with_max_tokens(mut self, limit: usize) -> Self {
        self.max_tokens = Some(limit);
        self
    }

    fn validate(&self) -> Result<(), CodecError> {
        if !(1..=MAX_LIST_BITS).contains(&self.list_bits) {
            return Err(CodecError::InvalidInput(format!(
                "N = {} outside 1..={MAX_LIST_BITS}",
                self.list_bits
            )));
        }
        Ok(())
    }

    fn initial_suffix_bits(&self) -> usize {
        match self.suffix {
            SuffixLength::Fixed(b) => b,
            SuffixLength::Auto => suffix_length(self.lambda, 0, self.list_bits),
        }
    }
}

/// Output of an encode, with the per-step quantities the metrics need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StegoTrace {
    pub tokens: Vec<u32>,
    /// Quantized weight of each emitted token under its step's distribution.
    pub weights: Vec<u64>,
    /// Step counter; equals `tokens.len()`.
    pub steps: usize,
    /// Steps whose message prefix already reached into the suffix.
    pub suffix_tokens: usize,
    pub payload_len: usize,
    pub suffix_bits: usize,
    pub list_bits: u32,
    pub lambda: u32,
}

impl StegoTrace {
    pub fn total_tokens(&self) -> usize {
        self.tokens.len()
    }
}

/// What one filter-expand step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub token: u32,
    pub weight: u64,
    pub list_before: usize,
    pub list_after_filter: usize,
    pub expansions: u32,
    /// Candidate length after the step.
    pub bit_length: usize,
}

/// Per-step machinery common to both directions.
struct Engine {
    list: CandidateList,
    sampling: PrgStream,
    list_bits: u32,
    randoms: Vec<u64>,
    samples: Vec<u32>,
    steps: usize,
}

impl Engine {
    fn new(params: &CodecParams) -> Self {
        Self {
            list: CandidateList::full(params.list_bits),
            sampling: PrgStream::new(&params.key, Domain::Sampling),
            list_bits: params.list_bits,
            randoms: Vec::new(),
            samples: Vec::new(),
            steps: 0,
        }
    }

    /// Maps every candidate to a fresh sample from `d`.
    fn draw(&mut self, d: &QuantizedDistribution) -> Result<(), CodecError> {
        let n = self.list.len();
        self.randoms.resize(2 * n, 0);
        self.sampling.fill_u64(&mut self.randoms)?;
        self.samples.resize(n, 0);
        AliasTable::build(d).sample_into(&self.randoms, &mut self.samples);
        Ok(())
    }

    fn filter_expand(&mut self, token: u32, weight: u64) -> StepInfo {
        let list_before = self.list.len();
        let kept = self.list.filter(&self.samples, token);
        let half = 1usize << (self.list_bits - 1);
        let mut e = 0;
        if kept > 0 {
            while kept << e <= half {
                e += 1;
            }
        }
        self.list.expand(e);
        self.steps += 1;
        StepInfo {
            token,
            weight,
            list_before,
            list_after_filter: kept,
            expansions: e,
            bit_length: self.list.bit_length(),
        }
    }
}

pub struct Encoder<'m> {
    engine: Engine,
    model: &'m mut ModelSource,
    suffix_stream: PrgStream,
    message: BitString,
    trace: StegoTrace,
    max_tokens: Option<usize>,
}

impl<'m> Encoder<'m> {
    pub fn new(
        params: &CodecParams,
        model: &'m mut ModelSource,
        payload: &BitString,
    ) -> Result<Self, CodecError> {
        params.validate()?;
        if payload.is_empty() {
            return Err(CodecError::InvalidInput("payload is empty".into()));
        }
        let suffix_bits = params.initial_suffix_bits();
        if payload.len() + suffix_bits < params.list_bits as usize {
            return Err(CodecError::InvalidInput(format!(
                "payload plus suffix ({} bits) is shorter than N = {}",
                payload.len() + suffix_bits,
                params.list_bits
            )));
        }
        let mut suffix_stream = PrgStream::new(&params.key, Domain::Suffix);
        let suffix = suffix_stream.next_bits(suffix_bits)?;
        Ok(Self {
            engine: Engine::new(params),
            model,
            suffix_stream,
            message: BitString::concat(payload, &suffix),
            trace: StegoTrace {
                tokens: Vec::new(),
                weights: Vec::new(),
                steps: 0,
                suffix_tokens: 0,
                payload_len: payload.len(),
                suffix_bits,
                list_bits: params.list_bits,
                lambda: params.lambda,
            },
            max_tokens: params.max_tokens,
        })
    }

    /// The full embedded string `m* ‖ suf`.
    pub fn message(&self) -> &BitString {
        &self.message
    }

    pub fn candidates(&self) -> &CandidateList {
        &self.engine.list
    }

    pub fn trace(&self) -> &StegoTrace {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.engine.list.bit_length() > self.message.len()
    }

    pub fn step(&mut self) -> Result<StepInfo, CodecError> {
        let l = self.engine.list.bit_length();
        debug_assert!(l <= self.message.len());
        let d = self.model.next_distribution()?;
        self.engine.draw(&d)?;
        let prefix = self.message.prefix(l).expect("l <= |m| while encoding");
        let idx = self
            .engine
            .list
            .position_of(&prefix)
            .ok_or(CodecError::InternalDesync {
                step: self.engine.steps,
            })?;
        let token = self.engine.samples[idx];
        let weight = d.weight(token);
        self.model.append_history(token)?;
        self.trace.tokens.push(token);
        self.trace.weights.push(weight);
        self.trace.steps += 1;
        if l > self.trace.payload_len {
            self.trace.suffix_tokens += 1;
        }
        Ok(self.engine.filter_expand(token, weight))
    }

    /// Steps until the whole message is inside the candidate length.
    pub fn run(&mut self) -> Result<(), CodecError> {
        while !self.is_done() {
            if let Some(limit) = self.max_tokens {
                if self.trace.tokens.len() >= limit {
                    return Err(CodecError::TokenLimit {
                        limit,
                        partial: Box::new(self.trace.clone()),
                    });
                }
            }
            self.step()?;
        }
        Ok(())
    }

    /// Lengthens the suffix to `bits` (drawing the continuation of the same
    /// suffix stream). Stepping on from here gives exactly the trace a fresh
    /// encode with the longer suffix would produce.
    pub fn extend_suffix(&mut self, bits: usize) -> Result<(), CodecError> {
        let current = self.trace.suffix_bits;
        if bits < current {
            return Err(CodecError::InvalidInput(format!(
                "cannot shorten suffix from {current} to {bits} bits"
            )));
        }
        let more = self.suffix_stream.next_bits(bits - current)?;
        self.message.extend_from(&more);
        self.trace.suffix_bits = bits;
        Ok(())
    }

    pub fn into_trace(self) -> StegoTrace {
        self.trace
    }
}

/// Embeds `payload` and returns the stegotext trace.
pub fn encode(
    params: &CodecParams,
    model: &mut ModelSource,
    payload: &BitString,
) -> Result<StegoTrace, CodecError> {
    let mut enc = Encoder::new(params, model, payload)?;
    enc.run()?;
    if params.suffix == SuffixLength::Auto {
        loop {
            let needed = suffix_length(
                params.lambda,
                enc.trace().suffix_tokens as u64,
                params.list_bits,
            );
            if needed <= enc.trace().suffix_bits {
                break;
            }
            enc.extend_suffix(needed)?;
            enc.run()?;
        }
    }
    Ok(enc.into_trace())
}

pub struct Decoder<'m> {
    engine: Engine,
    model: &'m mut ModelSource,
    key: SecretKey,
    payload_len: usize,
    suffix_bits: usize,
}

impl<'m> Decoder<'m> {
    pub fn new(
        params: &CodecParams,
        model: &'m mut ModelSource,
        payload_len: usize,
    ) -> Result<Self, CodecError> {
        params.validate()?;
        let SuffixLength::Fixed(suffix_bits) = params.suffix else {
            return Err(CodecError::InvalidInput(
                "decoding needs the suffix length the encoder used".into(),
            ));
        };
        if payload_len == 0 {
            return Err(CodecError::InvalidInput("payload length is zero".into()));
        }
        if payload_len + suffix_bits < params.list_bits as usize {
            return Err(CodecError::InvalidInput(format!(
                "payload plus suffix ({} bits) is shorter than N = {}",
                payload_len + suffix_bits,
                params.list_bits
            )));
        }
        Ok(Self {
            engine: Engine::new(params),
            model,
            key: params.key.clone(),
            payload_len,
            suffix_bits,
        })
    }

    pub fn candidates(&self) -> &CandidateList {
        &self.engine.list
    }

    pub fn consumed(&self) -> usize {
        self.engine.steps
    }

    pub fn is_done(&self) -> bool {
        self.engine.list.bit_length() > self.payload_len + self.suffix_bits
    }

    pub fn step(&mut self, token: u32) -> Result<StepInfo, CodecError> {
        let step = self.engine.steps;
        let d = self.model.next_distribution()?;
        if token as usize >= d.vocab_size() {
            return Err(CodecError::Desync { step });
        }
        self.engine.draw(&d)?;
        self.model.append_history(token)?;
        let info = self.engine.filter_expand(token, d.weight(token));
        if info.list_after_filter == 0 {
            return Err(CodecError::Desync { step });
        }
        Ok(info)
    }

    pub fn finish(self) -> Result<BitString, CodecError> {
        if !self.is_done() {
            return Err(CodecError::Truncated {
                consumed: self.engine.steps,
            });
        }
        let suffix = PrgStream::new(&self.key, Domain::Suffix).next_bits(self.suffix_bits)?;
        match_suffix(&self.engine.list, self.payload_len, &suffix)
    }
}

/// Recovers a `payload_len`-bit payload from `tokens`. Tokens beyond the
/// point where the message is complete are ignored.
pub fn decode(
    params: &CodecParams,
    model: &mut ModelSource,
    tokens: &[u32],
    payload_len: usize,
) -> Result<BitString, CodecError> {
    if tokens.is_empty() {
        return Err(CodecError::InvalidInput("stegotext is empty".into()));
    }
    let mut dec = Decoder::new(params, model, payload_len)?;
    for &t in tokens {
        if dec.is_done() {
            break;
        }
        dec.step(t)?;
    }
    dec.finish()
}

/// Selects the candidates carrying `suf` at bit positions
/// `payload_len + 1 ..= payload_len + |suf|` and returns their common
/// `payload_len`-bit prefix.
pub fn match_suffix(
    list: &CandidateList,
    payload_len: usize,
    suf: &BitString,
) -> Result<BitString, CodecError> {
    let window_end = payload_len + suf.len();
    if list.bit_length() < window_end {
        return Err(CodecError::InvalidInput(format!(
            "candidates have {} bits, suffix window ends at {window_end}",
            list.bit_length()
        )));
    }
    let mut buf = BitString::new();
    let mut found: Option<BitString> = None;
    let mut matches = 0usize;
    let mut disagree = false;
    for i in 0..list.len() {
        list.write_member(i, &mut buf);
        let window = buf.slice(payload_len + 1, window_end).expect("window in range");
        if window != *suf {
            continue;
        }
        matches += 1;
        let head = buf.prefix(payload_len).expect("prefix in range");
        match &found {
            None => found = Some(head),
            Some(f) if *f != head => disagree = true,
            Some(_) => {}
        }
    }
    match found {
        None => Err(CodecError::NoMatch),
        Some(_) if disagree => Err(CodecError::Ambiguous {
            candidates: matches,
        }),
        Some(m) => Ok(m),
    }
}

#[cfg(test)]
mod tests;
