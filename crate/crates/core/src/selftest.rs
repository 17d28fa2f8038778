//! Statistical experiments shared by the `selftest` command and the test
//! suites. Everything is driven by a caller-supplied RNG so runs are
//! reproducible from a seed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alias::AliasTable;
use crate::bitstream::{BitString, SecretKey};
use crate::codec::{
    collision_bound, decode, encode, suffix_length, CodecError, CodecParams, Encoder, SuffixLength,
};
use crate::dist::{quantize, ModelSource, QuantizedDistribution, SyntheticModel};
use crate::metrics::{chi_square_gof, total_variation, CapacityReport};

pub fn random_key<R: Rng>(rng: &mut R) -> SecretKey {
    let mut k = [0u8; 32];
    rng.fill(&mut k);
    SecretKey::from_bytes(k)
}

pub fn random_bits<R: Rng>(rng: &mut R, len: usize) -> BitString {
    BitString::from_bools((0..len).map(|_| rng.random::<bool>()))
}

/// Total-variation distance between `samples` alias draws and `d`.
pub fn alias_tv<R: Rng>(d: &QuantizedDistribution, samples: usize, rng: &mut R) -> f64 {
    let table = AliasTable::build(d);
    let mut counts = vec![0u64; d.vocab_size()];
    let mut randoms = vec![0u64; 2 * 4096];
    let mut out = vec![0u32; 4096];
    let mut left = samples;
    while left > 0 {
        let k = left.min(4096);
        rng.fill(&mut randoms[..2 * k]);
        table.sample_into(&randoms[..2 * k], &mut out[..k]);
        for &t in &out[..k] {
            counts[t as usize] += 1;
        }
        left -= k;
    }
    let probs: Vec<f64> = (0..d.vocab_size()).map(|t| d.probability(t as u32)).collect();
    total_variation(&counts, &probs)
}

/// Emits `steps` stego tokens for a fresh random key and payload.
pub fn stego_prefix<R: Rng>(
    model: SyntheticModel,
    list_bits: u32,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<u32>, CodecError> {
    let params = CodecParams::new(random_key(rng), list_bits, 0, SuffixLength::Fixed(0));
    // Long enough that the message outlasts `steps` tokens of any model.
    let payload = random_bits(rng, list_bits as usize + 64 * steps);
    let mut source = ModelSource::new(Box::new(model));
    let mut enc = Encoder::new(&params, &mut source, &payload)?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        if enc.is_done() {
            break;
        }
        out.push(enc.step()?.token);
    }
    Ok(out)
}

/// Histogram of the first stego token over `trials` independent encodes.
pub fn first_token_counts<R: Rng>(
    model: &SyntheticModel,
    list_bits: u32,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<u64>, CodecError> {
    let v = crate::dist::NextTokenModel::vocab_size(model);
    let mut counts = vec![0u64; v];
    for _ in 0..trials {
        let t = stego_prefix(model.clone(), list_bits, 1, rng)?;
        counts[t[0] as usize] += 1;
    }
    Ok(counts)
}

/// Exact probability of every length-`len` sequence, indexed in base `|V|`
/// with the first token most significant.
pub fn exact_sequence_distribution(model: &SyntheticModel, len: usize) -> Vec<f64> {
    let mut m = model.clone();
    let v = crate::dist::NextTokenModel::vocab_size(&m);
    let total = v.pow(len as u32);
    let mut probs = vec![0.0; total];
    for (idx, p) in probs.iter_mut().enumerate() {
        let seq = index_to_sequence(idx, v, len);
        let mut prob = 1.0;
        for i in 0..len {
            let d = crate::dist::NextTokenModel::distribution(&mut m, &seq[..i]).expect("synthetic");
            prob *= d.probability(seq[i]);
        }
        *p = prob;
    }
    probs
}

fn index_to_sequence(mut idx: usize, v: usize, len: usize) -> Vec<u32> {
    let mut seq = vec![0u32; len];
    for slot in seq.iter_mut().rev() {
        *slot = (idx % v) as u32;
        idx /= v;
    }
    seq
}

pub fn sequence_index(seq: &[u32], v: usize) -> usize {
    seq.iter().fold(0, |acc, &t| acc * v + t as usize)
}

/// Outcome of one encode/decode round trip.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub payload_len: usize,
    pub report: CapacityReport,
    /// `Ok(true)` recovered, `Ok(false)` decoded to a different payload.
    pub result: Result<bool, String>,
}

impl RoundTrip {
    pub fn recovered(&self) -> bool {
        matches!(self.result, Ok(true))
    }

    pub fn silent_corruption(&self) -> bool {
        matches!(self.result, Ok(false))
    }
}

pub fn round_trip(
    key: SecretKey,
    list_bits: u32,
    lambda: u32,
    make_model: &dyn Fn() -> SyntheticModel,
    payload: &BitString,
) -> Result<RoundTrip, CodecError> {
    let params = CodecParams::new(key.clone(), list_bits, lambda, SuffixLength::Auto);
    let mut enc_model = ModelSource::new(Box::new(make_model()));
    let trace = encode(&params, &mut enc_model, payload)?;
    let dec_params = CodecParams::new(key, list_bits, lambda, SuffixLength::Fixed(trace.suffix_bits));
    let mut dec_model = ModelSource::new(Box::new(make_model()));
    let result = match decode(&dec_params, &mut dec_model, &trace.tokens, payload.len()) {
        Ok(got) => Ok(got == *payload),
        Err(e) => Err(e.to_string()),
    };
    Ok(RoundTrip {
        payload_len: payload.len(),
        report: CapacityReport::from_trace(&trace),
        result,
    })
}

/// Log-uniform integer in `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    let x = rng.random_range((lo as f64).ln()..=(hi as f64).ln()).exp().round() as usize;
    x.clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn suite(name: &'static str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult {
        name,
        passed,
        detail,
    }
}

/// Runs every self-test suite at the given scale.
pub fn run(scale: Scale, seed: u64) -> Vec<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = scale == Scale::Full;
    let mut out = Vec::new();

    let b88 = suffix_length(60, 100, 20);
    let cb = collision_bound(20, 40, 20, 15);
    out.push(suite(
        "bounds",
        b88 == 88 && cb <= 2f64.powi(-20),
        format!("suffix_length(60,100,20)={b88} collision_bound(20,40,20,15)={cb:.4e}"),
    ));

    let samples = if full { 1_000_000 } else { 100_000 };
    let tv_limit = if full { 5e-3 } else { 1.5e-2 };
    for raw in [&[0.7, 0.2, 0.1][..], &[0.5, 0.25, 0.125, 0.125], &[0.9, 0.05, 0.03, 0.01, 0.01]] {
        let d = quantize(raw).expect("valid");
        let tv = alias_tv(&d, samples, &mut rng);
        out.push(suite("alias-tv", tv < tv_limit, format!("{raw:?} n={samples} tv={tv:.5}")));
    }

    let trials = if full { 100_000 } else { 5_000 };
    let models = [
        SyntheticModel::markov(&[vec![0.7, 0.2, 0.1], vec![0.7, 0.2, 0.1], vec![0.7, 0.2, 0.1]], Some(&[0.7, 0.2, 0.1])),
        SyntheticModel::peaked(8, 0.2, 3),
        SyntheticModel::temperature_profile(32, seed, 1.0, &[1.0]),
    ];
    for m in models {
        let m = m.expect("valid model");
        let d = crate::dist::NextTokenModel::distribution(&mut m.clone(), &[]).expect("synthetic");
        let res = first_token_counts(&m, 10, trials, &mut rng)
            .map_err(|e| e.to_string())
            .and_then(|c| chi_square_gof(&c, &d).map_err(|e| e.to_string()));
        match res {
            Ok(chi) => out.push(suite(
                "distribution-preservation",
                chi.p_value >= 0.001,
                format!(
                    "vocab={} encodes={trials} chi2={:.2} df={} p={:.4}",
                    d.vocab_size(),
                    chi.statistic,
                    chi.degrees_of_freedom,
                    chi.p_value
                ),
            )),
            Err(e) => out.push(suite("distribution-preservation", false, e)),
        }
    }

    let runs = if full { 100 } else { 10 };
    let max_len = if full { 2048 } else { 256 };
    let mut failures = 0;
    let mut below_bound = 0;
    let started = Instant::now();
    for i in 0..runs {
        let make: Box<dyn Fn() -> SyntheticModel> = match i % 3 {
            0 => Box::new(|| SyntheticModel::uniform(16).expect("valid")),
            1 => Box::new(|| SyntheticModel::peaked(16, 0.1, 0).expect("valid")),
            _ => Box::new(move || SyntheticModel::random_markov(8, seed).expect("valid")),
        };
        let len = log_uniform(&mut rng, 8, max_len);
        let payload = random_bits(&mut rng, len);
        match round_trip(random_key(&mut rng), 12, 40, make.as_ref(), &payload) {
            Ok(rt) => {
                failures += !rt.recovered() as usize;
                below_bound += !rt.report.meets_bound() as usize;
            }
            Err(_) => failures += 1,
        }
    }
    out.push(suite(
        "round-trip",
        failures == 0,
        format!(
            "{runs} payloads, {failures} failures, {:.1}s",
            started.elapsed().as_secs_f64()
        ),
    ));
    out.push(suite(
        "utilization-bound",
        below_bound == 0,
        format!("{below_bound} of {runs} encodes below the lower bound"),
    ));
    out
}
