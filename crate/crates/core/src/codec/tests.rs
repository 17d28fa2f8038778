use super::*;
use crate::dist::SyntheticModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn key(seed: u8) -> SecretKey {
    SecretKey::from_bytes([seed; 32])
}

fn source(m: SyntheticModel) -> ModelSource {
    ModelSource::new(Box::new(m))
}

fn bits(s: &str) -> BitString {
    s.parse().unwrap()
}

fn random_payload(rng: &mut ChaCha8Rng, len: usize) -> BitString {
    BitString::from_bools((0..len).map(|_| rng.random::<bool>()))
}

/// Straight transcription of the encoder over an explicit list of strings.
fn naive_encode(
    key: &SecretKey,
    n: u32,
    b: usize,
    payload: &BitString,
    mut model: ModelSource,
) -> Vec<u32> {
    let suf = PrgStream::new(key, Domain::Suffix).next_bits(b).unwrap();
    let m = BitString::concat(payload, &suf);
    let mut sampling = PrgStream::new(key, Domain::Sampling);
    let mut list: Vec<BitString> = (0..1u64 << n).map(|v| BitString::from_u64(v, n)).collect();
    let mut l = n as usize;
    let mut out = Vec::new();
    while l <= m.len() {
        let d = model.next_distribution().unwrap();
        let table = AliasTable::build(&d);
        let samples: Vec<u32> = list
            .iter()
            .map(|_| {
                let pair = [sampling.next_u64().unwrap(), sampling.next_u64().unwrap()];
                table.sample_batch(&pair)[0]
            })
            .collect();
        let target = m.prefix(l).unwrap();
        let idx = list.iter().position(|x| *x == target).expect("true prefix present");
        let tok = samples[idx];
        out.push(tok);
        model.append_history(tok).unwrap();
        list = list
            .into_iter()
            .zip(&samples)
            .filter(|(_, &s)| s == tok)
            .map(|(x, _)| x)
            .collect();
        while list.len() <= 1 << (n - 1) {
            list = list
                .iter()
                .flat_map(|x| {
                    [false, true].map(|bit| {
                        let mut y = x.clone();
                        y.push(bit);
                        y
                    })
                })
                .collect();
            l += 1;
        }
    }
    out
}

#[test]
fn match_suffix_cases() {
    let m_star = bits("1011");
    let suf = bits("001");
    let single = CandidateList::from_members(&[bits("1011001")]).unwrap();
    assert_eq!(match_suffix(&single, 4, &suf).unwrap(), m_star);

    let overshoot = CandidateList::from_members(&[bits("10110010"), bits("10110011")]).unwrap();
    assert_eq!(match_suffix(&overshoot, 4, &suf).unwrap(), m_star);

    let conflict = CandidateList::from_members(&[bits("0111001"), bits("1011001")]).unwrap();
    assert!(matches!(
        match_suffix(&conflict, 4, &suf),
        Err(CodecError::Ambiguous { candidates: 2 })
    ));

    let none = CandidateList::from_members(&[bits("1011000"), bits("1011111")]).unwrap();
    assert!(matches!(match_suffix(&none, 4, &suf), Err(CodecError::NoMatch)));

    // Non-matching members may disagree freely.
    let mixed = CandidateList::from_members(&[bits("0000000"), bits("1011001")]).unwrap();
    assert_eq!(match_suffix(&mixed, 4, &suf).unwrap(), m_star);
}

#[test]
fn peaked_model_matches_explicit_set_oracle() {
    let params = CodecParams::new(key(3), 4, 40, SuffixLength::Fixed(4));
    let model = || source(SyntheticModel::peaked(4, 0.05, 0).unwrap());
    for p in ["10110011", "00000000", "11111111", "01011100"] {
        let payload = bits(p);
        let want = naive_encode(&params.key, 4, 4, &payload, model());
        let trace = encode(&params, &mut model(), &payload).unwrap();
        assert_eq!(trace.tokens, want, "payload {p}");
        assert_eq!(trace.steps, want.len());
        assert_eq!(decode(&params, &mut model(), &trace.tokens, 8).unwrap(), payload);
    }
}

#[test]
fn markov_and_uniform_match_explicit_set_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..12 {
        let n = 2 + case % 5;
        let b = 20 + case as usize % 7;
        let len = rng.random_range(n as usize..40);
        let payload = random_payload(&mut rng, len);
        let k = key(case as u8);
        let params = CodecParams::new(k.clone(), n, 40, SuffixLength::Fixed(b));
        let mk = || {
            if case % 2 == 0 {
                source(SyntheticModel::random_markov(5, case as u64).unwrap())
            } else {
                source(SyntheticModel::uniform(3).unwrap())
            }
        };
        let want = naive_encode(&k, n, b, &payload, mk());
        let trace = encode(&params, &mut mk(), &payload).unwrap();
        assert_eq!(trace.tokens, want, "case {case}");
        assert_eq!(decode(&params, &mut mk(), &trace.tokens, len).unwrap(), payload);
    }
}

#[test]
fn certain_token_never_terminates() {
    let params =
        CodecParams::new(key(1), 4, 40, SuffixLength::Fixed(4)).with_max_tokens(200);
    let mut model = source(SyntheticModel::peaked(3, 0.0, 1).unwrap());
    match encode(&params, &mut model, &bits("10101010")) {
        Err(CodecError::TokenLimit { limit, partial }) => {
            assert_eq!(limit, 200);
            assert_eq!(partial.tokens.len(), 200);
            assert!(partial.tokens.iter().all(|&t| t == 1));
            assert!(partial.weights.iter().all(|&w| w == GRID_FULL));
        }
        other => panic!("expected token limit, got {other:?}"),
    }
}

const GRID_FULL: u64 = crate::dist::GRID;

#[test]
fn encoder_and_decoder_states_agree_every_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100u64 {
        let n = rng.random_range(1..=10);
        let b = rng.random_range(24..40);
        let len = rng.random_range(1..200).max(n as usize);
        let payload = random_payload(&mut rng, len);
        let mut kb = [0u8; 32];
        rng.fill(&mut kb);
        let params = CodecParams::new(SecretKey::from_bytes(kb), n, 40, SuffixLength::Fixed(b));
        let vocab = rng.random_range(2..40);
        let mk = || source(SyntheticModel::temperature_profile(vocab, case, 1.0, &[0.5, 1.0, 2.0]).unwrap());
        let (mut m1, mut m2) = (mk(), mk());
        let mut enc = Encoder::new(&params, &mut m1, &payload).unwrap();
        let mut dec = Decoder::new(&params, &mut m2, len).unwrap();
        while !enc.is_done() {
            assert!(!dec.is_done());
            let a = enc.step().unwrap();
            let bstep = dec.step(a.token).unwrap();
            assert_eq!(a, bstep);
            assert!(a.list_after_filter >= 1);
            let cap = 1usize << n;
            assert!(enc.candidates().len() > cap / 2 && enc.candidates().len() <= cap);
            if case % 10 == 0 {
                assert_eq!(enc.candidates().members(), dec.candidates().members());
            }
            let l = enc.candidates().bit_length();
            if l <= enc.message().len() {
                assert!(enc.candidates().position_of(&enc.message().prefix(l).unwrap()).is_some());
            }
        }
        assert!(dec.is_done());
        assert_eq!(dec.finish().unwrap(), payload);
    }
}

#[test]
fn auto_suffix_equals_direct_encode_with_final_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..6u64 {
        let payload = random_payload(&mut rng, 64 + 50 * case as usize);
        let auto = CodecParams::new(key(9), 12, 40, SuffixLength::Auto);
        let mk = || source(SyntheticModel::random_markov(8, case).unwrap());
        let trace = encode(&auto, &mut mk(), &payload).unwrap();
        assert_eq!(
            trace.suffix_bits,
            suffix_length(40, trace.suffix_tokens as u64, 12),
            "b is minimal for the realized suffix token count"
        );
        let fixed = CodecParams::new(key(9), 12, 40, SuffixLength::Fixed(trace.suffix_bits));
        let direct = encode(&fixed, &mut mk(), &payload).unwrap();
        assert_eq!(direct, trace);
        assert_eq!(decode(&fixed, &mut mk(), &trace.tokens, payload.len()).unwrap(), payload);
    }
}

#[test]
fn decode_errors() {
    let params = CodecParams::new(key(2), 10, 40, SuffixLength::Fixed(30));
    let mk = || source(SyntheticModel::uniform(16).unwrap());
    let payload = random_payload(&mut ChaCha8Rng::seed_from_u64(1), 100);
    let trace = encode(&params, &mut mk(), &payload).unwrap();
    let toks = &trace.tokens;

    let short = &toks[..toks.len() - 1];
    assert!(matches!(
        decode(&params, &mut mk(), short, 100),
        Err(CodecError::Truncated { consumed }) if consumed == toks.len() - 1
    ));

    let mut extra = toks.clone();
    extra.extend([1, 2, 3]);
    assert_eq!(decode(&params, &mut mk(), &extra, 100).unwrap(), payload);

    let wrong = CodecParams::new(key(3), 10, 40, SuffixLength::Fixed(30));
    assert!(decode(&wrong, &mut mk(), toks, 100).is_err());

    let mut bad = toks.clone();
    bad[0] = 99;
    assert!(matches!(decode(&params, &mut mk(), &bad, 100), Err(CodecError::Desync { step: 0 })));

    assert!(matches!(decode(&params, &mut mk(), &[], 100), Err(CodecError::InvalidInput(_))));
    assert!(matches!(decode(&params, &mut mk(), toks, 0), Err(CodecError::InvalidInput(_))));
    let auto = CodecParams::new(key(2), 10, 40, SuffixLength::Auto);
    assert!(matches!(decode(&auto, &mut mk(), toks, 100), Err(CodecError::InvalidInput(_))));
}

#[test]
fn encode_rejects_bad_input() {
    let mk = || source(SyntheticModel::uniform(4).unwrap());
    let ok = CodecParams::new(key(0), 8, 40, SuffixLength::Fixed(0));
    assert!(matches!(encode(&ok, &mut mk(), &BitString::new()), Err(CodecError::InvalidInput(_))));
    assert!(matches!(encode(&ok, &mut mk(), &bits("1010")), Err(CodecError::InvalidInput(_))));
    assert!(encode(&ok, &mut mk(), &bits("10101010")).is_ok());
    for n in [0, MAX_LIST_BITS + 1] {
        let p = CodecParams::new(key(0), n, 40, SuffixLength::Fixed(64));
        assert!(matches!(encode(&p, &mut mk(), &bits("1")), Err(CodecError::InvalidInput(_))));
    }
}

#[test]
fn suffix_tokens_count_steps_started_inside_suffix() {
    let params = CodecParams::new(key(4), 8, 40, SuffixLength::Fixed(40));
    let mut m = source(SyntheticModel::uniform(4).unwrap());
    let payload = random_payload(&mut ChaCha8Rng::seed_from_u64(2), 64);
    let mut enc = Encoder::new(&params, &mut m, &payload).unwrap();
    let mut inside = 0;
    while !enc.is_done() {
        let l = enc.candidates().bit_length();
        enc.step().unwrap();
        inside += (l > 64) as usize;
    }
    let t = enc.into_trace();
    assert_eq!(t.suffix_tokens, inside);
    assert!(inside > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn round_trip(
        seed in any::<u64>(),
        n in 1u32..=9,
        b in 0usize..40,
        len in 1usize..300,
        vocab in 2usize..20,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = len.max(n as usize);
        let payload = random_payload(&mut rng, len);
        let mut kb = [0u8; 32];
        rng.fill(&mut kb);
        let params = CodecParams::new(SecretKey::from_bytes(kb), n, 40, SuffixLength::Fixed(b));
        let mk = || source(SyntheticModel::random_markov(vocab, seed).unwrap());
        let trace = encode(&params, &mut mk(), &payload).unwrap();
        prop_assert_eq!(trace.tokens.len(), trace.weights.len());
        prop_assert!(trace.weights.iter().all(|&w| w >= 1));
        match decode(&params, &mut mk(), &trace.tokens, len) {
            Ok(got) => prop_assert_eq!(got, payload),
            // Short suffixes may legitimately collide; never a wrong payload.
            Err(CodecError::Ambiguous { .. }) => prop_assert!(b < 24),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
