//! Suffix-length and decoding-collision bounds.

use astro_float::{BigFloat, Consts, RoundingMode};

const PRECISION: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

/// Per-step filtering slack `sqrt(lambda / 2^N)`.
pub fn filter_slack(lambda: u32, list_bits: u32) -> f64 {
    (lambda as f64 / 2f64.powi(list_bits as i32)).sqrt()
}

fn suffix_length_exact(lambda: u32, n_estimate: u64, list_bits: u32) -> BigFloat {
    let mut cc = Consts::new().expect("astro-float constants");
    let lam = BigFloat::from_u64(lambda as u64, PRECISION);
    let log2e = cc.e(PRECISION, RM).log2(PRECISION, RM, &mut cc);
    let grid = BigFloat::from_u64(1u64 << list_bits, PRECISION);
    let slack = lam.div(&grid, PRECISION, RM).sqrt(PRECISION, RM);
    let growth = BigFloat::from_u64(1, PRECISION)
        .add(&slack, PRECISION, RM)
        .log2(PRECISION, RM, &mut cc)
        .mul(&BigFloat::from_u64(n_estimate, PRECISION), PRECISION, RM);
    lam.mul(&log2e, PRECISION, RM).add(&growth, PRECISION, RM)
}

/// Smallest suffix length `b` with
/// `b >= lambda*log2(e) + n*log2(1 + sqrt(lambda / 2^N))`.
///
/// A double-precision estimate locates the answer; the ceiling itself is
/// decided by comparisons at 192-bit precision.
pub fn suffix_length(lambda: u32, n_estimate: u64, list_bits: u32) -> usize {
    let approx = lambda as f64 * std::f64::consts::LOG2_E
        + n_estimate as f64 * filter_slack(lambda, list_bits).ln_1p() / std::f64::consts::LN_2;
    let exact = suffix_length_exact(lambda, n_estimate, list_bits);
    let mut k = (approx.ceil() as u64).saturating_sub(2);
    loop {
        let candidate = BigFloat::from_u64(k, PRECISION);
        if candidate.cmp(&exact).is_some_and(|c| c >= 0) {
            return k as usize;
        }
        k += 1;
    }
}

/// Upper bound on the chance that a given wrong candidate survives with the
/// full suffix: `2^-b / (1 + sqrt(lambda / 2^N))^n`.
pub fn collision_bound(suffix_bits: usize, lambda: u32, list_bits: u32, n: u64) -> f64 {
    let ln = suffix_bits as f64 * std::f64::consts::LN_2
        + n as f64 * filter_slack(lambda, list_bits).ln_1p();
    (-ln).exp()
}
