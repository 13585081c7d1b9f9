//! Per-round random communication matching.
//!
//! Each round, `k = 2 * floor(gamma * m / 2)` of the `m` surviving agents are
//! chosen uniformly at random and paired by a uniformly random perfect
//! matching; everyone else is unmatched. The minimal even count is the
//! adversary-friendliest reading of "at least a gamma fraction"; a switch
//! selects a uniformly random fraction in `[gamma, 1]` instead for
//! robustness experiments.

use crate::params::Rational;
use crate::rng::CoinStream;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;

/// How the matched fraction is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchFraction {
    /// Exactly the minimal even count `2 * floor(gamma * m / 2)`.
    #[default]
    Exact,
    /// A fraction drawn uniformly from `[gamma, 1]` each round.
    UniformRandom,
}

/// One round's communication structure over agent handles of type `H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching<H> {
    /// Disjoint unordered pairs.
    pub pairs: Vec<(H, H)>,
    /// Handles not matched this round.
    pub unmatched: Vec<H>,
}

/// Number of agents to match: the minimal even count covering at least a
/// `fraction` share of `m` agents.
fn matched_count(m: usize, fraction: Rational) -> usize {
    // 2 * floor(f * m / 2), computed exactly in integers.
    let num = fraction.numer() * m as u64;
    let den = fraction.denom() * 2;
    (2 * (num / den)) as usize
}

/// Shuffle `handles` in place so that the suffix `handles[m - k..]` is a
/// uniform ordered selection of `k` elements, and return `k`. Pairing
/// consecutive suffix elements yields a uniformly random perfect matching on
/// a uniformly random `k`-subset (a uniform ordered tuple collapses onto
/// each matching the same number of ways). Returns 0 for populations of
/// size 0 or 1.
///
/// The shuffled region is the suffix because Durstenfeld's partial
/// Fisher-Yates locks elements in from the back; the prefix is leftover
/// state and must not be interpreted as a sample.
pub fn sample_pairs_in_place<H>(
    handles: &mut [H],
    gamma: Rational,
    mode: MatchFraction,
    rng: &mut CoinStream,
) -> usize {
    let m = handles.len();
    if m < 2 {
        return 0;
    }
    let fraction = match mode {
        MatchFraction::Exact => gamma,
        MatchFraction::UniformRandom => {
            let lo = gamma.to_f64().expect("gamma fits in f64");
            let f = rng.rng_mut().gen_range(lo..=1.0);
            // Denominator 2^32 keeps the draw exact as a rational.
            let num = (f * 4_294_967_296.0) as u64;
            Rational::new(num.min(4_294_967_296), 4_294_967_296)
        }
    };
    let k = matched_count(m, fraction);
    let (shuffled, _) = handles.partial_shuffle(rng.rng_mut(), k);
    debug_assert_eq!(shuffled.len(), k);
    k
}

/// Sample one round's matching over the given handles.
pub fn sample_matching<H: Copy>(
    handles: &[H],
    gamma: Rational,
    rng: &mut CoinStream,
) -> Matching<H> {
    sample_matching_with(handles, gamma, MatchFraction::Exact, rng)
}

/// As [`sample_matching`] with an explicit fraction mode.
pub fn sample_matching_with<H: Copy>(
    handles: &[H],
    gamma: Rational,
    mode: MatchFraction,
    rng: &mut CoinStream,
) -> Matching<H> {
    let mut scratch: Vec<H> = handles.to_vec();
    let k = sample_pairs_in_place(&mut scratch, gamma, mode, rng);
    let start = scratch.len() - k;
    let pairs = scratch[start..]
        .chunks_exact(2)
        .map(|c| (c[0], c[1]))
        .collect();
    Matching {
        pairs,
        unmatched: scratch[..start].to_vec(),
    }
}
