//! Simulation parameters: validation of the free model parameters and
//! derivation of every protocol constant from them.
//!
//! The free parameters are the target population `N`, the matched-fraction
//! lower bound `gamma`, the per-round adversary budget `K`, the interval
//! half-width `alpha` and (optionally) the subphase length `t_inner`.
//! Everything else — epoch length, coin exponents, the reported state
//! count — is derived and never read from a config file.

use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact rational used for `gamma` and `alpha`.
pub type Rational = Ratio<u64>;

/// Validation errors for the free parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    /// `log2(n_target)` must be an even integer so that every coin exponent
    /// is a positive integer.
    #[error("n_target must be a power of four (log2 even), got {0}")]
    NotPowerOfFour(u64),
    #[error("n_target must be at least 2^12 = 4096, got {0}")]
    BelowMinimum(u64),
    #[error("gamma must lie in (0, 1], got {0}")]
    GammaOutOfRange(Rational),
    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaOutOfRange(Rational),
    /// Subphase lengths of `O(log N)` rounds break the recruitment analysis;
    /// anything at or below `log2(N) * log2(log2(N))` is rejected outright.
    #[error("t_inner = {t_inner} too small: need more than log2(N)*log2(log2(N)) ~= {min_exclusive:.1}")]
    TInnerTooSmall { t_inner: u32, min_exclusive: f64 },
}

/// Emitted when a caller-supplied `t_inner` is accepted but shorter than the
/// default `log2(N)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TInnerWarning {
    pub t_inner: u32,
    pub default: u32,
}

impl std::fmt::Display for TInnerWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "t_inner = {} is below the default log2(N)^2 = {}; accepted, but subphases this \
             short weaken the recruitment-completion margin",
            self.t_inner, self.default
        )
    }
}

/// The free parameters as supplied by the caller; `t_inner` defaults to
/// `log2(n_target)^2` when absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSimParams {
    pub n_target: u64,
    pub gamma: Rational,
    pub adversary_budget: u64,
    pub alpha: Rational,
    pub t_inner: Option<u32>,
}

/// Fully derived simulation parameters. Construct via [`validate_and_derive`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimParams {
    /// Target population N. Always a power of four, at least 2^12.
    pub n_target: u64,
    /// Lower bound on the matched fraction per round, in (0, 1].
    pub gamma: Rational,
    /// Adversary budget K: maximum alterations per round.
    pub adversary_budget: u64,
    /// Half-width of the allowed population interval, in (0, 1).
    pub alpha: Rational,
    /// Subphase length in rounds.
    pub t_inner: u32,
    /// Epoch length T = t_inner * (1/2) log2(N). Derived.
    pub epoch_length: u32,
    /// Leaders self-select with probability 2^-leader_exponent = 1/(8 sqrt(N)).
    pub leader_exponent: u32,
    /// Matched same-color agents stay (do not split) with probability
    /// 2^-split_exponent = 16/sqrt(N).
    pub split_exponent: u32,
    /// Reported number of distinct reachable agent states M: the round
    /// register (epoch_length values) times the eight boolean registers
    /// (four protocol flags plus the four components of the last received
    /// message). Reported only, never enforced.
    pub state_count_report: u64,
}

impl SimParams {
    /// log2(N); an even integer >= 12 by construction.
    pub fn log2_n(&self) -> u32 {
        self.n_target.trailing_zeros()
    }

    /// (1/2) log2(N).
    pub fn half_log2_n(&self) -> u32 {
        self.log2_n() / 2
    }

    /// sqrt(N), exact because log2(N) is even.
    pub fn sqrt_n(&self) -> u64 {
        1u64 << self.half_log2_n()
    }

    /// Inclusive integer bounds of the allowed interval [(1-alpha)N, (1+alpha)N].
    /// A population size outside these bounds is a violation.
    pub fn violation_bounds(&self) -> (u64, u64) {
        let n = Rational::from_integer(self.n_target);
        let lo = (Rational::one() - self.alpha) * n;
        let hi = (Rational::one() + self.alpha) * n;
        (lo.ceil().to_integer(), hi.floor().to_integer())
    }

    /// The free-parameter view of these params.
    pub fn raw(&self) -> RawSimParams {
        RawSimParams {
            n_target: self.n_target,
            gamma: self.gamma,
            adversary_budget: self.adversary_budget,
            alpha: self.alpha,
            t_inner: Some(self.t_inner),
        }
    }
}

/// Parse an exact rational from `"1/2"`, `"0.25"` or `"1"` forms.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let s = text.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: u64 = num.trim().parse().map_err(|_| format!("bad numerator in '{s}'"))?;
        let d: u64 = den.trim().parse().map_err(|_| format!("bad denominator in '{s}'"))?;
        if d == 0 {
            return Err(format!("zero denominator in '{s}'"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int_part: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| format!("bad integer part in '{s}'"))?
        };
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal '{s}'"));
        }
        let digits: u64 = frac.parse().map_err(|_| format!("bad decimal '{s}'"))?;
        let scale = 10u64.pow(frac.len() as u32);
        return Ok(Rational::new(int_part * scale + digits, scale));
    }
    let n: u64 = s.parse().map_err(|_| format!("bad rational '{s}'"))?;
    Ok(Rational::from_integer(n))
}

/// Default subphase length, `log2(N)^2`.
pub fn default_t_inner(n_target: u64) -> u32 {
    let l = n_target.trailing_zeros();
    l * l
}

/// Returns a warning if `t_inner` is accepted but below the default.
pub fn t_inner_warning(n_target: u64, t_inner: u32) -> Option<TInnerWarning> {
    let default = default_t_inner(n_target);
    (t_inner < default).then_some(TInnerWarning { t_inner, default })
}

/// Validate the free parameters and fill in all derived fields.
///
/// Deriving twice is idempotent: `validate_and_derive(&p.raw())` returns `p`
/// for any `p` this function produced.
pub fn validate_and_derive(raw: &RawSimParams) -> Result<SimParams, ParamError> {
    let n = raw.n_target;
    if !n.is_power_of_two() || !n.trailing_zeros().is_multiple_of(2) {
        return Err(ParamError::NotPowerOfFour(n));
    }
    if n < 1 << 12 {
        return Err(ParamError::BelowMinimum(n));
    }
    if raw.gamma <= Rational::zero() || raw.gamma > Rational::one() {
        return Err(ParamError::GammaOutOfRange(raw.gamma));
    }
    if raw.alpha <= Rational::zero() || raw.alpha >= Rational::one() {
        return Err(ParamError::AlphaOutOfRange(raw.alpha));
    }

    let l = n.trailing_zeros();
    let t_inner = raw.t_inner.unwrap_or_else(|| default_t_inner(n));
    let min_exclusive = f64::from(l) * f64::from(l).log2();
    if f64::from(t_inner) <= min_exclusive {
        return Err(ParamError::TInnerTooSmall {
            t_inner,
            min_exclusive,
        });
    }
    if let Some(w) = t_inner_warning(n, t_inner) {
        log::warn!("{w}");
    }

    let epoch_length = t_inner * (l / 2);
    Ok(SimParams {
        n_target: n,
        gamma: raw.gamma,
        adversary_budget: raw.adversary_budget,
        alpha: raw.alpha,
        t_inner,
        epoch_length,
        leader_exponent: 3 + l / 2,
        split_exponent: l / 2 - 4,
        state_count_report: u64::from(epoch_length) << 8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: u64) -> RawSimParams {
        RawSimParams {
            n_target: n,
            gamma: Rational::new(1, 2),
            adversary_budget: 0,
            alpha: Rational::new(1, 10),
            t_inner: None,
        }
    }

    #[test]
    fn derives_constants_at_2_16() {
        let p = validate_and_derive(&raw(1 << 16)).unwrap();
        assert_eq!(p.t_inner, 256);
        assert_eq!(p.epoch_length, 2048); // 256 * 8
        assert_eq!(p.leader_exponent, 11); // 1/(8 sqrt(N)) = 2^-11
        assert_eq!(p.split_exponent, 4); // 16/sqrt(N) = 2^-4
        assert_eq!(p.sqrt_n(), 256);
    }

    #[test]
    fn derives_constants_at_2_12() {
        let p = validate_and_derive(&raw(1 << 12)).unwrap();
        assert_eq!(p.t_inner, 144);
        assert_eq!(p.epoch_length, 864); // 144 * 6
        assert_eq!(p.leader_exponent, 9);
        assert_eq!(p.split_exponent, 2);
    }

    #[test]
    fn rejects_odd_log2() {
        assert_eq!(
            validate_and_derive(&raw(1 << 15)),
            Err(ParamError::NotPowerOfFour(1 << 15))
        );
    }

    #[test]
    fn rejects_small_populations() {
        assert_eq!(
            validate_and_derive(&raw(1 << 10)),
            Err(ParamError::BelowMinimum(1 << 10))
        );
    }

    #[test]
    fn rejects_bad_gamma_and_alpha() {
        let mut r = raw(1 << 12);
        r.gamma = Rational::new(3, 2);
        assert!(matches!(
            validate_and_derive(&r),
            Err(ParamError::GammaOutOfRange(_))
        ));
        let mut r = raw(1 << 12);
        r.alpha = Rational::one();
        assert!(matches!(
            validate_and_derive(&r),
            Err(ParamError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn short_t_inner_warns_but_derives() {
        // log2(N) * log2(log2(N)) = 12 * 3.58 ~= 43; 100 is fine but below 144.
        let mut r = raw(1 << 12);
        r.t_inner = Some(100);
        let p = validate_and_derive(&r).unwrap();
        assert_eq!(p.epoch_length, 600);
        assert!(t_inner_warning(1 << 12, 100).is_some());
        assert!(t_inner_warning(1 << 12, 144).is_none());
    }

    #[test]
    fn tiny_t_inner_rejected() {
        let mut r = raw(1 << 12);
        r.t_inner = Some(43);
        assert!(matches!(
            validate_and_derive(&r),
            Err(ParamError::TInnerTooSmall { .. })
        ));
    }

    #[test]
    fn derive_is_idempotent() {
        let p = validate_and_derive(&raw(1 << 14)).unwrap();
        let again = validate_and_derive(&p.raw()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn violation_bounds_are_inclusive_integers() {
        let p = validate_and_derive(&raw(1 << 16)).unwrap();
        let (lo, hi) = p.violation_bounds();
        assert_eq!(lo, 58983); // ceil(0.9 * 65536) = ceil(58982.4)
        assert_eq!(hi, 72089); // floor(1.1 * 65536) = floor(72089.6)
    }
}
