//! Exact rational scalars, extended values, and exact random sampling.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Add;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand_core::RngCore;

/// Exact rational scalar used throughout the crate.
pub type Rat = num_rational::BigRational;

/// Shorthand for an integer-valued rational.
pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for the rational `n / d`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// `2^e` as an exact rational, for any sign of `e`.
pub fn pow2(e: i32) -> Rat {
    let p = BigInt::one() << e.unsigned_abs() as usize;
    if e >= 0 {
        Rat::from_integer(p)
    } else {
        Rat::new(BigInt::one(), p)
    }
}

/// Rounds `q` to the nearest multiple of `2^-bits` (ties away from zero).
pub fn truncate_bits(q: &Rat, bits: u32) -> Rat {
    let scale = BigInt::one() << bits as usize;
    let scaled = q * Rat::from_integer(scale.clone());
    Rat::new(scaled.round().to_integer(), scale)
}

/// Floor of `sqrt(q)` on the grid of multiples of `2^-bits`. Panics on
/// negative input.
pub fn sqrt_floor(q: &Rat, bits: u32) -> Rat {
    assert!(!q.is_negative(), "sqrt of negative rational");
    if q.is_zero() {
        return Rat::zero();
    }
    // floor(sqrt(num * 2^(2 bits) / den)) / 2^bits
    let num = q.numer().magnitude() << (2 * bits as usize);
    let den = q.denom().magnitude();
    let root = (num / den).sqrt();
    Rat::new(
        BigInt::from_biguint(Sign::Plus, root),
        BigInt::one() << bits as usize,
    )
}

/// Total bit size of numerator and denominator; a cheap complexity measure
/// used for diagnostics and default parameter choices.
pub fn bit_complexity(q: &Rat) -> u64 {
    q.numer().bits() + q.denom().bits()
}

/// An exact rational extended with explicit `±inf` sentinels.
///
/// The derived ordering puts `NegInf < Finite(_) < PosInf`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ext {
    NegInf,
    Finite(Rat),
    PosInf,
}

impl Ext {
    pub fn zero() -> Self {
        Ext::Finite(Rat::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    /// Finite payload, if any.
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Ext::Finite(q) => Some(q),
            _ => None,
        }
    }

    pub fn expect_finite(self, what: &str) -> Rat {
        match self {
            Ext::Finite(q) => q,
            other => panic!("expected finite value for {what}, got {other:?}"),
        }
    }
}

impl From<Rat> for Ext {
    fn from(q: Rat) -> Self {
        Ext::Finite(q)
    }
}

impl Add<&Rat> for Ext {
    type Output = Ext;

    fn add(self, rhs: &Rat) -> Ext {
        match self {
            Ext::Finite(q) => Ext::Finite(q + rhs),
            inf => inf,
        }
    }
}

impl core::fmt::Display for Ext {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Ext::NegInf => write!(f, "-inf"),
            Ext::Finite(q) => write!(f, "{q}"),
            Ext::PosInf => write!(f, "+inf"),
        }
    }
}

/// Uniform integer in `[0, n)` by rejection sampling on 64-bit chunks.
pub fn uniform_below(n: &BigUint, rng: &mut dyn RngCore) -> BigUint {
    assert!(!n.is_zero(), "uniform_below(0)");
    let bits = n.bits();
    loop {
        let mut words = Vec::new();
        let n_words = bits.div_ceil(64) as usize;
        for _ in 0..n_words {
            words.push(rng.next_u64());
        }
        let raw = BigUint::new(
            words
                .iter()
                .flat_map(|w| [*w as u32, (*w >> 32) as u32])
                .collect(),
        );
        // Mask down to `bits` bits so the acceptance probability is >= 1/2.
        let candidate = raw & ((BigUint::one() << bits) - 1u32);
        if &candidate < n {
            return candidate;
        }
    }
}

/// Exact Bernoulli draw with success probability `p` (clamped to `[0,1]`).
pub fn bernoulli(p: &Rat, rng: &mut dyn RngCore) -> bool {
    if p.is_negative() || p.is_zero() {
        return false;
    }
    if p >= &Rat::one() {
        return true;
    }
    let den = p.denom().magnitude().clone();
    let num = p.numer().magnitude().clone();
    uniform_below(&den, rng) < num
}

/// Exact categorical draw over nonnegative weights. Weights need not be
/// normalized; total weight must be positive.
pub fn pick_weighted(weights: &[Rat], rng: &mut dyn RngCore) -> usize {
    let total: Rat = weights.iter().fold(Rat::zero(), |a, w| a + w);
    assert!(total.is_positive(), "pick_weighted with zero total mass");
    // Common denominator so the draw is a single uniform integer.
    let common = weights
        .iter()
        .fold(total.denom().clone(), |acc, w| acc.lcm(w.denom()));
    let scaled_total = (&total * Rat::from_integer(common.clone())).to_integer();
    let draw = uniform_below(&scaled_total.magnitude().clone(), rng);
    let mut acc = BigUint::zero();
    for (idx, w) in weights.iter().enumerate() {
        let scaled = (w * Rat::from_integer(common.clone())).to_integer();
        acc += scaled.magnitude();
        if draw < acc {
            return idx;
        }
    }
    weights.len() - 1
}

/// Exact comparison helper: `a <= b`.
pub fn le(a: &Rat, b: &Rat) -> bool {
    matches!(a.cmp(b), Ordering::Less | Ordering::Equal)
}

/// Dot product of two equal-length rational vectors.
pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Rat::zero(), |acc, (x, y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha12Rng;
    use rand_core::SeedableRng;

    #[test]
    fn pow2_signs() {
        assert_eq!(pow2(3), int(8));
        assert_eq!(pow2(-2), rat(1, 4));
        assert_eq!(pow2(0), int(1));
    }

    #[test]
    fn truncate_rounds_to_grid() {
        let q = rat(1, 3);
        let t = truncate_bits(&q, 8);
        assert_eq!(t, rat(85, 256));
        assert_eq!(truncate_bits(&int(5), 16), int(5));
    }

    #[test]
    fn sqrt_floor_brackets_root() {
        let q = rat(2, 1);
        let s = sqrt_floor(&q, 64);
        assert!(&s * &s <= q);
        let step = pow2(-64);
        let s_up = &s + &step;
        assert!(&s_up * &s_up > q);
    }

    #[test]
    fn ext_ordering() {
        assert!(Ext::NegInf < Ext::Finite(int(-1000)));
        assert!(Ext::Finite(int(1000)) < Ext::PosInf);
        assert!(Ext::Finite(rat(1, 2)) < Ext::Finite(int(1)));
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        assert!(!bernoulli(&Rat::zero(), &mut rng));
        assert!(bernoulli(&int(1), &mut rng));
    }

    #[test]
    fn bernoulli_frequency() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let p = rat(1, 3);
        let n = 30_000;
        let hits = (0..n).filter(|_| bernoulli(&p, &mut rng)).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 1.0 / 3.0).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn pick_weighted_frequency() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let weights = [rat(1, 2), rat(1, 6), rat(1, 3)];
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            counts[pick_weighted(&weights, &mut rng)] += 1;
        }
        use num_traits::ToPrimitive;
        for (c, w) in counts.iter().zip(&weights) {
            let target = w.to_f64().unwrap();
            assert!((*c as f64 / n as f64 - target).abs() < 0.015);
        }
    }

    #[test]
    fn uniform_below_is_uniform_small() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = BigUint::from(5u32);
        let mut counts = [0usize; 5];
        for _ in 0..25_000 {
            let d: usize = uniform_below(&n, &mut rng).try_into().unwrap();
            counts[d] += 1;
        }
        for c in counts {
            assert!((c as f64 / 25_000.0 - 0.2).abs() < 0.02);
        }
    }
}
