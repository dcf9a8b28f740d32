//! Lower reals, upper reals, and Sierpinski bits.
//!
//! A lower real is a value in [ -inf, +inf ] known only through a monotone
//! nondecreasing stream of rational lower bounds; the represented value is
//! the supremum over all stages. Stages are computed on demand and memoized,
//! and monotonicity is enforced by construction (each stage is maxed with its
//! predecessor), so no client can observe a decreasing stream.

use super::interval::DyadicInterval;
use super::rational::{pow2, Rational};
use crate::error::{Error, Result};
use num_traits::Zero;
use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, Mutex};

/// A single stage bound: -inf is the "no information yet" sentinel, +inf the
/// top element of the lower-real line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl Bound {
    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Bound::Finite(q) => Some(q),
            _ => None,
        }
    }

    fn cmp_bound(&self, other: &Bound) -> Ordering {
        use Bound::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }

    pub fn max_bound(self, other: Bound) -> Bound {
        if self.cmp_bound(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn min_bound(self, other: Bound) -> Bound {
        if self.cmp_bound(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    fn add(&self, other: &Bound) -> Bound {
        use Bound::*;
        match (self, other) {
            (NegInf, _) | (_, NegInf) => NegInf,
            (PosInf, _) | (_, PosInf) => PosInf,
            (Finite(a), Finite(b)) => Finite(a.clone() + b.clone()),
        }
    }

    /// Product for the nonnegative cone with the 0 * inf = 0 convention.
    /// Negative stage bounds are clamped to 0 first: a lower bound below 0
    /// carries no information about a value known to lie in [0, inf].
    fn mul_nonneg(&self, other: &Bound) -> Bound {
        use Bound::*;
        let clamp = |b: &Bound| -> Bound {
            match b {
                NegInf => Finite(Rational::zero()),
                Finite(q) if q < &Rational::zero() => Finite(Rational::zero()),
                other => other.clone(),
            }
        };
        match (clamp(self), clamp(other)) {
            (Finite(a), Finite(b)) => Finite(a * b),
            (PosInf, Finite(b)) | (Finite(b), PosInf) => {
                if b.is_zero() {
                    Finite(Rational::zero())
                } else {
                    PosInf
                }
            }
            (PosInf, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => unreachable!("clamped"),
        }
    }
}

struct Stream {
    f: Box<dyn Fn(u32) -> Bound + Send + Sync>,
    cache: Mutex<Vec<Bound>>,
}

impl Stream {
    /// Evaluates stage n, forcing monotonicity against the cached prefix.
    fn at(&self, n: u32, increasing: bool) -> Bound {
        let mut cache = self.cache.lock().unwrap();
        while cache.len() <= n as usize {
            let i = cache.len() as u32;
            let raw = (self.f)(i);
            let next = match cache.last() {
                None => raw,
                Some(prev) => {
                    if increasing {
                        raw.max_bound(prev.clone())
                    } else {
                        raw.min_bound(prev.clone())
                    }
                }
            };
            cache.push(next);
        }
        cache[n as usize].clone()
    }
}

/// A value in [-inf, +inf] approximated from below.
#[derive(Clone)]
pub struct LowerReal {
    stream: Arc<Stream>,
}

impl fmt::Debug for LowerReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LowerReal(stage24 >= {:?})", self.approx(24))
    }
}

impl LowerReal {
    /// Default stage budget used when a supremum has to be truncated and the
    /// caller does not say how far to look.
    pub const DEFAULT_STAGE_BUDGET: u32 = 24;

    pub fn from_fn(f: impl Fn(u32) -> Bound + Send + Sync + 'static) -> Self {
        LowerReal {
            stream: Arc::new(Stream {
                f: Box::new(f),
                cache: Mutex::new(Vec::new()),
            }),
        }
    }

    pub fn constant(q: Rational) -> Self {
        Self::from_fn(move |_| Bound::Finite(q.clone()))
    }

    pub fn zero() -> Self {
        Self::constant(Rational::zero())
    }

    pub fn infinity() -> Self {
        Self::from_fn(|_| Bound::PosInf)
    }

    /// The monotone stage-n lower bound.
    pub fn approx(&self, n: u32) -> Bound {
        self.stream.at(n, true)
    }

    /// Stage-n bound as a rational, with the -inf sentinel mapped to the
    /// supplied floor. Handy when the value is known nonnegative.
    pub fn approx_rational(&self, n: u32, floor: Rational) -> Rational {
        match self.approx(n) {
            Bound::Finite(q) => q.max(floor),
            Bound::NegInf => floor,
            Bound::PosInf => panic!("approx_rational on an infinite lower real"),
        }
    }
}

/// A value approximated from above (monotone nonincreasing upper bounds).
#[derive(Clone)]
pub struct UpperReal {
    stream: Arc<Stream>,
}

impl fmt::Debug for UpperReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UpperReal(stage24 <= {:?})", self.approx(24))
    }
}

impl UpperReal {
    pub fn from_fn(f: impl Fn(u32) -> Bound + Send + Sync + 'static) -> Self {
        UpperReal {
            stream: Arc::new(Stream {
                f: Box::new(f),
                cache: Mutex::new(Vec::new()),
            }),
        }
    }

    pub fn constant(q: Rational) -> Self {
        Self::from_fn(move |_| Bound::Finite(q.clone()))
    }

    pub fn approx(&self, n: u32) -> Bound {
        self.stream.at(n, false)
    }

    pub fn approx_rational(&self, n: u32, ceil: Rational) -> Rational {
        match self.approx(n) {
            Bound::Finite(q) => q.min(ceil),
            Bound::PosInf => ceil,
            Bound::NegInf => panic!("approx_rational on a -inf upper real"),
        }
    }
}

/// Semi-decidable truth: confirmable at a finite stage, never refutable.
#[derive(Clone)]
pub struct SierpinskiBit {
    probe: Arc<dyn Fn(u32) -> bool + Send + Sync>,
}

impl SierpinskiBit {
    pub fn from_fn(f: impl Fn(u32) -> bool + Send + Sync + 'static) -> Self {
        SierpinskiBit { probe: Arc::new(f) }
    }

    pub fn never() -> Self {
        Self::from_fn(|_| false)
    }

    pub fn confirmed_at(stage: u32) -> Self {
        Self::from_fn(move |n| n >= stage)
    }

    /// True once confirmed by some stage <= n.
    pub fn probe(&self, n: u32) -> bool {
        (0..=n).any(|i| (self.probe)(i))
    }

    /// The embedding into lower reals: T -> 1, bottom -> 0.
    pub fn to_lower_real(&self) -> LowerReal {
        let probe = self.probe.clone();
        LowerReal::from_fn(move |n| {
            if (0..=n).any(|i| probe(i)) {
                Bound::Finite(Rational::from_integer(1.into()))
            } else {
                Bound::Finite(Rational::zero())
            }
        })
    }
}

pub fn lr_add(a: &LowerReal, b: &LowerReal) -> LowerReal {
    let (a, b) = (a.clone(), b.clone());
    LowerReal::from_fn(move |n| a.approx(n).add(&b.approx(n)))
}

/// Product on [0, inf] with the 0 * inf = 0 convention.
pub fn lr_mul(a: &LowerReal, b: &LowerReal) -> LowerReal {
    let (a, b) = (a.clone(), b.clone());
    LowerReal::from_fn(move |n| a.approx(n).mul_nonneg(&b.approx(n)))
}

/// Countable supremum: stage n looks at the first n+1 streams at stage n.
pub fn lr_sup(xs: impl Fn(u32) -> LowerReal + Send + Sync + 'static) -> LowerReal {
    LowerReal::from_fn(move |n| {
        let mut best = Bound::NegInf;
        for i in 0..=n {
            best = best.max_bound(xs(i).approx(n));
        }
        best
    })
}

pub fn lr_sup_finite(xs: &[LowerReal]) -> LowerReal {
    let xs = xs.to_vec();
    lr_sup(move |i| {
        let idx = (i as usize).min(xs.len().saturating_sub(1));
        xs[idx].clone()
    })
}

/// Completion of a strong Cauchy sequence of interval enclosures.
///
/// The caller certifies |mid(xs\[m\]) - mid(xs\[n\])| <= 2^-min(m,n); each
/// emitted stage is the intersection of the midpoint balls seen so far, so
/// widths obey width(n) <= 2^(1-n) and violations of the certificate surface
/// as an empty intersection.
pub struct CauchyLimit {
    seq: Arc<dyn Fn(u32) -> DyadicInterval + Send + Sync>,
    cache: Mutex<Vec<DyadicInterval>>,
}

impl CauchyLimit {
    pub fn at(&self, n: u32) -> Result<DyadicInterval> {
        let mut cache = self.cache.lock().unwrap();
        while cache.len() <= n as usize {
            let i = cache.len() as u32;
            let x = (self.seq)(i);
            let ball = DyadicInterval::point(x.mid()).pad(&pow2(-(i as i64)));
            let next = match cache.last() {
                None => ball,
                Some(prev) => prev.intersect(&ball).ok_or(Error::CauchyViolation {
                    m: i.saturating_sub(1),
                    n: i,
                })?,
            };
            cache.push(next);
        }
        Ok(cache[n as usize].clone())
    }
}

pub fn interval_complete(
    xs: impl Fn(u32) -> DyadicInterval + Send + Sync + 'static,
) -> CauchyLimit {
    CauchyLimit {
        seq: Arc::new(xs),
        cache: Mutex::new(Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::rational::{rat, rat_int};
    use super::*;

    fn lb(x: &LowerReal, n: u32) -> Rational {
        x.approx_rational(n, rat_int(-1_000_000))
    }

    #[test]
    fn add_identity_and_rationals() {
        let z = LowerReal::zero();
        assert_eq!(lb(&lr_add(&z, &z), 8), rat_int(0));
        let a = LowerReal::constant(rat(1, 2));
        let b = LowerReal::constant(rat(1, 3));
        assert_eq!(lb(&lr_add(&a, &b), 0), rat(5, 6));
    }

    #[test]
    fn add_limits() {
        // streams 1 - 2^-n and 2 - 2^-n converge to 3 stagewise
        let a = LowerReal::from_fn(|n| Bound::Finite(rat_int(1) - pow2(-(n as i64))));
        let b = LowerReal::from_fn(|n| Bound::Finite(rat_int(2) - pow2(-(n as i64))));
        let s = lr_add(&a, &b);
        let at20 = lb(&s, 21);
        assert!(rat_int(3) - at20.clone() <= pow2(-20));
        assert!(at20 <= rat_int(3));
    }

    #[test]
    fn mul_conventions() {
        let zero = LowerReal::zero();
        let inf = LowerReal::infinity();
        assert_eq!(lr_mul(&zero, &inf).approx(10), Bound::Finite(rat_int(0)));
        assert_eq!(lr_mul(&inf, &zero).approx(10), Bound::Finite(rat_int(0)));
        let one = LowerReal::constant(rat_int(1));
        let x = LowerReal::constant(rat(7, 5));
        assert_eq!(lb(&lr_mul(&one, &x), 4), rat(7, 5));
        let a = LowerReal::constant(rat(1, 2));
        let b = LowerReal::constant(rat(1, 3));
        assert_eq!(lb(&lr_mul(&a, &b), 4), rat(1, 6));
    }

    #[test]
    fn sup_examples() {
        let single = lr_sup_finite(&[LowerReal::constant(rat(1, 2))]);
        assert_eq!(lb(&single, 6), rat(1, 2));

        // sup over k of 1 - 2^-k tends to 1; stage 20 sees the k = 20 stream
        let s = lr_sup(|k| LowerReal::constant(rat_int(1) - pow2(-(k as i64))));
        assert!(lb(&s, 20) >= rat_int(1) - pow2(-10));
        // slow family: stage n of sup(1 - 1/(k+1)) is exactly 1 - 1/(n+1)
        let slow = lr_sup(|k| LowerReal::constant(rat_int(1) - rat(1, (k as i64) + 1)));
        assert_eq!(lb(&slow, 20), rat_int(1) - rat(1, 21));

        let zeros = lr_sup(|_| LowerReal::zero());
        assert_eq!(lb(&zeros, 12), rat_int(0));
    }

    #[test]
    fn sierpinski_embedding() {
        let yes = SierpinskiBit::confirmed_at(3);
        let no = SierpinskiBit::never();
        assert!(!yes.probe(2));
        assert!(yes.probe(3));
        assert!(yes.probe(7)); // once true, stays true
        assert_eq!(lb(&yes.to_lower_real(), 5), rat_int(1));
        assert_eq!(lb(&no.to_lower_real(), 12), rat_int(0));
    }

    #[test]
    fn complete_constant() {
        let lim = interval_complete(|_| DyadicInterval::point(rat_int(1)));
        let enc = lim.at(20).unwrap();
        assert!(enc.contains(&rat_int(1)));
        assert!(enc.width() <= pow2(-18));
    }

    #[test]
    fn complete_shrinking() {
        let lim = interval_complete(|n| {
            DyadicInterval::new(rat_int(1) - pow2(-(n as i64)), rat_int(1) + pow2(-(n as i64)))
        });
        let enc = lim.at(20).unwrap();
        assert!(enc.contains(&rat_int(1)));
        assert!(enc.width() <= pow2(-18));
    }

    #[test]
    fn complete_violation() {
        let lim = interval_complete(|n| {
            if n % 2 == 0 {
                DyadicInterval::point(rat_int(0))
            } else {
                DyadicInterval::point(rat_int(3))
            }
        });
        let err = lim.at(8).unwrap_err();
        assert!(matches!(err, Error::CauchyViolation { .. }));
    }

    #[test]
    fn monotone_stage_enforcement() {
        // a deliberately oscillating raw stream still reads monotone
        let x = LowerReal::from_fn(|n| {
            if n % 2 == 0 {
                Bound::Finite(rat_int(n as i64))
            } else {
                Bound::Finite(rat_int(-(n as i64)))
            }
        });
        let mut prev = x.approx_rational(0, rat_int(-1000));
        for n in 1..32 {
            let cur = x.approx_rational(n, rat_int(-1000));
            assert!(cur >= prev);
            prev = cur;
        }
    }
}
