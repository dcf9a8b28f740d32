//! Closed rational intervals: the enclosure type behind every "computable
//! real" claim. Endpoints are exact, so interval arithmetic here needs no
//! rounding at all.

use super::rational::Rational;
use num_traits::{Signed, Zero};
use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct DyadicInterval {
    lo: Rational,
    hi: Rational,
}

impl fmt::Debug for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl DyadicInterval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        DyadicInterval { lo, hi }
    }

    pub fn point(x: Rational) -> Self {
        DyadicInterval { lo: x.clone(), hi: x }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        self.hi.clone() - self.lo.clone()
    }

    pub fn mid(&self) -> Rational {
        (self.lo.clone() + self.hi.clone()) / Rational::from_integer(2.into())
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &DyadicInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &DyadicInterval) -> Option<DyadicInterval> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        if lo <= hi {
            Some(DyadicInterval { lo, hi })
        } else {
            None
        }
    }

    pub fn hull(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    pub fn add(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.clone() + other.lo.clone(),
            hi: self.hi.clone() + other.hi.clone(),
        }
    }

    pub fn sub(&self, other: &DyadicInterval) -> DyadicInterval {
        DyadicInterval {
            lo: self.lo.clone() - other.hi.clone(),
            hi: self.hi.clone() - other.lo.clone(),
        }
    }

    pub fn neg(&self) -> DyadicInterval {
        DyadicInterval {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn mul(&self, other: &DyadicInterval) -> DyadicInterval {
        let cands = [
            self.lo.clone() * other.lo.clone(),
            self.lo.clone() * other.hi.clone(),
            self.hi.clone() * other.lo.clone(),
            self.hi.clone() * other.hi.clone(),
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        DyadicInterval { lo, hi }
    }

    pub fn scale(&self, c: &Rational) -> DyadicInterval {
        if c.is_negative() {
            DyadicInterval {
                lo: self.hi.clone() * c.clone(),
                hi: self.lo.clone() * c.clone(),
            }
        } else {
            DyadicInterval {
                lo: self.lo.clone() * c.clone(),
                hi: self.hi.clone() * c.clone(),
            }
        }
    }

    pub fn abs(&self) -> DyadicInterval {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            DyadicInterval {
                lo: Rational::zero(),
                hi: self.lo.abs().max(self.hi.abs()),
            }
        }
    }

    /// Pads both endpoints outward by r >= 0.
    pub fn pad(&self, r: &Rational) -> DyadicInterval {
        assert!(!r.is_negative());
        DyadicInterval {
            lo: self.lo.clone() - r.clone(),
            hi: self.hi.clone() + r.clone(),
        }
    }
}

/// Max-metric distance interval between two boxes of enclosures, the metric
/// used for values in R^d throughout.
pub fn linf_distance(a: &[DyadicInterval], b: &[DyadicInterval]) -> DyadicInterval {
    assert_eq!(a.len(), b.len());
    let mut out = DyadicInterval::point(Rational::zero());
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x.sub(y).abs();
        out = DyadicInterval {
            lo: out.lo.clone().max(d.lo.clone()),
            hi: out.hi.clone().max(d.hi.clone()),
        };
    }
    out
}
