//! A certified Wiener process on [0,1] by the modified Levy-Ciesielski
//! construction: Haar/Schauder basis with exact dyadic-root values, validated
//! Gaussian quantiles decoded from Cantor-space bits, and a stratification
//! that turns almost-sure tail bounds into deterministic ones.

pub mod checks;
pub mod gauss_grid;
pub mod sample;

pub use checks::{holder_estimate, reflection_check, ReflectionReport};
pub use sample::{sample_wiener, SampleMode, WienerPath, WienerSample};

use crate::error::{Error, Result};
use crate::exactnum::{pow2, rat, Rational};
use crate::fint::FInterval;
use num_traits::{One, Zero};

/// Index of a Haar wavelet: level n, shift 0 <= k < 2^n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HaarIndex {
    pub level: u32,
    pub shift: u32,
}

impl HaarIndex {
    pub fn new(level: u32, shift: u32) -> Self {
        assert!(shift < (1u32 << level.min(31)), "shift out of range");
        HaarIndex { level, shift }
    }
}

/// An exact value of the form coeff * sqrt(2)^odd: Haar and Schauder values
/// are dyadic multiples of 1 or sqrt 2, and stay symbolic until a float
/// enclosure is requested.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicRoot {
    pub coeff: Rational,
    pub with_sqrt2: bool,
}

impl DyadicRoot {
    pub fn zero() -> Self {
        DyadicRoot {
            coeff: Rational::zero(),
            with_sqrt2: false,
        }
    }

    pub fn rational(q: Rational) -> Self {
        DyadicRoot {
            coeff: q,
            with_sqrt2: false,
        }
    }

    /// 2^(n/2) exactly: integer power for even n, sqrt-2 multiple for odd.
    pub fn pow2_half(n: i64) -> Self {
        if n.rem_euclid(2) == 0 {
            DyadicRoot {
                coeff: pow2(n / 2),
                with_sqrt2: false,
            }
        } else {
            DyadicRoot {
                coeff: pow2((n - 1) / 2),
                with_sqrt2: true,
            }
        }
    }

    pub fn scale(&self, q: &Rational) -> Self {
        DyadicRoot {
            coeff: self.coeff.clone() * q.clone(),
            with_sqrt2: self.with_sqrt2,
        }
    }

    pub fn neg(&self) -> Self {
        DyadicRoot {
            coeff: -self.coeff.clone(),
            with_sqrt2: self.with_sqrt2,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// Exact square (always rational).
    pub fn square(&self) -> Rational {
        let two = if self.with_sqrt2 {
            Rational::from_integer(2.into())
        } else {
            Rational::one()
        };
        self.coeff.clone() * self.coeff.clone() * two
    }

    pub fn to_finterval(&self) -> FInterval {
        let c = FInterval::from_rat_point(&self.coeff);
        if self.with_sqrt2 {
            c.mul(&FInterval::point(2.0).sqrt())
        } else {
            c
        }
    }
}

/// The (n,k)-th Haar function at a rational time. Left-closed/right-open at
/// the internal breakpoints, zero outside the support.
pub fn haar(idx: HaarIndex, t: &Rational) -> Result<DyadicRoot> {
    if t < &Rational::zero() || t > &Rational::one() {
        return Err(Error::TimeOutOfRange { t: t.to_string() });
    }
    let n = idx.level as i64;
    let left = rat(idx.shift as i64, 1) * pow2(-n);
    let mid = left.clone() + pow2(-n - 1);
    let right = left.clone() + pow2(-n);
    let amp = DyadicRoot::pow2_half(n);
    if t >= &left && t < &mid {
        Ok(amp)
    } else if t >= &mid && t < &right {
        Ok(amp.neg())
    } else {
        Ok(DyadicRoot::zero())
    }
}

/// The (n,k)-th Schauder function: the integral of the Haar function, a tent
/// of exact peak 2^(-n/2 - 1) at the support midpoint.
pub fn schauder(idx: HaarIndex, t: &Rational) -> Result<DyadicRoot> {
    if t < &Rational::zero() || t > &Rational::one() {
        return Err(Error::TimeOutOfRange { t: t.to_string() });
    }
    let n = idx.level as i64;
    let left = rat(idx.shift as i64, 1) * pow2(-n);
    let mid = left.clone() + pow2(-n - 1);
    let right = left.clone() + pow2(-n);
    let amp = DyadicRoot::pow2_half(n);
    if t <= &left || t >= &right {
        Ok(DyadicRoot::zero())
    } else if t < &mid {
        Ok(amp.scale(&(t.clone() - left)))
    } else {
        Ok(amp.scale(&(right - t.clone())))
    }
}

/// A rational upper bound of 2^(-1/2) (a Pell convergent from above).
pub fn inv_sqrt2_upper() -> Rational {
    rat(985, 1393)
}

#[cfg_attr(not(test), allow(dead_code))]
fn inv_sqrt2_lower() -> Rational {
    rat(408, 577)
}

/// Exact rational upper bound of sum_{n > m} n 2^(-n/2), by the closed form
/// sum_{n > m} n x^n = x^(m+1) ((m+1) - m x) / (1-x)^2 evaluated at a
/// rational x >= 2^(-1/2); the sum is increasing in x.
pub fn tail_radius(m: u32) -> Rational {
    assert!(m >= 1);
    tail_series_from(m, &Rational::from_integer((m as i64 + 1).into()))
        + Rational::zero()
}

/// Upper bound of sum_{n > m} min-coefficient bound series where levels up
/// to `flat_until` use the constant bound `flat` and beyond use n:
/// sum_{m < n <= j} flat x^n + sum_{n > max(j, m)} n x^n.
pub fn tail_radius_stratified(stratum: u32, m: u32) -> Rational {
    let x = inv_sqrt2_upper();
    let j = stratum.max(m);
    let flat = Rational::from_integer((stratum as i64).into());
    // geometric block for m < n <= j
    let mut flat_part = Rational::zero();
    if j > m {
        // flat * (x^(m+1) - x^(j+1)) / (1 - x)
        let num = pow_rat(&x, m + 1) - pow_rat(&x, j + 1);
        flat_part = flat * num / (Rational::one() - x.clone());
    }
    flat_part + tail_series_from(j, &Rational::from_integer((j as i64 + 1).into()))
}

/// sum_{n > m} n x^n at the rational upper bound of 2^(-1/2); the `_hint`
/// argument only keeps the closed form readable at call sites.
fn tail_series_from(m: u32, _hint: &Rational) -> Rational {
    let x = inv_sqrt2_upper();
    let m_r = Rational::from_integer((m as i64).into());
    let num = pow_rat(&x, m + 1)
        * ((m_r.clone() + Rational::one()) - m_r * x.clone());
    num / ((Rational::one() - x.clone()) * (Rational::one() - x))
}

fn pow_rat(x: &Rational, e: u32) -> Rational {
    let mut out = Rational::one();
    for _ in 0..e {
        out *= x.clone();
    }
    out
}

/// The certified lower bound 1 - 2^-m for the good event that every
/// coefficient at level n >= m stays below n; the Gaussian tail estimate
/// behind it needs m >= 6.
pub fn stratum_probability(m: u32) -> Result<Rational> {
    if m < 6 {
        return Err(Error::StratumTooLow { m });
    }
    Ok(Rational::one() - pow2(-(m as i64)))
}

/// The truncation-bound table: beta(j, n) = n above the stratum index and j
/// at or below it, increasing in j as the construction requires.
pub fn beta(stratum: u32, level: u32) -> u32 {
    if level > stratum {
        level
    } else {
        stratum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat_int;

    #[test]
    fn haar_values() {
        let h00 = HaarIndex::new(0, 0);
        assert_eq!(haar(h00, &rat(1, 4)).unwrap(), DyadicRoot::rational(rat_int(1)));
        assert_eq!(haar(h00, &rat(3, 4)).unwrap(), DyadicRoot::rational(rat_int(-1)));
        // outside support
        let h11 = HaarIndex::new(1, 1);
        assert!(haar(h11, &rat(1, 4)).unwrap().is_zero());
        // amplitude at level 1 is sqrt 2
        let v = haar(h11, &rat(9, 16)).unwrap();
        assert_eq!(v.square(), rat_int(2));
        assert!(haar(h00, &rat(3, 2)).is_err());
    }

    #[test]
    fn schauder_tent_shape() {
        // peak at the midpoint is 2^(-n/2 - 1); the tail series uses the
        // coarser per-level bound 2^(-n/2)
        for n in 0..6u32 {
            let idx = HaarIndex::new(n, 0);
            let mid = pow2(-(n as i64) - 1);
            let peak = schauder(idx, &mid).unwrap();
            assert_eq!(peak.square(), pow2(-(n as i64) - 2));
            // zero at the support endpoints
            assert!(schauder(idx, &Rational::zero()).unwrap().is_zero());
            assert!(schauder(idx, &pow2(-(n as i64))).unwrap().is_zero());
        }
        // s_{0,0}(1/2) = 1/2 exactly
        assert_eq!(
            schauder(HaarIndex::new(0, 0), &rat(1, 2)).unwrap(),
            DyadicRoot::rational(rat(1, 2))
        );
        // monotone rise on the first half
        let idx = HaarIndex::new(2, 1);
        let a = schauder(idx, &rat(5, 16)).unwrap().to_finterval();
        let b = schauder(idx, &rat(11, 32)).unwrap().to_finterval();
        assert!(a.hi < b.lo);
    }

    #[test]
    fn schauder_matches_haar_integral() {
        // numeric spot check: s(t) = int_0^t h by midpoint sums on a fine grid
        let idx = HaarIndex::new(1, 0);
        let t = rat(3, 8);
        let exact = schauder(idx, &t).unwrap().to_finterval();
        let steps = 3 * 64;
        let dt = rat(1, 8 * 64);
        let mut acc = Rational::zero();
        let mut sq = Rational::zero(); // sqrt2 part
        for i in 0..steps {
            let mid = dt.clone() * rat_int(2 * i + 1) / rat_int(2);
            let h = haar(idx, &mid).unwrap();
            if h.with_sqrt2 {
                sq += h.coeff * dt.clone();
            } else {
                acc += h.coeff * dt.clone();
            }
        }
        let approx = FInterval::from_rat_point(&acc)
            .add(&FInterval::from_rat_point(&sq).mul(&FInterval::point(2.0).sqrt()));
        assert!((approx.mid() - exact.mid()).abs() < 1e-9);
    }

    #[test]
    fn tail_radius_decreasing_and_tight() {
        let mut prev = tail_radius(1);
        for m in 2..24u32 {
            let cur = tail_radius(m);
            assert!(cur < prev);
            prev = cur;
        }
        // below 2^-4 by some computed level
        assert!(tail_radius(23) < pow2(-4));

        // brute-force oracle: 200 terms of n x^n with interval sqrt(1/2),
        // plus an outward geometric remainder
        let m = 10u32;
        let lo = inv_sqrt2_lower();
        let hi = inv_sqrt2_upper();
        let mut sum_lo = Rational::zero();
        let mut sum_hi = Rational::zero();
        let (mut plo, mut phi) = (pow_rat(&lo, m + 1), pow_rat(&hi, m + 1));
        for n in (m + 1)..=(m + 200) {
            let nr = Rational::from_integer((n as i64).into());
            sum_lo += nr.clone() * plo.clone();
            sum_hi += nr * phi.clone();
            plo *= lo.clone();
            phi *= hi.clone();
        }
        // remainder: sum_{n > m+200} n x^n <= (m+201) x^(m+201) / (1-x)^2
        let rem = Rational::from_integer((m as i64 + 201).into()) * phi
            / ((Rational::one() - hi.clone()) * (Rational::one() - hi.clone()));
        sum_hi += rem;
        let tr = tail_radius(m);
        assert!(tr >= sum_lo);
        assert!(tr - sum_hi <= pow2(-10));
    }

    #[test]
    fn stratified_tail_dominates() {
        // the stratum-adjusted radius reduces to the plain one at j <= m and
        // grows with the stratum
        assert_eq!(tail_radius_stratified(6, 10), tail_radius(10));
        assert!(tail_radius_stratified(14, 10) > tail_radius(10));
    }

    #[test]
    fn stratum_probability_domain() {
        assert_eq!(stratum_probability(6).unwrap(), rat_int(1) - pow2(-6));
        assert_eq!(stratum_probability(10).unwrap(), rat_int(1) - pow2(-10));
        assert!(matches!(
            stratum_probability(5),
            Err(Error::StratumTooLow { m: 5 })
        ));
    }

    #[test]
    fn beta_table_shape() {
        for m in 6..12u32 {
            for n in 0..20u32 {
                if n > m {
                    assert_eq!(beta(m, n), n);
                } else {
                    assert_eq!(beta(m, n), m);
                }
                // increasing in the stratum index
                assert!(beta(m + 1, n) >= beta(m, n));
            }
        }
    }
}
