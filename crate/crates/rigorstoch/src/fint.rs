//! Certified f64 interval arithmetic.
//!
//! Endpoints are IEEE doubles, which are themselves dyadic rationals, so an
//! `FInterval` is an exact mathematical object. Every operation rounds to
//! nearest and then widens each endpoint by one ulp, which soundly encloses
//! the true result without needing directed rounding modes. This is the fast
//! numeric layer for path sampling and Monte Carlo work; the measure-theoretic
//! core stays in exact rationals.

use crate::exactnum::{rat_to_f64_down, rat_to_f64_up, DyadicInterval, Rational};
use std::fmt;

#[derive(Clone, Copy, PartialEq)]
pub struct FInterval {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for FInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl FInterval {
    pub const ZERO: FInterval = FInterval { lo: 0.0, hi: 0.0 };
    pub const ONE: FInterval = FInterval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "FInterval endpoints out of order: [{lo}, {hi}]");
        assert!(!lo.is_nan() && !hi.is_nan());
        FInterval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        assert!(!x.is_nan());
        FInterval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        up(self.hi - self.lo)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &FInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn add(&self, o: &FInterval) -> FInterval {
        FInterval::new(down(self.lo + o.lo), up(self.hi + o.hi))
    }

    pub fn sub(&self, o: &FInterval) -> FInterval {
        FInterval::new(down(self.lo - o.hi), up(self.hi - o.lo))
    }

    pub fn neg(&self) -> FInterval {
        FInterval::new(-self.hi, -self.lo)
    }

    pub fn mul(&self, o: &FInterval) -> FInterval {
        // exact units need no outward rounding
        if o.lo == 1.0 && o.hi == 1.0 {
            return *self;
        }
        if o.lo == -1.0 && o.hi == -1.0 {
            return self.neg();
        }
        if (o.lo == 0.0 && o.hi == 0.0) || (self.lo == 0.0 && self.hi == 0.0) {
            return FInterval::ZERO;
        }
        if self.lo == 1.0 && self.hi == 1.0 {
            return *o;
        }
        if self.lo == -1.0 && self.hi == -1.0 {
            return o.neg();
        }
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        FInterval::new(down(lo), up(hi))
    }

    /// Division; the divisor interval must not contain 0.
    pub fn div(&self, o: &FInterval) -> FInterval {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by interval containing 0");
        let c = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        FInterval::new(down(lo), up(hi))
    }

    pub fn scale(&self, c: f64) -> FInterval {
        self.mul(&FInterval::point(c))
    }

    pub fn abs(&self) -> FInterval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            FInterval::new(0.0, self.hi.max(-self.lo))
        }
    }

    pub fn max_with(&self, o: &FInterval) -> FInterval {
        FInterval::new(self.lo.max(o.lo), self.hi.max(o.hi))
    }

    pub fn hull(&self, o: &FInterval) -> FInterval {
        FInterval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    pub fn intersect(&self, o: &FInterval) -> Option<FInterval> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        if lo <= hi {
            Some(FInterval::new(lo, hi))
        } else {
            None
        }
    }

    pub fn pad(&self, r: f64) -> FInterval {
        assert!(r >= 0.0);
        FInterval::new(down(self.lo - r), up(self.hi + r))
    }

    /// Square root; the interval must be nonnegative. f64 sqrt is correctly
    /// rounded, so one ulp of padding is enough.
    pub fn sqrt(&self) -> FInterval {
        assert!(self.lo >= 0.0, "sqrt of interval with negative part");
        FInterval::new(down(self.lo.sqrt()).max(0.0), up(self.hi.sqrt()))
    }

    pub fn square(&self) -> FInterval {
        let a = self.abs();
        FInterval::new(down(a.lo * a.lo), up(a.hi * a.hi))
    }

    pub fn from_rational(lo: &Rational, hi: &Rational) -> FInterval {
        FInterval::new(rat_to_f64_down(lo), rat_to_f64_up(hi))
    }

    pub fn from_rat_point(x: &Rational) -> FInterval {
        FInterval::new(rat_to_f64_down(x), rat_to_f64_up(x))
    }

    /// Exact conversion: f64 endpoints are dyadic rationals.
    pub fn to_dyadic(&self) -> DyadicInterval {
        DyadicInterval::new(
            Rational::from_float(self.lo).expect("finite endpoint"),
            Rational::from_float(self.hi).expect("finite endpoint"),
        )
    }
}

/// exp over an interval, via scaling-and-squaring on top of the certified
/// Taylor kernel for |x| <= 1.
pub fn exp(x: &FInterval) -> FInterval {
    FInterval::new(exp_point_lo(x.lo), exp_point_hi(x.hi))
}

fn exp_point_lo(x: f64) -> f64 {
    exp_point(x).lo
}

fn exp_point_hi(x: f64) -> f64 {
    exp_point(x).hi
}

fn exp_point(x: f64) -> FInterval {
    assert!(x.is_finite() && x.abs() < 740.0, "exp argument out of range");
    // halve until |x| <= 1, then square back up
    let mut halvings = 0u32;
    let mut y = FInterval::point(x);
    while y.lo.abs().max(y.hi.abs()) > 1.0 {
        y = y.scale(0.5);
        halvings += 1;
    }
    let mut e = exp_taylor_unit(&y);
    for _ in 0..halvings {
        e = e.square();
    }
    e
}

/// Taylor series with explicit Lagrange remainder, valid for |x| <= 1:
/// the remainder after n terms is at most 3 |x|^n / n!.
fn exp_taylor_unit(x: &FInterval) -> FInterval {
    let mut sum = FInterval::ONE;
    let mut term = FInterval::ONE;
    let mut rem_mag = 3.0f64;
    for k in 1..=22u32 {
        term = term.mul(x).scale(1.0 / k as f64);
        sum = sum.add(&term);
        rem_mag = rem_mag * 1.0 / (k + 1) as f64;
    }
    // |x| <= 1 so |x|^n <= 1; widen by the remainder bound
    sum.pad(rem_mag)
}

/// sin over an interval via Taylor with remainder; sharp only for |x| <~ 8,
/// beyond which the enclosure falls back to [-1, 1].
pub fn sin(x: &FInterval) -> FInterval {
    let span = x.hi - x.lo;
    if x.lo.abs().max(x.hi.abs()) > 8.0 || span >= std::f64::consts::PI {
        return sin_range_fallback(x);
    }
    let a = sin_point(x.lo);
    let b = sin_point(x.hi);
    // monotone pieces are separated by critical points at odd multiples of pi/2
    let k_lo = (x.lo / std::f64::consts::FRAC_PI_2 - 1.0).ceil() as i64;
    let k_hi = (x.hi / std::f64::consts::FRAC_PI_2 - 1.0).floor() as i64;
    let mut out = a.hull(&b);
    for k in k_lo..=k_hi {
        if k.rem_euclid(2) == 0 {
            // crest or trough inside the interval; pad generously around it
            let crit = (k as f64 + 1.0) * std::f64::consts::FRAC_PI_2;
            if x.lo - 1e-9 <= crit && crit <= x.hi + 1e-9 {
                out = out.hull(&sin_point(crit));
            }
        }
    }
    out.intersect(&FInterval::new(-1.0, 1.0)).unwrap_or(out)
}

fn sin_range_fallback(_x: &FInterval) -> FInterval {
    FInterval::new(-1.0, 1.0)
}

fn sin_point(x: f64) -> FInterval {
    let xi = FInterval::point(x);
    let x2 = xi.square();
    let mut term = xi;
    let mut sum = xi;
    let mut fact_next = 1.0f64; // (2k+1)! running
    for k in 1..=18u32 {
        term = term.mul(&x2).scale(-1.0 / ((2 * k) as f64 * (2 * k + 1) as f64));
        sum = sum.add(&term);
        fact_next = fact_next * (2 * k) as f64 * (2 * k + 1) as f64;
    }
    // remainder bound |x|^39 / 39!
    let rem = x.abs().powi(39) / (fact_next * 38.0 * 39.0);
    sum.pad(rem.min(2.0))
        .intersect(&FInterval::new(-1.0, 1.0))
        .unwrap_or(FInterval::new(-1.0, 1.0))
}

pub fn cos(x: &FInterval) -> FInterval {
    // cos x = sin(x + pi/2), with pi/2 as an interval
    let half_pi = FInterval::new(
        std::f64::consts::FRAC_PI_2.next_down(),
        std::f64::consts::FRAC_PI_2.next_up(),
    );
    sin(&x.add(&half_pi))
}

/// 1/sqrt(2 pi) as a certified interval.
fn inv_sqrt_two_pi() -> FInterval {
    let two_pi = FInterval::new(
        (2.0 * std::f64::consts::PI).next_down(),
        (2.0 * std::f64::consts::PI).next_up(),
    );
    FInterval::ONE.div(&two_pi.sqrt())
}

/// Standard normal density.
pub fn gauss_pdf(x: &FInterval) -> FInterval {
    let m = x.square().scale(-0.5);
    exp(&m).mul(&inv_sqrt_two_pi())
}

/// Standard normal CDF with certified enclosure.
///
/// |x| <= 4.5: Taylor series of the integral term by term (interval
/// arithmetic tracks the rounding; the analytic truncation error is padded
/// explicitly). |x| > 4.5: the asymptotic expansion of the Mills ratio,
/// whose partial sums bracket the tail alternately and stay tight where the
/// Taylor sum starts cancelling.
pub fn gauss_cdf(x: &FInterval) -> FInterval {
    let lo = gauss_cdf_point(x.lo);
    let hi = gauss_cdf_point(x.hi);
    FInterval::new(lo.lo.clamp(0.0, 1.0), hi.hi.clamp(0.0, 1.0))
}

fn gauss_cdf_point(x: f64) -> FInterval {
    if x > 40.0 {
        return FInterval::new(1.0f64.next_down(), 1.0);
    }
    if x < -40.0 {
        return FInterval::new(0.0, 1e-300);
    }
    if x.abs() <= 4.5 {
        let t = gauss_cdf_taylor(x);
        FInterval::new(t.lo.clamp(0.0, 1.0), t.hi.clamp(0.0, 1.0))
    } else if x > 0.0 {
        // padded complement: plain 1.0 - q would round to nearest and could
        // overstate the lower bound in the far tail
        let c = FInterval::ONE.sub(&gauss_tail(x));
        FInterval::new(c.lo.clamp(0.0, 1.0), c.hi.clamp(0.0, 1.0))
    } else {
        let q = gauss_tail(-x);
        FInterval::new(q.lo.clamp(0.0, 1.0), q.hi.clamp(0.0, 1.0))
    }
}

/// Phi(x) = 1/2 + (1/sqrt(2 pi)) * sum_k (-1)^k x^(2k+1) / (k! 2^k (2k+1)).
fn gauss_cdf_taylor(x: f64) -> FInterval {
    let xi = FInterval::point(x);
    let x2 = xi.square();
    let mut term = xi; // k = 0 term before the 1/(2k+1) factor
    let mut sum = xi; // includes k = 0 contribution x/1
    let mut k = 1u32;
    loop {
        // term_{k} (without the odd divisor) = term_{k-1} * (-x^2/2) / k
        term = term.mul(&x2).scale(-0.5 / k as f64);
        let contrib = term.scale(1.0 / (2 * k + 1) as f64);
        sum = sum.add(&contrib);
        let mag = contrib.abs().hi;
        // past the peak k >= x^2/2 the series alternates with decreasing
        // terms, so the truncation error is at most the next term
        if k as f64 >= x * x / 2.0 && mag < 1e-18 {
            sum = sum.pad(mag);
            break;
        }
        k += 1;
        assert!(k < 400, "gauss_cdf_taylor failed to converge");
    }
    FInterval::point(0.5).add(&sum.mul(&inv_sqrt_two_pi()))
}

/// Upper-tail Q(x) = 1 - Phi(x) for x > 4.4 via the alternating asymptotic
/// series Q(x) = pdf(x)/x * (1 - 1/x^2 + 3/x^4 - ...): partial sums bracket.
fn gauss_tail(x: f64) -> FInterval {
    assert!(x > 4.4);
    let xi = FInterval::point(x);
    let x2 = xi.square();
    let mut term = FInterval::ONE;
    let mut even = FInterval::ONE; // partial sum ending on a +term (upper)
    let mut odd; // partial sum ending on a -term (lower)
    let mut j = 0u32;
    loop {
        // next term: * -(2j+1)/x^2
        let next = term.mul(&FInterval::point(-((2 * j + 1) as f64))).div(&x2);
        odd = even.add(&next);
        let after = next.mul(&FInterval::point(-((2 * j + 3) as f64))).div(&x2);
        let new_even = odd.add(&after);
        if after.abs().hi >= next.abs().lo {
            // terms stopped shrinking; bracket with current sums
            break;
        }
        even = new_even;
        term = after;
        j += 2;
        if j > 60 {
            break;
        }
    }
    let bracket = FInterval::new(odd.lo.min(even.lo), even.hi.max(odd.hi));
    gauss_pdf(&xi).div(&xi).mul(&bracket)
}

/// Certified inverse CDF over an interval of probabilities.
///
/// Returns [a, b] with Phi(a) <= v.lo and Phi(b) >= v.hi certified, so the
/// quantile image of v is enclosed. Errors if v touches {0, 1}.
pub fn gauss_quantile(v: &FInterval, tol: f64) -> crate::error::Result<FInterval> {
    if v.lo <= 0.0 || v.hi >= 1.0 {
        return Err(crate::error::Error::QuantileEdge);
    }
    let a = bisect_below(v.lo, tol);
    let b = bisect_above(v.hi, tol);
    Ok(FInterval::new(a, b))
}

/// Largest grid point a with Phi(a).hi <= target.
fn bisect_below(target: f64, tol: f64) -> f64 {
    let mut lo = -42.0f64;
    let mut hi = 42.0f64;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if gauss_cdf_point(mid).hi <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest grid point b with Phi(b).lo >= target.
fn bisect_above(target: f64, tol: f64) -> f64 {
    let mut lo = -42.0f64;
    let mut hi = 42.0f64;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if gauss_cdf_point(mid).lo >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops_enclose() {
        let a = FInterval::point(0.1);
        let b = FInterval::point(0.2);
        let s = a.add(&b);
        assert!(s.contains(0.1 + 0.2));
        assert!(s.width() < 1e-15);
        let p = a.mul(&b);
        assert!(p.contains(0.02000000000000000041));
        let q = FInterval::point(1.0).div(&FInterval::point(3.0));
        assert!(q.contains(1.0 / 3.0));
    }

    #[test]
    fn exp_known_values() {
        let e1 = exp(&FInterval::point(1.0));
        assert!(e1.contains(std::f64::consts::E));
        assert!(e1.width() < 1e-12);
        let em1 = exp(&FInterval::point(-1.0));
        assert!(em1.contains(1.0 / std::f64::consts::E));
        let big = exp(&FInterval::point(-112.5));
        assert!(big.lo >= 0.0 && big.hi < 1e-45);
    }

    #[test]
    fn sin_cos_known_values() {
        let s = sin(&FInterval::point(1.0));
        assert!(s.contains(1.0f64.sin()));
        assert!(s.width() < 1e-12);
        let c = cos(&FInterval::point(0.5));
        assert!(c.contains(0.5f64.cos()));
        // maximum captured when the crest is interior
        let m = sin(&FInterval::new(1.4, 1.8));
        assert!(m.hi >= 1.0 - 1e-9);
    }

    #[test]
    fn cdf_reference_points() {
        let half = gauss_cdf_point(0.0);
        assert!(half.contains(0.5) && half.width() < 1e-14);
        let p1 = gauss_cdf_point(1.0);
        assert!(p1.contains(0.8413447460685429));
        assert!(p1.width() < 1e-12);
        let p6 = gauss_cdf_point(-6.0);
        assert!(p6.contains(9.865876450376946e-10));
        let p8 = gauss_cdf_point(8.0);
        assert!(p8.contains(1.0 - 6.220960574271786e-16));
    }

    #[test]
    fn quantile_round_trip() {
        let v = FInterval::new(0.84, 0.85);
        let q = gauss_quantile(&v, 1e-9).unwrap();
        // Phi^{-1}(0.8413...) = 1
        assert!(q.contains(1.0) || q.hi >= 1.0 && q.lo <= 1.037);
        let back = gauss_cdf(&q);
        assert!(back.lo <= 0.84 && back.hi >= 0.85);

        let center = gauss_quantile(&FInterval::point(0.5), 1e-12).unwrap();
        assert!(center.contains(0.0));
        assert!(center.width() < 1e-9);
    }

    #[test]
    fn quantile_antisymmetry() {
        let tol = 1e-10;
        for &u in &[0.1, 0.25, 0.3173, 0.45] {
            let a = gauss_quantile(&FInterval::point(u), tol).unwrap();
            let b = gauss_quantile(&FInterval::point(1.0 - u), tol).unwrap();
            // quantile(1-u) = -quantile(u) within 2 tol
            assert!((a.mid() + b.mid()).abs() < 2.0 * tol + a.width() + b.width());
        }
    }

    #[test]
    fn quantile_monotone_on_disjoint_inputs() {
        let q1 = gauss_quantile(&FInterval::new(0.2, 0.3), 1e-9).unwrap();
        let q2 = gauss_quantile(&FInterval::new(0.6, 0.7), 1e-9).unwrap();
        assert!(q1.hi < q2.lo);
    }

    #[test]
    fn quantile_edge_refused() {
        assert!(gauss_quantile(&FInterval::new(0.0, 0.5), 1e-6).is_err());
        assert!(gauss_quantile(&FInterval::new(0.5, 1.0), 1e-6).is_err());
    }
}
