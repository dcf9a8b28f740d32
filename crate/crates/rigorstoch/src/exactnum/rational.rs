//! Exact rational arithmetic helpers.
//!
//! Every number that carries a correctness claim in this library is a
//! `BigRational`: arbitrary-precision, stored in lowest terms with a positive
//! denominator. This module adds the constructors, dyadic rounding, and
//! string conversions the rest of the crate leans on.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// 2^k for any (possibly negative) exponent.
pub fn pow2(k: i64) -> Rational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as usize)
    }
}

/// Largest multiple of 2^-k that is <= x.
pub fn dyadic_floor(x: &Rational, k: u32) -> Rational {
    let scaled = x * pow2(k as i64);
    BigRational::from_integer(scaled.floor().to_integer()) * pow2(-(k as i64))
}

/// Smallest multiple of 2^-k that is >= x.
pub fn dyadic_ceil(x: &Rational, k: u32) -> Rational {
    let scaled = x * pow2(k as i64);
    BigRational::from_integer(scaled.ceil().to_integer()) * pow2(-(k as i64))
}

/// Renders as "p/q" (or just "p" when q = 1), the form used by all file formats.
pub fn rat_to_string(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses "p/q", plain integers, and decimal literals. Decimals convert
/// exactly (no float round-trip): "0.2" becomes 1/5.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_part = if int_part.is_empty() || int_part == "-" {
            BigInt::zero()
        } else {
            int_part.parse().ok()?
        };
        let digits = frac_part.len();
        let frac: BigInt = frac_part.parse().ok()?;
        let denom = BigInt::from(10u32).pow(digits as u32);
        let frac = BigRational::new(frac, denom);
        let int = BigRational::from_integer(int_part);
        return Some(if negative { int - frac } else { int + frac });
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

/// Nearest f64 at or below x. Exact conversions stay exact.
pub fn rat_to_f64_down(x: &Rational) -> f64 {
    let approx = x.to_f64().unwrap_or(f64::NEG_INFINITY);
    if approx.is_finite() && &Rational::from_float(approx).unwrap() <= x {
        approx
    } else {
        approx.next_down()
    }
}

/// Nearest f64 at or above x.
pub fn rat_to_f64_up(x: &Rational) -> f64 {
    let approx = x.to_f64().unwrap_or(f64::INFINITY);
    if approx.is_finite() && &Rational::from_float(approx).unwrap() >= x {
        approx
    } else {
        approx.next_up()
    }
}

pub fn rat_abs(x: &Rational) -> Rational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("-2").unwrap(), rat_int(-2));
        assert_eq!(parse_rational("0.2").unwrap(), rat(1, 5));
        assert_eq!(parse_rational("-0.25").unwrap(), rat(-1, 4));
        assert_eq!(parse_rational("1.5").unwrap(), rat(3, 2));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("1.x").is_none());
    }

    #[test]
    fn dyadic_rounding() {
        let x = rat(5, 7);
        let lo = dyadic_floor(&x, 8);
        let hi = dyadic_ceil(&x, 8);
        assert!(lo <= x && x <= hi);
        assert!(hi.clone() - lo.clone() <= pow2(-8));
        assert_eq!(dyadic_floor(&rat(1, 2), 4), rat(1, 2));
    }

    #[test]
    fn f64_directed() {
        let x = rat(1, 3);
        assert!(Rational::from_float(rat_to_f64_down(&x)).unwrap() <= x);
        assert!(Rational::from_float(rat_to_f64_up(&x)).unwrap() >= x);
        assert_eq!(rat_to_f64_down(&rat(1, 2)), 0.5);
        assert_eq!(rat_to_f64_up(&rat(1, 2)), 0.5);
    }
}
