//! Exact numeric substrate: rationals, rational intervals, lower/upper reals
//! and Sierpinski bits. No floating point lives in this module.

pub mod interval;
pub mod lower;
pub mod rational;

pub use interval::{linf_distance, DyadicInterval};
pub use lower::{
    interval_complete, lr_add, lr_mul, lr_sup, lr_sup_finite, Bound, CauchyLimit, LowerReal,
    SierpinskiBit, UpperReal,
};
pub use rational::{
    dyadic_ceil, dyadic_floor, parse_rational, pow2, rat, rat_int, rat_to_f64_down, rat_to_f64_up,
    rat_to_string, Rational,
};
