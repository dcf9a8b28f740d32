//! A shared certified grid of the Gaussian CDF, giving fast quantile
//! enclosures: binary search over precomputed monotone Phi bounds instead of
//! per-call bisection. Built lazily once per process.

use crate::fint::{gauss_cdf, FInterval};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Grid pitch 2^-10 over |x| <= 12.
const GRID_SHIFT: i64 = 10;
const GRID_MAX: i64 = 12 << GRID_SHIFT;

struct PhiGrid {
    /// phi_lo[i], phi_hi[i] bound Phi(x_i) for x_i = (i - GRID_MAX) 2^-10.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn grid() -> &'static PhiGrid {
    static GRID: OnceLock<PhiGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let n = (2 * GRID_MAX + 1) as usize;
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            let x = (i as i64 - GRID_MAX) as f64 / (1u64 << GRID_SHIFT) as f64;
            let phi = gauss_cdf(&FInterval::point(x));
            // enforce monotonicity against rounding jitter
            let l = phi.lo.max(lo.last().copied().unwrap_or(0.0));
            let h = phi.hi.max(hi.last().copied().unwrap_or(0.0));
            lo.push(l);
            hi.push(h);
        }
        PhiGrid { lo, hi }
    })
}

fn grid_x(i: usize) -> f64 {
    (i as i64 - GRID_MAX) as f64 / (1u64 << GRID_SHIFT) as f64
}

/// Certified enclosure of Phi^{-1} over the probability interval `v`, with
/// the quantile known a priori to lie in [-support, support]. The result
/// contains [Phi^{-1}(v.lo), Phi^{-1}(v.hi)] intersected with the support.
pub fn quantile_via_grid(v: &FInterval, support: f64) -> FInterval {
    let g = grid();
    // largest grid point with Phi.hi <= v.lo
    let a_idx = g.hi.partition_point(|&h| h <= v.lo);
    let a = if a_idx == 0 {
        -support
    } else {
        grid_x(a_idx - 1).max(-support)
    };
    // smallest grid point with Phi.lo >= v.hi
    let b_idx = g.lo.partition_point(|&l| l < v.hi);
    let b = if b_idx >= g.lo.len() {
        support
    } else {
        grid_x(b_idx).min(support)
    };
    // the support claim wins at the extreme edges: the decoded law is
    // truncated there, so clamping inward stays sound
    let lo = a.max(-support);
    let hi = b.min(support).max(lo);
    FInterval::new(lo, hi)
}

/// Phi(x) at small integer points, cached (used for truncation bounds).
pub fn phi_at_int(x: i64) -> FInterval {
    static CACHE: OnceLock<Mutex<HashMap<i64, FInterval>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    *map.entry(x)
        .or_insert_with(|| gauss_cdf(&FInterval::point(x as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_quantiles_enclose() {
        for &(v, q) in &[
            (0.5, 0.0),
            (0.8413447460685429, 1.0),
            (0.9772498680518208, 2.0),
            (0.15865525393145707, -1.0),
        ] {
            let enc = quantile_via_grid(&FInterval::point(v), 12.0);
            assert!(enc.lo <= q && q <= enc.hi, "{q} not in {enc:?}");
            assert!(enc.width() <= 3.0 / 1024.0, "width {}", enc.width());
        }
    }

    #[test]
    fn grid_quantile_monotone() {
        let a = quantile_via_grid(&FInterval::new(0.2, 0.25), 12.0);
        let b = quantile_via_grid(&FInterval::new(0.7, 0.75), 12.0);
        assert!(a.hi < b.lo);
    }

    #[test]
    fn support_clamp() {
        let enc = quantile_via_grid(&FInterval::new(1e-40, 2e-40), 8.0);
        assert!(enc.lo >= -8.0);
        assert!(enc.hi >= enc.lo);
        // far upper tail stays bracketed or clamps at the support
        let enc = quantile_via_grid(&FInterval::new(1.0 - 1e-12, 1.0 - 9e-13), 20.0);
        assert!(enc.hi <= 20.0 && enc.lo >= 6.5, "{enc:?}");
    }
}
