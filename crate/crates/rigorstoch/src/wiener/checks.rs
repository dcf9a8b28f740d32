//! Statistical checks on path ensembles: the reflection principle and the
//! Holder-quotient diagnostic.

use super::sample::WienerPath;
use crate::exactnum::Rational;
use num_traits::ToPrimitive;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ReflectionReport {
    pub threshold: f64,
    /// Empirical Pr(max of the path >= x), counting only certified paths.
    pub p_max_ge: f64,
    /// Twice the empirical Pr(W(1) > x).
    pub p_twice_end_gt: f64,
    /// Fraction of paths whose enclosure straddles the threshold (either
    /// statistic) and cannot be counted definitely.
    pub indeterminate_frac: f64,
    pub samples: usize,
}

/// Enclosure-aware counting for the reflection identity
/// Pr(M(1) >= x) = 2 Pr(W(1) > x) on the sampled partial-sum process.
pub fn reflection_check(ensemble: &[WienerPath], x: &Rational) -> ReflectionReport {
    let xf = x.to_f64().unwrap();
    let n = ensemble.len();
    let mut max_ge = 0usize;
    let mut end_gt = 0usize;
    let mut indet = 0usize;
    for p in ensemble {
        let m = p.max_enclosure();
        let e = p.endpoint();
        let m_def = m.lo >= xf || m.hi < xf;
        let e_def = e.lo > xf || e.hi <= xf;
        if !(m_def && e_def) {
            indet += 1;
            continue;
        }
        if m.lo >= xf {
            max_ge += 1;
        }
        if e.lo > xf {
            end_gt += 1;
        }
    }
    let counted = (n - indet).max(1) as f64;
    ReflectionReport {
        threshold: xf,
        p_max_ge: max_ge as f64 / counted,
        p_twice_end_gt: 2.0 * end_gt as f64 / counted,
        indeterminate_frac: indet as f64 / n.max(1) as f64,
        samples: n,
    }
}

/// Max of |W(t_j) - W(t_i)| / |t_j - t_i|^alpha over all grid pairs, on
/// enclosure midpoints. A diagnostic statistic, not a certified quantity.
pub fn holder_estimate(path: &WienerPath, alpha: &Rational) -> f64 {
    let a = alpha.to_f64().unwrap();
    assert!(a > 0.0 && a < 1.0);
    let mids = path.midpoints();
    let dt = 1.0 / (1u64 << path.grid_level) as f64;
    let mut best = 0.0f64;
    for i in 0..mids.len() {
        for j in (i + 1)..mids.len() {
            let q = (mids[j] - mids[i]).abs() / (((j - i) as f64) * dt).powf(a);
            if q > best {
                best = q;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::sample::{sample_wiener, SampleMode};
    use super::*;
    use crate::exactnum::{rat, rat_int};
    use crate::fint::FInterval;
    use crate::space::CantorPoint;

    fn zero_path(level: u32) -> WienerPath {
        WienerPath {
            grid_level: level,
            sample_level: level,
            stratum: 6,
            values: vec![FInterval::ZERO; (1 << level) + 1],
            uniform_slack: 0.0,
            flagged: false,
        }
    }

    fn linear_path(level: u32) -> WienerPath {
        let n = (1usize << level) + 1;
        let values = (0..n)
            .map(|i| FInterval::point(i as f64 / (n - 1) as f64))
            .collect();
        WienerPath {
            grid_level: level,
            sample_level: level,
            stratum: 6,
            values,
            uniform_slack: 0.0,
            flagged: false,
        }
    }

    #[test]
    fn reflection_at_zero_is_unity() {
        // Pr(M >= 0) = 1 and 2 Pr(W(1) > 0) near 1: exact for the linear
        // fixture, statistical for sampled paths
        let mut paths = Vec::new();
        for seed in 0..128u64 {
            let omega = CantorPoint::from_seed(seed);
            paths.push(
                sample_wiener(&omega, 6, SampleMode::Stratified, &rat(1, 1 << 18))
                    .unwrap()
                    .path(6),
            );
        }
        let rep = reflection_check(&paths, &rat_int(0));
        assert!((rep.p_max_ge - 1.0).abs() < 0.02, "{rep:?}");
        assert!((rep.p_twice_end_gt - 1.0).abs() < 0.3, "{rep:?}");
        assert!(rep.indeterminate_frac < 0.05);
    }

    #[test]
    fn reflection_far_tail_is_zero() {
        let mut paths = Vec::new();
        for seed in 0..64u64 {
            let omega = CantorPoint::from_seed(seed);
            paths.push(
                sample_wiener(&omega, 6, SampleMode::Stratified, &rat(1, 1 << 18))
                    .unwrap()
                    .path(6),
            );
        }
        let rep = reflection_check(&paths, &rat_int(4));
        assert!(rep.p_max_ge < 0.05);
        assert!(rep.p_twice_end_gt < 0.05);
    }

    #[test]
    fn increment_independence() {
        // empirical correlation of W(1/2) and W(1) - W(1/2) within 3 sigma of 0
        let mut first = Vec::new();
        let mut incr = Vec::new();
        for seed in 0..1024u64 {
            let omega = CantorPoint::from_seed(seed + 13);
            let p = sample_wiener(&omega, 8, SampleMode::Stratified, &rat(1, 1 << 16))
                .unwrap()
                .path(8);
            let half = p.values[128].mid();
            first.push(half);
            incr.push(p.endpoint().mid() - half);
        }
        let products: Vec<f64> = first.iter().zip(&incr).map(|(a, b)| a * b).collect();
        let cov = crate::stats::covariance(&first, &incr);
        let band = 3.0 * crate::stats::mean_sigma(&products) + 0.01;
        assert!(cov.abs() <= band, "cov {cov} band {band}");
    }

    #[test]
    fn holder_fixtures() {
        let z = zero_path(5);
        assert_eq!(holder_estimate(&z, &rat(1, 2)), 0.0);

        // linear path: the quotient |dt|/|dt|^alpha = dt^(1-alpha) is
        // maximized at the full span, giving exactly 1; adjacent pairs give
        // 2^(-m/2) at alpha = 1/2
        let l = linear_path(6);
        let est = holder_estimate(&l, &rat(1, 2));
        assert!((est - 1.0).abs() < 1e-9);
        let dt = 1.0 / 64.0f64;
        let adjacent = dt / dt.sqrt();
        assert!((adjacent - 2.0f64.powf(-3.0)).abs() < 1e-12);

        // monotone in alpha on a fixed path
        let e1 = holder_estimate(&l, &rat(1, 4));
        let e2 = holder_estimate(&l, &rat(1, 2));
        let e3 = holder_estimate(&l, &rat(3, 4));
        assert!(e1 <= e2 + 1e-12 && e2 <= e3 + 1e-12);
    }
}
