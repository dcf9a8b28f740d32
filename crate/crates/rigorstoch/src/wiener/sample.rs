//! The certified sampler: Cantor-space bits to Gaussian coefficient
//! enclosures to piecewise-linear path enclosures with a deterministic
//! uniform tail radius on each stratum.

use super::gauss_grid::{phi_at_int, quantile_via_grid};
use super::{beta, tail_radius, tail_radius_stratified};
use crate::error::{Error, Result};
use crate::exactnum::{rat_to_f64_up, DyadicInterval, Rational};
use crate::fint::FInterval;
use crate::space::CantorPoint;

/// Base stratum: strata are indexed 6, 7, ... regardless of the level cap so
/// that coefficient decodes agree across caps on the same bits.
pub const STRATUM_BASE: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    /// Coefficients truncated to the stratum's beta bounds: deterministic
    /// tail enclosures.
    Stratified,
    /// Plain quantile decode; tail bound holds off an event of measure
    /// 2^-level, violations flag the sample.
    Statistical,
}

/// Coefficient-level view of one sampled path.
#[derive(Clone, Debug)]
pub struct WienerSample {
    pub level_cap: u32,
    pub stratum: u32,
    pub mode: SampleMode,
    /// Coefficient of the linear basis function t.
    pub linear: FInterval,
    /// coeffs[n][k]: coefficient of the (n,k) Schauder tent, n <= level_cap.
    pub coeffs: Vec<Vec<FInterval>>,
    /// Certified sup-norm bound on the discarded tail, on this stratum.
    pub tail_radius: Rational,
    /// Sup-norm contribution of coefficient enclosure widths.
    pub coeff_slack: f64,
    pub flagged: bool,
}

/// A path enclosure on a dyadic grid.
#[derive(Clone, Debug)]
pub struct WienerPath {
    pub grid_level: u32,
    pub sample_level: u32,
    pub stratum: u32,
    /// Values at t = i 2^-grid_level, i = 0..=2^grid_level.
    pub values: Vec<FInterval>,
    /// tail radius + coefficient width contribution, as an f64 upper bound.
    pub uniform_slack: f64,
    pub flagged: bool,
}

fn cantor_pair(c: u64, t: u64) -> u64 {
    (c + t) * (c + t + 1) / 2 + t
}

fn channel(omega: &CantorPoint, c: u64) -> impl Fn(u64) -> bool + '_ {
    move |t| omega.bit(cantor_pair(c, t))
}

/// Channel index of the (n,k) wavelet coefficient; 0 is the stratum channel,
/// 1 the linear coefficient.
fn wavelet_channel(n: u32, k: u32) -> u64 {
    2 + ((1u64 << n) - 1) + k as u64
}

fn leading_ones(bits: &impl Fn(u64) -> bool, cap: u32) -> Option<u32> {
    for i in 0..cap {
        if !bits(i as u64) {
            return Some(i);
        }
    }
    None
}

/// Decodes one coefficient from a bit channel. `trunc` carries the stratum
/// bound in stratified mode. Bits are consumed adaptively until the
/// enclosure meets the tolerance or the bit budget runs out.
fn decode_coeff(
    bits: &impl Fn(u64) -> bool,
    trunc: Option<u32>,
    tol: f64,
) -> Result<FInterval> {
    let grid_pitch = 4.0 / 1024.0;
    for &b in &[20u32, 32, 48] {
        let last = b == 48;
        let mut j: u64 = 0;
        for t in 0..b {
            j = (j << 1) | bits(t as u64) as u64;
        }
        let scale = 1.0 / (1u64 << b) as f64;
        let u = FInterval::new(j as f64 * scale, (j + 1) as f64 * scale);
        if !last && (u.lo <= 0.0 || u.hi >= 1.0) {
            // all-zero or all-one prefix so far: take more bits
            continue;
        }
        let (target, support) = match trunc {
            Some(beta) => {
                let pl = phi_at_int(-(beta as i64));
                let ph = phi_at_int(beta as i64);
                let t = pl.add(&u.mul(&ph.sub(&pl)));
                (t, beta as f64)
            }
            None => (u, 50.0),
        };
        let q = quantile_via_grid(&target, support);
        if q.width() <= tol + grid_pitch || last {
            return Ok(q);
        }
    }
    unreachable!("the 48-bit attempt always returns")
}

/// Samples the Wiener coefficients from a Cantor point.
///
/// Stratified mode first decodes the stratum index j >= 6 from a geometric
/// unary code (stratum base + leading ones), then each coefficient through
/// the Gaussian law conditioned to |A| < beta(j, n). Statistical mode decodes
/// unconditioned coefficients and flags the sample when some |A_{n,k}| >= n
/// with n >= 6 cannot be ruled out.
pub fn sample_wiener(
    omega: &CantorPoint,
    level_cap: u32,
    mode: SampleMode,
    tol: &Rational,
) -> Result<WienerSample> {
    if level_cap < 6 {
        return Err(Error::StratumTooLow { m: level_cap });
    }
    let tol_f = rat_to_f64_up(tol).max(1e-12);
    let stratum = match mode {
        SampleMode::Stratified => {
            let ones = leading_ones(&channel(omega, 0), 40).ok_or(Error::Unsupported(
                "stratum channel exhausted (40 leading ones)".into(),
            ))?;
            STRATUM_BASE + ones
        }
        SampleMode::Statistical => level_cap,
    };
    let mut flagged = false;
    let mut coeff_slack = 0.0f64;

    let trunc_for = |level: u32| -> Option<u32> {
        match mode {
            SampleMode::Stratified => Some(beta(stratum, level)),
            SampleMode::Statistical => None,
        }
    };

    // linear coefficient: bounded like level 0 in the beta table
    let linear = decode_coeff(&channel(omega, 1), trunc_for(0), tol_f)?;
    coeff_slack += linear.width();
    if mode == SampleMode::Statistical && linear.abs().hi >= 6.0 {
        flagged = true;
    }

    let mut coeffs = Vec::with_capacity(level_cap as usize + 1);
    for n in 0..=level_cap {
        let tent_peak = 0.5
            / ((1u64 << (n / 2)) as f64 * if n % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 });
        let mut level = Vec::with_capacity(1 << n);
        let mut max_width = 0.0f64;
        for k in 0..(1u32 << n) {
            let a = decode_coeff(&channel(omega, wavelet_channel(n, k)), trunc_for(n), tol_f)?;
            if mode == SampleMode::Statistical && n >= 6 && a.abs().hi >= n as f64 {
                flagged = true;
            }
            max_width = max_width.max(a.width());
            level.push(a);
        }
        // tents at one level have disjoint supports
        coeff_slack += max_width * tent_peak * 1.0001;
        coeffs.push(level);
    }

    let tail = match mode {
        SampleMode::Stratified => tail_radius_stratified(stratum, level_cap),
        SampleMode::Statistical => tail_radius(level_cap),
    };
    Ok(WienerSample {
        level_cap,
        stratum,
        mode,
        linear,
        coeffs,
        tail_radius: tail,
        coeff_slack,
        flagged,
    })
}

impl WienerSample {
    /// Path enclosure on the grid t = i 2^-g. The partial sum is piecewise
    /// linear with breakpoints at multiples of 2^-(level_cap + 1), so any
    /// g > level_cap evaluates it exactly.
    pub fn path(&self, grid_level: u32) -> WienerPath {
        let g = grid_level;
        let points = (1usize << g) + 1;
        let sqrt2 = FInterval::point(2.0).sqrt();
        let mut values = Vec::with_capacity(points);
        for i in 0..points {
            // t = i 2^-g exactly in f64 (g <= 52)
            let t = i as f64 / (1u64 << g) as f64;
            let mut v = self.linear.scale(t);
            for n in 0..=self.level_cap {
                let scale_n = 1u64 << n;
                let pos = t * scale_n as f64; // in [0, 2^n]
                let k = pos.floor() as u32;
                if k >= scale_n as u32 {
                    continue; // t = 1: all tents vanish
                }
                let frac = pos - k as f64; // position inside the tent support
                let dist = frac.min(1.0 - frac); // exact dyadic for dyadic t
                if dist == 0.0 {
                    continue;
                }
                // tent value = 2^(n/2) * dist * 2^-n = dist * 2^(-n/2)
                let tent = if n % 2 == 0 {
                    FInterval::point(dist / (1u64 << (n / 2)) as f64)
                } else {
                    FInterval::point(dist / (1u64 << ((n + 1) / 2)) as f64).mul(&sqrt2)
                };
                v = v.add(&self.coeffs[n as usize][k as usize].mul(&tent));
            }
            values.push(v);
        }
        values[0] = FInterval::ZERO; // W(0) = 0 exactly
        WienerPath {
            grid_level: g,
            sample_level: self.level_cap,
            stratum: self.stratum,
            values,
            uniform_slack: rat_to_f64_up(&self.tail_radius) + self.coeff_slack,
            flagged: self.flagged,
        }
    }
}

impl WienerPath {
    pub fn endpoint(&self) -> FInterval {
        *self.values.last().unwrap()
    }

    pub fn value_at_time(&self, t: f64) -> FInterval {
        let idx = (t * (1u64 << self.grid_level) as f64).round() as usize;
        self.values[idx.min(self.values.len() - 1)]
    }

    /// Enclosure of the running maximum over the grid (the exact maximum of
    /// the piecewise-linear partial sum once the grid resolves the sample
    /// level).
    pub fn max_enclosure(&self) -> FInterval {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.values {
            lo = lo.max(v.lo);
            hi = hi.max(v.hi);
        }
        FInterval::new(lo, hi)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.mid()).collect()
    }
}

/// The public validated quantile on exact rational intervals: the precise
/// bisection form (not the grid shortcut), per the tolerance contract.
pub fn gaussian_quantile(u: &DyadicInterval, tol: &Rational) -> Result<DyadicInterval> {
    let zero = Rational::from_integer(0.into());
    let one = Rational::from_integer(1.into());
    if u.lo() <= &zero || u.hi() >= &one {
        return Err(Error::QuantileEdge);
    }
    let uf = FInterval::from_rational(u.lo(), u.hi());
    let tol_f = rat_to_f64_up(tol).max(1e-12);
    let q = crate::fint::gauss_quantile(&uf, tol_f / 2.0)?;
    Ok(q.to_dyadic())
}

/// Deterministic check that a finer-level resampling of the same bits stays
/// inside this sample's enclosure fattened by its tail radius, at every
/// breakpoint of the coarser grid.
pub fn tail_soundness_violations(coarse: &WienerPath, fine: &WienerPath) -> usize {
    assert!(fine.grid_level >= coarse.grid_level);
    let step = 1usize << (fine.grid_level - coarse.grid_level);
    let slack = coarse.uniform_slack;
    let mut violations = 0;
    for (i, c) in coarse.values.iter().enumerate() {
        let f = &fine.values[i * step];
        let fat = c.pad(slack);
        if !(fat.lo <= f.hi && f.lo <= fat.hi) {
            violations += 1;
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;

    fn tol() -> Rational {
        rat(1, 1 << 20)
    }

    #[test]
    fn deterministic_and_zero_at_origin() {
        let omega = CantorPoint::from_seed(11);
        let s1 = sample_wiener(&omega, 6, SampleMode::Stratified, &tol()).unwrap();
        let s2 = sample_wiener(&omega, 6, SampleMode::Stratified, &tol()).unwrap();
        let (p1, p2) = (s1.path(7), s2.path(7));
        assert_eq!(p1.values.len(), 129);
        for (a, b) in p1.values.iter().zip(p2.values.iter()) {
            assert_eq!(a, b);
        }
        assert_eq!(p1.values[0], FInterval::ZERO);
        assert!(!p1.flagged);
    }

    #[test]
    fn endpoint_equals_linear_coefficient() {
        // all tents vanish at t = 1, so W(1) is the linear coefficient
        let omega = CantorPoint::from_seed(5);
        let s = sample_wiener(&omega, 6, SampleMode::Stratified, &tol()).unwrap();
        let p = s.path(6);
        let e = p.endpoint();
        assert!(e.lo >= s.linear.lo - 1e-12 && e.hi <= s.linear.hi + 1e-12);
    }

    #[test]
    fn coefficient_width_respects_tolerance() {
        let omega = CantorPoint::from_seed(77);
        let s = sample_wiener(&omega, 8, SampleMode::Stratified, &rat(1, 1 << 14)).unwrap();
        // typical coefficients decode narrowly; slack accounts for the rest
        assert!(s.linear.width() <= 0.01);
        assert!(s.coeff_slack < 0.2, "slack {}", s.coeff_slack);
    }

    #[test]
    fn levels_refine_within_tail_radius() {
        // same bits, higher cap: the finer path stays inside the coarser
        // enclosure fattened by its tail radius
        for seed in 0..25u64 {
            let omega = CantorPoint::from_seed(seed);
            let coarse = sample_wiener(&omega, 6, SampleMode::Stratified, &tol())
                .unwrap()
                .path(9);
            let fine = sample_wiener(&omega, 8, SampleMode::Stratified, &tol())
                .unwrap()
                .path(9);
            assert_eq!(tail_soundness_violations(&coarse, &fine), 0, "seed {seed}");
        }
    }

    #[test]
    fn statistical_mode_mostly_unflagged() {
        let mut flags = 0;
        for seed in 0..60u64 {
            let omega = CantorPoint::from_seed(1000 + seed);
            let s = sample_wiener(&omega, 6, SampleMode::Statistical, &tol()).unwrap();
            if s.flagged {
                flags += 1;
            }
        }
        // the good event has probability >= 1 - 2^-6 per coefficient family
        assert!(flags <= 6, "{flags} of 60 flagged");
    }

    #[test]
    fn zero_bits_give_negative_median_coefficients() {
        // all-zero channels decode u near 0, so coefficients sit deep left;
        // the enclosure still has finite certified width in stratified mode
        let omega = CantorPoint::zeros();
        let s = sample_wiener(&omega, 6, SampleMode::Stratified, &tol()).unwrap();
        assert!(s.linear.hi < 0.0);
        assert!(s.linear.lo >= -(s.stratum as f64) - 1e-9);
    }

    #[test]
    fn quantile_op_round_trip() {
        let u = DyadicInterval::new(rat(84, 100), rat(85, 100));
        let q = gaussian_quantile(&u, &rat(1, 1 << 12)).unwrap();
        // Phi over the result covers [0.84, 0.85], so 1 is inside
        assert!(q.contains(&Rational::from_integer(1.into())));
        let center = gaussian_quantile(&DyadicInterval::point(rat(1, 2)), &rat(1, 1 << 12)).unwrap();
        assert!(center.contains(&Rational::from_integer(0.into())));
        assert!(center.width() <= rat(1, 1 << 10));
        assert!(gaussian_quantile(&DyadicInterval::new(rat(0, 1), rat(1, 2)), &tol()).is_err());
    }

    #[test]
    fn ensemble_variance_sane() {
        // W(1) over 512 seeded paths: sample variance within a wide band
        let mut endpoints = Vec::new();
        for seed in 0..512u64 {
            let omega = CantorPoint::from_seed(seed * 7 + 3);
            let s = sample_wiener(&omega, 6, SampleMode::Stratified, &tol()).unwrap();
            endpoints.push(s.linear.mid());
        }
        let var = crate::stats::variance(&endpoints);
        assert!((0.75..1.3).contains(&var), "var {var}");
        let mean = crate::stats::mean(&endpoints);
        assert!(mean.abs() < 0.2, "mean {mean}");
    }
}
