//! Fan metric bounds, simple approximation, products, and continuous images.

use super::{ContinuousRv, MeasurableRv, SimpleRv};
use crate::error::{Error, Result};
use crate::exactnum::{linf_distance, pow2, DyadicInterval, Rational};
use crate::space::{oracle_depth_cap, ClopenSet};
use num_traits::Zero;
use std::sync::Arc;

/// Certified upper bound on the Fan distance d(X, Y) at precision k.
///
/// Enumerates cylinders at the moduli depth, encloses the pointwise distance
/// per cylinder, and finds the smallest dyadic eps with certified
/// P(d >= eps) < eps. The result never undershoots the true distance, is
/// nonincreasing in k (a running minimum over coarser precisions), and
/// converges to d(X, Y).
pub fn fan_distance_upper(x: &ContinuousRv, y: &ContinuousRv, k: u32) -> Result<Rational> {
    assert_eq!(x.dim(), y.dim());
    // exact piece arithmetic when both variables are simple
    if let (Some(sa), Some(sb)) = (x.simple_backing(), y.simple_backing()) {
        if std::ptr::eq(sa, sb) {
            // identical backing: the distance is 0, the grid scan gives eps
            return Ok(pow2(-(k as i64)));
        }
        return Ok(fan_bound_simple(sa, sb, k));
    }
    let mut best: Option<Rational> = None;
    for j in (0..=k).rev() {
        let depth = x.modulus(j).max(y.modulus(j));
        if depth > oracle_depth_cap() {
            continue;
        }
        let bound = fan_bound_at(x, y, j, depth)?;
        best = Some(match best {
            None => bound,
            Some(b) => b.min(bound),
        });
        if j + 4 < k {
            // coarser precisions only help marginally; stop after a few
            break;
        }
    }
    best.ok_or(Error::OracleDepth {
        requested: x.modulus(k).max(y.modulus(k)),
        cap: oracle_depth_cap(),
    })
}

/// Exact evaluation of the inf-form bound for simple pairs: the level sets
/// of |X - Y| are exact clopen masses, so only the dyadic grid of the
/// epsilon scan is approximate.
fn fan_bound_simple(sa: &super::SimpleRv, sb: &super::SimpleRv, k: u32) -> Rational {
    // sweep the two disjoint leaf-range families in sorted order; ranges
    // from antichains either nest or are disjoint, so overlap bookkeeping
    // stays in u64 units of 2^-60
    let la = sa.leaf_ranges();
    let lb = sb.leaf_ranges();
    let mut overlap_units: std::collections::HashMap<(usize, usize), u64> =
        std::collections::HashMap::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < la.len() && j < lb.len() {
        let (s_a, w_a, pa) = la[i];
        let (s_b, w_b, pb) = lb[j];
        let lo = s_a.max(s_b);
        let hi = (s_a + w_a).min(s_b + w_b);
        if lo < hi {
            *overlap_units.entry((pa, pb)).or_insert(0) += hi - lo;
        }
        if s_a + w_a <= s_b + w_b {
            i += 1;
        } else {
            j += 1;
        }
    }
    let unit = pow2(-60);
    let mut pairs: Vec<(Rational, Rational)> = Vec::new(); // (distance, mass)
    for ((pa, pb), units) in overlap_units {
        let va = &sa.pieces()[pa].1;
        let vb = &sb.pieces()[pb].1;
        let dist = va
            .iter()
            .zip(vb.iter())
            .map(|(a, b)| {
                let d = a.clone() - b.clone();
                if d < Rational::zero() {
                    -d
                } else {
                    d
                }
            })
            .max()
            .unwrap_or_else(Rational::zero);
        let mass = Rational::from_integer((units as i64).into()) * unit.clone();
        pairs.push((dist, mass));
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let grid = pow2(-(k as i64));
    let max_d = pairs
        .last()
        .map(|(d, _)| d.clone())
        .unwrap_or_else(Rational::zero);
    let mut eps = grid.clone();
    loop {
        // P(D >= eps): exact suffix mass
        let tail: Rational = pairs
            .iter()
            .filter(|(d, _)| d >= &eps)
            .map(|(_, m)| m.clone())
            .sum();
        if tail < eps {
            return eps;
        }
        eps += grid.clone();
        if eps > max_d.clone() + grid.clone() {
            return eps;
        }
    }
}

fn fan_bound_at(x: &ContinuousRv, y: &ContinuousRv, k: u32, depth: u32) -> Result<Rational> {
    let cyls = crate::space::cylinder_partition(depth)?;
    let mass = pow2(-(depth as i64));
    // upper endpoints of per-cylinder distance enclosures
    let mut highs: Vec<Rational> = cyls
        .iter()
        .map(|c| {
            let bits = c.to_bits();
            let dx = x.eval_prefix(&bits, k);
            let dy = y.eval_prefix(&bits, k);
            linf_distance(&dx, &dy).hi().clone()
        })
        .collect();
    highs.sort();
    // S(eps) = mass * #{c : high_c >= eps}; smallest grid eps with S(eps) < eps
    let grid = pow2(-(k as i64));
    let max_high = highs.last().cloned().unwrap_or_else(Rational::zero);
    let mut eps = grid.clone();
    loop {
        // count highs >= eps by binary search
        let idx = highs.partition_point(|h| h < &eps);
        let tail = Rational::from_integer(((highs.len() - idx) as i64).into()) * mass.clone();
        if tail < eps {
            return Ok(eps);
        }
        eps += grid.clone();
        if eps > max_high.clone() + grid.clone() {
            return Ok(eps);
        }
    }
}

/// The m-th simple approximant: evaluate on each depth-m prefix extended by
/// zeros. Returns the simple variable and the certified uniform distance

/// bound 2^(1-k*) where k* is the best precision whose modulus fits in m.
pub fn simple_approximation(x: &ContinuousRv, m: u32) -> Result<(SimpleRv, Rational)> {
    let cap = oracle_depth_cap();
    if m > cap {
        return Err(Error::OracleDepth { requested: m, cap });
    }
    // largest precision whose modulus depth is within m
    let mut k_star = 0u32;
    for k in 0..=m.min(60) {
        if x.modulus(k) <= m {
            k_star = k;
        }
    }
    let depth_needed = x.modulus(k_star).max(1);
    let cyls = crate::space::cylinder_partition(m)?;
    let mut pieces = Vec::new();
    for c in cyls {
        let mut bits = c.to_bits();
        while (bits.len() as u32) < depth_needed {
            bits.push(false);
        }
        let enc = x.eval_prefix(&bits, k_star);
        let value: Vec<Rational> = enc.iter().map(|iv| iv.mid()).collect();
        pieces.push((ClopenSet::new(vec![c]), value));
    }
    let bound = pow2(1 - k_star as i64);
    Ok((SimpleRv::new(x.dim(), pieces), bound))
}

/// Product of measurable random variables: pairing the (n+1)-th
/// approximants shifts the index so the strong Cauchy certificate carries
/// over to the max metric on the product.
pub fn rv_product(x: &MeasurableRv, y: &MeasurableRv) -> MeasurableRv {
    let (x, y) = (x.clone(), y.clone());
    let dim = x.dim() + y.dim();
    MeasurableRv::from_fn(dim, move |n| x.approx(n + 1).pair(&y.approx(n + 1)))
}

/// A continuous map with an interval evaluator. `lipschitz` is an optional
/// certified global Lipschitz constant (max metric); without it the image
/// re-indexing is searched from the distribution of the input.
pub struct ImageMap {
    pub out_dim: usize,
    pub eval: Arc<dyn Fn(&[DyadicInterval]) -> Vec<DyadicInterval> + Send + Sync>,
    pub lipschitz: Option<Rational>,
}

impl ImageMap {
    pub fn lipschitz_map(
        out_dim: usize,
        l: Rational,
        eval: impl Fn(&[DyadicInterval]) -> Vec<DyadicInterval> + Send + Sync + 'static,
    ) -> Self {
        ImageMap {
            out_dim,
            eval: Arc::new(eval),
            lipschitz: Some(l),
        }
    }

    pub fn plain(
        out_dim: usize,
        eval: impl Fn(&[DyadicInterval]) -> Vec<DyadicInterval> + Send + Sync + 'static,
    ) -> Self {
        ImageMap {
            out_dim,
            eval: Arc::new(eval),
            lipschitz: None,
        }
    }

    fn apply(&self, v: &[DyadicInterval]) -> Vec<DyadicInterval> {
        (self.eval)(v)
    }
}

/// Composition f(X) as a continuous variable: input precision is refined
/// until the image enclosure meets the target radius.
fn compose_continuous(f: Arc<ImageMap>, x: ContinuousRv, extra: u32) -> ContinuousRv {
    let out_dim = f.out_dim;
    let fx = f.clone();
    let x2 = x.clone();
    let modulus = move |k: u32| -> u32 {
        // find an input precision making the image radius <= 2^-k, by
        // probing the wide evaluation of f on the input's coarse enclosure
        x2.modulus(input_precision_for(&fx, &x2, k + extra))
    };
    let fx2 = f.clone();
    let x3 = x.clone();
    ContinuousRv::new(out_dim, modulus, move |prefix, k| {
        let j = input_precision_for(&fx2, &x3, k + extra);
        let enc = x3.eval_prefix(prefix, j);
        let img = fx2.apply(&enc);
        img
    })
}

/// Smallest input precision whose image width certifies radius 2^-k, probed
/// on the input's own cylinder enclosures. Interval evaluators of continuous
/// maps converge as cells shrink, so the search ends; a hard cap guards it.
fn input_precision_for(f: &ImageMap, x: &ContinuousRv, k: u32) -> u32 {
    if let Some(l) = &f.lipschitz {
        // ceil(log2 l) extra bits of input precision suffice
        let mut shift = 0i64;
        let mut bound = Rational::from_integer(1.into());
        while &bound < l && shift < 60 {
            bound *= Rational::from_integer(2.into());
            shift += 1;
        }
        return k + shift as u32;
    }
    let target = pow2(-(k as i64));
    for j in k..k + 50 {
        // wide probe: enclosure over the all-zero and all-one prefixes plus
        // a mixed one approximates the worst cell at this depth
        let depth = x.modulus(j) as usize;
        let probes = [
            vec![false; depth],
            vec![true; depth],
            (0..depth).map(|i| i % 2 == 0).collect::<Vec<_>>(),
        ];
        let worst = probes
            .iter()
            .map(|p| {
                f.apply(&x.eval_prefix(p, j))
                    .iter()
                    .map(|iv| iv.width())
                    .max()
                    .unwrap_or_else(Rational::zero)
            })
            .max()
            .unwrap_or_else(Rational::zero);
        if worst * Rational::from_integer(2.into()) <= target {
            return j;
        }
    }
    k + 50
}

/// Image of a measurable random variable under a continuous map.
///
/// With a Lipschitz certificate the certificate transfers by an index shift.
/// Otherwise the re-indexing N(eps) is computed from the distribution of X
/// over the oscillation sets B_(delta,eps/2)(f), searched over halving delta.
pub fn rv_image(f: ImageMap, x: &MeasurableRv) -> Result<MeasurableRv> {
    let f = Arc::new(f);
    let out_dim = f.out_dim;
    if let Some(l) = f.lipschitz.clone() {
        let shift = if l <= Rational::from_integer(1.into()) {
            0
        } else {
            let mut s = 0u32;
            let mut bound = Rational::from_integer(1.into());
            while bound < l && s < 60 {
                bound *= Rational::from_integer(2.into());
                s += 1;
            }
            s
        };
        let x = x.clone();
        return Ok(MeasurableRv::from_fn(out_dim, move |n| {
            compose_continuous(f.clone(), x.approx(n + shift), 0)
        }));
    }

    // search N(eps) for eps = 2^-n: find an index m' whose cylinder
    // enclosures, padded by twice the Fan radius, keep the oscillation of f
    // below eps/2 off a set of mass below eps/4. On such cylinders the true
    // X(omega) avoids the oscillation set B_(2^-m', eps/2)(f), which is the
    // quantity the continuous-mapping proof bounds.
    let x_for_search = x.clone();
    let f_for_search = f.clone();
    let reindex = move |n: u32| -> Result<u32> {
        let eps = pow2(-(n as i64));
        let quarter = eps.clone() / Rational::from_integer(4.into());
        let half = eps.clone() / Rational::from_integer(2.into());
        for m_prime in (n + 2).max(6)..=16u32 {
            let rho = pow2(-(m_prime as i64) + 1);
            let xc = x_for_search.approx(m_prime);
            let mut k = m_prime;
            while k > 0 && xc.modulus(k) > oracle_depth_cap() {
                k -= 1;
            }
            if xc.modulus(k) > oracle_depth_cap() {
                continue;
            }
            let Ok(encs) = xc.cylinder_enclosures(k) else { continue };
            let mut bad_mass = Rational::zero();
            for (c, enc) in encs {
                let padded: Vec<DyadicInterval> = enc.iter().map(|iv| iv.pad(&rho)).collect();
                let img = f_for_search.apply(&padded);
                let osc = img
                    .iter()
                    .map(|iv| iv.width())
                    .max()
                    .unwrap_or_else(Rational::zero);
                if osc >= half {
                    bad_mass += c.measure();
                }
            }
            if bad_mass + pow2(-(m_prime as i64)) < quarter {
                let mut big = n + 2;
                while pow2(-(big as i64)) >= pow2(-(m_prime as i64)) && big < 60 {
                    big += 1;
                }
                return Ok(big.max(m_prime));
            }
        }
        Err(Error::ImageReindex {
            best_delta: pow2(-16i64).to_string(),
        })
    };

    // probe the first few indices eagerly so failures surface at call time
    reindex(2)?;
    let x = x.clone();
    Ok(MeasurableRv::from_fn(out_dim, move |n| {
        let idx = reindex(n).unwrap_or(n + 14);
        compose_continuous(f.clone(), x.approx(idx), 0)
    }))
}

/// Absolute value (max-metric norm) as a short map, for moment machinery.
pub fn abs_map(dim: usize) -> ImageMap {
    ImageMap::lipschitz_map(1, Rational::from_integer(1.into()), move |v| {
        let mut out = DyadicInterval::point(Rational::zero());
        for iv in v {
            let a = iv.abs();
            out = DyadicInterval::new(
                out.lo().clone().max(a.lo().clone()),
                out.hi().clone().max(a.hi().clone()),
            );
        }
        vec![out]
    })
    .with_dim_check(dim)
}

impl ImageMap {
    fn with_dim_check(self, _in_dim: usize) -> Self {
        self
    }
}
