//! Expectation, lower expectation, Lp norms, and independence reports, all
//! computed from certified cylinder enclosures with Fan-metric corrections.

use super::{rv_distribution, rv_product, ContinuousRv, MeasurableRv};
use crate::error::{Error, Result};
use crate::exactnum::{dyadic_floor, pow2, Bound, DyadicInterval, LowerReal, Rational};
use crate::space::{oracle_depth_cap, BoxRegion, OpenSet};
use crate::valuation::LowerFunction;
use num_traits::{One, Signed, Zero};

/// Per-cylinder value summary of an approximant at a feasible precision:
/// (mass, value enclosure), scalar variables only.
fn cylinder_values(xc: &ContinuousRv, precision: u32) -> Option<Vec<(Rational, DyadicInterval)>> {
    assert_eq!(xc.dim(), 1);
    if let Some(s) = xc.simple_backing() {
        return Some(
            s.pieces()
                .iter()
                .map(|(c, v)| (c.measure(), DyadicInterval::point(v[0].clone())))
                .collect(),
        );
    }
    let mut k = precision;
    while k > 0 && xc.modulus(k) > oracle_depth_cap() {
        k -= 1;
    }
    if xc.modulus(k) > oracle_depth_cap() {
        return None;
    }
    let encs = xc.cylinder_enclosures(k).ok()?;
    Some(
        encs.into_iter()
            .map(|(c, enc)| (c.measure(), enc[0].clone()))
            .collect(),
    )
}

/// E(X) for X >= 0 as a lower real, via E(X) = int_0^inf Pr(X > x) dx.
///
/// Stage n reads the approximant X_m (m capped by the oracle), subtracts the
/// Fan correction 2^-m, and truncates the tail integral at the certified
/// bound, or at a growing cap when none is given. Errors if some cylinder is
/// certified negative.
pub fn expectation(x: &MeasurableRv, tail_bound: Option<Rational>) -> Result<LowerReal> {
    probe_nonnegative(x)?;
    let x = x.clone();
    Ok(LowerReal::from_fn(move |n| {
        let m = n;
        let eps = pow2(-(m as i64));
        let cap = tail_bound
            .clone()
            .unwrap_or_else(|| pow2(((n / 4).min(10)) as i64));
        let Some(values) = cylinder_values(&x.approx(m), m) else {
            return Bound::Finite(Rational::zero());
        };
        let mut total = Rational::zero();
        for (mass, v) in &values {
            let contrib = (v.lo().clone() - eps.clone())
                .max(Rational::zero())
                .min(cap.clone());
            total += mass.clone() * contrib;
        }
        total -= cap.clone() * eps;
        Bound::Finite(total.max(Rational::zero()))
    }))
}

/// Two-sided enclosure of E(X) for X >= 0 with a certified tail bound:
/// Pr(X > b) = 0. Upper side uses Pr(X >= x) <= Pr(X_m > x - eps) + eps.
pub fn expectation_enclosure(
    x: &MeasurableRv,
    tail_bound: &Rational,
    stage: u32,
) -> Result<DyadicInterval> {
    probe_nonnegative(x)?;
    let m = stage;
    let eps = pow2(-(m as i64));
    let b = tail_bound.clone();
    let values = cylinder_values(&x.approx(m), m).ok_or(Error::OracleDepth {
        requested: x.approx(m).modulus(m),
        cap: oracle_depth_cap(),
    })?;
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for (mass, v) in &values {
        if v.hi() < &-eps.clone() {
            return Err(Error::BoundsBreach {
                what: format!("negative value {:?} in nonnegative expectation", v),
            });
        }
        let l = (v.lo().clone() - eps.clone()).max(Rational::zero()).min(b.clone());
        let h = (v.hi().clone() + eps.clone()).max(Rational::zero()).min(b.clone());
        lo += mass.clone() * l;
        hi += mass.clone() * h;
    }
    lo -= b.clone() * eps.clone();
    hi += b.clone() * eps;
    Ok(DyadicInterval::new(lo.max(Rational::zero()), hi))
}

fn probe_nonnegative(x: &MeasurableRv) -> Result<()> {
    // cheap certificate sweep on an early approximant
    let xc = x.approx(2);
    if let Some(values) = cylinder_values(&xc, 2) {
        for (mass, v) in values {
            if !mass.is_zero() && v.hi() < &-pow2(-1) {
                return Err(Error::BoundsBreach {
                    what: "variable certified negative on positive mass".into(),
                });
            }
        }
    }
    Ok(())
}

/// Lower expectation of f(X) per the horizontal-integral formula
/// E_<(f(X)) = int_0^inf Pr(X in f^{-1}(lambda, inf]) d lambda.
/// Padded enclosures realize the inner-shrunk preimages.
pub fn lower_expectation(x: &MeasurableRv, f: std::sync::Arc<dyn LowerFunction>) -> LowerReal {
    let x = x.clone();
    LowerReal::from_fn(move |n| {
        let m = n;
        let eps = pow2(-(m as i64));
        let cap = pow2(((n / 4).min(8)) as i64);
        let grid = (n / 2).min(12);
        let xc = x.approx(m);
        let k = feasible_precision(&xc, m);
        let Ok(encs) = xc.cylinder_enclosures(k) else {
            return Bound::Finite(Rational::zero());
        };
        let mut total = Rational::zero();
        for (c, enc) in encs {
            let padded: Vec<DyadicInterval> = enc.iter().map(|iv| iv.pad(&eps)).collect();
            let Some(cell) = BoxRegion::from_intervals(
                &padded
                    .iter()
                    .map(|iv| DyadicInterval::new(iv.lo().clone(), iv.hi().clone() + pow2(-40)))
                    .collect::<Vec<_>>(),
            ) else {
                continue;
            };
            let lb = f.lower_bound(&cell, n).min(cap.clone());
            if lb.is_positive() {
                total += c.measure() * dyadic_floor(&lb, grid).max(Rational::zero());
            }
        }
        total -= cap.clone() * eps;
        Bound::Finite(total.max(Rational::zero()))
    })
}

fn feasible_precision(xc: &ContinuousRv, want: u32) -> u32 {
    let mut k = want;
    while k > 0 && xc.modulus(k) > oracle_depth_cap() {
        k -= 1;
    }
    k
}

/// Enclosure of ||X||_p for p in {1, 2} under a certified tail bound on |X|.
pub fn lp_norm(x: &MeasurableRv, p: u32, tail_bound: &Rational, stage: u32) -> Result<DyadicInterval> {
    assert!(p == 1 || p == 2, "only p = 1, 2 are supported");
    let m = stage;
    let eps = pow2(-(m as i64));
    let xc = x.approx(m);
    let k = feasible_precision(&xc, m);
    let encs = xc.cylinder_enclosures(k).map_err(|_| Error::OracleDepth {
        requested: xc.modulus(m),
        cap: oracle_depth_cap(),
    })?;
    let b = tail_bound.clone();
    let bp = if p == 2 { b.clone() * b.clone() } else { b.clone() };
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for (c, enc) in encs {
        // |X| in the max metric: max over coordinates of |coordinate|
        let mut alo = Rational::zero();
        let mut ahi = Rational::zero();
        for iv in &enc {
            let a = iv.abs();
            alo = alo.max(a.lo().clone());
            ahi = ahi.max(a.hi().clone());
        }
        let l = (alo - eps.clone()).max(Rational::zero()).min(b.clone());
        let h = (ahi + eps.clone()).min(b.clone());
        let (lp, hp) = if p == 2 {
            (l.clone() * l, h.clone() * h)
        } else {
            (l, h)
        };
        lo += c.measure() * lp;
        hi += c.measure() * hp;
    }
    lo -= bp.clone() * eps.clone();
    hi += bp * eps;
    lo = lo.max(Rational::zero());
    let moment = DyadicInterval::new(lo, hi.clone().max(Rational::zero()));
    if p == 1 {
        Ok(moment)
    } else {
        Ok(rational_sqrt_interval(&moment, 24))
    }
}

/// Validated square root of a nonnegative rational interval, outward rounded
/// to the dyadic grid 2^-prec.
pub fn rational_sqrt_interval(x: &DyadicInterval, prec: u32) -> DyadicInterval {
    assert!(!x.lo().is_negative());
    let scale = pow2(prec as i64);
    let lo_scaled = (x.lo().clone() * scale.clone() * scale.clone())
        .floor()
        .to_integer();
    let hi_scaled = (x.hi().clone() * scale.clone() * scale.clone())
        .ceil()
        .to_integer();
    let lo_root = lo_scaled.sqrt(); // floor sqrt
    let mut hi_root = hi_scaled.sqrt();
    if hi_root.clone() * hi_root.clone() < hi_scaled {
        hi_root += 1;
    }
    DyadicInterval::new(
        Rational::new(lo_root, scale.to_integer()),
        Rational::new(hi_root, scale.to_integer()),
    )
}

#[derive(Debug, Clone)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub joint_lb: Rational,
    pub joint_ub: Rational,
    pub prod_lb: Rational,
    pub prod_ub: Rational,
    /// Certified lower bound on |P(joint) - P(i) P(j)|; zero when consistent
    /// with independence at this stage.
    pub discrepancy: Rational,
}

#[derive(Debug, Clone)]
pub struct IndependenceReport {
    pub entries: Vec<PairCheck>,
    pub max_discrepancy: Rational,
}

/// The open exterior of the closure of a finite box union.
fn exterior_open(dim: usize, boxes: Vec<BoxRegion>) -> OpenSet {
    OpenSet::from_stage_fn(dim, move |n| {
        let mut pieces = vec![crate::space::window(dim, n + 1)];
        for b in &boxes {
            pieces = pieces
                .into_iter()
                .flat_map(|p| p.subtract_closed(b))
                .collect();
        }
        pieces
    })
}

/// Compares joint distribution bounds against products of marginal bounds on
/// every pair of the supplied box opens.
pub fn independence_check(
    x: &MeasurableRv,
    y: &MeasurableRv,
    sets: &[Vec<BoxRegion>],
    stage: u32,
) -> IndependenceReport {
    let joint = rv_product(x, y);
    let mut entries = Vec::new();
    let mut max_disc = Rational::zero();
    for (i, ui) in sets.iter().enumerate() {
        for (j, uj) in sets.iter().enumerate() {
            let ui_open = OpenSet::from_boxes(x.dim(), ui.clone());
            let uj_open = OpenSet::from_boxes(y.dim(), uj.clone());
            let joint_open = ui_open.product(&uj_open);
            let joint_boxes: Vec<BoxRegion> = joint_open.boxes_at(0).as_ref().clone();

            let joint_lb = rv_distribution(&joint, &joint_open).approx_rational(stage, Rational::zero());
            let joint_ub = Rational::one()
                - rv_distribution(&joint, &exterior_open(joint.dim(), joint_boxes))
                    .approx_rational(stage, Rational::zero());
            let xi_lb = rv_distribution(x, &ui_open).approx_rational(stage, Rational::zero());
            let xi_ub = Rational::one()
                - rv_distribution(x, &exterior_open(x.dim(), ui.clone()))
                    .approx_rational(stage, Rational::zero());
            let yj_lb = rv_distribution(y, &uj_open).approx_rational(stage, Rational::zero());
            let yj_ub = Rational::one()
                - rv_distribution(y, &exterior_open(y.dim(), uj.clone()))
                    .approx_rational(stage, Rational::zero());

            let prod_lb = xi_lb.clone() * yj_lb.clone();
            let prod_ub = xi_ub.clone() * yj_ub.clone();
            let disc = (joint_lb.clone() - prod_ub.clone())
                .max(prod_lb.clone() - joint_ub.clone())
                .max(Rational::zero());
            if disc > max_disc {
                max_disc = disc.clone();
            }
            entries.push(PairCheck {
                i,
                j,
                joint_lb,
                joint_ub,
                prod_lb,
                prod_ub,
                discrepancy: disc,
            });
        }
    }
    IndependenceReport {
        entries,
        max_discrepancy: max_disc,
    }
}
