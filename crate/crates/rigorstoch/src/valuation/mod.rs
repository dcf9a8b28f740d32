//! Valuations: measure-like set functions defined on open sets, giving
//! certified rational lower bounds stage by stage, together with the lower
//! horizontal (Choquet) integral, bounded integration, and conditioning on a
//! regular pair.

pub mod weighted;

pub use weighted::{Atom, ModularityReport, WeightedBoxValuation};

use crate::error::{Error, Result};
use crate::exactnum::{dyadic_floor, pow2, DyadicInterval, LowerReal, Rational, UpperReal};
use crate::space::{BoxRegion, OpenSet};
use num_traits::Zero;
use std::sync::Arc;

/// A valuation on R^d. `measure_lower` must be monotone in the stage and in
/// the set argument (at equal stages), and its supremum over stages is the
/// represented measure of the open set.
pub trait Valuation: Send + Sync {
    fn dim(&self) -> usize;

    /// Certified lower bound of nu(U) using U's stage-n enumeration.
    fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational;

    /// Exact total mass, when the valuation is effectively finite.
    fn exact_total(&self) -> Option<Rational> {
        None
    }

    fn total_mass(&self) -> LowerReal
    where
        Self: Sized + Clone + 'static,
    {
        let me = self.clone();
        let full = OpenSet::full(self.dim());
        LowerReal::from_fn(move |n| {
            crate::exactnum::Bound::Finite(me.measure_lower(&full, n))
        })
    }

    /// Stage-n lower bound for the horizontal integral of psi >= 0.
    ///
    /// The default realizes the threshold-chain supremum on a dyadic grid:
    /// granularity 2^-floor(n/2) (capped), value cap 2^ceil(n/4), preimages
    /// under-approximated by window cells certified above each threshold.
    fn lower_integral_stage(&self, psi: &dyn LowerFunction, stage: u32) -> Rational {
        let h = (stage / 2).min(8) as i64;
        let grid = pow2(-h);
        let cap_exp = (stage / 4).min(5) as i64;
        let cap = pow2(cap_exp);
        let depth = (stage / 2).min(8);
        let cells = bisect_window(self.dim(), 3, depth);
        let mut thresholds: Vec<Rational> = Vec::new();
        let mut p = grid.clone();
        while p <= cap {
            thresholds.push(p.clone());
            p += grid.clone();
        }
        let mut total = Rational::zero();
        for p in &thresholds {
            let above: Vec<BoxRegion> = cells
                .iter()
                .filter(|c| &psi.lower_bound(c, stage) > p)
                .cloned()
                .collect();
            if above.is_empty() {
                continue;
            }
            let u = OpenSet::from_boxes(self.dim(), above);
            total += grid.clone() * self.measure_lower(&u, stage);
        }
        total
    }

    /// Downcast hook so operators can take exact fast paths on atom fixtures.
    fn as_weighted(&self) -> Option<&WeightedBoxValuation> {
        None
    }
}

/// Dyadic subdivision of the window [-2^w, 2^w]^d at a given depth.
/// Cells overlap slightly (closed grid lines are shared), which is harmless
/// for lower bounds.
pub(crate) fn bisect_window(dim: usize, w: u32, depth: u32) -> Vec<BoxRegion> {
    let per_dim = (1u64 << depth.min(12)) as i64;
    let lo = -pow2(w as i64);
    let step = pow2(w as i64 + 1) / Rational::from_integer(per_dim.into());
    let mut cells: Vec<Vec<(Rational, Rational)>> = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for c in &cells {
            for j in 0..per_dim {
                let a = lo.clone() + step.clone() * Rational::from_integer(j.into());
                let b = a.clone() + step.clone();
                let mut cc = c.clone();
                cc.push((a, b));
                next.push(cc);
            }
        }
        cells = next;
        if cells.len() > 1 << 14 {
            break;
        }
    }
    cells
        .into_iter()
        .filter_map(BoxRegion::new)
        .collect()
}

/// A nonnegative lower-semicontinuous integrand: certified lower bounds on
/// the infimum over a cell, monotone in the stage and under cell refinement.
pub trait LowerFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn lower_bound(&self, cell: &BoxRegion, stage: u32) -> Rational;
}

/// Characteristic function of an open set as a lower function.
pub struct IndicatorLower {
    pub set: OpenSet,
}

impl LowerFunction for IndicatorLower {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn lower_bound(&self, cell: &BoxRegion, stage: u32) -> Rational {
        let boxes = self.set.boxes_at(stage);
        if crate::space::closed_cell_covered(cell.sides(), &boxes) {
            Rational::from_integer(1.into())
        } else {
            Rational::zero()
        }
    }
}

/// Lower function from an interval evaluator, shifted so it is nonnegative:
/// cell bound = eval(cell).lo - shift (clamped at 0).
pub struct EvalLower<F: Fn(&BoxRegion) -> DyadicInterval + Send + Sync> {
    pub dim: usize,
    pub eval: F,
    pub shift: Rational,
}

impl<F: Fn(&BoxRegion) -> DyadicInterval + Send + Sync> LowerFunction for EvalLower<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lower_bound(&self, cell: &BoxRegion, _stage: u32) -> Rational {
        let v = (self.eval)(cell).lo().clone() - self.shift.clone();
        v.max(Rational::zero())
    }
}

/// Pointwise scaled sum a1 psi1 + a2 psi2, for the linearity identities.
pub struct LinearLower {
    pub terms: Vec<(Rational, Arc<dyn LowerFunction>)>,
}

impl LowerFunction for LinearLower {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn lower_bound(&self, cell: &BoxRegion, stage: u32) -> Rational {
        self.terms
            .iter()
            .map(|(a, f)| a.clone() * f.lower_bound(cell, stage))
            .sum()
    }
}

/// The lower horizontal integral as a lower real. Stages past the budget
/// reuse the budget stage, so work stays bounded.
pub fn lower_integral(
    nu: Arc<dyn Valuation>,
    psi: Arc<dyn LowerFunction>,
    stage_budget: u32,
) -> LowerReal {
    LowerReal::from_fn(move |n| {
        let s = n.min(stage_budget);
        crate::exactnum::Bound::Finite(nu.lower_integral_stage(psi.as_ref(), s))
    })
}

/// Upper bounds for the measure of a closed set, from the complement.
pub fn measure_of_closed(nu: Arc<dyn Valuation>, a: &crate::space::ClosedSet) -> Result<UpperReal> {
    let total = nu.exact_total().ok_or(Error::TotalMassUnknown)?;
    let complement = a.complement().clone();
    Ok(UpperReal::from_fn(move |n| {
        crate::exactnum::Bound::Finite(total.clone() - nu.measure_lower(&complement, n))
    }))
}

/// A continuous integrand with certified global bounds a < f < b, evaluated
/// by intervals on cells.
pub trait BoundedFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_interval(&self, cell: &BoxRegion) -> DyadicInterval;
    fn bounds(&self) -> (Rational, Rational);
}

struct ShiftedLower<'a> {
    f: &'a dyn BoundedFunction,
    negate: bool,
    shift: Rational,
}

impl<'a> LowerFunction for ShiftedLower<'a> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn lower_bound(&self, cell: &BoxRegion, _stage: u32) -> Rational {
        let v = self.f.eval_interval(cell);
        let raw = if self.negate {
            // b - f: lower bound is shift - hi
            self.shift.clone() - v.hi().clone()
        } else {
            // f - a: lower bound is lo - shift
            v.lo().clone() - self.shift.clone()
        };
        raw.max(Rational::zero())
    }
}

/// Two-sided enclosure of the integral of a bounded continuous function:
/// [a c + int(f - a), b c - int(b - f)] at the requested stage.
pub fn bounded_integral(
    nu: &dyn Valuation,
    f: &dyn BoundedFunction,
    stage: u32,
) -> Result<DyadicInterval> {
    let total = nu.exact_total().ok_or(Error::TotalMassUnknown)?;
    let (a, b) = f.bounds();
    if a >= b {
        return Err(Error::BoundsBreach {
            what: format!("bounds out of order: {} >= {}", a, b),
        });
    }
    let low_part = ShiftedLower {
        f,
        negate: false,
        shift: a.clone(),
    };
    let high_part = ShiftedLower {
        f,
        negate: true,
        shift: b.clone(),
    };
    let lo = a.clone() * total.clone() + nu.lower_integral_stage(&low_part, stage);
    let hi = b.clone() * total.clone() - nu.lower_integral_stage(&high_part, stage);
    if lo > hi {
        return Err(Error::BoundsBreach {
            what: format!("integral enclosure inverted: [{}, {}]; supplied bounds likely wrong", lo, hi),
        });
    }
    Ok(DyadicInterval::new(lo, hi))
}

/// Conditional valuation on a caller-certified regular pair V subset A with
/// nu-null A \ V. Construction probes the denominator; a denominator whose
/// upper bound hits zero within the probe budget is refused.
#[derive(Clone)]
pub struct ConditionalValuation {
    nu: Arc<dyn Valuation>,
    v: OpenSet,
    a_complement: OpenSet,
    total: Rational,
}

impl std::fmt::Debug for ConditionalValuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ConditionalValuation(dim {})", self.nu.dim())
    }
}

impl ConditionalValuation {
    fn denominator_upper(&self, stage: u32) -> Rational {
        self.total.clone() - self.nu.measure_lower(&self.a_complement, stage)
    }
}

impl Valuation for ConditionalValuation {
    fn dim(&self) -> usize {
        self.nu.dim()
    }

    fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational {
        let num = self.nu.measure_lower(&u.intersection(&self.v), stage);
        let den = self.denominator_upper(stage);
        if den <= Rational::zero() {
            // regular-pair certificate was false; 0 is the only sound bound
            return Rational::zero();
        }
        num / den
    }

    fn exact_total(&self) -> Option<Rational> {
        None
    }
}

pub fn conditional_valuation(
    nu: Arc<dyn Valuation>,
    v: OpenSet,
    a: &crate::space::ClosedSet,
    probe_stage: u32,
) -> Result<ConditionalValuation> {
    let total = nu.exact_total().ok_or(Error::TotalMassUnknown)?;
    let cond = ConditionalValuation {
        nu,
        v,
        a_complement: a.complement().clone(),
        total,
    };
    for s in 0..=probe_stage {
        if cond.denominator_upper(s) <= Rational::zero() {
            return Err(Error::UndefinedConditional { stage: s });
        }
    }
    Ok(cond)
}

/// Stage-n lower bound of nu over the whole space, via the window.
pub fn total_lower(nu: &dyn Valuation, stage: u32) -> Rational {
    let full = OpenSet::full(nu.dim());
    nu.measure_lower(&full, stage)
}

/// Snap a value down to the dyadic grid 2^-k, never below zero.
pub(crate) fn grid_floor(x: &Rational, k: u32) -> Rational {
    let f = dyadic_floor(x, k);
    f.max(Rational::zero())
}
