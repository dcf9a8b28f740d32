//! Distributions of measurable random variables, and the converse:
//! realizing a given valuation as a random variable on Cantor space.

use super::{ContinuousRv, MeasurableRv, SimpleRv};
use crate::error::{Error, Result};
use crate::exactnum::{dyadic_floor, pow2, Bound, LowerReal, Rational};
use crate::space::partition::{linf_dist, partition_pieces, BucketIndex, PartitionOpts};
use crate::space::{
    closed_cell_covered, inner_shrink, oracle_depth_cap, BoxRegion, ClopenSet, Cylinder, OpenSet,
};
use crate::valuation::Valuation;
use num_traits::{One, ToPrimitive, Zero};
use std::sync::Arc;

/// Lower bound at a stage for P(X_c in V), from exact simple masses when
/// available, else from cylinder enclosures certified inside V.
fn prob_lower_continuous(xc: &ContinuousRv, v: &OpenSet, precision: u32, stage: u32) -> Rational {
    let boxes = v.boxes_at(stage);
    if let Some(s) = xc.simple_backing() {
        return s.prob_in_boxes(&boxes);
    }
    // largest precision whose cylinder enumeration fits the oracle cap
    let mut k = precision;
    while k > 0 && xc.modulus(k) > oracle_depth_cap() {
        k -= 1;
    }
    if xc.modulus(k) > oracle_depth_cap() {
        return Rational::zero();
    }
    let Ok(encs) = xc.cylinder_enclosures(k) else {
        return Rational::zero();
    };
    let mut total = Rational::zero();
    for (c, enc) in encs {
        let cell: Vec<(Rational, Rational)> = enc
            .iter()
            .map(|iv| (iv.lo().clone(), iv.hi().clone()))
            .collect();
        if closed_cell_covered(&cell, &boxes) {
            total += c.measure();
        }
    }
    total
}

/// The distribution Pr(X in U) as a lower real:
/// the supremum over m of P(X_m in I_(2^-m)(U)) - 2^-m, clamped at 0. Each
/// stage contributes its own m-term; the monotone stage cache realizes the
/// running maximum.
pub fn rv_distribution(x: &MeasurableRv, u: &OpenSet) -> LowerReal {
    let x = x.clone();
    let u = u.clone();
    LowerReal::from_fn(move |m| {
        let eps = pow2(-(m as i64));
        let shrunk = inner_shrink(&u, &eps);
        let p = prob_lower_continuous(&x.approx(m), &shrunk, m, m) - eps;
        Bound::Finite(p.max(Rational::zero()))
    })
}

/// Options for realizing a valuation as a random variable.
#[derive(Clone, Debug)]
pub struct RealizeOpts {
    /// Deepest partition level; pieces at level n have diameter < 2^-n and
    /// the approximant tail is constant past this level.
    pub level_budget: u32,
    /// Stage for valuation lower bounds during allocation.
    pub stage_budget: u32,
    /// The support must lie in [-2^w, 2^w]^d.
    pub window_exp: u32,
}

impl Default for RealizeOpts {
    fn default() -> Self {
        RealizeOpts {
            level_budget: 10,
            stage_budget: 24,
            window_exp: 2,
        }
    }
}

struct RlPiece {
    boxes: Vec<BoxRegion>,
    rep: Vec<Rational>,
    center: Vec<Rational>,
    radius: Rational,
    /// Assigned cylinders; exact dyadic mass.
    cyls: Vec<Cylinder>,
    mass_units: u128,
    /// Certified floor of the piece's measure, in the same units.
    floor_units: u128,
}

/// Takes `want` units (of 2^-g each) from the pool, splitting cylinders as
/// needed. Returns the taken cylinders; the pool keeps the rest.
fn take_units(pool: &mut Vec<Cylinder>, mut want: u128, g: u32) -> Vec<Cylinder> {
    let mut out = Vec::new();
    while want > 0 {
        let Some(c) = pool.pop() else { break };
        let units = 1u128 << (g - c.len() as u32);
        if units <= want {
            want -= units;
            out.push(c);
        } else {
            pool.push(c.child(true));
            pool.push(c.child(false));
        }
    }
    out
}

fn units_of(cyls: &[Cylinder], g: u32) -> u128 {
    cyls.iter().map(|c| 1u128 << (g - c.len() as u32)).sum()
}

/// Builds a measurable random variable whose distribution is the given
/// probability valuation, by the refining-partition construction: pieces of
/// diameter < 2^-n get cylinder chunks of dyadic mass below their certified
/// measure, nested inside the chunks of the parent pieces.
pub fn rv_realize(nu: Arc<dyn Valuation>, opts: &RealizeOpts) -> Result<MeasurableRv> {
    if nu.exact_total() != Some(Rational::one()) {
        return Err(Error::Unsupported(
            "realization needs a probability valuation with exact total 1".into(),
        ));
    }
    let dim = nu.dim();
    let w = crate::space::window(dim, opts.window_exp);
    let default_rep = w.center();

    // level 0: everything on one virtual piece; granularity at level n is
    // g(n) = 2n + 8, so the root carries 2^8 units of 2^-8
    let mut levels: Vec<Vec<RlPiece>> = vec![vec![RlPiece {
        boxes: vec![w.clone()],
        rep: default_rep.clone(),
        center: default_rep.clone(),
        radius: pow2(opts.window_exp as i64 + 1),
        cyls: vec![Cylinder::root()],
        mass_units: 1 << 8,
        floor_units: 1 << 8,
    }]];
    let mut pool: Vec<Cylinder> = Vec::new();

    for n in 1..=opts.level_budget {
        let eps = pow2(-(n as i64));
        let defect = pow2(-(n as i64) - 2);
        let popts = PartitionOpts {
            stage_budget: (n + 10).min(opts.stage_budget.max(n + 6)),
            mass_defect: defect.clone(),
            boundary_tol: defect,
            radius_candidates: 12,
            max_pieces: 1 << 18,
            support_window_exp: opts.window_exp + 1,
        };
        let centers = level_centers(&w, n);
        let parts = partition_pieces(nu.as_ref(), &eps, &centers, &popts)?;

        // index parents for overlap lookup
        let parents = levels.last().unwrap();
        let parent_pitch = pow2(-(n as i64 - 1)).max(pow2(-(opts.level_budget as i64)));
        let mut pindex = BucketIndex::new(parent_pitch);
        for (i, p) in parents.iter().enumerate() {
            pindex.insert(&p.center, i);
        }

        // refine children against parents
        let g_prev = 2 * (n - 1) + 8;
        let g = 2 * n + 8;
        struct Staged {
            boxes: Vec<BoxRegion>,
            rep: Vec<Rational>,
            center: Vec<Rational>,
            radius: Rational,
            parent: usize,
            floor_units: u128,
        }
        let mut staged: Vec<Staged> = Vec::new();
        for part in &parts {
            let mut parent_ids = pindex.neighbors(&part.center);
            if parents.len() == 1 {
                parent_ids = vec![0];
            }
            parent_ids.sort_unstable();
            parent_ids.dedup();
            for pid in parent_ids {
                let parent = &parents[pid];
                if linf_dist(&part.center, &parent.center)
                    > part.radius.clone() + parent.radius.clone()
                {
                    continue;
                }
                let mut boxes = Vec::new();
                for a in &part.boxes {
                    for b in &parent.boxes {
                        if let Some(c) = a.intersect(b) {
                            boxes.push(c);
                        }
                    }
                }
                if boxes.is_empty() {
                    continue;
                }
                let lb = nu.measure_lower(
                    &OpenSet::from_boxes(dim, boxes.clone()),
                    popts.stage_budget,
                );
                let floor = dyadic_floor(&lb, g).max(Rational::zero());
                let floor_units = (floor * pow2(g as i64))
                    .to_integer()
                    .to_u128()
                    .unwrap_or(0);
                let rep = boxes[0].center();
                staged.push(Staged {
                    boxes,
                    rep,
                    center: part.center.clone(),
                    radius: part.radius.clone(),
                    parent: pid,
                    floor_units,
                });
            }
        }

        // allocate parent chunks to children, nested
        let mut new_level: Vec<RlPiece> = Vec::new();
        for (pid, parent) in parents.iter().enumerate() {
            let mut kid_ids: Vec<usize> = (0..staged.len())
                .filter(|&i| staged[i].parent == pid && staged[i].floor_units > 0)
                .collect();
            // deterministic order
            kid_ids.sort_by(|&a, &b| staged[a].center.cmp(&staged[b].center));
            let q_units = parent.mass_units << (g - g_prev); // parent units rescaled
            let mut floors: Vec<u128> =
                kid_ids.iter().map(|&i| staged[i].floor_units).collect();
            let mut total: u128 = floors.iter().sum();
            // shave to fit inside the parent chunk
            let mut j = 0;
            while total > q_units && j < floors.len() {
                let excess = total - q_units;
                let cut = excess.min(floors[j]);
                floors[j] -= cut;
                total -= cut;
                j += 1;
            }
            let mut parent_pool = parent.cyls.clone();
            for (&kid, &units) in kid_ids.iter().zip(floors.iter()) {
                if units == 0 {
                    continue;
                }
                let cyls = take_units(&mut parent_pool, units, g);
                let got = units_of(&cyls, g);
                let s = &staged[kid];
                new_level.push(RlPiece {
                    boxes: s.boxes.clone(),
                    rep: s.rep.clone(),
                    center: s.center.clone(),
                    radius: s.radius.clone(),
                    cyls,
                    mass_units: got,
                    floor_units: s.floor_units,
                });
            }
            // leftover parent mass returns to the free pool
            pool.extend(parent_pool);
        }

        // top-ups: children still below their certified floor draw from the
        // pool, raising the total allocated mass toward 1
        for piece in new_level.iter_mut() {
            if piece.floor_units > piece.mass_units {
                let want = piece.floor_units - piece.mass_units;
                let got = take_units(&mut pool, want, g);
                let got_units = units_of(&got, g);
                piece.cyls.extend(got);
                piece.mass_units += got_units;
            }
        }

        let assigned: u128 = new_level.iter().map(|p| p.mass_units).sum();
        let assigned_mass = Rational::from_integer((assigned as i64).into()) * pow2(-(g as i64));
        let target = Rational::one() - pow2(-(n as i64) - 1);
        if assigned_mass < target {
            return Err(Error::MassStalled {
                budget: opts.stage_budget,
                achieved: assigned_mass.to_string(),
                target: target.to_string(),
            });
        }
        // normalize units bookkeeping to the current granularity
        levels.push(new_level);
    }

    // build the simple approximants
    let mut approximants: Vec<ContinuousRv> = Vec::new();
    for (n, level) in levels.iter().enumerate() {
        if n == 0 {
            approximants.push(ContinuousRv::constant(default_rep.clone()));
            continue;
        }
        let mut pieces: Vec<(ClopenSet, Vec<Rational>)> = Vec::new();
        let mut all_assigned: Vec<Cylinder> = Vec::new();
        for p in level {
            if p.cyls.is_empty() {
                continue;
            }
            pieces.push((ClopenSet::new(p.cyls.clone()), p.rep.clone()));
            all_assigned.extend(p.cyls.iter().copied());
        }
        // catch-all piece: complement of the assigned cylinders
        let rest = clopen_complement(&all_assigned);
        if !rest.cylinders().is_empty() {
            pieces.push((rest, default_rep.clone()));
        }
        approximants.push(ContinuousRv::from_simple(SimpleRv::new(dim, pieces)));
    }

    let deepest = approximants.len() - 1;
    let approximants = Arc::new(approximants);
    Ok(MeasurableRv::from_fn(dim, move |j| {
        let idx = ((j as usize) + 2).min(deepest);
        approximants[idx].clone()
    }))
}

/// Complement of a disjoint cylinder family, as an antichain.
fn clopen_complement(assigned: &[Cylinder]) -> ClopenSet {
    // walk the binary trie: a node is free if no assigned cylinder covers it
    // and it covers no assigned cylinder; recurse otherwise
    fn walk(node: Cylinder, assigned: &[Cylinder], out: &mut Vec<Cylinder>) {
        let covered = assigned.iter().any(|a| node.extends(a));
        if covered {
            return;
        }
        let any_below = assigned.iter().any(|a| a.extends(&node));
        if !any_below {
            out.push(node);
            return;
        }
        walk(node.child(false), assigned, out);
        walk(node.child(true), assigned, out);
    }
    let mut out = Vec::new();
    walk(Cylinder::root(), assigned, &mut out);
    ClopenSet::new(out)
}

/// Ball centers at pitch 2^-(n+1) sweeping the window.
fn level_centers(w: &BoxRegion, n: u32) -> Vec<Vec<Rational>> {
    let mut per_dim: Vec<Vec<Rational>> = Vec::new();
    for (a, b) in w.sides() {
        let pitch = pow2(-(n as i64) - 1);
        let mut xs = Vec::new();
        let mut x = a.clone() + pitch.clone() / Rational::from_integer(2.into());
        while &x < b {
            xs.push(x.clone());
            x += pitch.clone();
        }
        per_dim.push(xs);
    }
    let mut centers: Vec<Vec<Rational>> = vec![Vec::new()];
    for coords in per_dim {
        let mut next = Vec::new();
        for c in &centers {
            for x in &coords {
                let mut cc = c.clone();
                cc.push(x.clone());
                next.push(cc);
            }
        }
        centers = next;
        if centers.len() > 1 << 18 {
            break;
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, rat_int};
    use crate::valuation::WeightedBoxValuation;

    #[test]
    fn distribution_of_binary_expansion() {
        let x = MeasurableRv::from_continuous(ContinuousRv::binary_expansion());
        let u = OpenSet::interval(rat(1, 4), rat(3, 4));
        let d = rv_distribution(&x, &u);
        let lb = d.approx_rational(12, Rational::zero());
        assert!(lb <= rat(1, 2));
        assert!(rat(1, 2) - lb.clone() <= pow2(-7), "lb {lb}");
    }

    #[test]
    fn distribution_empty_and_full() {
        let x = MeasurableRv::from_continuous(ContinuousRv::binary_expansion());
        let empty = OpenSet::empty(1);
        assert_eq!(
            rv_distribution(&x, &empty).approx_rational(10, Rational::zero()),
            Rational::zero()
        );
        let big = OpenSet::interval(rat_int(-1), rat_int(2));
        let lb = rv_distribution(&x, &big).approx_rational(12, Rational::zero());
        assert!(Rational::one() - lb <= pow2(-8));
    }

    #[test]
    fn distribution_is_modular_on_box_opens() {
        // nu_X(U) + nu_X(V) = nu_X(U u V) + nu_X(U n V) in the limit; the
        // stage-14 bounds agree within the stage slack on dyadic boxes
        let x = MeasurableRv::from_continuous(ContinuousRv::binary_expansion());
        let lb = |u: &OpenSet| rv_distribution(&x, u).approx_rational(14, Rational::zero());
        for (a, b, c, d) in [
            (rat(1, 8), rat(5, 8), rat(3, 8), rat(7, 8)),
            (rat(0, 1), rat(1, 2), rat(1, 4), rat(3, 4)),
            (rat(1, 4), rat(3, 8), rat(1, 2), rat(3, 4)),
        ] {
            let u = OpenSet::interval(a.clone(), b.clone());
            let v = OpenSet::interval(c.clone(), d.clone());
            let lhs = lb(&u) + lb(&v);
            let rhs = lb(&u.union(&v)) + lb(&u.intersection(&v));
            let gap = if lhs > rhs { lhs - rhs } else { rhs - lhs };
            assert!(gap <= pow2(-6), "modularity gap {gap}");
        }
    }

    #[test]
    fn realize_dirac() {
        let nu: Arc<dyn Valuation> = Arc::new(WeightedBoxValuation::dirac(vec![rat(1, 2)]));
        let opts = RealizeOpts {
            level_budget: 6,
            ..Default::default()
        };
        let x = rv_realize(nu, &opts).unwrap();
        // every approximant value sits near 1/2 on almost all mass
        let u = OpenSet::interval(rat(1, 4), rat(3, 4));
        let lb = rv_distribution(&x, &u).approx_rational(8, Rational::zero());
        assert!(Rational::one() - lb.clone() <= pow2(-4), "lb {lb}");
    }

    #[test]
    fn realize_two_atoms_round_trip() {
        let nu: Arc<dyn Valuation> = Arc::new(WeightedBoxValuation::new(
            1,
            vec![
                (crate::valuation::Atom::Point(vec![rat_int(0)]), rat(1, 2)),
                (crate::valuation::Atom::Point(vec![rat_int(1)]), rat(1, 2)),
            ],
        ));
        let opts = RealizeOpts {
            level_budget: 7,
            ..Default::default()
        };
        let x = rv_realize(nu, &opts).unwrap();
        let u0 = OpenSet::interval(rat(-1, 4), rat(1, 4));
        let u1 = OpenSet::interval(rat(3, 4), rat(5, 4));
        let lb0 = rv_distribution(&x, &u0).approx_rational(9, Rational::zero());
        let lb1 = rv_distribution(&x, &u1).approx_rational(9, Rational::zero());
        assert!(rat(1, 2) - lb0.clone() <= pow2(-4), "lb0 {lb0}");
        assert!(rat(1, 2) - lb1.clone() <= pow2(-4), "lb1 {lb1}");
        assert!(lb0 <= rat(1, 2) && lb1 <= rat(1, 2));
    }

    #[test]
    fn realize_uniform_round_trip() {
        let nu: Arc<dyn Valuation> = Arc::new(WeightedBoxValuation::uniform_unit_interval());
        let opts = RealizeOpts {
            level_budget: 8,
            ..Default::default()
        };
        let x = rv_realize(nu, &opts).unwrap();
        for (a, b) in [(rat(1, 4), rat(3, 4)), (rat_int(0), rat(1, 2)), (rat(1, 8), rat(7, 8))] {
            let width = b.clone() - a.clone();
            let u = OpenSet::interval(a, b);
            let lb = rv_distribution(&x, &u).approx_rational(10, Rational::zero());
            assert!(lb <= width.clone() + pow2(-6));
            assert!(width - lb.clone() <= pow2(-5), "lb {lb}");
        }
    }
}
