//! Topological partitions with measure-null piece boundaries.
//!
//! Pieces are max-metric balls around a dense center sequence minus the
//! closures of all earlier balls. Radii are found by a dyadic scan that
//! certifies, from the valuation's stage bounds, that the candidate sphere
//! carries mass below tolerance: disjoint candidate annuli cannot all be
//! heavy, so the scan terminates.

use super::boxes::BoxRegion;
use super::opens::OpenSet;
use crate::error::{Error, Result};
use crate::exactnum::Rational;
use crate::valuation::Valuation;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct PartitionOpts {
    /// Stage at which valuation lower bounds are read.
    pub stage_budget: u32,
    /// The union of pieces must carry certified mass >= total - mass_defect.
    pub mass_defect: Rational,
    /// Per-piece bound on the certified sphere (annulus) mass.
    pub boundary_tol: Rational,
    /// Number of radius candidates scanned per center.
    pub radius_candidates: u32,
    pub max_pieces: usize,
    /// The valuation's mass is assumed inside [-2^w, 2^w]^d for the sphere
    /// checks; mass beyond is soundly ignored as uncovered.
    pub support_window_exp: u32,
}

impl PartitionOpts {
    pub fn for_tolerance(mass_defect: Rational, stage_budget: u32) -> Self {
        PartitionOpts {
            stage_budget,
            boundary_tol: mass_defect.clone(),
            mass_defect,
            radius_candidates: 16,
            max_pieces: 1 << 17,
            support_window_exp: 6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartitionPiece {
    pub boxes: Vec<BoxRegion>,
    pub center: Vec<Rational>,
    pub radius: Rational,
}

impl PartitionPiece {
    pub fn open_set(&self, dim: usize) -> OpenSet {
        OpenSet::from_boxes(dim, self.boxes.clone())
    }
}

/// Bucket index on centers at pitch eps, so only nearby predecessors are
/// consulted when carving a new piece.
pub(crate) struct BucketIndex {
    pitch: Rational,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl BucketIndex {
    pub(crate) fn new(pitch: Rational) -> Self {
        assert!(pitch.is_positive());
        BucketIndex {
            pitch,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, x: &[Rational]) -> Vec<i64> {
        x.iter()
            .map(|c| {
                (c / self.pitch.clone())
                    .floor()
                    .to_integer()
                    .to_i64()
                    .unwrap_or(i64::MAX / 2)
            })
            .collect()
    }

    pub(crate) fn insert(&mut self, x: &[Rational], idx: usize) {
        self.buckets.entry(self.key(x)).or_default().push(idx);
    }

    pub(crate) fn neighbors(&self, x: &[Rational]) -> Vec<usize> {
        let key = self.key(x);
        let dim = key.len();
        let mut out = Vec::new();
        let mut offsets = vec![-1i64; dim];
        'probe: loop {
            let probe: Vec<i64> = key.iter().zip(&offsets).map(|(k, o)| k + o).collect();
            if let Some(v) = self.buckets.get(&probe) {
                out.extend_from_slice(v);
            }
            for i in 0..dim {
                offsets[i] += 1;
                if offsets[i] <= 1 {
                    continue 'probe;
                }
                offsets[i] = -1;
            }
            return out;
        }
    }
}

pub(crate) fn linf_dist(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.clone() - y.clone()).abs())
        .max()
        .unwrap()
}

/// Certifies that the sphere of radius about r around x is light: the open
/// complement of the closed annulus [r-h, r+h] must carry mass above
/// total - tol at the given stage. The exterior is clipped to the support
/// window, which only loses mass and stays sound.
fn sphere_is_light(
    nu: &dyn Valuation,
    total: &Rational,
    x: &[Rational],
    r: &Rational,
    h: &Rational,
    tol: &Rational,
    stage: u32,
    support_exp: u32,
) -> bool {
    let mut boxes: Vec<BoxRegion> = Vec::new();
    if let Some(b) = BoxRegion::ball(x, &(r.clone() - h.clone())) {
        boxes.push(b);
    }
    let closed_ball = BoxRegion::ball(x, &(r.clone() + h.clone())).expect("positive radius");
    let window = crate::space::window(x.len(), support_exp);
    boxes.extend(window.subtract_closed(&closed_ball));
    let off_sphere = OpenSet::from_boxes(x.len(), boxes);
    let lb = nu.measure_lower(&off_sphere, stage);
    &(total.clone() - lb) < tol
}

/// The internal form: pieces with centers, radii, and box lists.
pub(crate) fn partition_pieces(
    nu: &dyn Valuation,
    eps: &Rational,
    centers: &[Vec<Rational>],
    opts: &PartitionOpts,
) -> Result<Vec<PartitionPiece>> {
    assert!(eps.is_positive());
    let dim = nu.dim();
    let total = nu
        .exact_total()
        .unwrap_or_else(|| crate::valuation::total_lower(nu, opts.stage_budget));
    let quarter = eps.clone() / Rational::from_integer(4.into());
    let k_max = opts.radius_candidates.max(2);
    let spacing = quarter.clone() / Rational::from_integer(((k_max + 1) as i64).into());
    let h = spacing.clone() / Rational::from_integer(4.into());

    let mut pieces: Vec<PartitionPiece> = Vec::new();
    let mut index = BucketIndex::new(eps.clone());
    let mut covered_mass = Rational::zero();

    for center in centers {
        if pieces.len() >= opts.max_pieces {
            break;
        }
        assert_eq!(center.len(), dim);
        // radius scan in (eps/4, eps/2), preferring a certified-light sphere
        let mut chosen: Option<Rational> = None;
        let mut fallback: Option<(Rational, Rational)> = None;
        for k in 1..=k_max {
            let r = quarter.clone()
                + spacing.clone() * Rational::from_integer((k as i64).into());
            if sphere_is_light(
                nu,
                &total,
                center,
                &r,
                &h,
                &opts.boundary_tol,
                opts.stage_budget,
                opts.support_window_exp,
            ) {
                chosen = Some(r);
                break;
            }
            if fallback.is_none() {
                fallback = Some((r.clone(), opts.boundary_tol.clone()));
            }
        }
        let radius = chosen.unwrap_or_else(|| fallback.expect("k_max >= 1").0);
        let ball = match BoxRegion::ball(center, &radius) {
            Some(b) => b,
            None => continue,
        };

        // carve out the closures of overlapping predecessors
        let mut boxes = vec![ball];
        for &p in &index.neighbors(center) {
            let prev = &pieces[p];
            if linf_dist(center, &prev.center) >= radius.clone() + prev.radius.clone() {
                continue;
            }
            let closed = BoxRegion::new(
                prev.center
                    .iter()
                    .map(|c| (c.clone() - prev.radius.clone(), c.clone() + prev.radius.clone()))
                    .collect(),
            )
            .unwrap();
            boxes = boxes
                .into_iter()
                .flat_map(|b| b.subtract_closed(&closed))
                .collect();
            if boxes.is_empty() {
                break;
            }
        }
        if boxes.is_empty() {
            continue;
        }
        index.insert(center, pieces.len());
        // pieces are pairwise disjoint, so per-piece lower bounds add up to
        // a sound lower bound for the union
        covered_mass += nu.measure_lower(
            &OpenSet::from_boxes(dim, boxes.clone()),
            opts.stage_budget,
        );
        pieces.push(PartitionPiece {
            boxes,
            center: center.clone(),
            radius,
        });
        if total.clone() - covered_mass.clone() <= opts.mass_defect {
            return Ok(pieces);
        }
    }

    if total.clone() - covered_mass.clone() <= opts.mass_defect {
        Ok(pieces)
    } else {
        Err(Error::MassStalled {
            budget: opts.stage_budget,
            achieved: covered_mass.to_string(),
            target: (total - opts.mass_defect.clone()).to_string(),
        })
    }
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn certified_union_mass(
    nu: &dyn Valuation,
    pieces: &[PartitionPiece],
    stage: u32,
) -> Rational {
    if pieces.is_empty() {
        return Rational::zero();
    }
    let dim = nu.dim();
    let all: Vec<BoxRegion> = pieces.iter().flat_map(|p| p.boxes.clone()).collect();
    nu.measure_lower(&OpenSet::from_boxes(dim, all), stage)
}

/// Pairwise-disjoint open pieces of diameter < eps whose union exhausts the
/// valuation's mass up to the configured defect.
pub fn boundary_null_partition(
    nu: &dyn Valuation,
    eps: &Rational,
    centers: &[Vec<Rational>],
    opts: &PartitionOpts,
) -> Result<Vec<OpenSet>> {
    let dim = nu.dim();
    Ok(partition_pieces(nu, eps, centers, opts)?
        .into_iter()
        .map(|p| p.open_set(dim))
        .collect())
}

/// Centers of the 2^level dyadic subcells of a frame box, in scan order:
/// the default dense sequence for partitions over a bounding box.
pub fn dyadic_centers(frame: &BoxRegion, level: u32) -> Vec<Vec<Rational>> {
    let per_dim = 1u64 << level.min(16);
    let mut centers: Vec<Vec<Rational>> = vec![Vec::new()];
    for i in 0..frame.dim() {
        let (a, b) = frame.side(i);
        let step = (b.clone() - a.clone()) / Rational::from_integer((per_dim as i64).into());
        let mut next = Vec::new();
        for c in &centers {
            for j in 0..per_dim {
                let mid = a.clone()
                    + step.clone() * Rational::from_integer((j as i64).into())
                    + step.clone() / Rational::from_integer(2.into());
                let mut cc = c.clone();
                cc.push(mid);
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
    fn atom_capture() {
        // point mass at 1/2: one piece containing it, mass bound 1
        let nu = WeightedBoxValuation::dirac(vec![rat(1, 2)]);
        let frame = BoxRegion::interval(rat_int(0), rat_int(1)).unwrap();
        let centers = dyadic_centers(&frame, 3);
        let opts = PartitionOpts::for_tolerance(rat(1, 64), 12);
        let pieces = partition_pieces(&nu, &rat(1, 4), &centers, &opts).unwrap();
        let holding: Vec<_> = pieces
            .iter()
            .filter(|p| p.boxes.iter().any(|b| b.contains_point(&[rat(1, 2)])))
            .collect();
        assert_eq!(holding.len(), 1);
        let mass = certified_union_mass(&nu, &pieces, 12);
        assert_eq!(mass, rat_int(1));
    }

    #[test]
    fn uniform_mass_capture() {
        let nu = WeightedBoxValuation::uniform_unit_interval();
        let frame = BoxRegion::interval(rat_int(0), rat_int(1)).unwrap();
        let centers = dyadic_centers(&frame, 4);
        let opts = PartitionOpts::for_tolerance(rat(1, 100), 16);
        let pieces = partition_pieces(&nu, &rat(1, 2), &centers, &opts).unwrap();
        let mass = certified_union_mass(&nu, &pieces, 16);
        assert!(mass >= rat(99, 100));
        // pieces are disjoint: pairwise exact overlap volume is zero
        let total: Rational = pieces
            .iter()
            .map(|p| nu.measure_of_boxes(&p.boxes))
            .sum();
        assert!(total <= rat_int(1));
        // diameters below eps
        for p in &pieces {
            for b in &p.boxes {
                let (a, c) = b.side(0);
                assert!(c.clone() - a.clone() < rat(1, 2));
            }
        }
    }

    #[test]
    fn two_atoms_split() {
        let nu = WeightedBoxValuation::new(
            1,
            vec![
                (crate::valuation::Atom::Point(vec![rat_int(0)]), rat(1, 2)),
                (crate::valuation::Atom::Point(vec![rat_int(1)]), rat(1, 2)),
            ],
        );
        let frame = BoxRegion::interval(rat(-1, 2), rat(3, 2)).unwrap();
        let centers = dyadic_centers(&frame, 4);
        let opts = PartitionOpts::for_tolerance(rat(1, 64), 12);
        let pieces = partition_pieces(&nu, &rat(1, 2), &centers, &opts).unwrap();
        let masses: Vec<Rational> = pieces
            .iter()
            .map(|p| nu.measure_of_boxes(&p.boxes))
            .filter(|m| m > &Rational::zero())
            .collect();
        assert_eq!(masses.len(), 2);
        assert!(masses.iter().all(|m| m == &rat(1, 2)));
    }

    #[test]
    fn mass_stall_diagnosed() {
        // centers that miss the support cannot certify the mass target
        let nu = WeightedBoxValuation::dirac(vec![rat_int(10)]);
        let frame = BoxRegion::interval(rat_int(0), rat_int(1)).unwrap();
        let centers = dyadic_centers(&frame, 3);
        let opts = PartitionOpts::for_tolerance(rat(1, 64), 8);
        let err = partition_pieces(&nu, &rat(1, 4), &centers, &opts).unwrap_err();
        assert!(matches!(err, Error::MassStalled { .. }));
    }
}
