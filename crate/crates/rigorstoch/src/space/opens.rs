//! Open and closed subsets of R^d as lazily enumerated unions of rational
//! boxes. Stage n of an open set is a finite, cumulative list of boxes; the
//! represented set is the union over all stages. Unbounded sets enter through
//! a growing window [-2^n, 2^n]^d.

use super::boxes::BoxRegion;
use crate::exactnum::{pow2, Rational};
use num_traits::Zero;
use std::sync::{Arc, Mutex};

struct Stages {
    f: Box<dyn Fn(u32) -> Vec<BoxRegion> + Send + Sync>,
    cache: Mutex<Vec<Arc<Vec<BoxRegion>>>>,
}

#[derive(Clone)]
pub struct OpenSet {
    dim: usize,
    stages: Arc<Stages>,
}

impl std::fmt::Debug for OpenSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OpenSet(dim {}, stage0 {} boxes)", self.dim, self.boxes_at(0).len())
    }
}

/// The window box [-2^n, 2^n]^d used to exhaust the whole space.
pub fn window(dim: usize, n: u32) -> BoxRegion {
    let r = pow2(n as i64);
    BoxRegion::new((0..dim).map(|_| (-r.clone(), r.clone())).collect()).unwrap()
}

impl OpenSet {
    pub fn from_stage_fn(
        dim: usize,
        f: impl Fn(u32) -> Vec<BoxRegion> + Send + Sync + 'static,
    ) -> Self {
        OpenSet {
            dim,
            stages: Arc::new(Stages {
                f: Box::new(f),
                cache: Mutex::new(Vec::new()),
            }),
        }
    }

    pub fn from_boxes(dim: usize, boxes: Vec<BoxRegion>) -> Self {
        assert!(boxes.iter().all(|b| b.dim() == dim));
        Self::from_stage_fn(dim, move |_| boxes.clone())
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_boxes(dim, Vec::new())
    }

    /// The whole space, exhausted by growing windows.
    pub fn full(dim: usize) -> Self {
        Self::from_stage_fn(dim, move |n| vec![window(dim, n)])
    }

    /// One-dimensional open interval.
    pub fn interval(a: Rational, b: Rational) -> Self {
        Self::from_boxes(1, BoxRegion::interval(a, b).into_iter().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cumulative finite enumeration at a stage. Boxes from earlier stages
    /// are always included.
    pub fn boxes_at(&self, n: u32) -> Arc<Vec<BoxRegion>> {
        let mut cache = self.stages.cache.lock().unwrap();
        while cache.len() <= n as usize {
            let i = cache.len() as u32;
            let mut next: Vec<BoxRegion> = match cache.last() {
                None => Vec::new(),
                Some(prev) => prev.as_ref().clone(),
            };
            for b in (self.stages.f)(i) {
                if !next.contains(&b) {
                    next.push(b);
                }
            }
            cache.push(Arc::new(next));
        }
        cache[n as usize].clone()
    }

    pub fn union(&self, other: &OpenSet) -> OpenSet {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.clone(), other.clone());
        OpenSet::from_stage_fn(self.dim, move |n| {
            let mut out = a.boxes_at(n).as_ref().clone();
            out.extend(b.boxes_at(n).as_ref().clone());
            out
        })
    }

    pub fn union_many(dim: usize, sets: Vec<OpenSet>) -> OpenSet {
        assert!(sets.iter().all(|s| s.dim() == dim));
        OpenSet::from_stage_fn(dim, move |n| {
            sets.iter()
                .flat_map(|s| s.boxes_at(n).as_ref().clone())
                .collect()
        })
    }

    pub fn intersection(&self, other: &OpenSet) -> OpenSet {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.clone(), other.clone());
        OpenSet::from_stage_fn(self.dim, move |n| {
            let xs = a.boxes_at(n);
            let ys = b.boxes_at(n);
            let mut out = Vec::new();
            for x in xs.iter() {
                for y in ys.iter() {
                    if let Some(z) = x.intersect(y) {
                        out.push(z);
                    }
                }
            }
            out
        })
    }

    /// Cartesian product with another open set (stagewise box products).
    pub fn product(&self, other: &OpenSet) -> OpenSet {
        let (a, b) = (self.clone(), other.clone());
        let dim = self.dim + other.dim;
        OpenSet::from_stage_fn(dim, move |n| {
            let xs = a.boxes_at(n);
            let ys = b.boxes_at(n);
            let mut out = Vec::new();
            for x in xs.iter() {
                for y in ys.iter() {
                    let mut sides = x.sides().to_vec();
                    sides.extend_from_slice(y.sides());
                    out.push(BoxRegion::new(sides).unwrap());
                }
            }
            out
        })
    }

    /// Stagewise containment test, sound but not complete: for every box of
    /// self, the closed core left after shrinking faces by a stage-dependent
    /// margin must be covered by other's boxes. The margin vanishes as the
    /// stage grows, so robust containment is eventually certified.
    pub fn contained_in_at(&self, other: &OpenSet, n: u32) -> bool {
        let mine = self.boxes_at(n);
        let theirs = other.boxes_at(n);
        mine.iter().all(|b| {
            let min_side = b
                .sides()
                .iter()
                .map(|(a, c)| c.clone() - a.clone())
                .min()
                .unwrap();
            let h = min_side * pow2(-(n as i64) - 3);
            let core: Vec<(Rational, Rational)> = b
                .sides()
                .iter()
                .map(|(a, c)| (a.clone() + h.clone(), c.clone() - h.clone()))
                .collect();
            super::boxes::closed_cell_covered(&core, &theirs)
        })
    }

    pub fn contains_point_at(&self, x: &[Rational], n: u32) -> bool {
        self.boxes_at(n).iter().any(|b| b.contains_point(x))
    }
}

/// The eps-inner set: every box shrunk by eps on every face, degenerate boxes
/// dropped. An under-approximation of the metric inner set, exact on boxes.
pub fn inner_shrink(u: &OpenSet, eps: &Rational) -> OpenSet {
    assert!(eps > &Rational::zero());
    let u2 = u.clone();
    let eps = eps.clone();
    OpenSet::from_stage_fn(u.dim(), move |n| {
        u2.boxes_at(n)
            .iter()
            .filter_map(|b| b.shrink(&eps))
            .collect()
    })
}

/// A closed set, represented by its open complement. Membership is refutable
/// at a finite stage, never confirmable.
#[derive(Clone, Debug)]
pub struct ClosedSet {
    complement: OpenSet,
}

impl ClosedSet {
    pub fn from_complement(complement: OpenSet) -> Self {
        ClosedSet { complement }
    }

    /// The closed box prod [a_i, b_i] (degenerate sides allowed: points).
    pub fn from_box_corners(corners: Vec<(Rational, Rational)>) -> Self {
        assert!(corners.iter().all(|(a, b)| a <= b));
        let dim = corners.len();
        ClosedSet {
            complement: OpenSet::from_stage_fn(dim, move |n| {
                let w = window(dim, n + 1);
                // complement of the closed box inside the window: per
                // coordinate, the two open slabs on either side
                let mut out = Vec::new();
                for i in 0..dim {
                    let (a, b) = &corners[i];
                    let (wl, wh) = (&w.sides()[i].0, &w.sides()[i].1);
                    if wl < a {
                        let mut sides = w.sides().to_vec();
                        sides[i] = (wl.clone(), a.clone());
                        out.extend(BoxRegion::new(sides));
                    }
                    if b < wh {
                        let mut sides = w.sides().to_vec();
                        sides[i] = (b.clone(), wh.clone());
                        out.extend(BoxRegion::new(sides));
                    }
                }
                out
            }),
        }
    }

    pub fn empty(dim: usize) -> Self {
        ClosedSet {
            complement: OpenSet::full(dim),
        }
    }

    pub fn whole_space(dim: usize) -> Self {
        ClosedSet {
            complement: OpenSet::empty(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.complement.dim()
    }

    pub fn complement(&self) -> &OpenSet {
        &self.complement
    }

    /// Membership refuted by stage n?
    pub fn excludes_point_at(&self, x: &[Rational], n: u32) -> bool {
        self.complement.contains_point_at(x, n)
    }
}

/// Closed eps-fattening: the complement is the inner shrink of the complement.
pub fn closed_fatten(a: &ClosedSet, eps: &Rational) -> ClosedSet {
    ClosedSet {
        complement: inner_shrink(a.complement(), eps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, rat_int};

    #[test]
    fn inner_shrink_examples() {
        let u = OpenSet::interval(rat_int(0), rat_int(1));
        let s = inner_shrink(&u, &rat(1, 4));
        let boxes = s.boxes_at(0);
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].side(0), (&rat(1, 4), &rat(3, 4)));

        let collapsed = inner_shrink(&u, &rat(1, 2));
        assert!(collapsed.boxes_at(3).is_empty());
    }

    #[test]
    fn inner_shrink_nesting() {
        // I_{1/4+1/4}((0,2)) inside I_{1/4}(I_{1/4}((0,2))), stagewise
        let u = OpenSet::interval(rat_int(0), rat_int(2));
        let once = inner_shrink(&inner_shrink(&u, &rat(1, 4)), &rat(1, 4));
        let combined = inner_shrink(&u, &rat(1, 2));
        for n in 0..4 {
            assert!(combined.contained_in_at(&once, n));
        }
    }

    #[test]
    fn inner_shrink_monotone() {
        let u = OpenSet::interval(rat_int(0), rat_int(1));
        let v = OpenSet::interval(rat(-1, 1), rat_int(2));
        let su = inner_shrink(&u, &rat(1, 8));
        let sv = inner_shrink(&v, &rat(1, 8));
        for n in 0..4 {
            assert!(su.contained_in_at(&sv, n));
        }
    }

    #[test]
    fn closed_fatten_examples() {
        let a = ClosedSet::from_box_corners(vec![(rat_int(0), rat_int(1))]);
        let fat = closed_fatten(&a, &rat(1, 2));
        // [-1/2, 3/2]: the point 5/4 is inside (not excluded), 2 is excluded
        assert!(!fat.excludes_point_at(&[rat(5, 4)], 6));
        assert!(fat.excludes_point_at(&[rat_int(2)], 6));

        let empty = ClosedSet::empty(1);
        let fat_empty = closed_fatten(&empty, &rat_int(1));
        assert!(fat_empty.excludes_point_at(&[rat_int(0)], 6));

        let point = ClosedSet::from_box_corners(vec![(rat_int(0), rat_int(0))]);
        let ball = closed_fatten(&point, &rat(1, 4));
        assert!(!ball.excludes_point_at(&[rat(1, 4)], 8));
        assert!(ball.excludes_point_at(&[rat(3, 8)], 8));
        assert!(ball.excludes_point_at(&[rat(-3, 8)], 8));
    }

    #[test]
    fn full_space_window_growth() {
        let full = OpenSet::full(2);
        assert!(full.contains_point_at(&[rat_int(3), rat_int(-3)], 2));
        assert!(!full.contains_point_at(&[rat_int(100), rat_int(0)], 2));
        assert!(full.contains_point_at(&[rat_int(100), rat_int(0)], 7));
    }
}
