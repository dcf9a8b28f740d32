//! Open rational boxes in R^d and the exact grid decompositions used for
//! union volume, coverage, and set difference. The metric everywhere is the
//! max metric, so metric balls are boxes and stay inside exact arithmetic.

use crate::exactnum::{DyadicInterval, Rational};
use num_traits::{One, Zero};

/// The open box prod_i (lo_i, hi_i), all endpoints rational, lo_i < hi_i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxRegion {
    sides: Vec<(Rational, Rational)>,
}

impl BoxRegion {
    pub fn new(sides: Vec<(Rational, Rational)>) -> Option<Self> {
        if sides.is_empty() || sides.iter().any(|(a, b)| a >= b) {
            return None;
        }
        Some(BoxRegion { sides })
    }

    pub fn interval(a: Rational, b: Rational) -> Option<Self> {
        Self::new(vec![(a, b)])
    }

    /// The open ball of radius r around x in the max metric.
    pub fn ball(center: &[Rational], r: &Rational) -> Option<Self> {
        if r <= &Rational::zero() {
            return None;
        }
        Self::new(
            center
                .iter()
                .map(|c| (c.clone() - r.clone(), c.clone() + r.clone()))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[(Rational, Rational)] {
        &self.sides
    }

    pub fn side(&self, i: usize) -> (&Rational, &Rational) {
        (&self.sides[i].0, &self.sides[i].1)
    }

    pub fn volume(&self) -> Rational {
        self.sides
            .iter()
            .fold(Rational::one(), |acc, (a, b)| acc * (b.clone() - a.clone()))
    }

    pub fn center(&self) -> Vec<Rational> {
        let two = Rational::from_integer(2.into());
        self.sides
            .iter()
            .map(|(a, b)| (a.clone() + b.clone()) / two.clone())
            .collect()
    }

    pub fn contains_point(&self, x: &[Rational]) -> bool {
        self.sides
            .iter()
            .zip(x.iter())
            .all(|((a, b), xi)| a < xi && xi < b)
    }

    /// Whether the closed cell [lo, hi]^d sits strictly inside this open box.
    pub fn contains_closed_cell(&self, cell: &[(Rational, Rational)]) -> bool {
        self.sides
            .iter()
            .zip(cell.iter())
            .all(|((a, b), (c, d))| a < c && d < b)
    }

    pub fn intersect(&self, other: &BoxRegion) -> Option<BoxRegion> {
        let sides = self
            .sides
            .iter()
            .zip(other.sides.iter())
            .map(|((a1, b1), (a2, b2))| (a1.clone().max(a2.clone()), b1.clone().min(b2.clone())))
            .collect();
        BoxRegion::new(sides)
    }

    pub fn overlaps(&self, other: &BoxRegion) -> bool {
        self.sides
            .iter()
            .zip(other.sides.iter())
            .all(|((a1, b1), (a2, b2))| a1.max(a2) < b1.min(b2))
    }

    /// Shrinks every face inward by eps; None when a side collapses.
    pub fn shrink(&self, eps: &Rational) -> Option<BoxRegion> {
        BoxRegion::new(
            self.sides
                .iter()
                .map(|(a, b)| (a.clone() + eps.clone(), b.clone() - eps.clone()))
                .collect(),
        )
    }

    pub fn pad(&self, eps: &Rational) -> BoxRegion {
        BoxRegion::new(
            self.sides
                .iter()
                .map(|(a, b)| (a.clone() - eps.clone(), b.clone() + eps.clone()))
                .collect(),
        )
        .expect("padding keeps sides nonempty")
    }

    /// Set difference `self minus closure(other)` as at most 2 d open boxes.
    /// A point survives iff some coordinate escapes other's closed span.
    pub fn subtract_closed(&self, other: &BoxRegion) -> Vec<BoxRegion> {
        if !self.overlaps(other) {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        for i in 0..self.dim() {
            let (a, b) = (&self.sides[i].0, &self.sides[i].1);
            let (c, d) = (&other.sides[i].0, &other.sides[i].1);
            if a < c {
                let mut sides = self.sides.clone();
                sides[i] = (a.clone(), b.clone().min(c.clone()));
                if let Some(piece) = BoxRegion::new(sides) {
                    out.push(piece);
                }
            }
            if d < b {
                let mut sides = self.sides.clone();
                sides[i] = (a.clone().max(d.clone()), b.clone());
                if let Some(piece) = BoxRegion::new(sides) {
                    out.push(piece);
                }
            }
        }
        out
    }

    pub fn to_intervals(&self) -> Vec<DyadicInterval> {
        self.sides
            .iter()
            .map(|(a, b)| DyadicInterval::new(a.clone(), b.clone()))
            .collect()
    }

    pub fn from_intervals(cells: &[DyadicInterval]) -> Option<BoxRegion> {
        BoxRegion::new(
            cells
                .iter()
                .map(|c| (c.lo().clone(), c.hi().clone()))
                .collect(),
        )
    }
}

/// Grid decomposition of `frame` against the faces of `boxes`: the cut
/// coordinates per dimension, clamped to the frame.
fn cuts_in_frame(frame: &[(Rational, Rational)], boxes: &[BoxRegion]) -> Vec<Vec<Rational>> {
    let dim = frame.len();
    let mut cuts: Vec<Vec<Rational>> = (0..dim)
        .map(|i| vec![frame[i].0.clone(), frame[i].1.clone()])
        .collect();
    for b in boxes {
        for i in 0..dim {
            for v in [&b.sides()[i].0, &b.sides()[i].1] {
                if v > &frame[i].0 && v < &frame[i].1 {
                    cuts[i].push(v.clone());
                }
            }
        }
    }
    for c in cuts.iter_mut() {
        c.sort();
        c.dedup();
    }
    cuts
}

fn for_each_cell(
    cuts: &[Vec<Rational>],
    mut f: impl FnMut(&[(Rational, Rational)]) -> bool,
) -> bool {
    let dim = cuts.len();
    let mut idx = vec![0usize; dim];
    let mut cell: Vec<(Rational, Rational)> = Vec::with_capacity(dim);
    'outer: loop {
        cell.clear();
        for i in 0..dim {
            cell.push((cuts[i][idx[i]].clone(), cuts[i][idx[i] + 1].clone()));
        }
        if !f(&cell) {
            return false;
        }
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] + 1 < cuts[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        return true;
    }
}

/// Exact volume of `frame intersect union(boxes)`. Boundaries are null, so an
/// elementary grid cell counts iff its midpoint lies in some open box.
pub fn union_volume_in(frame: &BoxRegion, boxes: &[BoxRegion]) -> Rational {
    let clipped: Vec<BoxRegion> = boxes.iter().filter_map(|b| b.intersect(frame)).collect();
    if clipped.is_empty() {
        return Rational::zero();
    }
    let cuts = cuts_in_frame(frame.sides(), &clipped);
    let mut total = Rational::zero();
    let two = Rational::from_integer(2.into());
    for_each_cell(&cuts, |cell| {
        let mid: Vec<Rational> = cell
            .iter()
            .map(|(a, b)| (a.clone() + b.clone()) / two.clone())
            .collect();
        if clipped.iter().any(|b| b.contains_point(&mid)) {
            let vol = cell
                .iter()
                .fold(Rational::one(), |acc, (a, b)| acc * (b.clone() - a.clone()));
            total += vol;
        }
        true
    });
    total
}

/// Whether the closed cell is covered by the open union. Conservative: each
/// elementary subcell must sit strictly inside a single open box, which is
/// always achieved at a fine enough stage since every point of an open union
/// is interior to one of its boxes.
pub fn closed_cell_covered(cell: &[(Rational, Rational)], boxes: &[BoxRegion]) -> bool {
    if cell.iter().any(|(a, b)| a > b) {
        return true;
    }
    // degenerate (point-thin) cells still need strict interior containment
    let cuts = cuts_in_frame(cell, boxes);
    for_each_cell(&cuts, |sub| {
        boxes.iter().any(|b| b.contains_closed_cell(sub))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, rat_int};

    fn b1(a: i64, b: i64, c: i64, d: i64) -> BoxRegion {
        BoxRegion::interval(rat(a, b), rat(c, d)).unwrap()
    }

    #[test]
    fn volumes_and_unions() {
        let u = vec![b1(0, 1, 1, 2), b1(1, 4, 1, 1)];
        let frame = b1(0, 1, 2, 1);
        // (0, 1/2) union (1/4, 1) covers (0,1): volume 1
        assert_eq!(union_volume_in(&frame, &u), rat_int(1));
        let v = vec![b1(0, 1, 1, 4), b1(1, 2, 3, 4)];
        assert_eq!(union_volume_in(&frame, &v), rat(1, 2));
    }

    #[test]
    fn coverage_is_union_aware_after_refinement() {
        // [1,2] inside (0,2) union (1,3): covered because each elementary
        // subcell of the induced grid lands in a single box
        let boxes = vec![b1(0, 1, 2, 1), b1(1, 1, 3, 1)];
        let cell = vec![(rat(5, 4), rat(7, 4))];
        assert!(closed_cell_covered(&cell, &boxes));
        let straddling = vec![(rat_int(1), rat_int(2))];
        // conservative: the induced cuts cannot certify the endpoints
        assert!(!closed_cell_covered(&straddling, &boxes));
        let inside = vec![(rat(9, 8), rat(15, 8))];
        assert!(closed_cell_covered(&inside, &boxes));
    }

    #[test]
    fn subtraction() {
        let a = b1(0, 1, 3, 1);
        let hole = b1(1, 1, 2, 1);
        let parts = a.subtract_closed(&hole);
        assert_eq!(parts.len(), 2);
        let vol: Rational = parts.iter().map(|p| p.volume()).sum();
        assert_eq!(vol, rat_int(2));
        // 2d: square minus inner square leaves a frame of correct volume
        let sq = BoxRegion::new(vec![(rat_int(0), rat_int(3)), (rat_int(0), rat_int(3))]).unwrap();
        let inner =
            BoxRegion::new(vec![(rat_int(1), rat_int(2)), (rat_int(1), rat_int(2))]).unwrap();
        let parts = sq.subtract_closed(&inner);
        let vol = union_volume_in(&sq, &parts);
        assert_eq!(vol, rat_int(8));
    }

    #[test]
    fn shrink_examples() {
        let u = b1(0, 1, 1, 1);
        let s = u.shrink(&rat(1, 4)).unwrap();
        assert_eq!(s.side(0), (&rat(1, 4), &rat(3, 4)));
        assert!(u.shrink(&rat(1, 2)).is_none());
    }
}
