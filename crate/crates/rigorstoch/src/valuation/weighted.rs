//! Finite weighted-atom valuations: point masses and uniform masses on boxes.
//! These are the exactly computable fixtures behind most oracles, and the
//! fast path of the push-forward machinery.

use super::{grid_floor, LowerFunction, Valuation};
use crate::exactnum::{pow2, rat_to_string, parse_rational, Rational};
use crate::space::{union_volume_in, BoxRegion, OpenSet};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    Point(Vec<Rational>),
    /// Uniform distribution of the atom's weight over an open box.
    Cell(BoxRegion),
}

impl Atom {
    pub fn dim(&self) -> usize {
        match self {
            Atom::Point(p) => p.len(),
            Atom::Cell(b) => b.dim(),
        }
    }
}

#[derive(Clone)]
pub struct WeightedBoxValuation {
    dim: usize,
    atoms: Vec<(Atom, Rational)>,
    total: Rational,
}

impl std::fmt::Debug for WeightedBoxValuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "WeightedBoxValuation({} atoms, total {})",
            self.atoms.len(),
            self.total
        )
    }
}

impl WeightedBoxValuation {
    pub fn new(dim: usize, atoms: Vec<(Atom, Rational)>) -> Self {
        assert!(atoms.iter().all(|(a, w)| a.dim() == dim && !w.is_negative()));
        let total = atoms.iter().map(|(_, w)| w.clone()).sum();
        WeightedBoxValuation { dim, atoms, total }
    }

    pub fn dirac(point: Vec<Rational>) -> Self {
        let dim = point.len();
        Self::new(dim, vec![(Atom::Point(point), Rational::from_integer(1.into()))])
    }

    pub fn uniform_box(b: BoxRegion) -> Self {
        let dim = b.dim();
        Self::new(dim, vec![(Atom::Cell(b), Rational::from_integer(1.into()))])
    }

    pub fn uniform_unit_interval() -> Self {
        Self::uniform_box(BoxRegion::interval(Rational::zero(), Rational::from_integer(1.into())).unwrap())
    }

    pub fn atoms(&self) -> &[(Atom, Rational)] {
        &self.atoms
    }

    pub fn total(&self) -> &Rational {
        &self.total
    }

    /// Exact measure of a finite union of boxes (the stage-free quantity the
    /// stagewise lower bounds converge to).
    pub fn measure_of_boxes(&self, boxes: &[BoxRegion]) -> Rational {
        let mut total = Rational::zero();
        for (atom, w) in &self.atoms {
            match atom {
                Atom::Point(p) => {
                    if boxes.iter().any(|b| b.contains_point(p)) {
                        total += w.clone();
                    }
                }
                Atom::Cell(cell) => {
                    let covered = union_volume_in(cell, boxes);
                    total += w.clone() * covered / cell.volume();
                }
            }
        }
        total
    }

    /// Per-atom contributions, for modularity witnesses.
    fn atom_measure(&self, idx: usize, boxes: &[BoxRegion]) -> Rational {
        let (atom, w) = &self.atoms[idx];
        match atom {
            Atom::Point(p) => {
                if boxes.iter().any(|b| b.contains_point(p)) {
                    w.clone()
                } else {
                    Rational::zero()
                }
            }
            Atom::Cell(cell) => w.clone() * union_volume_in(cell, boxes) / cell.volume(),
        }
    }

    /// Exact modularity test nu(U) + nu(V) = nu(U u V) + nu(U n V) on the
    /// stage-n box enumerations, with a counterexample atom on failure.
    pub fn check_modularity(&self, u: &OpenSet, v: &OpenSet, stage: u32) -> ModularityReport {
        let ub = u.boxes_at(stage).as_ref().clone();
        let vb = v.boxes_at(stage).as_ref().clone();
        let mut union = ub.clone();
        union.extend(vb.clone());
        let mut inter = Vec::new();
        for x in &ub {
            for y in &vb {
                if let Some(z) = x.intersect(y) {
                    inter.push(z);
                }
            }
        }
        let lhs = self.measure_of_boxes(&ub) + self.measure_of_boxes(&vb);
        let rhs = self.measure_of_boxes(&union) + self.measure_of_boxes(&inter);
        let mut witness = None;
        if lhs != rhs {
            for i in 0..self.atoms.len() {
                let al = self.atom_measure(i, &ub) + self.atom_measure(i, &vb);
                let ar = self.atom_measure(i, &union) + self.atom_measure(i, &inter);
                if al != ar {
                    witness = Some(i);
                    break;
                }
            }
        }
        ModularityReport {
            holds: lhs == rhs,
            lhs,
            rhs,
            witness_atom: witness,
        }
    }

    /// Atom list refined for integration: cells bisected along every axis to
    /// the given depth, with their exact sub-masses.
    fn refined_masses(&self, depth: u32) -> Vec<(BoxRegion, Rational)> {
        let mut out = Vec::new();
        for (atom, w) in &self.atoms {
            match atom {
                Atom::Point(p) => {
                    // degenerate cell: evaluation box of zero-ish width
                    let eps = pow2(-(depth as i64) - 4);
                    let b = BoxRegion::new(
                        p.iter()
                            .map(|c| (c.clone() - eps.clone(), c.clone() + eps.clone()))
                            .collect(),
                    )
                    .unwrap();
                    out.push((b, w.clone()));
                }
                Atom::Cell(cell) => {
                    let per_dim_exp = (depth / cell.dim() as u32).min(14);
                    let per_dim = 1u64 << per_dim_exp;
                    let mut pieces = vec![cell.sides().to_vec()];
                    for i in 0..cell.dim() {
                        let (a, b) = (&cell.sides()[i].0, &cell.sides()[i].1);
                        let step =
                            (b.clone() - a.clone()) / Rational::from_integer((per_dim as i64).into());
                        let mut next = Vec::new();
                        for piece in &pieces {
                            for j in 0..per_dim {
                                let lo = a.clone() + step.clone() * Rational::from_integer((j as i64).into());
                                let hi = lo.clone() + step.clone();
                                let mut sides = piece.clone();
                                sides[i] = (lo, hi);
                                next.push(sides);
                            }
                        }
                        pieces = next;
                        if pieces.len() > 1 << 14 {
                            break;
                        }
                    }
                    let total_vol = cell.volume();
                    for sides in pieces {
                        let b = BoxRegion::new(sides).unwrap();
                        let mass = w.clone() * b.volume() / total_vol.clone();
                        out.push((b, mass));
                    }
                }
            }
        }
        out
    }
}

impl Valuation for WeightedBoxValuation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational {
        self.measure_of_boxes(&u.boxes_at(stage))
    }

    fn exact_total(&self) -> Option<Rational> {
        Some(self.total.clone())
    }

    /// Collapsed threshold-chain form: with the atoms refined to depth
    /// floor(n/2), the dyadic-grid chain supremum collapses to the lower
    /// Riemann sum sum_cells mass * grid_floor(min(psi_lb, cap)), which is
    /// what this computes. Monotone in the stage by nested refinement.
    fn lower_integral_stage(&self, psi: &dyn LowerFunction, stage: u32) -> Rational {
        let grid_exp = stage.min(40);
        let cap = pow2(((stage / 2).min(16)) as i64);
        let depth = stage * 3 / 4;
        let mut total = Rational::zero();
        for (cell, mass) in self.refined_masses(depth) {
            if mass.is_zero() {
                continue;
            }
            let lb = psi.lower_bound(&cell, stage);
            if lb <= Rational::zero() {
                continue;
            }
            total += mass * grid_floor(&lb.min(cap.clone()), grid_exp);
        }
        total
    }

    fn as_weighted(&self) -> Option<&WeightedBoxValuation> {
        Some(self)
    }
}

use num_traits::Signed;

#[derive(Debug, Clone)]
pub struct ModularityReport {
    pub holds: bool,
    pub lhs: Rational,
    pub rhs: Rational,
    pub witness_atom: Option<usize>,
}

/// Modularity check against an arbitrary finite set function (used for the
/// adversarial non-valuation fixtures in tests).
pub fn modularity_report(
    measure: impl Fn(&[BoxRegion]) -> Rational,
    u: &[BoxRegion],
    v: &[BoxRegion],
) -> ModularityReport {
    let mut union = u.to_vec();
    union.extend_from_slice(v);
    let mut inter = Vec::new();
    for x in u {
        for y in v {
            if let Some(z) = x.intersect(y) {
                inter.push(z);
            }
        }
    }
    let lhs = measure(u) + measure(v);
    let rhs = measure(&union) + measure(&inter);
    ModularityReport {
        holds: lhs == rhs,
        lhs,
        rhs,
        witness_atom: None,
    }
}

// -- JSON wire format ------------------------------------------------------
// {"atoms": [{"point": ["1/2"], "weight": "1/2"},
//            {"box": [["0","1"]], "weight": "1/2"}]}

#[derive(Serialize, Deserialize)]
struct AtomDto {
    #[serde(skip_serializing_if = "Option::is_none", rename = "box")]
    cell: Option<Vec<[String; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<Vec<String>>,
    weight: String,
}

#[derive(Serialize, Deserialize)]
struct ValuationDto {
    atoms: Vec<AtomDto>,
}

impl WeightedBoxValuation {
    pub fn to_json(&self) -> String {
        let atoms = self
            .atoms
            .iter()
            .map(|(a, w)| match a {
                Atom::Point(p) => AtomDto {
                    cell: None,
                    point: Some(p.iter().map(rat_to_string).collect()),
                    weight: rat_to_string(w),
                },
                Atom::Cell(b) => AtomDto {
                    cell: Some(
                        b.sides()
                            .iter()
                            .map(|(lo, hi)| [rat_to_string(lo), rat_to_string(hi)])
                            .collect(),
                    ),
                    point: None,
                    weight: rat_to_string(w),
                },
            })
            .collect();
        serde_json::to_string_pretty(&ValuationDto { atoms }).expect("serializable")
    }

    pub fn from_json(s: &str) -> Option<Self> {
        let dto: ValuationDto = serde_json::from_str(s).ok()?;
        let mut atoms = Vec::new();
        let mut dim = None;
        for a in dto.atoms {
            let w = parse_rational(&a.weight)?;
            let atom = if let Some(p) = a.point {
                let coords: Option<Vec<Rational>> =
                    p.iter().map(|s| parse_rational(s)).collect();
                Atom::Point(coords?)
            } else if let Some(sides) = a.cell {
                let parsed: Option<Vec<(Rational, Rational)>> = sides
                    .iter()
                    .map(|[lo, hi]| Some((parse_rational(lo)?, parse_rational(hi)?)))
                    .collect();
                Atom::Cell(BoxRegion::new(parsed?)?)
            } else {
                return None;
            };
            match dim {
                None => dim = Some(atom.dim()),
                Some(d) if d != atom.dim() => return None,
                _ => {}
            }
            atoms.push((atom, w));
        }
        Some(WeightedBoxValuation::new(dim?, atoms))
    }
}
