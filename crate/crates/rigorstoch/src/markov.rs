//! Markov processes in two semantics: distribution propagation through the
//! probability monad (point measures, push-forwards, skew products, joint
//! distributions) and parameterized evolution of random variables on sliced
//! copies of the base space.

use crate::error::{Error, Result};
use crate::exactnum::{DyadicInterval, Rational};
use crate::randvar::{ContinuousRv, MeasurableRv};
use crate::space::{closed_cell_covered, interleave_index, BoxRegion, CantorPoint, OpenSet};
use crate::valuation::{Atom, LowerFunction, Valuation, WeightedBoxValuation};
use num_traits::{One, Zero};
use std::sync::Arc;

/// The computable point measure: integration is evaluation at the point.
pub fn dirac(x: Vec<Rational>) -> WeightedBoxValuation {
    WeightedBoxValuation::dirac(x)
}

/// A point measure smeared over an enclosure: measures are 1 exactly when
/// the whole enclosure is certified inside the open set. This is the sound
/// image of a Dirac measure under interval evaluation.
#[derive(Clone, Debug)]
pub struct EnclosureDirac {
    pub cell: BoxRegion,
}

impl Valuation for EnclosureDirac {
    fn dim(&self) -> usize {
        self.cell.dim()
    }

    fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational {
        if closed_cell_covered(self.cell.sides(), &u.boxes_at(stage)) {
            Rational::one()
        } else {
            Rational::zero()
        }
    }

    fn exact_total(&self) -> Option<Rational> {
        Some(Rational::one())
    }

    fn lower_integral_stage(&self, psi: &dyn LowerFunction, stage: u32) -> Rational {
        psi.lower_bound(&self.cell, stage).max(Rational::zero())
    }
}

/// A probability valuation about which nothing is yet certified.
#[derive(Clone, Debug)]
struct ZeroInfo {
    dim: usize,
}

impl Valuation for ZeroInfo {
    fn dim(&self) -> usize {
        self.dim
    }

    fn measure_lower(&self, _u: &OpenSet, _stage: u32) -> Rational {
        Rational::zero()
    }

    fn exact_total(&self) -> Option<Rational> {
        Some(Rational::one())
    }

    fn lower_integral_stage(&self, _psi: &dyn LowerFunction, _stage: u32) -> Rational {
        Rational::zero()
    }
}

/// Pointwise minimum of candidate valuations: the sound kernel output on an
/// enclosure that cannot yet separate states.
struct MinValuation {
    dim: usize,
    parts: Vec<Arc<dyn Valuation>>,
}

impl Valuation for MinValuation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational {
        self.parts
            .iter()
            .map(|p| p.measure_lower(u, stage))
            .min()
            .unwrap_or_else(Rational::zero)
    }

    fn exact_total(&self) -> Option<Rational> {
        Some(Rational::one())
    }

    fn lower_integral_stage(&self, psi: &dyn LowerFunction, stage: u32) -> Rational {
        self.parts
            .iter()
            .map(|p| p.lower_integral_stage(psi, stage))
            .min()
            .unwrap_or_else(Rational::zero)
    }
}

/// A simple Markov process: state enclosure to next-state distribution. The
/// output valuation must be sound for every point of the input enclosure.
#[derive(Clone)]
pub struct Kernel {
    dim: usize,
    apply: Arc<dyn Fn(&BoxRegion) -> Arc<dyn Valuation> + Send + Sync>,
    /// Exact image of a point atom, when the kernel supports it; enables the
    /// exact atom path of push-forwards for deterministic kernels.
    point_map: Option<Arc<dyn Fn(&[Rational]) -> Vec<Rational> + Send + Sync>>,
}

impl Kernel {
    pub fn new(
        dim: usize,
        apply: impl Fn(&BoxRegion) -> Arc<dyn Valuation> + Send + Sync + 'static,
    ) -> Self {
        Kernel {
            dim,
            apply: Arc::new(apply),
            point_map: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, cell: &BoxRegion) -> Arc<dyn Valuation> {
        (self.apply)(cell)
    }

    /// Deterministic map lifted to a kernel: x maps to the point measure at
    /// f(x). Takes the exact rational form and the interval extension.
    pub fn from_map(
        dim: usize,
        point: impl Fn(&[Rational]) -> Vec<Rational> + Send + Sync + 'static,
        f: impl Fn(&BoxRegion) -> BoxRegion + Send + Sync + 'static,
    ) -> Self {
        let mut k = Kernel::new(dim, move |cell| {
            Arc::new(EnclosureDirac { cell: f(cell) }) as Arc<dyn Valuation>
        });
        k.point_map = Some(Arc::new(point));
        k
    }

    /// Finite-state chain: states are rational points, rows are transition
    /// weights over the same states. Enclosures containing several states
    /// fall back to the pointwise minimum of their rows.
    pub fn from_matrix(states: Vec<Vec<Rational>>, rows: Vec<Vec<Rational>>) -> Self {
        assert_eq!(states.len(), rows.len());
        for row in &rows {
            assert_eq!(row.len(), states.len());
            let total: Rational = row.iter().cloned().sum();
            assert_eq!(total, Rational::one(), "rows must be stochastic");
        }
        let dim = states[0].len();
        let row_valuations: Vec<Arc<dyn Valuation>> = rows
            .iter()
            .map(|row| {
                let atoms: Vec<(Atom, Rational)> = states
                    .iter()
                    .zip(row.iter())
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(s, w)| (Atom::Point(s.clone()), w.clone()))
                    .collect();
                Arc::new(WeightedBoxValuation::new(dim, atoms)) as Arc<dyn Valuation>
            })
            .collect();
        let states2 = states.clone();
        Kernel::new(dim, move |cell| {
            let hits: Vec<usize> = states2
                .iter()
                .enumerate()
                .filter(|(_, s)| {
                    s.iter()
                        .zip(cell.sides())
                        .all(|(x, (a, b))| a <= x && x <= b)
                })
                .map(|(i, _)| i)
                .collect();
            match hits.len() {
                0 => Arc::new(ZeroInfo { dim }) as Arc<dyn Valuation>,
                1 => row_valuations[hits[0]].clone(),
                _ => Arc::new(MinValuation {
                    dim,
                    parts: hits.iter().map(|&i| row_valuations[i].clone()).collect(),
                }),
            }
        })
    }
}

/// F_* mu by the monadic composition mu(lambda x. F(x)(psi)); exact atom
/// arithmetic when both sides are weighted.
pub fn pushforward(f: &Kernel, mu: Arc<dyn Valuation>) -> Arc<dyn Valuation> {
    if let Some(w) = mu.as_weighted() {
        if let Some(exact) = push_weighted(f, w) {
            return exact;
        }
    }
    struct Pushed {
        f: Kernel,
        mu: Arc<dyn Valuation>,
    }
    struct KernelSection<'a> {
        f: &'a Kernel,
        u: &'a OpenSet,
    }
    impl LowerFunction for KernelSection<'_> {
        fn dim(&self) -> usize {
            self.f.dim()
        }
        fn lower_bound(&self, cell: &BoxRegion, stage: u32) -> Rational {
            self.f.apply(cell).measure_lower(self.u, stage)
        }
    }
    impl Valuation for Pushed {
        fn dim(&self) -> usize {
            self.f.dim()
        }
        fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational {
            let psi = KernelSection { f: &self.f, u };
            self.mu.lower_integral_stage(&psi, stage).min(Rational::one())
        }
        fn exact_total(&self) -> Option<Rational> {
            self.mu.exact_total()
        }
    }
    Arc::new(Pushed {
        f: f.clone(),
        mu,
    })
}

/// Exact push-forward of a weighted valuation when every mapped atom is
/// itself weighted; None when some image is not exactly representable.
fn push_weighted(f: &Kernel, mu: &WeightedBoxValuation) -> Option<Arc<dyn Valuation>> {
    let mut out_atoms: Vec<(Atom, Rational)> = Vec::new();
    let mut out_dim = None;
    for (atom, w) in mu.atoms() {
        for (a2, w2) in kernel_atom_image(f, atom)? {
            out_dim = Some(a2.dim());
            out_atoms.push((a2, w.clone() * w2));
        }
    }
    let dim = out_dim?;
    // merge duplicate point atoms so chains stay compact over many steps
    let mut merged: Vec<(Atom, Rational)> = Vec::new();
    'outer: for (a, w) in out_atoms {
        for (b, wb) in merged.iter_mut() {
            if *b == a {
                *wb += w;
                continue 'outer;
            }
        }
        merged.push((a, w));
    }
    Some(Arc::new(WeightedBoxValuation::new(dim, merged)))
}

/// Exact image atoms of one input atom under a kernel, when representable.
fn kernel_atom_image(f: &Kernel, atom: &Atom) -> Option<Vec<(Atom, Rational)>> {
    if let (Some(pm), Atom::Point(p)) = (&f.point_map, atom) {
        return Some(vec![(Atom::Point(pm(p)), Rational::one())]);
    }
    let cell = match atom {
        Atom::Point(p) => degenerate_to_point_cell(p, crate::space::window(p.len(), 1)),
        Atom::Cell(b) => b.clone(),
    };
    let pushed = f.apply(&cell);
    let weighted = pushed.as_weighted()?;
    if weighted.total() != &Rational::one() {
        return None;
    }
    Some(
        weighted
            .atoms()
            .iter()
            .map(|(a, w)| (a.clone(), w.clone()))
            .collect(),
    )
}

fn tiny() -> Rational {
    crate::exactnum::pow2(-60)
}

fn pow2_small() -> Rational {
    crate::exactnum::pow2(-40)
}

/// Kernels built from matrices test point containment with closed cells, so
/// a degenerate point atom can use an arbitrarily thin box around it.
fn degenerate_to_point_cell(p: &[Rational], fallback: BoxRegion) -> BoxRegion {
    BoxRegion::new(
        p.iter()
            .map(|c| (c.clone() - tiny(), c.clone() + tiny()))
            .collect(),
    )
    .unwrap_or(fallback)
}

/// Joint distribution over a trajectory prefix.
#[derive(Clone)]
pub struct TrajectoryDistribution {
    pub gamma: Arc<dyn Valuation>,
    pub state_dim: usize,
    pub horizon: usize,
}

impl TrajectoryDistribution {
    pub fn initial(mu0: Arc<dyn Valuation>) -> Self {
        let state_dim = mu0.dim();
        TrajectoryDistribution {
            gamma: mu0,
            state_dim,
            horizon: 0,
        }
    }

    /// Marginal of coordinate block k, exact on atom fixtures.
    pub fn marginal(&self, k: usize) -> Result<Arc<dyn Valuation>> {
        assert!(k <= self.horizon);
        let w = self
            .gamma
            .as_weighted()
            .ok_or_else(|| Error::Unsupported("marginals need atom trajectories".into()))?;
        let d = self.state_dim;
        let mut atoms: Vec<(Atom, Rational)> = Vec::new();
        'next: for (atom, weight) in w.atoms() {
            let projected = match atom {
                Atom::Point(p) => Atom::Point(p[k * d..(k + 1) * d].to_vec()),
                Atom::Cell(b) => Atom::Cell(
                    BoxRegion::new(b.sides()[k * d..(k + 1) * d].to_vec()).unwrap(),
                ),
            };
            // distinct trajectories can project onto the same state
            for (a, wgt) in atoms.iter_mut() {
                if *a == projected {
                    *wgt += weight.clone();
                    continue 'next;
                }
            }
            atoms.push((projected, weight.clone()));
        }
        Ok(Arc::new(WeightedBoxValuation::new(d, atoms)))
    }
}

/// (id x F)_* gamma: extends a trajectory distribution by one step of the
/// kernel applied to the last coordinate block.
pub fn joint_pushforward(f: &Kernel, gamma: &TrajectoryDistribution) -> Result<TrajectoryDistribution> {
    let d = gamma.state_dim;
    let w = gamma
        .gamma
        .as_weighted()
        .ok_or_else(|| Error::Unsupported("joint push-forward implemented on atom trajectories".into()))?;
    let mut atoms = Vec::new();
    for (atom, weight) in w.atoms() {
        let (prefix_sides, last_atom): (Vec<(Rational, Rational)>, Atom) = match atom {
            Atom::Point(p) => (
                p.iter().map(|c| (c.clone(), c.clone())).collect(),
                Atom::Point(p[gamma.horizon * d..].to_vec()),
            ),
            Atom::Cell(b) => (
                b.sides().to_vec(),
                Atom::Cell(BoxRegion::new(b.sides()[gamma.horizon * d..].to_vec()).unwrap()),
            ),
        };
        let images = kernel_atom_image(f, &last_atom)
            .ok_or_else(|| Error::Unsupported("kernel image not exactly representable".into()))?;
        for (a2, w2) in &images {
            let mut coords: Vec<(Rational, Rational)> = prefix_sides.clone();
            match &a2 {
                Atom::Point(q) => coords.extend(q.iter().map(|c| (c.clone(), c.clone()))),
                Atom::Cell(b2) => coords.extend(b2.sides().to_vec()),
            }
            // degenerate sides are stored as point atoms when all collapse
            let all_points = coords.iter().all(|(a, b)| a == b);
            let atom = if all_points {
                Atom::Point(coords.into_iter().map(|(a, _)| a).collect())
            } else {
                Atom::Cell(
                    BoxRegion::new(
                        coords
                            .into_iter()
                            .map(|(a, b)| if a == b { (a.clone() - tiny(), b + tiny()) } else { (a, b) })
                            .collect(),
                    )
                    .unwrap(),
                )
            };
            atoms.push((atom, weight.clone() * w2.clone()));
        }
    }
    let dim = d * (gamma.horizon + 2);
    Ok(TrajectoryDistribution {
        gamma: Arc::new(WeightedBoxValuation::new(dim, atoms)),
        state_dim: d,
        horizon: gamma.horizon + 1,
    })
}

/// Both skew products F x| G and F |x G. They agree on product-measure
/// fixtures; the report says whether exact equality was certified.
pub struct SkewProducts {
    pub right: Arc<dyn Valuation>,
    pub left: Arc<dyn Valuation>,
    pub certified_equal: Option<bool>,
}

pub fn skew_products(f: Arc<dyn Valuation>, g: Arc<dyn Valuation>) -> SkewProducts {
    let right = product_valuation(f.clone(), g.clone(), false);
    let left = product_valuation(f.clone(), g.clone(), true);
    let certified_equal = match (f.as_weighted(), g.as_weighted()) {
        (Some(fw), Some(gw)) => {
            let r = weighted_product(fw, gw, false);
            let l = weighted_product(fw, gw, true);
            Some(same_atoms(&r, &l))
        }
        _ => None,
    };
    SkewProducts {
        right,
        left,
        certified_equal,
    }
}

fn same_atoms(a: &WeightedBoxValuation, b: &WeightedBoxValuation) -> bool {
    let mut xs = a.atoms().to_vec();
    let mut ys = b.atoms().to_vec();
    let key = |t: &(Atom, Rational)| format!("{:?}", t);
    xs.sort_by_key(|t| key(t));
    ys.sort_by_key(|t| key(t));
    xs == ys
}

fn weighted_product(
    f: &WeightedBoxValuation,
    g: &WeightedBoxValuation,
    flip: bool,
) -> WeightedBoxValuation {
    let mut atoms = Vec::new();
    for (fa, fw) in f.atoms() {
        for (ga, gw) in g.atoms() {
            let (first, second) = if flip { (ga, fa) } else { (fa, ga) };
            let (fs, ss) = (atom_sides(first), atom_sides(second));
            let mut sides = if flip { ss.clone() } else { fs.clone() };
            sides.extend(if flip { fs } else { ss });
            // the product of two point atoms stays a point
            let all_points = sides.iter().all(|(a, b)| a == b);
            let atom = if all_points {
                Atom::Point(sides.into_iter().map(|(a, _)| a).collect())
            } else {
                Atom::Cell(
                    BoxRegion::new(
                        sides
                            .into_iter()
                            .map(|(a, b)| if a == b { (a.clone() - tiny(), b + tiny()) } else { (a, b) })
                            .collect(),
                    )
                    .unwrap(),
                )
            };
            atoms.push((atom, fw.clone() * gw.clone()));
        }
    }
    WeightedBoxValuation::new(f.dim() + g.dim(), atoms)
}

fn atom_sides(a: &Atom) -> Vec<(Rational, Rational)> {
    match a {
        Atom::Point(p) => p.iter().map(|c| (c.clone(), c.clone())).collect(),
        Atom::Cell(b) => b.sides().to_vec(),
    }
}

fn product_valuation(f: Arc<dyn Valuation>, g: Arc<dyn Valuation>, flip: bool) -> Arc<dyn Valuation> {
    if let (Some(fw), Some(gw)) = (f.as_weighted(), g.as_weighted()) {
        return Arc::new(weighted_product(fw, gw, flip));
    }
    struct Product {
        f: Arc<dyn Valuation>,
        g: Arc<dyn Valuation>,
        flip: bool,
    }
    impl Valuation for Product {
        fn dim(&self) -> usize {
            self.f.dim() + self.g.dim()
        }
        fn measure_lower(&self, u: &OpenSet, stage: u32) -> Rational {
            // nested integral form on the box enumeration: sum over outer
            // cells of the inner measure of the section
            struct Section<'a> {
                inner: &'a dyn Valuation,
                u: &'a OpenSet,
                outer_dim: usize,
                outer_first: bool,
            }
            impl LowerFunction for Section<'_> {
                fn dim(&self) -> usize {
                    self.outer_dim
                }
                fn lower_bound(&self, cell: &BoxRegion, stage: u32) -> Rational {
                    let boxes = self.u.boxes_at(stage);
                    let mut sections = Vec::new();
                    for b in boxes.iter() {
                        let (outer, inner) = if self.outer_first {
                            (
                                BoxRegion::new(b.sides()[..self.outer_dim].to_vec()),
                                BoxRegion::new(b.sides()[self.outer_dim..].to_vec()),
                            )
                        } else {
                            (
                                BoxRegion::new(b.sides()[b.dim() - self.outer_dim..].to_vec()),
                                BoxRegion::new(b.sides()[..b.dim() - self.outer_dim].to_vec()),
                            )
                        };
                        if let (Some(o), Some(i)) = (outer, inner) {
                            if closed_cell_covered(cell.sides(), &[o]) {
                                sections.push(i);
                            }
                        }
                    }
                    if sections.is_empty() {
                        return Rational::zero();
                    }
                    let dim = sections[0].dim();
                    self.inner
                        .measure_lower(&OpenSet::from_boxes(dim, sections), stage)
                }
            }
            let (outer, inner): (&dyn Valuation, &dyn Valuation) = if self.flip {
                (self.g.as_ref(), self.f.as_ref())
            } else {
                (self.f.as_ref(), self.g.as_ref())
            };
            let psi = Section {
                inner,
                u,
                outer_dim: outer.dim(),
                outer_first: !self.flip,
            };
            outer.lower_integral_stage(&psi, stage).min(Rational::one())
        }
        fn exact_total(&self) -> Option<Rational> {
            match (self.f.exact_total(), self.g.exact_total()) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            }
        }
    }
    Arc::new(Product { f, g, flip })
}

/// Distributions mu_0..mu_n and the joint trajectory distribution gamma_n,
/// with mu_k = (pi_k)_* gamma_n on atom fixtures.
pub fn propagate(
    f: &Kernel,
    mu0: Arc<dyn Valuation>,
    n: usize,
) -> Result<(Vec<Arc<dyn Valuation>>, TrajectoryDistribution)> {
    let mut mus = vec![mu0.clone()];
    for _ in 0..n {
        let next = pushforward(f, mus.last().unwrap().clone());
        mus.push(next);
    }
    let mut gamma = TrajectoryDistribution::initial(mu0);
    for _ in 0..n {
        gamma = joint_pushforward(f, &gamma)?;
    }
    Ok((mus, gamma))
}

/// A conditional random variable: state enclosure to a random variable over
/// one fresh copy of the base space.
#[derive(Clone)]
pub struct RandomKernel {
    dim: usize,
    apply: Arc<dyn Fn(&BoxRegion) -> MeasurableRv + Send + Sync>,
}

impl RandomKernel {
    pub fn new(
        dim: usize,
        apply: impl Fn(&BoxRegion) -> MeasurableRv + Send + Sync + 'static,
    ) -> Self {
        RandomKernel {
            dim,
            apply: Arc::new(apply),
        }
    }

    pub fn apply(&self, cell: &BoxRegion) -> MeasurableRv {
        (self.apply)(cell)
    }

    /// The distribution kernel extracted by forgetting the randomness source.
    /// Kernels whose randomness is a finite coin pattern extract exactly:
    /// per depth-limited cylinder the value enclosure collapses to a point.
    pub fn extract_kernel(&self, probe_index: u32, depth: u32) -> Kernel {
        let me = self.clone();
        Kernel::new(self.dim, move |cell| {
            let rv = me.apply(cell);
            let xc = rv.approx(probe_index);
            if let Some(s) = xc.simple_backing() {
                let atoms: Vec<(Atom, Rational)> = s
                    .pieces()
                    .iter()
                    .map(|(c, v)| (Atom::Point(v.clone()), c.measure()))
                    .collect();
                return Arc::new(WeightedBoxValuation::new(me.dim, atoms)) as Arc<dyn Valuation>;
            }
            let Ok(cyls) = crate::space::cylinder_partition(depth) else {
                return Arc::new(ZeroInfo { dim: me.dim }) as Arc<dyn Valuation>;
            };
            let mut atoms = Vec::new();
            for c in cyls {
                let mut bits = c.to_bits();
                let need = xc.modulus(20) as usize;
                while bits.len() < need {
                    bits.push(false);
                }
                let enc = xc.eval_prefix(&bits, 20);
                if enc.iter().any(|iv| iv.width() > pow2_small()) {
                    return Arc::new(ZeroInfo { dim: me.dim }) as Arc<dyn Valuation>;
                }
                atoms.push((Atom::Point(enc.iter().map(|iv| iv.mid()).collect()), c.measure()));
            }
            Arc::new(WeightedBoxValuation::new(me.dim, atoms)) as Arc<dyn Valuation>
        })
    }
}

/// The trajectory (X_0, ..., X_n) as one random variable over the global
/// space, step k reading only the interleaved copy k. `copies` declares the
/// copy index used by each step (X0 first); duplicates are refused.
pub fn sample_trajectory(
    f: &RandomKernel,
    x0: &MeasurableRv,
    n: usize,
    copies: &[u32],
) -> Result<MeasurableRv> {
    if copies.len() != n + 1 {
        return Err(Error::BlockReuse {
            what: format!("need {} copy indices, got {}", n + 1, copies.len()),
        });
    }
    let mut seen = copies.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != copies.len() {
        return Err(Error::BlockReuse {
            what: "duplicate copy index across steps".into(),
        });
    }
    for &c in copies {
        // bit translation must stay in range for the prefixes probed below
        interleave_index(c, 1 << 10)?;
    }

    let d = f.dim;
    let dim = d * (n + 1);
    let f = f.clone();
    let x0 = x0.clone();
    let copies = copies.to_vec();
    Ok(MeasurableRv::from_fn(dim, move |j| {
        let f = f.clone();
        let x0 = x0.clone();
        let copies = copies.clone();
        let (f_ev, x0_ev, copies_ev) = (f.clone(), x0.clone(), copies.clone());
        let steps = n;
        // the composed evaluator: evaluate step by step on sliced prefixes
        let eval = move |prefix: &[bool], k: u32| -> Vec<DyadicInterval> {
            let point = CantorPoint::from_prefix(prefix.to_vec());
            let mut out: Vec<DyadicInterval> = Vec::new();
            let mut current: Vec<DyadicInterval> = {
                let omega0 = point.copy_slice(copies_ev[0]).expect("checked");
                x0_ev.approx(j + 1).eval_point(&omega0, k + 1)
            };
            out.extend(current.clone());
            for step in 1..=steps {
                let cell = BoxRegion::from_intervals(
                    &current
                        .iter()
                        .map(|iv| DyadicInterval::new(iv.lo().clone() - tiny(), iv.hi().clone() + tiny()))
                        .collect::<Vec<_>>(),
                )
                .expect("padded cell nonempty");
                let rv = f_ev.apply(&cell);
                let omega = point.copy_slice(copies_ev[step]).expect("checked");
                current = rv.approx(j + 1).eval_point(&omega, k + 1);
                out.extend(current.clone());
            }
            out
        };
        // the modulus: deep enough to supply every copy's bits
        let f2 = f;
        let x02 = x0;
        let copies2 = copies;
        let modulus = move |k: u32| -> u32 {
            let mut need = 0u64;
            // X0's bits on copy 0
            let m0 = x02.approx(j + 1).modulus(k + 1) as u64;
            if m0 > 0 {
                need = need.max(interleave_index(copies2[0], m0 - 1).unwrap_or(u64::MAX / 2) + 1);
            }
            // per-step kernels: probe with the whole window as cell
            let probe = crate::space::window(f2.dim, 2);
            for step in 1..=steps {
                let rv = f2.apply(&probe);
                let m = rv.approx(j + 1).modulus(k + 1) as u64;
                if m > 0 {
                    need = need
                        .max(interleave_index(copies2[step], m - 1).unwrap_or(u64::MAX / 2) + 1);
                }
            }
            need.min(1 << 24) as u32
        };
        ContinuousRv::new(dim, modulus, eval)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{pow2, rat, rat_int, LowerReal};
    use crate::randvar::rv_distribution;
    use crate::valuation::EvalLower;
    use num_traits::Signed;

    fn two_state() -> Kernel {
        // states 0 and 1; P = [[1/2, 1/2], [1/4, 3/4]]
        Kernel::from_matrix(
            vec![vec![rat_int(0)], vec![rat_int(1)]],
            vec![
                vec![rat(1, 2), rat(1, 2)],
                vec![rat(1, 4), rat(3, 4)],
            ],
        )
    }

    fn mass_at(nu: &dyn Valuation, x: i64, stage: u32) -> Rational {
        let u = OpenSet::interval(rat_int(x) - rat(1, 4), rat_int(x) + rat(1, 4));
        nu.measure_lower(&u, stage)
    }

    #[test]
    fn dirac_examples() {
        let d = dirac(vec![rat_int(0)]);
        let inside = OpenSet::interval(rat_int(-1), rat_int(1));
        let outside = OpenSet::interval(rat_int(1), rat_int(2));
        assert_eq!(d.measure_lower(&inside, 0), rat_int(1));
        for s in 0..8 {
            assert_eq!(d.measure_lower(&outside, s), rat_int(0));
        }
        // integral form: int y^2 d delta_{1/2} = 1/4
        let psi = EvalLower {
            dim: 1,
            eval: |cell: &BoxRegion| {
                let iv = DyadicInterval::new(cell.side(0).0.clone(), cell.side(0).1.clone());
                iv.mul(&iv)
            },
            shift: Rational::zero(),
        };
        let d2 = dirac(vec![rat(1, 2)]);
        let got = d2.lower_integral_stage(&psi, 16);
        assert!(got <= rat(1, 4));
        assert!(rat(1, 4) - got <= pow2(-10));
    }

    #[test]
    fn deterministic_shift_pushforward() {
        let f = Kernel::from_map(
            1,
            |p| vec![p[0].clone() + rat_int(1)],
            |cell| {
                BoxRegion::new(
                    cell.sides()
                        .iter()
                        .map(|(a, b)| (a.clone() + rat_int(1), b.clone() + rat_int(1)))
                        .collect(),
                )
                .unwrap()
            },
        );
        let mu = pushforward(&f, Arc::new(dirac(vec![rat_int(0)])));
        assert_eq!(mass_at(mu.as_ref(), 1, 4), rat_int(1));
        assert_eq!(mass_at(mu.as_ref(), 0, 4), rat_int(0));
    }

    #[test]
    fn two_state_chain_exact() {
        let f = two_state();
        let mu0: Arc<dyn Valuation> = Arc::new(dirac(vec![rat_int(0)]));
        let mu1 = pushforward(&f, mu0.clone());
        assert_eq!(mass_at(mu1.as_ref(), 0, 4), rat(1, 2));
        assert_eq!(mass_at(mu1.as_ref(), 1, 4), rat(1, 2));
        let mu2 = pushforward(&f, mu1);
        assert_eq!(mass_at(mu2.as_ref(), 0, 4), rat(3, 8));
        assert_eq!(mass_at(mu2.as_ref(), 1, 4), rat(5, 8));
    }

    #[test]
    fn propagate_matches_matrix_powers() {
        let f = two_state();
        let (mus, gamma) = propagate(&f, Arc::new(dirac(vec![rat_int(0)])), 10).unwrap();
        // exact matrix powers computed independently
        let mut p = (rat_int(1), rat_int(0));
        for k in 0..=10usize {
            assert_eq!(mass_at(mus[k].as_ref(), 0, 4), p.0);
            assert_eq!(mass_at(mus[k].as_ref(), 1, 4), p.1);
            p = (
                p.0.clone() * rat(1, 2) + p.1.clone() * rat(1, 4),
                p.0 * rat(1, 2) + p.1 * rat(3, 4),
            );
        }
        // marginal consistency of the trajectory distribution
        for k in [0usize, 5, 10] {
            let m = gamma.marginal(k).unwrap();
            assert_eq!(mass_at(m.as_ref(), 0, 4), mass_at(mus[k].as_ref(), 0, 4));
            assert_eq!(mass_at(m.as_ref(), 1, 4), mass_at(mus[k].as_ref(), 1, 4));
        }
    }

    #[test]
    fn joint_two_state_horizon_one() {
        let f = two_state();
        let gamma = TrajectoryDistribution::initial(Arc::new(dirac(vec![rat_int(0)])));
        let g1 = joint_pushforward(&f, &gamma).unwrap();
        // joint masses {(0,0): 1/2, (0,1): 1/2}
        let b00 = OpenSet::from_boxes(
            2,
            vec![BoxRegion::new(vec![
                (rat(-1, 4), rat(1, 4)),
                (rat(-1, 4), rat(1, 4)),
            ])
            .unwrap()],
        );
        let b01 = OpenSet::from_boxes(
            2,
            vec![BoxRegion::new(vec![
                (rat(-1, 4), rat(1, 4)),
                (rat(3, 4), rat(5, 4)),
            ])
            .unwrap()],
        );
        assert_eq!(g1.gamma.measure_lower(&b00, 4), rat(1, 2));
        assert_eq!(g1.gamma.measure_lower(&b01, 4), rat(1, 2));
    }

    #[test]
    fn deterministic_orbit_contracts() {
        // f(x) = x/2 from delta_1: after 10 steps mass sits at 2^-10
        let f = Kernel::from_map(
            1,
            |p| vec![p[0].clone() / rat_int(2)],
            |cell| {
                BoxRegion::new(
                    cell.sides()
                        .iter()
                        .map(|(a, b)| (a.clone() / rat_int(2), b.clone() / rat_int(2)))
                        .collect(),
                )
                .unwrap()
            },
        );
        let (mus, _) = propagate(&f, Arc::new(dirac(vec![rat_int(1)])), 10).unwrap();
        let target = pow2(-10);
        let u = OpenSet::interval(target.clone() - pow2(-12), target + pow2(-12));
        assert_eq!(mus[10].measure_lower(&u, 4), rat_int(1));
    }

    #[test]
    fn identity_kernel_fixed_point() {
        let f = Kernel::from_map(1, |p| p.to_vec(), |cell| cell.clone());
        let (mus, _) = propagate(&f, Arc::new(dirac(vec![rat(1, 3)])), 5).unwrap();
        for mu in &mus {
            let u = OpenSet::interval(rat(1, 4), rat(1, 2));
            assert_eq!(mu.measure_lower(&u, 4), rat_int(1));
        }
    }

    #[test]
    fn skew_product_examples() {
        // delta_a and delta_b: both orders give delta_(a,b)
        let a: Arc<dyn Valuation> = Arc::new(dirac(vec![rat_int(2)]));
        let b: Arc<dyn Valuation> = Arc::new(dirac(vec![rat_int(3)]));
        let sp = skew_products(a, b);
        assert_eq!(sp.certified_equal, Some(true));
        let u = OpenSet::from_boxes(
            2,
            vec![BoxRegion::new(vec![
                (rat(3, 2), rat(5, 2)),
                (rat(5, 2), rat(7, 2)),
            ])
            .unwrap()],
        );
        assert_eq!(sp.right.measure_lower(&u, 4), rat_int(1));
        assert_eq!(sp.left.measure_lower(&u, 4), rat_int(1));

        // uniform x uniform: quadrant has mass 1/4 both ways
        let uni: Arc<dyn Valuation> = Arc::new(WeightedBoxValuation::uniform_unit_interval());
        let sp = skew_products(uni.clone(), uni);
        assert_eq!(sp.certified_equal, Some(true));
        let q = OpenSet::from_boxes(
            2,
            vec![BoxRegion::new(vec![
                (rat_int(0), rat(1, 2)),
                (rat_int(0), rat(1, 2)),
            ])
            .unwrap()],
        );
        assert_eq!(sp.right.measure_lower(&q, 4), rat(1, 4));
        assert_eq!(sp.left.measure_lower(&q, 4), rat(1, 4));
    }

    #[test]
    fn mass_preserved_and_bounded() {
        let f = two_state();
        let (mus, _) = propagate(&f, Arc::new(dirac(vec![rat_int(0)])), 6).unwrap();
        let big = OpenSet::interval(rat_int(-2), rat_int(2));
        for mu in &mus {
            assert_eq!(mu.exact_total(), Some(rat_int(1)));
            assert_eq!(mu.measure_lower(&big, 4), rat_int(1));
            assert!(mu.measure_lower(&big, 8) <= rat_int(1));
        }
    }

    #[test]
    fn monad_laws_on_atoms() {
        // pushforward of a dirac through a map kernel is the dirac at the image
        let f = Kernel::from_map(
            1,
            |p| vec![p[0].clone() * rat_int(3)],
            |cell| {
                BoxRegion::new(
                    cell.sides()
                        .iter()
                        .map(|(a, b)| (a.clone() * rat_int(3), b.clone() * rat_int(3)))
                        .collect(),
                )
                .unwrap()
            },
        );
        let pushed = pushforward(&f, Arc::new(dirac(vec![rat(1, 2)])));
        assert_eq!(mass_at(pushed.as_ref(), 0, 6), rat_int(0));
        let near = OpenSet::interval(rat(5, 4), rat(7, 4));
        assert_eq!(pushed.measure_lower(&near, 6), rat_int(1));

        // pushforward(F, delta_x) = F(x)
        let chain = two_state();
        let at0 = pushforward(&chain, Arc::new(dirac(vec![rat_int(0)])));
        let direct = chain.apply(&BoxRegion::interval(rat(-1, 100), rat(1, 100)).unwrap());
        for x in [0i64, 1] {
            assert_eq!(mass_at(at0.as_ref(), x, 4), mass_at(direct.as_ref(), x, 4));
        }

        // associativity on a two-step composition, exact
        let (mus, _) = propagate(&chain, Arc::new(dirac(vec![rat_int(0)])), 2).unwrap();
        let one_shot = pushforward(&chain, pushforward(&chain, Arc::new(dirac(vec![rat_int(0)]))));
        for x in [0i64, 1] {
            assert_eq!(mass_at(mus[2].as_ref(), x, 4), mass_at(one_shot.as_ref(), x, 4));
        }
    }

    #[test]
    fn coin_step_trajectory() {
        // X_{k+1} = X_k plus or minus 1 on a fresh coin
        let f = RandomKernel::new(1, |cell| {
            let (lo, hi) = (cell.side(0).0.clone(), cell.side(0).1.clone());
            let up = ContinuousRv::new(1, |_| 1, {
                let (lo, hi) = (lo.clone(), hi.clone());
                move |prefix, _| {
                    if prefix[0] {
                        vec![DyadicInterval::new(lo.clone() + rat_int(1), hi.clone() + rat_int(1))]
                    } else {
                        vec![DyadicInterval::new(lo.clone() - rat_int(1), hi.clone() - rat_int(1))]
                    }
                }
            });
            MeasurableRv::from_continuous(up)
        });
        let x0 = MeasurableRv::constant(vec![rat_int(0)]);
        let traj = sample_trajectory(&f, &x0, 2, &[0, 1, 2]).unwrap();
        assert_eq!(traj.dim(), 3);

        // all four paths (0, +-1, +-2) have mass 1/4; check the last marginal
        let last = crate::randvar::rv_image(
            crate::randvar::ImageMap::lipschitz_map(1, rat_int(1), |v: &[DyadicInterval]| {
                vec![v[2].clone()]
            }),
            &traj,
        )
        .unwrap();
        let at2 = rv_distribution(&last, &OpenSet::interval(rat(7, 4), rat(9, 4)));
        let p2 = at2.approx_rational(8, Rational::zero());
        assert!(rat(1, 4) - p2.clone() <= pow2(-6), "p2 {p2}");
        let at0 = rv_distribution(&last, &OpenSet::interval(rat(-1, 4), rat(1, 4)));
        let p0 = at0.approx_rational(8, Rational::zero());
        assert!(rat(1, 2) - p0.clone() <= pow2(-6), "p0 {p0}");

        // marginal agrees with distribution propagation of the extracted kernel
        let kernel = f.extract_kernel(3, 1);
        let (mus, _) = propagate(&kernel, Arc::new(dirac(vec![rat_int(0)])), 2).unwrap();
        let exact = mass_at(mus[2].as_ref(), 2, 6);
        assert_eq!(exact, rat(1, 4));
        assert!((exact - p2).abs() <= pow2(-6));
    }

    #[test]
    fn trajectory_block_reuse_refused() {
        let f = RandomKernel::new(1, |_| MeasurableRv::constant(vec![rat_int(0)]));
        let x0 = MeasurableRv::constant(vec![rat_int(0)]);
        assert!(matches!(
            sample_trajectory(&f, &x0, 2, &[0, 1, 1]),
            Err(Error::BlockReuse { .. })
        ));
        assert!(matches!(
            sample_trajectory(&f, &x0, 2, &[0, 1]),
            Err(Error::BlockReuse { .. })
        ));
    }

    #[test]
    fn deterministic_kernel_constant_trajectory() {
        let f = RandomKernel::new(1, |cell| {
            let mid = cell.center()[0].clone();
            MeasurableRv::constant(vec![mid])
        });
        let x0 = MeasurableRv::constant(vec![rat(1, 2)]);
        let traj = sample_trajectory(&f, &x0, 2, &[0, 1, 2]).unwrap();
        let omega = CantorPoint::from_seed(5);
        let enc = traj.approx(4).eval_point(&omega, 8);
        for iv in enc {
            assert!(iv.contains(&rat(1, 2)));
            assert!(iv.width() <= pow2(-20));
        }
    }

    #[test]
    fn pushforward_total_mass_is_lower_real_one() {
        let f = two_state();
        let mu: Arc<dyn Valuation> = pushforward(&f, Arc::new(dirac(vec![rat_int(0)])));
        let w = mu.as_weighted().unwrap().clone();
        let lr: LowerReal = w.total_mass();
        assert_eq!(lr.approx_rational(4, Rational::zero()), rat_int(1));
    }
}
