//! Random variables over the Cantor base space.
//!
//! A continuous random variable carries a modulus (precision -> prefix depth)
//! and an interval evaluator on cylinder prefixes. Measurable random
//! variables are strong Cauchy sequences of continuous ones under the Fan
//! metric; everything downstream (distribution, expectation, products,
//! images) is computed from certified cylinder enclosures.

pub mod dist;
pub mod expect;
pub mod ops;

pub use dist::{rv_distribution, rv_realize, RealizeOpts};
pub use expect::{
    expectation, expectation_enclosure, independence_check, lower_expectation, lp_norm,
    rational_sqrt_interval, IndependenceReport,
};
pub use ops::{fan_distance_upper, rv_image, rv_product, simple_approximation, ImageMap};

use crate::error::{Error, Result};
use crate::exactnum::{pow2, rat_to_string, parse_rational, DyadicInterval, Rational};
use crate::space::{oracle_depth_cap, BoxRegion, CantorPoint, ClopenSet, Cylinder};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};

/// A continuous random variable with values in R^d: a total continuous
/// function on Cantor space, presented by a uniform modulus and a prefix
/// evaluator producing enclosures of radius <= 2^-k.
#[derive(Clone)]
pub struct ContinuousRv {
    dim: usize,
    modulus: Arc<dyn Fn(u32) -> u32 + Send + Sync>,
    eval: Arc<dyn Fn(&[bool], u32) -> Vec<DyadicInterval> + Send + Sync>,
    /// Exact finite-valued backing, when this variable is simple.
    simple: Option<Arc<SimpleRv>>,
}

impl std::fmt::Debug for ContinuousRv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ContinuousRv(dim {})", self.dim)
    }
}

impl ContinuousRv {
    pub fn new(
        dim: usize,
        modulus: impl Fn(u32) -> u32 + Send + Sync + 'static,
        eval: impl Fn(&[bool], u32) -> Vec<DyadicInterval> + Send + Sync + 'static,
    ) -> Self {
        ContinuousRv {
            dim,
            modulus: Arc::new(modulus),
            eval: Arc::new(eval),
            simple: None,
        }
    }

    pub fn constant(value: Vec<Rational>) -> Self {
        let simple = SimpleRv::constant(value);
        Self::from_simple(simple)
    }

    pub fn from_simple(simple: SimpleRv) -> Self {
        let s = Arc::new(simple);
        let s2 = s.clone();
        let depth = s.max_prefix_len() as u32;
        ContinuousRv {
            dim: s.dim(),
            modulus: Arc::new(move |_| depth),
            eval: Arc::new(move |prefix, _| s2.enclosure_on_prefix(prefix)),
            simple: Some(s),
        }
    }

    /// The binary-expansion variable: omega maps to sum b_i 2^-(i+1), the
    /// uniform distribution on [0,1].
    pub fn binary_expansion() -> Self {
        ContinuousRv::new(
            1,
            |k| k + 1,
            |prefix, _| {
                let mut lo = Rational::zero();
                for (i, &b) in prefix.iter().enumerate() {
                    if b {
                        lo += pow2(-(i as i64) - 1);
                    }
                }
                let hi = lo.clone() + pow2(-(prefix.len() as i64));
                vec![DyadicInterval::new(lo, hi)]
            },
        )
    }

    /// The i-th coordinate bit as a {0,1}-valued variable.
    pub fn bit(i: u32) -> Self {
        let pieces = vec![
            (
                ClopenSet::new(
                    (0..(1u64 << (i + 1)))
                        .filter(|b| (b >> i) & 1 == 0)
                        .map(|b| cyl_from_word(b, i + 1))
                        .collect(),
                ),
                vec![Rational::zero()],
            ),
            (
                ClopenSet::new(
                    (0..(1u64 << (i + 1)))
                        .filter(|b| (b >> i) & 1 == 1)
                        .map(|b| cyl_from_word(b, i + 1))
                        .collect(),
                ),
                vec![Rational::from_integer(1.into())],
            ),
        ];
        Self::from_simple(SimpleRv::new(1, pieces))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self, k: u32) -> u32 {
        (self.modulus)(k)
    }

    /// Enclosure of X over the cylinder with this prefix; the prefix must be
    /// at least modulus(k) long.
    pub fn eval_prefix(&self, prefix: &[bool], k: u32) -> Vec<DyadicInterval> {
        debug_assert!(prefix.len() as u32 >= self.modulus(k));
        (self.eval)(prefix, k)
    }

    /// Point evaluation: enclosure of X(omega) at precision k.
    pub fn eval_point(&self, omega: &CantorPoint, k: u32) -> Vec<DyadicInterval> {
        let m = self.modulus(k);
        let prefix = omega.prefix(m as usize);
        (self.eval)(&prefix, k)
    }

    pub fn simple_backing(&self) -> Option<&SimpleRv> {
        self.simple.as_deref()
    }

    /// Functional pairing (X, Y): values in R^(dx+dy), max-metric.
    pub fn pair(&self, other: &ContinuousRv) -> ContinuousRv {
        let (a, b) = (self.clone(), other.clone());
        let simple = match (&self.simple, &other.simple) {
            (Some(x), Some(y)) => Some(Arc::new(x.pair(y))),
            _ => None,
        };
        let (a2, b2) = (a.clone(), b.clone());
        ContinuousRv {
            dim: self.dim + other.dim,
            modulus: Arc::new(move |k| a.modulus(k).max(b.modulus(k))),
            eval: Arc::new(move |prefix, k| {
                let mut v = a2.eval_prefix(prefix, k);
                v.extend(b2.eval_prefix(prefix, k));
                v
            }),
            simple,
        }
    }

    /// Post-composition with an interval map that contracts distances
    /// (Lipschitz constant <= 1), so modulus and radius carry over.
    pub fn map_short(
        &self,
        out_dim: usize,
        f: impl Fn(&[DyadicInterval]) -> Vec<DyadicInterval> + Send + Sync + 'static,
    ) -> ContinuousRv {
        let me = self.clone();
        ContinuousRv {
            dim: out_dim,
            modulus: self.modulus.clone(),
            eval: Arc::new(move |prefix, k| f(&me.eval_prefix(prefix, k))),
            simple: None,
        }
    }

    /// All cylinders at the modulus depth for precision k, with enclosures.
    pub fn cylinder_enclosures(&self, k: u32) -> Result<Vec<(Cylinder, Vec<DyadicInterval>)>> {
        let depth = self.modulus(k);
        let cap = oracle_depth_cap();
        if depth > cap {
            return Err(Error::OracleDepth {
                requested: depth,
                cap,
            });
        }
        let cyls = crate::space::cylinder_partition(depth)?;
        Ok(cyls
            .into_iter()
            .map(|c| {
                let enc = (self.eval)(&c.to_bits(), k);
                (c, enc)
            })
            .collect())
    }
}

fn cyl_from_word(word: u64, len: u32) -> Cylinder {
    let bits: Vec<bool> = (0..len).map(|i| (word >> i) & 1 == 1).collect();
    Cylinder::from_bits(&bits)
}

/// A random variable taking finitely many exact rational values on a clopen
/// partition of the base space.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleRv {
    dim: usize,
    pieces: Vec<(ClopenSet, Vec<Rational>)>,
}

impl SimpleRv {
    pub fn new(dim: usize, pieces: Vec<(ClopenSet, Vec<Rational>)>) -> Self {
        assert!(pieces.iter().all(|(_, v)| v.len() == dim));
        let total: Rational = pieces.iter().map(|(c, _)| c.measure()).sum();
        assert_eq!(
            total,
            Rational::from_integer(1.into()),
            "simple pieces must partition the space"
        );
        SimpleRv { dim, pieces }
    }

    pub fn constant(value: Vec<Rational>) -> Self {
        let dim = value.len();
        SimpleRv {
            dim,
            pieces: vec![(ClopenSet::full(), value)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[(ClopenSet, Vec<Rational>)] {
        &self.pieces
    }

    /// All cylinders with their piece index, as disjoint dyadic ranges
    /// scaled to 2^-60 units: (range start, range width, piece index).
    pub(crate) fn leaf_ranges(&self) -> Vec<(u64, u64, usize)> {
        let mut out = Vec::new();
        for (idx, (clopen, _)) in self.pieces.iter().enumerate() {
            for c in clopen.cylinders() {
                let len = c.len() as u32;
                // MSB-first value of the prefix
                let mut v: u64 = 0;
                for i in 0..c.len() {
                    v = (v << 1) | c.bit(i) as u64;
                }
                let width = 1u64 << (60 - len);
                out.push((v << (60 - len), width, idx));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn max_prefix_len(&self) -> u8 {
        self.pieces
            .iter()
            .flat_map(|(c, _)| c.cylinders().iter().map(|k| k.len()))
            .max()
            .unwrap_or(0)
    }

    /// Value enclosure over a cylinder: the hull of values of all pieces the
    /// cylinder meets (a point once the prefix is deep enough).
    pub fn enclosure_on_prefix(&self, prefix: &[bool]) -> Vec<DyadicInterval> {
        let c = Cylinder::from_bits(&prefix[..prefix.len().min(Cylinder::MAX_DEPTH as usize)]);
        let mut enc: Option<Vec<DyadicInterval>> = None;
        for (clopen, value) in &self.pieces {
            let meets = clopen
                .cylinders()
                .iter()
                .any(|k| c.extends(k) || k.extends(&c));
            if meets {
                let v: Vec<DyadicInterval> = value
                    .iter()
                    .map(|q| DyadicInterval::point(q.clone()))
                    .collect();
                enc = Some(match enc {
                    None => v,
                    Some(prev) => prev
                        .iter()
                        .zip(v.iter())
                        .map(|(a, b)| a.hull(b))
                        .collect(),
                });
            }
        }
        enc.expect("pieces partition the space")
    }

    /// Exact probability that the value lies strictly inside the open union.
    pub fn prob_in_boxes(&self, boxes: &[BoxRegion]) -> Rational {
        self.pieces
            .iter()
            .filter(|(_, v)| boxes.iter().any(|b| b.contains_point(v)))
            .map(|(c, _)| c.measure())
            .sum()
    }

    /// Exact probability that the value lies in the closed union.
    pub fn prob_in_closed_boxes(&self, boxes: &[BoxRegion]) -> Rational {
        self.pieces
            .iter()
            .filter(|(_, v)| {
                boxes.iter().any(|b| {
                    b.sides()
                        .iter()
                        .zip(v.iter())
                        .all(|((a, c), x)| a <= x && x <= c)
                })
            })
            .map(|(c, _)| c.measure())
            .sum()
    }

    pub fn expectation_exact(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.dim];
        for (c, v) in &self.pieces {
            let m = c.measure();
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += m.clone() * x.clone();
            }
        }
        out
    }

    pub fn pair(&self, other: &SimpleRv) -> SimpleRv {
        let mut pieces = Vec::new();
        for (ca, va) in &self.pieces {
            for (cb, vb) in &other.pieces {
                let inter = clopen_intersection(ca, cb);
                if !inter.cylinders().is_empty() {
                    let mut v = va.clone();
                    v.extend(vb.clone());
                    pieces.push((inter, v));
                }
            }
        }
        SimpleRv::new(self.dim + other.dim, pieces)
    }

    pub fn to_json(&self) -> String {
        let dto = SimpleRvDto {
            pieces: self
                .pieces
                .iter()
                .map(|(c, v)| SimplePieceDto {
                    prefixes: c.cylinders().iter().map(|k| k.prefix_string()).collect(),
                    value: v.iter().map(rat_to_string).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dto).expect("serializable")
    }

    pub fn from_json(s: &str) -> Option<Self> {
        let dto: SimpleRvDto = serde_json::from_str(s).ok()?;
        let mut dim = None;
        let mut pieces = Vec::new();
        for p in dto.pieces {
            let cyls: Option<Vec<Cylinder>> = p
                .prefixes
                .iter()
                .map(|s| Cylinder::from_str_prefix(s))
                .collect();
            let value: Option<Vec<Rational>> = p.value.iter().map(|s| parse_rational(s)).collect();
            let value = value?;
            match dim {
                None => dim = Some(value.len()),
                Some(d) if d != value.len() => return None,
                _ => {}
            }
            pieces.push((ClopenSet::new(cyls?), value));
        }
        let total: Rational = pieces.iter().map(|(c, _): &(ClopenSet, _)| c.measure()).sum();
        if total != Rational::from_integer(1.into()) {
            return None;
        }
        Some(SimpleRv::new(dim?, pieces))
    }
}

pub fn clopen_intersection(a: &ClopenSet, b: &ClopenSet) -> ClopenSet {
    let mut out = Vec::new();
    for x in a.cylinders() {
        for y in b.cylinders() {
            if x.extends(y) {
                out.push(*x);
            } else if y.extends(x) {
                out.push(*y);
            }
        }
    }
    ClopenSet::new(out)
}

#[derive(Serialize, Deserialize)]
struct SimplePieceDto {
    prefixes: Vec<String>,
    value: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SimpleRvDto {
    pieces: Vec<SimplePieceDto>,
}

/// A continuous partial function defined on a full-measure open set, with
/// the domain exhausted by clopen sets at certified rate P >= 1 - 2^-n.
#[derive(Clone)]
pub struct PiecewiseRv {
    dim: usize,
    /// Stage n: clopen subset of the domain with measure >= 1 - 2^-n.
    domain: Arc<dyn Fn(u32) -> ClopenSet + Send + Sync>,
    /// Evaluator defined (at least) on domain cylinders.
    eval: Arc<dyn Fn(&[bool], u32) -> Option<Vec<DyadicInterval>> + Send + Sync>,
    default: Vec<Rational>,
}

impl PiecewiseRv {
    pub fn new(
        dim: usize,
        domain: impl Fn(u32) -> ClopenSet + Send + Sync + 'static,
        eval: impl Fn(&[bool], u32) -> Option<Vec<DyadicInterval>> + Send + Sync + 'static,
        default: Vec<Rational>,
    ) -> Self {
        assert_eq!(default.len(), dim);
        PiecewiseRv {
            dim,
            domain: Arc::new(domain),
            eval: Arc::new(eval),
            default,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain_at(&self, n: u32) -> ClopenSet {
        (self.domain)(n)
    }

    /// The embedding into measurable random variables: stage n agrees with
    /// the partial function off a set of measure <= 2^-n.
    pub fn to_measurable(&self) -> MeasurableRv {
        let me = self.clone();
        MeasurableRv::from_fn(self.dim, move |n| {
            let dom = me.domain_at(n + 1);
            let dom_depth = dom
                .cylinders()
                .iter()
                .map(|c| c.len() as u32)
                .max()
                .unwrap_or(0);
            let me2 = me.clone();
            let dom2 = dom.clone();
            ContinuousRv::new(
                me.dim,
                move |k| dom_depth.max(k + 1),
                move |prefix, k| {
                    let c = Cylinder::from_bits(
                        &prefix[..prefix.len().min(Cylinder::MAX_DEPTH as usize)],
                    );
                    if dom2.contains_cylinder(&c) {
                        if let Some(v) = (me2.eval)(prefix, k) {
                            return v;
                        }
                    }
                    me2.default
                        .iter()
                        .map(|q| DyadicInterval::point(q.clone()))
                        .collect()
                },
            )
        })
    }
}

/// A measurable random variable: a strong Cauchy sequence of continuous
/// random variables under the Fan metric, d(X_m, X_n) < 2^-min(m,n).
#[derive(Clone)]
pub struct MeasurableRv {
    dim: usize,
    approx: Arc<dyn Fn(u32) -> ContinuousRv + Send + Sync>,
    cache: Arc<Mutex<Vec<ContinuousRv>>>,
}

impl std::fmt::Debug for MeasurableRv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MeasurableRv(dim {})", self.dim)
    }
}

impl MeasurableRv {
    pub fn from_fn(dim: usize, approx: impl Fn(u32) -> ContinuousRv + Send + Sync + 'static) -> Self {
        MeasurableRv {
            dim,
            approx: Arc::new(approx),
            cache: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn from_continuous(x: ContinuousRv) -> Self {
        let dim = x.dim();
        Self::from_fn(dim, move |_| x.clone())
    }

    pub fn constant(value: Vec<Rational>) -> Self {
        Self::from_continuous(ContinuousRv::constant(value))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn approx(&self, n: u32) -> ContinuousRv {
        let mut cache = self.cache.lock().unwrap();
        while cache.len() <= n as usize {
            let i = cache.len() as u32;
            cache.push((self.approx)(i));
        }
        cache[n as usize].clone()
    }
}
