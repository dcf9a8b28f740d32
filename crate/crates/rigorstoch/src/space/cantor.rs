//! The base probability space: Cantor space with the fair-coin measure,
//! cylinders, and clopen sets.

use crate::error::{Error, Result};
use crate::exactnum::{pow2, Rational};
use std::fmt;
use std::sync::Arc;

/// A point of {0,1}^omega: a total, deterministic bit function.
#[derive(Clone)]
pub struct CantorPoint {
    bit: Arc<dyn Fn(u64) -> bool + Send + Sync>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl CantorPoint {
    pub fn from_fn(f: impl Fn(u64) -> bool + Send + Sync + 'static) -> Self {
        CantorPoint { bit: Arc::new(f) }
    }

    /// Deterministic pseudo-random point: bit i comes from a splitmix64 hash
    /// of (seed, i/64). Same seed, same point, on every platform.
    pub fn from_seed(seed: u64) -> Self {
        Self::from_fn(move |i| {
            let block = i / 64;
            let word = splitmix64(seed ^ splitmix64(block.wrapping_add(1)));
            (word >> (i % 64)) & 1 == 1
        })
    }

    /// Prefix followed by zeros.
    pub fn from_prefix(prefix: Vec<bool>) -> Self {
        Self::from_fn(move |i| prefix.get(i as usize).copied().unwrap_or(false))
    }

    pub fn zeros() -> Self {
        Self::from_fn(|_| false)
    }

    pub fn bit(&self, i: u64) -> bool {
        (self.bit)(i)
    }

    pub fn prefix(&self, len: usize) -> Vec<bool> {
        (0..len as u64).map(|i| self.bit(i)).collect()
    }

    /// The i-th interleaved copy of the space: bit j of copy i reads global
    /// bit 2^i (2j+1) - 1, so distinct copies touch disjoint bit sets.
    /// Copies above 40 are refused; they would overflow bit indices after a
    /// few thousand bits.
    pub fn copy_slice(&self, copy: u32) -> Result<CantorPoint> {
        if copy > 40 {
            return Err(Error::BitIndexOverflow { copy, bit: 0 });
        }
        let parent = self.bit.clone();
        Ok(CantorPoint::from_fn(move |j| {
            let idx = interleave_index(copy, j).expect("bit index overflow in copy slice");
            parent(idx)
        }))
    }
}

impl fmt::Debug for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = (0..16u64)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect();
        write!(f, "CantorPoint({bits}...)")
    }
}

/// Global index of bit j in copy i under the dyadic interleaving.
pub fn interleave_index(copy: u32, j: u64) -> Result<u64> {
    let odd = (j as u128) * 2 + 1;
    let shifted = odd.checked_shl(copy).ok_or(Error::BitIndexOverflow {
        copy,
        bit: j,
    })?;
    if shifted > u64::MAX as u128 {
        return Err(Error::BitIndexOverflow { copy, bit: j });
    }
    Ok((shifted - 1) as u64)
}

/// A cylinder set: all sequences extending a fixed prefix of length <= 60,
/// packed into a word. P-measure is exactly 2^-len.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cylinder {
    len: u8,
    bits: u64,
}

impl fmt::Debug for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyl({})", self.prefix_string())
    }
}

impl Cylinder {
    pub const MAX_DEPTH: u8 = 60;

    pub fn root() -> Self {
        Cylinder { len: 0, bits: 0 }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        assert!(bits.len() <= Self::MAX_DEPTH as usize);
        let mut packed = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                packed |= 1 << i;
            }
        }
        Cylinder {
            len: bits.len() as u8,
            bits: packed,
        }
    }

    pub fn from_str_prefix(s: &str) -> Option<Self> {
        let bits: Option<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        Some(Self::from_bits(&bits?))
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: u8) -> bool {
        debug_assert!(i < self.len);
        (self.bits >> i) & 1 == 1
    }

    pub fn child(&self, b: bool) -> Cylinder {
        assert!(self.len < Self::MAX_DEPTH);
        Cylinder {
            len: self.len + 1,
            bits: if b {
                self.bits | (1 << self.len)
            } else {
                self.bits
            },
        }
    }

    pub fn measure(&self) -> Rational {
        pow2(-(self.len as i64))
    }

    pub fn prefix_string(&self) -> String {
        (0..self.len).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// Whether `self`'s prefix extends (or equals) `other`'s.
    pub fn extends(&self, other: &Cylinder) -> bool {
        if self.len < other.len {
            return false;
        }
        let mask = if other.len == 0 {
            0
        } else {
            (1u64 << other.len) - 1
        };
        (self.bits & mask) == (other.bits & mask)
    }

    pub fn is_disjoint(&self, other: &Cylinder) -> bool {
        !self.extends(other) && !other.extends(self)
    }

    pub fn contains_point(&self, omega: &CantorPoint) -> bool {
        (0..self.len).all(|i| omega.bit(i as u64) == self.bit(i))
    }

    /// The representative point: prefix then zeros.
    pub fn representative(&self) -> CantorPoint {
        CantorPoint::from_prefix(self.to_bits())
    }
}

/// Reads RIGORSTOCH_ORACLE_DEPTH; caps exhaustive cylinder enumeration.
pub fn oracle_depth_cap() -> u32 {
    std::env::var("RIGORSTOCH_ORACLE_DEPTH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(22)
}

/// All 2^depth cylinders of a given depth, in lexicographic order.
pub fn cylinder_partition(depth: u32) -> Result<Vec<Cylinder>> {
    let cap = oracle_depth_cap();
    if depth > cap {
        return Err(Error::OracleDepth {
            requested: depth,
            cap,
        });
    }
    let n = 1u64 << depth;
    Ok((0..n)
        .map(|bits| Cylinder {
            len: depth as u8,
            bits,
        })
        .collect())
}

/// A finite union of cylinders normalized to a prefix antichain; measure is
/// the exact sum of the members' measures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClopenSet {
    cylinders: Vec<Cylinder>,
}

impl ClopenSet {
    pub fn empty() -> Self {
        ClopenSet { cylinders: Vec::new() }
    }

    pub fn full() -> Self {
        ClopenSet {
            cylinders: vec![Cylinder::root()],
        }
    }

    pub fn new(mut cylinders: Vec<Cylinder>) -> Self {
        // 1. drop cylinders that extend another in the list
        cylinders.sort();
        let mut kept: Vec<Cylinder> = Vec::with_capacity(cylinders.len());
        'next: for c in cylinders {
            for k in &kept {
                if c.extends(k) {
                    continue 'next;
                }
            }
            kept.push(c);
        }
        // 2. merge sibling pairs until stable
        loop {
            kept.sort_by_key(|c| (std::cmp::Reverse(c.len()), c.bits));
            let mut merged = false;
            let mut out: Vec<Cylinder> = Vec::with_capacity(kept.len());
            let mut used = vec![false; kept.len()];
            for i in 0..kept.len() {
                if used[i] {
                    continue;
                }
                let a = kept[i];
                let mut found = None;
                if a.len() > 0 {
                    let sibling = Cylinder {
                        len: a.len,
                        bits: a.bits ^ (1 << (a.len - 1)),
                    };
                    for j in (i + 1)..kept.len() {
                        if !used[j] && kept[j] == sibling {
                            found = Some(j);
                            break;
                        }
                    }
                }
                if let Some(j) = found {
                    used[i] = true;
                    used[j] = true;
                    out.push(Cylinder {
                        len: a.len - 1,
                        bits: a.bits & !(1 << (a.len - 1)),
                    });
                    merged = true;
                } else {
                    used[i] = true;
                    out.push(a);
                }
            }
            kept = out;
            if !merged {
                break;
            }
        }
        kept.sort();
        ClopenSet { cylinders: kept }
    }

    pub fn cylinders(&self) -> &[Cylinder] {
        &self.cylinders
    }

    pub fn measure(&self) -> Rational {
        self.cylinders.iter().map(|c| c.measure()).sum()
    }

    pub fn contains_cylinder(&self, c: &Cylinder) -> bool {
        self.cylinders.iter().any(|k| c.extends(k))
    }

    pub fn contains_point(&self, omega: &CantorPoint) -> bool {
        self.cylinders.iter().any(|k| k.contains_point(omega))
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        let mut all = self.cylinders.clone();
        all.extend_from_slice(&other.cylinders);
        ClopenSet::new(all)
    }

    /// Symmetric-difference measure, the clopen metric from the measurable
    /// set completion.
    pub fn sym_diff_measure(&self, other: &ClopenSet) -> Rational {
        let depth = self
            .cylinders
            .iter()
            .chain(other.cylinders.iter())
            .map(|c| c.len())
            .max()
            .unwrap_or(0);
        let mut total = Rational::from_integer(0.into());
        for leaf in 0..(1u64 << depth) {
            let c = Cylinder { len: depth, bits: leaf };
            let in_a = self.contains_cylinder(&c);
            let in_b = other.contains_cylinder(&c);
            if in_a != in_b {
                total += c.measure();
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, rat_int};

    #[test]
    fn partition_counts_and_measure() {
        let p0 = cylinder_partition(0).unwrap();
        assert_eq!(p0.len(), 1);
        assert_eq!(p0[0].measure(), rat_int(1));
        let p3 = cylinder_partition(3).unwrap();
        assert_eq!(p3.len(), 8);
        assert!(p3.iter().all(|c| c.measure() == rat(1, 8)));
        let p10 = cylinder_partition(10).unwrap();
        let total: Rational = p10.iter().map(|c| c.measure()).sum();
        assert_eq!(total, rat_int(1));
    }

    #[test]
    fn depth_cap_enforced() {
        let err = cylinder_partition(63).unwrap_err();
        assert!(matches!(err, Error::OracleDepth { .. }));
    }

    #[test]
    fn antichain_normalization() {
        // 0 and its refinements collapse; siblings merge upward
        let set = ClopenSet::new(vec![
            Cylinder::from_str_prefix("00").unwrap(),
            Cylinder::from_str_prefix("01").unwrap(),
            Cylinder::from_str_prefix("011").unwrap(),
            Cylinder::from_str_prefix("1").unwrap(),
        ]);
        assert_eq!(set, ClopenSet::full());
        assert_eq!(set.measure(), rat_int(1));

        let half = ClopenSet::new(vec![
            Cylinder::from_str_prefix("10").unwrap(),
            Cylinder::from_str_prefix("11").unwrap(),
        ]);
        assert_eq!(half.cylinders().len(), 1);
        assert_eq!(half.measure(), rat(1, 2));
    }

    #[test]
    fn exhaustive_antichain_measure_depth4() {
        // measure is preserved by normalization for every subset of depth-4 leaves
        for mask in 0u32..256 {
            let cyls: Vec<Cylinder> = (0..8)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| Cylinder { len: 3, bits: i as u64 })
                .collect();
            let raw: Rational = cyls.iter().map(|c| c.measure()).sum();
            let set = ClopenSet::new(cyls);
            assert_eq!(set.measure(), raw);
            // pairwise incomparable
            for a in set.cylinders() {
                for b in set.cylinders() {
                    if a != b {
                        assert!(a.is_disjoint(b));
                    }
                }
            }
        }
    }

    #[test]
    fn interleaving_disjoint() {
        use std::collections::HashSet;
        let mut seen = HashSet::new();
        for copy in 0..6u32 {
            for j in 0..200u64 {
                let idx = interleave_index(copy, j).unwrap();
                assert!(seen.insert(idx), "copy {copy} bit {j} collides");
            }
        }
        assert!(interleave_index(80, 1 << 40).is_err());
    }

    #[test]
    fn seeded_points_deterministic() {
        let a = CantorPoint::from_seed(42);
        let b = CantorPoint::from_seed(42);
        let c = CantorPoint::from_seed(43);
        let pa = a.prefix(128);
        assert_eq!(pa, b.prefix(128));
        assert_ne!(pa, c.prefix(128));
        // roughly balanced bits
        let ones = pa.iter().filter(|&&x| x).count();
        assert!(ones > 32 && ones < 96);
    }
}
