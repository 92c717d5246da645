//! Ground-set objects: the size `n`, balanced colorings, subsets, set systems
//! and maximal chains. Elements are 0-based internally; the JSON formats in
//! [`crate::io`] use 1-based elements.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of elements of the ground set; always even and at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GroundSize(usize);

impl GroundSize {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Domain(format!("ground size must be even and >= 2, got {n}")));
        }
        Ok(GroundSize(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn half(self) -> usize {
        self.0 / 2
    }
}

impl TryFrom<usize> for GroundSize {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        GroundSize::new(n)
    }
}

impl From<GroundSize> for usize {
    fn from(g: GroundSize) -> usize {
        g.0
    }
}

/// A ±1 labeling of the ground set with zero sum.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BalancedColoring {
    values: Vec<i8>,
    plus: u64,
}

impl BalancedColoring {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        GroundSize::new(values.len())?;
        if let Some(bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Domain(format!("coloring value {bad} is not ±1")));
        }
        let sum: i64 = values.iter().map(|&v| v as i64).sum();
        if sum != 0 {
            return Err(Error::Domain(format!("coloring sums to {sum}, not 0")));
        }
        Ok(Self::from_values_unchecked(values))
    }

    fn from_values_unchecked(values: Vec<i8>) -> Self {
        let plus = if values.len() <= 64 {
            values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1)
                .fold(0u64, |m, (i, _)| m | 1 << i)
        } else {
            0
        };
        BalancedColoring { values, plus }
    }

    /// Coloring that is +1 exactly on the bits of `plus` (bit i = element i).
    pub fn from_plus_mask(n: GroundSize, plus: u64) -> Result<Self> {
        if n.get() > 64 || (n.get() < 64 && plus >> n.get() != 0) {
            return Err(Error::Domain("plus-mask does not fit the ground size".into()));
        }
        let values = (0..n.get())
            .map(|i| if plus >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        BalancedColoring::new(values)
    }

    pub fn random<R: Rng + ?Sized>(n: GroundSize, rng: &mut R) -> Self {
        let mut values: Vec<i8> = (0..n.get()).map(|i| if i < n.half() { 1 } else { -1 }).collect();
        values.shuffle(rng);
        Self::from_values_unchecked(values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn ground(&self) -> GroundSize {
        GroundSize(self.values.len())
    }

    #[inline]
    pub fn value(&self, x: usize) -> i8 {
        self.values[x]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Bitmask of the +1 elements; only for `n <= 64`.
    pub fn plus_mask(&self) -> u64 {
        debug_assert!(self.n() <= 64);
        self.plus
    }

    pub fn negated(&self) -> Self {
        Self::from_values_unchecked(self.values.iter().map(|v| -v).collect())
    }

    pub fn imbalance(&self, s: &SubsetMask) -> Result<i64> {
        if s.n() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                actual: s.n(),
            });
        }
        Ok(s.iter().map(|x| self.values[x] as i64).sum())
    }

    /// Imbalance of a set given as a bitmask (`n <= 64`).
    #[inline]
    pub fn imbalance_mask(&self, mask: u64) -> i64 {
        let plus = (mask & self.plus).count_ones() as i64;
        2 * plus - mask.count_ones() as i64
    }
}

/// A subset of the ground set as a bit-vector of length `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask {
    bits: FixedBitSet,
}

impl SubsetMask {
    pub fn empty(n: usize) -> Self {
        SubsetMask {
            bits: FixedBitSet::with_capacity(n),
        }
    }

    pub fn full(n: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(n);
        bits.insert_range(..);
        SubsetMask { bits }
    }

    pub fn from_elements<I: IntoIterator<Item = usize>>(n: usize, elems: I) -> Result<Self> {
        let mut s = SubsetMask::empty(n);
        for x in elems {
            if x >= n {
                return Err(Error::Input(format!("element {x} outside ground set of size {n}")));
            }
            s.bits.insert(x);
        }
        Ok(s)
    }

    pub fn from_u64(n: usize, mask: u64) -> Self {
        let mut s = SubsetMask::empty(n);
        for x in 0..n.min(64) {
            if mask >> x & 1 == 1 {
                s.bits.insert(x);
            }
        }
        s
    }

    /// The set as a bitmask; `None` when `n > 64`.
    pub fn to_u64(&self) -> Option<u64> {
        if self.n() > 64 {
            return None;
        }
        Some(self.iter().fold(0u64, |m, x| m | 1 << x))
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.bits.contains(x)
    }

    pub fn insert(&mut self, x: usize) {
        self.bits.insert(x);
    }

    pub fn remove(&mut self, x: usize) {
        self.bits.set(x, false);
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn elements(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn is_subset(&self, other: &SubsetMask) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &SubsetMask) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn union(&self, other: &SubsetMask) -> SubsetMask {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        SubsetMask { bits }
    }

    pub fn difference(&self, other: &SubsetMask) -> SubsetMask {
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        SubsetMask { bits }
    }

    /// Image of the set under the element map `perm` (element `x` goes to `perm[x]`).
    pub fn permuted(&self, perm: &[usize]) -> SubsetMask {
        let mut out = SubsetMask::empty(self.n());
        for x in self.iter() {
            out.bits.insert(perm[x]);
        }
        out
    }
}

/// A deduplicated collection of subsets of `[n]`, kept in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    n: GroundSize,
    sets: Vec<SubsetMask>,
}

impl SetSystem {
    pub fn new(n: GroundSize, mut sets: Vec<SubsetMask>) -> Result<Self> {
        if let Some(bad) = sets.iter().find(|s| s.n() != n.get()) {
            return Err(Error::Dimension {
                expected: n.get(),
                actual: bad.n(),
            });
        }
        sets.sort();
        sets.dedup();
        Ok(SetSystem { n, sets })
    }

    /// The full power set of `[n]`; `n` is limited to 20.
    pub fn power_set(n: GroundSize) -> Result<Self> {
        if n.get() > 20 {
            return Err(Error::capacity("power-set ground size", n.get(), 20));
        }
        let sets = (0u64..1 << n.get()).map(|m| SubsetMask::from_u64(n.get(), m)).collect();
        SetSystem::new(n, sets)
    }

    /// The `n + 1` prefix sets of a single element order.
    pub fn prefixes(chain: &MaximalChain) -> Self {
        let n = chain.n();
        let mut cur = SubsetMask::empty(n);
        let mut sets = vec![cur.clone()];
        for &x in chain.order() {
            cur.insert(x);
            sets.push(cur.clone());
        }
        SetSystem::new(GroundSize(n), sets).expect("prefix sets share the ground size")
    }

    pub fn ground(&self) -> GroundSize {
        self.n
    }

    pub fn n(&self) -> usize {
        self.n.get()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[SubsetMask] {
        &self.sets
    }

    pub fn contains(&self, s: &SubsetMask) -> bool {
        self.sets.binary_search(s).is_ok()
    }

    pub fn union(&self, other: &SetSystem) -> Result<SetSystem> {
        let mut sets = self.sets.clone();
        sets.extend(other.sets.iter().cloned());
        SetSystem::new(self.n, sets)
    }

    pub fn permuted(&self, perm: &[usize]) -> SetSystem {
        let sets = self.sets.iter().map(|s| s.permuted(perm)).collect();
        SetSystem::new(self.n, sets).expect("permutation preserves ground size")
    }

    /// Sets as bitmasks; requires `n <= 64`.
    pub fn masks(&self) -> Result<Vec<u64>> {
        if self.n() > 64 {
            return Err(Error::capacity("bitmask ground size", self.n(), 64));
        }
        Ok(self.sets.iter().map(|s| s.to_u64().expect("n <= 64")).collect())
    }

    pub fn mask_set(&self) -> Result<HashSet<u64>> {
        Ok(self.masks()?.into_iter().collect())
    }
}

/// A maximal chain recorded as the order in which elements are added.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MaximalChain {
    order: Vec<usize>,
}

impl MaximalChain {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &x in &order {
            if x >= n || seen[x] {
                return Err(Error::Input(format!("chain order is not a permutation of [{n}]")));
            }
            seen[x] = true;
        }
        Ok(MaximalChain { order })
    }

    pub fn identity(n: usize) -> Self {
        MaximalChain {
            order: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The chain set `C_i`.
    pub fn set(&self, i: usize) -> SubsetMask {
        SubsetMask::from_elements(self.n(), self.order[..i].iter().copied())
            .expect("chain elements are in range")
    }

    /// `f(C_0), …, f(C_n)`.
    pub fn prefix_imbalances(&self, f: &BalancedColoring) -> Result<Vec<i64>> {
        if f.n() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                actual: f.n(),
            });
        }
        let mut h = 0i64;
        let mut out = Vec::with_capacity(self.n() + 1);
        out.push(0);
        for &x in &self.order {
            h += f.value(x) as i64;
            out.push(h);
        }
        Ok(out)
    }

    pub fn max_abs_imbalance(&self, f: &BalancedColoring) -> Result<i64> {
        Ok(self.prefix_imbalances(f)?.into_iter().map(i64::abs).max().unwrap_or(0))
    }

    /// Whether every chain set `C_0, …, C_n` belongs to `x`.
    pub fn lies_in(&self, x: &SetSystem) -> bool {
        if x.n() != self.n() {
            return false;
        }
        let mut cur = SubsetMask::empty(self.n());
        if !x.contains(&cur) {
            return false;
        }
        for &e in &self.order {
            cur.insert(e);
            if !x.contains(&cur) {
                return false;
            }
        }
        true
    }
}

impl TryFrom<Vec<usize>> for MaximalChain {
    type Error = Error;
    fn try_from(order: Vec<usize>) -> Result<Self> {
        MaximalChain::new(order)
    }
}

impl From<MaximalChain> for Vec<usize> {
    fn from(c: MaximalChain) -> Vec<usize> {
        c.order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f4() -> BalancedColoring {
        BalancedColoring::new(vec![1, -1, 1, -1]).unwrap()
    }

    #[test]
    fn imbalance_examples() {
        let f = f4();
        let s = SubsetMask::from_elements(4, [0, 2]).unwrap();
        assert_eq!(f.imbalance(&s).unwrap(), 2);
        assert_eq!(f.imbalance(&SubsetMask::empty(4)).unwrap(), 0);
        assert_eq!(f.imbalance(&SubsetMask::full(4)).unwrap(), 0);
        assert_eq!(f.imbalance_mask(0b0101), 2);
        assert_eq!(f.imbalance_mask(0b0010), -1);
    }

    #[test]
    fn imbalance_size_mismatch() {
        let err = f4().imbalance(&SubsetMask::empty(6)).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 4, actual: 6 }));
    }

    #[test]
    fn coloring_validation() {
        assert!(BalancedColoring::new(vec![1, 1]).is_err());
        assert!(BalancedColoring::new(vec![1, 0]).is_err());
        assert!(BalancedColoring::new(vec![1, -1, 1]).is_err());
        assert!(GroundSize::new(0).is_err());
        assert!(GroundSize::new(3).is_err());
    }

    #[test]
    fn chain_validation_and_prefixes() {
        assert!(MaximalChain::new(vec![0, 0, 1]).is_err());
        let c = MaximalChain::new(vec![2, 0, 1, 3]).unwrap();
        assert_eq!(c.prefix_imbalances(&f4()).unwrap(), vec![0, 1, 2, 1, 0]);
        let x = SetSystem::prefixes(&c);
        assert_eq!(x.len(), 5);
        assert!(c.lies_in(&x));
        assert!(!MaximalChain::identity(4).lies_in(&x));
    }

    #[test]
    fn power_set_sizes() {
        let x = SetSystem::power_set(GroundSize::new(4).unwrap()).unwrap();
        assert_eq!(x.len(), 16);
        assert!(SetSystem::power_set(GroundSize::new(22).unwrap()).unwrap_err().is_capacity());
    }
}
