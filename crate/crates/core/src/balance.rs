//! Brute-force chain-balance oracles for small ground sets.

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ground::{BalancedColoring, GroundSize, MaximalChain, SetSystem};

/// Limits for the exhaustive paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceCaps {
    pub max_n: usize,
    pub max_sets: usize,
}

impl Default for BruteForceCaps {
    fn default() -> Self {
        BruteForceCaps {
            max_n: 20,
            max_sets: 1 << 20,
        }
    }
}

impl BruteForceCaps {
    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.max_n.min(62) {
            return Err(Error::capacity("brute-force ground size", n, self.max_n.min(62)));
        }
        Ok(())
    }

    fn check_system(&self, x: &SetSystem) -> Result<()> {
        self.check_n(x.n())?;
        if x.len() > self.max_sets {
            return Err(Error::capacity("set-system size", x.len(), self.max_sets));
        }
        Ok(())
    }
}

/// Bitmasks with exactly `k` of the low `n` bits set, in increasing order.
#[derive(Debug, Clone)]
pub struct FixedWeightMasks {
    next: Option<u64>,
    limit: u64,
}

impl FixedWeightMasks {
    pub fn new(n: usize, k: usize) -> Self {
        assert!(n <= 62 && k <= n);
        let first = if k == 0 { 0 } else { (1u64 << k) - 1 };
        FixedWeightMasks {
            next: Some(first),
            limit: 1u64 << n,
        }
    }
}

impl Iterator for FixedWeightMasks {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        if cur >= self.limit {
            self.next = None;
            return None;
        }
        self.next = if cur == 0 {
            None
        } else {
            // Gosper's hack.
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur)
    }
}

/// Stream of all `C(n, n/2)` balanced colorings.
pub fn enumerate_balanced_colorings(
    n: GroundSize,
    caps: &BruteForceCaps,
) -> Result<impl Iterator<Item = BalancedColoring>> {
    caps.check_n(n.get())?;
    Ok(FixedWeightMasks::new(n.get(), n.half())
        .map(move |m| BalancedColoring::from_plus_mask(n, m).expect("weight n/2 mask is balanced")))
}

/// Plus-masks of the balanced colorings, optionally only those with element 0
/// colored +1 (one representative per unordered partition).
pub(crate) fn balanced_masks(n: GroundSize, unordered: bool) -> Vec<u64> {
    FixedWeightMasks::new(n.get(), n.half())
        .filter(|m| !unordered || m & 1 == 1)
        .collect()
}

/// The inclusion structure of a set system, reusable across colorings.
#[derive(Debug, Clone)]
pub struct ChainLattice {
    n: GroundSize,
    masks: Vec<u64>,
    /// Set indices grouped by cardinality.
    layers: Vec<Vec<u32>>,
    /// For each set, its one-larger supersets in the system as (index, added
    /// element), by increasing element.
    succs: Vec<Vec<(u32, u8)>>,
    source: Option<u32>,
    sink: Option<u32>,
}

impl ChainLattice {
    pub fn new(x: &SetSystem, caps: &BruteForceCaps) -> Result<Self> {
        caps.check_system(x)?;
        let n = x.ground();
        let masks = x.masks()?;
        let index: HashMap<u64, u32> = masks.iter().enumerate().map(|(i, &m)| (m, i as u32)).collect();
        let mut layers = vec![Vec::new(); n.get() + 1];
        let mut succs = vec![Vec::new(); masks.len()];
        for (i, &m) in masks.iter().enumerate() {
            layers[m.count_ones() as usize].push(i as u32);
            for e in 0..n.get() {
                if m >> e & 1 == 0 {
                    if let Some(&s) = index.get(&(m | 1u64 << e)) {
                        succs[i].push((s, e as u8));
                    }
                }
            }
        }
        let full = (1u64 << n.get()) - 1;
        Ok(ChainLattice {
            n,
            source: index.get(&0).copied(),
            sink: index.get(&full).copied(),
            masks,
            layers,
            succs,
        })
    }

    /// Cost-to-go: the least achievable maximum of `|f|` over chain sets from
    /// each set up to `[n]`; `u32::MAX` where `[n]` is unreachable.
    fn cost_to_go(&self, f: &BalancedColoring) -> Vec<u32> {
        let mut value = vec![u32::MAX; self.masks.len()];
        let Some(sink) = self.sink else {
            return value;
        };
        value[sink as usize] = 0;
        for layer in self.layers[..self.n.get()].iter().rev() {
            for &s in layer {
                let best = self.succs[s as usize]
                    .iter()
                    .map(|&(t, _)| value[t as usize])
                    .min()
                    .unwrap_or(u32::MAX);
                if best != u32::MAX {
                    let h = f.imbalance_mask(self.masks[s as usize]).unsigned_abs() as u32;
                    value[s as usize] = best.max(h);
                }
            }
        }
        value
    }

    /// Minimum over chains of the maximum prefix imbalance, or `None` without a chain.
    pub fn cost(&self, f: &BalancedColoring) -> Option<u32> {
        let v = self.cost_to_go(f)[self.source? as usize];
        (v != u32::MAX).then_some(v)
    }

    /// An optimal chain; among optimal chains, the one whose element order is
    /// lexicographically smallest.
    pub fn best_chain(&self, f: &BalancedColoring) -> Option<(MaximalChain, u32)> {
        let value = self.cost_to_go(f);
        let mut cur = self.source?;
        let cost = value[cur as usize];
        if cost == u32::MAX {
            return None;
        }
        let mut order = Vec::with_capacity(self.n.get());
        while Some(cur) != self.sink {
            let &(next, e) = self.succs[cur as usize]
                .iter()
                .find(|&&(t, _)| value[t as usize] <= cost)
                .expect("an optimal successor exists");
            order.push(e as usize);
            cur = next;
        }
        Some((MaximalChain::new(order).expect("DP path is a permutation"), cost))
    }
}

/// The cheapest maximal chain of `x` for `f`, with its maximal prefix imbalance.
pub fn best_chain_for(
    x: &SetSystem,
    f: &BalancedColoring,
    caps: &BruteForceCaps,
) -> Result<Option<(MaximalChain, u32)>> {
    if f.n() != x.n() {
        return Err(Error::Dimension {
            expected: x.n(),
            actual: f.n(),
        });
    }
    Ok(ChainLattice::new(x, caps)?.best_chain(f))
}

/// The best-chain cost of every balanced coloring, in enumeration order.
fn all_costs(x: &SetSystem, caps: &BruteForceCaps) -> Result<Vec<Option<u32>>> {
    let lattice = ChainLattice::new(x, caps)?;
    let n = x.ground();
    let masks = balanced_masks(n, false);
    Ok(masks
        .par_iter()
        .map(|&m| lattice.cost(&BalancedColoring::from_plus_mask(n, m).expect("balanced mask")))
        .collect())
}

/// `cbal(X)`; errors if some coloring has no maximal chain at all.
pub fn chain_balance(x: &SetSystem, caps: &BruteForceCaps) -> Result<u32> {
    let costs = all_costs(x, caps)?;
    let mut worst = 0;
    for c in costs {
        match c {
            Some(c) => worst = worst.max(c),
            None => return Err(Error::Infeasible("set system has no maximal chain".into())),
        }
    }
    Ok(worst)
}

/// Exact fraction `successes / total` of balanced colorings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColoringFraction {
    pub successes: u64,
    pub total: u64,
}

impl ColoringFraction {
    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.successes, self.total)
    }

    pub fn is_one(&self) -> bool {
        self.successes == self.total
    }
}

impl fmt::Display for ColoringFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.successes, self.total)
    }
}

/// Fraction of balanced colorings admitting a chain with all `|f(C_i)| <= k`.
pub fn average_case_epsilon(x: &SetSystem, k: u32, caps: &BruteForceCaps) -> Result<ColoringFraction> {
    Ok(epsilon_table(x, k, caps)?.pop().expect("table has k + 1 entries"))
}

/// `ε(0), …, ε(k_max)` from a single pass over the colorings.
pub fn epsilon_table(x: &SetSystem, k_max: u32, caps: &BruteForceCaps) -> Result<Vec<ColoringFraction>> {
    let costs = all_costs(x, caps)?;
    let total = costs.len() as u64;
    Ok((0..=k_max)
        .map(|k| ColoringFraction {
            successes: costs.iter().filter(|c| matches!(c, Some(c) if *c <= k)).count() as u64,
            total,
        })
        .collect())
}
