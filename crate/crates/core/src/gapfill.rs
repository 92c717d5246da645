//! Ordering a gap set so that every intermediate chain set stays within
//! imbalance 1, plus an exhaustive search used as a test oracle.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ground::{BalancedColoring, GroundSize, SubsetMask};

/// Base set `S` and gap set `I` under a coloring `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapInstance {
    pub f: BalancedColoring,
    pub s: SubsetMask,
    pub i: SubsetMask,
}

impl GapInstance {
    /// Builds an instance and checks `S ∩ I = ∅`, `|f(S)| <= 1`, `|f(S ∪ I)| <= 1`.
    pub fn new(f: BalancedColoring, s: SubsetMask, i: SubsetMask) -> Result<Self> {
        let inst = GapInstance::relaxed(f, s, i)?;
        if !inst.s.is_disjoint(&inst.i) {
            return Err(Error::Precondition("base set and gap set intersect".into()));
        }
        let hs = inst.f.imbalance(&inst.s)?;
        if hs.abs() > 1 {
            return Err(Error::Precondition(format!("|f(S)| = {} > 1", hs.abs())));
        }
        let hsi = hs + inst.f.imbalance(&inst.i)?;
        if hsi.abs() > 1 {
            return Err(Error::Precondition(format!("|f(S ∪ I)| = {} > 1", hsi.abs())));
        }
        Ok(inst)
    }

    /// Builds an instance checking only the ground sizes.
    pub fn relaxed(f: BalancedColoring, s: SubsetMask, i: SubsetMask) -> Result<Self> {
        for m in [&s, &i] {
            if m.n() != f.n() {
                return Err(Error::Dimension {
                    expected: f.n(),
                    actual: m.n(),
                });
            }
        }
        Ok(GapInstance { f, s, i })
    }
}

/// Greedy ordering of `elems` starting from imbalance `h_start`.
///
/// At `h = 0` the smallest remaining element is taken; at `h = ±1` the
/// smallest remaining element of the opposite sign. Requires `|h_start| <= 1`
/// and `|h_start + f(elems)| <= 1`.
pub fn greedy_order_elements(f: &BalancedColoring, h_start: i64, elems: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = elems.to_vec();
    sorted.sort_unstable();
    let total: i64 = sorted.iter().map(|&x| f.value(x) as i64).sum();
    if h_start.abs() > 1 || (h_start + total).abs() > 1 {
        return Err(Error::Precondition(format!(
            "gap endpoints have imbalance {h_start} and {}",
            h_start + total
        )));
    }
    let mut plus: VecDeque<usize> = sorted.iter().copied().filter(|&x| f.value(x) == 1).collect();
    let mut minus: VecDeque<usize> = sorted.iter().copied().filter(|&x| f.value(x) == -1).collect();
    let final_h = h_start + total;
    let mut h = h_start;
    let mut out = Vec::with_capacity(sorted.len());
    while !plus.is_empty() || !minus.is_empty() {
        let remaining = (plus.len() + minus.len()) as i64;
        let sigma = final_h - h;
        let next = match h {
            0 => match (plus.front(), minus.front()) {
                (Some(&p), Some(&m)) if p < m => plus.pop_front(),
                (Some(_), Some(_)) => minus.pop_front(),
                (Some(_), None) => plus.pop_front(),
                _ => minus.pop_front(),
            },
            1 => {
                let expected = (remaining - sigma) / 2;
                assert!(
                    minus.len() as i64 == expected && expected >= 1,
                    "counting identity violated at h = +1: {} correcting elements, expected {expected}",
                    minus.len()
                );
                minus.pop_front()
            }
            -1 => {
                let expected = (remaining + sigma) / 2;
                assert!(
                    plus.len() as i64 == expected && expected >= 1,
                    "counting identity violated at h = -1: {} correcting elements, expected {expected}",
                    plus.len()
                );
                plus.pop_front()
            }
            _ => unreachable!("greedy keeps |h| <= 1"),
        }
        .expect("a candidate exists");
        h += f.value(next) as i64;
        out.push(next);
    }
    Ok(out)
}

pub fn greedy_order(inst: &GapInstance) -> Result<Vec<usize>> {
    let inst = GapInstance::new(inst.f.clone(), inst.s.clone(), inst.i.clone())?;
    let h = inst.f.imbalance(&inst.s)?;
    greedy_order_elements(&inst.f, h, &inst.i.elements())
}

pub const ORACLE_CAP: usize = 12;

/// Depth-first search over orderings of `I` with prefix pruning and a memo of
/// dead subsets. Finds an ordering keeping `|f(S ∪ prefix)| <= 1` for every
/// prefix if one exists.
pub fn exhaustive_order_oracle(inst: &GapInstance) -> Result<Option<Vec<usize>>> {
    let elems = inst.i.elements();
    if elems.len() > ORACLE_CAP {
        return Err(Error::capacity("oracle gap size", elems.len(), ORACLE_CAP));
    }
    let h0 = inst.f.imbalance(&inst.s)?;
    if h0.abs() > 1 {
        return Ok(None);
    }
    let vals: Vec<i64> = elems.iter().map(|&x| inst.f.value(x) as i64).collect();
    let full = (1u32 << elems.len()) - 1;
    let mut dead = HashSet::new();
    let mut order = Vec::with_capacity(elems.len());

    fn dfs(used: u32, h: i64, full: u32, vals: &[i64], dead: &mut HashSet<u32>, order: &mut Vec<usize>) -> bool {
        if used == full {
            return true;
        }
        if dead.contains(&used) {
            return false;
        }
        for k in 0..vals.len() {
            if used >> k & 1 == 0 && (h + vals[k]).abs() <= 1 {
                order.push(k);
                if dfs(used | 1 << k, h + vals[k], full, vals, dead, order) {
                    return true;
                }
                order.pop();
            }
        }
        dead.insert(used);
        false
    }

    if dfs(0, h0, full, &vals, &mut dead, &mut order) {
        Ok(Some(order.into_iter().map(|k| elems[k]).collect()))
    } else {
        Ok(None)
    }
}

/// Prefix imbalances `f(S ∪ {x_1..x_k})` for `k = 0..=len`.
pub fn prefix_imbalances(f: &BalancedColoring, h_start: i64, order: &[usize]) -> Vec<i64> {
    let mut h = h_start;
    let mut out = vec![h];
    for &x in order {
        h += f.value(x) as i64;
        out.push(h);
    }
    out
}

/// A random valid instance on a random coloring of `[n]` with `|I| <= max_gap`.
pub fn random_gap_instance<R: Rng + ?Sized>(n: GroundSize, max_gap: usize, rng: &mut R) -> GapInstance {
    let f = BalancedColoring::random(n, rng);
    let mut plus: Vec<usize> = (0..n.get()).filter(|&x| f.value(x) == 1).collect();
    let mut minus: Vec<usize> = (0..n.get()).filter(|&x| f.value(x) == -1).collect();
    plus.shuffle(rng);
    minus.shuffle(rng);
    let half = n.half();
    // S takes a plus and b minus elements with |a - b| <= 1.
    let b = rng.random_range(0..half);
    let a = (b as i64 + rng.random_range(-1i64..=1)).clamp(0, half as i64 - 1) as usize;
    let (s_plus, rest_plus) = plus.split_at(a);
    let (s_minus, rest_minus) = minus.split_at(b);
    let max_gap = max_gap.min(rest_plus.len() + rest_minus.len());
    let (c, d) = loop {
        let size = rng.random_range(0..=max_gap);
        let c = rng.random_range(0..=size);
        let d = size - c;
        let h = (a + c) as i64 - (b + d) as i64;
        if c <= rest_plus.len() && d <= rest_minus.len() && h.abs() <= 1 {
            break (c, d);
        }
    };
    let s = SubsetMask::from_elements(n.get(), s_plus.iter().chain(s_minus).copied()).expect("in range");
    let i = SubsetMask::from_elements(n.get(), rest_plus[..c].iter().chain(&rest_minus[..d]).copied()).expect("in range");
    GapInstance::new(f, s, i).expect("constructed to satisfy the invariants")
}
