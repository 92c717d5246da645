//! Local patterns on a segment: a prefix pair plus any subset of the window
//! between two grid points, with the window size capped by the profile budget.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::profile::ConstantsProfile;
use crate::error::{Error, Result};
use crate::ground::SubsetMask;
use crate::steered::{GridPosition, Segment};

/// A window `from -> to` on the grid of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub segment: Segment,
    pub from: GridPosition,
    pub to: GridPosition,
}

impl Window {
    pub fn new(segment: Segment, from: GridPosition, to: GridPosition) -> Self {
        Window { segment, from, to }
    }

    pub fn gap_size(&self) -> usize {
        (self.to.a - self.from.a) + (self.to.b - self.from.b)
    }

    /// Well-formed, inside the segment, and within budget.
    pub fn fits(&self, profile: &ConstantsProfile) -> bool {
        self.from.le(&self.to) && self.to.within(&self.segment) && self.gap_size() <= profile.budget(self.segment.len)
    }

    /// The prefix pair at `from`, as up to two half-open element ranges.
    pub fn floor_ranges(&self) -> [(usize, usize); 2] {
        prefix_ranges(&self.segment, self.from)
    }

    /// The prefix pair at `to`: every element a pattern in this window may contain.
    pub fn ceiling_ranges(&self) -> [(usize, usize); 2] {
        prefix_ranges(&self.segment, self.to)
    }
}

fn prefix_ranges(seg: &Segment, pos: GridPosition) -> [(usize, usize); 2] {
    [(seg.start, seg.start + pos.a), (seg.split, seg.split + pos.b)]
}

/// `A = P_L ∪ P_R ∪ T` with `T` inside the window's gap region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalPattern {
    pub window: Window,
    pub t: Vec<usize>,
}

impl LocalPattern {
    pub fn new(window: Window, mut t: Vec<usize>, profile: &ConstantsProfile) -> Result<Self> {
        if !window.fits(profile) {
            return Err(Error::Input(format!("window {window:?} is malformed or over budget")));
        }
        t.sort_unstable();
        t.dedup();
        let gap: Vec<usize> = window.segment.gap_elements(window.from, window.to).collect();
        if let Some(x) = t.iter().find(|x| !gap.contains(x)) {
            return Err(Error::Input(format!("element {x} lies outside the gap region")));
        }
        Ok(LocalPattern { window, t })
    }

    pub fn elements(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.window.segment.grid_elements(self.window.from).chain(self.t.iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

/// Smallest window containing membership predicate `contains` on `seg`,
/// assuming the set lies inside `seg`: the longest prefixes contained in the
/// set, up to one past the last contained position in each half.
fn tightest_window(seg: &Segment, contains: &impl Fn(usize) -> bool) -> Window {
    let half = |len: usize, at: &dyn Fn(usize) -> usize| {
        let a = (0..len).position(|i| !contains(at(i))).unwrap_or(len);
        let end = (a..len).rev().find(|&i| contains(at(i))).map_or(a, |i| i + 1);
        (a, end)
    };
    let (a, a2) = half(seg.left_len(), &|i| seg.left(i));
    let (b, b2) = half(seg.right_len(), &|i| seg.right(i));
    Window::new(*seg, GridPosition::new(a, b), GridPosition::new(a2, b2))
}

/// Minimal-window witness for the set described by `contains` restricted to `seg`.
pub(crate) fn witness_for(seg: &Segment, contains: impl Fn(usize) -> bool, profile: &ConstantsProfile) -> Option<LocalPattern> {
    let w = tightest_window(seg, &contains);
    if w.gap_size() > profile.budget(seg.len) {
        return None;
    }
    let t = seg.gap_elements(w.from, w.to).filter(|&x| contains(x)).collect();
    Some(LocalPattern { window: w, t })
}

/// Decides membership of `a` in the local system of `seg`, returning the
/// witness with the smallest window.
pub fn local_membership(a: &SubsetMask, seg: &Segment, profile: &ConstantsProfile) -> Result<Option<LocalPattern>> {
    seg.check(a.n())?;
    if let Some(x) = a.iter().find(|&x| !seg.contains(x)) {
        return Err(Error::Precondition(format!("element {x} lies outside segment {seg:?}")));
    }
    Ok(witness_for(seg, |x| a.contains(x), profile))
}

/// Mask version of [`local_membership`] for ground sets of at most 64 elements;
/// bits outside `seg` make the answer `false`.
pub fn local_member_mask(mask: u64, seg: &Segment, budget: usize) -> bool {
    if mask & !segment_mask(seg) != 0 {
        return false;
    }
    tightest_window(seg, &|x| mask >> x & 1 == 1).gap_size() <= budget
}

pub fn segment_mask(seg: &Segment) -> u64 {
    range_mask(seg.start, seg.end())
}

pub(crate) fn range_mask(lo: usize, hi: usize) -> u64 {
    if hi <= lo {
        0
    } else if hi - lo >= 64 {
        u64::MAX << lo
    } else {
        ((1u64 << (hi - lo)) - 1) << lo
    }
}

/// Number of `(start, end, T)` triples: `Σ 2^(da+db)·(L-da+1)·(R-db+1)` over
/// window shapes `(da, db)` with `da + db` within budget.
pub fn local_pattern_count(seg: &Segment, profile: &ConstantsProfile) -> BigUint {
    local_pattern_count_for_budget(seg, profile.budget(seg.len))
}

/// [`local_pattern_count`] with an explicit window budget.
pub fn local_pattern_count_for_budget(seg: &Segment, budget: usize) -> BigUint {
    let (l, r) = (seg.left_len(), seg.right_len());
    let budget = budget.min(l + r);
    let mut by_size = vec![0u128; budget + 1];
    for da in 0..=l.min(budget) {
        for db in 0..=r.min(budget - da) {
            by_size[da + db] += ((l - da + 1) * (r - db + 1)) as u128;
        }
    }
    let mut total = BigUint::zero();
    for (s, c) in by_size.iter().enumerate().rev() {
        total += BigUint::from(*c) << s;
    }
    total
}

/// The claimed ceiling `2^M0 · m^(Gamma+3)`.
pub fn local_count_ceiling(m: usize, profile: &ConstantsProfile) -> BigUint {
    (BigUint::from(1u32) << profile.m0() as usize) * BigUint::from(m).pow(profile.gamma() + 3)
}

pub const LOCAL_ENUMERATION_CAP: usize = 1 << 22;

/// Distinct sets of the local system of `seg` as masks, for `n <= 62`.
pub fn enumerate_local(seg: &Segment, n: usize, profile: &ConstantsProfile) -> Result<Vec<u64>> {
    if n > 62 {
        return Err(Error::capacity("ground size for local enumeration", n, 62));
    }
    seg.check(n)?;
    let count = local_pattern_count(seg, profile);
    if count > BigUint::from(LOCAL_ENUMERATION_CAP) {
        return Err(Error::capacity("local pattern count", count, LOCAL_ENUMERATION_CAP));
    }
    let (l, r) = (seg.left_len(), seg.right_len());
    let budget = profile.budget(seg.len);
    let mut out = Vec::new();
    for a in 0..=l {
        for b in 0..=r {
            let base = range_mask(seg.start, seg.start + a) | range_mask(seg.split, seg.split + b);
            for a2 in a..=l {
                for b2 in b..=r {
                    if (a2 - a) + (b2 - b) > budget {
                        break;
                    }
                    let gap = range_mask(seg.start + a, seg.start + a2) | range_mask(seg.split + b, seg.split + b2);
                    let mut t = gap;
                    loop {
                        out.push(base | t);
                        if t == 0 {
                            break;
                        }
                        t = (t - 1) & gap;
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(budget_m0: u32) -> ConstantsProfile {
        ConstantsProfile::new(1, 1, 1, budget_m0).unwrap()
    }

    /// Counts triples by walking every start, end and gap subset.
    fn count_triples(seg: &Segment, profile: &ConstantsProfile) -> u64 {
        let (l, r) = (seg.left_len(), seg.right_len());
        let budget = profile.budget(seg.len);
        let mut c = 0u64;
        for a in 0..=l {
            for b in 0..=r {
                for a2 in a..=l {
                    for b2 in b..=r {
                        let g = (a2 - a) + (b2 - b);
                        if g <= budget {
                            c += 1 << g;
                        }
                    }
                }
            }
        }
        c
    }

    #[test]
    fn count_matches_direct_walk() {
        for m in 1..=8 {
            for m0 in [1, 2, 3, 8] {
                let seg = Segment::new(0, m);
                let p = tiny(m0);
                assert_eq!(local_pattern_count(&seg, &p), BigUint::from(count_triples(&seg, &p)), "m={m} m0={m0}");
            }
        }
    }

    #[test]
    fn zero_budget_counts_prefix_pairs() {
        for m in 1..=20usize {
            let c = local_pattern_count_for_budget(&Segment::new(0, m), 0);
            assert_eq!(c, BigUint::from((m.div_ceil(2) + 1) * (m / 2 + 1)));
        }
    }

    #[test]
    fn paper_count_under_ceiling() {
        let p = ConstantsProfile::paper();
        let m = 10_000;
        let c = local_pattern_count(&Segment::new(0, m), &p);
        let ceiling = (BigUint::from(1u32) << 700usize) * BigUint::from(10_000u32).pow(63);
        assert!(c <= ceiling);
        assert_eq!(local_count_ceiling(m, &p), ceiling);
    }

    #[test]
    fn membership_examples() {
        let p = ConstantsProfile::toy();
        let seg = Segment::new(0, 10);
        let a = SubsetMask::from_elements(10, [0, 1, 2]).unwrap();
        let w = local_membership(&a, &seg, &p).unwrap().unwrap();
        assert_eq!(w.window.from, GridPosition::new(3, 0));
        assert_eq!(w.window.gap_size(), 0);
        let a = SubsetMask::from_elements(10, [1]).unwrap();
        let w = local_membership(&a, &seg, &p).unwrap().unwrap();
        assert_eq!((w.window.from, w.window.to), (GridPosition::new(0, 0), GridPosition::new(2, 0)));
        assert_eq!(w.t, vec![1]);
        // budget floor(2 ln 10 + 2) = 6; elements 4 of left and 4 of right need 10.
        let a = SubsetMask::from_elements(10, [4, 9]).unwrap();
        assert_eq!(local_membership(&a, &seg, &p).unwrap(), None);
        let outside = SubsetMask::from_elements(12, [11]).unwrap();
        assert!(local_membership(&outside, &seg, &p).is_err());
    }

    #[test]
    fn membership_agrees_with_enumeration() {
        for m in 1..=8 {
            for m0 in [1, 2, 4] {
                let p = tiny(m0);
                let n = 10;
                let seg = Segment::new(1, m);
                let sets = enumerate_local(&seg, n, &p).unwrap();
                let budget = p.budget(m);
                for mask in 0..(1u64 << n) {
                    let member = sets.binary_search(&mask).is_ok();
                    assert_eq!(local_member_mask(mask, &seg, budget), member, "m={m} mask={mask:b}");
                    if mask & !segment_mask(&seg) == 0 {
                        let sm = SubsetMask::from_u64(n, mask);
                        let w = local_membership(&sm, &seg, &p).unwrap();
                        assert_eq!(w.is_some(), member);
                        if let Some(w) = w {
                            assert_eq!(w.elements(), sm.elements());
                        }
                    }
                }
            }
        }
    }
}
