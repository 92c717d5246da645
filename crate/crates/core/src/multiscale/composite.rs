//! Multi-scale decompositions: nested segments with one local pattern per
//! scale, the composite sets they produce, and their counts.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local::{enumerate_local, segment_mask, witness_for, LocalPattern};
use super::profile::ConstantsProfile;
use crate::error::{Error, Result};
use crate::ground::{GroundSize, SetSystem, SubsetMask};
use crate::steered::Segment;

/// Smallest `J` with `n^((2/3)^J) <= M0`.
pub fn j_max(n: usize, profile: &ConstantsProfile) -> usize {
    let target = (profile.m0() as f64).ln();
    let mut x = (n.max(1) as f64).ln();
    let mut j = 0;
    while x > target {
        x *= 2.0 / 3.0;
        j += 1;
    }
    j
}

/// `m_next <= m^(2/3)`, checked in integers as `m_next^3 <= m^2`.
pub fn shrinks(m: usize, m_next: usize) -> bool {
    (m_next as u128).pow(3) <= (m as u128).pow(2)
}

/// `(J_max + 1)·n^(6 + 3·C2)`.
pub fn composite_count_bound(n: usize, profile: &ConstantsProfile) -> BigUint {
    BigUint::from(j_max(n, profile) + 1) * BigUint::from(n).pow(6 + 3 * profile.c2())
}

/// Exponent of the absorbed bound `n^(3·C2 + 7)`.
pub fn composite_exponent(profile: &ConstantsProfile) -> u32 {
    3 * profile.c2() + 7
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub segments: Vec<Segment>,
    pub patterns: Vec<LocalPattern>,
}

impl Decomposition {
    pub fn depth(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    /// Checks every structural condition and returns the composite set.
    pub fn validate(&self, n: usize, profile: &ConstantsProfile) -> Result<SubsetMask> {
        let bad = |msg: String| Err(Error::Structure(msg));
        if self.segments.is_empty() || self.segments.len() != self.patterns.len() {
            return bad("segment and pattern counts differ or are zero".into());
        }
        if self.segments[0] != Segment::whole(n) {
            return bad("outermost segment is not the whole ground set".into());
        }
        if self.depth() > j_max(n, profile) {
            return bad(format!("depth {} exceeds J_max = {}", self.depth(), j_max(n, profile)));
        }
        let mut out = SubsetMask::empty(n);
        for (j, (seg, pat)) in self.segments.iter().zip(&self.patterns).enumerate() {
            seg.check(n)?;
            if pat.window.segment != *seg || !pat.window.fits(profile) {
                return bad(format!("pattern {j} has a mismatched or over-budget window"));
            }
            let elems = pat.elements();
            if let Some(next) = self.segments.get(j + 1) {
                if next.len == 0 || !seg.contains_segment(next) || !shrinks(seg.len, next.len) {
                    return bad(format!("segment {} does not nest properly in segment {j}", j + 1));
                }
                if elems.iter().any(|&x| next.contains(x)) {
                    return bad(format!("pattern {j} meets the next segment"));
                }
            }
            for x in elems {
                out.insert(x);
            }
        }
        Ok(out)
    }
}

/// Largest ground size accepted by [`composite_membership`].
pub const COMPOSITE_SEARCH_MAX_N: usize = 64;

/// Searches all nestings for a decomposition whose composite set is `a`.
pub fn composite_membership(a: &SubsetMask, profile: &ConstantsProfile) -> Result<Option<Decomposition>> {
    let n = a.n();
    if n > COMPOSITE_SEARCH_MAX_N {
        return Err(Error::capacity("ground size for composite search", n, COMPOSITE_SEARCH_MAX_N));
    }
    let mut segs = Vec::new();
    let mut pats = Vec::new();
    if search(a, Segment::whole(n), j_max(n, profile), profile, &mut segs, &mut pats) {
        Ok(Some(Decomposition {
            segments: segs,
            patterns: pats,
        }))
    } else {
        Ok(None)
    }
}

fn search(
    a: &SubsetMask,
    seg: Segment,
    depth_left: usize,
    profile: &ConstantsProfile,
    segs: &mut Vec<Segment>,
    pats: &mut Vec<LocalPattern>,
) -> bool {
    segs.push(seg);
    if let Some(p) = witness_for(&seg, |x| seg.contains(x) && a.contains(x), profile) {
        pats.push(p);
        return true;
    }
    if depth_left > 0 {
        for sub in sub_segments(&seg) {
            let outer = witness_for(&seg, |x| seg.contains(x) && !sub.contains(x) && a.contains(x), profile);
            if let Some(p) = outer {
                pats.push(p);
                if search(a, sub, depth_left - 1, profile, segs, pats) {
                    return true;
                }
                pats.pop();
            }
        }
    }
    segs.pop();
    false
}

/// Non-empty contiguous sub-segments short enough to nest inside `seg`.
pub fn sub_segments(seg: &Segment) -> Vec<Segment> {
    let mut out = Vec::new();
    for len in 1..=seg.len {
        if !shrinks(seg.len, len) {
            break;
        }
        for start in seg.start..=seg.end() - len {
            out.push(Segment::new(start, len));
        }
    }
    out
}

/// All nestings `[n] = I_0 ⊇ I_1 ⊇ …` of depth at most `max_depth`.
pub fn nestings(n: usize, max_depth: usize) -> Vec<Vec<Segment>> {
    let mut out = Vec::new();
    let mut cur = vec![Segment::whole(n)];
    fn rec(cur: &mut Vec<Segment>, left: usize, out: &mut Vec<Vec<Segment>>) {
        out.push(cur.clone());
        if left == 0 {
            return;
        }
        let last = *cur.last().expect("non-empty");
        for sub in sub_segments(&last) {
            cur.push(sub);
            rec(cur, left - 1, out);
            cur.pop();
        }
    }
    rec(&mut cur, max_depth, &mut out);
    out
}

pub const COMPOSITE_ENUMERATION_MAX_N: usize = 20;
pub const DEFAULT_ENUMERATION_CAP: u64 = 50_000_000;

/// Analytic size estimate: the sum over nestings of the product of per-scale
/// pattern counts (prefix pair and gap subset choices).
pub fn composite_size_estimate(n: usize, profile: &ConstantsProfile, max_depth: Option<usize>) -> BigUint {
    let depth = max_depth.unwrap_or(usize::MAX).min(j_max(n, profile));
    let mut cache: HashMap<usize, BigUint> = HashMap::new();
    nestings(n, depth)
        .iter()
        .map(|nest| {
            nest.iter().fold(BigUint::one(), |acc, s| {
                let c = cache
                    .entry(s.len)
                    .or_insert_with(|| super::local::local_pattern_count(&Segment::new(0, s.len), profile));
                acc * &*c
            })
        })
        .sum()
}

/// Materializes the composite system for tiny profiles. The cap bounds the
/// number of pattern combinations visited, which is the sum over nestings of
/// the product of distinct admissible local sets per scale.
pub fn enumerate_composites(n: GroundSize, profile: &ConstantsProfile, cap: u64, max_depth: Option<usize>) -> Result<SetSystem> {
    let nn = n.get();
    if nn > COMPOSITE_ENUMERATION_MAX_N {
        return Err(Error::capacity(
            "composite size estimate",
            composite_size_estimate(nn, profile, max_depth),
            format!("{cap} (and n <= {COMPOSITE_ENUMERATION_MAX_N})"),
        ));
    }
    let depth = max_depth.unwrap_or(usize::MAX).min(j_max(nn, profile));
    let nests = nestings(nn, depth);
    let mut local: HashMap<Segment, Vec<u64>> = HashMap::new();
    for nest in &nests {
        for s in nest {
            if !local.contains_key(s) {
                local.insert(*s, enumerate_local(s, nn, profile)?);
            }
        }
    }
    let options = |nest: &[Segment], j: usize| -> Vec<u64> {
        let forbidden = nest.get(j + 1).map_or(0, segment_mask);
        local[&nest[j]].iter().copied().filter(|m| m & forbidden == 0).collect()
    };
    let work: BigUint = nests
        .iter()
        .map(|nest| (0..nest.len()).fold(BigUint::one(), |acc, j| acc * BigUint::from(options(nest, j).len())))
        .sum();
    if work > BigUint::from(cap) {
        return Err(Error::capacity("composite enumeration work", work, cap));
    }
    let mut masks: Vec<u64> = nests
        .par_iter()
        .flat_map_iter(|nest| {
            let mut acc = vec![0u64];
            for j in 0..nest.len() {
                let opts = options(nest, j);
                acc = acc.iter().flat_map(|&x| opts.iter().map(move |&o| x | o)).collect();
                acc.sort_unstable();
                acc.dedup();
            }
            acc
        })
        .collect();
    masks.par_sort_unstable();
    masks.dedup();
    SetSystem::new(n, masks.into_iter().map(|m| SubsetMask::from_u64(nn, m)).collect())
}

/// Composite membership on a mask, for cross-checks against enumeration.
pub fn composite_member_mask(mask: u64, n: usize, profile: &ConstantsProfile) -> Result<bool> {
    Ok(composite_membership(&SubsetMask::from_u64(n, mask), profile)?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiscale::local::enumerate_local;

    #[test]
    fn j_max_values() {
        let p = ConstantsProfile::paper();
        assert_eq!(j_max(1_000_000, &p), 2);
        assert_eq!(j_max(700, &p), 0);
        assert_eq!(j_max(10, &p), 0);
        assert_eq!(j_max(16_384, &p), 1);
        assert_eq!(j_max(12, &ConstantsProfile::toy()), 4);
    }

    #[test]
    fn count_bound_exponent() {
        let p = ConstantsProfile::paper();
        assert_eq!(composite_exponent(&p), 199);
        assert_eq!(composite_count_bound(10, &p), BigUint::from(10u32).pow(198));
    }

    #[test]
    fn depth_zero_is_the_local_system() {
        let p = ConstantsProfile::toy();
        for n in [2usize, 4, 6, 8] {
            let g = GroundSize::new(n).unwrap();
            let s = enumerate_composites(g, &p, DEFAULT_ENUMERATION_CAP, Some(0)).unwrap();
            let local = enumerate_local(&Segment::whole(n), n, &p).unwrap();
            assert_eq!(s.masks().unwrap(), local);
        }
    }

    #[test]
    fn enumeration_matches_power_set_filter() {
        let p = ConstantsProfile::toy();
        for n in [2usize, 4, 6, 8, 10] {
            let s = enumerate_composites(GroundSize::new(n).unwrap(), &p, DEFAULT_ENUMERATION_CAP, None).unwrap();
            let filtered: Vec<u64> = (0..1u64 << n).filter(|&m| composite_member_mask(m, n, &p).unwrap()).collect();
            assert_eq!(s.masks().unwrap(), filtered, "n={n}");
        }
    }

    #[test]
    fn found_decompositions_validate() {
        let p = ConstantsProfile::toy();
        let n = 8;
        for mask in 0..1u64 << n {
            let a = SubsetMask::from_u64(n, mask);
            if let Some(d) = composite_membership(&a, &p).unwrap() {
                assert_eq!(d.validate(n, &p).unwrap(), a);
            }
        }
    }
}

#[cfg(test)]
mod cap_tests {
    use super::*;

    #[test]
    fn over_cap_reports_estimate() {
        let err = enumerate_composites(GroundSize::new(8).unwrap(), &ConstantsProfile::toy(), 10, None).unwrap_err();
        assert!(err.is_capacity());
        let err = enumerate_composites(GroundSize::new(40).unwrap(), &ConstantsProfile::toy(), 10, None).unwrap_err();
        assert!(err.is_capacity());
    }
}
