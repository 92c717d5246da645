//! Independent checks of a builder trace: prefix imbalances, maximality, and
//! a decomposition witness for every chain level.

use std::fmt;

use serde::Serialize;

use super::builder::{BuilderTrace, LevelWitness};
use super::composite::{composite_membership, j_max, shrinks, Decomposition};
use super::local::{LocalPattern, Window};
use super::profile::ConstantsProfile;
use crate::error::Result;
use crate::ground::{BalancedColoring, SubsetMask};
use crate::steered::Segment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { level: Option<usize>, reason: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    fn fail(level: impl Into<Option<usize>>, reason: impl Into<String>) -> Self {
        Verdict::Fail {
            level: level.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Fail { level: Some(l), reason } => write!(f, "FAIL at level {l}: {reason}"),
            Verdict::Fail { level: None, reason } => write!(f, "FAIL: {reason}"),
        }
    }
}

struct Fenwick(Vec<u32>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of marked indices below `i`.
    fn prefix(&self, mut i: usize) -> u32 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i &= i - 1;
        }
        s
    }

    fn range(&self, lo: usize, hi: usize) -> u32 {
        if hi <= lo {
            0
        } else {
            self.prefix(hi) - self.prefix(lo)
        }
    }
}

fn basic_checks(trace: &BuilderTrace, f: &BalancedColoring) -> std::result::Result<(), Verdict> {
    let n = f.n();
    if trace.n != n {
        return Err(Verdict::fail(None, format!("trace is for n = {}, coloring has n = {n}", trace.n)));
    }
    let mut seen = vec![false; n];
    for (i, &x) in trace.chain.iter().enumerate() {
        if x >= n || seen[x] {
            return Err(Verdict::fail(i + 1, format!("element {x} is out of range or repeated")));
        }
        seen[x] = true;
    }
    let mut h = 0i64;
    for (i, &x) in trace.chain.iter().enumerate() {
        h += f.value(x) as i64;
        if h.abs() > 1 {
            return Err(Verdict::fail(i + 1, format!("prefix imbalance {h}")));
        }
    }
    if trace.chain.len() != n {
        return Err(Verdict::fail(trace.chain.len(), format!("chain stops at level {} of {n}: not maximal", trace.chain.len())));
    }
    Ok(())
}

/// Structural conditions on one witness, independent of the chain.
fn check_witness_shape(w: &LevelWitness, n: usize, profile: &ConstantsProfile) -> std::result::Result<(), String> {
    let wins = &w.windows;
    if wins.is_empty() {
        return Err("witness has no windows".into());
    }
    if wins[0].segment != Segment::whole(n) {
        return Err("outermost segment is not the ground set".into());
    }
    if wins.len() - 1 > j_max(n, profile) {
        return Err(format!("depth {} exceeds J_max = {}", wins.len() - 1, j_max(n, profile)));
    }
    for (i, win) in wins.iter().enumerate() {
        if win.segment.check(n).is_err() {
            return Err(format!("segment {i} is malformed"));
        }
        if !win.fits(profile) {
            return Err(format!(
                "window {i} of size {} is malformed or exceeds budget {}",
                win.gap_size(),
                profile.budget(win.segment.len)
            ));
        }
        if let Some(next) = wins.get(i + 1) {
            let (outer, inner) = (win.segment, next.segment);
            if inner.len == 0 || !outer.contains_segment(&inner) {
                return Err(format!("segment {} does not nest in segment {i}", i + 1));
            }
            if !shrinks(outer.len, inner.len) {
                return Err(format!("segment {} of length {} is longer than {}^(2/3)", i + 1, inner.len, outer.len));
            }
            let meets = win
                .ceiling_ranges()
                .iter()
                .any(|&(lo, hi)| lo < hi && lo < inner.end() && inner.start < hi);
            if meets {
                return Err(format!("pattern {i} may meet segment {}", i + 1));
            }
        }
    }
    Ok(())
}

/// Fast verification: every chain level is checked against its witness with a
/// Fenwick tree over chain membership, so the cost is `O((n + W·J) log n)`.
pub fn verify_trace(trace: &BuilderTrace, f: &BalancedColoring, profile: &ConstantsProfile) -> Verdict {
    if let Err(v) = basic_checks(trace, f) {
        return v;
    }
    let n = f.n();
    let mut covered = 0usize;
    for (i, w) in trace.witnesses.iter().enumerate() {
        if w.first > covered || w.last < w.first || w.last > n {
            return Verdict::fail(w.first, format!("witness {i} leaves levels uncovered or is out of range"));
        }
        if let Err(e) = check_witness_shape(w, n, profile) {
            return Verdict::fail(w.first, format!("witness {i}: {e}"));
        }
        covered = covered.max(w.last + 1);
    }
    if covered != n + 1 {
        return Verdict::fail(covered, "witnesses do not cover every level");
    }
    for (j, s) in trace.scales.iter().enumerate().skip(1) {
        if s.h_start.abs() > 1 || 2 * s.pool < profile.m0() as usize {
            return Verdict::fail(s.first_level, format!("scale {j} starts with |H| = {} and pool {}", s.h_start.abs(), s.pool));
        }
    }

    let mut floor_at: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut ceil_at: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (i, w) in trace.witnesses.iter().enumerate() {
        floor_at[w.first].push(i);
        ceil_at[w.last].push(i);
    }
    let mut fw = Fenwick::new(n);
    for level in 0..=n {
        if level > 0 {
            fw.add(trace.chain[level - 1]);
        }
        for &i in &floor_at[level] {
            for win in &trace.witnesses[i].windows {
                for (lo, hi) in win.floor_ranges() {
                    if fw.range(lo, hi) as usize != hi.saturating_sub(lo) {
                        return Verdict::fail(level, format!("chain set misses part of the prefix pair of witness {i}"));
                    }
                }
            }
        }
        for &i in &ceil_at[level] {
            let inside: usize = trace.witnesses[i]
                .windows
                .iter()
                .flat_map(|w| w.ceiling_ranges())
                .map(|(lo, hi)| fw.range(lo, hi) as usize)
                .sum();
            if inside != level {
                return Verdict::fail(level, format!("chain set has elements outside the windows of witness {i}"));
            }
        }
    }
    Verdict::Pass
}

/// The decomposition a witness assigns to a concrete chain set.
pub fn witness_decomposition(w: &LevelWitness, set: &SubsetMask, profile: &ConstantsProfile) -> Result<Decomposition> {
    let mut patterns = Vec::with_capacity(w.windows.len());
    for win in &w.windows {
        let t = win.segment.gap_elements(win.from, win.to).filter(|&x| set.contains(x)).collect();
        patterns.push(LocalPattern::new(*win, t, profile)?);
    }
    Ok(Decomposition {
        segments: w.windows.iter().map(|w: &Window| w.segment).collect(),
        patterns,
    })
}

/// Slow verification for small `n`: each chain set is rebuilt from its
/// witness and validated in full, and membership is re-decided by search.
pub fn verify_trace_exhaustive(trace: &BuilderTrace, f: &BalancedColoring, profile: &ConstantsProfile) -> Result<Verdict> {
    if let Err(v) = basic_checks(trace, f) {
        return Ok(v);
    }
    let n = f.n();
    let mut set = SubsetMask::empty(n);
    for level in 0..=n {
        if level > 0 {
            set.insert(trace.chain[level - 1]);
        }
        let Some(w) = trace.witnesses.iter().find(|w| w.first <= level && level <= w.last) else {
            return Ok(Verdict::fail(level, "no witness covers this level"));
        };
        match witness_decomposition(w, &set, profile).and_then(|d| d.validate(n, profile)) {
            Ok(c) if c == set => {}
            Ok(_) => return Ok(Verdict::fail(level, "witness does not reproduce the chain set")),
            Err(e) => return Ok(Verdict::fail(level, format!("witness invalid: {e}"))),
        }
        if composite_membership(&set, profile)?.is_none() {
            return Ok(Verdict::fail(level, "chain set is not a composite set"));
        }
    }
    Ok(Verdict::Pass)
}
