//! The two-half grid on a segment and the steered path that walks it.
//!
//! A segment `I` of length `m` splits into a left half of `ceil(m/2)` elements
//! and a right half of `floor(m/2)` elements. A grid position `(a, b)` stands for
//! the first `a` elements of the left half together with the first `b` of the
//! right half. The steered path repeatedly extends whichever half brings the
//! running imbalance `H` closer to zero, flipping a coin on ties.

use std::collections::VecDeque;
use std::fmt::Write as _;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::BalancedColoring;

/// A contiguous run `start..start+len` of the ground set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub split: usize,
}

impl Segment {
    pub fn new(start: usize, len: usize) -> Self {
        Segment {
            start,
            len,
            split: start + len.div_ceil(2),
        }
    }

    pub fn whole(n: usize) -> Self {
        Segment::new(0, n)
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn left_len(&self) -> usize {
        self.split - self.start
    }

    pub fn right_len(&self) -> usize {
        self.end() - self.split
    }

    pub fn left(&self, i: usize) -> usize {
        self.start + i
    }

    pub fn right(&self, i: usize) -> usize {
        self.split + i
    }

    pub fn contains(&self, x: usize) -> bool {
        self.start <= x && x < self.end()
    }

    pub fn contains_segment(&self, other: &Segment) -> bool {
        other.len == 0 || (self.start <= other.start && other.end() <= self.end())
    }

    /// Validates the split point and that the segment fits in `[0, n)`.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.split != self.start + self.len.div_ceil(2) || self.end() > n {
            return Err(Error::Input(format!("invalid segment {self:?} for n = {n}")));
        }
        Ok(())
    }

    pub fn grid_elements(&self, pos: GridPosition) -> impl Iterator<Item = usize> + '_ {
        (0..pos.a).map(|i| self.left(i)).chain((0..pos.b).map(|i| self.right(i)))
    }

    /// Elements strictly between two grid points: left positions `a..a'` and right `b..b'`.
    pub fn gap_elements(&self, from: GridPosition, to: GridPosition) -> impl Iterator<Item = usize> + '_ {
        (from.a..to.a).map(|i| self.left(i)).chain((from.b..to.b).map(|i| self.right(i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GridPosition {
    pub a: usize,
    pub b: usize,
}

impl GridPosition {
    pub fn new(a: usize, b: usize) -> Self {
        GridPosition { a, b }
    }

    pub fn level(&self) -> usize {
        self.a + self.b
    }

    pub fn within(&self, seg: &Segment) -> bool {
        self.a <= seg.left_len() && self.b <= seg.right_len()
    }

    pub fn le(&self, other: &GridPosition) -> bool {
        self.a <= other.a && self.b <= other.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    L,
    R,
}

/// Source of fair tie-breaking coins; `true` extends the left half.
pub trait CoinSource {
    fn flip(&mut self) -> bool;
}

impl<R: Rng> CoinSource for R {
    fn flip(&mut self) -> bool {
        self.random::<bool>()
    }
}

/// A fixed coin sequence, for reproducing hand-built examples.
#[derive(Debug, Clone, Default)]
pub struct ScriptedCoins(pub VecDeque<bool>);

impl ScriptedCoins {
    pub fn new(flips: impl IntoIterator<Item = bool>) -> Self {
        ScriptedCoins(flips.into_iter().collect())
    }
}

impl CoinSource for ScriptedCoins {
    fn flip(&mut self) -> bool {
        self.0.pop_front().expect("scripted coin sequence exhausted")
    }
}

/// One step of the steered path, describing the state after the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub block: Block,
    pub element: usize,
    pub fvalue: i8,
    pub h: i64,
    pub d: i64,
    pub coin: bool,
}

/// Full history of one steered-path run. Index `t` refers to the state after
/// `t` steps; `t = 0` is the starting state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteeredTrace {
    pub segment: Segment,
    pub start: GridPosition,
    pub h0: i64,
    pub steps: Vec<StepRecord>,
    pub balanced_visits: Vec<usize>,
    pub exhaustion_step: Option<usize>,
}

impl SteeredTrace {
    pub fn h(&self, t: usize) -> i64 {
        if t == 0 {
            self.h0
        } else {
            self.steps[t - 1].h
        }
    }

    pub fn d(&self, t: usize) -> i64 {
        if t == 0 {
            self.start.a as i64 - self.start.b as i64
        } else {
            self.steps[t - 1].d
        }
    }

    /// Grid position after `t` steps.
    pub fn position(&self, t: usize) -> GridPosition {
        let mut pos = self.start;
        for s in &self.steps[..t] {
            match s.block {
                Block::L => pos.a += 1,
                Block::R => pos.b += 1,
            }
        }
        pos
    }

    /// Positions after every step, `positions()[t]` for `t = 0..=len`.
    pub fn positions(&self) -> Vec<GridPosition> {
        let mut pos = self.start;
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(pos);
        for s in &self.steps {
            match s.block {
                Block::L => pos.a += 1,
                Block::R => pos.b += 1,
            }
            out.push(pos);
        }
        out
    }

    /// Pool size before step `t + 1`, assuming every element outside the
    /// segment's unconsumed part is already in the chain.
    pub fn pool_before(&self, t: usize) -> usize {
        self.segment.len - self.start.level() - t
    }

    pub fn max_abs_h(&self) -> i64 {
        std::iter::once(self.h0.abs())
            .chain(self.steps.iter().map(|s| s.h.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Maximum `|H|` over the states reached while both halves were active.
    pub fn max_abs_h_active(&self) -> i64 {
        let end = self.exhaustion_step.unwrap_or(self.steps.len());
        (0..=end).map(|t| self.h(t).abs()).max().unwrap_or(0)
    }

    pub fn max_abs_d(&self) -> i64 {
        std::iter::once(self.d(0).abs())
            .chain(self.steps.iter().map(|s| s.d.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Rows `t,block,fvalue,H,D,coin` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,block,fvalue,H,D,coin\n");
        for (i, s) in self.steps.iter().enumerate() {
            let block = match s.block {
                Block::L => "L",
                Block::R => "R",
            };
            writeln!(out, "{},{},{},{},{},{}", i + 1, block, s.fvalue, s.h, s.d, s.coin as u8)
                .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Advances the steered path by one step.
pub fn steer_step<C: CoinSource + ?Sized>(
    pos: GridPosition,
    h: i64,
    seg: &Segment,
    f: &BalancedColoring,
    coins: &mut C,
) -> Result<(GridPosition, i64, StepRecord)> {
    let left_active = pos.a < seg.left_len();
    let right_active = pos.b < seg.right_len();
    let (block, coin) = match (left_active, right_active) {
        (false, false) => return Err(Error::State("both halves of the segment are exhausted".into())),
        (true, false) => (Block::L, false),
        (false, true) => (Block::R, false),
        (true, true) => {
            let hl = (h + f.value(seg.left(pos.a)) as i64).abs();
            let hr = (h + f.value(seg.right(pos.b)) as i64).abs();
            if hl < hr {
                (Block::L, false)
            } else if hr < hl {
                (Block::R, false)
            } else if coins.flip() {
                (Block::L, true)
            } else {
                (Block::R, true)
            }
        }
    };
    let (next, element) = match block {
        Block::L => (GridPosition::new(pos.a + 1, pos.b), seg.left(pos.a)),
        Block::R => (GridPosition::new(pos.a, pos.b + 1), seg.right(pos.b)),
    };
    let fvalue = f.value(element);
    let h_next = h + fvalue as i64;
    let record = StepRecord {
        block,
        element,
        fvalue,
        h: h_next,
        d: next.a as i64 - next.b as i64,
        coin,
    };
    Ok((next, h_next, record))
}

/// Stopping rule for [`run_until`], consulted after every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Run until both halves are exhausted.
    Complete,
    /// Stop at the first step where one half is exhausted.
    Exhaustion,
    /// Stop at the first step with `|H| <= 1`, or at exhaustion.
    Balanced,
}

/// Runs the steered path from `start` with initial imbalance `h0`.
pub fn run_until<C: CoinSource + ?Sized>(
    seg: &Segment,
    start: GridPosition,
    h0: i64,
    f: &BalancedColoring,
    coins: &mut C,
    stop: StopRule,
) -> Result<SteeredTrace> {
    seg.check(f.n())?;
    if !start.within(seg) {
        return Err(Error::Input(format!("start {start:?} lies outside segment {seg:?}")));
    }
    let mut trace = SteeredTrace {
        segment: *seg,
        start,
        h0,
        steps: Vec::with_capacity(seg.len - start.level()),
        balanced_visits: Vec::new(),
        exhaustion_step: None,
    };
    if h0.abs() <= 1 {
        trace.balanced_visits.push(0);
    }
    let exhausted = |p: GridPosition| p.a == seg.left_len() || p.b == seg.right_len();
    if exhausted(start) {
        trace.exhaustion_step = Some(0);
    }
    let mut pos = start;
    let mut h = h0;
    while pos.level() < seg.len {
        if stop == StopRule::Exhaustion && trace.exhaustion_step.is_some() {
            break;
        }
        if stop == StopRule::Balanced && (h.abs() <= 1 || trace.exhaustion_step.is_some()) {
            break;
        }
        let (next, h_next, rec) = steer_step(pos, h, seg, f, coins)?;
        pos = next;
        h = h_next;
        trace.steps.push(rec);
        let t = trace.steps.len();
        if h.abs() <= 1 {
            trace.balanced_visits.push(t);
        }
        if trace.exhaustion_step.is_none() && exhausted(pos) {
            trace.exhaustion_step = Some(t);
        }
    }
    Ok(trace)
}

/// Runs the steered path across the whole segment, recording when the first
/// half runs out.
pub fn run_segment<C: CoinSource + ?Sized>(
    seg: &Segment,
    start: GridPosition,
    h0: i64,
    f: &BalancedColoring,
    coins: &mut C,
) -> Result<SteeredTrace> {
    run_until(seg, start, h0, f, coins, StopRule::Complete)
}

/// The unconsumed part of the other half at the moment one half ran out.
pub fn residual_of(seg: &Segment, trace: &SteeredTrace) -> Result<Segment> {
    let t = trace
        .exhaustion_step
        .ok_or_else(|| Error::State("trace has no exhaustion step".into()))?;
    let pos = trace.position(t);
    if pos.a == seg.left_len() {
        Ok(Segment::new(seg.right(pos.b), seg.right_len() - pos.b))
    } else {
        Ok(Segment::new(seg.left(pos.a), seg.left_len() - pos.a))
    }
}

/// Probability that both candidate next elements carry the sign of `H`, for a
/// pool of `r` elements summing to `-sgn(H)·h`.
pub fn forced_probability(r: u64, h: u64) -> Result<Ratio<u64>> {
    if h < 1 || r < h || r < 2 || !(r - h).is_multiple_of(2) {
        return Err(Error::Domain(format!("forced_probability undefined for R = {r}, h = {h}")));
    }
    let p = (r - h) / 2;
    if p <= 1 {
        return Ok(Ratio::from_integer(0));
    }
    Ok(Ratio::new(p * (p - 1), r * (r - 1)))
}
