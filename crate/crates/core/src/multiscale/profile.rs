//! Constants profiles and the two arithmetic hypotheses the builder relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four free constants. `Gamma = C1 + K·C3` and `C2 = Gamma + 4` are
/// always derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ProfileFields", into = "ProfileFields")]
pub struct ConstantsProfile {
    k: u32,
    c1: u32,
    c3: u32,
    m0: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFields {
    #[serde(rename = "K")]
    k: u32,
    #[serde(rename = "C1")]
    c1: u32,
    #[serde(rename = "C3")]
    c3: u32,
    #[serde(rename = "M0")]
    m0: u32,
}

impl TryFrom<ProfileFields> for ConstantsProfile {
    type Error = Error;
    fn try_from(p: ProfileFields) -> Result<Self> {
        ConstantsProfile::new(p.k, p.c1, p.c3, p.m0)
    }
}

impl From<ConstantsProfile> for ProfileFields {
    fn from(p: ConstantsProfile) -> Self {
        ProfileFields {
            k: p.k,
            c1: p.c1,
            c3: p.c3,
            m0: p.m0,
        }
    }
}

impl ConstantsProfile {
    pub fn new(k: u32, c1: u32, c3: u32, m0: u32) -> Result<Self> {
        if k == 0 || c1 == 0 || c3 == 0 || m0 == 0 {
            return Err(Error::Input("profile constants must be positive".into()));
        }
        if k.checked_mul(c3).and_then(|x| x.checked_add(c1)).and_then(|g| g.checked_add(4)).is_none() {
            return Err(Error::Input("profile constants overflow".into()));
        }
        Ok(ConstantsProfile { k, c1, c3, m0 })
    }

    /// `K = 4, C1 = 28, C3 = 8, M0 = 700`.
    pub fn paper() -> Self {
        ConstantsProfile {
            k: 4,
            c1: 28,
            c3: 8,
            m0: 700,
        }
    }

    /// `K = 1, C1 = 1, C3 = 1, M0 = 2`, small enough to enumerate.
    pub fn toy() -> Self {
        ConstantsProfile {
            k: 1,
            c1: 1,
            c3: 1,
            m0: 2,
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn c1(&self) -> u32 {
        self.c1
    }

    pub fn c3(&self) -> u32 {
        self.c3
    }

    pub fn m0(&self) -> u32 {
        self.m0
    }

    pub fn gamma(&self) -> u32 {
        self.c1 + self.k * self.c3
    }

    pub fn c2(&self) -> u32 {
        self.gamma() + 4
    }

    /// Largest admissible window size `floor(Gamma·ln m + M0)` on a segment of length `m`.
    pub fn budget(&self, m: usize) -> usize {
        if m <= 1 {
            return self.m0 as usize;
        }
        (self.gamma() as f64 * (m as f64).ln() + self.m0 as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisRow {
    pub m: usize,
    /// `m - C3 - K·C3·(3/2)·ln m`, compared against `M0/2`.
    pub descent_lhs: f64,
    pub descent_margin: f64,
    pub descent_holds: bool,
    /// `m - m^(2/3)`, compared against `C1·ln m`.
    pub gap_lhs: f64,
    pub gap_rhs: f64,
    pub gap_margin: f64,
    pub gap_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub rows: Vec<HypothesisRow>,
    pub descent_all: bool,
    pub gap_all: bool,
}

pub fn hypothesis_row(profile: &ConstantsProfile, m: usize) -> HypothesisRow {
    let mf = m as f64;
    let ln = if m == 0 { f64::NEG_INFINITY } else { mf.ln() };
    let (k, c1, c3, m0) = (profile.k as f64, profile.c1 as f64, profile.c3 as f64, profile.m0 as f64);
    let descent_lhs = mf - c3 - k * c3 * 1.5 * ln;
    let gap_lhs = mf - mf.powf(2.0 / 3.0);
    let gap_rhs = c1 * ln;
    HypothesisRow {
        m,
        descent_lhs,
        descent_margin: descent_lhs - m0 / 2.0,
        descent_holds: descent_lhs >= m0 / 2.0,
        gap_lhs,
        gap_rhs,
        gap_margin: gap_lhs - gap_rhs,
        gap_holds: gap_lhs >= gap_rhs,
    }
}

/// Evaluates both hypotheses at every `m` in `range`.
pub fn check_hypotheses(profile: &ConstantsProfile, range: std::ops::RangeInclusive<usize>) -> HypothesisReport {
    let rows: Vec<HypothesisRow> = range.map(|m| hypothesis_row(profile, m)).collect();
    HypothesisReport {
        descent_all: rows.iter().all(|r| r.descent_holds),
        gap_all: rows.iter().all(|r| r.gap_holds),
        rows,
    }
}

/// Whether the descent hypothesis holds on `[M0, n]` and the gap hypothesis
/// on `[ceil(M0/2), n]`. Empty ranges count as holding.
pub fn hypotheses_hold_for(profile: &ConstantsProfile, n: usize) -> (bool, bool) {
    let m0 = profile.m0 as usize;
    let descent = (m0..=n).all(|m| hypothesis_row(profile, m).descent_holds);
    let gap = (m0.div_ceil(2).max(1)..=n).all(|m| hypothesis_row(profile, m).gap_holds);
    (descent, gap)
}
