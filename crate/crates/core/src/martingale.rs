//! Exact and Monte Carlo checks for the birth-death comparison chain and for
//! the height, excursion, descent and deviation behavior of steered paths.

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{big_rational, big_rational_to_f64, ratio_to_f64};
use crate::steered::{forced_probability, SteeredTrace};

/// Up probability `p` of the birth-death chain on `{0, 1, 2, …}`; `q = 1 - p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BirthDeathParams {
    #[serde(serialize_with = "ser_ratio")]
    p: Ratio<u64>,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

impl Default for BirthDeathParams {
    fn default() -> Self {
        BirthDeathParams { p: Ratio::new(1, 4) }
    }
}

impl BirthDeathParams {
    pub fn new(p: Ratio<u64>) -> Result<Self> {
        if p.is_zero() || p >= Ratio::one() {
            return Err(Error::Domain(format!("up probability {p} not in (0, 1)")));
        }
        Ok(BirthDeathParams { p })
    }

    pub fn p(&self) -> Ratio<u64> {
        self.p
    }

    pub fn q(&self) -> Ratio<u64> {
        Ratio::one() - self.p
    }

    pub fn p_f64(&self) -> f64 {
        *self.p.numer() as f64 / *self.p.denom() as f64
    }

    pub fn q_f64(&self) -> f64 {
        1.0 - self.p_f64()
    }

    fn drifts_down(&self) -> bool {
        self.p < Ratio::new(1, 2)
    }

    /// One transition from a positive state: `true` moves up.
    #[inline]
    fn step_up<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random_range(0..*self.p.denom()) < *self.p.numer()
    }
}

/// The rate constants of the `(1/4, 3/4)` chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    pub gamma: f64,
    pub rho: f64,
    pub m: f64,
    pub alpha: f64,
}

impl RateConstants {
    pub fn compute() -> Self {
        let sqrt3 = 3f64.sqrt();
        RateConstants {
            gamma: (2.0 / sqrt3).ln(),
            rho: sqrt3 / 2.0,
            m: sqrt3,
            alpha: 81.0 * sqrt3 / 256.0,
        }
    }

    /// Smallest integer `C` with `C·γ >= 4`.
    pub fn excursion_constant(&self) -> u32 {
        (4.0 / self.gamma).ceil() as u32
    }

    /// `M·exp(-γ·c3)`, the per-level descent factor for time constant `c3`.
    pub fn descent_factor(&self, c3: f64) -> f64 {
        self.m * (-self.gamma * c3).exp()
    }

    /// Bound on `Pr[descent from h0 takes more than c3·h0 steps]`.
    pub fn descent_bound(&self, h0: u32, c3: f64) -> f64 {
        self.descent_factor(c3).powi(h0 as i32) / self.m
    }

    /// Tail envelope `(3/2)·ρ^t` for a single excursion.
    pub fn survival_envelope(&self, t: u32) -> f64 {
        1.5 * self.rho.powi(t as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditReport {
    pub violations: u64,
    pub worst_margin: f64,
    pub samples: u64,
}

impl AuditReport {
    fn new() -> Self {
        AuditReport {
            violations: 0,
            worst_margin: f64::INFINITY,
            samples: 0,
        }
    }

    /// Records one sample with `margin = bound - observed`; negative margins violate.
    fn record(&mut self, margin: f64) {
        self.samples += 1;
        if margin < 0.0 {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
    }

    pub fn merge(&mut self, other: &AuditReport) {
        self.samples += other.samples;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
    }

    pub fn fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.violations as f64 / self.samples as f64
        }
    }
}

/// An audit whose violation fraction is compared against a tolerated rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdAudit {
    pub report: AuditReport,
    pub fraction: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ThresholdAudit {
    fn new(report: AuditReport, threshold: f64) -> Self {
        let fraction = report.fraction();
        ThresholdAudit {
            report,
            fraction,
            threshold,
            pass: fraction <= threshold,
        }
    }
}

/// Birth-death sampler with a per-sample step cap and an abort counter.
#[derive(Debug, Clone)]
pub struct FirstPassageSampler {
    params: BirthDeathParams,
    pub step_cap: u64,
    pub aborts: u64,
}

pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

impl FirstPassageSampler {
    pub fn new(params: BirthDeathParams) -> Result<Self> {
        if !params.drifts_down() {
            return Err(Error::Domain(format!(
                "up probability {} >= 1/2: first passage is not almost surely finite",
                params.p
            )));
        }
        Ok(FirstPassageSampler {
            params,
            step_cap: DEFAULT_STEP_CAP,
            aborts: 0,
        })
    }

    /// Steps to go from state `from` to state `to < from`; `None` if the cap is hit.
    pub fn hitting_time<R: Rng + ?Sized>(&mut self, from: u64, to: u64, rng: &mut R) -> Option<u64> {
        let mut state = from;
        let mut t = 0u64;
        while state > to {
            if t == self.step_cap {
                self.aborts += 1;
                return None;
            }
            if self.params.step_up(rng) {
                state += 1;
            } else {
                state -= 1;
            }
            t += 1;
        }
        Some(t)
    }

    /// First-passage time from 1 to 0.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<u64> {
        self.hitting_time(1, 0, rng)
    }
}

/// A single sample of the first-passage time from 1 to 0.
pub fn bd_sample_first_passage<R: Rng + ?Sized>(params: BirthDeathParams, rng: &mut R) -> Result<Option<u64>> {
    Ok(FirstPassageSampler::new(params)?.sample(rng))
}

/// Numerators of `Pr[τ_0 = t]` over the common denominator `den^t`, where
/// `p = pn/den`, `q = qn/den`. Index `t` runs over `0..=t_max`.
fn weight_parts(params: BirthDeathParams) -> (BigUint, BigUint, BigUint) {
    let p = params.p();
    let q = params.q();
    debug_assert_eq!(p.denom(), q.denom());
    (BigUint::from(*p.numer()), BigUint::from(*q.numer()), BigUint::from(*p.denom()))
}

/// First-passage numerators by depth-first enumeration of every path from 1
/// that stays positive until it first reaches 0.
pub fn first_passage_numerators_by_enumeration(params: BirthDeathParams, t_max: usize) -> Vec<BigUint> {
    let (pn, qn, _) = weight_parts(params);
    let pn = pn.to_u64().expect("small numerator");
    let qn = qn.to_u64().expect("small numerator");
    let mut out = vec![BigUint::zero(); t_max + 1];
    // Explicit stack of (state, length, ups).
    let mut stack = vec![(1u64, 0usize, 0u32)];
    while let Some((state, len, ups)) = stack.pop() {
        if state == 0 {
            let downs = len as u32 - ups;
            out[len] += BigUint::from(pn).pow(ups) * BigUint::from(qn).pow(downs);
            continue;
        }
        // Reaching 0 needs `state` more down-steps.
        if len + state as usize > t_max {
            continue;
        }
        stack.push((state - 1, len + 1, ups));
        stack.push((state + 1, len + 1, ups + 1));
    }
    out
}

/// First-passage numerators from the decomposition "one step down, or one step
/// up followed by two independent first passages".
pub fn first_passage_numerators_by_convolution(params: BirthDeathParams, t_max: usize) -> Vec<BigUint> {
    let (pn, qn, _) = weight_parts(params);
    let mut num = vec![BigUint::zero(); t_max + 1];
    if t_max >= 1 {
        num[1] = qn;
    }
    for t in (3..=t_max).step_by(2) {
        // t = 1 + t1 + t2 with t1, t2 odd.
        let rest = t - 1;
        let mut acc = BigUint::zero();
        let mut t1 = 1;
        while 2 * t1 < rest {
            acc += &num[t1] * &num[rest - t1];
            t1 += 2;
        }
        acc <<= 1u32;
        if rest % 2 == 0 && (rest / 2) % 2 == 1 {
            acc += &num[rest / 2] * &num[rest / 2];
        }
        num[t] = acc * &pn;
    }
    num
}

pub const PMF_ENUMERATION_LIMIT: usize = 21;
pub const PMF_T_MAX_CAP: usize = 20_001;

#[derive(Debug, Clone, PartialEq)]
pub struct PmfEntry {
    pub t: usize,
    pub prob: BigRational,
}

/// Exact `Pr[τ_0 = t]` for every odd `t <= t_max`.
pub fn bd_first_passage_pmf(params: BirthDeathParams, t_max: usize) -> Result<Vec<PmfEntry>> {
    if t_max > PMF_T_MAX_CAP {
        return Err(Error::capacity("pmf t_max", t_max, PMF_T_MAX_CAP));
    }
    let small = t_max.min(PMF_ENUMERATION_LIMIT);
    let enumerated = first_passage_numerators_by_enumeration(params, small);
    let convolved = first_passage_numerators_by_convolution(params, t_max);
    if enumerated[..] != convolved[..=small] {
        return Err(Error::State("path enumeration and convolution disagree".into()));
    }
    let (_, _, den) = weight_parts(params);
    Ok((1..=t_max)
        .step_by(2)
        .map(|t| {
            let num = if t <= small { enumerated[t].clone() } else { convolved[t].clone() };
            PmfEntry {
                t,
                prob: big_rational(num, den.pow(t as u32)),
            }
        })
        .collect())
}

/// CSV rows `t,num,den,float`.
pub fn pmf_to_csv(pmf: &[PmfEntry]) -> String {
    let mut out = String::from("t,num,den,float\n");
    for e in pmf {
        out.push_str(&format!(
            "{},{},{},{:.17e}\n",
            e.t,
            e.prob.numer(),
            e.prob.denom(),
            big_rational_to_f64(&e.prob)
        ));
    }
    out
}

/// `Σ s^t·Pr[τ_0 = t]` over the entries of `pmf`.
pub fn pgf_series(pmf: &[PmfEntry], s: f64) -> f64 {
    pmf.iter()
        .map(|e| s.powi(e.t as i32) * big_rational_to_f64(&e.prob))
        .sum()
}

/// `G(s) = (1 - sqrt(1 - 4pq s²)) / (2ps)`.
pub fn pgf_closed_form(s: f64, params: BirthDeathParams) -> Result<f64> {
    let (p, q) = (params.p_f64(), params.q_f64());
    let disc = 1.0 - 4.0 * p * q * s * s;
    if disc < -1e-12 {
        return Err(Error::Domain(format!("s = {s} is outside the radius of convergence")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - disc.max(0.0).sqrt()) / (2.0 * p * s))
}

/// Partial sum of `E[e^{γτ_0}]` over odd `t <= 2k_max - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MgfPartialSum {
    pub k_max: u64,
    /// `Σ_{k < k_max} C_k·x^k` with `x = pq·e^{2γ} = 4pq/3`, exactly.
    pub series: BigRational,
    pub value: f64,
}

/// Partial sum of the moment generating function of `τ_0` at `γ = ln(2/√3)`.
/// `Pr[τ_0 = 2k+1] = C_k p^k q^{k+1}` with Catalan `C_k`, and `e^{2γ} = 4/3`, so
/// every term is rational apart from one common factor `q·e^γ`.
pub fn mgf_at_gamma(params: BirthDeathParams, k_max: u64) -> Result<MgfPartialSum> {
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let x = params.p() * params.q() * Ratio::new(4, 3);
    let (xn, xd) = (BigUint::from(*x.numer()), BigUint::from(*x.denom()));
    let mut catalan = BigUint::one();
    let mut xpow = BigUint::one();
    let mut acc = BigUint::zero();
    for k in 0..k_max {
        acc = acc * &xd + &catalan * &xpow;
        catalan = catalan * BigUint::from(2 * (2 * k + 1)) / BigUint::from(k + 2);
        xpow *= &xn;
    }
    let den = xd.pow((k_max - 1) as u32);
    let factor = params.q_f64() * 2.0 / 3f64.sqrt();
    let value = factor * ratio_to_f64(&acc, &den);
    let series = big_rational(acc, den);
    Ok(MgfPartialSum { k_max, series, value })
}

/// A step audited by the supermartingale check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ForcedStep {
    /// Index of the state before the step.
    pub t: usize,
    pub pool: u64,
    pub height: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub p: Ratio<u64>,
}

/// The forced probability at every step taken from `|H| >= 1` with both halves active.
pub fn forced_steps(trace: &SteeredTrace) -> Result<Vec<ForcedStep>> {
    let seg = trace.segment;
    let positions = trace.positions();
    let mut out = Vec::new();
    for (t, &pos) in positions.iter().enumerate().take(trace.steps.len()) {
        let height = trace.h(t).unsigned_abs();
        if height == 0 || pos.a >= seg.left_len() || pos.b >= seg.right_len() {
            continue;
        }
        let pool = trace.pool_before(t) as u64;
        out.push(ForcedStep {
            t,
            pool,
            height,
            p: forced_probability(pool, height)?,
        });
    }
    Ok(out)
}

/// Audits `8p + 1 <= 3` for each forced probability; the margin is `3 - (8p + 1)`.
pub fn audit_forced_factors<I: IntoIterator<Item = Ratio<u64>>>(ps: I) -> AuditReport {
    let mut report = AuditReport::new();
    for p in ps {
        let factor = p * 8 + Ratio::one();
        let margin = 3.0 - *factor.numer() as f64 / *factor.denom() as f64;
        report.samples += 1;
        if factor > Ratio::from_integer(3) {
            report.violations += 1;
        }
        report.worst_margin = report.worst_margin.min(margin);
    }
    report
}

/// Result of evaluating the forced probability over every valid `(R, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ForcedSweep {
    pub r_max: u64,
    pub pairs: u64,
    pub at_least_quarter: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub max_p: Ratio<u64>,
}

/// Every `(R, h)` with `2 <= R <= r_max`, `1 <= h <= R`, `R - h` even.
pub fn forced_probability_sweep(r_max: u64) -> ForcedSweep {
    let mut out = ForcedSweep {
        r_max,
        pairs: 0,
        at_least_quarter: 0,
        max_p: Ratio::from_integer(0),
    };
    for r in 2..=r_max {
        let mut h = if r % 2 == 0 { 2 } else { 1 };
        while h <= r {
            let p = forced_probability(r, h).expect("valid pair");
            out.pairs += 1;
            if p >= Ratio::new(1, 4) {
                out.at_least_quarter += 1;
            }
            if p > out.max_p {
                out.max_p = p;
            }
            h += 2;
        }
    }
    out
}

/// Checks that `3^|H|` can only shrink in expectation at every audited step.
pub fn supermartingale_audit(trace: &SteeredTrace) -> Result<AuditReport> {
    Ok(audit_forced_factors(forced_steps(trace)?.into_iter().map(|s| s.p)))
}

/// Lengths of the excursions out of `{|H| <= 1}`, measured between
/// consecutive balanced visits that are more than one step apart.
pub fn excursion_stats(trace: &SteeredTrace) -> Vec<usize> {
    trace
        .balanced_visits
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 1)
        .collect()
}

/// Longest stretch between consecutive balanced visits, counting the open
/// stretch after the last visit up to `end` steps.
pub fn max_gap(trace: &SteeredTrace, end: usize) -> usize {
    let visits: Vec<usize> = trace.balanced_visits.iter().copied().filter(|&v| v <= end).collect();
    let inner = visits.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    let tail = visits.last().map_or(end, |&v| end - v);
    inner.max(tail)
}

/// Empirical `Pr[τ > t]` for `t = 0..=t_max`; aborted samples count as survivors.
pub fn empirical_survival(samples: &[Option<u64>], t_max: usize) -> Vec<f64> {
    let mut hist = vec![0u64; t_max + 2];
    for s in samples {
        let idx = match s {
            Some(t) => (*t as usize).min(t_max + 1),
            None => t_max + 1,
        };
        hist[idx] += 1;
    }
    let total = samples.len() as f64;
    let mut alive = samples.len() as u64;
    (0..=t_max)
        .map(|t| {
            alive -= hist[t];
            alive as f64 / total
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DescentSample {
    pub h0: u64,
    pub length: u64,
}

/// Steps needed for `|H|` to fall from its starting value to at most 1.
pub fn descent_length(trace: &SteeredTrace) -> Option<DescentSample> {
    let t = (0..=trace.steps.len()).find(|&t| trace.h(t).abs() <= 1)?;
    Some(DescentSample {
        h0: trace.h0.unsigned_abs(),
        length: t as u64,
    })
}

/// Descent audit: violations are descents longer than `c3·h0` steps. The
/// fraction is compared against `threshold`.
pub fn descent_audit(samples: &[DescentSample], c3: u64, threshold: f64) -> ThresholdAudit {
    let mut report = AuditReport::new();
    for s in samples {
        report.record((c3 * s.h0.max(1)) as f64 - s.length as f64);
    }
    ThresholdAudit::new(report, threshold)
}

/// Reference descent: sum of `h0 - 1` independent first passages.
pub fn bd_sample_descent<R: Rng + ?Sized>(sampler: &mut FirstPassageSampler, h0: u64, rng: &mut R) -> Option<DescentSample> {
    let length = if h0 <= 1 { 0 } else { sampler.hitting_time(h0, 1, rng)? };
    Some(DescentSample { h0, length })
}

/// `4·sqrt(m ln m)`.
pub fn deviation_bound(m: usize) -> f64 {
    let m = m as f64;
    4.0 * (m * m.ln()).sqrt()
}

/// Deviation audit over per-trace maxima of `|D|`; tolerated rate `1/m`.
pub fn deviation_audit_values<I: IntoIterator<Item = i64>>(max_abs_d: I, m: usize) -> ThresholdAudit {
    let bound = deviation_bound(m);
    let mut report = AuditReport::new();
    for d in max_abs_d {
        report.record(bound - d as f64);
    }
    ThresholdAudit::new(report, 1.0 / m as f64)
}

pub fn deviation_audit(traces: &[SteeredTrace], m: usize) -> ThresholdAudit {
    deviation_audit_values(traces.iter().map(SteeredTrace::max_abs_d), m)
}

/// `1 + K ln m'`.
pub fn height_bound(k: f64, m_prime: usize) -> f64 {
    1.0 + k * (m_prime as f64).ln()
}

/// Height audit over steps with both halves active; tolerated rate `3/m'^2`.
pub fn height_audit(traces: &[SteeredTrace], k: f64, m_prime: usize) -> ThresholdAudit {
    let bound = height_bound(k, m_prime);
    let mut report = AuditReport::new();
    for tr in traces {
        report.record(bound - tr.max_abs_h_active() as f64);
    }
    ThresholdAudit::new(report, 3.0 / (m_prime as f64).powi(2))
}

/// `C1 ln m'`.
pub fn gap_bound(c1: f64, m_prime: usize) -> f64 {
    c1 * (m_prime as f64).ln()
}

/// Excursion audit on the active phase of each trace; tolerated rate `1/m'`.
pub fn excursion_audit(traces: &[SteeredTrace], c1: f64, m_prime: usize) -> ThresholdAudit {
    let bound = gap_bound(c1, m_prime);
    let mut report = AuditReport::new();
    for tr in traces {
        let end = tr.exhaustion_step.unwrap_or(tr.steps.len());
        report.record(bound - max_gap(tr, end) as f64);
    }
    ThresholdAudit::new(report, 1.0 / m_prime as f64)
}

/// `Σ C_k / 4^k` for `k < k_max` in closed form: `2 - 2·C(2K, K) / 4^K`.
pub fn catalan_quarter_partial_sum(k_max: u64) -> BigRational {
    let binom = crate::numeric::binomial(2 * k_max, k_max);
    let four_k = BigUint::from(4u32).pow(k_max as u32);
    let two = BigRational::from_integer(2.into());
    let frac = big_rational(binom * 2u32, four_k);
    two - frac
}
