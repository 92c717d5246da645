//! Seeded trial campaigns for the chain builder and their tabular output.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ground::{BalancedColoring, GroundSize};
use crate::martingale::{deviation_bound, forced_steps, height_bound};
use crate::multiscale::{build_chain, verify_trace, BuilderTrace, ConstantsProfile};

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, index))
}

/// One row of a build campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildTrialSummary {
    pub index: u64,
    pub seed: u64,
    pub success: bool,
    pub verified: bool,
    pub failure: Option<String>,
    pub failure_detail: Option<String>,
    pub depth: usize,
    pub segment_sizes: Vec<usize>,
    pub max_h: i64,
    pub max_gap: usize,
    /// Some scale had `max |H| > 1 + K ln m'` during the active phase.
    pub height_exceeded: bool,
    /// Some scale left a residual longer than `4 sqrt(m' ln m')`.
    pub deviation_exceeded: bool,
    pub forced_steps: u64,
    pub forced_at_least_quarter: u64,
    pub factor_violations: u64,
    pub max_forced_p: f64,
    pub telescoping: bool,
}

pub struct BuildTrial {
    pub coloring: BalancedColoring,
    pub trace: BuilderTrace,
    pub summary: BuildTrialSummary,
}

/// Draws a coloring and runs the builder, both from the trial's own stream.
pub fn run_build_trial(n: GroundSize, profile: &ConstantsProfile, master: u64, index: u64) -> BuildTrial {
    let seed = trial_seed(master, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = BalancedColoring::random(n, &mut rng);
    let trace = build_chain(&f, profile, &mut rng);
    let verified = trace.success && verify_trace(&trace, &f, profile).is_pass();

    let quarter = Ratio::new(1, 4);
    let (mut steps, mut quarter_hits, mut factor_bad, mut max_p) = (0u64, 0u64, 0u64, Ratio::from_integer(0));
    let (mut height_exceeded, mut deviation_exceeded) = (false, false);
    for s in &trace.scales {
        let audited = [Some(&s.steered), s.descent.as_ref()];
        for tr in audited.into_iter().flatten() {
            for st in forced_steps(tr).expect("pools in a trace are consistent") {
                steps += 1;
                quarter_hits += (st.p >= quarter) as u64;
                factor_bad += (st.p * 8 + 1 > Ratio::from_integer(3)) as u64;
                max_p = max_p.max(st.p);
            }
        }
        height_exceeded |= s.max_h as f64 > height_bound(profile.k() as f64, s.pool);
        deviation_exceeded |= s.residual.len as f64 > deviation_bound(s.pool);
    }
    let summary = BuildTrialSummary {
        index,
        seed,
        success: trace.success,
        verified,
        failure: trace.failure.as_ref().map(|r| r.label().to_string()),
        failure_detail: trace.failure.as_ref().map(ToString::to_string),
        depth: trace.scales.len(),
        segment_sizes: trace.segment_sizes(),
        max_h: trace.max_h(),
        max_gap: trace.max_gap(),
        height_exceeded,
        deviation_exceeded,
        forced_steps: steps,
        forced_at_least_quarter: quarter_hits,
        factor_violations: factor_bad,
        max_forced_p: *max_p.numer() as f64 / *max_p.denom() as f64,
        telescoping: trace.telescoping_holds(),
    };
    BuildTrial {
        coloring: f,
        trace,
        summary,
    }
}

/// Runs `trials` independent trials in parallel; rows come back in index order.
pub fn run_build_campaign(n: GroundSize, profile: &ConstantsProfile, trials: usize, master: u64) -> Vec<BuildTrialSummary> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_build_trial(n, profile, master, i).summary)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub trials: usize,
    pub successes: usize,
    pub verified: usize,
    pub success_fraction: f64,
    pub height_violations: usize,
    pub deviation_violations: usize,
    pub forced_steps: u64,
    pub forced_at_least_quarter: u64,
    pub factor_violations: u64,
    pub telescoping_failures: usize,
    pub failures: BTreeMap<String, usize>,
}

pub fn summarize(rows: &[BuildTrialSummary]) -> CampaignSummary {
    let mut failures = BTreeMap::new();
    for r in rows {
        if let Some(f) = &r.failure {
            *failures.entry(f.clone()).or_insert(0) += 1;
        } else if !r.verified {
            *failures.entry("verification".to_string()).or_insert(0) += 1;
        }
    }
    let verified = rows.iter().filter(|r| r.verified).count();
    CampaignSummary {
        trials: rows.len(),
        successes: rows.iter().filter(|r| r.success).count(),
        verified,
        success_fraction: if rows.is_empty() { 0.0 } else { verified as f64 / rows.len() as f64 },
        height_violations: rows.iter().filter(|r| r.height_exceeded).count(),
        deviation_violations: rows.iter().filter(|r| r.deviation_exceeded).count(),
        forced_steps: rows.iter().map(|r| r.forced_steps).sum(),
        forced_at_least_quarter: rows.iter().map(|r| r.forced_at_least_quarter).sum(),
        factor_violations: rows.iter().map(|r| r.factor_violations).sum(),
        telescoping_failures: rows.iter().filter(|r| !r.telescoping).count(),
        failures,
    }
}

pub const BUILD_CSV_HEADER: &str = "trial,seed,success,verified,failure,depth,segment_sizes,max_h,max_gap,height_exceeded,deviation_exceeded,forced_steps,forced_at_least_quarter,factor_violations,max_forced_p,telescoping";

pub fn build_csv(rows: &[BuildTrialSummary]) -> String {
    let mut out = String::from(BUILD_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let sizes: Vec<String> = r.segment_sizes.iter().map(ToString::to_string).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{}\n",
            r.index,
            r.seed,
            r.success,
            r.verified,
            r.failure.as_deref().unwrap_or(""),
            r.depth,
            sizes.join(";"),
            r.max_h,
            r.max_gap,
            r.height_exceeded,
            r.deviation_exceeded,
            r.forced_steps,
            r.forced_at_least_quarter,
            r.factor_violations,
            r.max_forced_p,
            r.telescoping
        ));
    }
    out
}
