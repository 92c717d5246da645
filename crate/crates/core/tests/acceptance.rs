//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are run and reported like every other
//! criterion, but do not fail the test target; see the README for why they
//! fail. Any other failing criterion exits non-zero.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use chainbal::balance::{average_case_epsilon, chain_balance, enumerate_balanced_colorings, BruteForceCaps};
use chainbal::config::Config;
use chainbal::experiment::{run_build_campaign, summarize, trial_rng, BuildTrialSummary};
use chainbal::gapfill::{exhaustive_order_oracle, greedy_order, prefix_imbalances, random_gap_instance};
use chainbal::ground::{BalancedColoring, GroundSize, MaximalChain, SetSystem, SubsetMask};
use chainbal::mabp::{full_rank_check, gadget_projection_check, Gadget};
use chainbal::martingale::{
    bd_first_passage_pmf, empirical_survival, first_passage_numerators_by_convolution,
    first_passage_numerators_by_enumeration, forced_probability_sweep, mgf_at_gamma, pgf_closed_form, pgf_series,
    BirthDeathParams, FirstPassageSampler, RateConstants,
};
use chainbal::multiscale::composite::composite_member_mask;
use chainbal::multiscale::profile::hypothesis_row;
use chainbal::multiscale::verify::verify_trace_exhaustive;
use chainbal::multiscale::{build_chain, composite_count_bound, enumerate_composites, reduce_to_worst_case, verify_trace, ConstantsProfile};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILURES: [u32; 2] = [1, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Campaign {
    rows: Vec<BuildTrialSummary>,
    loose_rows: Vec<BuildTrialSummary>,
}

fn builder_success(cfg: &Config, c: &Campaign) -> Outcome {
    let s = summarize(&c.rows);
    let failures: Vec<String> = s.failures.iter().map(|(k, v)| format!("{k}={v}")).collect();
    outcome(
        s.success_fraction >= cfg.build.success_threshold,
        format!(
            "n={}, {} trials: verified fraction {:.4} (threshold {}); failures: {}",
            cfg.build.n,
            s.trials,
            s.success_fraction,
            cfg.build.success_threshold,
            failures.join(", ")
        ),
    )
}

fn forced_probability(cfg: &Config, c: &Campaign) -> Outcome {
    let s = summarize(&c.rows);
    let sweep = forced_probability_sweep(cfg.martingale.forced_r_max);
    outcome(
        s.forced_at_least_quarter == 0 && sweep.at_least_quarter == 0,
        format!(
            "{} audited steps, {} with p >= 1/4; sweep over {} pairs (R <= {}): {} with p >= 1/4, max p = {}",
            s.forced_steps, s.forced_at_least_quarter, sweep.pairs, sweep.r_max, sweep.at_least_quarter, sweep.max_p
        ),
    )
}

fn supermartingale_factor(c: &Campaign) -> Outcome {
    let s = summarize(&c.rows);
    outcome(
        s.factor_violations == 0,
        format!("{} audited steps, {} with 8p + 1 > 3", s.forced_steps, s.factor_violations),
    )
}

fn mgf(cfg: &Config) -> Outcome {
    let params = BirthDeathParams::default();
    let k = cfg.martingale.mgf_k_max;
    let ks = [k / 10, k / 2, k];
    let values: Vec<f64> = ks.iter().map(|&k| mgf_at_gamma(params, k).unwrap().value).collect();
    let sqrt3 = 3f64.sqrt();
    let last = values[2];
    let monotone = values.windows(2).all(|w| w[0] < w[1]);
    outcome(
        last <= sqrt3 && last >= sqrt3 - cfg.martingale.mgf_tolerance && monotone,
        format!("partial sums at k_max = {ks:?}: {values:?}; sqrt(3) - value = {:.5}", sqrt3 - last),
    )
}

fn pgf(cfg: &Config) -> Outcome {
    let params = BirthDeathParams::default();
    let pmf = bd_first_passage_pmf(params, cfg.martingale.pgf_t_max).unwrap();
    let mut worst = 0f64;
    for &s in &cfg.martingale.pgf_points {
        worst = worst.max((pgf_closed_form(s, params).unwrap() - pgf_series(&pmf, s)).abs());
    }
    outcome(
        worst <= cfg.martingale.pgf_tolerance,
        format!("max |closed form - series| = {worst:.3e} at s in {:?}", cfg.martingale.pgf_points),
    )
}

fn excursion_tail(cfg: &Config) -> Outcome {
    let m = &cfg.martingale;
    let params = BirthDeathParams::default();
    let mut sampler = FirstPassageSampler::new(params).unwrap();
    let mut rng = trial_rng(cfg.master_seed, 6);
    let samples: Vec<Option<u64>> = (0..m.excursion_samples).map(|_| sampler.sample(&mut rng)).collect();
    let surv = empirical_survival(&samples, m.excursion_t_max);
    let rc = RateConstants::compute();
    let worst = (1..=m.excursion_t_max)
        .map(|t| surv[t] / (m.excursion_slack * rc.survival_envelope(t as u32)))
        .fold(0f64, f64::max);
    let t = m.pmf_oracle_t_max;
    let oracle = first_passage_numerators_by_enumeration(params, t) == first_passage_numerators_by_convolution(params, t)[..=t];
    outcome(
        worst <= 1.0 && oracle,
        format!(
            "{} samples: max survival / ({} x envelope) = {worst:.4} over t in [1, {}]; enumeration = recursion for t <= {t}: {oracle}",
            m.excursion_samples, m.excursion_slack, m.excursion_t_max
        ),
    )
}

fn deviation_and_height(c: &Campaign) -> Outcome {
    let s = summarize(&c.rows);
    let worst_h = c.rows.iter().map(|r| r.max_h).max().unwrap_or(0);
    outcome(
        s.height_violations == 0 && s.deviation_violations == 0,
        format!(
            "{} trials: {} exceed the height bound (largest max |H| = {worst_h}), {} exceed the deviation bound",
            s.trials, s.height_violations, s.deviation_violations
        ),
    )
}

fn gap_filler(cfg: &Config) -> Outcome {
    let g = &cfg.gap;
    let n = GroundSize::new(g.n).unwrap();
    let mut rng = trial_rng(cfg.master_seed, 8);
    let (mut ok, mut oracle_ok, mut identity_violations) = (0, 0, 0);
    for _ in 0..g.instances {
        let inst = random_gap_instance(n, g.max_gap, &mut rng);
        let h0 = inst.f.imbalance(&inst.s).unwrap();
        match catch_unwind(AssertUnwindSafe(|| greedy_order(&inst))) {
            Ok(Ok(order)) => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted == inst.i.elements() && prefix_imbalances(&inst.f, h0, &order).iter().all(|h| h.abs() <= 1) {
                    ok += 1;
                }
            }
            Ok(Err(_)) => {}
            Err(_) => identity_violations += 1,
        }
        if exhaustive_order_oracle(&inst).unwrap().is_some() {
            oracle_ok += 1;
        }
    }
    outcome(
        ok == g.instances && oracle_ok == g.instances && identity_violations == 0,
        format!(
            "{} instances (n = {}, |I| <= {}): greedy valid {ok}, oracle found {oracle_ok}, counting identity violations {identity_violations}",
            g.instances, g.n, g.max_gap
        ),
    )
}

fn full_rank(cfg: &Config) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for &n in &cfg.mabp.sizes {
        let g = GroundSize::new(n).unwrap();
        let x = SetSystem::power_set(g).unwrap();
        let v = full_rank_check(&x, Gadget::Sum, cfg.field, &mut trial_rng(cfg.master_seed, 900 + n as u64)).unwrap();
        let proj_ok = enumerate_balanced_colorings(g, &BruteForceCaps::default()).unwrap().all(|f| {
            let p = gadget_projection_check(&x, &f, Gadget::Sum, cfg.field).unwrap();
            p.pass && p.rank as u64 == 1 << (n / 2)
        });
        pass &= v.pass && proj_ok;
        notes.push(format!("n={n}: {} partitions at rank {} {}, projection {}", v.partitions.len(), v.expected_rank, pass_word(v.pass), pass_word(proj_ok)));
    }
    let sm_n = cfg.mabp.sm_n;
    let x = SetSystem::power_set(GroundSize::new(sm_n).unwrap()).unwrap();
    let gadget = Gadget::InnerProduct {
        block_size: cfg.mabp.sm_block_size,
    };
    let v = full_rank_check(&x, gadget, cfg.field, &mut trial_rng(cfg.master_seed, 990)).unwrap();
    pass &= v.pass;
    notes.push(format!("set-multilinear N={} n={sm_n}: ranks {:?}", cfg.mabp.sm_block_size, v.partitions.iter().map(|p| p.rank).collect::<Vec<_>>()));
    outcome(pass, notes.join("; "))
}

fn pass_word(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn worst_to_average(cfg: &Config) -> Outcome {
    let r = &cfg.reduce;
    let caps = BruteForceCaps::default();
    let x = SetSystem::prefixes(&MaximalChain::identity(r.n));
    let eps = average_case_epsilon(&x, 1, &caps).unwrap().ratio();
    let mut results = Vec::new();
    for &seed in &r.seeds {
        let y = reduce_to_worst_case(&x, eps, r.c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        results.push((seed, y.len(), chain_balance(&y, &caps).unwrap()));
    }
    let good = results.iter().filter(|r| r.2 <= 1).count();
    outcome(
        good >= 1,
        format!("epsilon = {eps}, c = {}; (seed, |system|, cbal) = {results:?}", r.c),
    )
}

fn small_composites(cfg: &Config) -> Outcome {
    let e = &cfg.enumerate;
    let profile = cfg.profile(&e.profile).unwrap();
    let mut pass = true;
    let mut sizes = Vec::new();
    for &n in &e.sizes {
        let g = GroundSize::new(n).unwrap();
        let s = enumerate_composites(g, &profile, e.cap, None).unwrap();
        let filter: Vec<SubsetMask> = (0u64..1 << n)
            .filter(|&m| composite_member_mask(m, n, &profile).unwrap())
            .map(|m| SubsetMask::from_u64(n, m))
            .collect();
        let same = s == SetSystem::new(g, filter).unwrap();
        let bounded = BigUint::from(s.len()) <= composite_count_bound(n, &profile);
        pass &= same && bounded;
        sizes.push(format!("n={n}: |S|={} {}", s.len(), pass_word(same && bounded)));
    }
    let n = *e.sizes.iter().max().unwrap();
    let (mut built, mut member) = (0, 0);
    for i in 0..e.builder_runs as u64 {
        let mut rng = trial_rng(cfg.master_seed, 1100 + i);
        let f = BalancedColoring::random(GroundSize::new(n).unwrap(), &mut rng);
        let t = build_chain(&f, &profile, &mut rng);
        if t.success {
            built += 1;
            if verify_trace(&t, &f, &profile).is_pass() && verify_trace_exhaustive(&t, &f, &profile).unwrap().is_pass() {
                member += 1;
            }
        }
    }
    pass &= built > 0 && member == built;
    outcome(pass, format!("{}; builder at n={n}: {member}/{built} successful chains have every level in S", sizes.join(", ")))
}

fn constants() -> Outcome {
    let rc = RateConstants::compute();
    let p = ConstantsProfile::paper();
    let h1 = hypothesis_row(&p, 700);
    let h2 = hypothesis_row(&p, 350);
    let checks = [
        (rc.gamma * 1e4).round() == 1438.0,
        (rc.rho - 3f64.sqrt() / 2.0).abs() < 1e-15,
        rc.excursion_constant() == 28 && p.c1() == 28,
        (rc.alpha * 1e3).round() == 548.0,
        h1.descent_lhs.round() == 378.0 && h1.descent_lhs >= 350.0,
        h2.gap_lhs.round() == 300.0 && h2.gap_rhs.round() == 164.0 && h2.gap_holds,
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "gamma = {:.4}, rho = {:.6}, C1 = {}, alpha = {:.3}, H1: {:.0} >= 350, H2: {:.0} >= {:.0}",
            rc.gamma,
            rc.rho,
            rc.excursion_constant(),
            rc.alpha,
            h1.descent_lhs,
            h2.gap_lhs,
            h2.gap_rhs
        ),
    )
}

fn telescoping(c: &Campaign) -> Outcome {
    let all = c.rows.iter().chain(&c.loose_rows);
    let total = c.rows.len() + c.loose_rows.len();
    let bad = all.clone().filter(|r| !r.telescoping).count();
    let deepest = all.map(|r| r.depth).max().unwrap_or(0);
    outcome(
        bad == 0,
        format!("{total} traces ({} at the loose profile), {bad} violate; deepest has {deepest} scales", c.loose_rows.len()),
    )
}

fn main() -> ExitCode {
    let cfg = Config::default();
    let t0 = Instant::now();
    let n = GroundSize::new(cfg.build.n).unwrap();
    let paper = cfg.profile(&cfg.build.profile).unwrap();
    let loose = cfg.profile("loose").unwrap();
    let campaign = Campaign {
        rows: run_build_campaign(n, &paper, cfg.build.trials, cfg.master_seed),
        loose_rows: run_build_campaign(n, &loose, cfg.build.trials / 10, cfg.master_seed),
    };
    println!("build campaigns finished in {:.1}s", t0.elapsed().as_secs_f64());

    type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(u32, &str, Criterion)> = vec![
        (1, "builder success", Box::new(|| builder_success(&cfg, &campaign))),
        (2, "forced probability", Box::new(|| forced_probability(&cfg, &campaign))),
        (3, "supermartingale factor", Box::new(|| supermartingale_factor(&campaign))),
        (4, "MGF partial sum", Box::new(|| mgf(&cfg))),
        (5, "PGF closed form", Box::new(|| pgf(&cfg))),
        (6, "excursion tail", Box::new(|| excursion_tail(&cfg))),
        (7, "deviation and height", Box::new(|| deviation_and_height(&campaign))),
        (8, "gap filler", Box::new(|| gap_filler(&cfg))),
        (9, "full-rank pipeline", Box::new(|| full_rank(&cfg))),
        (10, "worst-to-average reduction", Box::new(|| worst_to_average(&cfg))),
        (11, "small-instance composites", Box::new(|| small_composites(&cfg))),
        (12, "constants and hypotheses", Box::new(constants)),
        (13, "telescoping", Box::new(|| telescoping(&campaign))),
    ];

    let mut unexpected = Vec::new();
    for (id, name, run) in &criteria {
        let t = Instant::now();
        let o = run();
        let note = if !o.pass && KNOWN_FAILURES.contains(id) { " (known failure)" } else { "" };
        println!(
            "criterion {id:>2} {}{note}: {name}: {} [{:.1}s]",
            pass_word(o.pass),
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass && !KNOWN_FAILURES.contains(id) {
            unexpected.push(*id);
        }
    }
    println!("acceptance finished in {:.1}s", t0.elapsed().as_secs_f64());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
