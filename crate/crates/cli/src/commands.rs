use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;
use serde_json::{json, Value};

use chainbal::balance::{average_case_epsilon, chain_balance, epsilon_table, BruteForceCaps};
use chainbal::experiment::{build_csv, run_build_campaign, run_build_trial, summarize, trial_rng, BUILD_CSV_HEADER};
use chainbal::ground::{BalancedColoring, GroundSize, SetSystem};
use chainbal::io::{abp_to_json, set_system_from_json, set_system_to_json};
use chainbal::mabp::{build_for_gadget, full_rank_check_with_weights, Gadget, WeightAssignment, EXPANSION_CAP};
use chainbal::martingale::{
    bd_first_passage_pmf, bd_sample_descent, deviation_audit_values, deviation_bound, empirical_survival, forced_probability_sweep,
    gap_bound, height_bound, max_gap, mgf_at_gamma, pgf_closed_form, pgf_series, supermartingale_audit, descent_audit,
    AuditReport, BirthDeathParams, FirstPassageSampler, RateConstants,
};
use chainbal::multiscale::builder::level_records;
use chainbal::multiscale::composite::composite_exponent;
use chainbal::multiscale::profile::{hypotheses_hold_for, hypothesis_row};
use chainbal::multiscale::reduce::copies_needed;
use chainbal::multiscale::{composite_count_bound, enumerate_composites, j_max, reduce_to_worst_case, ConstantsProfile};
use chainbal::steered::{run_until, GridPosition, Segment, StopRule};

use crate::{Ctx, Failure, Suite};

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn profile_or(ctx: &Ctx, default: &str) -> Result<(String, ConstantsProfile), Failure> {
    let name = ctx.global.profile.clone().unwrap_or_else(|| default.to_string());
    let p = ctx.config.profile(&name)?;
    Ok((name, p))
}

pub fn cbal(ctx: &Ctx, path: &Path, max_n: usize) -> Result<(), Failure> {
    let x = set_system_from_json(&read(path)?)?;
    let caps = BruteForceCaps {
        max_n,
        ..BruteForceCaps::default()
    };
    let k = chain_balance(&x, &caps)?;
    let table = epsilon_table(&x, k, &caps)?;
    let eps: Vec<String> = table.iter().enumerate().map(|(i, f)| format!("ε({i})={f}")).collect();
    println!("cbal={k}, {}", eps.join(", "));
    let report = json!({
        "n": x.n(),
        "sets": x.len(),
        "cbal": k,
        "epsilon": table.iter().enumerate().map(|(i, f)| json!({"k": i, "successes": f.successes, "total": f.total})).collect::<Vec<_>>(),
    });
    ctx.write("cbal.json", &pretty(&report))?;
    Ok(())
}

pub fn build(ctx: &Ctx, n: Option<usize>) -> Result<(), Failure> {
    let cfg = &ctx.config.build;
    let n = GroundSize::new(n.unwrap_or(cfg.n))?;
    let (name, profile) = profile_or(ctx, &cfg.profile)?;
    let trials = ctx.global.trials.unwrap_or(cfg.trials);
    let (descent_ok, gap_ok) = hypotheses_hold_for(&profile, n.get());
    if !descent_ok || !gap_ok {
        eprintln!(
            "warning: profile {name:?} violates its hypotheses up to n = {}: descent {}, gap {}",
            n.get(),
            if descent_ok { "holds" } else { "fails" },
            if gap_ok { "holds" } else { "fails" }
        );
    }
    if trials == 0 {
        ctx.write("build_summary.csv", &format!("{BUILD_CSV_HEADER}\n"))?;
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let seed = ctx.seed();
    let rows = run_build_campaign(n, &profile, trials, seed);
    ctx.write("build_summary.csv", &build_csv(&rows))?;

    let mut jsonl = String::new();
    for i in 0..cfg.trace_limit.min(trials) as u64 {
        let t = run_build_trial(n, &profile, seed, i);
        for rec in level_records(&t.trace, &t.coloring) {
            let mut v = serde_json::to_value(&rec).expect("records serialize");
            v["trial"] = json!(i);
            jsonl.push_str(&serde_json::to_string(&v).expect("records serialize"));
            jsonl.push('\n');
        }
    }
    ctx.write("build_traces.jsonl", &jsonl)?;

    let s = summarize(&rows);
    ctx.write(
        "build_report.json",
        &pretty(&json!({"n": n.get(), "profile": name, "seed": seed, "threshold": cfg.success_threshold, "summary": s})),
    )?;
    let failures: Vec<String> = s.failures.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!(
        "n={} profile={name} trials={} verified={} success_fraction={:.4} failures=[{}]",
        n.get(),
        s.trials,
        s.verified,
        s.success_fraction,
        failures.join(", ")
    );
    if s.success_fraction >= cfg.success_threshold {
        Ok(())
    } else {
        Err(Failure::Threshold(format!(
            "success fraction {:.4} < {}",
            s.success_fraction, cfg.success_threshold
        )))
    }
}

struct PathStats {
    supermartingale: AuditReport,
    max_abs_d: i64,
    max_h: i64,
    max_gap: usize,
}

fn steered_stats(seed: u64, m: usize, trials: usize) -> Result<Vec<PathStats>, Failure> {
    let g = GroundSize::new(m)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let f = BalancedColoring::random(g, &mut rng);
            let tr = run_until(&Segment::whole(m), GridPosition::default(), 0, &f, &mut rng, StopRule::Exhaustion)?;
            let end = tr.exhaustion_step.unwrap_or(tr.steps.len());
            Ok(PathStats {
                supermartingale: supermartingale_audit(&tr)?,
                max_abs_d: tr.max_abs_d(),
                max_h: tr.max_abs_h_active(),
                max_gap: max_gap(&tr, end),
            })
        })
        .collect::<chainbal::Result<Vec<_>>>()
        .map_err(Failure::from)
}

fn ratio_from_f64(x: f64) -> Ratio<u64> {
    Ratio::new((x * 1e6).round() as u64, 1_000_000)
}

pub fn martingale(ctx: &Ctx, suite: Suite, s: Option<f64>, negative_control: bool) -> Result<(), Failure> {
    let m = &ctx.config.martingale;
    let seed = ctx.seed();
    let quarter = BirthDeathParams::default();
    let rc = RateConstants::compute();
    let report = match suite {
        Suite::Pgf => {
            let points = s.map_or_else(|| m.pgf_points.clone(), |s| vec![s]);
            let pmf = bd_first_passage_pmf(quarter, m.pgf_t_max)?;
            let mut rows = Vec::new();
            for &s in &points {
                let closed = pgf_closed_form(s, quarter)?;
                let series = pgf_series(&pmf, s);
                rows.push(json!({"s": s, "closed_form": closed, "series": series, "difference": (closed - series).abs()}));
            }
            let pass = rows.iter().all(|r| r["difference"].as_f64().unwrap() <= m.pgf_tolerance);
            json!({"suite": "pgf", "t_max": m.pgf_t_max, "tolerance": m.pgf_tolerance, "rows": rows, "pass": pass})
        }
        Suite::Mgf => {
            let r = mgf_at_gamma(quarter, m.mgf_k_max)?;
            let target = 3f64.sqrt();
            let pass = r.value <= target && r.value >= target - m.mgf_tolerance;
            json!({"suite": "mgf", "k_max": r.k_max, "value": r.value, "target": target, "tolerance": m.mgf_tolerance, "pass": pass})
        }
        Suite::Excursion => {
            let params = if negative_control {
                BirthDeathParams::new(ratio_from_f64(m.negative_control_bias))?
            } else {
                quarter
            };
            let samples = ctx.global.trials.unwrap_or(m.excursion_samples);
            let mut sampler = FirstPassageSampler::new(params)?;
            let mut rng = trial_rng(seed, 0);
            let draws: Vec<Option<u64>> = (0..samples).map(|_| sampler.sample(&mut rng)).collect();
            let surv = empirical_survival(&draws, m.excursion_t_max);
            let rows: Vec<Value> = (1..=m.excursion_t_max)
                .map(|t| {
                    let env = m.excursion_slack * rc.survival_envelope(t as u32);
                    json!({"t": t, "survival": surv[t], "envelope": env, "within": surv[t] <= env})
                })
                .collect();
            let pass = rows.iter().all(|r| r["within"].as_bool().unwrap());
            json!({
                "suite": "excursion",
                "up_probability": params.p_f64(),
                "negative_control": negative_control,
                "samples": samples,
                "aborts": sampler.aborts,
                "slack": m.excursion_slack,
                "rows": rows,
                "pass": pass,
            })
        }
        Suite::Descent => {
            let (_, profile) = profile_or(ctx, "paper")?;
            let c3 = profile.c3() as u64;
            let samples = ctx.global.trials.unwrap_or(m.descent_samples);
            let mut sampler = FirstPassageSampler::new(quarter)?;
            let mut rng = trial_rng(seed, 0);
            let draws: Vec<_> = (0..samples)
                .filter_map(|_| bd_sample_descent(&mut sampler, m.descent_h0, &mut rng))
                .collect();
            let bound = rc.descent_bound(m.descent_h0 as u32, c3 as f64);
            let audit = descent_audit(&draws, c3, m.descent_slack * bound);
            json!({"suite": "descent", "h0": m.descent_h0, "c3": c3, "bound": bound, "slack": m.descent_slack, "audit": audit, "pass": audit.pass})
        }
        Suite::Deviation => {
            let trials = ctx.global.trials.unwrap_or(m.audit_trials);
            let stats = steered_stats(seed, m.audit_m, trials)?;
            let audit = deviation_audit_values(stats.iter().map(|s| s.max_abs_d), m.audit_m);
            json!({"suite": "deviation", "m": m.audit_m, "bound": deviation_bound(m.audit_m), "audit": audit, "pass": audit.pass})
        }
        Suite::Supermartingale => {
            let (_, profile) = profile_or(ctx, "paper")?;
            let trials = ctx.global.trials.unwrap_or(m.audit_trials);
            let stats = steered_stats(seed, m.audit_m, trials)?;
            let mut factor = stats.first().map(|s| s.supermartingale).unwrap_or(AuditReport {
                violations: 0,
                worst_margin: f64::INFINITY,
                samples: 0,
            });
            for s in stats.iter().skip(1) {
                factor.merge(&s.supermartingale);
            }
            let sweep = forced_probability_sweep(m.forced_r_max);
            let hb = height_bound(profile.k() as f64, m.audit_m);
            let gb = gap_bound(profile.c1() as f64, m.audit_m);
            let height_exceeded = stats.iter().filter(|s| s.max_h as f64 > hb).count();
            let gap_exceeded = stats.iter().filter(|s| s.max_gap as f64 > gb).count();
            let pass = factor.violations == 0 && sweep.at_least_quarter == 0;
            json!({
                "suite": "supermartingale",
                "m": m.audit_m,
                "trials": trials,
                "factor_audit": factor,
                "forced_sweep": sweep,
                "height_bound": hb,
                "height_exceeded": height_exceeded,
                "largest_height": stats.iter().map(|s| s.max_h).max(),
                "gap_bound": gb,
                "gap_exceeded": gap_exceeded,
                "pass": pass,
            })
        }
    };
    let name = format!("martingale_{}.json", report["suite"].as_str().unwrap());
    let text = pretty(&report);
    ctx.write(&name, &text)?;
    print!("{text}");
    if report["pass"].as_bool() == Some(true) {
        Ok(())
    } else {
        Err(Failure::Threshold(format!("{} audit outside tolerance", report["suite"])))
    }
}

pub fn mabp(ctx: &Ctx, n: Option<usize>, system: Option<&Path>, block_size: Option<usize>) -> Result<(), Failure> {
    let x = match (system, n) {
        (Some(p), _) => {
            let x = set_system_from_json(&read(p)?)?;
            if let Some(n) = n.filter(|&n| n != x.n()) {
                return Err(Failure::Usage(format!("--n {n} does not match the system's n = {}", x.n())));
            }
            x
        }
        (None, Some(n)) => {
            let g = GroundSize::new(n)?;
            if n > EXPANSION_CAP {
                return Err(Failure::Capacity(format!("n = {n} exceeds the expansion cap {EXPANSION_CAP}")));
            }
            SetSystem::power_set(g)?
        }
        (None, None) => return Err(Failure::Usage("either --n or --system is required".into())),
    };
    let gadget = match block_size {
        None => Gadget::Sum,
        Some(b) => Gadget::InnerProduct { block_size: b },
    };
    let field = ctx.config.field;
    let seed = ctx.seed();
    let retries = ctx.config.mabp.retries;
    let mut attempt = 0;
    let (w, verdict) = loop {
        let w = WeightAssignment::random(field, x.n(), &mut trial_rng(seed, attempt as u64));
        let v = full_rank_check_with_weights(&x, gadget, &w)?;
        let balanced = matches!(v.cbal, Some(c) if c <= 1);
        if v.pass || !balanced || attempt == retries {
            break (w, v);
        }
        attempt += 1;
        eprintln!("retry {attempt}/{retries}: rank deficiency on a 1-balanced system, drawing new weights");
    };
    let abp = build_for_gadget(&x, gadget, &w)?;
    ctx.write("abp.json", &abp_to_json(&abp))?;
    let mut report = serde_json::to_value(&verdict).expect("verdict serializes");
    report["attempts"] = json!(attempt + 1);
    ctx.write("mabp_verdict.json", &pretty(&report))?;

    println!("partition  Y  rank  pass");
    for p in &verdict.partitions {
        let y: Vec<String> = p.y.iter().map(ToString::to_string).collect();
        println!("{:>9}  {{{}}}  {}  {}", p.index, y.join(","), p.rank, if p.full { "PASS" } else { "FAIL" });
    }
    let cbal = verdict.cbal.map_or("unknown".to_string(), |c| c.to_string());
    println!(
        "{}: n={} cbal={cbal} expected rank {} on {} partitions",
        if verdict.pass { "PASS" } else { "FAIL" },
        verdict.n,
        verdict.expected_rank,
        verdict.partitions.len()
    );
    match verdict.first_failure {
        None => Ok(()),
        Some(i) => {
            let p = &verdict.partitions[i];
            Err(Failure::Threshold(format!("partition {} with Y = {:?} has rank {}", p.index, p.y, p.rank)))
        }
    }
}

pub fn reduce(ctx: &Ctx, path: &Path, k: u32, c: Option<u64>) -> Result<(), Failure> {
    let x = set_system_from_json(&read(path)?)?;
    let caps = BruteForceCaps::default();
    let eps = average_case_epsilon(&x, k, &caps)?;
    if eps.successes == 0 {
        return Err(Failure::Usage(format!("no balanced coloring has a chain within {k}")));
    }
    let c = c.unwrap_or(ctx.config.reduce.c);
    let copies = copies_needed(x.n(), eps.ratio(), c)?;
    let y = reduce_to_worst_case(&x, eps.ratio(), c, &mut trial_rng(ctx.seed(), 0))?;
    let cb = chain_balance(&y, &caps)?;
    ctx.write("reduced_system.json", &set_system_to_json(&y))?;
    let report = json!({"n": x.n(), "k": k, "epsilon": eps.to_string(), "c": c, "copies": copies, "sets": y.len(), "cbal": cb});
    ctx.write("reduce_report.json", &pretty(&report))?;
    println!("epsilon={eps} copies={copies} sets={} cbal={cb}", y.len());
    if cb <= k {
        Ok(())
    } else {
        Err(Failure::Threshold(format!("reduced system has cbal {cb} > {k}")))
    }
}

pub fn enumerate(ctx: &Ctx, n: usize, cap: Option<u64>) -> Result<(), Failure> {
    let (name, profile) = profile_or(ctx, &ctx.config.enumerate.profile)?;
    let g = GroundSize::new(n)?;
    let s = enumerate_composites(g, &profile, cap.unwrap_or(ctx.config.enumerate.cap), None)?;
    let bound = composite_count_bound(n, &profile);
    ctx.write("composites.json", &set_system_to_json(&s))?;
    println!(
        "n={n} profile={name} sets={} bound={bound} (n^{}) j_max={}",
        s.len(),
        composite_exponent(&profile),
        j_max(n, &profile)
    );
    Ok(())
}

pub fn check_constants(ctx: &Ctx, n: Option<usize>) -> Result<(), Failure> {
    let (name, p) = profile_or(ctx, "paper")?;
    let n = n.unwrap_or(ctx.config.build.n);
    let rc = RateConstants::compute();
    let (descent, gap) = hypotheses_hold_for(&p, n);
    let m0 = p.m0() as usize;
    let report = json!({
        "rates": rc,
        "excursion_constant": rc.excursion_constant(),
        "profile": name,
        "constants": p,
        "gamma_budget": p.gamma(),
        "c2": p.c2(),
        "n": n,
        "budget": p.budget(n),
        "j_max": j_max(n, &p),
        "descent_hypothesis": hypothesis_row(&p, m0),
        "gap_hypothesis": hypothesis_row(&p, m0.div_ceil(2).max(1)),
        "descent_holds": descent,
        "gap_holds": gap,
    });
    let text = pretty(&report);
    ctx.write("constants.json", &text)?;
    print!("{text}");
    if descent && gap {
        Ok(())
    } else {
        Err(Failure::Threshold(format!("profile {name:?} fails its hypotheses up to n = {n}")))
    }
}
