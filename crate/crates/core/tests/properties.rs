use num_rational::Ratio;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use chainbal::balance::{chain_balance, BruteForceCaps};
use chainbal::gapfill::{exhaustive_order_oracle, greedy_order, prefix_imbalances, random_gap_instance};
use chainbal::ground::{BalancedColoring, GroundSize, MaximalChain, SetSystem, SubsetMask};
use chainbal::io;
use chainbal::mabp::{
    abp_evaluate, build_abp, coefficient_matrix, expand_coefficients, field_rank, sm_build_abp, Gadget, PrimeField,
    WeightAssignment,
};
use chainbal::martingale::{
    bd_first_passage_pmf, first_passage_numerators_by_convolution, first_passage_numerators_by_enumeration,
    BirthDeathParams, FirstPassageSampler,
};
use chainbal::steered::forced_probability;

fn perm(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

fn random_system(n: usize, chains: usize, seed: u64) -> SetSystem {
    let mut x = SetSystem::prefixes(&MaximalChain::new(perm(n, seed)).unwrap());
    for k in 1..chains {
        let y = SetSystem::prefixes(&MaximalChain::new(perm(n, seed.wrapping_add(k as u64))).unwrap());
        x = x.union(&y).unwrap();
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_fills_every_gap(seed: u64, half in 1usize..12, max_gap in 0usize..13) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_gap_instance(GroundSize::new(2 * half).unwrap(), max_gap, &mut rng);
        let h0 = g.f.imbalance(&g.s).unwrap();
        let order = greedy_order(&g).unwrap();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, g.i.elements());
        prop_assert!(prefix_imbalances(&g.f, h0, &order).iter().all(|h| h.abs() <= 1));
        prop_assert!(exhaustive_order_oracle(&g).unwrap().is_some());
    }

    #[test]
    fn single_chain_systems_are_at_least_one_balanced(seed: u64, half in 1usize..5) {
        let x = random_system(2 * half, 1, seed);
        let k = chain_balance(&x, &BruteForceCaps::default()).unwrap();
        prop_assert!(k >= 1);
        prop_assert!(k as usize <= half);
    }

    #[test]
    fn abp_evaluation_matches_expansion(seed: u64, half in 1usize..4, chains in 1usize..4) {
        let n = 2 * half;
        let x = random_system(n, chains, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let field = PrimeField::default();
        let w = WeightAssignment::random(field, n, &mut rng);
        for abp in [build_abp(&x, &w).unwrap(), sm_build_abp(&x, 2, &w).unwrap()] {
            let coeffs = expand_coefficients(&abp).unwrap();
            let bs = abp.gadget().block_size();
            for _ in 0..5 {
                let point: Vec<u64> = (0..abp.num_variables()).map(|_| field.random(&mut rng)).collect();
                prop_assert_eq!(abp_evaluate(&abp, &point).unwrap(), coeffs.evaluate(&field, bs, &point));
            }
        }
    }

    #[test]
    fn rank_is_bounded_and_transpose_invariant(seed: u64, half in 1usize..4, chains in 1usize..5) {
        let n = 2 * half;
        let x = random_system(n, chains, seed);
        let field = PrimeField::default();
        let w = WeightAssignment::random(field, n, &mut ChaCha8Rng::seed_from_u64(seed));
        let coeffs = expand_coefficients(&build_abp(&x, &w).unwrap()).unwrap();
        let y = SubsetMask::from_elements(n, perm(n, seed).into_iter().take(half)).unwrap();
        let m = coefficient_matrix(&coeffs, Gadget::Sum, &y, field).unwrap();
        let r = field_rank(&m);
        prop_assert!(r as u64 <= Gadget::Sum.full_rank(n).unwrap());
        prop_assert_eq!(r, field_rank(&m.transpose()));
    }

    #[test]
    fn json_roundtrips(seed: u64, half in 1usize..6, chains in 1usize..4) {
        let n = 2 * half;
        let x = random_system(n, chains, seed);
        prop_assert_eq!(io::set_system_from_json(&io::set_system_to_json(&x)).unwrap(), x.clone());
        let c = MaximalChain::new(perm(n, seed)).unwrap();
        prop_assert_eq!(io::chain_from_json(&io::chain_to_json(&c)).unwrap(), c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = BalancedColoring::random(GroundSize::new(n).unwrap(), &mut rng);
        prop_assert_eq!(io::coloring_from_json(&io::coloring_to_json(&f)).unwrap(), f);
        let g = random_gap_instance(GroundSize::new(n).unwrap(), 6, &mut rng);
        prop_assert_eq!(io::gap_instance_from_json(&io::gap_instance_to_json(&g)).unwrap(), g);
        if n <= 6 {
            let w = WeightAssignment::random(PrimeField::default(), n, &mut rng);
            let abp = build_abp(&x, &w).unwrap();
            prop_assert_eq!(io::abp_from_json(&io::abp_to_json(&abp)).unwrap(), abp);
        }
    }

    #[test]
    fn pmf_recursions_agree(num in 1u64..50, t_max in 1usize..16) {
        let params = BirthDeathParams::new(Ratio::new(num, 100)).unwrap();
        prop_assert_eq!(
            first_passage_numerators_by_enumeration(params, t_max),
            first_passage_numerators_by_convolution(params, t_max)
        );
    }

    #[test]
    fn forced_probability_is_a_probability(r in 2u64..5000, h in 1u64..100) {
        if let Ok(p) = forced_probability(r, h) {
            prop_assert!(p <= Ratio::from_integer(1));
        }
    }
}

#[test]
fn first_passage_sampler_fits_exact_pmf() {
    let params = BirthDeathParams::default();
    let t_max = 21;
    let pmf = bd_first_passage_pmf(params, t_max).unwrap();
    let probs: Vec<f64> = pmf.iter().map(|e| e.prob.to_f64().unwrap()).collect();
    let tail = 1.0 - probs.iter().sum::<f64>();
    let mut sampler = FirstPassageSampler::new(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = 200_000;
    let mut counts = vec![0u64; probs.len() + 1];
    for _ in 0..samples {
        match sampler.sample(&mut rng) {
            Some(t) if (t as usize) <= t_max => counts[pmf.iter().position(|e| e.t == t as usize).unwrap()] += 1,
            _ => counts[probs.len()] += 1,
        }
    }
    let expected = probs.iter().copied().chain([tail]);
    let chi2: f64 = counts
        .iter()
        .zip(expected)
        .map(|(&o, p)| {
            let e = p * samples as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new(probs.len() as f64).unwrap();
    let p_value = 1.0 - dist.cdf(chi2);
    assert!(p_value > 1e-4, "chi-square {chi2}, p = {p_value}");
}
