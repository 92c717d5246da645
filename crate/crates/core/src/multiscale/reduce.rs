//! Worst-case reduction: the union of a set system under many uniformly
//! random relabelings of the ground set.

use num_rational::Ratio;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::balance::{average_case_epsilon, BruteForceCaps};
use crate::error::{Error, Result};
use crate::ground::SetSystem;

/// `max(1, ceil(c·n/ε))`.
pub fn copies_needed(n: usize, epsilon: Ratio<u64>, c: u64) -> Result<u64> {
    if epsilon.is_zero() || epsilon > Ratio::from_integer(1) {
        return Err(Error::Domain(format!("epsilon {epsilon} must lie in (0, 1]")));
    }
    let raw = Ratio::from_integer(c * n as u64) / epsilon;
    Ok(raw.ceil().to_integer().max(1))
}

/// Union of `x` under the given permutations of `[n]`.
pub fn reduce_with_permutations(x: &SetSystem, perms: &[Vec<usize>]) -> Result<SetSystem> {
    let mut sets = Vec::with_capacity(perms.len() * x.len());
    for p in perms {
        let mut sorted = p.clone();
        sorted.sort_unstable();
        if sorted != (0..x.n()).collect::<Vec<_>>() {
            return Err(Error::Input("relabeling is not a permutation of the ground set".into()));
        }
        sets.extend(x.permuted(p).sets().iter().cloned());
    }
    SetSystem::new(x.ground(), sets)
}

/// Union of `x` under `max(1, ceil(c·n/ε))` independent uniform permutations.
pub fn reduce_to_worst_case<R: Rng + ?Sized>(x: &SetSystem, epsilon: Ratio<u64>, c: u64, rng: &mut R) -> Result<SetSystem> {
    let copies = copies_needed(x.n(), epsilon, c)?;
    let perms: Vec<Vec<usize>> = (0..copies)
        .map(|_| {
            let mut p: Vec<usize> = (0..x.n()).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    reduce_with_permutations(x, &perms)
}

/// Checks by brute force that at least an `epsilon` fraction of balanced
/// colorings admit a `k`-balanced chain in `x`.
pub fn check_reduction_precondition(x: &SetSystem, k: u32, epsilon: Ratio<u64>, caps: &BruteForceCaps) -> Result<bool> {
    let frac = average_case_epsilon(x, k, caps)?;
    Ok(frac.ratio() >= epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::chain_balance;
    use crate::ground::MaximalChain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn copies() {
        assert_eq!(copies_needed(8, Ratio::new(8, 35), 8).unwrap(), 280);
        assert_eq!(copies_needed(8, Ratio::new(1, 2), 0).unwrap(), 1);
        assert!(copies_needed(8, Ratio::zero(), 1).is_err());
    }

    #[test]
    fn identity_permutation_keeps_system() {
        let x = SetSystem::prefixes(&MaximalChain::identity(6));
        let out = reduce_with_permutations(&x, &[(0..6).collect()]).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn reduced_prefix_system_balances() {
        let x = SetSystem::prefixes(&MaximalChain::identity(8));
        let caps = BruteForceCaps::default();
        let eps = average_case_epsilon(&x, 1, &caps).unwrap().ratio();
        assert_eq!(eps, Ratio::new(8, 35));
        assert!(check_reduction_precondition(&x, 1, eps, &caps).unwrap());
        let ok = (0..5u64).any(|seed| {
            let out = reduce_to_worst_case(&x, eps, 8, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            out.len() <= 280 * x.len() && chain_balance(&out, &caps).unwrap() <= 1
        });
        assert!(ok);
    }
}
