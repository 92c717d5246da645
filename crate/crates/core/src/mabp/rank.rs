//! Coefficient matrices over equipartitions, their ranks, and the end-to-end
//! full-rank check for a set system.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::abp::{block_state, Abp, build_abp, chain_polynomial, expand_coefficients, sm_build_abp, Coefficients, Gadget, WeightAssignment};
use super::field::PrimeField;
use crate::balance::{balanced_masks, best_chain_for, chain_balance, BruteForceCaps};
use crate::error::{Error, Result};
use crate::ground::{BalancedColoring, GroundSize, SetSystem, SubsetMask};

/// Largest coefficient-matrix side accepted.
pub const MATRIX_DIM_CAP: usize = 4096;

/// Rows are indexed by the monomial restricted to `Y`, columns by its
/// restriction to `Z`, with entries stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientMatrix {
    pub y: SubsetMask,
    pub dim: usize,
    pub entries: Vec<u64>,
    field: PrimeField,
}

impl CoefficientMatrix {
    pub fn from_rows(field: PrimeField, rows: Vec<Vec<u64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Input("coefficient matrix must be square".into()));
        }
        let entries = rows.into_iter().flatten().map(|x| field.reduce(x)).collect();
        Ok(CoefficientMatrix {
            y: SubsetMask::empty(0),
            dim,
            entries,
            field,
        })
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.dim + c]
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![0; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.entries[r * d + c];
            }
        }
        CoefficientMatrix {
            y: self.y.clone(),
            dim: d,
            entries,
            field: self.field,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }
}

fn index_of(mono: u64, blocks: &[usize], gadget: Gadget) -> Result<usize> {
    let base = gadget.states();
    let mut idx = 0;
    for &b in blocks.iter().rev() {
        let s = block_state(mono, b);
        let digit = match gadget {
            Gadget::Sum if s <= 1 => s,
            Gadget::InnerProduct { block_size } if s >= 1 && s <= block_size => s - 1,
            _ => return Err(Error::Structure(format!("monomial has state {s} in block {b}"))),
        };
        idx = idx * base + digit;
    }
    Ok(idx)
}

/// `M_{Y,Z}(P)` with `Z` the complement of `y`.
pub fn coefficient_matrix(coeffs: &Coefficients, gadget: Gadget, y: &SubsetMask, field: PrimeField) -> Result<CoefficientMatrix> {
    let n = y.n();
    if !n.is_multiple_of(2) || y.len() * 2 != n {
        return Err(Error::Input(format!("|Y| = {} is not half of n = {n}", y.len())));
    }
    let ys = y.elements();
    let zs: Vec<usize> = (0..n).filter(|&u| !y.contains(u)).collect();
    let dim = gadget
        .full_rank(n)
        .filter(|&d| d as usize <= MATRIX_DIM_CAP)
        .ok_or_else(|| Error::capacity("coefficient matrix side", format!("{}^{}", gadget.states(), n / 2), MATRIX_DIM_CAP))?
        as usize;
    let mut entries = vec![0; dim * dim];
    for (m, c) in coeffs.iter() {
        if n < 16 && m >> (4 * n) != 0 {
            return Err(Error::Structure("monomial uses a block outside the ground set".into()));
        }
        let r = index_of(m, &ys, gadget)?;
        let col = index_of(m, &zs, gadget)?;
        entries[r * dim + col] = field.add(entries[r * dim + col], c);
    }
    Ok(CoefficientMatrix {
        y: y.clone(),
        dim,
        entries,
        field,
    })
}

/// Rank over the prime field by Gaussian elimination.
pub fn field_rank(mat: &CoefficientMatrix) -> usize {
    let f = mat.field;
    let d = mat.dim;
    let mut a = mat.entries.clone();
    let mut rank = 0;
    for col in 0..d {
        let Some(piv) = (rank..d).find(|&r| a[r * d + col] != 0) else {
            continue;
        };
        if piv != rank {
            for c in 0..d {
                a.swap(piv * d + c, rank * d + c);
            }
        }
        let inv = f.inv(a[rank * d + col]);
        for c in col..d {
            a[rank * d + c] = f.mul(a[rank * d + c], inv);
        }
        for r in rank + 1..d {
            let factor = a[r * d + col];
            if factor != 0 {
                for c in col..d {
                    let sub = f.mul(factor, a[rank * d + c]);
                    a[r * d + c] = f.sub(a[r * d + c], sub);
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionRank {
    pub index: usize,
    /// The side containing element 1, as 1-based elements.
    pub y: Vec<usize>,
    pub rank: usize,
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullRankVerdict {
    pub n: usize,
    pub gadget: Gadget,
    pub modulus: String,
    pub failure_bound: f64,
    /// `cbal` of the input when it could be computed.
    pub cbal: Option<u32>,
    pub expected_rank: u64,
    pub vertices: usize,
    pub edges: usize,
    pub monomials: usize,
    pub partitions: Vec<PartitionRank>,
    pub pass: bool,
    pub first_failure: Option<usize>,
}

fn ranks_over_partitions(coeffs: &Coefficients, gadget: Gadget, n: GroundSize, field: PrimeField) -> Result<Vec<PartitionRank>> {
    let expected = gadget.full_rank(n.get()).unwrap_or(u64::MAX) as usize;
    balanced_masks(n, true)
        .into_par_iter()
        .enumerate()
        .map(|(index, m)| {
            let y = SubsetMask::from_u64(n.get(), m);
            let rank = field_rank(&coefficient_matrix(coeffs, gadget, &y, field)?);
            Ok(PartitionRank {
                index,
                y: y.iter().map(|u| u + 1).collect(),
                rank,
                full: rank == expected,
            })
        })
        .collect()
}

/// Random weights, ABP, exact expansion, and the rank of `M_{Y,Z}` for every
/// unordered equipartition `{Y, Z}`.
pub fn full_rank_check<R: Rng + ?Sized>(x: &SetSystem, gadget: Gadget, field: PrimeField, rng: &mut R) -> Result<FullRankVerdict> {
    let w = WeightAssignment::random(field, x.n(), rng);
    full_rank_check_with_weights(x, gadget, &w)
}

/// The ABP of `x` under `w` for the given gadget.
pub fn build_for_gadget(x: &SetSystem, gadget: Gadget, w: &WeightAssignment) -> Result<Abp> {
    match gadget {
        Gadget::Sum => build_abp(x, w),
        Gadget::InnerProduct { block_size } => sm_build_abp(x, block_size, w),
    }
}

/// [`full_rank_check`] at a fixed weight assignment.
pub fn full_rank_check_with_weights(x: &SetSystem, gadget: Gadget, w: &WeightAssignment) -> Result<FullRankVerdict> {
    let n = x.ground();
    let field = w.field();
    if n.get() > super::abp::EXPANSION_CAP {
        return Err(Error::capacity("expansion ground size", n.get(), super::abp::EXPANSION_CAP));
    }
    let expected = gadget
        .full_rank(n.get())
        .ok_or_else(|| Error::capacity("target rank", "overflow", u64::MAX))?;
    if !field.schwartz_zippel_ok(n.get(), expected) {
        return Err(Error::Domain(format!(
            "modulus {} is too small for n = {}: need more than 2^n · n · {expected}",
            field.modulus(),
            n.get()
        )));
    }
    let cbal = chain_balance(x, &BruteForceCaps::default()).ok();
    let abp = build_for_gadget(x, gadget, w)?;
    let coeffs = expand_coefficients(&abp)?;
    let partitions = ranks_over_partitions(&coeffs, gadget, n, field)?;
    let first_failure = partitions.iter().position(|p| !p.full);
    Ok(FullRankVerdict {
        n: n.get(),
        gadget,
        modulus: field.modulus().to_string(),
        failure_bound: field.schwartz_zippel_bound(n.get(), expected),
        cbal,
        expected_rank: expected,
        vertices: abp.vertices().len(),
        edges: abp.edges().len(),
        monomials: coeffs.len(),
        pass: first_failure.is_none(),
        first_failure,
        partitions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectionVerdict {
    /// The balancing chain as 1-based elements, if one exists.
    pub chain: Option<Vec<usize>>,
    pub chain_cost: Option<u32>,
    pub matches_gadget: bool,
    pub rank: usize,
    pub expected_rank: u64,
    pub pass: bool,
    pub reason: Option<String>,
}

/// Projects the weights onto the indicator of a best chain for `f` and checks
/// that the result is that chain's gadget product with full rank against `f`.
pub fn gadget_projection_check(x: &SetSystem, f: &BalancedColoring, gadget: Gadget, field: PrimeField) -> Result<ProjectionVerdict> {
    let n = x.n();
    if n > super::abp::EXPANSION_CAP {
        return Err(Error::capacity("expansion ground size", n, super::abp::EXPANSION_CAP));
    }
    let expected = gadget
        .full_rank(n)
        .ok_or_else(|| Error::capacity("target rank", "overflow", u64::MAX))?;
    let fail = |chain: Option<Vec<usize>>, cost: Option<u32>, reason: String| ProjectionVerdict {
        chain,
        chain_cost: cost,
        matches_gadget: false,
        rank: 0,
        expected_rank: expected,
        pass: false,
        reason: Some(reason),
    };
    let Some((chain, cost)) = best_chain_for(x, f, &BruteForceCaps::default())? else {
        return Ok(fail(None, None, "set system has no maximal chain".into()));
    };
    let chain_1 = Some(chain.order().iter().map(|u| u + 1).collect());
    if cost > 1 {
        return Ok(fail(chain_1, Some(cost), format!("best chain has imbalance {cost} > 1")));
    }
    let w = WeightAssignment::indicator(field, &chain);
    let abp = build_for_gadget(x, gadget, &w)?;
    let projected = expand_coefficients(&abp)?;
    let matches_gadget = projected == chain_polynomial(&chain, &WeightAssignment::ones(field, n), gadget);
    let y = SubsetMask::from_u64(n, f.plus_mask());
    let rank = field_rank(&coefficient_matrix(&projected, gadget, &y, field)?);
    let pass = matches_gadget && rank as u64 == expected;
    Ok(ProjectionVerdict {
        chain: chain_1,
        chain_cost: Some(cost),
        matches_gadget,
        rank,
        expected_rank: expected,
        pass,
        reason: (!pass).then(|| format!("projection matches gadget: {matches_gadget}, rank {rank} of {expected}")),
    })
}
