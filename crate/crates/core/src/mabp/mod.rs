//! Full-rank polynomials from balanced-chain set systems: ABP construction,
//! coefficient expansion and rank checks over a prime field.

mod abp;
mod field;
mod rank;

pub use abp::{
    abp_evaluate, block_state, build_abp, chain_polynomial, expand_coefficients, expand_coefficients_capped, sm_build_abp,
    support_monomial, var, Abp, AbpEdge, Coefficients, Gadget, WeightAssignment, EXPANSION_CAP, MAX_BLOCK_SIZE,
};
pub use field::{is_prime_u64, PrimeField, DEFAULT_MODULUS};
pub use rank::{
    build_for_gadget, coefficient_matrix, field_rank, full_rank_check, full_rank_check_with_weights, gadget_projection_check, CoefficientMatrix, FullRankVerdict,
    PartitionRank, ProjectionVerdict, MATRIX_DIM_CAP,
};
