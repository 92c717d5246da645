//! Balanced-chain set systems over `[n]`.
//!
//! The crate covers brute-force chain-balance oracles, the steered two-half
//! path with its supermartingale audits, the greedy gap filler, the
//! multi-scale chain builder with decomposition witnesses, and the
//! algebraic-branching-program rank pipeline over a prime field.

pub mod balance;
pub mod config;
pub mod error;
pub mod experiment;
pub mod gapfill;
pub mod mabp;
pub mod ground;
pub mod io;
pub mod martingale;
pub mod multiscale;
pub mod numeric;
pub mod steered;

pub use error::{Error, Result};
