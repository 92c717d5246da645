//! The multi-scale set system and the builder that walks it.

pub mod builder;
pub mod composite;
pub mod local;
pub mod profile;
pub mod reduce;
pub mod verify;

pub use builder::{build_chain, BuilderTrace, FailureReason};
pub use composite::{composite_count_bound, composite_membership, enumerate_composites, j_max, Decomposition};
pub use local::{local_membership, local_pattern_count, LocalPattern, Window};
pub use profile::{check_hypotheses, ConstantsProfile};
pub use reduce::reduce_to_worst_case;
pub use verify::{verify_trace, Verdict};
