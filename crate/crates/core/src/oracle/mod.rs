//! Exact solvers and numerical certificates.
//!
//! Everything here is a pure function of immutable inputs and uses dense
//! linear algebra; the state spaces involved are a few dozen states at most.

mod certificate;
mod gradients;
mod mixing;
mod stationary;
mod values;

pub use certificate::{
    certificate_norm_index, contraction_certificate, contraction_factor, contraction_matrix, norm_index,
    ContractionCertificate, ContractionMatrix, STRUCTURE_TOL,
};
pub use gradients::{exact_objective_and_gradients, ObjectiveGradient, Regularizer};
pub use mixing::{mixing_estimate, MixingEstimate, FIT_FLOOR, FIT_MIN_STEP};
pub use stationary::{
    behavior_state_chain, residual as stationary_residual, sampling_distribution, stationary_distribution,
};
pub use values::{
    discounted_occupancy, exact_q, exact_soft_q, exact_soft_q_for_params, objective, optimal_policy,
    SoftValueTables, ValueTables,
};
