//! Discrete fractional p-Laplacian on bounded domains with homogeneous
//! Dirichlet data: kernels, principal eigenpairs, logistic-type reactions,
//! and a truncation-based solver for positive steady states.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod descent;
pub mod domain;
pub mod error;
pub mod nonlocal;
pub mod quadrature;
pub mod reactions;
pub mod solver;
pub mod spectral;
pub mod sum;
pub mod verify;

pub use descent::StopReason;
pub use domain::{boundary_power, build_grid, build_rectangle, Geometry, Grid};
pub use error::{Error, Result};
pub use nonlocal::{
    apply_operator, assemble_kernel, gagliardo_energy, jp, lp_norm, picone_gap, Field, Kernel,
};
pub use reactions::{
    asymptote_infty, asymptote_zero, eval_F, eval_f, truncate, validate_hypotheses, ExtendedReal,
    NodalReaction, Reaction, ReactionKind, SpatialWeight,
};
pub use solver::{
    boundary_behavior, minimize_truncated, multi_start_uniqueness, phi, phi_gradient, solve,
    Classification, SolveOptions, SolveResult, UniquenessReport,
};
pub use spectral::{
    dense_oracle_p2, lambda_monotonicity_check, principal_eigenpair, rayleigh_quotient,
    EigenOptions, EigenResult,
};
pub use verify::{evaluate_criterion, CriterionVerdict, PropertyReport};
