//! Batch ADMM solvers for ℓ1 problems with a diagonal generalized penalty.
//!
//! The augmented term of every solver is `½ (ρ_i) rᵀ P r` per problem column
//! `i`, with `P` diagonal and shared across the batch. Both `P` and the
//! per-column `ρ` are adapted by residual balancing.
//!
//! * [`lad`]: least absolute deviation, `min ‖H - AX‖₁,₁`.
//! * [`cbp`]: constrained basis pursuit, `min ‖C₁ ⊙ X‖₁,₁ s.t. GX = H, X ⪰ C₂`.
//! * [`cslad`]: constrained sparse LAD, reduced to CBP.
//! * [`lp`]: a dense simplex used as an exact reference.

pub mod cbp;
pub mod cslad;
pub mod dense;
pub mod error;
pub mod lad;
pub mod lp;
pub mod penalty;
pub mod solver;

pub use cbp::{
    cbp_dual_update, cbp_precompute, cbp_x_update, cbp_z_update, solve_cbp, CbpProjectors,
    ProblemCbp, ProxOrder,
};
pub use cslad::{cslad_to_cbp, solve_cslad, ProblemCslad};
pub use dense::{soft, soft_threshold, spd_factorize, spd_solve, DenseMatrix, SpdFactorization};
pub use error::{Error, Result};
pub use lad::{lad_dual_update, lad_x_update, lad_z_update, solve_lad, LadWorkspace, ProblemLad};
pub use lp::{
    cbp_as_lp, cbp_oracle, cslad_oracle, lad_as_lp, lad_oracle, simplex_solve, LpSolution,
    LpStatus, OracleSolution, StandardLp,
};
pub use penalty::{
    apply_balance_rule, balance_all, residual_magnitudes, BStructure, BalanceConfig,
    ConstraintGeometry, PenaltyState, ResidualMagnitudes,
};
pub use solver::{IterateState, PenaltySnapshot, SolveReport, SolverConfig, Termination};
