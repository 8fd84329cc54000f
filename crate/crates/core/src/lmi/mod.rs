//! Structured block LMIs and a self-contained feasibility solver.
//!
//! Variables are declared in a [`VariableSet`], which fixes how structured
//! matrices (symmetric, tied sub-blocks, pinned zeros) map onto scalar
//! unknowns. [`BlockLmi`] grids of [`AffineExpr`] blocks lower onto a
//! standard-form SDP solved by [`sdp`]. Whatever the solver reports, a point
//! is only accepted after its eigenvalues are recomputed here.

mod block;
mod conditions;
mod expr;
mod feasibility;
mod petersen;
pub mod sdp;
mod variable;

pub use block::{BlockLmi, SYMMETRY_TOL};
pub use conditions::{
    assemble_hinf_lmi, assemble_model_hinf, assemble_model_robust, assemble_robust_lmi, descriptor_realization,
    scalar_times, HinfVars, ModelHinfVars, RobustVars,
};
pub use expr::{AffineExpr, Term};
pub use feasibility::{
    solve_feasibility, verify_solution, Certificate, FeasibilityOptions, LmiProblem, LmiSolution, SolverStatus,
    DEFAULT_MARGIN,
};
pub use petersen::petersen_sufficient;
pub use variable::{MatrixVariable, Structure, Tie, TieTransform, VarId, VariableSet, ZeroBlock};

#[derive(Debug, thiserror::Error)]
pub enum LmiError {
    #[error("malformed LMI: {0}")]
    Structure(String),

    #[error("no value assigned to variable {0}")]
    MissingAssignment(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible (best margin {best_margin:.3e}, optimal margin at most {upper_bound:.3e})")]
    Infeasible { best_margin: f64, upper_bound: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
