//! Optimal control of multisolution p-Laplacian equations with `1 < p < 2`.
//!
//! The crate discretizes `-div(|∇y|^{p-2}∇y) = f(y) + u` with Q1 finite
//! elements, solves the regularized state and adjoint equations, and drives
//! a penalized control problem through a four-parameter homotopy before
//! verifying first-order optimality conditions on the result.

pub mod adjoint;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod error;
pub mod homotopy;
pub mod library;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod scalar;
pub mod state;
pub mod verifier;

pub use discretization::{build_grid, CellField, DomainSpec, Field, Grid, Norms, Point};
pub use adjoint::{
    degenerate_gradient_norm, normalize_multiplier, solve_adjoint, weighted_energy, AdjointSource, DegenerateMask,
    MultiplierPair,
};
pub use error::{Error, Result};
pub use objective::{
    eval_hamiltonian, eval_j, eval_j_sigma_eps, eval_j_tau_m, gradient_via_adjoint, ControlCost, ControlPair,
    HamiltonianMode, PenaltyParams, Penalized, ProblemSpec, Reference, RunningCost,
};
pub use optimizer::{
    solve_inner, update_u_pointwise, update_v_pointwise, InnerSolveConfig, InnerSolveResult, InnerStrategy,
    UMaximizerMode,
};
pub use scalar::Real;
pub use state::{DegeneratePolicy, DiffusionTensor, GrowthSpec, NewtonConfig, Nonlinearity, PLaplacian, SolveReport};

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type CellField64 = CellField<f64>;
pub type PLaplacian64 = PLaplacian<f64>;
