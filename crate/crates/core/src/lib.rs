//! Implicit finite-difference solvers for parabolic Hamilton–Jacobi–Bellman
//! equations
//!
//! ```text
//! v_t + sup_a { -1/2 sigma^2 v_xx + b v_x + r v + l } = 0
//! ```
//!
//! with a second-order BDF2 scheme in time and upwinded BDF2 differences in
//! space, in one and two dimensions. Each step is a nonlinear system
//! `sup_a (M_a X - q_a) = 0` solved by a Gauss–Seidel fixed-point iteration
//! whose contraction is certified by a diagonal-dominance ratio.

pub mod analysis;
pub mod error;
pub mod fd_ops;
pub mod grid;
pub mod problem;
pub mod stepper;
pub mod sup_solver;

pub use error::{HjbError, Result};
pub use grid::{Grid1D, Grid2D, TimeGrid};
pub use problem::{DriftMode, HjbProblem, HjbProblem2D, IsaacsProblem};
pub use sup_solver::SolverOptions;
