//! Second-order cone programs: modelling layer and an embedded interior-point solver.

pub mod affine;
pub mod cones;
pub mod program;
pub mod solver;

pub use affine::Affine;
pub use program::{BlockRef, ConeProgram, StandardForm};
pub use solver::{solve, solve_with, ConeSolution, KktMethod, SolverSettings, Status};
