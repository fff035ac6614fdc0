//! P2 vector / P1 scalar finite elements on triangles.

pub mod assembly;
pub mod element;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use assembly::{FemSpace, Loads, VectorField};
pub use element::{Material, P2Triangle};
pub use solver::{solve_spd, LinearSolverKind, SparseCholesky};
pub use sparse::CsrMatrix;
