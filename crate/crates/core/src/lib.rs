//! Numerical laboratory for Hamilton-Jacobi equations on bounded domains.
//!
//! The crate time-marches `u_t + H(x, Du) = 0` with oblique-derivative,
//! state-constraint and viscosity-Dirichlet boundary conditions using a
//! monotone explicit scheme, computes the additive eigenvalue of the
//! stationary problem, and audits the large-time behaviour of solutions:
//! asymptotic monotonicity diagnostics, representation formulas for the
//! limiting profiles and sampled checks of the structural hypotheses on `H`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod assumptions;
pub mod asymptotics;
pub mod ergodic;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
mod linalg;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{BoundaryNode, Grid, ObliqueCheck, ObliqueField, Side};
pub use hamiltonian::{FluxParams, Hamiltonian, Kinetic, Sampling};
pub use solver::{BoundaryCondition, DirichletData, EvolutionState, Scheme, SolverConfig};
