//! Non-negative finite element solutions of fast bimolecular
//! diffusion–reaction systems.
//!
//! The reaction `n_A A + n_B B → n_C C` is decoupled through two invariants
//! that satisfy linear anisotropic diffusion equations. Each invariant is
//! discretized with bilinear/linear elements and solved either as a plain
//! Galerkin system, a clipped Galerkin system, or a box-constrained convex
//! quadratic program whose solution respects the physical bounds.

pub mod analysis;
pub mod assembly;
pub mod benchmarks;
pub mod boxqp;
pub mod cli;
pub mod cholesky;
pub mod error;
pub mod fem;
pub mod fields;
pub mod io;
pub mod mesh;
pub mod reaction;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use fields::{ScalarField, Tensor2, TensorField};
pub use mesh::{generate_structured, BcRole, ElementKind, Mesh};
pub use reaction::{recover_species, run_steady, run_transient, ProblemSpec, RunOptions, Stoichiometry};
pub use solvers::{Bounds, Formulation, NodalField, Quantity};
pub use sparse::CsrMatrix;
