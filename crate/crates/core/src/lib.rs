//! Derivative-free trust-region optimization with underdetermined quadratic
//! interpolation models.
//!
//! Models are fitted either by minimizing the Frobenius norm of the model
//! Hessian or its entrywise l1 norm; the latter recovers sparse Hessians from
//! far fewer samples than determined interpolation needs. The crate also
//! contains the tooling used to check that claim experimentally (restricted
//! isometry constants, l1 recovery, randomized sparse-Hessian recovery) and a
//! benchmark harness producing performance profiles.
//!
//! Module map:
//!
//! * [`basis`]: canonical and hypercube-orthonormal quadratic bases, model calculus.
//! * [`fit`]: interpolation matrices, minimum Frobenius and minimum l1 fits.
//! * [`subsolvers`]: simplex LP solver, trust-region subproblem solver.
//! * [`driver`]: the trust-region method itself.
//! * [`recovery`]: compressed-sensing verification experiments.
//! * [`problems`]: test objectives with sparse Hessians.
//! * [`bench`]: benchmark runs, performance profiles, CSV output.

pub mod basis;
pub mod bench;
pub mod driver;
pub mod error;
pub mod fit;
pub mod jet;
pub mod problems;
pub mod recovery;
pub mod subsolvers;

pub use error::{Error, Result};
