//! Numerical workhorses: a dense simplex LP solver and a trust-region
//! subproblem solver.

mod lp;
mod trs;

pub use lp::{solve_lp, solve_lp_with_basis, LpProblem, LpSolution, LpStatus};
pub use trs::{solve_trs, TrsProblem, TrsSolution};
