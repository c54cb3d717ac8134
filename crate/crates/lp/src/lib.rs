//! Small dense linear and mixed-integer programming engine.
//!
//! The LP solver is a bounded revised simplex (primal with composite phase 1,
//! dual simplex for warm starts) over an explicit basis inverse. The MIP solver
//! is a best-bound branch-and-bound on top of it. Everything is deterministic
//! for fixed inputs.

mod mip;
mod model;
mod mps;
mod simplex;

pub use mip::{solve_mip, MipOptions, MipSolution, MipStatus};
pub use model::{ColId, LinearProgram, MipModel, RowId, Sense};
pub use mps::{write_mps, write_mps_string};
pub use simplex::{solve_lp, solve_lp_warm, Basis, LpSolution, LpStatus, VarStatus};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row {0} does not exist")]
    UnknownRow(usize),
    #[error("column {0} does not exist")]
    UnknownColumn(usize),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Numerical tolerances shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal bound and row violation accepted as feasible.
    pub feasibility: f64,
    /// Bound on the primal/dual objective difference at optimality, relative to `1 + |obj|`.
    pub duality: f64,
    /// Distance from the nearest integer accepted as integral.
    pub integrality: f64,
    /// Reduced cost magnitude treated as zero during pricing.
    pub optimality: f64,
    /// Smallest pivot element accepted.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            duality: 1e-6,
            integrality: 1e-6,
            optimality: 1e-9,
            pivot: 1e-9,
        }
    }
}

/// Solver abstraction used by the column generation layers.
pub trait Backend: Send + Sync {
    fn solve_lp(&self, lp: &LinearProgram, warm: Option<&Basis>) -> Result<LpSolution, LpError>;
    fn solve_mip(&self, mip: &MipModel, options: &MipOptions) -> Result<MipSolution, LpError>;
}

/// The bundled simplex / branch-and-bound engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct BundledSolver {
    pub tolerances: Tolerances,
}

impl Backend for BundledSolver {
    fn solve_lp(&self, lp: &LinearProgram, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
        solve_lp_warm(lp, warm, &self.tolerances)
    }

    fn solve_mip(&self, mip: &MipModel, options: &MipOptions) -> Result<MipSolution, LpError> {
        let mut options = options.clone();
        options.tolerances = self.tolerances;
        solve_mip(mip, &options)
    }
}
