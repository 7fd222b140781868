//! A small LP toolkit: problem/solution types, a dense two-phase revised
//! simplex, and the factorization helpers it shares with the rebate QP.
//!
//! Everything solves the form `min c'x  s.t.  A x {>=,<=,=} b,  x >= 0`.
//! Duals follow that orientation: at optimality a `>=` row has a
//! nonnegative dual, a `<=` row a nonpositive one, and an `=` row is free.

pub mod dense;
mod simplex;

pub use simplex::DenseSimplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Ge,
    Le,
    Eq,
}

/// One constraint row; `coeffs` is sparse `(var, value)` with no duplicate
/// vars.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> LinearProgram {
        LinearProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, v)| j < self.n_vars && v.is_finite()));
        self.rows.push(Row { coeffs, sense, rhs });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Identity of a basic variable, stable across re-solves: structural vars
/// by column index, slack/artificial vars by the row they belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisVar {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; NaN unless status is Optimal (best effort at the
    /// iteration limit).
    pub objective: f64,
    /// Structural variable values.
    pub primal: Vec<f64>,
    /// One dual per row, in the orientation described at module level.
    pub duals: Vec<f64>,
    /// When unbounded: structural variables with nonzero component in the
    /// improving ray. Empty otherwise.
    pub ray: Vec<usize>,
    /// Optimal basis, one entry per row; feed back in as a warm start.
    pub basis: Vec<BasisVar>,
    pub iterations: usize,
}

pub trait LinearSolver {
    /// Solve, optionally warm-starting from a previous basis. An unusable
    /// warm basis (stale indices, singular, infeasible) falls back to a
    /// cold start rather than failing.
    fn solve(&self, lp: &LinearProgram, warm: Option<&[BasisVar]>) -> LpSolution;
}
