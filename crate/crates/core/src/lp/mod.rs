//! Sparse bounded-variable linear programs in equality form.
//!
//! Problems are `min c^T x  s.t.  A x = b,  l <= x <= u`. Solutions carry the
//! equality duals `y` and reduced costs `d = c - A^T y`; the dual of a lower
//! bound is `max(d, 0)` and the dual of an upper bound is `max(-d, 0)`.

mod kkt;
mod lp_format;
pub mod lu;
mod simplex;

pub use kkt::{verify_kkt, KktReport};
pub use lp_format::write_lp_format;
pub use simplex::RevisedSimplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("triplet ({row}, {col}) is outside a {n_eq}x{n_vars} problem")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_eq: usize,
        n_vars: usize,
    },
    #[error("variable {0} has lower bound above its upper bound")]
    InvertedBounds(usize),
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("{what} has length {got}, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("basis factorization failed: {0}")]
    Numerical(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub n_vars: usize,
    pub n_eq: usize,
    pub cost: Vec<f64>,
    /// Coefficients as (row, column, value); duplicates are summed.
    pub eq_matrix: Vec<(usize, usize, f64)>,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(n_vars: usize, n_eq: usize) -> Self {
        LpProblem {
            n_vars,
            n_eq,
            cost: vec![0.0; n_vars],
            eq_matrix: Vec::new(),
            eq_rhs: vec![0.0; n_eq],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let len = |what, got, expected| {
            if got != expected {
                Err(LpError::Length { what, got, expected })
            } else {
                Ok(())
            }
        };
        len("cost", self.cost.len(), self.n_vars)?;
        len("lower", self.lower.len(), self.n_vars)?;
        len("upper", self.upper.len(), self.n_vars)?;
        len("eq_rhs", self.eq_rhs.len(), self.n_eq)?;
        for &(row, col, v) in &self.eq_matrix {
            if row >= self.n_eq || col >= self.n_vars {
                return Err(LpError::IndexOutOfRange {
                    row,
                    col,
                    n_eq: self.n_eq,
                    n_vars: self.n_vars,
                });
            }
            if !v.is_finite() {
                return Err(LpError::NonFinite("eq_matrix"));
            }
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("cost"));
        }
        if self.eq_rhs.iter().any(|b| !b.is_finite()) {
            return Err(LpError::NonFinite("eq_rhs"));
        }
        for j in 0..self.n_vars {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::NonFinite("bounds"));
            }
            if l > u {
                return Err(LpError::InvertedBounds(j));
            }
        }
        Ok(())
    }

    /// `A x` as a dense vector.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.n_eq];
        for &(r, c, v) in &self.eq_matrix {
            ax[r] += v * x[c];
        }
        ax
    }

    /// `c - A^T y` as a dense vector.
    pub fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let mut d = self.cost.clone();
        for &(r, c, v) in &self.eq_matrix {
            d[c] -= v * y[r];
        }
        d
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: Vec<f64>,
    pub iterations: usize,
    /// Solver effort proxy: iterations times equality rows.
    pub work: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotRule {
    /// Most negative reduced cost, falling back to Bland's rule after a run
    /// of degenerate pivots.
    Dantzig,
    /// Smallest eligible index throughout.
    Bland,
}

/// Starting basis suggestion: one basic column per equality row and the
/// columns that start nonbasic at their upper bound.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BasisHint {
    pub basic: Vec<usize>,
    pub at_upper: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iters: Option<usize>,
    pub pivot_rule: PivotRule,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub feas_tol: f64,
    /// Reduced-cost threshold for pricing.
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub hint: Option<BasisHint>,
    /// Secondary costs minimized over the optimal face. Selects one vertex
    /// among alternative optima without changing the objective value or the
    /// reported duals.
    pub tie_break: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: None,
            pivot_rule: PivotRule::Dantzig,
            bland_after: 50,
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 100,
            hint: None,
            tie_break: None,
        }
    }
}

/// A solver that can stand in for the built-in simplex.
pub trait LpBackend: Sync {
    fn solve(&self, lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, LpError>;
}

/// Solves with the built-in revised simplex.
pub fn solve(lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    RevisedSimplex.solve(lp, opts)
}

/// Activity tolerance for deciding whether a value sits on a bound.
pub fn at_bound(value: f64, bound: f64) -> bool {
    bound.is_finite() && (value - bound).abs() <= 1e-7 * bound.abs().max(1.0)
}
