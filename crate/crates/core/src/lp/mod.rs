//! Linear and mixed-binary programming.
//!
//! Every optimisation model in the crate is assembled as a [`LinearProgram`]
//! and handed to an [`LpEngine`]. [`SimplexEngine`] is the built-in engine: a
//! dense bounded-variable simplex (primal with a composite phase one, dual
//! for warm starts) plus best-bound branch-and-bound over the binaries.
//!
//! Dual sign convention (minimisation): a `>=` row has a multiplier `>= 0`, a
//! `<=` row has a multiplier `<= 0`, equality multipliers are free. With that
//! convention `objective = sum(dual * rhs) + sum(reduced_cost * bound)` at an
//! optimum.

mod lp_format;
mod milp;
mod simplex;

pub use lp_format::write_lp;
pub use milp::{branch_and_bound, MilpOptions};

use crate::error::{Result, TepError};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row<T> {
    pub name: String,
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// `min c'x + offset` subject to rows and column bounds. Columns flagged
/// binary are restricted to {0, 1} by [`LpEngine::solve_milp`] and relaxed to
/// [0, 1] by [`LpEngine::solve_lp`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub offset: T,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub binary: Vec<bool>,
    pub col_names: Vec<String>,
    pub rows: Vec<Row<T>>,
}

impl<T: Real> LinearProgram<T> {
    pub fn new() -> Self {
        LinearProgram {
            objective: Vec::new(),
            offset: T::zero(),
            lower: Vec::new(),
            upper: Vec::new(),
            binary: Vec::new(),
            col_names: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: T, upper: T, cost: T) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.binary.push(false);
        self.col_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_free(&mut self, name: impl Into<String>, cost: T) -> usize {
        self.add_var(name, T::neg_infinity(), T::infinity(), cost)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: T) -> usize {
        let j = self.add_var(name, T::zero(), T::one(), cost);
        self.binary[j] = true;
        j
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) -> usize {
        self.rows.push(Row { name: name.into(), coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub fn num_binaries(&self) -> usize {
        self.binary.iter().filter(|b| **b).count()
    }

    /// Objective value of `x`, including the constant offset.
    pub fn evaluate(&self, x: &[T]) -> T {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| *c * *v).sum::<T>()
    }

    pub fn row_activity(&self, row: usize, x: &[T]) -> T {
        self.rows[row].coeffs.iter().map(|(j, a)| *a * x[*j]).sum()
    }

    /// Largest violation of any row or bound at `x`, scaled by `1 + |rhs|`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (j, v) in x.iter().enumerate() {
            let lo = (self.lower[j] - *v) / (T::one() + self.lower[j].abs());
            let hi = (*v - self.upper[j]) / (T::one() + self.upper[j].abs());
            worst = worst.max(lo).max(hi);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(i, x);
            let scale = T::one() + row.rhs.abs();
            let viol = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        worst
    }

    /// Structural checks: index ranges, bound order, binary bounds.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.binary.len() != n {
            return Err(TepError::Solver("column arrays have inconsistent lengths".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(TepError::Solver(format!("column {} has bounds [{}, {}]", j, self.lower[j], self.upper[j])));
            }
            if self.binary[j] && (self.lower[j] < T::zero() || self.upper[j] > T::one()) {
                return Err(TepError::Solver(format!("binary column {j} has bounds outside [0, 1]")));
            }
            if !self.objective[j].is_finite() {
                return Err(TepError::Solver(format!("column {j} has a non-finite cost")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some((j, _)) = row.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(TepError::Solver(format!("row {i} references column {j} of {n}")));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                return Err(TepError::Solver(format!("row {i} has non-finite data")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivoting could not make progress; returned rather than guessed.
    NumericalFailure,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub objective: T,
    pub primal: Vec<T>,
    /// One multiplier per row, in the module's sign convention.
    pub duals: Vec<T>,
    /// Reduced cost per column.
    pub reduced_costs: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn failed(status: LpStatus, lp: &LinearProgram<T>) -> Self {
        LpSolution {
            status,
            objective: T::nan(),
            primal: vec![T::zero(); lp.num_vars()],
            duals: vec![T::zero(); lp.num_rows()],
            reduced_costs: vec![T::zero(); lp.num_vars()],
            iterations: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit hit; the incumbent (if any) is returned with its gap.
    NodeLimit,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpSolution<T> {
    pub status: MilpStatus,
    pub primal: Vec<T>,
    pub objective: T,
    pub bound: T,
    pub gap: T,
    pub nodes: usize,
    /// Incumbent objective each time it improved.
    pub incumbent_history: Vec<T>,
}

impl<T: Real> MilpSolution<T> {
    pub fn has_incumbent(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::NodeLimit) && self.objective.is_finite()
    }
}

/// The solver seam. Everything upstream talks to this trait, so an external
/// solver can stand in for [`SimplexEngine`] without touching the models.
pub trait LpEngine<T: Real>: Sync {
    fn solve_lp(&self, lp: &LinearProgram<T>) -> LpSolution<T>;

    fn solve_milp(&self, lp: &LinearProgram<T>, gap_tol: T) -> MilpSolution<T>;

    /// Like [`solve_milp`](Self::solve_milp), discarding nodes whose bound
    /// exceeds `cutoff`.
    fn solve_milp_with_cutoff(&self, lp: &LinearProgram<T>, gap_tol: T, cutoff: Option<T>) -> MilpSolution<T> {
        let _ = cutoff;
        self.solve_milp(lp, gap_tol)
    }
}

#[derive(Clone, Debug)]
pub struct SimplexEngine {
    /// Simplex iteration cap per LP; `None` scales with problem size.
    pub max_iterations: Option<usize>,
    pub node_limit: usize,
    /// Upper bound on tableau entries kept alive for warm-starting nodes.
    pub warm_start_entries: usize,
}

impl Default for SimplexEngine {
    fn default() -> Self {
        SimplexEngine { max_iterations: None, node_limit: 200_000, warm_start_entries: 40_000_000 }
    }
}

impl<T: Real> LpEngine<T> for SimplexEngine {
    fn solve_lp(&self, lp: &LinearProgram<T>) -> LpSolution<T> {
        if lp.validate().is_err() {
            return LpSolution::failed(LpStatus::NumericalFailure, lp);
        }
        let mut tab = simplex::Tableau::new(lp);
        let status = tab.solve(self.max_iterations);
        tab.solution(status)
    }

    fn solve_milp(&self, lp: &LinearProgram<T>, gap_tol: T) -> MilpSolution<T> {
        self.solve_milp_with_cutoff(lp, gap_tol, None)
    }

    fn solve_milp_with_cutoff(&self, lp: &LinearProgram<T>, gap_tol: T, cutoff: Option<T>) -> MilpSolution<T> {
        let opts = MilpOptions {
            gap_tol,
            node_limit: self.node_limit,
            cutoff,
            max_iterations: self.max_iterations,
            warm_start_entries: self.warm_start_entries,
        };
        branch_and_bound(lp, &opts)
    }
}

#[cfg(test)]
mod tests;
