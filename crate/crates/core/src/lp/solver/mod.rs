//! LP backends behind one interface.
//!
//! [`Backend::DualSimplex`] is the reference backend: a sparse revised dual
//! simplex with bounded variables, dual steepest-edge pricing, a
//! bound-flipping ratio test and a Bland fallback when it stalls.
//! [`Backend::DenseTableau`] is a small dense primal simplex kept as an
//! independent cross-check for modest problem sizes.

mod dual;
mod dualize;
mod lu;
mod presolve;
mod tableau;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::check::check_solution;
use super::model::LinearProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    /// The objective is unbounded above.
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration_limit",
            Status::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Backend {
    #[default]
    DualSimplex,
    DenseTableau,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dual-simplex" | "dual" => Ok(Backend::DualSimplex),
            "dense-tableau" | "tableau" => Ok(Backend::DenseTableau),
            other => Err(format!("unknown LP backend `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Primal feasibility tolerance on scaled row residuals and bounds.
    pub feas_tol: f64,
    /// Relative tolerance on the duality gap and reduced-cost signs.
    pub opt_tol: f64,
    pub max_iters: usize,
    pub backend: Backend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iters: 1_000_000,
            backend: Backend::DualSimplex,
        }
    }
}

impl SolverConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Objective value at `values`; the optimum when `status` is `Optimal`.
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub(crate) fn failed(status: Status, num_vars: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: vec![f64::NAN; num_vars],
            iterations,
        }
    }
}

/// Anything that can solve a [`LinearProgram`].
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram, cfg: &SolverConfig) -> Solution;
}

pub struct DualSimplexBackend;
pub struct DenseTableauBackend;

impl LpBackend for DualSimplexBackend {
    fn name(&self) -> &'static str {
        "dual-simplex"
    }
    fn solve(&self, lp: &LinearProgram, cfg: &SolverConfig) -> Solution {
        dual::solve(lp, cfg)
    }
}

impl LpBackend for DenseTableauBackend {
    fn name(&self) -> &'static str {
        "dense-tableau"
    }
    fn solve(&self, lp: &LinearProgram, cfg: &SolverConfig) -> Solution {
        tableau::solve(lp, cfg)
    }
}

pub fn backend(kind: Backend) -> &'static dyn LpBackend {
    match kind {
        Backend::DualSimplex => &DualSimplexBackend,
        Backend::DenseTableau => &DenseTableauBackend,
    }
}

/// Solves `lp` with the backend named in `cfg`.
///
/// An `Optimal` status is only returned after the point passes
/// [`check_solution`] at `cfg.feas_tol`; otherwise the status is downgraded
/// to `NumericalFailure`.
pub fn solve(lp: &LinearProgram, cfg: &SolverConfig) -> Solution {
    if lp.validate().is_err() {
        return Solution::failed(Status::NumericalFailure, lp.num_vars, 0);
    }
    let mut sol = backend(cfg.backend).solve(lp, cfg);
    if sol.status == Status::Optimal {
        let res = check_solution(lp, &sol.values);
        if !(res.max() <= cfg.feas_tol) {
            sol.status = Status::NumericalFailure;
        }
        sol.objective = lp.objective_value(&sol.values);
    }
    sol
}
