//! The dwell-time linear program: assembly, feasibility checks, solvers and
//! an LP-format dump for external solvers.

pub mod check;
pub mod model;
pub mod solver;

use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub use check::{check_solution, row_residuals, Residuals};
pub use model::{
    alpha_cap, assemble, row_count, trivial_feasible_point, LinearProgram, LpSkeleton, ModelError,
    Row, RowClass, VariableMap,
};
pub use solver::{solve, Backend, LpBackend, Solution, SolverConfig, Status};

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else if first {
        let _ = write!(out, " {coef} {name}");
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

impl LinearProgram {
    /// Renders the program in CPLEX LP format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("Maximize\n obj:");
        if self.objective.is_empty() {
            out.push_str(" 0 ");
            out.push_str(&self.var_name(0));
        }
        for (k, &(j, c)) in self.objective.iter().enumerate() {
            term(&mut out, k == 0, c, &self.var_name(j));
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let tag = match row.class {
                RowClass::Decay => "c2",
                RowClass::Compatibility => "c3",
                RowClass::General => "r",
            };
            let _ = write!(out, " {tag}_{i}:");
            for (k, &(j, a)) in row.coeffs.iter().enumerate() {
                term(&mut out, k == 0, a, &self.var_name(j));
            }
            let _ = writeln!(out, " <= {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            let name = self.var_name(j);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {lo} <= {name} <= {hi}");
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {lo}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {name} <= {hi}");
                }
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
            }
        }
        out.push_str("End\n");
        out
    }

    pub fn write_lp_format(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_lp_format())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_format_sections() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![(0, 1.0)];
        lp.var_bounds = vec![(f64::NEG_INFINITY, f64::INFINITY), (1.0, 2.0)];
        lp.add_row(vec![(0, 1.0), (1, -3.5)], 0.0, RowClass::Decay);
        let s = lp.to_lp_format();
        assert!(s.starts_with("Maximize\n obj: 1 "));
        assert!(s.contains("c2_0:") && s.contains(" - 3.5 "));
        assert!(s.contains(" free\n") && s.contains(" 1 <= "));
        assert!(s.ends_with("End\n"));
    }
}
