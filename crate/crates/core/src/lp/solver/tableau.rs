//! Dense two-phase primal simplex with Bland's rule.
//!
//! Variables are shifted onto `x' ≥ 0` (free ones split in two) and finite
//! upper bounds become explicit rows, so this is only meant for small LPs.

use super::{Solution, SolverConfig, Status};
use crate::lp::model::LinearProgram;

/// How an original variable is expressed through tableau columns.
enum Sub {
    /// `x = lo + t`
    Shift { col: usize, lo: f64 },
    /// `x = hi − t`
    Mirror { col: usize, hi: f64 },
    /// `x = t⁺ − t⁻`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost · t` over the current feasible basis. `allowed`
    /// masks columns that may enter.
    fn minimize(
        &mut self,
        cost: &[f64],
        allowed: &[bool],
        tol: f64,
        iters: &mut usize,
        max_iters: usize,
    ) -> Status {
        let m = self.t.len();
        let rhs = self.cols;
        loop {
            if *iters >= max_iters {
                return Status::IterationLimit;
            }
            // reduced costs d_j = c_j − c_B · column j
            let mut entering = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let dj = cost[j]
                    - (0..m)
                        .map(|i| cost[self.basis[i]] * self.t[i][j])
                        .sum::<f64>();
                if dj < -tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else {
                return Status::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][q];
                if a > tol {
                    let ratio = self.t[i][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Status::Unbounded;
            };
            self.pivot(r, q);
            *iters += 1;
        }
    }
}

pub(super) fn solve(lp: &LinearProgram, cfg: &SolverConfig) -> Solution {
    let n = lp.num_vars;
    let tol = 1e-9;

    let mut subs = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.var_bounds {
        if lo.is_finite() {
            subs.push(Sub::Shift { col: ncols, lo });
            if hi.is_finite() {
                upper_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            subs.push(Sub::Mirror { col: ncols, hi });
            ncols += 1;
        } else {
            subs.push(Sub::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }

    // rows over the substituted columns: Σ a t ≤ b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; ncols];
        let mut b = row.rhs;
        for &(j, v) in &row.coeffs {
            match subs[j] {
                Sub::Shift { col, lo } => {
                    a[col] += v;
                    b -= v * lo;
                }
                Sub::Mirror { col, hi } => {
                    a[col] -= v;
                    b -= v * hi;
                }
                Sub::Split { pos, neg } => {
                    a[pos] += v;
                    a[neg] -= v;
                }
            }
        }
        rows.push((a, b));
    }
    for &(col, ub) in &upper_rows {
        let mut a = vec![0.0; ncols];
        a[col] = 1.0;
        rows.push((a, ub));
    }

    let m = rows.len();
    let num_art = rows.iter().filter(|r| r.1 < 0.0).count();
    let slack0 = ncols;
    let art0 = ncols + m;
    let cols = art0 + num_art;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut next_art = art0;
    for (i, (a, b)) in rows.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for (k, v) in a.iter().enumerate() {
            t[i][k] = sign * v;
        }
        t[i][slack0 + i] = sign;
        t[i][cols] = sign * b;
        if sign < 0.0 {
            t[i][next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack0 + i;
        }
    }
    let mut tab = Tableau { t, basis, cols };
    let mut iters = 0;

    if num_art > 0 {
        let mut cost1 = vec![0.0; cols];
        for c in cost1.iter_mut().skip(art0) {
            *c = 1.0;
        }
        let allowed = vec![true; cols];
        let st = tab.minimize(&cost1, &allowed, tol, &mut iters, cfg.max_iters);
        if st != Status::Optimal {
            return Solution::failed(st, n, iters);
        }
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= art0)
            .map(|i| tab.t[i][cols])
            .sum();
        if infeas > cfg.feas_tol.max(1e-9) * (1.0 + m as f64) {
            return Solution::failed(Status::Infeasible, n, iters);
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if tab.basis[i] >= art0 {
                if let Some(q) =
                    (0..art0).find(|&j| tab.t[i][j].abs() > tol && !tab.basis.contains(&j))
                {
                    tab.pivot(i, q);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; cols];
    for &(j, c) in &lp.objective {
        match subs[j] {
            Sub::Shift { col, .. } => cost2[col] -= c,
            Sub::Mirror { col, .. } => cost2[col] += c,
            Sub::Split { pos, neg } => {
                cost2[pos] -= c;
                cost2[neg] += c;
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < art0).collect();
    let st = tab.minimize(&cost2, &allowed, tol, &mut iters, cfg.max_iters);
    if st != Status::Optimal {
        return Solution::failed(st, n, iters);
    }

    let mut tv = vec![0.0; cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        tv[b] = tab.t[i][cols];
    }
    let values: Vec<f64> = subs
        .iter()
        .map(|s| match *s {
            Sub::Shift { col, lo } => lo + tv[col],
            Sub::Mirror { col, hi } => hi - tv[col],
            Sub::Split { pos, neg } => tv[pos] - tv[neg],
        })
        .collect();
    Solution {
        status: Status::Optimal,
        objective: lp.objective_value(&values),
        values,
        iterations: iters,
    }
}
