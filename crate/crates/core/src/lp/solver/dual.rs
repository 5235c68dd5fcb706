//! Sparse revised dual simplex for `max cᵀx, Ax ≤ b, l ≤ x ≤ u`.
//!
//! Internally the problem is scaled, converted to `min −cᵀx` and given one
//! slack per row (`Ax + s = b`, `s ≥ 0`). The all-slack basis is dual
//! feasible as soon as every variable with a nonzero cost has the bound its
//! cost pushes it towards; missing bounds are replaced by large artificial
//! ones and a final solution resting on one is reported as unbounded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dualize::dualize;
use super::lu::{BasisFactor, SparseCol};
use super::presolve::{merge_tied_columns, Presolve};
use super::{Solution, SolverConfig, Status};
use crate::lp::check::check_solution;
use crate::lp::model::LinearProgram;

/// Smallest |α_rj| accepted as a pivot in the ratio test.
const PIVOT_TOL: f64 = 1e-7;
/// Magnitude of artificial bounds, in scaled units.
const ARTIFICIAL_BOUND: f64 = 1e9;
/// Relative size of the initial cost perturbation.
const PERTURBATION: f64 = 1e-6;
const CLEANUP_ROUNDS: usize = 5;
/// Entries below this fraction of their row maximum do not influence scaling.
const SCALE_IGNORE: f64 = 1e-6;
const REFACTOR_EVERY: usize = 100;
/// Consecutive dual-degenerate iterations before switching to Bland's rule.
const STALL_LIMIT: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Scaled standard form with slacks appended after the structural columns.
struct Scaled {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    artificial: Vec<bool>,
}

fn pow2(x: f64) -> f64 {
    if x.is_finite() && x > 0.0 {
        2f64.powi(x.log2().round() as i32)
    } else {
        1.0
    }
}

impl Scaled {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars;

        // merge duplicate entries, drop zeros
        let mut rows: Vec<Vec<(usize, f64)>> = lp
            .rows
            .iter()
            .map(|r| {
                let mut c = r.coeffs.clone();
                c.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
                for (j, a) in c {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += a,
                        _ => merged.push((j, a)),
                    }
                }
                merged.retain(|e| e.1 != 0.0);
                merged
            })
            .collect();

        // relatively tiny entries would drag the geometric means around
        let row_max: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().fold(0.0_f64, |h, e| h.max(e.1.abs())))
            .collect();
        let significant = |i: usize, a: f64| a.abs() >= SCALE_IGNORE * row_max[i];
        let mut rs = vec![1.0; m];
        let mut cs = vec![1.0; n];
        for _ in 0..6 {
            for (i, row) in rows.iter().enumerate() {
                let (lo, hi) = row.iter().filter(|e| significant(i, e.1)).fold(
                    (f64::INFINITY, 0.0_f64),
                    |(lo, hi), &(j, a)| {
                        let v = (a * cs[j]).abs();
                        (lo.min(v), hi.max(v))
                    },
                );
                if hi > 0.0 {
                    rs[i] = 1.0 / (lo * hi).sqrt();
                }
            }
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![0.0_f64; n];
            for (i, row) in rows.iter().enumerate() {
                for &(j, a) in row.iter().filter(|e| significant(i, e.1)) {
                    let v = (a * rs[i]).abs();
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            for j in 0..n {
                if hi[j] > 0.0 {
                    cs[j] = 1.0 / (lo[j] * hi[j]).sqrt();
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let hi = row
                .iter()
                .fold(0.0_f64, |h, &(j, a)| h.max((a * cs[j]).abs()));
            if hi > 0.0 {
                rs[i] = 1.0 / hi;
            }
        }
        let rs: Vec<f64> = rs.into_iter().map(pow2).collect();
        let cs: Vec<f64> = cs.into_iter().map(pow2).collect();
        drop(row_max);

        for (i, row) in rows.iter_mut().enumerate() {
            for e in row.iter_mut() {
                e.1 *= rs[i] * cs[e.0];
            }
        }

        let mut row_start = Vec::with_capacity(m + 1);
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        row_start.push(0);
        let mut col_count = vec![0usize; n];
        for row in &rows {
            for &(j, a) in row {
                row_idx.push(j);
                row_val.push(a);
                col_count[j] += 1;
            }
            row_start.push(row_idx.len());
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + col_count[j];
        }
        let mut fill = col_start.clone();
        let mut col_idx = vec![0usize; row_idx.len()];
        let mut col_val = vec![0.0; row_idx.len()];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                col_idx[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut cost = vec![0.0; n + m];
        for &(j, c) in &lp.objective {
            cost[j] -= c * cs[j];
        }
        let mut lower = vec![0.0; n + m];
        let mut upper = vec![f64::INFINITY; n + m];
        let mut artificial = vec![false; n + m];
        for j in 0..n {
            let (lo, hi) = lp.var_bounds[j];
            lower[j] = lo / cs[j];
            upper[j] = hi / cs[j];
            if cost[j] < 0.0 && upper[j] == f64::INFINITY {
                upper[j] = ARTIFICIAL_BOUND;
                artificial[j] = true;
            }
            if cost[j] > 0.0 && lower[j] == f64::NEG_INFINITY {
                lower[j] = -ARTIFICIAL_BOUND;
                artificial[j] = true;
            }
        }
        let b = lp.rows.iter().zip(&rs).map(|(r, s)| r.rhs * s).collect();

        Self {
            m,
            n,
            col_start,
            col_idx,
            col_val,
            row_start,
            row_idx,
            row_val,
            cost,
            lower,
            upper,
            b,
            row_scale: rs,
            col_scale: cs,
            artificial,
        }
    }

    fn column(&self, j: usize) -> SparseCol {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            SparseCol {
                idx: self.col_idx[r.clone()].to_vec(),
                val: self.col_val[r].to_vec(),
            }
        } else {
            SparseCol::unit(j - self.n)
        }
    }

    /// `dense += scale · a_j`
    fn add_column(&self, j: usize, scale: f64, dense: &mut [f64]) {
        if j < self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                dense[self.col_idx[e]] += scale * self.col_val[e];
            }
        } else {
            dense[j - self.n] += scale;
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|e| y[self.col_idx[e]] * self.col_val[e])
                .sum()
        } else {
            y[j - self.n]
        }
    }
}

struct DualSimplex<'a> {
    p: Scaled,
    cfg: &'a SolverConfig,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    d: Vec<f64>,
    weights: Vec<f64>,
    factor: BasisFactor,
    cost_shift: Vec<(usize, f64)>,
    iters: usize,
    /// Candidates rejected for the current leaving row.
    excluded: Vec<usize>,
    /// Rows skipped by pricing until the next scheduled refactorization.
    taboo: Vec<bool>,
    feas_tol: f64,
    dual_tol: f64,
    // scratch
    row_alpha: Vec<f64>,
    row_touched: Vec<usize>,
    row_mark: Vec<bool>,
}

enum Step {
    Optimal,
    Infeasible,
    Continue,
    /// Row and column computations of the pivot element disagree.
    BadPivot {
        row: usize,
        col: usize,
    },
}

impl<'a> DualSimplex<'a> {
    fn new(p: Scaled, cfg: &'a SolverConfig) -> Self {
        let m = p.m;
        let n = p.n;
        let mut state = vec![VarState::Lower; n + m];
        let mut x = vec![0.0; n + m];
        let d = p.cost.clone();
        for j in 0..n {
            let (lo, hi) = (p.lower[j], p.upper[j]);
            state[j] = if d[j] > 0.0 || (d[j] == 0.0 && lo.is_finite()) {
                VarState::Lower
            } else if hi.is_finite() {
                VarState::Upper
            } else {
                VarState::Zero
            };
            x[j] = match state[j] {
                VarState::Lower => lo,
                VarState::Upper => hi,
                _ => 0.0,
            };
        }
        let basis: Vec<usize> = (n..n + m).collect();
        for (pos, &j) in basis.iter().enumerate() {
            state[j] = VarState::Basic(pos);
        }
        let cols: Vec<SparseCol> = basis.iter().map(|&j| p.column(j)).collect();
        let (factor, _) = BasisFactor::factorize(m, &cols);
        let mut s = Self {
            cfg,
            basis,
            state,
            x,
            d,
            weights: vec![1.0; m],
            factor,
            cost_shift: Vec::new(),
            iters: 0,
            excluded: Vec::new(),
            taboo: vec![false; m],
            feas_tol: cfg.feas_tol * 0.1,
            dual_tol: cfg.opt_tol,
            row_alpha: vec![0.0; n + m],
            row_touched: Vec::new(),
            row_mark: vec![false; n + m],
            p,
        };
        s.compute_primal();
        s
    }

    fn refactor(&mut self) {
        let cols: Vec<SparseCol> = self.basis.iter().map(|&j| self.p.column(j)).collect();
        let (factor, repairs) = BasisFactor::factorize(self.p.m, &cols);
        self.factor = factor;
        if !repairs.is_empty() {
            for (pos, row) in repairs {
                let out = self.basis[pos];
                let slack = self.p.n + row;
                // the displaced variable rests at its nearest finite bound
                let (lo, hi) = (self.p.lower[out], self.p.upper[out]);
                let v = self.x[out];
                self.state[out] = if lo.is_finite() && (!hi.is_finite() || v - lo <= hi - v) {
                    self.x[out] = lo;
                    VarState::Lower
                } else if hi.is_finite() {
                    self.x[out] = hi;
                    VarState::Upper
                } else {
                    self.x[out] = 0.0;
                    VarState::Zero
                };
                self.basis[pos] = slack;
                self.state[slack] = VarState::Basic(pos);
            }
            self.weights.iter_mut().for_each(|w| *w = 1.0);
        }
        self.compute_primal();
        self.compute_duals();
    }

    fn compute_primal(&mut self) {
        let m = self.p.m;
        let mut rhs = self.p.b.clone();
        for j in 0..self.p.n + m {
            match self.state[j] {
                VarState::Basic(_) => {}
                _ => {
                    let v = self.x[j];
                    if v != 0.0 {
                        self.p.add_column(j, -v, &mut rhs);
                    }
                }
            }
        }
        self.factor.ftran(&mut rhs);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
    }

    fn duals(&mut self) -> Vec<f64> {
        let mut h: Vec<f64> = self.basis.iter().map(|&j| self.p.cost[j]).collect();
        self.factor.btran(&mut h);
        h
    }

    fn compute_duals(&mut self) {
        let y = self.duals();
        for j in 0..self.p.n + self.p.m {
            self.d[j] = match self.state[j] {
                VarState::Basic(_) => 0.0,
                _ => self.p.cost[j] - self.p.dot_column(j, &y),
            };
        }
    }

    /// Restores dual feasibility after recomputation: boxed variables flip
    /// to the other bound, the rest get a cost shift.
    fn fix_dual_infeasibilities(&mut self) {
        let mut flipped = false;
        for j in 0..self.p.n + self.p.m {
            let dj = self.d[j];
            let (lo, hi) = (self.p.lower[j], self.p.upper[j]);
            match self.state[j] {
                VarState::Lower if dj < -self.dual_tol => {
                    if hi.is_finite() {
                        self.state[j] = VarState::Upper;
                        self.x[j] = hi;
                        flipped = true;
                    } else {
                        self.shift(j);
                    }
                }
                VarState::Upper if dj > self.dual_tol => {
                    if lo.is_finite() {
                        self.state[j] = VarState::Lower;
                        self.x[j] = lo;
                        flipped = true;
                    } else {
                        self.shift(j);
                    }
                }
                VarState::Zero if dj.abs() > self.dual_tol => self.shift(j),
                _ => {}
            }
        }
        if flipped {
            self.compute_primal();
        }
    }

    fn shift(&mut self, j: usize) {
        let dj = self.d[j];
        self.p.cost[j] -= dj;
        self.cost_shift.push((j, dj));
        self.d[j] = 0.0;
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.p.lower[j] - self.feas_tol {
            self.p.lower[j] - v
        } else if v > self.p.upper[j] + self.feas_tol {
            v - self.p.upper[j]
        } else {
            0.0
        }
    }

    fn choose_leaving(&self, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_score = 0.0;
        for (pos, &j) in self.basis.iter().enumerate() {
            let inf = self.infeasibility(j);
            if inf <= 0.0 || self.taboo[pos] {
                continue;
            }
            if bland {
                if best.is_none_or(|b: usize| j < self.basis[b]) {
                    best = Some(pos);
                }
            } else {
                let score = inf * inf / self.weights[pos];
                if score > best_score {
                    best_score = score;
                    best = Some(pos);
                }
            }
        }
        best
    }

    /// `row_alpha[j] = ρ · a_j` for nonbasic `j`; fills `row_touched`.
    fn compute_row(&mut self, rho: &[f64]) {
        for &j in &self.row_touched {
            self.row_alpha[j] = 0.0;
            self.row_mark[j] = false;
        }
        self.row_touched.clear();
        let n = self.p.n;
        for (i, &r) in rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for e in self.p.row_start[i]..self.p.row_start[i + 1] {
                let j = self.p.row_idx[e];
                if matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                if !self.row_mark[j] {
                    self.row_mark[j] = true;
                    self.row_touched.push(j);
                }
                self.row_alpha[j] += r * self.p.row_val[e];
            }
            let s = n + i;
            if !matches!(self.state[s], VarState::Basic(_)) {
                if !self.row_mark[s] {
                    self.row_mark[s] = true;
                    self.row_touched.push(s);
                }
                self.row_alpha[s] += r;
            }
        }
    }

    fn iterate(&mut self, bland: bool) -> (Step, bool) {
        let m = self.p.m;
        let Some(r) = self.choose_leaving(bland) else {
            return (Step::Optimal, false);
        };
        let p_var = self.basis[r];
        let below = self.x[p_var] < self.p.lower[p_var];
        let target = if below {
            self.p.lower[p_var]
        } else {
            self.p.upper[p_var]
        };
        let dir = if below { 1.0 } else { -1.0 };

        let mut rho = vec![0.0; m];
        rho[r] = 1.0;
        self.factor.btran(&mut rho);
        self.compute_row(&rho);

        // candidates: (var, ratio, |α̂|)
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        for &j in &self.row_touched {
            let a = dir * self.row_alpha[j];
            if a.abs() < PIVOT_TOL || self.excluded.contains(&j) {
                continue;
            }
            let dj = self.d[j];
            let ratio = match self.state[j] {
                VarState::Lower if a < 0.0 && self.p.lower[j] < self.p.upper[j] => dj.max(0.0) / -a,
                VarState::Upper if a > 0.0 && self.p.lower[j] < self.p.upper[j] => {
                    (-dj).max(0.0) / a
                }
                VarState::Zero => dj.abs() / a.abs(),
                _ => continue,
            };
            cands.push((j, ratio, a.abs()));
        }
        if cands.is_empty() {
            if !self.excluded.is_empty() {
                return (
                    Step::BadPivot {
                        row: r,
                        col: usize::MAX,
                    },
                    false,
                );
            }
            return (Step::Infeasible, false);
        }

        let mut flips: Vec<usize> = Vec::new();
        let entering;
        if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            let tie = min + 1e-12 * (1.0 + min);
            entering = cands
                .iter()
                .filter(|c| c.1 <= tie)
                .min_by_key(|c| c.0)
                .map(|c| c.0)
                .unwrap();
        } else {
            cands.sort_by(|a, b| a.1.total_cmp(&b.1));
            let mut slope = (self.x[p_var] - target).abs();
            let mut start = 0;
            let mut chosen = None;
            while start < cands.len() {
                // Harris bound over the remaining candidates
                let mut theta_max = f64::INFINITY;
                for c in &cands[start..] {
                    if c.1 > theta_max {
                        break;
                    }
                    theta_max = theta_max.min(c.1 + self.dual_tol / c.2);
                }
                let mut end = start;
                let mut range_sum = 0.0;
                while end < cands.len() && cands[end].1 <= theta_max {
                    let j = cands[end].0;
                    range_sum += cands[end].2 * (self.p.upper[j] - self.p.lower[j]);
                    end += 1;
                }
                if range_sum.is_finite() && slope - range_sum > 0.0 && end < cands.len() {
                    flips.extend(cands[start..end].iter().map(|c| c.0));
                    slope -= range_sum;
                    start = end;
                    continue;
                }
                let best = cands[start..end]
                    .iter()
                    .max_by(|a, b| a.2.total_cmp(&b.2))
                    .unwrap();
                chosen = Some(best.0);
                break;
            }
            entering = match chosen {
                Some(q) => q,
                None => return (Step::Infeasible, false),
            };
        }
        let q = entering;

        let mut alpha_q = vec![0.0; m];
        self.p.add_column(q, 1.0, &mut alpha_q);
        self.factor.ftran(&mut alpha_q);
        let arq = alpha_q[r];
        let row_arq = self.row_alpha[q];
        if arq.abs() < 1e-11 || (arq - row_arq).abs() > 1e-7 * (1.0 + arq.abs()) {
            return (Step::BadPivot { row: r, col: q }, false);
        }

        // dual update
        let aq_hat = dir * row_arq;
        let theta_d = match self.state[q] {
            VarState::Lower | VarState::Upper | VarState::Zero => {
                let t = -self.d[q] / aq_hat;
                t.max(0.0)
            }
            VarState::Basic(_) => unreachable!(),
        };
        if theta_d != 0.0 {
            for &j in &self.row_touched {
                self.d[j] += theta_d * dir * self.row_alpha[j];
            }
        }
        self.d[q] = 0.0;
        self.d[p_var] = dir * theta_d;

        // bound flips
        if !flips.is_empty() {
            let mut delta = vec![0.0; m];
            for &j in &flips {
                let (lo, hi) = (self.p.lower[j], self.p.upper[j]);
                let (from, to, st) = match self.state[j] {
                    VarState::Lower => (lo, hi, VarState::Upper),
                    VarState::Upper => (hi, lo, VarState::Lower),
                    _ => unreachable!(),
                };
                self.state[j] = st;
                self.x[j] = to;
                self.p.add_column(j, to - from, &mut delta);
            }
            self.factor.ftran(&mut delta);
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= delta[pos];
            }
        }

        // primal step
        let theta_p = (self.x[p_var] - target) / arq;
        for (pos, &j) in self.basis.iter().enumerate() {
            if alpha_q[pos] != 0.0 {
                self.x[j] -= theta_p * alpha_q[pos];
            }
        }
        self.x[q] += theta_p;
        self.x[p_var] = target;

        // steepest-edge weights
        if !bland {
            let w_r = rho.iter().map(|v| v * v).sum::<f64>();
            let mut tau = rho;
            self.factor.ftran(&mut tau);
            for pos in 0..m {
                if pos == r || alpha_q[pos] == 0.0 {
                    continue;
                }
                let k = alpha_q[pos] / arq;
                let w = self.weights[pos] + k * (k * w_r - 2.0 * tau[pos]);
                self.weights[pos] = w.max(k * k).max(1e-8);
            }
            self.weights[r] = (w_r / (arq * arq)).max(1e-8);
        } else {
            self.weights[r] = 1.0;
        }

        self.state[p_var] = if below {
            VarState::Lower
        } else {
            VarState::Upper
        };
        self.state[q] = VarState::Basic(r);
        self.basis[r] = q;
        self.factor.push_eta(r, &alpha_q);
        self.excluded.clear();
        (Step::Continue, theta_d > 0.0)
    }

    fn run(&mut self) -> Status {
        self.compute_duals();
        self.fix_dual_infeasibilities();
        let mut stalled = 0usize;
        let mut fresh = true;
        let mut retries = 0usize;
        loop {
            if self.iters >= self.cfg.max_iters {
                return Status::IterationLimit;
            }
            if self.factor.num_etas() >= REFACTOR_EVERY
                || self.factor.eta_nnz() > self.factor.factor_nnz()
            {
                self.refactor();
                self.fix_dual_infeasibilities();
                self.taboo.iter_mut().for_each(|t| *t = false);
                fresh = true;
            }
            let bland = stalled > STALL_LIMIT;
            let (step, progress) = self.iterate(bland);
            match step {
                Step::Optimal | Step::Infeasible if !fresh => {
                    self.refactor();
                    self.fix_dual_infeasibilities();
                    fresh = true;
                }
                Step::Optimal => {
                    if self.taboo.iter().any(|&t| t) {
                        retries += 1;
                        if retries > 10 {
                            return Status::NumericalFailure;
                        }
                        self.taboo.iter_mut().for_each(|t| *t = false);
                        continue;
                    }
                    return Status::Optimal;
                }
                Step::Infeasible => return Status::Infeasible,
                Step::BadPivot { row, col } => {
                    if !fresh {
                        self.refactor();
                        self.fix_dual_infeasibilities();
                        fresh = true;
                    } else if col == usize::MAX || self.excluded.len() >= 3 {
                        self.excluded.clear();
                        self.taboo[row] = true;
                    } else {
                        self.excluded.push(col);
                    }
                }
                Step::Continue => {
                    self.iters += 1;
                    fresh = false;
                    if progress {
                        stalled = 0;
                    } else {
                        stalled += 1;
                    }
                }
            }
        }
    }

    /// Primal simplex on a primal feasible basis, used to remove the dual
    /// infeasibilities left behind when perturbations and shifts are dropped.
    fn primal_cleanup(&mut self) -> Status {
        let m = self.p.m;
        loop {
            if self.iters >= self.cfg.max_iters {
                return Status::IterationLimit;
            }
            if self.factor.num_etas() >= REFACTOR_EVERY
                || self.factor.eta_nnz() > self.factor.factor_nnz()
            {
                self.refactor();
            } else {
                self.compute_duals();
            }
            let mut entering = None;
            let mut best = self.dual_tol;
            for j in 0..self.p.n + m {
                let dj = self.d[j];
                let viol = match self.state[j] {
                    VarState::Lower if self.p.lower[j] < self.p.upper[j] => -dj,
                    VarState::Upper if self.p.lower[j] < self.p.upper[j] => dj,
                    VarState::Zero => dj.abs(),
                    _ => 0.0,
                };
                if viol > best {
                    best = viol;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Status::Optimal;
            };
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };
            let mut alpha_q = vec![0.0; m];
            self.p.add_column(q, 1.0, &mut alpha_q);
            self.factor.ftran(&mut alpha_q);

            // x_B moves by −dir·θ·α_q; Harris pass with relaxed bounds first
            let tol = self.feas_tol;
            let step_to = |bound: f64, x: f64, rate: f64| (x - bound) / rate;
            let mut theta_max = self.p.upper[q] - self.p.lower[q];
            for (pos, &j) in self.basis.iter().enumerate() {
                let rate = dir * alpha_q[pos];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let t = if rate > 0.0 {
                    step_to(self.p.lower[j] - tol, self.x[j], rate)
                } else {
                    step_to(self.p.upper[j] + tol, self.x[j], rate)
                };
                theta_max = theta_max.min(t);
            }
            if theta_max == f64::INFINITY {
                return Status::Unbounded;
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut best_rate = 0.0;
            for (pos, &j) in self.basis.iter().enumerate() {
                let rate = dir * alpha_q[pos];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let t = if rate > 0.0 {
                    step_to(self.p.lower[j], self.x[j], rate)
                } else {
                    step_to(self.p.upper[j], self.x[j], rate)
                };
                if t <= theta_max && rate.abs() > best_rate {
                    best_rate = rate.abs();
                    leave = Some((pos, t.max(0.0)));
                }
            }
            let flip = self.p.upper[q] - self.p.lower[q];
            let theta = match leave {
                Some((_, t)) if t < flip => t,
                _ => flip,
            };
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= dir * theta * alpha_q[pos];
            }
            self.x[q] += dir * theta;
            self.iters += 1;
            match leave {
                Some((r, t)) if t < flip => {
                    let p_var = self.basis[r];
                    let rate = dir * alpha_q[r];
                    let (bound, st) = if rate > 0.0 {
                        (self.p.lower[p_var], VarState::Lower)
                    } else {
                        (self.p.upper[p_var], VarState::Upper)
                    };
                    self.x[p_var] = bound;
                    self.state[p_var] = if bound.is_finite() {
                        st
                    } else {
                        VarState::Zero
                    };
                    self.state[q] = VarState::Basic(r);
                    self.basis[r] = q;
                    self.factor.push_eta(r, &alpha_q);
                    self.weights[r] = 1.0;
                }
                _ => {
                    self.state[q] = if dir > 0.0 {
                        VarState::Upper
                    } else {
                        VarState::Lower
                    };
                    self.x[q] = if dir > 0.0 {
                        self.p.upper[q]
                    } else {
                        self.p.lower[q]
                    };
                }
            }
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&j| self.infeasibility(j) > 0.0)
    }

    /// Adds small random cost perturbations to boxed structural columns in
    /// the direction that keeps them dual feasible.
    fn perturb(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for j in 0..self.p.n {
            let (lo, hi) = (self.p.lower[j], self.p.upper[j]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                continue;
            }
            let c = self.p.cost[j];
            let xi = PERTURBATION * (1.0 + c.abs()) * (1.0 + rng.random::<f64>());
            match self.state[j] {
                VarState::Lower => self.p.cost[j] += xi,
                VarState::Upper => self.p.cost[j] -= xi,
                _ => {}
            }
        }
    }

    /// Puts the true costs back; returns true if the basis stays dual
    /// feasible.
    fn restore_costs(&mut self, true_cost: &[f64]) -> bool {
        self.p.cost.copy_from_slice(true_cost);
        self.cost_shift.clear();
        self.compute_duals();
        (0..self.p.n + self.p.m).all(|j| {
            let dj = self.d[j];
            match self.state[j] {
                VarState::Lower => dj >= -self.dual_tol || self.p.lower[j] == self.p.upper[j],
                VarState::Upper => dj <= self.dual_tol || self.p.lower[j] == self.p.upper[j],
                VarState::Zero => dj.abs() <= self.dual_tol,
                VarState::Basic(_) => true,
            }
        })
    }
}

pub(super) fn solve(lp: &LinearProgram, cfg: &SolverConfig) -> Solution {
    match merge_tied_columns(lp) {
        Presolve::Unchanged => solve_reduced(lp, cfg),
        Presolve::Infeasible => Solution::failed(Status::Infeasible, lp.num_vars, 0),
        Presolve::Reduced(red) => {
            let sol = solve_reduced(&red.lp, cfg);
            if !sol.is_optimal() {
                return Solution::failed(sol.status, lp.num_vars, sol.iterations);
            }
            let values = red.expand(&sol.values);
            Solution {
                status: sol.status,
                objective: lp.objective_value(&values),
                values,
                iterations: sol.iterations,
            }
        }
    }
}

/// Tall programs are solved through their dual, which has one row per
/// column. Anything short of a certified optimum there falls back to the
/// direct solve.
fn solve_reduced(lp: &LinearProgram, cfg: &SolverConfig) -> Solution {
    if lp.rows.len() > lp.num_vars {
        let d = dualize(lp);
        let (dsol, multipliers) = solve_core(&d.lp, cfg);
        if dsol.is_optimal() {
            let values = d.primal_values(&multipliers);
            let objective = lp.objective_value(&values);
            let bound = d.primal_objective(dsol.objective);
            let feasible = check_solution(lp, &values).max() <= cfg.feas_tol;
            if feasible && (bound - objective).abs() <= cfg.opt_tol * (1.0 + objective.abs()) {
                return Solution {
                    status: Status::Optimal,
                    objective,
                    values,
                    iterations: dsol.iterations,
                };
            }
        }
    }
    solve_core(lp, cfg).0
}

/// Solves `lp` directly. Also returns the row multipliers of the max
/// problem (nonnegative, original units).
fn solve_core(lp: &LinearProgram, cfg: &SolverConfig) -> (Solution, Vec<f64>) {
    let n = lp.num_vars;
    if lp.rows.is_empty() {
        return (solve_bounds_only(lp), Vec::new());
    }
    let scaled = Scaled::new(lp);
    let true_cost = scaled.cost.clone();
    let mut ds = DualSimplex::new(scaled, cfg);
    ds.perturb();
    let mut status = ds.run();
    let mut rounds = 0;
    while status == Status::Optimal && !ds.restore_costs(&true_cost) {
        rounds += 1;
        if rounds > CLEANUP_ROUNDS {
            status = Status::NumericalFailure;
            break;
        }
        status = ds.primal_cleanup();
        if status == Status::Optimal {
            ds.refactor();
            if ds.primal_infeasible() {
                status = ds.run();
            }
        }
    }
    let iterations = ds.iters;
    if status != Status::Optimal {
        return (Solution::failed(status, n, iterations), Vec::new());
    }
    let y = ds.duals();
    let p = &ds.p;
    if (0..n).any(|j| p.artificial[j] && ds.x[j].abs() >= 0.5 * ARTIFICIAL_BOUND) {
        return (
            Solution::failed(Status::Unbounded, n, iterations),
            Vec::new(),
        );
    }
    let values: Vec<f64> = (0..n).map(|j| ds.x[j] * p.col_scale[j]).collect();
    let objective = lp.objective_value(&values);

    // Duality-gap certificate in the original units.
    let y_max: Vec<f64> = y
        .iter()
        .zip(&p.row_scale)
        .map(|(v, s)| (-v * s).max(0.0))
        .collect();
    let mut reduced = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    for &(j, c) in &lp.objective {
        reduced[j] += c;
        magnitude[j] += c.abs();
    }
    for (row, &yi) in lp.rows.iter().zip(&y_max) {
        if yi != 0.0 {
            for &(j, a) in &row.coeffs {
                reduced[j] -= yi * a;
                magnitude[j] += (yi * a).abs();
            }
        }
    }
    let mut dual_obj: f64 = lp.rows.iter().zip(&y_max).map(|(r, yi)| r.rhs * yi).sum();
    for j in 0..n {
        let rj = reduced[j];
        if rj == 0.0 {
            continue;
        }
        let (lo, hi) = lp.var_bounds[j];
        let bound = if rj > 0.0 { hi } else { lo };
        if bound.is_finite() {
            dual_obj += rj * bound;
        } else if rj.abs() <= cfg.opt_tol * (1.0 + magnitude[j]) {
            // roundoff on a column that sits away from its bound
            dual_obj += rj * values[j];
        } else {
            dual_obj = f64::INFINITY;
        }
    }
    let gap = dual_obj - objective;
    let status = if gap.abs() <= cfg.opt_tol * (1.0 + objective.abs()) {
        Status::Optimal
    } else {
        Status::NumericalFailure
    };
    let sol = Solution {
        status,
        objective,
        values,
        iterations,
    };
    (sol, y_max)
}

fn solve_bounds_only(lp: &LinearProgram) -> Solution {
    let mut c = vec![0.0; lp.num_vars];
    for &(j, v) in &lp.objective {
        c[j] += v;
    }
    let mut values = Vec::with_capacity(lp.num_vars);
    for (j, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
        let v = if c[j] > 0.0 {
            hi
        } else if c[j] < 0.0 || lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        };
        if !v.is_finite() {
            return Solution::failed(Status::Unbounded, lp.num_vars, 0);
        }
        values.push(v);
    }
    Solution {
        status: Status::Optimal,
        objective: lp.objective_value(&values),
        values,
        iterations: 0,
    }
}
