//! LP dual of `max cᵀx, Ax ≤ b, l ≤ x ≤ u` in the same row form.
//!
//! Each variable is moved onto `x' ≥ 0` (shifted by a finite lower bound,
//! mirrored through a finite upper bound, or left free), giving
//! `max c'ᵀx', A'x' ≤ b', 0 ≤ x' ≤ u'`. Its dual
//! `max −b'ᵀy − u'ᵀz, −A'ᵀy − z ≤ −c', y, z ≥ 0` has one row per variable
//! (two for a free one), so tall programs turn into short wide ones. The
//! multipliers of those rows are `x'`.

use crate::lp::model::{LinearProgram, RowClass};

#[derive(Debug, Clone, Copy)]
enum Sub {
    /// `x = lo + x'`
    Shift(f64),
    /// `x = hi − x'`
    Mirror(f64),
    /// `x = x'⁺ − x'⁻`
    Free,
}

pub(super) struct Dualized {
    pub lp: LinearProgram,
    subs: Vec<Sub>,
    /// Dual row(s) of each primal variable.
    rows: Vec<(usize, Option<usize>)>,
    /// `cᵀx` at `x' = 0`.
    offset: f64,
}

impl Dualized {
    /// Primal values from the multipliers of the dual rows.
    pub fn primal_values(&self, multipliers: &[f64]) -> Vec<f64> {
        self.subs
            .iter()
            .zip(&self.rows)
            .map(|(s, &(r, r2))| {
                let xp = multipliers[r] - r2.map_or(0.0, |r2| multipliers[r2]);
                match *s {
                    Sub::Shift(lo) => lo + xp,
                    Sub::Mirror(hi) => hi - xp,
                    Sub::Free => xp,
                }
            })
            .collect()
    }

    /// Primal optimum implied by the dual optimum.
    pub fn primal_objective(&self, dual_objective: f64) -> f64 {
        self.offset - dual_objective
    }
}

pub(super) fn dualize(p: &LinearProgram) -> Dualized {
    let n = p.num_vars;
    let m = p.rows.len();
    let mut c = vec![0.0; n];
    for &(j, v) in &p.objective {
        c[j] += v;
    }

    let mut subs = Vec::with_capacity(n);
    let mut sign = vec![1.0; n];
    let mut ub = vec![f64::INFINITY; n];
    let mut offset = 0.0;
    for (j, &(lo, hi)) in p.var_bounds.iter().enumerate() {
        if lo.is_finite() {
            subs.push(Sub::Shift(lo));
            ub[j] = hi - lo;
            offset += c[j] * lo;
        } else if hi.is_finite() {
            subs.push(Sub::Mirror(hi));
            sign[j] = -1.0;
            offset += c[j] * hi;
        } else {
            subs.push(Sub::Free);
        }
    }

    // b' = b − A·shift, columns of A' = sign · columns of A
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut bp = Vec::with_capacity(m);
    for (i, row) in p.rows.iter().enumerate() {
        let mut b = row.rhs;
        for &(j, a) in &row.coeffs {
            match subs[j] {
                Sub::Shift(s) | Sub::Mirror(s) => b -= a * s,
                Sub::Free => {}
            }
            cols[j].push((i, sign[j] * a));
        }
        bp.push(b);
    }

    let num_z = ub.iter().filter(|u| u.is_finite()).count();
    let mut d = LinearProgram::new(m + num_z);
    d.var_bounds = vec![(0.0, f64::INFINITY); m + num_z];
    for (i, &b) in bp.iter().enumerate() {
        if b != 0.0 {
            d.objective.push((i, -b));
        }
    }
    let mut rows = Vec::with_capacity(n);
    let mut z = m;
    for j in 0..n {
        let cj = sign[j] * c[j];
        let mut coeffs: Vec<(usize, f64)> = cols[j].iter().map(|&(i, a)| (i, -a)).collect();
        if ub[j].is_finite() {
            coeffs.push((z, -1.0));
            if ub[j] != 0.0 {
                d.objective.push((z, -ub[j]));
            }
            z += 1;
        }
        let r = d.rows.len();
        match subs[j] {
            Sub::Free => {
                let neg = coeffs.iter().map(|&(k, a)| (k, -a)).collect();
                d.add_row(coeffs, -cj, RowClass::General);
                d.add_row(neg, cj, RowClass::General);
                rows.push((r, Some(r + 1)));
            }
            _ => {
                d.add_row(coeffs, -cj, RowClass::General);
                rows.push((r, None));
            }
        }
    }
    Dualized {
        lp: d,
        subs,
        rows,
        offset,
    }
}
