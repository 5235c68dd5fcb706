//! Presolve: variables tied by a pair of opposite rows `c(x_a − x_b) ≤ 0`,
//! `c(x_b − x_a) ≤ 0` are equal and get merged into one column.

use crate::lp::model::LinearProgram;

pub(super) enum Presolve {
    /// Nothing to merge.
    Unchanged,
    /// Bounds or rows became contradictory while merging.
    Infeasible,
    Reduced(Reduced),
}

pub(super) struct Reduced {
    pub lp: LinearProgram,
    /// Reduced column of every original variable.
    pub column: Vec<usize>,
}

impl Reduced {
    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        self.column.iter().map(|&c| values[c]).collect()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn merged(coeffs: &[(usize, f64)], map: impl Fn(usize) -> usize) -> Vec<(usize, f64)> {
    let mut c: Vec<(usize, f64)> = coeffs.iter().map(|&(j, a)| (map(j), a)).collect();
    c.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(c.len());
    for (j, a) in c {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

pub(super) fn merge_tied_columns(lp: &LinearProgram) -> Presolve {
    let n = lp.num_vars;
    // (lo var, hi var) → orientations seen: bit 0 for +x_lo, bit 1 for −x_lo
    let mut seen = std::collections::HashMap::new();
    for row in &lp.rows {
        if row.rhs != 0.0 {
            continue;
        }
        let c = merged(&row.coeffs, |j| j);
        if let [(a, ca), (b, cb)] = c[..] {
            if ca == -cb {
                let bit = if ca > 0.0 { 1u8 } else { 2u8 };
                *seen.entry((a, b)).or_insert(0u8) |= bit;
            }
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut any = false;
    for (&(a, b), &bits) in &seen {
        if bits == 3 {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                // the smaller index represents the class
                parent[ra.max(rb)] = ra.min(rb);
                any = true;
            }
        }
    }
    if !any {
        return Presolve::Unchanged;
    }

    let mut column = vec![usize::MAX; n];
    let mut num = 0;
    for j in 0..n {
        let r = find(&mut parent, j);
        if r == j {
            column[j] = num;
            num += 1;
        }
    }
    for j in 0..n {
        let r = find(&mut parent, j);
        column[j] = column[r];
    }

    let mut red = LinearProgram::new(num);
    red.var_bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); num];
    for (j, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
        let b = &mut red.var_bounds[column[j]];
        b.0 = b.0.max(lo);
        b.1 = b.1.min(hi);
    }
    if red.var_bounds.iter().any(|b| b.0 > b.1) {
        return Presolve::Infeasible;
    }
    red.objective = merged(&lp.objective, |j| column[j]);
    for row in &lp.rows {
        let c = merged(&row.coeffs, |j| column[j]);
        if c.is_empty() {
            if row.rhs < 0.0 {
                return Presolve::Infeasible;
            }
            continue;
        }
        red.add_row(c, row.rhs, row.class);
    }
    Presolve::Reduced(Reduced { lp: red, column })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::model::RowClass;

    #[test]
    fn merges_opposite_pairs_only() {
        let mut lp = LinearProgram::new(4);
        lp.var_bounds = vec![(0.0, 5.0), (1.0, 9.0), (0.0, 3.0), (0.0, 1.0)];
        lp.objective = vec![(0, 1.0), (1, 1.0)];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], 0.0, RowClass::Compatibility);
        lp.add_row(vec![(1, 2.0), (0, -2.0)], 0.0, RowClass::Compatibility);
        // one direction only: no merge
        lp.add_row(vec![(2, 1.0), (3, -1.0)], 0.0, RowClass::Compatibility);
        lp.add_row(vec![(0, 1.0), (2, 1.0)], 4.0, RowClass::General);
        let Presolve::Reduced(r) = merge_tied_columns(&lp) else {
            panic!("expected a reduction");
        };
        assert_eq!(r.column, vec![0, 0, 1, 2]);
        assert_eq!(r.lp.var_bounds[0], (1.0, 5.0));
        assert_eq!(r.lp.objective, vec![(0, 2.0)]);
        assert_eq!(r.lp.rows.len(), 2);
        assert_eq!(r.expand(&[2.0, 3.0, 0.5]), vec![2.0, 2.0, 3.0, 0.5]);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(2);
        lp.var_bounds = vec![(0.0, 1.0), (2.0, 3.0)];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], 0.0, RowClass::General);
        lp.add_row(vec![(0, -1.0), (1, 1.0)], 0.0, RowClass::General);
        assert!(matches!(merge_tied_columns(&lp), Presolve::Infeasible));
    }
}
