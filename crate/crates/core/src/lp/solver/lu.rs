//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Left-looking (Gilbert–Peierls) elimination: columns are processed in order
//! of increasing nonzero count, each is reduced by the previously computed L
//! columns reachable from its pattern, and the pivot row is chosen by
//! threshold partial pivoting with a preference for sparse rows. Basis changes
//! are appended as eta columns until the next refactorization.

/// Relative threshold for pivot acceptance.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries smaller than this are dropped from the factors.
const DROP_TOL: f64 = 1e-14;
/// A column whose largest eligible entry is below this is treated as dependent.
const SINGULAR_TOL: f64 = 1e-11;

/// A sparse column: parallel index and value arrays.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseCol {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseCol {
    pub fn unit(i: usize) -> Self {
        Self {
            idx: vec![i],
            val: vec![1.0],
        }
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    m: usize,
    /// Pivot row and basis position of each elimination step.
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// Off-diagonal U entries of step `k` refer to earlier steps.
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
    work: Vec<f64>,
}

/// Positions whose column was dependent, each replaced by the unit column of
/// the given row.
pub(crate) type Repairs = Vec<(usize, usize)>;

impl BasisFactor {
    /// Factorizes the `m × m` matrix whose column at basis position `p` is
    /// `cols[p]`. Dependent columns are swapped for unit columns; the swaps are
    /// returned so the caller can update its basis.
    pub fn factorize(m: usize, cols: &[SparseCol]) -> (Self, Repairs) {
        assert_eq!(cols.len(), m);
        // Singleton columns first; the rest by their count in rows no
        // singleton covers.
        let mut covered = vec![false; m];
        for c in cols {
            if c.idx.len() == 1 {
                covered[c.idx[0]] = true;
            }
        }
        let active = |c: &SparseCol| {
            if c.idx.len() == 1 {
                0
            } else {
                1 + c.idx.iter().filter(|&&i| !covered[i]).count()
            }
        };
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_cached_key(|&p| active(&cols[p]));

        // Remaining nonzeros per row among columns not yet eliminated.
        let mut row_count = vec![0usize; m];
        for c in cols {
            for &i in &c.idx {
                row_count[i] += 1;
            }
        }

        let mut f = Self {
            m,
            piv_row: Vec::with_capacity(m),
            piv_pos: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
            eta_nnz: 0,
            work: vec![0.0; m],
        };

        let mut step_of_row: Vec<usize> = vec![usize::MAX; m];
        let mut x = vec![0.0; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut visited = vec![false; m];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut dependent = Vec::new();

        for &pos in &order {
            let col = &cols[pos];
            pattern.clear();
            for (&i, &v) in col.idx.iter().zip(&col.val) {
                x[i] += v;
                if !in_pattern[i] {
                    in_pattern[i] = true;
                    pattern.push(i);
                }
                row_count[i] -= 1;
            }

            // Steps reachable from the pattern through L, in topological order.
            topo.clear();
            for &i in &col.idx {
                let s = step_of_row[i];
                if s == usize::MAX || visited[s] {
                    continue;
                }
                visited[s] = true;
                stack.push((s, f.l_start[s]));
                while let Some(top) = stack.last_mut() {
                    let t = top.0;
                    let end = f.l_start[t + 1];
                    let mut child = None;
                    while top.1 < end {
                        let s2 = step_of_row[f.l_idx[top.1]];
                        top.1 += 1;
                        if s2 != usize::MAX && !visited[s2] {
                            child = Some(s2);
                            break;
                        }
                    }
                    match child {
                        Some(s2) => {
                            visited[s2] = true;
                            stack.push((s2, f.l_start[s2]));
                        }
                        None => {
                            topo.push(t);
                            stack.pop();
                        }
                    }
                }
            }

            for &t in topo.iter().rev() {
                visited[t] = false;
                let v = x[f.piv_row[t]];
                if v == 0.0 {
                    continue;
                }
                for e in f.l_start[t]..f.l_start[t + 1] {
                    let i = f.l_idx[e];
                    x[i] -= f.l_val[e] * v;
                    if !in_pattern[i] {
                        in_pattern[i] = true;
                        pattern.push(i);
                    }
                }
            }

            let mut max_free = 0.0_f64;
            for &i in &pattern {
                if step_of_row[i] == usize::MAX {
                    max_free = max_free.max(x[i].abs());
                }
            }
            let col_norm = col.val.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if max_free <= SINGULAR_TOL * col_norm.max(1.0) {
                dependent.push(pos);
                for &i in &pattern {
                    x[i] = 0.0;
                    in_pattern[i] = false;
                }
                continue;
            }
            let mut piv = usize::MAX;
            for &i in &pattern {
                if step_of_row[i] != usize::MAX || x[i].abs() < PIVOT_THRESHOLD * max_free {
                    continue;
                }
                let better = piv == usize::MAX
                    || row_count[i] < row_count[piv]
                    || (row_count[i] == row_count[piv] && x[i].abs() > x[piv].abs());
                if better {
                    piv = i;
                }
            }

            let k = f.piv_row.len();
            let pv = x[piv];
            for &i in &pattern {
                let v = x[i];
                x[i] = 0.0;
                in_pattern[i] = false;
                if i == piv || v.abs() <= DROP_TOL {
                    continue;
                }
                let s = step_of_row[i];
                if s != usize::MAX {
                    f.u_idx.push(s);
                    f.u_val.push(v);
                } else {
                    f.l_idx.push(i);
                    f.l_val.push(v / pv);
                }
            }
            f.u_start.push(f.u_idx.len());
            f.l_start.push(f.l_idx.len());
            f.u_diag.push(pv);
            f.piv_row.push(piv);
            f.piv_pos.push(pos);
            step_of_row[piv] = k;
        }

        let mut repairs = Vec::with_capacity(dependent.len());
        if !dependent.is_empty() {
            let free_rows: Vec<usize> = (0..m).filter(|&i| step_of_row[i] == usize::MAX).collect();
            debug_assert_eq!(free_rows.len(), dependent.len());
            for (&pos, &row) in dependent.iter().zip(&free_rows) {
                f.u_start.push(f.u_idx.len());
                f.l_start.push(f.l_idx.len());
                f.u_diag.push(1.0);
                f.piv_row.push(row);
                f.piv_pos.push(pos);
                repairs.push((pos, row));
            }
        }
        (f, repairs)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Solves `B y = rhs` in place: `rhs` is indexed by row on entry and by
    /// basis position on return.
    pub fn ftran(&mut self, rhs: &mut [f64]) {
        let m = self.m;
        let z = &mut self.work;
        for t in 0..m {
            let v = rhs[self.piv_row[t]];
            z[t] = v;
            if v != 0.0 {
                for e in self.l_start[t]..self.l_start[t + 1] {
                    rhs[self.l_idx[e]] -= self.l_val[e] * v;
                }
            }
        }
        for k in (0..m).rev() {
            let w = z[k] / self.u_diag[k];
            rhs[self.piv_pos[k]] = w;
            if w != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    z[self.u_idx[e]] -= self.u_val[e] * w;
                }
            }
        }
        for eta in &self.etas {
            let yr = rhs[eta.pos] / eta.pivot;
            rhs[eta.pos] = yr;
            if yr != 0.0 {
                for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                    rhs[i] -= a * yr;
                }
            }
        }
    }

    /// Solves `yᵀ B = hᵀ` in place: `h` is indexed by basis position on entry
    /// and by row on return.
    pub fn btran(&mut self, h: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = h[eta.pos];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                s -= a * h[i];
            }
            h[eta.pos] = s / eta.pivot;
        }
        let g = &mut self.work;
        for k in 0..m {
            let mut s = h[self.piv_pos[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * g[self.u_idx[e]];
            }
            g[k] = s / self.u_diag[k];
        }
        for t in (0..m).rev() {
            let mut s = g[t];
            for e in self.l_start[t]..self.l_start[t + 1] {
                s -= self.l_val[e] * h[self.l_idx[e]];
            }
            h[self.piv_row[t]] = s;
        }
    }

    /// Records the replacement of the column at `pos` by a column whose
    /// FTRAN image (indexed by basis position) is `alpha`.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let pivot = alpha[pos];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                idx.push(i);
                val.push(a);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot,
            idx,
            val,
        });
    }
}
