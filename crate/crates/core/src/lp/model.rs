//! Solver-agnostic linear programs and the CPA dwell-time LP.

use thiserror::Error;

use crate::system::{DwellParams, ParamsError, SwitchedLinearSystem};
use crate::triangulation::FanTriangulation;

/// Relative magnitude below which an entry of `X⁻¹ A X` is treated as zero.
const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("triangulation dimension {tri} does not match system dimension {sys}")]
    DimensionMismatch { tri: usize, sys: usize },
    #[error("mode {mode}: non-finite matrix entry")]
    NonFinite { mode: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("row {row} references variable {var} but the LP has {num_vars}")]
    BadIndex {
        row: usize,
        var: usize,
        num_vars: usize,
    },
    #[error("row {row} has a non-finite coefficient")]
    NonFiniteRow { row: usize },
    #[error("variable {var} has invalid bounds [{lo}, {hi}]")]
    BadBounds { var: usize, lo: f64, hi: f64 },
}

/// Which family of constraints a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowClass {
    /// Vertex-wise decay along the active mode.
    Decay,
    /// `V_j ≤ μ V_i` at a vertex.
    Compatibility,
    General,
}

/// A sparse inequality `coeffs · v ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub class: RowClass,
}

/// `maximize objective · v` subject to `rows` and per-variable bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<(usize, f64)>,
    pub var_bounds: Vec<(f64, f64)>,
    pub rows: Vec<Row>,
    pub var_names: Vec<String>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: Vec::new(),
            var_bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); num_vars],
            rows: Vec::new(),
            var_names: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, class: RowClass) {
        self.rows.push(Row { coeffs, rhs, class });
    }

    pub fn var_name(&self, j: usize) -> String {
        self.var_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{j}"))
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return Err(ModelError::BadBounds { var: j, lo, hi });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(var, c) in &row.coeffs {
                if var >= self.num_vars {
                    return Err(ModelError::BadIndex {
                        row: r,
                        var,
                        num_vars: self.num_vars,
                    });
                }
                if !c.is_finite() {
                    return Err(ModelError::NonFiniteRow { row: r });
                }
            }
            if !row.rhs.is_finite() {
                return Err(ModelError::NonFiniteRow { row: r });
            }
        }
        for &(var, c) in &self.objective {
            if var >= self.num_vars || !c.is_finite() {
                return Err(ModelError::BadIndex {
                    row: usize::MAX,
                    var,
                    num_vars: self.num_vars,
                });
            }
        }
        Ok(())
    }
}

/// Column layout of the dwell-time LP: α first, then `V_{x,i}` for every
/// non-origin vertex `x` (outer loop) and mode `i` (inner loop). The origin
/// values are fixed at zero and have no column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableMap {
    pub alpha_col: usize,
    pub num_outer: usize,
    pub num_modes: usize,
}

impl VariableMap {
    /// Layout used by [`assemble`]: α first, then vertex by vertex.
    pub fn for_fan(tri: &FanTriangulation, num_modes: usize) -> Self {
        Self {
            alpha_col: 0,
            num_outer: tri.num_outer_vertices(),
            num_modes,
        }
    }

    pub fn num_vars(&self) -> usize {
        1 + self.num_outer * self.num_modes
    }

    /// Column of `V_{x,i}` for non-origin vertex id `vertex` (≥ 1).
    pub fn v_col(&self, vertex: usize, mode: usize) -> usize {
        debug_assert!(vertex >= 1 && vertex <= self.num_outer && mode < self.num_modes);
        1 + (vertex - 1) * self.num_modes + mode
    }

    /// Inverse of [`v_col`](Self::v_col); `None` for the α column.
    pub fn vertex_mode(&self, col: usize) -> Option<(usize, usize)> {
        (col != self.alpha_col && col < self.num_vars())
            .then(|| (1 + (col - 1) / self.num_modes, (col - 1) % self.num_modes))
    }
}

/// LP sizes as `(num_vars, num_decay_rows, num_compat_rows)`.
pub fn row_count(tri: &FanTriangulation, num_modes: usize) -> (usize, usize, usize) {
    let s = tri.num_outer_vertices();
    let m = tri.simplices().len();
    (
        s * num_modes + 1,
        m * tri.dim() * num_modes,
        s * num_modes * (num_modes.saturating_sub(1)),
    )
}

/// Bound placed on |α|. Along any trajectory of mode `i`,
/// `‖x(t)‖ ≥ e^{-‖A_i‖t}‖x(0)‖` while the certificate forces
/// `V_i(x(t)) ≤ e^{-αt/ā}V_i(x(0))`, so every feasible α is at most
/// `ā·min_i ‖A_i‖₂`. From below, [`trivial_feasible_point`] is feasible
/// with `α = −ā·max_i ‖A_i‖₂`. Neither side of the box can bind.
pub fn alpha_cap(sys: &SwitchedLinearSystem, a_upper: f64) -> f64 {
    a_upper * sys.max_spectral_norm() + 1.0
}

/// The μ-independent part of the LP: bounds, objective and decay rows.
/// Compatibility rows are appended per μ by [`LpSkeleton::instantiate`].
#[derive(Debug, Clone)]
pub struct LpSkeleton {
    base: LinearProgram,
    map: VariableMap,
    a_lower: f64,
    a_upper: f64,
}

impl LpSkeleton {
    pub fn new(
        tri: &FanTriangulation,
        sys: &SwitchedLinearSystem,
        a_lower: f64,
        a_upper: f64,
    ) -> Result<Self, ModelError> {
        DwellParams::new(a_lower, a_upper, 1.0)?;
        let n = tri.dim();
        if sys.dim() != n {
            return Err(ModelError::DimensionMismatch {
                tri: n,
                sys: sys.dim(),
            });
        }
        for i in 0..sys.num_modes() {
            if sys.matrix(i).iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { mode: i });
            }
        }
        let num_modes = sys.num_modes();
        let map = VariableMap::for_fan(tri, num_modes);
        let mut lp = LinearProgram::new(map.num_vars());
        lp.objective.push((map.alpha_col, 1.0));
        let cap = alpha_cap(sys, a_upper);
        lp.var_bounds[map.alpha_col] = (-cap, cap);
        lp.var_names.push("alpha".into());
        for v in tri.outer_vertices() {
            for i in 0..num_modes {
                let col = map.v_col(v.id, i);
                lp.var_bounds[col] = (a_lower * v.radius, a_upper * v.radius);
                debug_assert_eq!(lp.var_names.len(), col);
                lp.var_names.push(format!("V_{}_{}", v.id, i + 1));
            }
        }

        let (_, num_decay, _) = row_count(tri, num_modes);
        lp.rows.reserve(num_decay);
        let verts = tri.vertices();
        for cone in tri.simplices() {
            // X⁻¹ A_i X, column j gives the coefficients of row (cone, j, i)
            let ax: Vec<_> = (0..num_modes)
                .map(|i| &cone.x_inv * sys.matrix(i) * &cone.x)
                .collect();
            for j in 0..n {
                let radius = verts[cone.vertex_ids[j]].radius;
                for (i, m) in ax.iter().enumerate() {
                    // entries at roundoff level of the column are exact zeros
                    let floor = ROUNDOFF * m.column(j).amax();
                    let mut coeffs = Vec::with_capacity(n + 1);
                    coeffs.push((map.alpha_col, radius));
                    for (k, &vid) in cone.vertex_ids.iter().enumerate() {
                        let c = m[(k, j)];
                        coeffs.push((map.v_col(vid, i), if c.abs() <= floor { 0.0 } else { c }));
                    }
                    lp.add_row(coeffs, 0.0, RowClass::Decay);
                }
            }
        }
        debug_assert_eq!(lp.rows.len(), num_decay);
        Ok(Self {
            base: lp,
            map,
            a_lower,
            a_upper,
        })
    }

    pub fn map(&self) -> VariableMap {
        self.map
    }

    /// Full LP for a given μ.
    pub fn instantiate(&self, mu: f64) -> Result<LinearProgram, ModelError> {
        DwellParams::new(self.a_lower, self.a_upper, mu)?;
        let mut lp = self.base.clone();
        let map = self.map;
        let nm = map.num_modes;
        lp.rows.reserve(map.num_outer * nm * nm.saturating_sub(1));
        for v in 1..=map.num_outer {
            for i in 0..nm {
                for j in 0..nm {
                    if i != j {
                        lp.add_row(
                            vec![(map.v_col(v, j), 1.0), (map.v_col(v, i), -mu)],
                            0.0,
                            RowClass::Compatibility,
                        );
                    }
                }
            }
        }
        Ok(lp)
    }
}

/// Builds the LP maximizing α over CPA functions on `tri` for the given
/// parameters.
pub fn assemble(
    tri: &FanTriangulation,
    sys: &SwitchedLinearSystem,
    params: &DwellParams,
) -> Result<(LinearProgram, VariableMap), ModelError> {
    params.validate()?;
    let skeleton = LpSkeleton::new(tri, sys, params.a_lower, params.a_upper)?;
    let lp = skeleton.instantiate(params.mu)?;
    Ok((lp, skeleton.map()))
}

/// A point every assembled LP admits: all `V = a̱·‖x‖`, `α = −ā·max‖A_i‖₂`.
pub fn trivial_feasible_point(
    tri: &FanTriangulation,
    sys: &SwitchedLinearSystem,
    params: &DwellParams,
    map: &VariableMap,
) -> Vec<f64> {
    let mut v = vec![0.0; map.num_vars()];
    v[map.alpha_col] = -params.a_upper * sys.max_spectral_norm();
    for x in tri.outer_vertices() {
        for i in 0..map.num_modes {
            v[map.v_col(x.id, i)] = params.a_lower * x.radius;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neg_identity() -> SwitchedLinearSystem {
        SwitchedLinearSystem::from_rows(2, &[vec![vec![-1.0, 0.0], vec![0.0, -1.0]]]).unwrap()
    }

    #[test]
    fn row_count_small() {
        let tri = FanTriangulation::build(2, 1).unwrap();
        assert_eq!(row_count(&tri, 2), (17, 32, 16));
        assert_eq!(row_count(&tri, 1).2, 0);
    }

    #[test]
    fn single_mode_has_no_compat_rows() {
        let tri = FanTriangulation::build(2, 3).unwrap();
        let (lp, _) = assemble(&tri, &neg_identity(), &DwellParams::with_mu(1.5).unwrap()).unwrap();
        assert!(lp.rows.iter().all(|r| r.class == RowClass::Decay));
    }

    #[test]
    fn negative_identity_rows_are_unit() {
        // X⁻¹(−I)X = −I, so row (ν, j) is −V_{x_j} + α‖x_j‖ ≤ 0
        let tri = FanTriangulation::build(2, 1).unwrap();
        let (lp, map) =
            assemble(&tri, &neg_identity(), &DwellParams::with_mu(1.0).unwrap()).unwrap();
        let mut r = 0;
        for cone in tri.simplices() {
            for j in 0..2 {
                let row = &lp.rows[r];
                for &(col, c) in &row.coeffs {
                    if col == map.alpha_col {
                        assert!((c - 1.0).abs() < 1e-15);
                    } else {
                        let (v, _) = map.vertex_mode(col).unwrap();
                        let want = if v == cone.vertex_ids[j] { -1.0 } else { 0.0 };
                        assert!((c - want).abs() < 1e-14, "{c} vs {want}");
                    }
                }
                r += 1;
            }
        }
    }

    #[test]
    fn variable_map_round_trip() {
        let map = VariableMap {
            alpha_col: 0,
            num_outer: 7,
            num_modes: 3,
        };
        let mut seen = vec![false; map.num_vars()];
        seen[0] = true;
        for v in 1..=7 {
            for i in 0..3 {
                let c = map.v_col(v, i);
                assert!(!seen[c]);
                seen[c] = true;
                assert_eq!(map.vertex_mode(c), Some((v, i)));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(map.vertex_mode(0), None);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let tri = FanTriangulation::build(3, 1).unwrap();
        let err = assemble(&tri, &neg_identity(), &DwellParams::with_mu(1.0).unwrap()).unwrap_err();
        assert_eq!(err, ModelError::DimensionMismatch { tri: 3, sys: 2 });
    }

    #[test]
    fn validate_catches_bad_rows() {
        let mut lp = LinearProgram::new(2);
        lp.add_row(vec![(0, 1.0), (2, 1.0)], 0.0, RowClass::General);
        assert!(matches!(
            lp.validate(),
            Err(ModelError::BadIndex { var: 2, .. })
        ));
        let mut lp = LinearProgram::new(1);
        lp.add_row(vec![(0, f64::NAN)], 0.0, RowClass::General);
        assert!(matches!(
            lp.validate(),
            Err(ModelError::NonFiniteRow { row: 0 })
        ));
        let mut lp = LinearProgram::new(1);
        lp.var_bounds[0] = (2.0, 1.0);
        assert!(matches!(lp.validate(), Err(ModelError::BadBounds { .. })));
    }
}
