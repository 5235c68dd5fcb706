//! Feasibility residuals of a candidate LP point, computed straight from the
//! row data without touching any solver state.

use super::model::{LinearProgram, RowClass};

/// Worst violation per constraint family; zero means satisfied.
///
/// Row residuals are `max(0, a·v − b) / max_k |a_k|`; bound residuals are
/// absolute distances outside `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub bounds: f64,
    pub decay: f64,
    pub compatibility: f64,
    pub general: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.bounds
            .max(self.decay)
            .max(self.compatibility)
            .max(self.general)
    }
}

/// Unscaled `a·v − b` of each row, in row order.
pub fn row_residuals(lp: &LinearProgram, values: &[f64]) -> Vec<f64> {
    lp.rows
        .iter()
        .map(|row| row.coeffs.iter().map(|&(j, a)| a * values[j]).sum::<f64>() - row.rhs)
        .collect()
}

fn row_scale(coeffs: &[(usize, f64)]) -> f64 {
    let s = coeffs.iter().fold(0.0_f64, |m, &(_, a)| m.max(a.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

pub fn check_solution(lp: &LinearProgram, values: &[f64]) -> Residuals {
    assert_eq!(values.len(), lp.num_vars, "value vector length");
    let mut res = Residuals::default();
    for (&(lo, hi), &v) in lp.var_bounds.iter().zip(values) {
        let viol = if v.is_nan() {
            f64::INFINITY
        } else {
            (lo - v).max(v - hi).max(0.0)
        };
        res.bounds = res.bounds.max(viol);
    }
    for (row, r) in lp.rows.iter().zip(row_residuals(lp, values)) {
        let viol = r.max(0.0) / row_scale(&row.coeffs);
        let slot = match row.class {
            RowClass::Decay => &mut res.decay,
            RowClass::Compatibility => &mut res.compatibility,
            RowClass::General => &mut res.general,
        };
        *slot = slot.max(if viol.is_nan() { f64::INFINITY } else { viol });
    }
    res
}
