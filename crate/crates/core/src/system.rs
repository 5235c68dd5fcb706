//! Switched linear systems `ẋ = A_σ x` and the fixed LP parameters.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("system has no modes")]
    NoModes,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("mode `{name}`: matrix is {rows}x{cols}, expected {n}x{n}")]
    Shape {
        name: String,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("mode `{name}`: entry ({row}, {col}) is not finite")]
    NonFinite {
        name: String,
        row: usize,
        col: usize,
    },
    #[error("duplicate mode name `{0}`")]
    DuplicateName(String),
    #[error("invalid system file: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("need 0 < a_lower < a_upper, got a_lower = {a_lower}, a_upper = {a_upper}")]
    Bounds { a_lower: f64, a_upper: f64 },
    #[error("mu must be a finite number >= 1, got {0}")]
    Mu(f64),
}

/// One subsystem of the switched system.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedLinearSystem {
    n: usize,
    modes: Vec<Mode>,
}

/// On-disk layout of a system description.
///
/// ```json
/// { "n": 2, "modes": [ { "name": "A1", "matrix": [[-0.1, -1], [2, -0.1]] } ] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub modes: Vec<ModeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFile {
    pub name: String,
    /// Row-major, one inner array per row.
    pub matrix: Vec<Vec<f64>>,
}

impl SwitchedLinearSystem {
    pub fn new(n: usize, modes: Vec<Mode>) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::ZeroDimension);
        }
        if modes.is_empty() {
            return Err(SystemError::NoModes);
        }
        let mut names = HashSet::new();
        for m in &modes {
            if m.matrix.nrows() != n || m.matrix.ncols() != n {
                return Err(SystemError::Shape {
                    name: m.name.clone(),
                    rows: m.matrix.nrows(),
                    cols: m.matrix.ncols(),
                    n,
                });
            }
            for r in 0..n {
                for c in 0..n {
                    if !m.matrix[(r, c)].is_finite() {
                        return Err(SystemError::NonFinite {
                            name: m.name.clone(),
                            row: r,
                            col: c,
                        });
                    }
                }
            }
            if !names.insert(m.name.as_str()) {
                return Err(SystemError::DuplicateName(m.name.clone()));
            }
        }
        Ok(Self { n, modes })
    }

    /// Builds a system from row-major matrices, naming modes `A1`, `A2`, ...
    pub fn from_rows(n: usize, matrices: &[Vec<Vec<f64>>]) -> Result<Self, SystemError> {
        let file = SystemFile {
            n,
            modes: matrices
                .iter()
                .enumerate()
                .map(|(i, m)| ModeFile {
                    name: format!("A{}", i + 1),
                    matrix: m.clone(),
                })
                .collect(),
        };
        Self::from_file(&file)
    }

    pub fn from_file(file: &SystemFile) -> Result<Self, SystemError> {
        let n = file.n;
        let modes = file
            .modes
            .iter()
            .map(|m| {
                let rows = m.matrix.len();
                let bad_row = m.matrix.iter().find(|r| r.len() != n);
                if rows != n || bad_row.is_some() {
                    return Err(SystemError::Shape {
                        name: m.name.clone(),
                        rows,
                        cols: bad_row.map_or(n, |r| r.len()),
                        n,
                    });
                }
                Ok(Mode {
                    name: m.name.clone(),
                    matrix: DMatrix::from_fn(n, n, |r, c| m.matrix[r][c]),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, modes)
    }

    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        let file: SystemFile =
            serde_json::from_str(text).map_err(|e| SystemError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            n: self.n,
            modes: self
                .modes
                .iter()
                .map(|m| ModeFile {
                    name: m.name.clone(),
                    matrix: (0..self.n)
                        .map(|r| (0..self.n).map(|c| m.matrix[(r, c)]).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn matrix(&self, mode: usize) -> &DMatrix<f64> {
        &self.modes[mode].matrix
    }

    /// Largest spectral norm over all mode matrices.
    pub fn max_spectral_norm(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.matrix.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max)
    }

    /// Same system with every matrix multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            modes: self
                .modes
                .iter()
                .map(|m| Mode {
                    name: m.name.clone(),
                    matrix: &m.matrix * c,
                })
                .collect(),
        }
    }

    /// Same system with the modes reordered as `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            n: self.n,
            modes: order.iter().map(|&i| self.modes[i].clone()).collect(),
        }
    }
}

/// The constants held fixed while α is maximized. The exponent `d` of the
/// norm bounds is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellParams {
    pub a_lower: f64,
    pub a_upper: f64,
    pub mu: f64,
}

impl DwellParams {
    pub const DEFAULT_A_LOWER: f64 = 1e-5;
    pub const DEFAULT_A_UPPER: f64 = 10.0;

    pub fn new(a_lower: f64, a_upper: f64, mu: f64) -> Result<Self, ParamsError> {
        let p = Self {
            a_lower,
            a_upper,
            mu,
        };
        p.validate()?;
        Ok(p)
    }

    /// `a̱ = 1e-5`, `ā = 10`.
    pub fn with_mu(mu: f64) -> Result<Self, ParamsError> {
        Self::new(Self::DEFAULT_A_LOWER, Self::DEFAULT_A_UPPER, mu)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let ok = self.a_lower.is_finite()
            && self.a_upper.is_finite()
            && self.a_lower > 0.0
            && self.a_lower < self.a_upper;
        if !ok {
            return Err(ParamsError::Bounds {
                a_lower: self.a_lower,
                a_upper: self.a_upper,
            });
        }
        if !(self.mu.is_finite() && self.mu >= 1.0) {
            return Err(ParamsError::Mu(self.mu));
        }
        Ok(())
    }

    pub const fn exponent(&self) -> u32 {
        1
    }
}
