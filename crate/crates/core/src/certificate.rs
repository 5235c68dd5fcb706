//! CPA multiple-Lyapunov certificates: extraction from an LP optimum,
//! evaluation, the dwell-time bound and an independent verifier.
//!
//! `V_i` is linear on every cone of the fan and takes the stored value at
//! each outer vertex, with `V_i(0) = 0`.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Solution, Status, VariableMap};
use crate::system::{DwellParams, ParamsError, SwitchedLinearSystem, SystemError, SystemFile};
use crate::triangulation::{FanTriangulation, TriangulationError};

pub const FORMAT_VERSION: u32 = 1;

/// Default tolerance of [`verify`].
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("LP was not solved to optimality ({0})")]
    NotOptimal(Status),
    #[error("no certificate: optimal decay rate alpha = {alpha:e} is not positive")]
    NoCertificate { alpha: f64 },
    #[error("solution has {got} values, LP layout needs {expected}")]
    Layout { expected: usize, got: usize },
    #[error("certificate file: {message} (byte offset {offset})")]
    Parse { message: String, offset: usize },
    #[error("unsupported certificate format version {0}")]
    Version(u32),
    #[error("certificate holds {got} values for mode {mode}, triangulation has {expected} outer vertices")]
    Shape {
        mode: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpaCertificate {
    pub params: DwellParams,
    /// Dimension of the fan.
    pub n: usize,
    /// Fan resolution; `(n, k)` rebuilds the triangulation.
    pub k: u32,
    pub system: SwitchedLinearSystem,
    /// `values[i][v - 1]` is `V_i` at outer vertex `v`.
    pub values: Vec<Vec<f64>>,
    pub alpha: f64,
    /// `max_{‖x‖=1} max_i V_i(x)`.
    pub a_upper_prime: f64,
    /// Infimal average dwell-time; stability holds for every strictly larger one.
    pub tau_a: f64,
}

/// `ā·ln μ / α`, zero at `μ = 1`.
pub fn dwell_time_bound(a_upper: f64, mu: f64, alpha: f64) -> f64 {
    if mu == 1.0 {
        0.0
    } else {
        a_upper * mu.ln() / alpha
    }
}

/// Maximum of `g·x` over unit vectors `x` in the cone spanned by the columns
/// of `x`. The maximizer is the normalized projection of `g` onto the span
/// of some face whose projection falls inside that face.
fn cone_sphere_max(g: &DVector<f64>, x: &DMatrix<f64>) -> f64 {
    let n = x.ncols();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
        let p = x.select_columns(&cols);
        if cols.len() == 1 {
            let c = p.column(0);
            best = best.max(g.dot(&c) / c.norm());
            continue;
        }
        let gram = p.transpose() * &p;
        let Some(coef) = gram.lu().solve(&(p.transpose() * g)) else {
            continue;
        };
        if coef.iter().all(|&c| c >= 0.0) {
            let proj = &p * coef;
            let norm = proj.norm();
            if norm > 0.0 {
                best = best.max(g.dot(&proj) / norm);
            }
        }
    }
    best
}

/// Gradient `vᵀX⁻¹` of the linear piece on cone `simplex` for vertex values
/// `vals` (indexed by outer vertex).
fn piece_gradient(tri: &FanTriangulation, simplex: usize, vals: &[f64]) -> DVector<f64> {
    let cone = tri.simplex(simplex);
    let v = DVector::from_iterator(
        cone.vertex_ids.len(),
        cone.vertex_ids.iter().map(|&id| vals[id - 1]),
    );
    cone.x_inv.transpose() * v
}

/// Maximum over the unit sphere of the CPA function with outer vertex values
/// `vals`.
pub fn sphere_max(tri: &FanTriangulation, vals: &[f64]) -> f64 {
    tri.simplices()
        .iter()
        .map(|c| cone_sphere_max(&piece_gradient(tri, c.id, vals), &c.x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{‖x‖=1}` of the CPA interpolant of `‖·‖` on the fan. At least 1;
/// tends to 1 as `K` grows.
pub fn fan_factor(tri: &FanTriangulation) -> f64 {
    let radii: Vec<f64> = tri.outer_vertices().iter().map(|v| v.radius).collect();
    sphere_max(tri, &radii)
}

impl CpaCertificate {
    /// Reads the vertex values and α out of an optimal LP solution.
    pub fn extract(
        solution: &Solution,
        tri: &FanTriangulation,
        sys: &SwitchedLinearSystem,
        params: &DwellParams,
    ) -> Result<Self, CertificateError> {
        params.validate()?;
        if solution.status != Status::Optimal {
            return Err(CertificateError::NotOptimal(solution.status));
        }
        let map = VariableMap::for_fan(tri, sys.num_modes());
        if solution.values.len() != map.num_vars() {
            return Err(CertificateError::Layout {
                expected: map.num_vars(),
                got: solution.values.len(),
            });
        }
        let alpha = solution.values[map.alpha_col];
        if !(alpha > 0.0) {
            return Err(CertificateError::NoCertificate { alpha });
        }
        let values: Vec<Vec<f64>> = (0..sys.num_modes())
            .map(|i| {
                (1..=tri.num_outer_vertices())
                    .map(|v| solution.values[map.v_col(v, i)])
                    .collect()
            })
            .collect();
        let a_upper_prime = values
            .iter()
            .map(|vals| sphere_max(tri, vals))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            params: *params,
            n: tri.dim(),
            k: tri.resolution(),
            system: sys.clone(),
            values,
            alpha,
            a_upper_prime,
            tau_a: dwell_time_bound(params.a_upper, params.mu, alpha),
        })
    }

    pub fn num_modes(&self) -> usize {
        self.values.len()
    }

    /// Rebuilds the fan the certificate lives on.
    pub fn triangulation(&self) -> Result<FanTriangulation, TriangulationError> {
        FanTriangulation::build(self.n, self.k)
    }

    /// `V_mode(x)`.
    pub fn evaluate(
        &self,
        tri: &FanTriangulation,
        x: &[f64],
        mode: usize,
    ) -> Result<f64, TriangulationError> {
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let (id, lambda) = tri.locate(x)?;
        Ok(self.evaluate_in(tri, id, &lambda, mode))
    }

    /// `λ·v` on cone `simplex` for conic coordinates `lambda`.
    pub fn evaluate_in(
        &self,
        tri: &FanTriangulation,
        simplex: usize,
        lambda: &[f64],
        mode: usize,
    ) -> f64 {
        let vals = &self.values[mode];
        tri.simplex(simplex)
            .vertex_ids
            .iter()
            .zip(lambda)
            .map(|(&id, l)| l * vals[id - 1])
            .sum()
    }

    /// Constant gradient `v_{ν,i}ᵀ X_ν⁻¹` of `V_mode` on cone `simplex`.
    pub fn gradient(&self, tri: &FanTriangulation, simplex: usize, mode: usize) -> Vec<f64> {
        piece_gradient(tri, simplex, &self.values[mode])
            .iter()
            .copied()
            .collect()
    }

    pub fn to_file(&self) -> CertificateFile {
        CertificateFile {
            format_version: FORMAT_VERSION,
            n: self.n,
            k: self.k,
            a_lower: self.params.a_lower,
            a_upper: self.params.a_upper,
            mu: self.params.mu,
            system: self.system.to_file(),
            values: self.values.clone(),
            alpha: self.alpha,
            a_upper_prime: self.a_upper_prime,
            tau_a: self.tau_a,
        }
    }

    pub fn from_file(file: CertificateFile) -> Result<Self, CertificateError> {
        if file.format_version != FORMAT_VERSION {
            return Err(CertificateError::Version(file.format_version));
        }
        let system = SwitchedLinearSystem::from_file(&file.system)?;
        let params = DwellParams::new(file.a_lower, file.a_upper, file.mu)?;
        Ok(Self {
            params,
            n: file.n,
            k: file.k,
            system,
            values: file.values,
            alpha: file.alpha,
            a_upper_prime: file.a_upper_prime,
            tau_a: file.tau_a,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CertificateError> {
        let file: CertificateFile =
            serde_json::from_str(text).map_err(|e| CertificateError::Parse {
                offset: byte_offset(text, e.line(), e.column()),
                message: e.to_string(),
            })?;
        Self::from_file(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), CertificateError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CertificateError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Byte offset of a 1-based `(line, column)` position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

/// On-disk certificate layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub format_version: u32,
    pub n: usize,
    pub k: u32,
    pub a_lower: f64,
    pub a_upper: f64,
    pub mu: f64,
    pub system: SystemFile,
    /// One array per mode, in vertex-id order (origin omitted).
    pub values: Vec<Vec<f64>>,
    pub alpha: f64,
    pub a_upper_prime: f64,
    pub tau_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Stored values fit the shapes of the system and the fan.
    Structure,
    /// `a̱‖x‖ ≤ V ≤ ā‖x‖` at vertices.
    Bounds,
    /// `∇V_{ν,i}·A_i x_j + α‖x_j‖ ≤ 0`.
    Decay,
    /// `V_j ≤ μ V_i` at vertices.
    Compatibility,
    /// `∇V_{ν,i}·A_i x_j ≤ −(α/ā) V_i(x_j)`.
    GradientDecay,
    /// Stored `ā′` and `τ_a` against their recomputation.
    Constants,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Structure => "structure",
            Condition::Bounds => "bounds",
            Condition::Decay => "decay",
            Condition::Compatibility => "compatibility",
            Condition::GradientDecay => "gradient_decay",
            Condition::Constants => "constants",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offense {
    pub condition: Condition,
    pub location: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WorstResiduals {
    pub structure: f64,
    pub bounds: f64,
    pub decay: f64,
    pub compatibility: f64,
    pub gradient_decay: f64,
    pub constants: f64,
}

impl WorstResiduals {
    pub fn max(&self) -> f64 {
        [
            self.structure,
            self.bounds,
            self.decay,
            self.compatibility,
            self.gradient_decay,
            self.constants,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn slot(&mut self, c: Condition) -> &mut f64 {
        match c {
            Condition::Structure => &mut self.structure,
            Condition::Bounds => &mut self.bounds,
            Condition::Decay => &mut self.decay,
            Condition::Compatibility => &mut self.compatibility,
            Condition::GradientDecay => &mut self.gradient_decay,
            Condition::Constants => &mut self.constants,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub tol: f64,
    pub worst: WorstResiduals,
    /// Violations beyond `tol`, worst first, at most [`MAX_OFFENSES`].
    pub offenses: Vec<Offense>,
}

pub const MAX_OFFENSES: usize = 50;

struct Recorder {
    tol: f64,
    worst: WorstResiduals,
    offenses: Vec<Offense>,
}

impl Recorder {
    fn record(&mut self, condition: Condition, residual: f64, location: impl FnOnce() -> String) {
        let r = if residual.is_nan() {
            f64::INFINITY
        } else {
            residual
        };
        let slot = self.worst.slot(condition);
        *slot = slot.max(r);
        if r > self.tol {
            self.offenses.push(Offense {
                condition,
                location: location(),
                residual: r,
            });
        }
    }

    fn finish(mut self) -> VerificationReport {
        self.offenses
            .sort_by(|a, b| b.residual.total_cmp(&a.residual));
        self.offenses.truncate(MAX_OFFENSES);
        VerificationReport {
            passed: self.worst.max() <= self.tol,
            tol: self.tol,
            worst: self.worst,
            offenses: self.offenses,
        }
    }
}

/// Rechecks every certificate condition from the vertex values.
///
/// Decay residuals are divided by the largest coefficient of the row they
/// come from, compatibility residuals by `μ`; bounds and constants are
/// absolute. The `ā′` check allows the fan factor since `V` is linear on
/// cones while the sphere is curved.
pub fn verify(
    cert: &CpaCertificate,
    tri: &FanTriangulation,
    sys: &SwitchedLinearSystem,
    tol: f64,
) -> VerificationReport {
    let mut rec = Recorder {
        tol,
        worst: WorstResiduals::default(),
        offenses: Vec::new(),
    };
    let outer = tri.num_outer_vertices();
    let n = tri.dim();
    let shape_ok = cert.n == n
        && cert.k == tri.resolution()
        && sys.dim() == n
        && cert.num_modes() == sys.num_modes()
        && cert.values.iter().all(|v| v.len() == outer);
    if !shape_ok {
        rec.record(Condition::Structure, f64::INFINITY, || {
            format!(
                "certificate (n={}, K={}, {} modes) does not match fan (n={n}, K={}) and system (n={}, {} modes)",
                cert.n,
                cert.k,
                cert.num_modes(),
                tri.resolution(),
                sys.dim(),
                sys.num_modes()
            )
        });
        return rec.finish();
    }
    let DwellParams {
        a_lower,
        a_upper,
        mu,
    } = cert.params;
    let alpha = cert.alpha;
    let verts = tri.vertices();

    for (i, vals) in cert.values.iter().enumerate() {
        for (k, &v) in vals.iter().enumerate() {
            let r = verts[k + 1].radius;
            let res = (a_lower * r - v).max(v - a_upper * r);
            rec.record(Condition::Bounds, res.max(0.0), || {
                format!("vertex {} mode {}", k + 1, i + 1)
            });
        }
    }

    for cone in tri.simplices() {
        for i in 0..sys.num_modes() {
            let grad = piece_gradient(tri, cone.id, &cert.values[i]);
            let a = sys.matrix(i);
            for j in 0..n {
                let xj = cone.x.column(j);
                let axj = a * xj;
                let slope = grad.dot(&axj);
                let radius = xj.norm();
                let coeffs = &cone.x_inv * &axj;
                let scale = coeffs.amax().max(radius);
                let vj = cert.values[i][cone.vertex_ids[j] - 1];
                let loc = || {
                    format!(
                        "simplex {} vertex {} mode {}",
                        cone.id,
                        cone.vertex_ids[j],
                        i + 1
                    )
                };
                rec.record(
                    Condition::Decay,
                    ((slope + alpha * radius) / scale).max(0.0),
                    loc,
                );
                rec.record(
                    Condition::GradientDecay,
                    ((slope + alpha / a_upper * vj) / scale).max(0.0),
                    loc,
                );
            }
        }
    }

    for k in 0..outer {
        for i in 0..sys.num_modes() {
            for j in 0..sys.num_modes() {
                if i != j {
                    let res = (cert.values[j][k] - mu * cert.values[i][k]) / mu;
                    rec.record(Condition::Compatibility, res.max(0.0), || {
                        format!("vertex {} modes ({}, {})", k + 1, j + 1, i + 1)
                    });
                }
            }
        }
    }

    let prime = cert
        .values
        .iter()
        .map(|vals| sphere_max(tri, vals))
        .fold(f64::NEG_INFINITY, f64::max);
    let factor = fan_factor(tri);
    rec.record(
        Condition::Constants,
        (cert.a_upper_prime - prime).abs(),
        || {
            format!(
                "a_upper_prime stored {} recomputed {prime}",
                cert.a_upper_prime
            )
        },
    );
    let range = (a_lower - cert.a_upper_prime).max(cert.a_upper_prime - a_upper * factor);
    rec.record(Condition::Constants, range.max(0.0), || {
        format!(
            "a_upper_prime {} outside [{a_lower}, {}]",
            cert.a_upper_prime,
            a_upper * factor
        )
    });
    if !(alpha > 0.0) {
        rec.record(Condition::Constants, f64::INFINITY, || {
            format!("alpha {alpha} is not positive")
        });
    } else {
        let tau = dwell_time_bound(a_upper, mu, alpha);
        rec.record(
            Condition::Constants,
            (cert.tau_a - tau).abs() / (1.0 + tau),
            || format!("tau_a stored {} recomputed {tau}", cert.tau_a),
        );
    }
    rec.finish()
}
