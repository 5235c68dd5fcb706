//! Simulation harness: ADT switching signals, exact integration of the
//! switched dynamics and empirical checks of a certificate along
//! trajectories.

pub mod expm;
pub mod signal;

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use expm::expm;
pub use signal::{
    check_adt, generate_adt_signal, AdtViolation, SignalError, SwitchingSignal, DEFAULT_N0,
};

use crate::certificate::CpaCertificate;
use crate::system::SwitchedLinearSystem;
use crate::triangulation::{FanTriangulation, TriangulationError};

/// Multiplicative slack on inter-switch decay.
pub const DECAY_SLACK: f64 = 1e-6;
/// Multiplicative slack on jumps at switches.
pub const JUMP_SLACK: f64 = 1e-9;
/// Required contraction `‖x(T)‖ / ‖x(0)‖` at the horizon.
pub const CONVERGENCE_RATIO: f64 = 1e-3;
/// Contraction below which pointwise checks stop, well before subnormals.
const UNDERFLOW_RATIO: f64 = 1e-200;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample step must be positive and finite, got {0}")]
    SampleStep(f64),
    #[error("initial state has dimension {got}, system has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("initial state is not finite")]
    NonFiniteStart,
    #[error("signal uses mode {mode} but the system has {modes}")]
    Mode { mode: usize, modes: usize },
    #[error("state became non-finite at t = {0}")]
    NumericalFailure(f64),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Ascending; multiples of the sample step, every switch time and the horizon.
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Mode active from each sample on (right-continuous).
    pub modes: Vec<usize>,
    /// Whether a switch happens at the sample.
    pub is_switch: Vec<bool>,
}

/// Integrates `ẋ = A_σ x` exactly with one matrix exponential per step.
pub fn integrate(
    sys: &SwitchedLinearSystem,
    signal: &SwitchingSignal,
    x0: &[f64],
    sample_dt: f64,
) -> Result<Trajectory, SimError> {
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(SimError::SampleStep(sample_dt));
    }
    if x0.len() != sys.dim() {
        return Err(SimError::Dimension {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteStart);
    }
    if let Some(&mode) = signal.mode_seq.iter().find(|&&m| m >= sys.num_modes()) {
        return Err(SimError::Mode {
            mode,
            modes: sys.num_modes(),
        });
    }

    // sample grid merged with the switch times
    let steps = (signal.horizon / sample_dt).floor() as usize;
    let mut events: Vec<(f64, bool)> = (0..=steps).map(|k| (k as f64 * sample_dt, false)).collect();
    events.extend(signal.switch_times.iter().map(|&t| (t, true)));
    events.push((signal.horizon, false));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    events.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 |= b.1;
            true
        } else {
            false
        }
    });

    let step_cache: Vec<DMatrix<f64>> = sys
        .modes()
        .iter()
        .map(|m| expm(&(&m.matrix * sample_dt)))
        .collect();
    let mut x = DVector::from_column_slice(x0);
    let mut traj = Trajectory {
        times: Vec::with_capacity(events.len()),
        states: Vec::with_capacity(events.len()),
        modes: Vec::with_capacity(events.len()),
        is_switch: Vec::with_capacity(events.len()),
    };
    let mut t = 0.0;
    let mut mode = signal.mode_seq[0];
    for (te, switch) in events {
        let dt = te - t;
        if dt > 0.0 {
            let a = &sys.matrix(mode);
            x = if (dt - sample_dt).abs() <= 1e-12 * sample_dt {
                &step_cache[mode] * &x
            } else {
                expm(&(*a * dt)) * &x
            };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NumericalFailure(te));
            }
        }
        t = te;
        mode = signal.mode_at(t);
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.modes.push(mode);
        traj.is_switch.push(switch);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub inter_switch_decay: bool,
    pub switch_jumps: bool,
    pub converged: bool,
    /// Largest `V_i(x(t)) / (V_i(x(s)) e^{−(α/ā)(t−s)})` seen.
    pub worst_decay_ratio: f64,
    /// Largest `V_next / (μ V_prev)` at a switch.
    pub worst_jump_ratio: f64,
    /// `‖x(T)‖ / ‖x(0)‖`.
    pub final_ratio: f64,
    pub num_switches: usize,
}

impl EmpiricalReport {
    pub fn passed(&self) -> bool {
        self.inter_switch_decay && self.switch_jumps && self.converged
    }
}

/// Horizon after which the certificate guarantees
/// `‖x(T)‖ ≤ CONVERGENCE_RATIO·‖x(0)‖` for any signal with dwell-time
/// `signal_tau` and chattering bound `n0`, using the sandwich constants of
/// the certificate. `None` when the signal is too fast for the certificate.
pub fn convergence_horizon(
    cert: &CpaCertificate,
    tri: &FanTriangulation,
    signal_tau: f64,
    n0: f64,
) -> Option<f64> {
    let mu = cert.params.mu;
    let rate =
        cert.alpha / cert.params.a_upper - if mu == 1.0 { 0.0 } else { mu.ln() / signal_tau };
    if !(rate > 0.0) {
        return None;
    }
    // V ≥ c‖x‖ with c the smallest vertex value over the radius
    let radii: Vec<f64> = tri.outer_vertices().iter().map(|v| v.radius).collect();
    let low = cert
        .values
        .iter()
        .flat_map(|vals| vals.iter().zip(&radii).map(|(v, r)| v / r))
        .fold(f64::INFINITY, f64::min);
    let spread = (cert.a_upper_prime / low).ln() + n0 * mu.ln() - CONVERGENCE_RATIO.ln();
    Some(spread / rate)
}

/// Checks the decay promised by `cert` along the trajectory from `x0`
/// under `signal`.
pub fn check_certificate_empirically(
    cert: &CpaCertificate,
    tri: &FanTriangulation,
    sys: &SwitchedLinearSystem,
    signal: &SwitchingSignal,
    x0: &[f64],
    sample_dt: f64,
) -> Result<(EmpiricalReport, Trajectory), SimError> {
    let traj = integrate(sys, signal, x0, sample_dt)?;
    let decay = cert.alpha / cert.params.a_upper;
    let mu = cert.params.mu;
    let value = |k: usize, mode: usize| cert.evaluate(tri, traj.states[k].as_slice(), mode);

    let mut worst_decay: f64 = 0.0;
    let mut worst_jump: f64 = 0.0;
    let norm0 = traj.states[0].norm();
    // start index of the current constant-mode interval
    let mut start = 0;
    for k in 1..traj.times.len() {
        if traj.states[k].norm() < UNDERFLOW_RATIO * norm0 {
            break;
        }
        // samples start..=k all evolve under the mode of `start`
        let mode = traj.modes[start];
        let vk = value(k, mode)?;
        for s in [start, k - 1] {
            let vs = value(s, mode)?;
            if vs > 0.0 {
                let bound = vs * (-decay * (traj.times[k] - traj.times[s])).exp();
                worst_decay = worst_decay.max(vk / bound);
            }
        }
        if traj.is_switch[k] {
            let next = traj.modes[k];
            if vk > 0.0 {
                worst_jump = worst_jump.max(value(k, next)? / (mu * vk));
            }
            start = k;
        }
    }
    let final_ratio = traj.states.last().map_or(0.0, |x| x.norm()) / norm0;
    let report = EmpiricalReport {
        inter_switch_decay: worst_decay <= 1.0 + DECAY_SLACK,
        switch_jumps: worst_jump <= 1.0 + JUMP_SLACK,
        converged: final_ratio <= CONVERGENCE_RATIO,
        worst_decay_ratio: worst_decay,
        worst_jump_ratio: worst_jump,
        final_ratio,
        num_switches: signal.num_switches(),
    };
    Ok((report, traj))
}

/// Pseudorandom nonzero start in `[-1, 1]^n`, deterministic per seed.
pub fn initial_state(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_5151);
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if x.iter().any(|&v| v != 0.0) {
            return x;
        }
    }
}

/// Signal and sampling parameters shared by all seeds of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSpec {
    pub signal_tau: f64,
    pub n0: f64,
    pub horizon: f64,
    pub sample_dt: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub x0: Vec<f64>,
    pub signal: SwitchingSignal,
    /// Result of [`check_adt`] on the generated signal.
    pub adt: Result<(), AdtViolation>,
    pub report: EmpiricalReport,
    pub trajectory: Trajectory,
}

impl SeedRun {
    pub fn passed(&self) -> bool {
        self.adt.is_ok() && self.report.passed()
    }
}

/// Number of evenly spaced points used for the sampled ADT windows.
pub const ADT_SAMPLES: usize = 200;

/// Generates the signal and start for `seed` and runs the empirical checks.
pub fn run_seed(
    cert: &CpaCertificate,
    tri: &FanTriangulation,
    sys: &SwitchedLinearSystem,
    spec: &RunSpec,
    seed: u64,
) -> Result<SeedRun, SimError> {
    let signal = generate_adt_signal(
        seed,
        sys.num_modes(),
        spec.signal_tau,
        spec.n0,
        spec.horizon,
    )?;
    let adt = check_adt(&signal, ADT_SAMPLES);
    let x0 = initial_state(seed, sys.dim());
    let (report, trajectory) =
        check_certificate_empirically(cert, tri, sys, &signal, &x0, spec.sample_dt)?;
    Ok(SeedRun {
        seed,
        x0,
        signal,
        adt,
        report,
        trajectory,
    })
}

/// `t,mode,x1..xn,V_active`, mode numbered from 1.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    traj: &Trajectory,
    cert: &CpaCertificate,
    tri: &FanTriangulation,
) -> io::Result<()> {
    let n = traj.states.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string(), "mode".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("V_active".into());
    writeln!(w, "{}", header.join(","))?;
    for ((t, x), &mode) in traj.times.iter().zip(&traj.states).zip(&traj.modes) {
        let v = cert
            .evaluate(tri, x.as_slice(), mode)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let mut cols = vec![t.to_string(), (mode + 1).to_string()];
        cols.extend(x.iter().map(|c| c.to_string()));
        cols.push(v.to_string());
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}
