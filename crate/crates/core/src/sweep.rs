//! μ sweeps: one LP per grid point on a shared triangulation and skeleton.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::certificate::dwell_time_bound;
use crate::lp::{solve, LpSkeleton, ModelError, Solution, SolverConfig, Status, VariableMap};
use crate::system::{DwellParams, SwitchedLinearSystem};
use crate::triangulation::{FanTriangulation, TriangulationError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("empty mu grid")]
    EmptyGrid,
    #[error("mu grid must be ascending with every mu >= 1 (offending entry {0})")]
    BadGrid(f64),
    #[error("need mu_min <= mu_max and mu_step > 0, got {min}..{max} step {step}")]
    BadRange { min: f64, max: f64, step: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mu: f64,
    /// Optimal α, NaN unless the solve succeeded.
    pub alpha: f64,
    /// `ā·ln μ/α`, or `∞` when α ≤ 0 or the solve failed.
    pub tau_a: f64,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub k: u32,
    pub a_lower: f64,
    pub a_upper: f64,
    pub points: Vec<SweepPoint>,
    /// Index of the smallest finite `tau_a`, earliest on ties.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_point(&self) -> Option<&SweepPoint> {
        self.best.map(|i| &self.points[i])
    }

    /// Whether optimal α never drops by more than `tol` (relative) as μ grows.
    pub fn alpha_monotone(&self, tol: f64) -> bool {
        let solved: Vec<&SweepPoint> = self
            .points
            .iter()
            .filter(|p| p.status == Status::Optimal)
            .collect();
        solved
            .windows(2)
            .all(|w| w[1].alpha >= w[0].alpha - tol * (1.0 + w[0].alpha.abs()))
    }

    /// `mu,alpha,tau_a,status`, one line per grid point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "mu,alpha,tau_a,status")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.mu, p.alpha, p.tau_a, p.status)?;
        }
        Ok(())
    }
}

/// `min, min + step, …` up to `max` inclusive (within a small fraction of a
/// step).
pub fn mu_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, SweepError> {
    if !(min <= max && step > 0.0 && min.is_finite() && max.is_finite()) {
        return Err(SweepError::BadRange { min, max, step });
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| min + i as f64 * step).collect();
    check_grid(&grid)?;
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<(), SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let mut prev = 1.0;
    for &mu in grid {
        if !(mu >= prev && mu.is_finite()) {
            return Err(SweepError::BadGrid(mu));
        }
        prev = mu;
    }
    Ok(())
}

fn better(a: &SweepPoint, b: &SweepPoint) -> bool {
    a.tau_a < b.tau_a || (a.tau_a == b.tau_a && a.mu < b.mu)
}

/// A fan and LP skeleton reused across μ values.
pub struct Sweeper<'a> {
    sys: &'a SwitchedLinearSystem,
    tri: FanTriangulation,
    skeleton: LpSkeleton,
    a_lower: f64,
    a_upper: f64,
    cfg: SolverConfig,
}

impl<'a> Sweeper<'a> {
    pub fn new(
        sys: &'a SwitchedLinearSystem,
        k: u32,
        params: &DwellParams,
        cfg: SolverConfig,
    ) -> Result<Self, SweepError> {
        let tri = FanTriangulation::build(sys.dim(), k)?;
        let skeleton = LpSkeleton::new(&tri, sys, params.a_lower, params.a_upper)?;
        Ok(Self {
            sys,
            tri,
            skeleton,
            a_lower: params.a_lower,
            a_upper: params.a_upper,
            cfg,
        })
    }

    pub fn triangulation(&self) -> &FanTriangulation {
        &self.tri
    }

    pub fn system(&self) -> &SwitchedLinearSystem {
        self.sys
    }

    pub fn map(&self) -> VariableMap {
        self.skeleton.map()
    }

    pub fn params(&self, mu: f64) -> DwellParams {
        DwellParams {
            a_lower: self.a_lower,
            a_upper: self.a_upper,
            mu,
        }
    }

    /// Full LP solution at `mu`.
    pub fn solve(&self, mu: f64) -> Result<Solution, SweepError> {
        let lp = self.skeleton.instantiate(mu)?;
        Ok(solve(&lp, &self.cfg))
    }

    /// One grid point; solver failures are recorded in the point.
    pub fn point(&self, mu: f64) -> Result<SweepPoint, SweepError> {
        let sol = self.solve(mu)?;
        let alpha = if sol.is_optimal() {
            sol.values[self.map().alpha_col]
        } else {
            f64::NAN
        };
        let tau_a = if alpha > 0.0 {
            dwell_time_bound(self.a_upper, mu, alpha)
        } else {
            f64::INFINITY
        };
        Ok(SweepPoint {
            mu,
            alpha,
            tau_a,
            status: sol.status,
            iterations: sol.iterations,
        })
    }

    pub fn sweep(&self, grid: &[f64]) -> Result<SweepResult, SweepError> {
        check_grid(grid)?;
        let points = grid
            .par_iter()
            .map(|&mu| self.point(mu))
            .collect::<Result<Vec<_>, _>>()?;
        let mut best: Option<usize> = None;
        for (i, p) in points.iter().enumerate() {
            if p.tau_a.is_finite() && best.is_none_or(|b| better(p, &points[b])) {
                best = Some(i);
            }
        }
        Ok(SweepResult {
            k: self.tri.resolution(),
            a_lower: self.a_lower,
            a_upper: self.a_upper,
            points,
            best,
        })
    }

    /// Golden-section search for a smaller `tau_a` inside `[lo, hi]`, with
    /// both ends probed. `tau_a(μ)` need not be unimodal, so the result is
    /// only the best probe.
    pub fn refine(&self, lo: f64, hi: f64, iters: usize) -> Result<SweepPoint, SweepError> {
        let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        check_grid(&[a, b])?;
        let mut best = self.point(a)?;
        if a == b {
            return Ok(best);
        }
        let keep = |p: SweepPoint, best: &mut SweepPoint| {
            if better(&p, best) {
                *best = p;
            }
            p.tau_a
        };
        keep(self.point(b)?, &mut best);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = keep(self.point(c)?, &mut best);
        let mut fd = keep(self.point(d)?, &mut best);
        for _ in 0..iters {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = keep(self.point(c)?, &mut best);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = keep(self.point(d)?, &mut best);
            }
        }
        Ok(best)
    }
}

/// Solves the LP at every μ of `grid` (ascending, all ≥ 1).
pub fn sweep(
    sys: &SwitchedLinearSystem,
    k: u32,
    grid: &[f64],
    params: &DwellParams,
    cfg: SolverConfig,
) -> Result<SweepResult, SweepError> {
    check_grid(grid)?;
    Sweeper::new(sys, k, params, cfg)?.sweep(grid)
}

/// See [`Sweeper::refine`].
pub fn refine(
    sys: &SwitchedLinearSystem,
    k: u32,
    bracket: (f64, f64),
    params: &DwellParams,
    iters: usize,
    cfg: SolverConfig,
) -> Result<SweepPoint, SweepError> {
    Sweeper::new(sys, k, params, cfg)?.refine(bracket.0, bracket.1, iters)
}
