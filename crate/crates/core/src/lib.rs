//! Average dwell-time bounds for switched linear systems from piecewise-linear
//! multiple Lyapunov functions computed by linear programming.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bundled;
pub mod certificate;
pub mod lp;
pub mod sim;
pub mod sweep;
pub mod system;
pub mod triangulation;

pub use certificate::{CpaCertificate, VerificationReport};
pub use lp::{Backend, LinearProgram, Solution, SolverConfig, Status};
pub use sweep::{SweepPoint, SweepResult};
pub use system::{DwellParams, Mode, ParamsError, SwitchedLinearSystem, SystemError};
pub use triangulation::{FanTriangulation, SimplexCone, TriangulationError, Vertex};
