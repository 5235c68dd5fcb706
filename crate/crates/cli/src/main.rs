//! `dwellcert`: average dwell-time bounds from CPA multiple Lyapunov functions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use dwellcert::certificate::{
    self, CertificateError, CpaCertificate, VerificationReport, VERIFY_TOL,
};
use dwellcert::lp::{assemble, row_count, solve};
use dwellcert::sim::{self, RunSpec, SeedRun, DEFAULT_N0};
use dwellcert::sweep::{mu_grid, Sweeper};
use dwellcert::{
    bundled, Backend, DwellParams, FanTriangulation, SolverConfig, SwitchedLinearSystem,
};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NO_CERTIFICATE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dwellcert",
    version,
    about = "Average dwell-time bounds for switched linear systems"
)]
struct Cli {
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the LP at one μ and extract a certificate.
    Bound(BoundArgs),
    /// Solve the LP over a μ grid and report the best bound.
    Sweep(SweepArgs),
    /// Recheck a certificate file.
    Verify(VerifyArgs),
    /// Simulate random ADT signals against a certificate.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// System description (JSON) or a bundled name: example1, example2, example3.
    #[arg(long)]
    system: String,
    /// Fan resolution.
    #[arg(long = "K", visible_alias = "k")]
    k: u32,
    #[arg(long, default_value_t = DwellParams::DEFAULT_A_LOWER)]
    a_lower: f64,
    #[arg(long, default_value_t = DwellParams::DEFAULT_A_UPPER)]
    a_upper: f64,
    /// LP backend: dual-simplex or dense-tableau.
    #[arg(long, default_value = "dual-simplex")]
    backend: Backend,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    mu: f64,
    /// Write the certificate here.
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Write the LP in CPLEX LP format here.
    #[arg(long)]
    lp_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1.0)]
    mu_min: f64,
    #[arg(long, default_value_t = 3.0)]
    mu_max: f64,
    #[arg(long, default_value_t = 0.05)]
    mu_step: f64,
    /// Golden-section iterations around the best grid point.
    #[arg(long)]
    refine: Option<usize>,
    /// CSV output (`mu,alpha,tau_a,status`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    cert: PathBuf,
    #[arg(long, default_value_t = VERIFY_TOL)]
    tol: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    cert: PathBuf,
    /// Seeds 0..seeds are run.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Signal dwell-time as a multiple of the certified one.
    #[arg(long, default_value_t = 1.1)]
    tau_factor: f64,
    /// Signal dwell-time used when the certificate allows arbitrary switching.
    #[arg(long, default_value_t = 0.1)]
    fast_tau: f64,
    /// Chattering bound of the generated signals.
    #[arg(long, default_value_t = DEFAULT_N0)]
    n0: f64,
    /// Simulated time; defaults to the horizon the certificate guarantees convergence by.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    /// Write one trajectory CSV per seed here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// A failed run: exit code plus message.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bound(a) => cmd_bound(a, cli.format),
        Command::Sweep(a) => cmd_sweep(a, cli.format),
        Command::Verify(a) => cmd_verify(a, cli.format),
        Command::Simulate(a) => cmd_simulate(a, cli.format),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_system(spec: &str) -> Result<SwitchedLinearSystem, Failure> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(sys) = bundled::by_name(spec) {
            return Ok(sys);
        }
    }
    let text = fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("{spec}: {e}")))?;
    SwitchedLinearSystem::from_json(&text).map_err(|e| Failure(EXIT_INPUT, format!("{spec}: {e}")))
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) {
    match format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(value).expect("report serializes")
        ),
        Format::Text => print!("{}", text()),
    }
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

#[derive(Serialize)]
struct BoundReport {
    n: usize,
    k: u32,
    mu: f64,
    a_lower: f64,
    a_upper: f64,
    status: String,
    alpha: serde_json::Value,
    a_upper_prime: Option<f64>,
    tau_a: Option<f64>,
    arbitrary_switching: bool,
    num_vars: usize,
    num_decay_rows: usize,
    num_compat_rows: usize,
    iterations: usize,
    solve_seconds: f64,
    verified: Option<bool>,
    certificate: Option<PathBuf>,
}

fn cmd_bound(a: &BoundArgs, format: Format) -> Outcome {
    let sys = load_system(&a.problem.system)?;
    let params = DwellParams::new(a.problem.a_lower, a.problem.a_upper, a.mu)?;
    let tri = FanTriangulation::build(sys.dim(), a.problem.k)?;
    let (lp, _) = assemble(&tri, &sys, &params)?;
    if let Some(path) = &a.lp_out {
        lp.write_lp_format(path)?;
    }
    let (num_vars, num_decay_rows, num_compat_rows) = row_count(&tri, sys.num_modes());
    let start = Instant::now();
    let sol = solve(&lp, &SolverConfig::with_backend(a.problem.backend));
    let solve_seconds = start.elapsed().as_secs_f64();

    let mut report = BoundReport {
        n: sys.dim(),
        k: a.problem.k,
        mu: a.mu,
        a_lower: params.a_lower,
        a_upper: params.a_upper,
        status: sol.status.to_string(),
        alpha: json_number(sol.values.first().copied().unwrap_or(f64::NAN)),
        a_upper_prime: None,
        tau_a: None,
        arbitrary_switching: false,
        num_vars,
        num_decay_rows,
        num_compat_rows,
        iterations: sol.iterations,
        solve_seconds,
        verified: None,
        certificate: None,
    };
    let header = |r: &BoundReport| {
        let mut s = String::new();
        let _ = writeln!(s, "system      n = {}, {} modes", r.n, sys.num_modes());
        let _ = writeln!(s, "fan         K = {}", r.k);
        let _ = writeln!(
            s,
            "LP          {} variables, {} decay rows, {} compatibility rows",
            r.num_vars, r.num_decay_rows, r.num_compat_rows
        );
        let _ = writeln!(
            s,
            "solve       {} after {} iterations in {:.3} s",
            r.status, r.iterations, r.solve_seconds
        );
        let _ = writeln!(s, "mu          {}", r.mu);
        let _ = writeln!(s, "alpha       {}", r.alpha);
        s
    };

    let cert = match CpaCertificate::extract(&sol, &tri, &sys, &params) {
        Ok(c) => c,
        Err(e @ CertificateError::NoCertificate { .. }) => {
            emit(format, &report, || format!("{}{e}\n", header(&report)));
            return Ok(EXIT_NO_CERTIFICATE);
        }
        Err(e) => return Err(Failure(EXIT_INPUT, e.to_string())),
    };
    let check = certificate::verify(&cert, &tri, &sys, VERIFY_TOL);
    report.a_upper_prime = Some(cert.a_upper_prime);
    report.tau_a = Some(cert.tau_a);
    report.arbitrary_switching = params.mu == 1.0;
    report.verified = Some(check.passed);
    if let Some(path) = &a.cert {
        cert.save(path)?;
        report.certificate = Some(path.clone());
    }
    emit(format, &report, || {
        let mut s = header(&report);
        let _ = writeln!(s, "a_upper'    {}", cert.a_upper_prime);
        if report.arbitrary_switching {
            let _ = writeln!(
                s,
                "tau_a       0 (common Lyapunov function; arbitrary switching)"
            );
        } else {
            let _ = writeln!(
                s,
                "tau_a       {} (infimal bound; stable for every average dwell-time strictly greater)",
                cert.tau_a
            );
        }
        let _ = writeln!(s, "verified    {}", if check.passed { "yes" } else { "NO" });
        if let Some(p) = &report.certificate {
            let _ = writeln!(s, "certificate {}", p.display());
        }
        s
    });
    Ok(if check.passed { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Serialize)]
struct SweepReport<'a> {
    result: &'a dwellcert::SweepResult,
    refined: Option<dwellcert::SweepPoint>,
}

fn cmd_sweep(a: &SweepArgs, format: Format) -> Outcome {
    let sys = load_system(&a.problem.system)?;
    let grid = mu_grid(a.mu_min, a.mu_max, a.mu_step)?;
    let params = DwellParams::new(a.problem.a_lower, a.problem.a_upper, 1.0)?;
    let sweeper = Sweeper::new(
        &sys,
        a.problem.k,
        &params,
        SolverConfig::with_backend(a.problem.backend),
    )?;
    let result = sweeper.sweep(&grid)?;
    if let Some(path) = &a.out {
        let file = fs::File::create(path)
            .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?;
        result.write_csv(std::io::BufWriter::new(file))?;
    }
    let refined = match (a.refine, result.best_point()) {
        (Some(iters), Some(best)) => {
            let lo = (best.mu - a.mu_step).max(1.0);
            let hi = best.mu + a.mu_step;
            Some(sweeper.refine(lo, hi, iters)?)
        }
        _ => None,
    };
    let report = SweepReport {
        result: &result,
        refined,
    };
    emit(format, &report, || {
        let mut s = String::new();
        let _ = writeln!(s, "{} grid points, K = {}", result.points.len(), result.k);
        for p in &result.points {
            let _ = writeln!(
                s,
                "  mu {:<8} alpha {:<24} tau_a {:<22} {}",
                p.mu, p.alpha, p.tau_a, p.status
            );
        }
        match result.best_point() {
            Some(b) => {
                let _ = writeln!(s, "best        mu = {}, tau_a = {}", b.mu, b.tau_a);
            }
            None => {
                let _ = writeln!(s, "best        none (alpha <= 0 at every grid point)");
            }
        }
        if let Some(r) = refined {
            let _ = writeln!(s, "refined     mu = {}, tau_a = {}", r.mu, r.tau_a);
        }
        s
    });
    let found = result.best.is_some() || refined.is_some_and(|r| r.tau_a.is_finite());
    Ok(if found { EXIT_OK } else { EXIT_NO_CERTIFICATE })
}

fn load_certificate(path: &Path) -> Result<CpaCertificate, Failure> {
    CpaCertificate::load(path).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn cmd_verify(a: &VerifyArgs, format: Format) -> Outcome {
    let cert = load_certificate(&a.cert)?;
    let tri = cert.triangulation()?;
    let report: VerificationReport = certificate::verify(&cert, &tri, &cert.system, a.tol);
    emit(format, &report, || {
        let w = &report.worst;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "certificate n = {}, K = {}, mu = {}",
            cert.n, cert.k, cert.params.mu
        );
        let _ = writeln!(
            s,
            "alpha {}  a_upper' {}  tau_a {}",
            cert.alpha, cert.a_upper_prime, cert.tau_a
        );
        let _ = writeln!(s, "worst residuals (tol {:e}):", report.tol);
        for (name, v) in [
            ("structure", w.structure),
            ("bounds", w.bounds),
            ("decay", w.decay),
            ("compatibility", w.compatibility),
            ("gradient_decay", w.gradient_decay),
            ("constants", w.constants),
        ] {
            let _ = writeln!(s, "  {name:<15} {v:e}");
        }
        for o in &report.offenses {
            let _ = writeln!(
                s,
                "  violated {} at {}: {:e}",
                o.condition, o.location, o.residual
            );
        }
        let _ = writeln!(s, "{}", if report.passed { "PASSED" } else { "FAILED" });
        s
    });
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    passed: bool,
    adt_ok: bool,
    report: sim::EmpiricalReport,
}

#[derive(Serialize)]
struct SimulateReport {
    spec: RunSpec,
    seeds: Vec<SeedSummary>,
    passed: bool,
}

fn cmd_simulate(a: &SimulateArgs, format: Format) -> Outcome {
    let cert = load_certificate(&a.cert)?;
    let tri = cert.triangulation()?;
    if !(a.tau_factor > 1.0) {
        return Err(Failure(
            EXIT_INPUT,
            format!("--tau-factor must exceed 1, got {}", a.tau_factor),
        ));
    }
    let signal_tau = if cert.tau_a > 0.0 {
        a.tau_factor * cert.tau_a
    } else {
        a.fast_tau
    };
    let horizon = match a.horizon {
        Some(h) => h,
        None => sim::convergence_horizon(&cert, &tri, signal_tau, a.n0)
            .ok_or_else(|| Failure(EXIT_INPUT, "signal is too fast for the certificate".into()))?,
    };
    let spec = RunSpec {
        signal_tau,
        n0: a.n0,
        horizon,
        sample_dt: a.dt,
    };
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
    }
    let runs: Vec<SeedRun> = (0..a.seeds)
        .into_par_iter()
        .map(|seed| sim::run_seed(&cert, &tri, &cert.system, &spec, seed))
        .collect::<Result<_, _>>()?;
    if let Some(dir) = &a.out_dir {
        for run in &runs {
            let path = dir.join(format!("trajectory_seed{}.csv", run.seed));
            let file = fs::File::create(&path)?;
            sim::write_trajectory_csv(std::io::BufWriter::new(file), &run.trajectory, &cert, &tri)?;
        }
    }
    let seeds: Vec<SeedSummary> = runs
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            passed: r.passed(),
            adt_ok: r.adt.is_ok(),
            report: r.report.clone(),
        })
        .collect();
    let passed = seeds.iter().all(|s| s.passed);
    let report = SimulateReport {
        spec,
        seeds,
        passed,
    };
    emit(format, &report, || {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "signal tau_a {}  N0 {}  horizon {}  dt {}",
            spec.signal_tau, spec.n0, spec.horizon, spec.sample_dt
        );
        for r in &report.seeds {
            let e = &r.report;
            let _ = writeln!(
                s,
                "seed {:<4} {}  switches {:<6} adt {}  decay {:.9}  jump {:.9}  |x(T)|/|x0| {:e}",
                r.seed,
                if r.passed { "ok  " } else { "FAIL" },
                e.num_switches,
                if r.adt_ok { "ok" } else { "FAIL" },
                e.worst_decay_ratio,
                e.worst_jump_ratio,
                e.final_ratio
            );
        }
        let _ = writeln!(s, "{}", if report.passed { "PASSED" } else { "FAILED" });
        s
    });
    Ok(if passed { EXIT_OK } else { EXIT_VERIFY })
}
