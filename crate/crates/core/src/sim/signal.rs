//! Switching signals with a prescribed average dwell-time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Default chattering bound `N0` of generated signals.
pub const DEFAULT_N0: f64 = 2.0;

/// Absolute slack on the switch-count inequality, for rounding in switch
/// times.
pub const ADT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("average dwell-time must be positive, got {0}")]
    TauA(f64),
    #[error("N0 must be at least 1, got {0}")]
    N0(f64),
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("need at least one mode")]
    NoModes,
}

/// Piecewise-constant, right-continuous mode schedule on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchingSignal {
    /// Ascending, all in `(0, horizon]`.
    pub switch_times: Vec<f64>,
    /// Mode on `[0, t_1)`, `[t_1, t_2)`, …; one longer than `switch_times`.
    pub mode_seq: Vec<usize>,
    pub n0: f64,
    pub tau_a: f64,
    pub horizon: f64,
}

impl SwitchingSignal {
    /// Mode active at `t` (right-continuous).
    pub fn mode_at(&self, t: f64) -> usize {
        let k = self.switch_times.partition_point(|&s| s <= t);
        self.mode_seq[k]
    }

    pub fn num_switches(&self) -> usize {
        self.switch_times.len()
    }
}

/// Token bucket: each switch spends a token, tokens refill at rate `1/tau_a`
/// up to `n0`. Any window then holds at most `n0 + (t − s)/tau_a` switches.
/// Switch attempts arrive after uniform gaps in `(0, min(tau_a, horizon))`;
/// an attempt without a token waits for one. Successive modes differ.
pub fn generate_adt_signal(
    seed: u64,
    num_modes: usize,
    tau_a: f64,
    n0: f64,
    horizon: f64,
) -> Result<SwitchingSignal, SignalError> {
    if !(tau_a > 0.0) {
        return Err(SignalError::TauA(tau_a));
    }
    if !(n0 >= 1.0) {
        return Err(SignalError::N0(n0));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SignalError::Horizon(horizon));
    }
    if num_modes == 0 {
        return Err(SignalError::NoModes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mode = rng.random_range(0..num_modes);
    let mut mode_seq = vec![mode];
    let mut switch_times = Vec::new();
    if num_modes == 1 {
        return Ok(SwitchingSignal {
            switch_times,
            mode_seq,
            n0,
            tau_a,
            horizon,
        });
    }
    // a slightly slow refill absorbs rounding in the accumulated switch times
    let rate = (1.0 - 1e-9) / tau_a;
    let max_gap = tau_a.min(horizon);
    let mut tokens = n0;
    let mut t = 0.0;
    loop {
        let mut next = t + rng.random::<f64>() * max_gap;
        tokens = (tokens + (next - t) * rate).min(n0);
        if tokens < 1.0 {
            if rate == 0.0 {
                break;
            }
            let wait = (1.0 - tokens) / rate;
            next += wait;
            tokens = 1.0;
        }
        if next > horizon {
            break;
        }
        if next <= t {
            // zero gap: the attempt collapses onto the previous switch
            continue;
        }
        tokens -= 1.0;
        t = next;
        let step = rng.random_range(1..num_modes);
        mode = (mode + step) % num_modes;
        switch_times.push(t);
        mode_seq.push(mode);
    }
    Ok(SwitchingSignal {
        switch_times,
        mode_seq,
        n0,
        tau_a,
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdtViolation {
    pub s: f64,
    pub t: f64,
    pub count: usize,
    pub allowed: f64,
}

/// Checks `N(s, t) ≤ N0 + (t − s)/τ_a` on every window spanned by two switch
/// times and on all pairs of `samples` evenly spaced points of the horizon.
/// Windows are closed, which only makes the check stricter.
///
/// Over switch pairs `i ≤ j` the excess `(j − i + 1) − (t_j − t_i)/τ_a` is
/// maximized with a running minimum, so all pairs are covered in one pass.
pub fn check_adt(signal: &SwitchingSignal, samples: usize) -> Result<(), AdtViolation> {
    let rate = if signal.tau_a.is_infinite() {
        0.0
    } else {
        1.0 / signal.tau_a
    };
    let allowed = |s: f64, t: f64| signal.n0 + (t - s) * rate + ADT_SLACK;
    let times = &signal.switch_times;
    // min over i ≤ j of (i − t_i·rate), with its index
    let mut low: Option<(f64, usize)> = None;
    for (j, &t) in times.iter().enumerate() {
        let here = j as f64 - t * rate;
        if low.is_none_or(|(v, _)| here < v) {
            low = Some((here, j));
        }
        let (_, i) = low.unwrap();
        let count = j - i + 1;
        if count as f64 > allowed(times[i], t) {
            return Err(AdtViolation {
                s: times[i],
                t,
                count,
                allowed: allowed(times[i], t),
            });
        }
    }
    let grid: Vec<f64> = (0..samples)
        .map(|k| signal.horizon * k as f64 / (samples.max(2) - 1) as f64)
        .collect();
    for (i, &s) in grid.iter().enumerate() {
        let first = times.partition_point(|&x| x < s);
        for &t in &grid[i + 1..] {
            let count = times.partition_point(|&x| x <= t) - first;
            if count as f64 > allowed(s, t) {
                return Err(AdtViolation {
                    s,
                    t,
                    count,
                    allowed: allowed(s, t),
                });
            }
        }
    }
    Ok(())
}
