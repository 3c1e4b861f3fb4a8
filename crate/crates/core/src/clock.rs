//! The phase-modulated sample clock `s(t) = sin(2π f_s1 t + θ(t))`, its
//! positive-slope zero crossings on the atomic grid, and the analytic
//! Nyquist-zone folding map.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::dft::Dft;
use crate::signal::TimeGrid;
use crate::{Error, Result};

/// Phase-modulation law `θ(t)` applied to the sample clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    None,
    /// Sawtooth resweep: the instantaneous clock frequency rises linearly
    /// from `f_s1` to `f_s1 + f_dev` over each `period`, then resets.
    LinearChirp { f_dev: f64, period: f64 },
    /// Sinusoidal frequency modulation; `f_dev` is the peak-to-peak span of
    /// the instantaneous frequency.
    Sinusoid { f_dev: f64, period: f64 },
}

impl Modulation {
    pub fn f_dev(&self) -> f64 {
        match *self {
            Modulation::None => 0.0,
            Modulation::LinearChirp { f_dev, .. } | Modulation::Sinusoid { f_dev, .. } => f_dev,
        }
    }

    /// `θ(t)` in radians.
    pub fn theta(&self, t: f64) -> f64 {
        match *self {
            Modulation::None => 0.0,
            Modulation::LinearChirp { f_dev, period } => {
                let tau = t.rem_euclid(period);
                PI * (f_dev / period) * tau * tau
            }
            Modulation::Sinusoid { f_dev, period } => {
                let f_m = 1.0 / period;
                f_dev / (2.0 * f_m) * (TAU * f_m * t).sin()
            }
        }
    }

    /// `θ'(t)` in rad/s.
    pub fn theta_prime(&self, t: f64) -> f64 {
        match *self {
            Modulation::None => 0.0,
            Modulation::LinearChirp { f_dev, period } => TAU * (f_dev / period) * t.rem_euclid(period),
            Modulation::Sinusoid { f_dev, period } => PI * f_dev * (TAU * t / period).cos(),
        }
    }

    /// Instants in `(0, end)` where `θ` jumps (sawtooth resets).
    fn resets_before(&self, end: f64) -> Vec<f64> {
        match *self {
            Modulation::LinearChirp { period, .. } => {
                let mut out = Vec::new();
                let mut t = period;
                while t < end {
                    out.push(t);
                    t += period;
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

/// `θ(t)` for a modulation law.
pub fn theta_eval(modulation: &Modulation, t: f64) -> f64 {
    modulation.theta(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockConfig {
    f_s1: f64,
    modulation: Modulation,
}

impl ClockConfig {
    pub fn new(f_s1: f64, modulation: Modulation) -> Result<Self> {
        if !(f_s1 > 0.0 && f_s1.is_finite()) {
            return Err(Error::invalid(format!("f_s1 must be positive, got {f_s1}")));
        }
        let f_dev = modulation.f_dev();
        if !(f_dev >= 0.0) || f_dev >= f_s1 {
            return Err(Error::invalid(format!("need 0 <= f_dev < f_s1, got f_dev = {f_dev}")));
        }
        match modulation {
            Modulation::LinearChirp { period, .. } | Modulation::Sinusoid { period, .. } if !(period > 0.0) => {
                return Err(Error::invalid("modulation period must be positive"));
            }
            _ => {}
        }
        Ok(ClockConfig { f_s1, modulation })
    }

    pub fn uniform(f_s1: f64) -> Result<Self> {
        ClockConfig::new(f_s1, Modulation::None)
    }

    pub fn f_s1(&self) -> f64 {
        self.f_s1
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }

    pub fn f_dev(&self) -> f64 {
        self.modulation.f_dev()
    }

    /// Clock phase `2π f_s1 t + θ(t)`.
    pub fn phase(&self, t: f64) -> f64 {
        TAU * self.f_s1 * t + self.modulation.theta(t)
    }
}

/// Grid-quantized zero-crossing sample times of a clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSchedule {
    indices: Vec<usize>,
    times: Vec<f64>,
    cycles: Vec<i64>,
}

impl SampleSchedule {
    /// Schedule from explicit grid indices (used for full and synthetic
    /// schedules). Indices must strictly increase.
    pub fn from_indices(grid: &TimeGrid, indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("schedule indices must strictly increase"));
        }
        if indices.last().is_some_and(|&i| i >= grid.n_points()) {
            return Err(Error::invalid("schedule index outside grid"));
        }
        let times = indices.iter().map(|&i| grid.time(i)).collect();
        let cycles = (0..indices.len() as i64).collect();
        Ok(SampleSchedule { indices, times, cycles })
    }

    /// Every grid point (the identity sampling operator).
    pub fn full(grid: &TimeGrid) -> Self {
        SampleSchedule::from_indices(grid, (0..grid.n_points()).collect()).expect("full schedule is valid")
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Unquantized zero-crossing times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Target clock cycle of each sample (`φ(t_k) = 2π·cycle`).
    pub fn cycles(&self) -> &[i64] {
        &self.cycles
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// First `k` samples.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.len() {
            return Err(Error::invalid(format!("cannot keep {k} of {} samples", self.len())));
        }
        Ok(SampleSchedule {
            indices: self.indices[..k].to_vec(),
            times: self.times[..k].to_vec(),
            cycles: self.cycles[..k].to_vec(),
        })
    }
}

const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-9 * TAU;

/// Round to the nearest grid index, ties toward the earlier index.
fn quantize(t: f64, t_atom: f64) -> usize {
    (t / t_atom - 0.5).ceil().max(0.0) as usize
}

/// Solves `φ(t) = 2π·cycle` on `[lo, hi]`, where `φ` is continuous and
/// increasing. Newton steps that leave the bracket fall back to bisection.
fn solve_crossing(
    clock: &ClockConfig,
    seg_start: f64,
    cycle: i64,
    seed: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let target = TAU * cycle as f64;
    let w = TAU * clock.f_s1;
    // Inside a segment the sawtooth phase is measured from its start so the
    // modular reduction never hits the reset discontinuity.
    let phase = |t: f64| -> (f64, f64) {
        match clock.modulation {
            Modulation::LinearChirp { f_dev, period } => {
                let tau = t - seg_start;
                let rate = f_dev / period;
                (w * t + PI * rate * tau * tau, w + TAU * rate * tau)
            }
            m => (w * t + m.theta(t), w + m.theta_prime(t)),
        }
    };
    let mut t = seed.clamp(lo, hi);
    for _ in 0..NEWTON_MAX_ITERS {
        let (p, dp) = phase(t);
        let f = p - target;
        if f.abs() < NEWTON_TOL {
            return Ok(t);
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = t - f / dp;
        t = if dp > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Err(Error::NewtonDiverged { cycle, iterations: NEWTON_MAX_ITERS })
}

/// Zero crossings of the clock inside the grid window, quantized to grid
/// indices.
///
/// Each crossing solves `2π f_s1 t_k + θ(t_k) = 2πk`. Sawtooth resets split
/// the window into segments on which the phase is continuous; cycle numbers
/// restart from the phase just after each reset.
pub fn compute_sample_schedule(clock: &ClockConfig, grid: &TimeGrid) -> Result<SampleSchedule> {
    let t_end = grid.duration();
    if clock.f_s1 * t_end < 1.0 {
        return Err(Error::invalid("grid window shorter than one clock cycle"));
    }
    let mut bounds = vec![0.0];
    bounds.extend(clock.modulation.resets_before(t_end));
    bounds.push(t_end);

    let w = TAU * clock.f_s1;
    let mut indices = Vec::new();
    let mut times = Vec::new();
    let mut cycles = Vec::new();
    let mut prev_time: Option<f64> = None;

    for seg in bounds.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let phase_a = w * a; // θ restarts at zero on every segment start
        let phase_b = match clock.modulation {
            Modulation::LinearChirp { f_dev, period } => w * b + PI * (f_dev / period) * (b - a) * (b - a),
            m => w * b + m.theta(b),
        };
        let start = phase_a / TAU;
        let mut cycle = if (start - start.round()).abs() < 1e-9 { start.round() } else { start.ceil() } as i64;
        let mut lo = a;
        while TAU * (cycle as f64) < phase_b {
            let theta_prev = match prev_time {
                Some(tp) if tp >= a => clock.modulation.theta(tp),
                _ => 0.0,
            };
            let seed = (TAU * cycle as f64 - theta_prev) / w;
            let t = solve_crossing(clock, a, cycle, seed, lo, b)?;
            if t >= t_end {
                break;
            }
            let idx = quantize(t, grid.t_atom());
            if idx >= grid.n_points() {
                break;
            }
            if let (Some(&last), Some(tp)) = (indices.last(), prev_time) {
                if idx == last {
                    return Err(Error::GridTooCoarse { first: tp, second: t, index: idx });
                }
            }
            indices.push(idx);
            times.push(t);
            cycles.push(cycle);
            prev_time = Some(t);
            lo = t;
            cycle += 1;
        }
    }
    Ok(SampleSchedule { indices, times, cycles })
}

/// A tone's image after folding into the first Nyquist zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedTone {
    pub f_if: f64,
    pub k_h: i64,
    pub beta: i8,
    pub m_index: i64,
    pub nyquist_zone: u64,
}

/// Analytic folding of an RF tone at `f_c` by a clock of mean rate `f_s1`:
/// `k_H = round(f_c/f_s1)`, `β = sgn(f_c − k_H f_s1)` (with `sgn 0 = +1`),
/// `M = β k_H`.
pub fn fold_tone(f_c: f64, clock: &ClockConfig) -> Result<FoldedTone> {
    if !(f_c >= 0.0 && f_c.is_finite()) {
        return Err(Error::invalid(format!("tone frequency must be nonnegative, got {f_c}")));
    }
    let f_s1 = clock.f_s1;
    let k_h = (f_c / f_s1).round() as i64;
    let diff = f_c - k_h as f64 * f_s1;
    let beta: i8 = if diff < 0.0 { -1 } else { 1 };
    Ok(FoldedTone {
        f_if: diff.abs(),
        k_h,
        beta,
        m_index: i64::from(beta) * k_h,
        nyquist_zone: (2.0 * f_c / f_s1).floor() as u64,
    })
}

/// Modulation index `M` of Nyquist zone `n`: 0, −1, 1, −2, 2, …
pub fn zone_to_m_index(zone: u64) -> i64 {
    let half = zone.div_ceil(2) as i64;
    if zone % 2 == 1 {
        -half
    } else {
        half
    }
}

/// Inverse of [`zone_to_m_index`].
pub fn m_index_to_zone(m: i64) -> u64 {
    if m < 0 {
        (2 * (-m) - 1) as u64
    } else {
        (2 * m) as u64
    }
}

/// Candidate RF frequencies `k f_s1 ± f_if` over zones `0..=max_zone`.
pub fn unfold_candidates(f_if: f64, clock: &ClockConfig, max_zone: u64) -> Vec<f64> {
    let f_s1 = clock.f_s1;
    let mut out = Vec::new();
    for k in 0..=(max_zone / 2 + 1) {
        for f in [k as f64 * f_s1 - f_if, k as f64 * f_s1 + f_if] {
            if f >= 0.0 && (2.0 * f / f_s1).floor() as u64 <= max_zone && !out.contains(&f) {
                out.push(f);
            }
        }
    }
    out
}

/// Zero-fills `signal` outside the schedule and returns the unitary-DFT
/// magnitude on bins `0..=floor((f_s1/2)/f_res)`.
pub fn folded_spectrum(signal: &[Complex64], schedule: &SampleSchedule, grid: &TimeGrid, f_s1: f64) -> Result<Vec<f64>> {
    let n = grid.n_points();
    if signal.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: signal.len() });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for &i in schedule.indices() {
        if i >= n {
            return Err(Error::invalid("schedule index outside grid"));
        }
        buf[i] = signal[i];
    }
    Dft::new(n).forward_unitary(&mut buf);
    let last = (((0.5 * f_s1) / grid.f_res()).floor() as usize).min(n - 1);
    Ok(buf[..=last].iter().map(|v| v.norm()).collect())
}
