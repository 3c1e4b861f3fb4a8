//! Closed-form RIP machinery: the statistical RIP failure probability, the
//! k-th spectrum of a modulated clock, the spreading constant `C`, and the
//! resulting bounds on `δ₂`, `δ_s` and guaranteed sparsity.

use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::clock::ClockConfig;
use crate::dft::{self, Dft};
use crate::signal::TimeGrid;
use crate::{Error, Result};

/// `√2 − 1`, the `δ_{2s}` threshold for convex recovery.
pub const CONVEX_RIP_THRESHOLD: f64 = SQRT_2 - 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripResult {
    pub n: usize,
    pub k: usize,
    pub s: usize,
    pub delta: f64,
    /// May exceed 1, in which case the guarantee is vacuous.
    pub failure_probability: f64,
}

impl StripResult {
    pub fn is_vacuous(&self) -> bool {
        self.failure_probability > 1.0
    }
}

/// Statistical RIP:
/// `(2s/K + (2s+7)/(N−3)) / (δ − (s−1)/(N−1))²`.
pub fn strip(n: usize, k: usize, s: usize, delta: f64) -> Result<StripResult> {
    if n <= 3 || k == 0 || s == 0 {
        return Err(Error::invalid(format!("need N > 3, K >= 1, s >= 1 (N = {n}, K = {k}, s = {s})")));
    }
    let (nf, kf, sf) = (n as f64, k as f64, s as f64);
    let floor = (sf - 1.0) / (nf - 1.0);
    if !(delta > floor && delta < 1.0) {
        return Err(Error::invalid(format!("delta = {delta} outside ({floor}, 1)")));
    }
    let numerator = 2.0 * sf / kf + (2.0 * sf + 7.0) / (nf - 3.0);
    let gap = delta - floor;
    Ok(StripResult { n, k, s, delta, failure_probability: numerator / (gap * gap) })
}

pub fn strip_failure_probability(n: usize, k: usize, s: usize, delta: f64) -> Result<f64> {
    strip(n, k, s, delta).map(|r| r.failure_probability)
}

/// Largest `s` whose `2s`-sparse STRIP failure probability at `delta` is at
/// most `p_fail`; 0 if none qualifies.
pub fn max_recoverable_sparsity(n: usize, k: usize, delta: f64, p_fail: f64) -> Result<usize> {
    if !(p_fail > 0.0 && p_fail < 1.0) {
        return Err(Error::invalid(format!("p_fail = {p_fail} outside (0, 1)")));
    }
    // Validate the fixed arguments once.
    strip(n, k, 1, delta)?;
    let mut best = 0;
    let mut s = 1;
    while 2 * s <= n {
        match strip(n, k, 2 * s, delta) {
            Ok(r) if r.failure_probability <= p_fail => best = s,
            _ => break,
        }
        s += 1;
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationConstant {
    pub c_value: f64,
    /// Harmonic at which the maximum is attained.
    pub worst_k: u32,
    /// `C_k` for `k = 1..=k_max`.
    pub per_k: Vec<f64>,
    pub band_definition: &'static str,
}

pub const BAND_DEFINITION: &str =
    "bins floor(k*min(theta')/(2pi f_res)) ..= ceil(k*max(theta')/(2pi f_res)), wrapped mod N";

/// Empirical spreading constant: the largest
/// `C_k² = max|G_k|² · k f_dev / (f_res Σ_band |G_k|²)` over `k = 1..=k_max`,
/// where `G_k` is the unitary DFT of `e^{jkθ(t)}` and the band is the span of
/// the instantaneous frequency `kθ'(t)/2π`.
pub fn estimate_c(clock: &ClockConfig, grid: &TimeGrid, k_max: u32) -> Result<ModulationConstant> {
    let f_dev = clock.f_dev();
    if !(f_dev > 0.0) {
        return Err(Error::invalid("C is undefined without modulation (f_dev = 0)"));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let n = grid.n_points();
    let m = clock.modulation();
    let theta: Vec<f64> = (0..n).map(|i| m.theta(grid.time(i))).collect();
    let (fi_min, fi_max) = (0..n)
        .map(|i| m.theta_prime(grid.time(i)) / TAU)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)));
    let dft = Dft::new(n);
    let f_res = grid.f_res();

    let per_k: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let kf = f64::from(k);
            let mut g: Vec<Complex64> = theta.iter().map(|&th| Complex64::from_polar(1.0, kf * th)).collect();
            dft.forward_unitary(&mut g);
            let lo = (kf * fi_min / f_res).floor() as i64;
            let hi = (kf * fi_max / f_res).ceil() as i64;
            let band: f64 = (lo..=hi).map(|b| g[b.rem_euclid(n as i64) as usize].norm_sqr()).sum();
            let peak = g.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
            (peak * kf * f_dev / (f_res * band)).sqrt()
        })
        .collect();
    let (worst, &c_value) = per_k
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("k_max >= 1");
    Ok(ModulationConstant { c_value, worst_k: worst as u32 + 1, per_k, band_definition: BAND_DEFINITION })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipBound {
    /// `C √(f_res/f_dev)`.
    pub delta2: f64,
    /// `s · δ₂`.
    pub delta_s: f64,
}

/// `δ₂ ≤ C√(f_res/f_dev)` and `δ_s ≤ s δ₂`; only valid while `δ₂ < 0.5`.
pub fn rip_bound(c: f64, f_res: f64, f_dev: f64, s: usize) -> Result<RipBound> {
    if !(c > 0.0 && f_res > 0.0 && f_dev > 0.0) {
        return Err(Error::invalid("C, f_res and f_dev must be positive"));
    }
    let delta2 = c * (f_res / f_dev).sqrt();
    if delta2 >= 0.5 {
        return Err(Error::BoundNotApplicable { value: delta2 });
    }
    Ok(RipBound { delta2, delta_s: s as f64 * delta2 })
}

/// Largest `s` with `2s·δ₂ < √2 − 1`.
pub fn guaranteed_sparsity_convex(delta2: f64) -> Result<usize> {
    if !(delta2 > 0.0) {
        return Err(Error::invalid(format!("delta2 must be positive, got {delta2}")));
    }
    let mut s = (CONVEX_RIP_THRESHOLD / (2.0 * delta2)).floor() as usize;
    while s > 0 && 2.0 * s as f64 * delta2 >= CONVEX_RIP_THRESHOLD {
        s -= 1;
    }
    Ok(s)
}

/// `1/(1 + √s)`: OMP recovers every `s`-sparse signal when `δ_{s+1}` is below
/// this.
pub fn omp_guarantee_threshold(s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::invalid("s must be at least 1"));
    }
    Ok(1.0 / (1.0 + (s as f64).sqrt()))
}

/// Spectral norm deviation of two real tones under uniform sampling:
/// `√(2 + 4A₁A₂/(A₁²+A₂²)) − 1` when their bins collide, 0 otherwise.
pub fn uniform_two_tone_deviation(a1: f64, a2: f64, congruent: bool) -> f64 {
    if congruent {
        (2.0 + 4.0 * a1 * a2 / (a1 * a1 + a2 * a2)).sqrt() - 1.0
    } else {
        0.0
    }
}

/// Precomputed `θ` samples and DFT plan for taking many harmonic images of
/// signals on one grid.
#[derive(Debug, Clone)]
pub struct HarmonicImages {
    theta: Vec<f64>,
    f_dev: f64,
    f_s1: f64,
    grid: TimeGrid,
    dft: Dft,
}

impl HarmonicImages {
    pub fn new(clock: &ClockConfig, grid: &TimeGrid) -> Self {
        let m = clock.modulation();
        HarmonicImages {
            theta: (0..grid.n_points()).map(|i| m.theta(grid.time(i))).collect(),
            f_dev: clock.f_dev(),
            f_s1: clock.f_s1(),
            grid: *grid,
            dft: Dft::new(grid.n_points()),
        }
    }

    /// Spectrum of `x(t)·e^{jkθ(t)}`, shifted up by `k·f_s1`: the image that
    /// the `k`-th clock harmonic contributes to the folded output.
    pub fn spectrum(&self, x: &[Complex64], k: i64) -> Result<Vec<Complex64>> {
        let n = self.grid.n_points();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if k.unsigned_abs() as f64 * self.f_dev >= 0.5 * self.grid.atomic_rate() {
            return Err(Error::OffGridImage { k });
        }
        let kf = k as f64;
        let mut buf: Vec<Complex64> =
            x.iter().zip(&self.theta).map(|(&v, &th)| v * Complex64::from_polar(1.0, kf * th)).collect();
        self.dft.forward_unitary(&mut buf);
        let shift = (kf * self.f_s1 / self.grid.f_res()).round() as i64;
        buf.rotate_right(shift.rem_euclid(n as i64) as usize);
        Ok(buf)
    }

    /// `‖X_k‖₂ / ‖X‖₂`.
    pub fn energy_ratio(&self, x: &[Complex64], k: i64) -> Result<f64> {
        let xk = self.spectrum(x, k)?;
        Ok(dft::norm(&xk) / dft::norm(x))
    }
}

/// One-off [`HarmonicImages::spectrum`].
pub fn kth_spectrum(x: &[Complex64], k: i64, clock: &ClockConfig, grid: &TimeGrid) -> Result<Vec<Complex64>> {
    HarmonicImages::new(clock, grid).spectrum(x, k)
}

/// One-off [`HarmonicImages::energy_ratio`].
pub fn kth_energy_ratio(x: &[Complex64], k: i64, clock: &ClockConfig, grid: &TimeGrid) -> Result<f64> {
    HarmonicImages::new(clock, grid).energy_ratio(x, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Modulation;

    #[test]
    fn strip_table_rows() {
        let d = CONVEX_RIP_THRESHOLD;
        let p = strip_failure_probability(1_000_000, 20_000, 168, d).unwrap();
        assert!((p - 0.100).abs() < 0.002, "{p}");
        let p = strip_failure_probability(1_000_000, 20_000, 84, d).unwrap();
        assert!((p - 0.050).abs() < 0.002, "{p}");
        for (tol, want) in [(0.1, 84), (0.05, 42), (0.01, 8), (0.005, 4)] {
            assert_eq!(max_recoverable_sparsity(1_000_000, 20_000, d, tol).unwrap(), want);
        }
    }

    #[test]
    fn strip_rejects_bad_delta() {
        assert!(strip(1000, 100, 10, 0.001).is_err());
        assert!(strip(1000, 100, 10, 1.0).is_err());
        assert!(strip(3, 100, 1, 0.3).is_err());
        let r = strip(1000, 10, 100, 0.2).unwrap();
        assert!(r.is_vacuous());
    }

    #[test]
    fn nothing_qualifies() {
        assert_eq!(max_recoverable_sparsity(1000, 2, CONVEX_RIP_THRESHOLD, 0.01).unwrap(), 0);
    }

    #[test]
    fn bound_examples() {
        let b = rip_bound(1.21, 0.01e6, 10e6, 2).unwrap();
        assert!((b.delta2 - 0.0382).abs() < 1e-4);
        assert!((b.delta_s - 2.0 * b.delta2).abs() < 1e-15);
        // 10 μs window: f_res/f_dev = 1/100.
        let b = rip_bound(1.23, 0.1e6, 10e6, 3).unwrap();
        assert!((b.delta_s - 0.369).abs() < 1e-3);
        assert!(matches!(rip_bound(1.0, 1.0, 2.0, 1), Err(Error::BoundNotApplicable { .. })));
    }

    #[test]
    fn convex_sparsity() {
        assert_eq!(guaranteed_sparsity_convex(0.0382).unwrap(), 5);
        assert_eq!(guaranteed_sparsity_convex(CONVEX_RIP_THRESHOLD).unwrap(), 0);
        assert_eq!(guaranteed_sparsity_convex(0.5).unwrap(), 0);
        // Exactly on the threshold is not strictly below it.
        assert_eq!(guaranteed_sparsity_convex(CONVEX_RIP_THRESHOLD / 4.0).unwrap(), 1);
    }

    #[test]
    fn omp_thresholds() {
        assert!((omp_guarantee_threshold(2).unwrap() - 0.41421).abs() < 1e-5);
        assert_eq!(omp_guarantee_threshold(1).unwrap(), 0.5);
        assert!((omp_guarantee_threshold(4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_tone_closed_form() {
        assert!((uniform_two_tone_deviation(1.0, 1.0, true) - 1.0).abs() < 1e-15);
        assert_eq!(uniform_two_tone_deviation(1.0, 3.0, false), 0.0);
    }

    #[test]
    fn zeroth_spectrum_is_plain_dft() {
        let grid = TimeGrid::new(1e-10, 512).unwrap();
        let clock = ClockConfig::new(200e6, Modulation::LinearChirp { f_dev: 10e6, period: 20e-9 }).unwrap();
        let x: Vec<Complex64> = (0..512).map(|i| Complex64::new((i as f64).cos(), 0.5)).collect();
        let got = kth_spectrum(&x, 0, &clock, &grid).unwrap();
        let mut want = x.clone();
        Dft::new(512).forward_unitary(&mut want);
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn off_grid_image_rejected() {
        let grid = TimeGrid::new(1e-9, 64).unwrap();
        let clock = ClockConfig::new(200e6, Modulation::Sinusoid { f_dev: 100e6, period: 1e-8 }).unwrap();
        let x = vec![Complex64::new(1.0, 0.0); 64];
        assert_eq!(kth_spectrum(&x, 5, &clock, &grid), Err(Error::OffGridImage { k: 5 }));
    }

    #[test]
    fn c_needs_modulation() {
        let grid = TimeGrid::new(1e-9, 64).unwrap();
        assert!(estimate_c(&ClockConfig::uniform(1e8).unwrap(), &grid, 3).is_err());
    }
}
