//! Cramér–Rao bound on the chirp slope of a folded tone, the zone-selection
//! probability it implies, and the Monte Carlo zone-identification
//! experiment driven by one-step OMP.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf::{erf, erfc};

use crate::clock::{compute_sample_schedule, ClockConfig, Modulation};
use crate::omp::omp_recover;
use crate::seed::{derive_seed, rng_from_seed};
use crate::sensing::SensingOperator;
use crate::signal::{add_noise, sample_tones, SignalMode, TimeGrid, ToneSpec};
use crate::{Error, Result};

/// `x_k = A exp[j(2π(α/2 (Δk)² + fΔk) + φ)] + w_k`, `k = 1..=K`, with
/// circular complex noise of total variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpModel {
    pub amplitude: f64,
    pub chirp_rate: f64,
    pub start_frequency: f64,
    pub phase: f64,
    pub step: f64,
    pub count: u64,
    pub noise_variance: f64,
}

impl ChirpModel {
    /// Model with the nuisance parameters (`α`, `f`, `φ`) zeroed; none of
    /// them affect the bound.
    pub fn new(amplitude: f64, step: f64, count: u64, noise_variance: f64) -> Result<Self> {
        let m = ChirpModel {
            amplitude,
            chirp_rate: 0.0,
            start_frequency: 0.0,
            phase: 0.0,
            step,
            count,
            noise_variance,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.noise_variance > 0.0 && self.step > 0.0) || self.count == 0 {
            return Err(Error::invalid("chirp model needs A > 0, sigma2 > 0, step > 0 and K >= 1"));
        }
        Ok(())
    }

    /// Noiseless sample `k`.
    pub fn sample(&self, k: u64) -> num_complex::Complex64 {
        let t = self.step * k as f64;
        let arg = TAU * (0.5 * self.chirp_rate * t * t + self.start_frequency * t) + self.phase;
        num_complex::Complex64::from_polar(self.amplitude, arg)
    }
}

/// `Σ_{i=1}^{K} i⁴` by direct summation.
pub fn sum_of_fourth_powers(k: u64) -> u128 {
    (1..=u128::from(k)).map(|i| i * i * i * i).sum()
}

/// `K(K+1)(2K+1)(3K²+3K−1)/30`.
pub fn sum_of_fourth_powers_closed_form(k: u64) -> u128 {
    let k = u128::from(k);
    if k == 0 {
        return 0;
    }
    k * (k + 1) * (2 * k + 1) * (3 * k * k + 3 * k - 1) / 30
}

/// `I(α) = A²π²Δ⁴ K(K+1)(2K+1)(3K²+3K−1) / (15σ²)`.
pub fn fisher_information(model: &ChirpModel) -> f64 {
    let k = model.count as f64;
    let poly = k * (k + 1.0) * (2.0 * k + 1.0) * (3.0 * k * k + 3.0 * k - 1.0);
    let a2 = model.amplitude * model.amplitude;
    a2 * PI * PI * model.step.powi(4) * poly / (15.0 * model.noise_variance)
}

/// Lower bound on the variance of any unbiased slope estimate.
pub fn crb_variance(model: &ChirpModel) -> f64 {
    1.0 / fisher_information(model)
}

/// Where a zone sits among the candidate slopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZonePosition {
    /// Neighbours on both sides: the estimate must land within half a
    /// spacing either way.
    Interior,
    /// Outermost zone: only one side can be confused.
    Edge,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Probability that a Gaussian unbiased estimate at the CRB falls closer to
/// the true slope than to its neighbours.
pub fn crb_zone_probability(model: &ChirpModel, slope_spacing: f64, position: ZonePosition) -> Result<f64> {
    model.validate()?;
    if !(slope_spacing > 0.0) {
        return Err(Error::invalid("slope spacing must be positive"));
    }
    let d = slope_spacing / (2.0 * crb_variance(model).sqrt());
    Ok(match position {
        ZonePosition::Interior => erf(d * FRAC_1_SQRT_2),
        ZonePosition::Edge => normal_cdf(d),
    })
}

/// Zone-selection probability averaged over `n_zones` equally likely zones:
/// the two outermost use the one-sided probability, the rest the two-sided.
pub fn nz_probability_from_crb(model: &ChirpModel, slope_spacing: f64, n_zones: u32) -> Result<f64> {
    if n_zones == 0 {
        return Err(Error::invalid("n_zones must be positive"));
    }
    if n_zones == 1 {
        model.validate()?;
        return Ok(1.0);
    }
    let interior = crb_zone_probability(model, slope_spacing, ZonePosition::Interior)?;
    let edge = crb_zone_probability(model, slope_spacing, ZonePosition::Edge)?;
    let n = f64::from(n_zones);
    Ok(((n - 2.0) * interior + 2.0 * edge) / n)
}

/// Setup for the zone-identification Monte Carlo.
///
/// Each sample count `K` gets its own grid whose window holds `K` clock
/// periods (`f_res = f_s1/K`) with `grid_factor·K` atomic points, so bin
/// `b` of a tone sits in zone `floor(2 b f_res / f_s1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NzTrialConfig {
    pub f_s1: f64,
    pub f_dev: f64,
    pub chirp_period: f64,
    pub grid_factor: usize,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub n_zones: u32,
    pub trials: usize,
}

impl NzTrialConfig {
    pub fn grid_for(&self, k: usize) -> Result<TimeGrid> {
        TimeGrid::new(1.0 / (self.f_s1 * self.grid_factor as f64), self.grid_factor * k)
    }

    pub fn clock(&self) -> Result<ClockConfig> {
        ClockConfig::new(self.f_s1, Modulation::LinearChirp { f_dev: self.f_dev, period: self.chirp_period })
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.n_zones == 0 {
            return Err(Error::invalid("trials and n_zones must be positive"));
        }
        if 2 * (self.n_zones as usize) > self.grid_factor {
            return Err(Error::invalid("grid too coarse for the requested number of zones"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NzPoint {
    pub k: usize,
    pub successes: usize,
    pub trials: usize,
}

impl NzPoint {
    pub fn probability(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Zone index of a (signed) frequency; negative frequencies map below zero.
fn zone_of(frequency: f64, f_s1: f64) -> i64 {
    (2.0 * frequency / f_s1).floor() as i64
}

/// Empirical zone-identification rate per sample count.
///
/// A trial draws one bin-centred unit tone with random phase uniformly over
/// the first `n_zones` zones, samples it at the first `K` clock crossings,
/// adds noise, runs a single OMP step and checks that the selected bin lies
/// in the tone's zone. Trial seeds come from [`derive_seed`] with tag
/// `"nz-trials"`, sweep index = position in `k_values`.
pub fn simulate_nz_trials(config: &NzTrialConfig, k_values: &[usize], seed: u64) -> Result<Vec<NzPoint>> {
    config.validate()?;
    let clock = config.clock()?;
    k_values
        .iter()
        .enumerate()
        .map(|(sweep, &k)| {
            if k == 0 {
                return Err(Error::invalid("sample count must be positive"));
            }
            let grid = config.grid_for(k)?;
            let schedule = compute_sample_schedule(&clock, &grid)?;
            if schedule.len() < k {
                return Err(Error::invalid(format!("window holds only {} of {k} samples", schedule.len())));
            }
            let op = SensingOperator::new(grid, schedule.truncated(k)?)?;
            // Each zone spans f_s1/2 = K/2 bins.
            let n_bins = config.n_zones as usize * k / 2;
            let successes = (0..config.trials as u64)
                .into_par_iter()
                .map(|t| -> Result<bool> {
                    let trial_seed = derive_seed(seed, "nz-trials", sweep as u64, t);
                    let mut rng = rng_from_seed(trial_seed);
                    let bin = rng.random_range(0..n_bins);
                    let tone = ToneSpec::new(bin as f64 * grid.f_res(), 1.0, rng.random_range(0.0..TAU));
                    let clean = sample_tones(&[tone], &grid, op.schedule().indices(), SignalMode::Complex)?;
                    let y = match config.snr_db {
                        Some(snr) => add_noise(&clean, snr, trial_seed ^ 0x5EED, SignalMode::Complex),
                        None => clean,
                    };
                    let found = omp_recover(&op, &y, 1, 0.0)?;
                    let detected = grid.bin_frequency(found.support[0]);
                    Ok(zone_of(detected, config.f_s1) == zone_of(tone.frequency, config.f_s1))
                })
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&ok| ok)
                .count();
            Ok(NzPoint { k, successes, trials: config.trials })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_information() {
        let m = ChirpModel::new(1.0, 1.0, 1, 1.0).unwrap();
        assert!((fisher_information(&m) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((crb_variance(&m) * fisher_information(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_laws() {
        let m = ChirpModel::new(1.3, 2e-3, 50, 0.7).unwrap();
        let noisier = ChirpModel { noise_variance: 1.4, ..m };
        assert!((fisher_information(&noisier) * 2.0 / fisher_information(&m) - 1.0).abs() < 1e-14);
        let louder = ChirpModel { amplitude: 2.6, ..m };
        assert!((crb_variance(&m) / crb_variance(&louder) - 4.0).abs() < 1e-12);
        let a = ChirpModel { count: 1000, ..m };
        let b = ChirpModel { count: 2000, ..m };
        assert!((crb_variance(&a) / crb_variance(&b) - 32.0).abs() < 0.1);
    }

    #[test]
    fn fourth_power_identity_small() {
        for k in 0..200 {
            assert_eq!(sum_of_fourth_powers(k), sum_of_fourth_powers_closed_form(k));
        }
    }

    #[test]
    fn zone_probability_limits() {
        let sharp = ChirpModel::new(1.0, 1e-3, 10_000, 1e-6).unwrap();
        assert!((nz_probability_from_crb(&sharp, 1.0, 20).unwrap() - 1.0).abs() < 1e-12);
        let vague = ChirpModel::new(1.0, 1e-9, 2, 10.0).unwrap();
        let p = crb_zone_probability(&vague, 1e-3, ZonePosition::Interior).unwrap();
        assert!(p < 1e-6);
        let edge = crb_zone_probability(&vague, 1e-3, ZonePosition::Edge).unwrap();
        assert!((edge - 0.5).abs() < 1e-6);
        assert!((nz_probability_from_crb(&vague, 1e-3, 20).unwrap() - 0.05).abs() < 1e-6);
        assert!(nz_probability_from_crb(&vague, 0.0, 20).is_err());
    }

    #[test]
    fn probability_grows_with_k() {
        let mut last = 0.0;
        for k in [8, 16, 32, 64, 128] {
            let m = ChirpModel::new(1.0, 5e-9, k, 0.1).unwrap();
            let p = nz_probability_from_crb(&m, 1e12, 20).unwrap();
            assert!(p >= last);
            last = p;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn model_samples() {
        let m = ChirpModel { chirp_rate: 2.0, start_frequency: 0.25, ..ChirpModel::new(1.5, 1.0, 4, 1.0).unwrap() };
        let s = m.sample(1);
        let want = TAU * (1.0 + 0.25);
        assert!((s.arg() - want.sin().atan2(want.cos())).abs() < 1e-12);
        assert!((s.norm() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_trials_always_succeed() {
        let config = NzTrialConfig {
            f_s1: 200e6,
            f_dev: 10e6,
            chirp_period: 10e-6,
            grid_factor: 100,
            snr_db: None,
            n_zones: 20,
            trials: 8,
        };
        let pts = simulate_nz_trials(&config, &[300], 3).unwrap();
        assert_eq!(pts[0].successes, 8);
        assert_eq!(simulate_nz_trials(&config, &[300], 3).unwrap(), pts);
    }
}
