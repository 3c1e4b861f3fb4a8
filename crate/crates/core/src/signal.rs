//! Atomic time grid, tone descriptions, sparse spectra and the synthesis and
//! noise helpers that turn them into sample vectors.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Uniform fine grid on which signals live and sample times are quantized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_atom: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_atom: f64, n_points: usize) -> Result<Self> {
        if !(t_atom > 0.0 && t_atom.is_finite()) {
            return Err(Error::invalid(format!("t_atom must be positive, got {t_atom}")));
        }
        if n_points < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {n_points}")));
        }
        Ok(TimeGrid { t_atom, n_points })
    }

    /// Grid at `atomic_rate` Hz spanning `duration` seconds (rounded to a whole
    /// number of steps).
    pub fn from_rate_and_duration(atomic_rate: f64, duration: f64) -> Result<Self> {
        if !(atomic_rate > 0.0 && duration > 0.0) {
            return Err(Error::invalid("atomic rate and duration must be positive"));
        }
        let n = (atomic_rate * duration).round() as usize;
        TimeGrid::new(1.0 / atomic_rate, n)
    }

    pub fn t_atom(&self) -> f64 {
        self.t_atom
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn atomic_rate(&self) -> f64 {
        1.0 / self.t_atom
    }

    pub fn duration(&self) -> f64 {
        self.n_points as f64 * self.t_atom
    }

    pub fn f_res(&self) -> f64 {
        1.0 / self.duration()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.atomic_rate()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.t_atom
    }

    /// Signed frequency of a DFT bin, in `[-f_atomic/2, f_atomic/2)`.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        let n = self.n_points;
        if 2 * bin < n {
            bin as f64 * self.f_res()
        } else {
            (bin as f64 - n as f64) * self.f_res()
        }
    }

    /// Fractional bin position of a frequency, in `[0, N)`.
    pub fn frequency_to_bin(&self, frequency: f64) -> f64 {
        (frequency / self.f_res()).rem_euclid(self.n_points as f64)
    }

    pub fn nearest_bin(&self, frequency: f64) -> usize {
        (self.frequency_to_bin(frequency).round() as usize) % self.n_points
    }
}

/// A constant-envelope tone `A cos(2πft + ψ)` (or its complex analogue).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl ToneSpec {
    pub fn new(frequency: f64, amplitude: f64, phase: f64) -> Self {
        ToneSpec { frequency, amplitude, phase }
    }

    pub fn unit(frequency: f64) -> Self {
        ToneSpec::new(frequency, 1.0, 0.0)
    }

    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if !(self.frequency >= 0.0 && self.frequency < grid.nyquist()) {
            return Err(Error::invalid(format!(
                "tone at {} Hz is outside [0, {}) Hz",
                self.frequency,
                grid.nyquist()
            )));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::invalid("tone amplitude must be nonnegative"));
        }
        Ok(())
    }
}

/// An `N`-bin spectrum stored as (bin, coefficient) pairs with strictly
/// increasing bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpectrum {
    grid: TimeGrid,
    bins: Vec<usize>,
    coefficients: Vec<Complex64>,
}

impl SparseSpectrum {
    pub fn new(grid: TimeGrid, mut entries: Vec<(usize, Complex64)>) -> Result<Self> {
        entries.sort_by_key(|&(b, _)| b);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("duplicate bin {}", w[0].0)));
            }
        }
        if let Some(&(b, _)) = entries.last() {
            if b >= grid.n_points() {
                return Err(Error::invalid(format!("bin {b} outside grid of {}", grid.n_points())));
            }
        }
        let (bins, coefficients) = entries.into_iter().unzip();
        Ok(SparseSpectrum { grid, bins, coefficients })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn sparsity(&self) -> usize {
        self.bins.len()
    }

    pub fn norm(&self) -> f64 {
        crate::dft::norm(&self.coefficients)
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut dense = vec![Complex64::new(0.0, 0.0); self.grid.n_points()];
        for (&b, &c) in self.bins.iter().zip(&self.coefficients) {
            dense[b] = c;
        }
        dense
    }
}

/// Whether synthesized tones are real cosines or complex exponentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalMode {
    Real,
    #[default]
    Complex,
}

/// Samples the tone sum on every grid point. Real mode keeps a zero
/// imaginary part.
pub fn synthesize_signal(tones: &[ToneSpec], grid: &TimeGrid, mode: SignalMode) -> Result<Vec<Complex64>> {
    for tone in tones {
        tone.validate(grid)?;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for tone in tones {
        let w = std::f64::consts::TAU * tone.frequency * grid.t_atom();
        for (n, v) in out.iter_mut().enumerate() {
            let arg = w * n as f64 + tone.phase;
            *v += match mode {
                SignalMode::Complex => Complex64::from_polar(tone.amplitude, arg),
                SignalMode::Real => Complex64::new(tone.amplitude * arg.cos(), 0.0),
            };
        }
    }
    Ok(out)
}

/// Evaluates the tone sum only at the given grid indices.
pub fn sample_tones(tones: &[ToneSpec], grid: &TimeGrid, indices: &[usize], mode: SignalMode) -> Result<Vec<Complex64>> {
    for tone in tones {
        tone.validate(grid)?;
    }
    Ok(indices
        .iter()
        .map(|&idx| {
            let t = grid.time(idx);
            tones
                .iter()
                .map(|tone| {
                    let arg = std::f64::consts::TAU * tone.frequency * t + tone.phase;
                    match mode {
                        SignalMode::Complex => Complex64::from_polar(tone.amplitude, arg),
                        SignalMode::Real => Complex64::new(tone.amplitude * arg.cos(), 0.0),
                    }
                })
                .sum()
        })
        .collect())
}

pub fn mean_power(signal: &[Complex64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    crate::dft::norm_sqr(signal) / signal.len() as f64
}

/// Adds white Gaussian noise with per-sample variance
/// `mean_power / 10^(snr_db/10)`. Complex mode splits the variance evenly
/// between the quadratures. `snr_db = +inf` returns the input unchanged.
pub fn add_noise(signal: &[Complex64], snr_db: f64, seed: u64, mode: SignalMode) -> Vec<Complex64> {
    if snr_db == f64::INFINITY {
        return signal.to_vec();
    }
    let variance = mean_power(signal) / 10f64.powf(snr_db / 10.0);
    add_noise_with_variance(signal, variance, seed, mode)
}

pub fn add_noise_with_variance(signal: &[Complex64], variance: f64, seed: u64, mode: SignalMode) -> Vec<Complex64> {
    let mut rng = rng_from_seed(seed);
    match mode {
        SignalMode::Complex => {
            let sd = (variance / 2.0).sqrt();
            signal
                .iter()
                .map(|&v| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    v + Complex64::new(sd * re, sd * im)
                })
                .collect()
        }
        SignalMode::Real => {
            let sd = variance.sqrt();
            signal
                .iter()
                .map(|&v| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    v + Complex64::new(sd * re, 0.0)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::Dft;

    #[test]
    fn grid_derived_quantities() {
        let g = TimeGrid::new(1e-11, 1_000_000).unwrap();
        assert!((g.atomic_rate() - 1e11).abs() < 1.0);
        assert!((g.duration() - 1e-5).abs() < 1e-18);
        let rel = (g.f_res() * g.n_points() as f64 - g.atomic_rate()).abs() / g.atomic_rate();
        assert!(rel <= 2.0 * f64::EPSILON, "rel = {rel}");
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn empty_tone_list_is_silent() {
        let g = TimeGrid::new(1e-9, 32).unwrap();
        let x = synthesize_signal(&[], &g, SignalMode::Complex).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn bin_centered_complex_tone_has_one_line() {
        let g = TimeGrid::new(1e-9, 128).unwrap();
        let j = 9;
        let mut x = synthesize_signal(&[ToneSpec::unit(j as f64 * g.f_res())], &g, SignalMode::Complex).unwrap();
        Dft::new(g.n_points()).forward_unitary(&mut x);
        for (bin, v) in x.iter().enumerate() {
            let expected = if bin == j { (128f64).sqrt() } else { 0.0 };
            assert!((v.norm() - expected).abs() < 1e-9, "bin {bin}: {}", v.norm());
        }
    }

    #[test]
    fn two_real_tones_give_four_symmetric_peaks() {
        // 7.2 and 9.2 GHz on a 100 GHz grid; 10 ns window keeps both bin-centered.
        let g = TimeGrid::new(1e-11, 1000).unwrap();
        let tones = [ToneSpec::unit(7.2e9), ToneSpec::unit(9.2e9)];
        let mut x = synthesize_signal(&tones, &g, SignalMode::Real).unwrap();
        Dft::new(g.n_points()).forward_unitary(&mut x);
        let mags: Vec<f64> = x.iter().map(|v| v.norm()).collect();
        let mut peaks: Vec<usize> = (0..mags.len()).filter(|&i| mags[i] > 1.0).collect();
        peaks.sort();
        assert_eq!(peaks, vec![72, 92, 1000 - 92, 1000 - 72]);
        for &p in &peaks {
            assert!((mags[p] - mags[(1000 - p) % 1000]).abs() < 1e-9);
        }
    }

    #[test]
    fn tones_at_nyquist_are_rejected() {
        let g = TimeGrid::new(1e-9, 64).unwrap();
        assert!(synthesize_signal(&[ToneSpec::unit(0.5e9)], &g, SignalMode::Complex).is_err());
        assert!(synthesize_signal(&[ToneSpec::unit(-1.0)], &g, SignalMode::Complex).is_err());
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x = vec![Complex64::new(1.0, -2.0); 16];
        assert_eq!(add_noise(&x, f64::INFINITY, 3, SignalMode::Complex), x);
    }

    #[test]
    fn zero_db_noise_has_unit_variance() {
        let g = TimeGrid::new(1e-9, 100_000).unwrap();
        let x = synthesize_signal(&[ToneSpec::unit(1.234e6)], &g, SignalMode::Complex).unwrap();
        let y = add_noise(&x, 0.0, 11, SignalMode::Complex);
        let var = x.iter().zip(&y).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let x = vec![Complex64::new(1.0, 0.0); 64];
        assert_eq!(add_noise(&x, 5.0, 99, SignalMode::Complex), add_noise(&x, 5.0, 99, SignalMode::Complex));
        assert_ne!(add_noise(&x, 5.0, 99, SignalMode::Complex), add_noise(&x, 5.0, 98, SignalMode::Complex));
    }

    #[test]
    fn sparse_spectrum_rejects_duplicates_and_sorts() {
        let g = TimeGrid::new(1e-9, 16).unwrap();
        let one = Complex64::new(1.0, 0.0);
        assert!(SparseSpectrum::new(g, vec![(3, one), (3, one)]).is_err());
        assert!(SparseSpectrum::new(g, vec![(16, one)]).is_err());
        let s = SparseSpectrum::new(g, vec![(7, one), (2, one)]).unwrap();
        assert_eq!(s.bins(), &[2, 7]);
        assert_eq!(s.sparsity(), 2);
    }
}
