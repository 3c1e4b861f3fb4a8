//! The implicit `K×N` sensing matrix `Φ`: rows of the inverse DFT picked out
//! by the sample schedule, columns scaled to unit norm.
//!
//! Atom `j` is `a_j[m] = e^{2πi k_m j/N} / √K` where `k_m` are the schedule
//! indices. Because every Gram entry depends only on `j − i`, the whole Gram
//! matrix is a lookup into the point-spread function
//! `psf[d] = (1/K) Σ_m e^{2πi k_m d/N}`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::clock::SampleSchedule;
use crate::dft::{self, Dft};
use crate::seed::rng_from_seed;
use crate::signal::{SparseSpectrum, TimeGrid};
use crate::{Error, Result};

/// Largest support accepted by [`SensingOperator::gram_eigen_bounds`].
pub const MAX_EIGEN_SUPPORT: usize = 64;

#[derive(Debug)]
pub struct SensingOperator {
    grid: TimeGrid,
    schedule: SampleSchedule,
    dft: Dft,
    scale: f64,
    psf: OnceLock<Vec<Complex64>>,
}

/// Extreme eigenvalues of a restricted Gram matrix `Φ*_Λ Φ_Λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `max(1 − λ_min, λ_max − 1)`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub sparsity: usize,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    /// Nearest-rank 95th percentile of `deviations`.
    pub p95: f64,
}

impl DeviationReport {
    pub fn from_deviations(sparsity: usize, deviations: Vec<f64>) -> Self {
        let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
        let p95 = percentile_nearest_rank(&deviations, 0.95);
        DeviationReport { sparsity, deviations, max_deviation, p95 }
    }
}

fn percentile_nearest_rank(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

impl SensingOperator {
    pub fn new(grid: TimeGrid, schedule: SampleSchedule) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::invalid("sample schedule is empty"));
        }
        if schedule.indices().iter().any(|&i| i >= grid.n_points()) {
            return Err(Error::invalid("schedule index outside grid"));
        }
        let scale = 1.0 / (schedule.len() as f64).sqrt();
        Ok(SensingOperator { dft: Dft::new(grid.n_points()), grid, schedule, scale, psf: OnceLock::new() })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn schedule(&self) -> &SampleSchedule {
        &self.schedule
    }

    /// Number of measurements `K`.
    pub fn n_measurements(&self) -> usize {
        self.schedule.len()
    }

    /// Number of bins `N`.
    pub fn n_bins(&self) -> usize {
        self.grid.n_points()
    }

    /// Column `j` of `Φ`.
    pub fn atom(&self, j: usize) -> Vec<Complex64> {
        let n = self.n_bins() as u64;
        self.schedule
            .indices()
            .iter()
            .map(|&k| dft::twiddle(dft::mul_mod(k as u64, j as u64, n), n) * self.scale)
            .collect()
    }

    /// `Φ x̂` for a dense length-`N` spectrum.
    pub fn apply_forward(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n_bins();
        if spectrum.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: spectrum.len() });
        }
        let mut buf = spectrum.to_vec();
        self.dft.inverse_raw(&mut buf);
        Ok(self.schedule.indices().iter().map(|&k| buf[k] * self.scale).collect())
    }

    /// `Φ x̂` for a sparse spectrum; small supports are summed directly.
    pub fn apply_forward_sparse(&self, spectrum: &SparseSpectrum) -> Result<Vec<Complex64>> {
        self.check_grid(spectrum)?;
        let n = self.n_bins();
        let cost_direct = spectrum.sparsity() as f64 * self.n_measurements() as f64;
        let cost_fft = n as f64 * (n as f64).log2().max(1.0);
        if cost_direct < cost_fft {
            Ok(self.forward_direct(spectrum.bins(), spectrum.coefficients()))
        } else {
            self.apply_forward(&spectrum.to_dense())
        }
    }

    fn forward_direct(&self, bins: &[usize], coefficients: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_bins() as u64;
        self.schedule
            .indices()
            .iter()
            .map(|&k| {
                let sum: Complex64 = bins
                    .iter()
                    .zip(coefficients)
                    .map(|(&j, &c)| c * dft::twiddle(dft::mul_mod(k as u64, j as u64, n), n))
                    .sum();
                sum * self.scale
            })
            .collect()
    }

    /// `Φ* y` over all `N` bins via one forward transform.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_bins()];
        self.adjoint_unscaled_into(y, &mut buf)?;
        buf.iter_mut().for_each(|v| *v *= self.scale);
        Ok(buf)
    }

    /// `√K · Φ* y` written into `buf`, which must hold `N` values.
    pub(crate) fn adjoint_unscaled_into(&self, y: &[Complex64], buf: &mut [Complex64]) -> Result<()> {
        let k = self.n_measurements();
        if y.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: y.len() });
        }
        buf.fill(Complex64::new(0.0, 0.0));
        for (&idx, &v) in self.schedule.indices().iter().zip(y) {
            buf[idx] = v;
        }
        self.dft.forward_raw(buf);
        Ok(())
    }

    /// `1/√K`, the atom normalisation.
    pub(crate) fn scale(&self) -> f64 {
        self.scale
    }

    /// Point-spread function; `psf()[d] = ⟨a_i, a_{i+d}⟩`.
    pub fn psf(&self) -> &[Complex64] {
        self.psf.get_or_init(|| {
            let mut buf = vec![Complex64::new(0.0, 0.0); self.n_bins()];
            for &idx in self.schedule.indices() {
                buf[idx] = Complex64::new(1.0, 0.0);
            }
            self.dft.inverse_raw(&mut buf);
            let inv_k = 1.0 / self.n_measurements() as f64;
            buf.iter_mut().for_each(|v| *v *= inv_k);
            buf
        })
    }

    /// `⟨a_i, a_j⟩ = a_i^H a_j`.
    pub fn gram_entry(&self, i: usize, j: usize) -> Complex64 {
        let n = self.n_bins();
        self.psf()[(j + n - i % n) % n]
    }

    /// `Φ*_Λ Φ_Λ` built by direct summation over the samples.
    pub fn gram_matrix(&self, support: &[usize]) -> DMatrix<Complex64> {
        let atoms: Vec<Vec<Complex64>> = support.iter().map(|&j| self.atom(j)).collect();
        let s = support.len();
        let mut g = DMatrix::zeros(s, s);
        for r in 0..s {
            g[(r, r)] = Complex64::new(dft::norm_sqr(&atoms[r]), 0.0);
            for c in r + 1..s {
                let v: Complex64 = atoms[r].iter().zip(&atoms[c]).map(|(a, b)| a.conj() * b).sum();
                g[(r, c)] = v;
                g[(c, r)] = v.conj();
            }
        }
        g
    }

    /// Extreme eigenvalues of the restricted Gram matrix.
    pub fn gram_eigen_bounds(&self, support: &[usize]) -> Result<GramBounds> {
        if support.len() > MAX_EIGEN_SUPPORT {
            return Err(Error::SupportTooLarge { size: support.len(), limit: MAX_EIGEN_SUPPORT });
        }
        if support.is_empty() {
            return Err(Error::invalid("support is empty"));
        }
        self.check_support(support)?;
        let eig = self.gram_matrix(support).symmetric_eigenvalues();
        let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(GramBounds { lambda_min, lambda_max, delta: (1.0 - lambda_min).max(lambda_max - 1.0) })
    }

    /// `| ‖Φ*_Λ Φ x̂‖₂ / ‖x̂‖₂ − 1 |` with `Λ` the support of `x̂`.
    pub fn spectral_norm_deviation(&self, spectrum: &SparseSpectrum) -> Result<f64> {
        self.check_grid(spectrum)?;
        let x_norm = spectrum.norm();
        if x_norm == 0.0 {
            return Err(Error::ZeroInput);
        }
        let restricted = self.restricted_gram_product(spectrum.bins(), spectrum.coefficients())?;
        Ok((dft::norm(&restricted) / x_norm - 1.0).abs())
    }

    /// `Φ*_Λ Φ_Λ x` for coefficients `x` on support `Λ`.
    fn restricted_gram_product(&self, bins: &[usize], coefficients: &[Complex64]) -> Result<Vec<Complex64>> {
        let s = bins.len();
        if s * s <= 8 * self.n_bins() {
            let psf = self.psf();
            let n = self.n_bins();
            Ok(bins
                .iter()
                .map(|&i| bins.iter().zip(coefficients).map(|(&j, &c)| psf[(j + n - i) % n] * c).sum())
                .collect())
        } else {
            let mut dense = vec![Complex64::new(0.0, 0.0); self.n_bins()];
            for (&j, &c) in bins.iter().zip(coefficients) {
                dense[j] = c;
            }
            let corr = self.apply_adjoint(&self.apply_forward(&dense)?)?;
            Ok(bins.iter().map(|&j| corr[j]).collect())
        }
    }

    /// Spectral norm deviation of `trials` random `s`-sparse signals with
    /// complex Gaussian coefficients. Trial `t` uses seed `seed + t`.
    pub fn empirical_rip(&self, s: usize, trials: usize, seed: u64) -> Result<DeviationReport> {
        let n = self.n_bins();
        if s == 0 || trials == 0 {
            return Err(Error::invalid("sparsity and trial count must be positive"));
        }
        if s > n {
            return Err(Error::SupportTooLarge { size: s, limit: n });
        }
        let deviations = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let spectrum = random_sparse_spectrum(&self.grid, s, seed.wrapping_add(t))?;
                self.spectral_norm_deviation(&spectrum)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(DeviationReport::from_deviations(s, deviations))
    }

    fn check_grid(&self, spectrum: &SparseSpectrum) -> Result<()> {
        if spectrum.grid().n_points() != self.n_bins() {
            return Err(Error::DimensionMismatch { expected: self.n_bins(), got: spectrum.grid().n_points() });
        }
        Ok(())
    }

    fn check_support(&self, support: &[usize]) -> Result<()> {
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support has repeated bins"));
        }
        if sorted.last().is_some_and(|&j| j >= self.n_bins()) {
            return Err(Error::invalid("support bin outside grid"));
        }
        Ok(())
    }
}

/// `s` distinct uniform bins with `CN(0, 1)` coefficients.
pub fn random_sparse_spectrum(grid: &TimeGrid, s: usize, seed: u64) -> Result<SparseSpectrum> {
    let mut rng = rng_from_seed(seed);
    let bins = index::sample(&mut rng, grid.n_points(), s);
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    let entries = bins
        .iter()
        .map(|j| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            (j, Complex64::new(sd * re, sd * im))
        })
        .collect();
    SparseSpectrum::new(*grid, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{compute_sample_schedule, ClockConfig};

    fn small_op(n: usize, stride: usize, offset: usize) -> SensingOperator {
        let grid = TimeGrid::new(1e-9, n).unwrap();
        let idx: Vec<usize> = (0..n).filter(|i| i % stride == offset % stride || i % 7 == 3).collect();
        SensingOperator::new(grid, SampleSchedule::from_indices(&grid, idx).unwrap()).unwrap()
    }

    #[test]
    fn atoms_have_unit_norm() {
        let op = small_op(128, 5, 1);
        for j in [0, 1, 17, 127] {
            assert!((dft::norm(&op.atom(j)) - 1.0).abs() < 1e-14);
            assert!((op.gram_entry(j, j).re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_of_single_bin_is_atom() {
        let op = small_op(64, 3, 0);
        let mut x = vec![Complex64::new(0.0, 0.0); 64];
        x[9] = Complex64::new(1.0, 0.0);
        let y = op.apply_forward(&x).unwrap();
        for (a, b) in y.iter().zip(op.atom(9)) {
            assert!((a - b).norm() < 1e-13);
        }
        let zero = op.apply_forward(&vec![Complex64::new(0.0, 0.0); 64]).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn adjoint_of_atom_peaks_at_one() {
        let op = small_op(64, 4, 2);
        let c = op.apply_adjoint(&op.atom(30)).unwrap();
        assert!((c[30] - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn dimension_checks() {
        let op = small_op(64, 4, 2);
        assert!(matches!(op.apply_forward(&[Complex64::new(0.0, 0.0); 3]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(op.apply_adjoint(&[Complex64::new(0.0, 0.0); 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn psf_matches_direct_inner_products() {
        let op = small_op(96, 5, 3);
        for (i, j) in [(0, 5), (7, 3), (90, 2), (11, 11)] {
            let direct: Complex64 = op.atom(i).iter().zip(op.atom(j)).map(|(a, b)| a.conj() * b).sum();
            assert!((direct - op.gram_entry(i, j)).norm() < 1e-13);
        }
    }

    #[test]
    fn singleton_support_bounds() {
        let op = small_op(64, 4, 2);
        let b = op.gram_eigen_bounds(&[5]).unwrap();
        assert!((b.lambda_min - 1.0).abs() < 1e-12 && (b.lambda_max - 1.0).abs() < 1e-12 && b.delta < 1e-12);
        let big: Vec<usize> = (0..65).collect();
        assert!(matches!(op.gram_eigen_bounds(&big), Err(Error::SupportTooLarge { .. })));
    }

    #[test]
    fn uniform_collision_has_delta_one() {
        let grid = TimeGrid::new(1e-11, 1_000_000).unwrap();
        let schedule = compute_sample_schedule(&ClockConfig::uniform(2e9).unwrap(), &grid).unwrap();
        let op = SensingOperator::new(grid, schedule).unwrap();
        let b = op.gram_eigen_bounds(&[72_000, 92_000]).unwrap();
        assert!((b.lambda_max - 2.0).abs() < 1e-9 && b.lambda_min.abs() < 1e-9 && (b.delta - 1.0).abs() < 1e-9);
        let one = Complex64::new(1.0, 0.0);
        let colliding = SparseSpectrum::new(grid, vec![(72_000, one), (92_000, one)]).unwrap();
        assert!((op.spectral_norm_deviation(&colliding).unwrap() - 1.0).abs() < 1e-9);
        let apart = SparseSpectrum::new(grid, vec![(72_000, one), (92_001, one)]).unwrap();
        assert!(op.spectral_norm_deviation(&apart).unwrap() < 1e-9);
    }

    #[test]
    fn deviation_rejects_zero() {
        let op = small_op(64, 4, 2);
        let z = SparseSpectrum::new(*op.grid(), vec![(3, Complex64::new(0.0, 0.0))]).unwrap();
        assert_eq!(op.spectral_norm_deviation(&z), Err(Error::ZeroInput));
    }

    #[test]
    fn empirical_rip_edge_cases() {
        let op = small_op(128, 5, 1);
        let r = op.empirical_rip(1, 10, 4).unwrap();
        assert!(r.deviations.iter().all(|&d| d < 1e-12));
        assert_eq!(r.deviations.len(), 10);
        let grid = *op.grid();
        let full = SensingOperator::new(grid, SampleSchedule::full(&grid)).unwrap();
        let r = full.empirical_rip(20, 10, 4).unwrap();
        assert!(r.max_deviation < 1e-10);
        assert!(op.empirical_rip(129, 1, 0).is_err());
        assert_eq!(op.empirical_rip(6, 12, 99).unwrap(), op.empirical_rip(6, 12, 99).unwrap());
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&v, 0.95), 95.0);
        assert_eq!(percentile_nearest_rank(&[3.0], 0.95), 3.0);
        let r = DeviationReport::from_deviations(2, vec![0.1, 0.4, 0.2]);
        assert_eq!(r.max_deviation, 0.4);
    }
}
