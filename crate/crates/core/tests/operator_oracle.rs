//! The implicit operator against an explicitly materialised matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use nyfold_core::clock::SampleSchedule;
use nyfold_core::omp::omp_recover;
use nyfold_core::sensing::SensingOperator;
use nyfold_core::signal::{SparseSpectrum, TimeGrid};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_op(n: usize, k: usize, seed: u64) -> SensingOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    let grid = TimeGrid::new(1e-9, n).unwrap();
    SensingOperator::new(grid, SampleSchedule::from_indices(&grid, idx).unwrap()).unwrap()
}

/// `Φ[m, j] = exp(2πi k_m j / N) / √K`, straight from the definition.
fn dense(op: &SensingOperator) -> DMatrix<Complex64> {
    let n = op.n_bins();
    let k = op.n_measurements();
    let idx = op.schedule().indices();
    DMatrix::from_fn(k, n, |m, j| {
        let phase = std::f64::consts::TAU * ((idx[m] * j) % n) as f64 / n as f64;
        Complex64::from_polar(1.0 / (k as f64).sqrt(), phase)
    })
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    diff / scale
}

#[test]
fn forward_and_adjoint_match_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, k) in [(64, 16), (100, 37), (256, 64), (512, 200), (500, 499)] {
        let op = random_op(n, k, n as u64);
        let phi = dense(&op);
        let x = random_vec(n, &mut rng);
        let y = random_vec(k, &mut rng);
        let fx = op.apply_forward(&x).unwrap();
        let want = &phi * nalgebra::DVector::from_vec(x.clone());
        assert!(rel_err(&fx, want.as_slice()) < 1e-10, "forward n={n}");
        let ay = op.apply_adjoint(&y).unwrap();
        let want = phi.adjoint() * nalgebra::DVector::from_vec(y.clone());
        assert!(rel_err(&ay, want.as_slice()) < 1e-10, "adjoint n={n}");
    }
}

#[test]
fn sparse_and_dense_forward_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let op = random_op(512, 128, 2);
    for s in [1, 3, 40, 300] {
        let bins = index::sample(&mut rng, 512, s);
        let entries = bins.iter().map(|j| (j, Complex64::new(rng.random(), rng.random()))).collect();
        let spectrum = SparseSpectrum::new(*op.grid(), entries).unwrap();
        let sparse = op.apply_forward_sparse(&spectrum).unwrap();
        let dense = op.apply_forward(&spectrum.to_dense()).unwrap();
        assert!(rel_err(&sparse, &dense) < 1e-10, "s = {s}");
    }
}

#[test]
fn gram_eigenvalues_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let op = random_op(256, 64, 9);
    let phi = dense(&op);
    for _ in 0..10 {
        let support = index::sample(&mut rng, 256, 4).into_vec();
        let cols = DMatrix::from_fn(64, 4, |m, c| phi[(m, support[c])]);
        let gram = cols.adjoint() * &cols;
        let eig = gram.symmetric_eigenvalues();
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let b = op.gram_eigen_bounds(&support).unwrap();
        assert!((b.lambda_min - lo).abs() < 1e-10 && (b.lambda_max - hi).abs() < 1e-10);
        for r in 0..4 {
            for c in 0..4 {
                assert!((op.gram_entry(support[r], support[c]) - gram[(r, c)]).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn deviation_bounded_by_gram_distance_from_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let op = random_op(256, 48, 4);
    for s in [2, 3, 5, 8] {
        for _ in 0..20 {
            let bins = index::sample(&mut rng, 256, s).into_vec();
            let entries: Vec<(usize, Complex64)> =
                bins.iter().map(|&j| (j, Complex64::new(rng.random_range(-1.0..1.0), rng.random()))).collect();
            let spectrum = SparseSpectrum::new(*op.grid(), entries).unwrap();
            let b = op.gram_eigen_bounds(spectrum.bins()).unwrap();
            let dev = op.spectral_norm_deviation(&spectrum).unwrap();
            assert!(dev <= b.delta * (1.0 + 1e-12) + 1e-12, "{dev} > {}", b.delta);
        }
    }
}

/// Textbook OMP on the explicit matrix, least squares through nalgebra's SVD.
fn dense_omp(phi: &DMatrix<Complex64>, y: &[Complex64], iters: usize) -> (Vec<usize>, Vec<Complex64>) {
    let y = nalgebra::DVector::from_vec(y.to_vec());
    let mut support = Vec::new();
    let mut coef = nalgebra::DVector::<Complex64>::zeros(0);
    let mut r = y.clone();
    for _ in 0..iters {
        let c = phi.adjoint() * &r;
        let mut best = None::<(usize, f64)>;
        for (j, v) in c.iter().enumerate() {
            if support.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| v.norm() > b * (1.0 + 1e-12)) {
                best = Some((j, v.norm()));
            }
        }
        support.push(best.unwrap().0);
        let sub = DMatrix::from_fn(phi.nrows(), support.len(), |m, c| phi[(m, support[c])]);
        coef = sub.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        r = &y - sub * &coef;
    }
    (support, coef.iter().copied().collect())
}

#[test]
fn omp_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..20u64 {
        let op = random_op(256, 80, 100 + trial);
        let phi = dense(&op);
        let s = 1 + (trial as usize % 6);
        let bins = index::sample(&mut rng, 256, s);
        let entries = bins.iter().map(|j| (j, Complex64::new(rng.random_range(0.5..2.0), rng.random()))).collect();
        let spectrum = SparseSpectrum::new(*op.grid(), entries).unwrap();
        let mut y = op.apply_forward_sparse(&spectrum).unwrap();
        for v in y.iter_mut() {
            *v += Complex64::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
        }
        let got = omp_recover(&op, &y, s + 1, 0.0).unwrap();
        let (support, coef) = dense_omp(&phi, &y, s + 1);
        assert_eq!(got.support, support, "trial {trial}");
        assert!(rel_err(&got.coefficients, &coef) < 1e-9, "trial {trial}");
    }
}
