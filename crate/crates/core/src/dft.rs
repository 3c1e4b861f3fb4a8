//! Planned length-`N` transforms with the conventions used throughout the
//! crate.
//!
//! `forward_unitary` computes `X[j] = N^{-1/2} Σ_n x[n] e^{-2πi nj/N}`, so
//! Parseval holds exactly; the raw variants are the unnormalised sums.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `Σ_n x[n] e^{-2πi nj/N}` in place.
    pub fn forward_raw(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// `Σ_j X[j] e^{+2πi nj/N}` in place.
    pub fn inverse_raw(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
    }

    pub fn forward_unitary(&self, buf: &mut [Complex64]) {
        self.forward_raw(buf);
        let scale = 1.0 / (self.len as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn inverse_unitary(&self, buf: &mut [Complex64]) {
        self.inverse_raw(buf);
        let scale = 1.0 / (self.len as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `e^{2πi r/N}` with the integer phase already reduced modulo `N`.
#[inline]
pub(crate) fn twiddle(r: u64, n: u64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * (r % n) as f64 / n as f64).sin_cos();
    Complex64::new(c, s)
}

/// `(a * b) mod n` without overflow for grid-sized operands.
#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}
