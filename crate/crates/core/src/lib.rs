//! Simulation and analysis of modulated ("Nyquist-folding") non-uniform
//! sampling of spectrally sparse wideband signals.
//!
//! The crate is organised around the discrete sensing model
//! `y = Φ x̂`, where `x̂` is an `N`-bin spectrum on an atomic time grid and
//! `Φ` keeps the `K` rows of the inverse DFT that correspond to the
//! zero crossings of a phase-modulated sample clock.
//!
//! * [`signal`] and [`clock`] build grids, tones, clocks and sample schedules.
//! * [`sensing`] applies `Φ` and `Φ*` and measures restricted isometry.
//! * [`rip`] holds the analytical RIP/STRIP bounds.
//! * [`omp`] recovers sparse spectra with orthogonal matching pursuit.
//! * [`crb`] bounds chirp-slope estimation and Nyquist-zone selection.

pub mod clock;
pub mod crb;
pub mod dft;
mod error;
pub mod omp;
pub mod rip;
pub mod seed;
pub mod sensing;
pub mod signal;

pub use error::{Error, Result};

pub use num_complex::Complex64;
