//! Short-time Fourier magnitudes with a periodic Hann window.

use std::f64::consts::TAU;

use nyfold_core::dft::Dft;
use nyfold_core::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub window: usize,
    pub hop: usize,
    /// First sample index of each frame.
    pub frame_starts: Vec<usize>,
    /// `magnitudes[frame][bin]` for bins `0..n_bins`.
    pub magnitudes: Vec<Vec<f64>>,
}

pub fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 * (1.0 - (TAU * n as f64 / len as f64).cos())).collect()
}

/// Frames start every `hop` samples and must fit entirely in `signal`; only
/// the first `n_bins` bins of each frame are kept.
pub fn stft(signal: &[Complex64], window: usize, hop: usize, n_bins: usize) -> Spectrogram {
    assert!(window > 0 && hop > 0, "window and hop must be positive");
    let w = hann(window);
    let dft = Dft::new(window);
    let n_bins = n_bins.min(window);
    let mut frame_starts = Vec::new();
    let mut magnitudes = Vec::new();
    let mut start = 0;
    while start + window <= signal.len() {
        let mut buf: Vec<Complex64> = signal[start..start + window].iter().zip(&w).map(|(x, g)| x * g).collect();
        dft.forward_raw(&mut buf);
        magnitudes.push(buf[..n_bins].iter().map(|v| v.norm()).collect());
        frame_starts.push(start);
        start += hop;
    }
    Spectrogram { window, hop, frame_starts, magnitudes }
}
