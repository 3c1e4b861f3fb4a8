//! Orthogonal Matching Pursuit over the grid dictionary, tone-level scoring,
//! and the single-tone detection-probability lower bound.

use num_complex::Complex64;

use crate::dft;
use crate::sensing::SensingOperator;
use crate::signal::{TimeGrid, ToneSpec};
use crate::{Error, Result};

/// Smallest Cholesky pivot accepted before the Gram system counts as
/// singular. Atoms have unit norm, so the pivot is `1 − ‖projection‖²`.
const PIVOT_FLOOR: f64 = 1e-10;

/// Correlations within this relative margin count as tied, so transform
/// round-off cannot override the lowest-bin rule.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub bin: usize,
    /// `|⟨a_bin, r⟩|` at selection time.
    pub correlation: f64,
    /// Residual norm after the least-squares refit.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Bins in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<Complex64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub log: Vec<Selection>,
}

/// Lower-triangular factor of the support Gram matrix, grown one atom at a
/// time.
struct GramCholesky {
    rows: Vec<Vec<Complex64>>,
}

impl GramCholesky {
    fn new() -> Self {
        GramCholesky { rows: Vec::new() }
    }

    /// Solves `L w = b`.
    fn forward(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut w = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let acc: Complex64 = row[..i].iter().zip(&w).map(|(l, x)| l * x).sum();
            w.push((b[i] - acc) / row[i]);
        }
        w
    }

    /// Solves `L^H x = z`.
    fn backward(&self, z: &[Complex64]) -> Vec<Complex64> {
        let p = self.rows.len();
        let mut x = vec![Complex64::new(0.0, 0.0); p];
        for i in (0..p).rev() {
            let acc: Complex64 = (i + 1..p).map(|r| self.rows[r][i].conj() * x[r]).sum();
            x[i] = (z[i] - acc) / self.rows[i][i].conj();
        }
        x
    }

    /// Appends an atom given its inner products `g[i] = ⟨a_i, a_new⟩` with
    /// the current support and its own squared norm. Returns false when the
    /// new pivot collapses.
    fn push(&mut self, g: &[Complex64], diag: f64) -> bool {
        let w = self.forward(g);
        let d = diag - dft::norm_sqr(&w);
        if !(d > PIVOT_FLOOR) {
            return false;
        }
        let mut row: Vec<Complex64> = w.iter().map(|v| v.conj()).collect();
        row.push(Complex64::new(d.sqrt(), 0.0));
        self.rows.push(row);
        true
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        self.backward(&self.forward(rhs))
    }
}

/// Greedy recovery of a sparse spectrum from `y = Φx̂ (+ noise)`.
///
/// Each iteration picks the unused bin with the largest `|Φ* r|` (ties go to
/// the lowest bin), refits all coefficients by least squares on the support
/// and recomputes the residual. Stops after `max_iters` selections or once
/// `‖r‖ ≤ residual_tol·‖y‖`.
pub fn omp_recover(op: &SensingOperator, y: &[Complex64], max_iters: usize, residual_tol: f64) -> Result<RecoveryResult> {
    let k = op.n_measurements();
    if y.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: y.len() });
    }
    if max_iters > k {
        return Err(Error::invalid(format!("max_iters = {max_iters} exceeds K = {k}")));
    }
    if !(residual_tol >= 0.0) {
        return Err(Error::invalid("residual_tol must be nonnegative"));
    }
    let y_norm = dft::norm(y);
    let stop_at = residual_tol * y_norm;

    let mut support: Vec<usize> = Vec::with_capacity(max_iters);
    let mut chosen = vec![false; op.n_bins()];
    let mut rhs: Vec<Complex64> = Vec::with_capacity(max_iters);
    let mut chol = GramCholesky::new();
    let mut coefficients = Vec::new();
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut log = Vec::with_capacity(max_iters);
    let mut first_corr: Option<Vec<Complex64>> = None;
    // Unscaled correlations; the argmax and relative tie test do not need
    // the 1/√K factor.
    let mut corr = vec![Complex64::new(0.0, 0.0); op.n_bins()];
    let scale = op.scale();
    let mut atoms: Vec<Vec<Complex64>> = Vec::with_capacity(max_iters);

    while support.len() < max_iters && residual_norm > stop_at {
        op.adjoint_unscaled_into(&residual, &mut corr)?;
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if chosen[j] {
                continue;
            }
            let m = c.norm_sqr();
            if best.is_none_or(|(_, b)| m > b * (1.0 + TIE_TOLERANCE)) {
                best = Some((j, m));
            }
        }
        let Some((j, m)) = best else { break };
        let full_corr = first_corr.get_or_insert_with(|| corr.clone());

        let g: Vec<Complex64> = support.iter().map(|&i| op.gram_entry(i, j)).collect();
        if !chol.push(&g, op.gram_entry(j, j).re) {
            let mut offending = support.clone();
            offending.push(j);
            return Err(Error::SingularGram { support: offending });
        }
        support.push(j);
        chosen[j] = true;
        rhs.push(full_corr[j] * scale);
        atoms.push(op.atom(j));

        coefficients = chol.solve(&rhs);
        residual = y.to_vec();
        for (atom, &c) in atoms.iter().zip(&coefficients) {
            residual.iter_mut().zip(atom).for_each(|(r, a)| *r -= c * a);
        }
        residual_norm = dft::norm(&residual);
        log.push(Selection { bin: j, correlation: m.sqrt() * scale, residual_norm });
    }

    Ok(RecoveryResult { iterations: support.len(), support, coefficients, residual_norm, log })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneMatch {
    pub tone_index: usize,
    pub nearest_bin: usize,
    pub matched_bin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryScore {
    pub success: bool,
    pub matches: Vec<ToneMatch>,
}

impl RecoveryScore {
    pub fn missed(&self) -> impl Iterator<Item = &ToneMatch> {
        self.matches.iter().filter(|m| m.matched_bin.is_none())
    }
}

fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// Matches recovered bins to true tones, closest pairs first, each bin used
/// at most once. Success iff every tone has a match within `tol_bins` of its
/// nearest grid bin.
pub fn score_recovery(result: &RecoveryResult, truth: &[ToneSpec], grid: &TimeGrid, tol_bins: usize) -> RecoveryScore {
    let n = grid.n_points();
    let nearest: Vec<usize> = truth.iter().map(|t| grid.nearest_bin(t.frequency)).collect();
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (ti, &tb) in nearest.iter().enumerate() {
        for (ri, &rb) in result.support.iter().enumerate() {
            let d = circular_distance(tb, rb, n);
            if d <= tol_bins {
                pairs.push((d, ti, ri));
            }
        }
    }
    pairs.sort_unstable();
    let mut tone_used = vec![None; truth.len()];
    let mut bin_used = vec![false; result.support.len()];
    for (_, ti, ri) in pairs {
        if tone_used[ti].is_none() && !bin_used[ri] {
            tone_used[ti] = Some(result.support[ri]);
            bin_used[ri] = true;
        }
    }
    let matches: Vec<ToneMatch> = (0..truth.len())
        .map(|i| ToneMatch { tone_index: i, nearest_bin: nearest[i], matched_bin: tone_used[i] })
        .collect();
    RecoveryScore { success: matches.iter().all(|m| m.matched_bin.is_some()), matches }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBound {
    pub k_samples: usize,
    pub n_bins: usize,
    pub delta2: f64,
    pub sigma2: f64,
    pub p_lower: f64,
}

/// `[1 − exp(−K(1−δ₂)²/(4σ²))]^N`, evaluated in the log domain.
pub fn detection_probability_bound(k_samples: usize, n_bins: usize, delta2: f64, sigma2: f64) -> Result<DetectionBound> {
    if !(0.0..1.0).contains(&delta2) && delta2 != 1.0 {
        return Err(Error::invalid(format!("delta2 = {delta2} outside [0, 1]")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    let gap = 1.0 - delta2;
    let tail = (-(k_samples as f64) * gap * gap / (4.0 * sigma2)).exp();
    let p_lower = (n_bins as f64 * (-tail).ln_1p()).exp();
    Ok(DetectionBound { k_samples, n_bins, delta2, sigma2, p_lower })
}
