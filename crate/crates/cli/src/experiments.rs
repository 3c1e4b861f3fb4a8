//! The six experiments. Each returns an [`Outcome`] whose records are in
//! sweep order, independent of how trials were scheduled across threads.

use std::f64::consts::TAU;
use std::fmt::Write;

use nyfold_core::clock::{compute_sample_schedule, fold_tone};
use nyfold_core::crb::{nz_probability_from_crb, simulate_nz_trials, ChirpModel, NzTrialConfig};
use nyfold_core::omp::{detection_probability_bound, omp_recover, score_recovery};
use nyfold_core::rip::{
    estimate_c, guaranteed_sparsity_convex, max_recoverable_sparsity, omp_guarantee_threshold, rip_bound,
    CONVEX_RIP_THRESHOLD,
};
use nyfold_core::seed::{derive_seed, rng_from_seed};
use nyfold_core::sensing::SensingOperator;
use nyfold_core::signal::{add_noise, sample_tones, synthesize_signal, SignalMode, TimeGrid, ToneSpec};
use nyfold_core::{clock::folded_spectrum, Complex64, Error};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{
    EstimateCSettings, ExperimentId, Fig10Settings, Fig8Settings, Fig9Settings, ResolvedConfig, SignalKind,
    SpectrumSettings, StripSettings,
};
use crate::output::{Outcome, Record};
use crate::plot::Plot;
use crate::spectrogram::stft;
use crate::CliError;

pub fn run(config: &ResolvedConfig) -> Result<Outcome, CliError> {
    let seed = config.seed;
    match config.experiment {
        ExperimentId::StripTable => run_strip_table(&config.settings()?),
        ExperimentId::Fig8 => run_fig8(&config.settings()?, seed),
        ExperimentId::Fig9 => run_fig9(&config.settings()?, seed),
        ExperimentId::Fig10 => run_fig10(&config.settings()?, seed),
        ExperimentId::Spectrum => run_spectrum(&config.settings()?),
        ExperimentId::EstimateC => run_estimate_c(&config.settings()?),
    }
}

pub fn run_strip_table(cfg: &StripSettings) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let delta = cfg.delta.unwrap_or(CONVEX_RIP_THRESHOLD);
    let mut out = Outcome::default();
    let mut points = Vec::new();
    for &tol in &cfg.tolerances {
        let s = max_recoverable_sparsity(cfg.n_points, cfg.k_samples, delta, tol)?;
        out.records.push(Record::new("strip", "failure_tolerance", tol, "max_sparsity", s as f64));
        points.push((tol, s as f64));
    }
    out.summary.insert("delta".into(), delta);
    out.conventions.push("max_sparsity is the largest s whose 2s-sparse STRIP failure probability is <= the tolerance".into());
    out.plots.push((
        "strip_table".into(),
        Plot::new("Recoverable sparsity vs failure tolerance", "failure tolerance", "max sparsity")
            .log_x()
            .with_series("STRIP", points),
    ));
    Ok(out)
}

fn snr_label(snr_db: f64) -> String {
    if snr_db.is_finite() {
        format!("snr_{snr_db}db")
    } else {
        "noiseless".into()
    }
}

/// Draws `s` unit tones with random phase, uniform over `[0, band)`, at
/// least `guard_bins` apart. Bin-centred draws snap to the grid first.
fn draw_tones(rng: &mut impl Rng, s: usize, grid: &TimeGrid, band: f64, guard_bins: f64, bin_centered: bool) -> Result<Vec<ToneSpec>, CliError> {
    let f_res = grid.f_res();
    let mut freqs: Vec<f64> = Vec::with_capacity(s);
    let mut attempts = 0usize;
    while freqs.len() < s {
        attempts += 1;
        if attempts > 1000 * s + 10_000 {
            return Err(CliError::Config(format!(
                "cannot place {s} tones {guard_bins} bins apart in a {band} Hz band"
            )));
        }
        let mut f = rng.random_range(0.0..band);
        if bin_centered {
            f = (f / f_res).floor() * f_res;
        }
        if freqs.iter().all(|&g| ((f - g) / f_res).abs() >= guard_bins.max(if bin_centered { 1.0 } else { 0.0 })) {
            freqs.push(f);
        }
    }
    Ok(freqs.into_iter().map(|f| ToneSpec::new(f, 1.0, rng.random_range(0.0..TAU))).collect())
}

/// OMP failure fraction over sparsity × SNR.
pub fn run_fig8(cfg: &Fig8Settings, seed: u64) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let grid = cfg.grid.grid()?;
    let clock = cfg.clock.clock(&grid)?;
    let op = SensingOperator::new(grid, compute_sample_schedule(&clock, &grid)?)?;
    let band = cfg.band_hz.unwrap_or_else(|| grid.nyquist()).min(grid.atomic_rate());
    let n_s = cfg.sparsities.len();

    let mut out = Outcome::default();
    let mut plot = Plot::new("OMP failure vs sparsity", "sparsity s", "failure fraction");
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        let mut points = Vec::new();
        for (ki, &s) in cfg.sparsities.iter().enumerate() {
            let sweep = (si * n_s + ki) as u64;
            let failures = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| -> Result<bool, CliError> {
                    let trial_seed = derive_seed(seed, "fig8", sweep, t);
                    let mut rng = rng_from_seed(trial_seed);
                    let tones = draw_tones(&mut rng, s, &grid, band, cfg.guard_bins, cfg.bin_centered)?;
                    let clean = sample_tones(&tones, &grid, op.schedule().indices(), SignalMode::Complex)?;
                    let y = if snr.is_finite() {
                        add_noise(&clean, snr, trial_seed ^ 0x5EED, SignalMode::Complex)
                    } else {
                        clean
                    };
                    match omp_recover(&op, &y, s, cfg.residual_tol) {
                        Ok(result) => Ok(!score_recovery(&result, &tones, &grid, cfg.tol_bins).success),
                        Err(Error::SingularGram { .. }) => Ok(true),
                        Err(e) => Err(e.into()),
                    }
                })
                .collect::<Result<Vec<bool>, CliError>>()?
                .into_iter()
                .filter(|&f| f)
                .count();
            let rec = Record::proportion(snr_label(snr), "sparsity", s as f64, "failure_fraction", failures, cfg.trials);
            points.push((s as f64, rec.value));
            out.records.push(rec);
        }
        plot = plot.with_series(snr_label(snr), points);
    }
    out.summary.insert("k_samples".into(), op.n_measurements() as f64);
    out.summary.insert("band_hz".into(), band);
    out.conventions = vec![
        "SNR is measured against total signal power over the sampled points".into(),
        format!(
            "tones: unit amplitude, uniform phase, frequency uniform over [0, band_hz){}, at least guard_bins = {} bins apart",
            if cfg.bin_centered { " snapped to bins" } else { "" },
            cfg.guard_bins
        ),
        format!("success: every tone matched to a distinct recovered bin within {} bins", cfg.tol_bins),
        "OMP runs s iterations; a singular Gram system counts as a failure".into(),
    ];
    out.plots.push(("fig8".into(), plot));
    Ok(out)
}

/// Zone-identification probability vs sample count: CRB, the detection
/// lower bound and Monte Carlo.
pub fn run_fig9(cfg: &Fig9Settings, seed: u64) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let sigma2 = 10f64.powf(-cfg.snr_db / 10.0);
    let slope = cfg.f_dev_hz / cfg.chirp_period_s;
    let nz = NzTrialConfig {
        f_s1: cfg.f_s1_hz,
        f_dev: cfg.f_dev_hz,
        chirp_period: cfg.chirp_period_s,
        grid_factor: cfg.grid_factor,
        snr_db: Some(cfg.snr_db),
        n_zones: cfg.n_zones,
        trials: cfg.trials,
    };
    let c_grid = cfg.c_grid.grid()?;
    let c = estimate_c(&nz.clock()?, &c_grid, cfg.c_k_max)?.c_value;
    let empirical = simulate_nz_trials(&nz, &cfg.k_values, derive_seed(seed, "fig9", 0, 0))?;

    let mut out = Outcome::default();
    let (mut crb_pts, mut bound_pts, mut emp_pts) = (Vec::new(), Vec::new(), Vec::new());
    let mut best: Option<(f64, f64, f64)> = None;
    for point in &empirical {
        let k = point.k;
        let kf = k as f64;
        let model = ChirpModel::new(1.0, 1.0 / cfg.f_s1_hz, k as u64, sigma2)?;
        let p_crb = nz_probability_from_crb(&model, slope, cfg.n_zones)?;
        // Deviation actually swept within the K-sample window.
        let f_dev_eff = (slope * kf / cfg.f_s1_hz).min(cfg.f_dev_hz);
        let p_bound = match rip_bound(c, cfg.f_s1_hz / kf, f_dev_eff, 2) {
            Ok(b) => detection_probability_bound(k, cfg.grid_factor * k, b.delta2, sigma2)?.p_lower,
            Err(Error::BoundNotApplicable { .. }) => 0.0,
            Err(e) => return Err(e.into()),
        };
        out.records.push(Record::new("crb", "k_samples", kf, "nz_probability", p_crb));
        out.records.push(Record::new("detection_bound", "k_samples", kf, "nz_probability", p_bound));
        out.records.push(Record::proportion("empirical", "k_samples", kf, "nz_probability", point.successes, point.trials));
        crb_pts.push((kf, p_crb));
        bound_pts.push((kf, p_bound));
        emp_pts.push((kf, point.probability()));
        if best.is_none_or(|(_, p, _)| (p_crb - 0.9).abs() < (p - 0.9).abs()) {
            best = Some((kf, p_crb, p_crb - p_bound));
        }
    }
    out.summary.insert("c".into(), c);
    out.summary.insert("sigma2".into(), sigma2);
    if let Some((k, p, gap)) = best {
        out.summary.insert("k_at_crb_0_9".into(), k);
        out.summary.insert("crb_at_k_0_9".into(), p);
        out.summary.insert("crb_minus_bound_at_k_0_9".into(), gap);
    }
    out.conventions = vec![
        "sigma2 = 10^(-snr_db/10) for a unit-amplitude complex tone".into(),
        "CRB curve averages the zone probability over all zones: two edge zones one-sided, the rest two-sided".into(),
        "adjacent zones differ in chirp rate by f_dev/chirp_period".into(),
        "detection_bound uses f_res = f_s1/K, the deviation swept within K samples and N = grid_factor*K; 0 where the RIP bound does not apply".into(),
        "empirical: one OMP iteration on a bin-centred tone in a random zone".into(),
    ];
    out.plots.push((
        "fig9".into(),
        Plot::new("Nyquist zone identification", "samples K", "probability")
            .log_x()
            .with_series("CRB", crb_pts)
            .with_series("OMP empirical", emp_pts)
            .with_series("detection bound", bound_pts),
    ));
    Ok(out)
}

/// Least-squares line through `points`: `(slope, intercept, R²)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

fn fdev_label(f_dev: f64) -> String {
    format!("fdev_{}mhz", f_dev / 1e6)
}

/// Empirical spectral norm deviation vs sparsity for several deviations.
pub fn run_fig10(cfg: &Fig10Settings, seed: u64) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let grid = cfg.grid.grid()?;
    let n_s = cfg.sparsities.len();
    let mut out = Outcome::default();
    let mut plot = Plot::new("Spectral norm deviation vs sparsity", "sparsity s", "max deviation");
    for (di, &f_dev) in cfg.f_dev_hz.iter().enumerate() {
        let clock = cfg.clock.clock_with_dev(&grid, f_dev)?;
        let op = SensingOperator::new(grid, compute_sample_schedule(&clock, &grid)?)?;
        let label = fdev_label(f_dev);
        let mut points = Vec::new();
        for (si, &s) in cfg.sparsities.iter().enumerate() {
            let report = op.empirical_rip(s, cfg.trials, derive_seed(seed, "fig10", (di * n_s + si) as u64, 0))?;
            out.records.push(Record::new(label.clone(), "sparsity", s as f64, "max_deviation", report.max_deviation).with_count(cfg.trials));
            out.records.push(Record::new(label.clone(), "sparsity", s as f64, "p95_deviation", report.p95).with_count(cfg.trials));
            points.push((s as f64, report.max_deviation));
        }
        let (slope, intercept, r2) = linear_fit(&points);
        out.summary.insert(format!("slope_{label}"), slope);
        out.summary.insert(format!("intercept_{label}"), intercept);
        out.summary.insert(format!("r2_{label}"), r2);
        out.summary.insert(format!("k_samples_{label}"), op.n_measurements() as f64);
        plot = plot.with_series(label, points);
    }
    out.conventions = vec![
        "deviation of a spectrum x on support L is | ||A_L* A x|| / ||x|| - 1 | with unit-norm atoms".into(),
        "spectra: distinct uniform bins with CN(0,1) coefficients".into(),
        "slope, intercept and r2 are least-squares fits of max_deviation against s".into(),
    ];
    out.plots.push(("fig10".into(), plot));
    Ok(out)
}

/// Folded spectrum and spectrogram data for a multi-tone signal.
pub fn run_spectrum(cfg: &SpectrumSettings) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let grid = cfg.grid.grid()?;
    let clock = cfg.clock.clock(&grid)?;
    let schedule = compute_sample_schedule(&clock, &grid)?;
    let mode = match cfg.signal {
        SignalKind::Real => SignalMode::Real,
        SignalKind::Complex => SignalMode::Complex,
    };
    let tones: Vec<ToneSpec> = cfg.tones.iter().map(|t| ToneSpec::new(t.frequency_hz, t.amplitude, t.phase_rad)).collect();
    let x = synthesize_signal(&tones, &grid, mode)?;
    let folded = folded_spectrum(&x, &schedule, &grid, clock.f_s1())?;
    let f_res = grid.f_res();

    let mut spectrum_csv = String::from("bin,frequency_hz,magnitude\n");
    for (b, m) in folded.iter().enumerate() {
        let _ = writeln!(spectrum_csv, "{b},{},{m}", b as f64 * f_res);
    }

    let mut zero_filled = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for &i in schedule.indices() {
        zero_filled[i] = x[i];
    }
    let frame_res = grid.atomic_rate() / cfg.window as f64;
    let n_frame_bins = (0.5 * clock.f_s1() / frame_res).floor() as usize + 1;
    let spec = stft(&zero_filled, cfg.window, cfg.hop, n_frame_bins);
    let mut spectrogram_csv = String::from("frame,time_s,bin,frequency_hz,magnitude\n");
    for (f, (start, mags)) in spec.frame_starts.iter().zip(&spec.magnitudes).enumerate() {
        let t = grid.time(*start);
        for (b, m) in mags.iter().enumerate() {
            let _ = writeln!(spectrogram_csv, "{f},{t},{b},{},{m}", b as f64 * frame_res);
        }
    }

    let mut out = Outcome::default();
    for (i, tone) in tones.iter().enumerate() {
        let ft = fold_tone(tone.frequency, &clock)?;
        let series = format!("tone_{i}");
        let centre = (ft.f_if / f_res).round() as i64;
        let spread = (ft.m_index.unsigned_abs() as f64 * clock.f_dev() / f_res).ceil() as i64 + 2;
        let peak = (centre - spread..=centre + spread)
            .filter_map(|b| usize::try_from(b).ok().and_then(|b| folded.get(b)))
            .copied()
            .fold(0.0, f64::max);
        for (stat, v) in [
            ("f_if_hz", ft.f_if),
            ("m_index", ft.m_index as f64),
            ("nyquist_zone", ft.nyquist_zone as f64),
            ("folded_peak", peak),
        ] {
            out.records.push(Record::new(series.clone(), "frequency_hz", tone.frequency, stat, v));
        }
    }
    out.summary.insert("k_samples".into(), schedule.len() as f64);
    out.summary.insert("frames".into(), spec.frame_starts.len() as f64);
    out.conventions = vec![
        "spectrum.csv: unitary DFT magnitude of the zero-filled sampled signal up to f_s1/2".into(),
        format!("spectrogram.csv: periodic Hann window of {} points, hop {}, raw DFT magnitude up to f_s1/2", cfg.window, cfg.hop),
        "folded_peak: largest folded magnitude within the tone's expected spread around f_if".into(),
    ];
    out.files.push(("spectrum.csv".into(), spectrum_csv));
    out.files.push(("spectrogram.csv".into(), spectrogram_csv));
    out.plots.push((
        "spectrum".into(),
        Plot::new("Folded spectrum", "frequency (Hz)", "magnitude")
            .with_series("folded", folded.iter().enumerate().map(|(b, &m)| (b as f64 * f_res, m)).collect()),
    ));
    Ok(out)
}

/// Spreading constant `C` and the sparsity guarantees that follow from it.
pub fn run_estimate_c(cfg: &EstimateCSettings) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let grid = cfg.grid.grid()?;
    let clock = cfg.clock.clock(&grid)?;
    let mc = estimate_c(&clock, &grid, cfg.k_max)?;
    let mut out = Outcome::default();
    for (i, &ck) in mc.per_k.iter().enumerate() {
        out.records.push(Record::new("c_k", "k", (i + 1) as f64, "c_k", ck));
    }
    out.summary.insert("c".into(), mc.c_value);
    out.summary.insert("worst_k".into(), f64::from(mc.worst_k));
    out.summary.insert("omp_threshold_s2".into(), omp_guarantee_threshold(2)?);
    match rip_bound(mc.c_value, grid.f_res(), clock.f_dev(), 3) {
        Ok(b) => {
            out.summary.insert("delta2".into(), b.delta2);
            out.summary.insert("delta3".into(), b.delta_s);
            out.summary.insert("guaranteed_sparsity_convex".into(), guaranteed_sparsity_convex(b.delta2)? as f64);
        }
        Err(Error::BoundNotApplicable { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    out.conventions = vec![format!("band: {}", mc.band_definition)];
    out.plots.push((
        "estimate_c".into(),
        Plot::new("Spreading constant per harmonic", "k", "C_k")
            .with_series("C_k", mc.per_k.iter().enumerate().map(|(i, &c)| ((i + 1) as f64, c)).collect()),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let (m, b, r2) = linear_fit(&pts);
        assert!((m - 3.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tone_draws_respect_the_guard() {
        let grid = TimeGrid::new(1e-9, 1000).unwrap();
        let mut rng = rng_from_seed(3);
        let tones = draw_tones(&mut rng, 50, &grid, grid.nyquist(), 2.0, false).unwrap();
        for (i, a) in tones.iter().enumerate() {
            assert!(a.frequency >= 0.0 && a.frequency < grid.nyquist());
            for b in &tones[i + 1..] {
                assert!((a.frequency - b.frequency).abs() >= 2.0 * grid.f_res());
            }
        }
        assert!(draw_tones(&mut rng, 400, &grid, grid.nyquist(), 2.0, false).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(snr_label(10.0), "snr_10db");
        assert_eq!(snr_label(f64::INFINITY), "noiseless");
        assert_eq!(fdev_label(10e6), "fdev_10mhz");
        assert_eq!(fdev_label(0.0), "fdev_0mhz");
    }
}
