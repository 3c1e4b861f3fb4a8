//! Experiment configuration.
//!
//! A config file is TOML. Top-level keys are `seed`, `scale` and
//! `experiment`; each experiment reads its own table (`[fig8]`,
//! `[strip_table]`, ...). The table is overlaid on a built-in preset for the
//! chosen scale, so a file only has to name what it changes. Physical
//! quantities carry their unit in the key name.

use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use nyfold_core::clock::{ClockConfig, Modulation};
use nyfold_core::signal::TimeGrid;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    StripTable,
    Fig8,
    Fig9,
    Fig10,
    Spectrum,
    EstimateC,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::StripTable,
        ExperimentId::Fig8,
        ExperimentId::Fig9,
        ExperimentId::Fig10,
        ExperimentId::Spectrum,
        ExperimentId::EstimateC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::StripTable => "strip-table",
            ExperimentId::Fig8 => "fig8",
            ExperimentId::Fig9 => "fig9",
            ExperimentId::Fig10 => "fig10",
            ExperimentId::Spectrum => "spectrum",
            ExperimentId::EstimateC => "estimate-c",
        }
    }

    /// Name of the config table for this experiment.
    pub fn section(self) -> &'static str {
        match self {
            ExperimentId::StripTable => "strip_table",
            ExperimentId::EstimateC => "estimate_c",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Reduced grids that finish in minutes on a workstation.
    #[default]
    Desk,
    /// The grid sizes of the original study.
    Full,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        })
    }
}

/// The parsed file before any preset is applied.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub scale: Option<Scale>,
    pub experiment: Option<ExperimentId>,
    pub strip_table: Option<Table>,
    pub fig8: Option<Table>,
    pub fig9: Option<Table>,
    pub fig10: Option<Table>,
    pub spectrum: Option<Table>,
    pub estimate_c: Option<Table>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn section(&self, id: ExperimentId) -> Option<&Table> {
        match id {
            ExperimentId::StripTable => self.strip_table.as_ref(),
            ExperimentId::Fig8 => self.fig8.as_ref(),
            ExperimentId::Fig9 => self.fig9.as_ref(),
            ExperimentId::Fig10 => self.fig10.as_ref(),
            ExperimentId::Spectrum => self.spectrum.as_ref(),
            ExperimentId::EstimateC => self.estimate_c.as_ref(),
        }
    }
}

/// Everything an experiment run needs, after presets and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub experiment: ExperimentId,
    pub scale: Scale,
    pub seed: u64,
    /// The merged experiment table, echoed into the manifest.
    pub table: Table,
}

impl ResolvedConfig {
    /// Combines a parsed file with command-line overrides. Command-line
    /// values win; a seed must come from one of the two.
    pub fn resolve(
        file: &ConfigFile,
        experiment: ExperimentId,
        seed: Option<u64>,
        scale: Option<Scale>,
    ) -> Result<Self, CliError> {
        if let Some(named) = file.experiment {
            if named != experiment {
                return Err(CliError::Config(format!(
                    "config is for experiment '{named}' but '{experiment}' was requested"
                )));
            }
        }
        let seed = seed
            .or(file.seed)
            .ok_or_else(|| CliError::Config("a seed is required (config `seed` or --seed)".into()))?;
        // The manifest is TOML, whose integers are signed 64-bit.
        if i64::try_from(seed).is_err() {
            return Err(CliError::Config(format!("seed {seed} must be below 2^63")));
        }
        let scale = scale.or(file.scale).unwrap_or_default();
        let mut table = preset(experiment, scale);
        if let Some(overrides) = file.section(experiment) {
            merge(&mut table, overrides);
        }
        let resolved = ResolvedConfig { experiment, scale, seed, table };
        resolved.validate()?;
        Ok(resolved)
    }

    /// Deserializes the merged table into an experiment's settings type.
    pub fn settings<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        Value::Table(self.table.clone())
            .try_into()
            .map_err(|e| CliError::Config(format!("[{}]: {e}", self.experiment.section())))
    }

    fn validate(&self) -> Result<(), CliError> {
        match self.experiment {
            ExperimentId::StripTable => self.settings::<StripSettings>()?.validate(),
            ExperimentId::Fig8 => self.settings::<Fig8Settings>()?.validate(),
            ExperimentId::Fig9 => self.settings::<Fig9Settings>()?.validate(),
            ExperimentId::Fig10 => self.settings::<Fig10Settings>()?.validate(),
            ExperimentId::Spectrum => self.settings::<SpectrumSettings>()?.validate(),
            ExperimentId::EstimateC => self.settings::<EstimateCSettings>()?.validate(),
        }
    }
}

/// Recursively overlays `overrides` on `base`; nested tables merge, every
/// other value replaces.
pub fn merge(base: &mut Table, overrides: &Table) {
    for (key, value) in overrides {
        match (base.get_mut(key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        Err(CliError::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        Err(CliError::Config(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub t_atom_s: f64,
    pub n_points: usize,
}

impl GridSettings {
    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.t_atom_s, self.n_points).map_err(CliError::from)
    }

    fn validate(&self) -> Result<(), CliError> {
        positive("grid.t_atom_s", self.t_atom_s)?;
        self.grid().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationKind {
    None,
    LinearChirp,
    Sinusoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSettings {
    pub f_s1_hz: f64,
    pub modulation: ModulationKind,
    #[serde(default)]
    pub f_dev_hz: f64,
    /// Modulation period; defaults to the grid duration.
    pub period_s: Option<f64>,
}

impl ClockSettings {
    pub fn clock(&self, grid: &TimeGrid) -> Result<ClockConfig, CliError> {
        self.clock_with_dev(grid, self.f_dev_hz)
    }

    pub fn clock_with_dev(&self, grid: &TimeGrid, f_dev: f64) -> Result<ClockConfig, CliError> {
        let period = self.period_s.unwrap_or_else(|| grid.duration());
        let modulation = match self.modulation {
            ModulationKind::None => Modulation::None,
            ModulationKind::LinearChirp => Modulation::LinearChirp { f_dev, period },
            ModulationKind::Sinusoid => Modulation::Sinusoid { f_dev, period },
        };
        ClockConfig::new(self.f_s1_hz, modulation).map_err(CliError::from)
    }

    fn validate(&self, grid: &GridSettings) -> Result<(), CliError> {
        positive("clock.f_s1_hz", self.f_s1_hz)?;
        if let Some(p) = self.period_s {
            positive("clock.period_s", p)?;
        }
        self.clock(&grid.grid()?).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSettings {
    pub n_points: usize,
    pub k_samples: usize,
    /// Defaults to `√2 − 1`.
    pub delta: Option<f64>,
    pub tolerances: Vec<f64>,
}

impl StripSettings {
    pub fn validate(&self) -> Result<(), CliError> {
        nonempty("tolerances", &self.tolerances)?;
        if self.n_points <= 3 || self.k_samples == 0 {
            return Err(CliError::Config("need n_points > 3 and k_samples >= 1".into()));
        }
        if let Some(t) = self.tolerances.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(CliError::Config(format!("tolerance {t} outside (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig8Settings {
    pub grid: GridSettings,
    pub clock: ClockSettings,
    pub sparsities: Vec<usize>,
    /// `inf` gives noiseless runs.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    /// Upper edge of the tone band; defaults to the grid Nyquist frequency.
    pub band_hz: Option<f64>,
    pub guard_bins: f64,
    pub tol_bins: usize,
    #[serde(default)]
    pub bin_centered: bool,
    #[serde(default)]
    pub residual_tol: f64,
}

impl Fig8Settings {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.validate()?;
        self.clock.validate(&self.grid)?;
        nonempty("sparsities", &self.sparsities)?;
        nonempty("snr_db", &self.snr_db)?;
        at_least_one("trials", self.trials)?;
        if let Some(b) = self.band_hz {
            positive("band_hz", b)?;
        }
        if self.sparsities.contains(&0) {
            return Err(CliError::Config("sparsities must be positive".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(CliError::Config("snr_db must be numbers".into()));
        }
        if !(self.guard_bins >= 0.0) || !(self.residual_tol >= 0.0) {
            return Err(CliError::Config("guard_bins and residual_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig9Settings {
    pub f_s1_hz: f64,
    pub f_dev_hz: f64,
    pub chirp_period_s: f64,
    /// Atomic points per clock period on each per-K grid.
    pub grid_factor: usize,
    pub snr_db: f64,
    pub n_zones: u32,
    pub trials: usize,
    pub k_values: Vec<usize>,
    /// Grid used to estimate the spreading constant for the lower bound.
    pub c_grid: GridSettings,
    pub c_k_max: u32,
}

impl Fig9Settings {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("f_s1_hz", self.f_s1_hz)?;
        positive("f_dev_hz", self.f_dev_hz)?;
        positive("chirp_period_s", self.chirp_period_s)?;
        at_least_one("trials", self.trials)?;
        at_least_one("n_zones", self.n_zones as usize)?;
        at_least_one("c_k_max", self.c_k_max as usize)?;
        nonempty("k_values", &self.k_values)?;
        if self.k_values.contains(&0) {
            return Err(CliError::Config("k_values must be positive".into()));
        }
        if 2 * self.n_zones as usize > self.grid_factor {
            return Err(CliError::Config("grid_factor must be at least 2 * n_zones".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(CliError::Config("snr_db must be finite".into()));
        }
        self.c_grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig10Settings {
    pub grid: GridSettings,
    pub clock: ClockSettings,
    /// One curve per deviation; `clock.f_dev_hz` is ignored.
    pub f_dev_hz: Vec<f64>,
    pub sparsities: Vec<usize>,
    pub trials: usize,
}

impl Fig10Settings {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.validate()?;
        self.clock.validate(&self.grid)?;
        nonempty("f_dev_hz", &self.f_dev_hz)?;
        nonempty("sparsities", &self.sparsities)?;
        at_least_one("trials", self.trials)?;
        let grid = self.grid.grid()?;
        for &f in &self.f_dev_hz {
            self.clock.clock_with_dev(&grid, f)?;
        }
        if self.sparsities.iter().any(|&s| s == 0 || s > self.grid.n_points) {
            return Err(CliError::Config("sparsities must lie in 1..=n_points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSettings {
    pub frequency_hz: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSettings {
    pub grid: GridSettings,
    pub clock: ClockSettings,
    pub tones: Vec<ToneSettings>,
    pub signal: SignalKind,
    /// STFT window and hop, in atomic steps.
    pub window: usize,
    pub hop: usize,
}

impl SpectrumSettings {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.validate()?;
        self.clock.validate(&self.grid)?;
        nonempty("tones", &self.tones)?;
        at_least_one("window", self.window)?;
        at_least_one("hop", self.hop)?;
        if self.window > self.grid.n_points {
            return Err(CliError::Config("window longer than the grid".into()));
        }
        let nyquist = 0.5 / self.grid.t_atom_s;
        for t in &self.tones {
            if !(t.frequency_hz >= 0.0 && t.frequency_hz < nyquist) || !(t.amplitude >= 0.0) {
                return Err(CliError::Config(format!("tone at {} Hz is invalid for this grid", t.frequency_hz)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateCSettings {
    pub grid: GridSettings,
    pub clock: ClockSettings,
    pub k_max: u32,
}

impl EstimateCSettings {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.validate()?;
        self.clock.validate(&self.grid)?;
        at_least_one("k_max", self.k_max as usize)?;
        if !(self.clock.f_dev_hz > 0.0) {
            return Err(CliError::Config("estimate-c needs a modulated clock (f_dev_hz > 0)".into()));
        }
        Ok(())
    }
}

const STRIP_PRESET: &str = r#"
n_points = 1000000
k_samples = 20000
tolerances = [0.1, 0.05, 0.01, 0.005]
"#;

const FIG8_PRESET: &str = r#"
sparsities = [3, 6, 9, 12, 15, 18, 21, 24, 27, 30, 33, 36, 39, 42, 45, 48, 51, 54, 57, 60]
snr_db = [20.0, 10.0, 0.0]
trials = 50
guard_bins = 2.0
tol_bins = 1

[clock]
f_s1_hz = 200e6
modulation = "linear_chirp"
f_dev_hz = 10e6
period_s = 10e-6
"#;

const FIG8_DESK_GRID: &str = r#"
[grid]
t_atom_s = 3.814697265625e-11
n_points = 262144
"#;

const FIG8_FULL_GRID: &str = r#"
[grid]
t_atom_s = 1e-11
n_points = 1000000
"#;

const FIG9_PRESET: &str = r#"
f_s1_hz = 200e6
f_dev_hz = 10e6
chirp_period_s = 10e-6
grid_factor = 500
snr_db = 10.0
n_zones = 20
trials = 50
k_values = [16, 24, 32, 40, 48, 56, 64, 80, 96, 128, 192, 256, 384, 512, 768, 1024, 1536, 2000]
c_k_max = 20

[c_grid]
t_atom_s = 1e-10
n_points = 100000
"#;

const FIG10_PRESET: &str = r#"
f_dev_hz = [0.0, 10e6, 100e6]
trials = 100

[clock]
f_s1_hz = 2e9
modulation = "sinusoid"
"#;

const FIG10_DESK: &str = r#"
sparsities = [1, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000]

[grid]
t_atom_s = 1e-11
n_points = 262144

[clock]
period_s = 1.31072e-6
"#;

const FIG10_FULL: &str = r#"
sparsities = [1, 400, 800, 1200, 1600, 2000, 2400, 2800, 3200, 3600, 4000]

[grid]
t_atom_s = 1e-11
n_points = 1000000

[clock]
period_s = 5e-6
"#;

const SPECTRUM_PRESET: &str = r#"
signal = "real"
window = 8192
hop = 4096

[clock]
f_s1_hz = 2e9
modulation = "linear_chirp"
f_dev_hz = 100e6

[[tones]]
frequency_hz = 0.5e9

[[tones]]
frequency_hz = 2.5e9

[[tones]]
frequency_hz = 4.5e9

[[tones]]
frequency_hz = 6.5e9
"#;

const SPECTRUM_DESK_GRID: &str = r#"
[grid]
t_atom_s = 1e-11
n_points = 131072
"#;

const SPECTRUM_FULL_GRID: &str = r#"
[grid]
t_atom_s = 1e-11
n_points = 1000000
"#;

/// The 10 μs sweep on a 10 GHz grid.
const ESTIMATE_C_DESK: &str = r#"
k_max = 20

[grid]
t_atom_s = 1e-10
n_points = 100000

[clock]
f_s1_hz = 200e6
modulation = "linear_chirp"
f_dev_hz = 10e6
period_s = 10e-6
"#;

/// The 100 μs sweep on a 10 GHz grid.
const ESTIMATE_C_FULL: &str = r#"
k_max = 20

[grid]
t_atom_s = 1e-10
n_points = 1000000

[clock]
f_s1_hz = 200e6
modulation = "linear_chirp"
f_dev_hz = 10e6
period_s = 100e-6
"#;

fn parse_preset(text: &str) -> Table {
    text.parse::<Table>().expect("built-in preset is valid TOML")
}

/// The built-in settings table for an experiment at a scale.
pub fn preset(id: ExperimentId, scale: Scale) -> Table {
    let layers: &[&str] = match (id, scale) {
        (ExperimentId::StripTable, _) => &[STRIP_PRESET],
        (ExperimentId::Fig8, Scale::Desk) => &[FIG8_PRESET, FIG8_DESK_GRID],
        (ExperimentId::Fig8, Scale::Full) => &[FIG8_PRESET, FIG8_FULL_GRID],
        (ExperimentId::Fig9, _) => &[FIG9_PRESET],
        (ExperimentId::Fig10, Scale::Desk) => &[FIG10_PRESET, FIG10_DESK],
        (ExperimentId::Fig10, Scale::Full) => &[FIG10_PRESET, FIG10_FULL],
        (ExperimentId::Spectrum, Scale::Desk) => &[SPECTRUM_PRESET, SPECTRUM_DESK_GRID],
        (ExperimentId::Spectrum, Scale::Full) => &[SPECTRUM_PRESET, SPECTRUM_FULL_GRID],
        (ExperimentId::EstimateC, Scale::Desk) => &[ESTIMATE_C_DESK],
        (ExperimentId::EstimateC, Scale::Full) => &[ESTIMATE_C_FULL],
    };
    let mut table = Table::new();
    for layer in layers {
        merge(&mut table, &parse_preset(layer));
    }
    table
}
