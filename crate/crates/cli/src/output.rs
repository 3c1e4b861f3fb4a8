//! Result records, `results.csv` and the TOML run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Table;

use crate::plot::Plot;
use crate::CliError;

pub const CSV_HEADER: [&str; 7] = ["series", "x_name", "x", "statistic", "value", "count", "std_error"];

/// One statistic at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub series: String,
    pub x_name: String,
    pub x: f64,
    pub statistic: String,
    pub value: f64,
    /// Trials behind the value; 1 for closed-form results.
    pub count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

impl Record {
    pub fn new(series: impl Into<String>, x_name: &str, x: f64, statistic: &str, value: f64) -> Self {
        Record {
            series: series.into(),
            x_name: x_name.to_string(),
            x,
            statistic: statistic.to_string(),
            value,
            count: 1,
            std_error: None,
        }
    }

    /// A success/failure fraction with its binomial standard error.
    pub fn proportion(series: impl Into<String>, x_name: &str, x: f64, statistic: &str, hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Record {
            count: trials as u64,
            std_error: Some(binomial_se(p, trials)),
            ..Record::new(series, x_name, x, statistic, p)
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count as u64;
        self
    }
}

/// `√(p(1−p)/n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// What an experiment produces before anything touches the disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub records: Vec<Record>,
    pub summary: BTreeMap<String, f64>,
    pub conventions: Vec<String>,
    /// Extra data files, `(file name, contents)`.
    pub files: Vec<(String, String)>,
    /// Plots, written as `plot_<name>.svg`.
    pub plots: Vec<(String, Plot)>,
}

impl Outcome {
    /// Records whose series and statistic match.
    pub fn select<'a>(&'a self, series: &'a str, statistic: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.series == series && r.statistic == statistic)
    }
}

pub fn records_to_csv(records: &[Record]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.series.clone(),
            r.x_name.clone(),
            r.x.to_string(),
            r.statistic.clone(),
            r.value.to_string(),
            r.count.to_string(),
            r.std_error.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

pub fn records_from_csv(text: &str) -> Result<Vec<Record>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |e: &dyn std::fmt::Display| CliError::Output(format!("results.csv: {e}"));
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| bad(&e))?;
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| bad(&e));
        out.push(Record {
            series: row[0].to_string(),
            x_name: row[1].to_string(),
            x: num(2)?,
            statistic: row[3].to_string(),
            value: num(4)?,
            count: row[5].parse().map_err(|e| bad(&e))?,
            std_error: if row[6].is_empty() { None } else { Some(num(6)?) },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub scale: String,
    pub seed: u64,
    pub library_version: String,
    pub wall_clock_s: f64,
    pub conventions: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    pub config: Table,
    pub records: Vec<Record>,
}

impl Manifest {
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Output(format!("manifest: {e}")))
    }
}

/// Writes `results.csv`, `manifest.txt`, any extra files and plots into
/// `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, manifest: &Manifest, outcome: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), records_to_csv(&outcome.records)?)?;
    fs::write(dir.join("manifest.txt"), manifest.to_toml()?)?;
    for (name, contents) in &outcome.files {
        fs::write(dir.join(name), contents)?;
    }
    for (name, plot) in &outcome.plots {
        fs::write(dir.join(format!("plot_{name}.svg")), plot.to_svg())?;
    }
    Ok(())
}
