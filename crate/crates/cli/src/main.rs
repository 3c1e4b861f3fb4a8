use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nyfold::{execute, ConfigFile, ExperimentId, ResolvedConfig, Scale};

/// Run a seeded sampling experiment and write results.csv, manifest.txt and
/// plots.
#[derive(Debug, Parser)]
#[command(name = "nyfold", version)]
struct Args {
    /// Experiment to run.
    experiment: ExperimentId,

    /// TOML config file.
    #[arg(long)]
    config: PathBuf,

    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Preset scale; overrides the config file.
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = ConfigFile::load(&args.config)
        .and_then(|file| ResolvedConfig::resolve(&file, args.experiment, args.seed, args.scale))
        .and_then(|cfg| execute(&cfg, &args.out));
    match result {
        Ok(m) => {
            eprintln!(
                "{} ({} scale, seed {}): {} records in {:.2} s -> {}",
                m.experiment,
                m.scale,
                m.seed,
                m.records.len(),
                m.wall_clock_s,
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nyfold: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
