//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when an evaluation fails, 2 for invalid
//! configuration, unreadable inputs or unwritable outputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, ConfigError};
use crate::regimes::{run_benchmark, EvalError};
use crate::results::{comparison_table, delta, delta_table, ResultsFile};
use crate::synth::{generate_dataset, SynthError, SynthSpec};
use crate::types::Setting;

pub const SEED_OVERRIDE_ENV: &str = "ECGBENCH_SEED_OVERRIDE";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";

#[derive(Debug, Parser)]
#[command(name = "ecgbench", version, about = "ECG biometric benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SettingArg {
    Closed,
    Open,
}

impl From<SettingArg> for Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Closed => Setting::Closed,
            SettingArg::Open => Setting::Open,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (signals, truth peaks, manifest).
    Synth {
        #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
        preset: Option<String>,
        /// JSON generator spec
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured regime over every seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// output directory for results.json and results.csv
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        regime: Option<String>,
        #[arg(long, value_enum)]
        setting: Option<SettingArg>,
        /// worker threads (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare results files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// print metric differences of cell B minus cell A (`regime[:setting]`)
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        delta: Option<Vec<String>>,
    },
    /// Validate a config and print its defaulted form.
    Validate { config: PathBuf },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Self {
            code: 2,
            message: m.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::usage(e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure::usage(e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = match e {
            EvalError::Ingest(_) | EvalError::Config(_) | EvalError::Synth(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::usage(format!("I/O error on {}: {e}", path.display())))
}

fn read_results(path: &Path) -> Result<ResultsFile, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("I/O error on {}: {e}", path.display())))?;
    ResultsFile::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_OVERRIDE_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::usage(format!("{SEED_OVERRIDE_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn cmd_synth(preset: Option<String>, spec: Option<PathBuf>, seed: u64, out: &Path) -> Result<(), Failure> {
    let spec = match (preset, spec) {
        (Some(p), _) => SynthSpec::preset(&p)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::usage(format!("I/O error on {}: {e}", path.display())))?;
            let s: SynthSpec =
                serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            s.validate()?;
            s
        }
        (None, None) => return Err(Failure::usage("need --preset or --spec")),
    };
    let index = generate_dataset(&spec, seed, out)?;
    println!("wrote {} records to {}", index.records.len(), out.display());
    Ok(())
}

fn cmd_run(
    config: &Path,
    out: &Path,
    regime: Option<&str>,
    setting: Option<SettingArg>,
    jobs: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    cfg.restrict(regime, setting.map(Setting::from))?;
    if let Some(seed) = seed_override()? {
        cfg.seeds = vec![seed];
    }
    if jobs == Some(0) {
        return Err(Failure::usage("--jobs must be >= 1"));
    }
    std::fs::create_dir_all(out).map_err(|e| Failure::usage(format!("I/O error on {}: {e}", out.display())))?;
    let json_path = out.join(RESULTS_JSON);
    let csv_path = out.join(RESULTS_CSV);
    let cleanup = || {
        let _ = std::fs::remove_file(&json_path);
        let _ = std::fs::remove_file(&csv_path);
    };
    cleanup();
    let report = run_benchmark(&cfg, jobs)?;
    let results = ResultsFile::from_report(&report);
    let written = write_file(&json_path, &results.to_json()).and_then(|_| write_file(&csv_path, &results.to_csv()));
    if let Err(e) = written {
        cleanup();
        return Err(e);
    }
    for w in &results.warnings {
        log::warn!("{w}");
    }
    print!("{}", results.to_csv());
    Ok(())
}

fn cmd_report(files: &[PathBuf], delta_cells: Option<&[String]>) -> Result<(), Failure> {
    let runs = files
        .iter()
        .map(|p| Ok((p.display().to_string(), read_results(p)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    print!("{}", comparison_table(&runs));
    if let Some([a, b]) = delta_cells {
        let d = delta(&runs, a, b).map_err(Failure::usage)?;
        print!("{}", delta_table(a, b, &d));
    }
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
    println!("digest {}", cfg.digest());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth {
            preset,
            spec,
            seed,
            out,
        } => cmd_synth(preset, spec, seed, &out),
        Command::Run {
            config,
            out,
            regime,
            setting,
            jobs,
        } => cmd_run(&config, &out, regime.as_deref(), setting, jobs),
        Command::Report { files, delta } => cmd_report(&files, delta.as_deref()),
        Command::Validate { config } => cmd_validate(&config),
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
