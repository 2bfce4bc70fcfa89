//! Experiment runner: reads a TOML experiment file, runs each entry through the
//! library engines and writes one CSV per entry plus a run manifest.

pub mod config;
pub mod engine;
pub mod error;
pub mod output;

use config::{parse_experiments, ExperimentSpec};
use engine::{check_task, run_compare, run_task, Outcome, Prepared, DEFAULT_SEED};
use error::CliError;
use output::{sha256_hex, write_atomic, ExperimentRecord, Manifest};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Compare,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// defaults to the directory holding the spec file
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub strict: bool,
}

#[derive(Debug)]
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub failures: Vec<(String, CliError)>,
}

pub fn prepare(
    spec: &ExperimentSpec,
    base: &Path,
    seed_override: Option<u64>,
) -> Result<Prepared, CliError> {
    let dist = spec.distribution.build(base).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", spec.id)),
        other => other,
    })?;
    Ok(Prepared {
        spec: spec.clone(),
        dist,
        ns: spec.n_schedule.resolve()?,
        seed: seed_override.or(spec.options.seed).unwrap_or(DEFAULT_SEED),
    })
}

/// Runs one entry in memory; no files are touched.
pub fn execute(
    spec: &ExperimentSpec,
    base: &Path,
    mode: Mode,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let p = prepare(spec, base, seed)?;
    match mode {
        Mode::Run => run_task(&p),
        Mode::Compare => run_compare(&p),
    }
}

fn check_capability(spec: &ExperimentSpec, base: &Path, mode: Mode) -> Result<(), CliError> {
    let p = prepare(spec, base, None)?;
    match mode {
        Mode::Run => check_task(&p),
        Mode::Compare => {
            if spec.methods.len() < 2 {
                Err(CliError::UnsupportedCombination(format!(
                    "{}: compare needs at least two methods",
                    spec.id
                )))
            } else {
                Ok(())
            }
        }
    }
}

fn read_spec(path: &Path) -> Result<(String, config::ExperimentFile, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file = parse_experiments(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((text, file, base))
}

/// Parses the file and checks that every entry maps onto an engine.
pub fn validate_file(path: &Path, mode: Mode) -> Result<usize, CliError> {
    let (_, file, base) = read_spec(path)?;
    for e in &file.experiments {
        if mode == Mode::Run && e.task.is_none() && e.methods.len() >= 2 {
            check_capability(e, &base, Mode::Compare)?;
        } else {
            check_capability(e, &base, mode)?;
        }
    }
    Ok(file.experiments.len())
}

fn run_one(
    spec: &ExperimentSpec,
    base: &Path,
    out_dir: &Path,
    mode: Mode,
    opts: &RunOptions,
) -> (ExperimentRecord, Option<CliError>) {
    let start = Instant::now();
    let task = match mode {
        Mode::Run => spec.task.map_or("none", |t| t.name()).to_string(),
        Mode::Compare => "compare".to_string(),
    };
    let mut record = ExperimentRecord {
        id: spec.id.clone(),
        task,
        csv: None,
        csv_sha256: None,
        rows: 0,
        wall_time_s: 0.0,
        warnings: Vec::new(),
        error: None,
    };
    let result = execute(spec, base, mode, opts.seed).and_then(|out| {
        record.warnings = out.warnings.clone();
        if opts.strict {
            if let Some(w) = out.warnings.first() {
                return Err(CliError::Strict(format!("{}: {w}", spec.id)));
            }
        }
        let name = spec
            .output
            .csv
            .clone()
            .unwrap_or_else(|| format!("{}.csv", spec.id));
        let csv = out.table.to_csv();
        write_atomic(&out_dir.join(&name), csv.as_bytes())?;
        record.csv = Some(name);
        record.csv_sha256 = Some(sha256_hex(csv.as_bytes()));
        record.rows = out.table.rows.len();
        Ok(())
    });
    record.wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => (record, None),
        Err(e) => {
            record.error = Some(e.to_string());
            (record, Some(e))
        }
    }
}

/// Runs every entry (concurrently up to `jobs`), writes CSVs and `<stem>.manifest.json`.
pub fn run_file(path: &Path, mode: Mode, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let (text, file, base) = read_spec(path)?;
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| base.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Parse(format!("thread pool: {e}")))?;
    let results: Vec<(ExperimentRecord, Option<CliError>)> = pool.install(|| {
        file.experiments
            .par_iter()
            .map(|e| run_one(e, &base, &out_dir, mode, opts))
            .collect()
    });
    let mut failures = Vec::new();
    let mut experiments = Vec::with_capacity(results.len());
    for (rec, err) in results {
        if let Some(e) = err {
            failures.push((rec.id.clone(), e));
        }
        experiments.push(rec);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: mode.name().to_string(),
        spec_file: path.display().to_string(),
        spec_sha256: sha256_hex(text.as_bytes()),
        seed_override: opts.seed,
        jobs: opts.jobs,
        strict: opts.strict,
        wall_time_s: start.elapsed().as_secs_f64(),
        experiments,
    };
    let stem = path
        .file_stem()
        .map_or("experiments".into(), |s| s.to_string_lossy().into_owned());
    let manifest_path = out_dir.join(format!("{stem}.manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path, json.as_bytes())?;
    Ok(RunSummary {
        manifest_path,
        manifest,
        failures,
    })
}
