//! Writing a run to its output directory.
//!
//! `summary.csv`, `report.json` and `digest.txt` depend only on the resolved
//! configuration, so reruns reproduce them byte for byte. Wall-clock data goes
//! to `metadata.json`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;
use crate::experiments::{ExperimentReport, SummaryRow};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.json";
pub const DIGEST_FILE: &str = "digest.txt";
pub const METADATA_FILE: &str = "metadata.json";
pub const SAMPLE_PATH_FILE: &str = "sample_path.csv";

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: &'static str,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub elapsed_seconds: f64,
    pub parallel: bool,
}

impl RunMetadata {
    pub fn new(started: SystemTime, elapsed: Duration) -> Self {
        let started_unix = started.duration_since(UNIX_EPOCH).unwrap_or_default().as_secs_f64();
        RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            started_unix,
            finished_unix: started_unix + elapsed.as_secs_f64(),
            elapsed_seconds: elapsed.as_secs_f64(),
            parallel: cfg!(feature = "parallel"),
        }
    }
}

/// Serialises the summary rows with a fixed header.
pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "experiment",
            "cell_id",
            "n_paths",
            "dt",
            "horizon",
            "n_exits",
            "p_hat",
            "ci_low",
            "ci_high",
            "classifier_tag",
            "seed",
        ])
        .map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Writes every artefact into `dir`, creating it if needed. Returns the paths written.
pub fn write_report(report: &ExperimentReport, meta: &RunMetadata, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();

    let path = dir.join(SUMMARY_FILE);
    write_file(&path, &summary_csv(&report.cells)?)?;
    written.push(path);

    let path = dir.join(REPORT_FILE);
    let mut json = serde_json::to_vec_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
    json.push(b'\n');
    write_file(&path, &json)?;
    written.push(path);

    let path = dir.join(DIGEST_FILE);
    let mut digest = format!("{} (seed {})\n", report.experiment, report.seed);
    for line in &report.digest {
        digest.push_str(line);
        digest.push('\n');
    }
    write_file(&path, digest.as_bytes())?;
    written.push(path);

    if let Some(sample) = &report.sample_path {
        let path = dir.join(SAMPLE_PATH_FILE);
        let file = fs::File::create(&path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        sample.write_csv(&mut w)?;
        w.flush()?;
        written.push(path);
    }

    let path = dir.join(METADATA_FILE);
    let mut json = serde_json::to_vec_pretty(meta).map_err(|e| CliError::Output(e.to_string()))?;
    json.push(b'\n');
    write_file(&path, &json)?;
    written.push(path);

    Ok(written)
}
