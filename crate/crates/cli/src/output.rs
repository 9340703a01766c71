//! Report, manifest and table files.

use std::fs;
use std::path::{Path, PathBuf};

use favsites::report::{csv_rows, AuditReport, CSV_HEADER};
use serde::Serialize;

use crate::config::Format;
use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "FAVSITES_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "favsites-out";

fn output_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        source,
    }
}

/// Output directory: the flag (or the environment variable, which clap
/// folds into it), then the config file, then the default.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_error(path, e))
}

pub fn write_csv<const N: usize>(path: &Path, header: &[&str; N], rows: &[[String; N]]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| output_error(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

/// Writes `reports.json` (the full structured reports) or `reports.csv`
/// (one row per audit and parameter point) into `dir`.
pub fn emit_report(reports: &[AuditReport], format: Format, dir: &Path) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = match format {
        Format::Json => dir.join("reports.json"),
        Format::Csv => dir.join("reports.csv"),
    };
    match format {
        Format::Json => write_json(&path, reports)?,
        Format::Csv => write_csv(&path, &CSV_HEADER, &csv_rows(reports))?,
    }
    Ok(path)
}
