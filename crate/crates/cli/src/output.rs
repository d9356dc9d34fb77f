//! File output: fixed-format CSV, atomic writes, manifests and hashing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// `%.17g`: 17 significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-5, 1e17)`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa.to_string()), exp.abs())
    }
}

/// Writes rows of pre-formatted fields as CSV with `\n` line endings.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(CliError::Usage(format!(
            "{}: expected columns `{}`, found `{}`",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    reader.deserialize().map(|r| r.map_err(CliError::from)).collect()
}

/// Fails early when `path` cannot be created, before any computation runs.
pub fn check_writable(path: &Path) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(CliError::Io(format!("output directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(CliError::Io(format!("output path {} is a directory", path.display())));
    }
    let meta = fs::metadata(parent).map_err(|e| CliError::Io(e.to_string()))?;
    if meta.permissions().readonly() {
        return Err(CliError::Io(format!("output directory {} is read-only", parent.display())));
    }
    Ok(())
}

/// Writes through a sibling temporary file and renames, so a failed run
/// never leaves a truncated output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Io(format!("{}: {e}", path.display())));
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl HashedFile {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let path = fs::canonicalize(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let sha256 = sha256_file(&path)?;
        Ok(Self { path, sha256 })
    }
}

/// Sidecar describing how an output file was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<HashedFile>,
    pub outputs: Vec<HashedFile>,
    pub jobs: usize,
    pub wall_time_seconds: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Result of re-hashing every file named in a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

pub fn verify_manifest(path: &Path) -> Result<Verification, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut mismatches = Vec::new();
    let files: Vec<&HashedFile> = manifest.inputs.iter().chain(&manifest.outputs).collect();
    for f in &files {
        match sha256_file(&f.path) {
            Ok(h) if h == f.sha256 => {}
            Ok(h) => mismatches.push(format!("{}: expected {}, found {h}", f.path.display(), f.sha256)),
            Err(e) => mismatches.push(e.to_string()),
        }
    }
    Ok(Verification { checked: files.len(), mismatches })
}
