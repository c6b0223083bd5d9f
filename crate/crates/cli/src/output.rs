use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use svgloo::{ErrorClass, RunConfig};

use crate::{CliError, CliResult};

pub const TOOL: &str = "svgloo";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(ErrorClass::Io, format!("{}: {e}", path.display()))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A hashed input file, named by its file name so reports do not depend on the working directory.
#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub file: String,
    pub sha256: String,
}

impl InputFile {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        InputFile {
            file: file_name(path),
            sha256: sha256(bytes),
        }
    }

    pub fn read(path: &Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = read_bytes(path)?;
        Ok((InputFile::new(path, &bytes), bytes))
    }
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "document".into(), |s| s.to_string_lossy().into_owned())
}

/// Common header of every JSON report.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputFile>,
    pub config: serde_json::Value,
    #[serde(flatten)]
    pub body: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'static str, inputs: Vec<InputFile>, config: &RunConfig, body: &'a T) -> Self {
        Envelope {
            tool: TOOL,
            version: VERSION,
            command,
            inputs,
            config: config.to_json(),
            body,
        }
    }
}

pub fn out_dir(config: &RunConfig) -> CliResult<PathBuf> {
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("svgloo-out"));
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    Ok(dir)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new(ErrorClass::Other, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// SVG files under `path`: the file itself, or a directory's `*.svg` sorted by name.
pub fn discover(path: &Path) -> CliResult<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| io_error(path, e))?;
    if !meta.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_error(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("svg")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::new(
            ErrorClass::Io,
            format!("{}: no .svg files found", path.display()),
        ));
    }
    Ok(files)
}

/// Resolves a per-document companion: `base` itself for a single input,
/// otherwise `base/<stem><suffix>`.
pub fn companion(base: &Path, svg: &Path, corpus: bool, suffix: &str) -> PathBuf {
    if corpus {
        base.join(format!("{}{suffix}", stem(svg)))
    } else {
        base.to_path_buf()
    }
}

/// Per-document seed that does not depend on corpus order.
pub fn document_seed(seed: u64, svg: &Path) -> u64 {
    let digest = Sha256::digest(stem(svg).as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(head)
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Mean of the defined values.
pub fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
