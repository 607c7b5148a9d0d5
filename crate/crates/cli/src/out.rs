use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::Path;

use bitbias_core::io::{read_records, Precision, ReportKind};
use bitbias_core::StudyRecord;
use serde::Serialize;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Io(_) => EXIT_IO,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<bitbias_core::Error> for Failure {
    fn from(e: bitbias_core::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

pub fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let meta = fs::metadata(dir).map_err(|e| io_err(dir, e))?;
    if meta.permissions().readonly() {
        return Err(Failure::Io(format!(
            "{}: directory is read-only",
            dir.display()
        )));
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(
    path: &Path,
    kind: ReportKind,
    value: &T,
    precision: Precision,
) -> Result<String, Failure> {
    let s = bitbias_core::io::write_json(kind, value, precision)?;
    write_bytes(path, s.as_bytes())?;
    Ok(s)
}

/// Render a CSV into memory with `f`, then write it to `path`.
pub fn write_csv(
    path: &Path,
    f: impl FnOnce(&mut Vec<u8>) -> bitbias_core::Result<()>,
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_bytes(path, &buf)
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    if crate::is_stdin(path) {
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| io_err(path, e))?;
    } else {
        buf = fs::read(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Failure::Input(format!("{}: {e}", path.display())),
            _ => io_err(path, e),
        })?;
    }
    Ok(buf)
}

pub fn load_records(path: &Path) -> Result<Vec<StudyRecord>, Failure> {
    let bytes = read_input(path)?;
    read_records(bytes.as_slice()).map_err(|e| match e {
        bitbias_core::Error::Empty(m) => {
            Failure::Input(format!("{}: empty record file ({m})", path.display()))
        }
        other => Failure::Input(format!("{}: {other}", path.display())),
    })
}

/// Numeric series: one value per line (blank lines and `#` comments
/// skipped); a single comma-separated line is also accepted.
pub fn load_series(path: &Path) -> Result<Vec<f64>, Failure> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::input(format!("{}: not UTF-8 text", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| {
                Failure::input(format!(
                    "{}: line {}: `{tok}` is not a number",
                    path.display(),
                    i + 1
                ))
            })?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Failure::input(format!("{}: empty series", path.display())));
    }
    Ok(values)
}
