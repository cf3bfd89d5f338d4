//! Plain-text file formats.
//!
//! A signal file holds one sample per line. Lines starting with `#` and
//! blank lines are ignored. Samples are written with 17 significant digits
//! so that a write/read cycle reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::Signal;

pub fn parse_signal(text: &str) -> Result<Signal> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // tolerate a leading index column: "n,x"
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        let v: f64 = field.parse().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("`{field}`: {e}"),
        })?;
        samples.push(v);
    }
    Signal::new(samples)
}

pub fn format_sample(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_signal(signal: &Signal, header: &[&str]) -> String {
    let mut out = String::with_capacity(signal.len() * 24);
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    for &x in signal.samples() {
        out.push_str(&format_sample(x));
        out.push('\n');
    }
    out
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_signal(&text)
}

pub fn write_signal(path: &Path, signal: &Signal, header: &[&str]) -> Result<()> {
    write_atomic(path, format_signal(signal, header).as_bytes())
}

/// Writes through a temporary file in the destination directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Renders rows as CSV with a header line. Values are written verbatim.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
