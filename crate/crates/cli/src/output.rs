//! Atomic report files: written to a temporary file in the target directory,
//! then renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

pub fn write_atomic(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let io_err = |source| CliError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf).map_err(io_err)?;
        buf.flush().map_err(io_err)?;
    }
    tmp.persist(&path).map_err(|e| io_err(e.error))?;
    Ok(path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize to JSON");
    write_atomic(dir, name, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}
