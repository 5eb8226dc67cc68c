//! File formats: trace and raw-shot CSV, SVG figures, atomic writes.

mod csv;
mod svg;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use csv::{
    format_shots, format_trace, load_shots, load_trace, parse_shots, parse_trace, save_shots, save_trace,
    SHOTS_HEADER, SHOTS_MAGIC, TRACE_HEADER, TRACE_MAGIC,
};
pub use svg::{emit_plot, render_svg, Panel, Series, SeriesStyle};

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_directory_is_io_error() {
        let err = write_atomic(Path::new("/nonexistent-dir-xyz/a.txt"), b"x").unwrap_err();
        assert_eq!(err.category(), "io");
    }
}
