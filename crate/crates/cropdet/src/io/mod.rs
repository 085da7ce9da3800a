//! File formats: JSON-lines annotations and detections, the class-list
//! sidecar, tensor manifests with flat binary blobs, and PPM/PGM rasters.
//!
//! All text output is UTF-8 with LF line endings, and every writer goes
//! through a temp-file-then-rename so a crashed run never leaves a torn
//! file behind.

mod jsonl;
mod pnm;
mod tensors;

pub use jsonl::{
    read_annotations, read_classes, read_detections, write_annotations, write_classes,
    write_detections, AnnotatedImage, DetectionRecord,
};
pub use pnm::{read_raster, write_raster};
pub use tensors::{read_tensors, write_tensors, Tensor};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Canonical number rendering for the text formats: fixed six decimal
/// places, trailing zeros (and a bare trailing dot) trimmed.
///
/// Idempotent at the scales these files hold: parsing the output and
/// formatting it again reproduces the same text, so rewriting a file is
/// byte-stable.
pub(crate) fn fmt_f64(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename over the target).
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::io(format!("creating temp file in {}", dir.display()), e))?;
    tmp.write_all(bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(format!("replacing {}", path.display()), e.error))?;
    Ok(())
}
