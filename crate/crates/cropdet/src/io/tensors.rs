//! Named-tensor container: a small JSON manifest next to a binary blob.
//!
//! The manifest lists every tensor's name, shape, and byte offset; the
//! blob holds the values as little-endian 32-bit floats in row-major
//! order. For convolution weights that order is out-channel, in-channel,
//! kernel-y, kernel-x. The blob path is resolved relative to the
//! manifest's directory, so a manifest/blob pair can be moved as a unit.
//!
//! ```json
//! {
//!   "format": "tensors-v1",
//!   "blob": "net.bin",
//!   "tensors": [
//!     {"name":"rpn.shared.weight","shape":[8,8,3,3],"offset":0}
//!   ]
//! }
//! ```
//!
//! Values live in memory as f64 but are stored as f32: reading returns
//! exactly the stored f32 values, so a file round-trips losslessly while
//! an arbitrary f64 tensor quantizes once on the first write.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::write_atomic;

const FORMAT_TAG: &str = "tensors-v1";

/// A named, shaped block of values. The element count always equals the
/// product of the shape dimensions, and every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::validation("tensor name must be non-empty"));
        }
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::validation(format!(
                "tensor \"{name}\" has invalid shape {shape:?}"
            )));
        }
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| {
                Error::validation(format!("tensor \"{name}\" shape {shape:?} overflows"))
            })?;
        if data.len() != expected {
            return Err(Error::validation(format!(
                "tensor \"{name}\" shape {shape:?} implies {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "tensor \"{name}\" contains non-finite value {v}"
            )));
        }
        Ok(Self { name, shape, data })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    format: String,
    blob: String,
    tensors: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

/// Reads a manifest and its blob, returning tensors in manifest order.
pub fn read_tensors(manifest_path: &Path) -> Result<Vec<Tensor>> {
    let path_str = manifest_path.display().to_string();
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| Error::io(format!("reading {path_str}"), e))?;
    let raw: RawManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&path_str, 1, format!("invalid manifest: {e}")))?;
    if raw.format != FORMAT_TAG {
        return Err(Error::parse(
            &path_str,
            1,
            format!("unsupported format \"{}\", expected \"{FORMAT_TAG}\"", raw.format),
        ));
    }

    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&raw.blob);
    let blob = fs::read(&blob_path)
        .map_err(|e| Error::io(format!("reading blob {}", blob_path.display()), e))?;

    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(raw.tensors.len());
    for entry in raw.tensors {
        if !seen.insert(entry.name.clone()) {
            return Err(Error::parse(
                &path_str,
                1,
                format!("duplicate tensor \"{}\"", entry.name),
            ));
        }
        let count = entry
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|_| !entry.shape.is_empty() && !entry.shape.contains(&0))
            .ok_or_else(|| {
                Error::parse(
                    &path_str,
                    1,
                    format!("tensor \"{}\" has invalid shape {:?}", entry.name, entry.shape),
                )
            })?;
        let bytes = count.checked_mul(4).and_then(|b| entry.offset.checked_add(b));
        let end = bytes.ok_or_else(|| {
            Error::parse(&path_str, 1, format!("tensor \"{}\" overflows the blob", entry.name))
        })?;
        if end > blob.len() {
            return Err(Error::parse(
                &path_str,
                1,
                format!(
                    "tensor \"{}\" needs bytes {}..{} but blob {} holds {}",
                    entry.name,
                    entry.offset,
                    end,
                    raw.blob,
                    blob.len()
                ),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for chunk in blob[entry.offset..end].chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(Error::parse(
                    &path_str,
                    1,
                    format!("tensor \"{}\" contains non-finite value {v}", entry.name),
                ));
            }
            data.push(v as f64);
        }
        out.push(Tensor::new(entry.name, entry.shape, data)?);
    }
    Ok(out)
}

/// Writes a manifest at `manifest_path` and a packed blob beside it,
/// named after the manifest's file stem with a `.bin` extension.
/// Offsets are assigned sequentially in input order.
pub fn write_tensors(tensors: &[Tensor], manifest_path: &Path) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in tensors {
        if !seen.insert(t.name.as_str()) {
            return Err(Error::validation(format!("duplicate tensor \"{}\"", t.name)));
        }
    }

    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| {
            Error::validation(format!(
                "manifest path {} has no usable file name",
                manifest_path.display()
            ))
        })?;
    let blob_name = format!("{stem}.bin");
    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&blob_name);

    let mut blob = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let offset = blob.len();
        for &v in &t.data {
            let f = v as f32;
            if !f.is_finite() {
                return Err(Error::validation(format!(
                    "tensor \"{}\" value {v} does not fit in 32-bit storage",
                    t.name
                )));
            }
            blob.extend_from_slice(&f.to_le_bytes());
        }
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        entries.push(format!(
            "    {{\"name\":{},\"shape\":[{}],\"offset\":{offset}}}",
            serde_json::to_string(&t.name).expect("strings always serialize"),
            dims.join(",")
        ));
    }

    let manifest = format!(
        "{{\n  \"format\": \"{FORMAT_TAG}\",\n  \"blob\": {},\n  \"tensors\": [\n{}\n  ]\n}}\n",
        serde_json::to_string(&blob_name).expect("strings always serialize"),
        entries.join(",\n")
    );

    write_atomic(&blob_path, &blob)?;
    write_atomic(manifest_path, manifest.as_bytes())
}
