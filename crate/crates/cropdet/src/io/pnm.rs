//! Binary PNM images: P6 (RGB) and P5 (grayscale), maxval 255 only.
//!
//! The header is whitespace-separated tokens with `#` comments allowed
//! between them; exactly one whitespace byte separates the maxval from
//! the sample data. Sample count must match width*height*channels to the
//! byte, so truncated or padded files never pass silently.

use std::fs;
use std::path::Path;

use crate::augment::Raster;
use crate::error::{Error, Result};
use crate::geometry::ImageSize;

use super::write_atomic;

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_filler(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn next(&mut self) -> Option<&'a str> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()
    }
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::validation(format!("{}: {msg}", path.display()))
}

/// Reads a P6 file into a 3-channel raster or a P5 file into a
/// 1-channel one.
pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut tokens = Tokens::new(&bytes);

    let magic = tokens.next().ok_or_else(|| bad(path, "missing PNM magic"))?;
    let channels = match magic {
        "P6" => 3,
        "P5" => 1,
        other => return Err(bad(path, format!("unsupported magic \"{other}\", expected P6 or P5"))),
    };

    let mut dim = |name: &str| -> Result<u32> {
        let tok = tokens
            .next()
            .ok_or_else(|| bad(path, format!("missing {name} in header")))?;
        tok.parse::<u32>()
            .map_err(|_| bad(path, format!("invalid {name} \"{tok}\"")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("maxval")?;
    if maxval != 255 {
        return Err(bad(path, format!("maxval {maxval} unsupported, expected 255")));
    }

    // A single whitespace byte separates the header from the samples.
    if tokens.pos >= bytes.len() || !bytes[tokens.pos].is_ascii_whitespace() {
        return Err(bad(path, "missing whitespace before pixel data"));
    }
    let data = &bytes[tokens.pos + 1..];

    ImageSize::new(width, height).map_err(|e| bad(path, e))?;
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| bad(path, "image dimensions overflow"))?;
    if data.len() != expected {
        return Err(bad(
            path,
            format!("expected {expected} bytes of pixel data, found {}", data.len()),
        ));
    }
    Raster::new(width as usize, height as usize, channels, data.to_vec())
}

/// Writes a raster as P6 (3 channels) or P5 (1 channel).
pub fn write_raster(raster: &Raster, path: &Path) -> Result<()> {
    let magic = match raster.channels() {
        3 => "P6",
        1 => "P5",
        c => return Err(Error::validation(format!("no PNM encoding for {c} channels"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", raster.width(), raster.height()).into_bytes();
    out.extend_from_slice(raster.samples());
    write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(w: usize, h: usize, channels: usize) -> Raster {
        let mut r = Raster::filled(w, h, channels, 0).unwrap();
        for y in 0..h {
            for x in 0..w {
                let v = if (x + y) % 2 == 0 { 200 } else { 55 };
                for c in 0..channels {
                    r.set(x, y, c, v);
                }
            }
        }
        r
    }

    #[test]
    fn p6_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let img = checkerboard(5, 4, 3);
        write_raster(&img, &path).unwrap();
        let back = read_raster(&path).unwrap();
        assert_eq!(back.samples(), img.samples());
        assert_eq!((back.width(), back.height(), back.channels()), (5, 4, 3));
    }

    #[test]
    fn p5_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = checkerboard(3, 7, 1);
        write_raster(&img, &path).unwrap();
        assert_eq!(read_raster(&path).unwrap().samples(), img.samples());
    }

    #[test]
    fn header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let mut bytes = b"P5 # tool name\n# another note\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        fs::write(&path, &bytes).unwrap();
        let img = read_raster(&path).unwrap();
        assert_eq!(img.samples(), &[7, 9]);
    }

    #[test]
    fn wrong_maxval_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        fs::write(&path, b"P5\n1 1\n65535\n\0\0").unwrap();
        assert!(read_raster(&path).unwrap_err().to_string().contains("maxval"));
    }

    #[test]
    fn truncated_and_padded_data_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        fs::write(&path, b"P6\n2 2\n255\nshort").unwrap();
        let err = read_raster(&path).unwrap_err().to_string();
        assert!(err.contains("expected 12 bytes"), "was: {err}");

        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0; 5]);
        fs::write(&path, &bytes).unwrap();
        assert!(read_raster(&path).is_err());
    }

    #[test]
    fn unknown_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pbm");
        fs::write(&path, b"P4\n1 1\n\0").unwrap();
        assert!(read_raster(&path).unwrap_err().to_string().contains("P6 or P5"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_raster(Path::new("/nonexistent/img.ppm")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
