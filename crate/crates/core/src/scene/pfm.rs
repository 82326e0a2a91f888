//! Portable Float Map codec.
//!
//! Header: `PF` (3 channels) or `Pf` (1 channel), then `width height`, then a
//! scale whose sign gives the byte order (negative = little-endian). Pixel
//! rows are stored bottom-to-top. Rasters in memory are top-to-bottom.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// 1 or 3.
    pub channels: usize,
    /// Row-major, top row first, channels interleaved.
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn encode(&self) -> Vec<u8> {
        assert!(self.channels == 1 || self.channels == 3);
        assert_eq!(self.data.len(), self.width * self.height * self.channels);
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{tag}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        let row = self.width * self.channels;
        out.reserve(self.data.len() * 4);
        for r in (0..self.height).rev() {
            for &x in &self.data[r * row..(r + 1) * row] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0usize;
        let mut token = || -> std::result::Result<&[u8], String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            Ok(&bytes[start..pos])
        };
        let channels = match token()? {
            b"PF" => 3,
            b"Pf" => 1,
            other => {
                return Err(format!(
                    "bad magic {:?}",
                    String::from_utf8_lossy(other)
                ))
            }
        };
        let parse = |t: &[u8]| -> std::result::Result<f64, String> {
            std::str::from_utf8(t)
                .ok()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| format!("bad header number {:?}", String::from_utf8_lossy(t)))
        };
        let width = parse(token()?)? as usize;
        let height = parse(token()?)? as usize;
        let scale = parse(token()?)?;
        if scale == 0.0 || !scale.is_finite() {
            return Err("scale must be nonzero".into());
        }
        // exactly one whitespace byte separates the header from the data
        pos += 1;
        let n = width * height * channels;
        let body = bytes.get(pos..).unwrap_or_default();
        if body.len() < n * 4 {
            return Err(format!("expected {} data bytes, found {}", n * 4, body.len()));
        }
        let little = scale < 0.0;
        let row = width * channels;
        let mut data = vec![0f32; n];
        for (k, chunk) in body[..n * 4].chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let x = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            let (file_row, col) = (k / row, k % row);
            data[(height - 1 - file_row) * row + col] = x;
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|reason| Error::load(path, "pfm", reason))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn from_scalar(width: usize, height: usize, values: &[f64]) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: values.iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn from_vec3(width: usize, height: usize, values: &[crate::math::Vec3]) -> Self {
        Self {
            width,
            height,
            channels: 3,
            data: values
                .iter()
                .flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])
                .collect(),
        }
    }
}
