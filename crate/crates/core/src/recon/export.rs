//! Depth-map file formats: PFM (float32), 16-bit PGM and CSV.

use std::fmt::Write as _;
use std::path::Path;

use super::DepthMap;
use crate::error::{Error, Result};

impl DepthMap {
    /// Grayscale PFM, little-endian, rows stored bottom to top. Invalid
    /// pixels are written as 0.
    pub fn to_pfm(&self) -> Vec<u8> {
        let mut out = format!("Pf\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        out.reserve(self.n() * 4);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.extend_from_slice(&(self.depths[y * self.width + x] as f32).to_le_bytes());
            }
        }
        out
    }

    /// Reads the output of [`DepthMap::to_pfm`]; nonzero pixels are valid.
    pub fn from_pfm(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::param("pfm", msg.to_string());
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        pos += 1;
        if fields[0] != "Pf" {
            return Err(bad("only grayscale `Pf` is supported"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
        let scale: f64 = fields[3].parse().map_err(|_| bad("bad scale"))?;
        let data = bytes.get(pos..).unwrap_or(&[]);
        if data.len() != width * height * 4 {
            return Err(bad("pixel data length does not match header"));
        }
        let mut map = DepthMap::empty(width, height);
        for (k, chunk) in data.chunks_exact(4).enumerate() {
            let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if scale < 0.0 {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            } as f64;
            let (row, x) = (k / width, k % width);
            let i = (height - 1 - row) * width + x;
            map.depths[i] = v;
            map.mask[i] = v != 0.0;
        }
        Ok(map)
    }

    /// Binary 16-bit PGM with `max_range` mapped to 65535.
    pub fn to_pgm16(&self, max_range: f64) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.n() * 2);
        for &d in &self.depths {
            let v = if max_range > 0.0 {
                (d / max_range * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    /// `x,y,depth_m,valid` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,depth_m,valid\n");
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                let _ = writeln!(out, "{x},{y},{},{}", self.depths[i], u8::from(self.mask[i]));
            }
        }
        out
    }

    /// Writes `<stem>.pfm`, `<stem>.pgm` and `<stem>.csv` into `dir`.
    pub fn write_all(&self, dir: impl AsRef<Path>, stem: &str, max_range: f64) -> Result<()> {
        let dir = dir.as_ref();
        let write = |ext: &str, bytes: &[u8]| {
            let p = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&p, bytes).map_err(|e| Error::io(format!("writing {}", p.display()), e))
        };
        write("pfm", &self.to_pfm())?;
        write("pgm", &self.to_pgm16(max_range))?;
        write("csv", self.to_csv().as_bytes())
    }
}
