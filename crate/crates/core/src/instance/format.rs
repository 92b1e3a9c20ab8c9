//! Instance files.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! magic       8 bytes  "JADCEINS"
//! version     u32
//! header_len  u32
//! header      header_len bytes of UTF-8 JSON: {"config": InstanceConfig}
//! Q           L·N f64 real plane, then L·N f64 imaginary plane
//! Y           L·M f64 real plane, then imaginary plane
//! H           N·M f64 real plane, then imaginary plane
//! active      u64 count, then count × u64 zero-based device indices
//! checksum    32 bytes SHA-256 of everything above
//! ```
//!
//! The JSON mirror stores complex entries as `[re, im]` pairs and is meant
//! for small instances and debugging.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{InstanceConfig, JadceInstance};
use crate::error::{Error, Result};
use crate::model::ComplexMatrix;

pub const MAGIC: &[u8; 8] = b"JADCEINS";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct Header {
    config: InstanceConfig,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt(format!("file truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| Error::Corrupt(format!("{what} size overflows")))?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<ComplexMatrix> {
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Corrupt(format!("{what} dimensions overflow")))?;
        let re = self.f64s(count, what)?;
        let im = self.f64s(count, what)?;
        ComplexMatrix::from_planes(rows, cols, re, im)
            .map_err(|e| Error::Corrupt(format!("{what}: {e}")))
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &ComplexMatrix) {
    for v in m.re().iter().chain(m.im()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl JadceInstance {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        put_matrix(&mut out, &self.q);
        put_matrix(&mut out, &self.y);
        put_matrix(&mut out, &self.true_h);
        out.extend_from_slice(&(self.true_active.len() as u64).to_le_bytes());
        for &i in &self.true_active {
            out.extend_from_slice(&(i as u64).to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::Corrupt("bad magic, not a JADCE instance file".into()));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        if buf.len() < CHECKSUM_LEN {
            return Err(Error::Corrupt("file truncated before checksum".into()));
        }
        let body_len = buf.len() - CHECKSUM_LEN;
        if Sha256::digest(&buf[..body_len]).as_slice() != &buf[body_len..] {
            return Err(Error::Corrupt("checksum mismatch (truncated or modified file)".into()));
        }
        let mut r = Reader {
            buf: &buf[..body_len],
            pos: r.pos,
        };
        let header_len = r.u32("header length")? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
            .map_err(|e| Error::Corrupt(format!("header: {e}")))?;
        let cfg = header.config;
        cfg.validate()
            .map_err(|e| Error::Corrupt(format!("header config: {e}")))?;
        let (n, m, l) = (cfg.devices, cfg.antennas, cfg.sequence_length);
        let q = r.matrix(l, n, "Q")?;
        let y = r.matrix(l, m, "Y")?;
        let true_h = r.matrix(n, m, "H")?;
        let count = r.u64("active count")? as usize;
        if count != cfg.active {
            return Err(Error::Corrupt(format!(
                "active list has {count} entries, header says {}",
                cfg.active
            )));
        }
        let mut true_active = Vec::with_capacity(count);
        for _ in 0..count {
            let i = r.u64("active index")? as usize;
            if i >= n {
                return Err(Error::Corrupt(format!("active index {i} out of range")));
            }
            true_active.push(i);
        }
        if r.pos != r.buf.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after payload",
                r.buf.len() - r.pos
            )));
        }
        Ok(JadceInstance {
            config: cfg,
            q,
            y,
            true_h,
            true_active,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&JsonInstance::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: JsonInstance = serde_json::from_str(s)?;
        if j.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: j.format_version,
                supported: FORMAT_VERSION,
            });
        }
        j.config.validate()?;
        let (n, m, l) = (j.config.devices, j.config.antennas, j.config.sequence_length);
        let inst = JadceInstance {
            q: json_matrix(&j.q, l, n, "Q")?,
            y: json_matrix(&j.y, l, m, "Y")?,
            true_h: json_matrix(&j.true_h, n, m, "H")?,
            true_active: j.true_active,
            config: j.config,
        };
        if inst.true_active.len() != inst.config.active
            || inst.true_active.iter().any(|&i| i >= n)
        {
            return Err(Error::Corrupt("active list inconsistent with config".into()));
        }
        Ok(inst)
    }
}

#[derive(Serialize, Deserialize)]
struct JsonInstance {
    format_version: u32,
    config: InstanceConfig,
    q: Vec<Vec<[f64; 2]>>,
    y: Vec<Vec<[f64; 2]>>,
    true_h: Vec<Vec<[f64; 2]>>,
    true_active: Vec<usize>,
}

fn to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|r| {
            (0..m.cols())
                .map(|c| {
                    let v = m.get(r, c);
                    [v.re, v.im]
                })
                .collect()
        })
        .collect()
}

fn json_matrix(rows: &[Vec<[f64; 2]>], nr: usize, nc: usize, what: &str) -> Result<ComplexMatrix> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Corrupt(format!("{what} is not {nr}x{nc}")));
    }
    let re = rows.iter().flatten().map(|p| p[0]).collect();
    let im = rows.iter().flatten().map(|p| p[1]).collect();
    ComplexMatrix::from_planes(nr, nc, re, im).map_err(|e| Error::Corrupt(format!("{what}: {e}")))
}

impl From<&JadceInstance> for JsonInstance {
    fn from(inst: &JadceInstance) -> Self {
        JsonInstance {
            format_version: FORMAT_VERSION,
            config: inst.config.clone(),
            q: to_rows(&inst.q),
            y: to_rows(&inst.y),
            true_h: to_rows(&inst.true_h),
            true_active: inst.true_active.clone(),
        }
    }
}
