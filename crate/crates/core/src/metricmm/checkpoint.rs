//! Checkpoint container: string metadata, named networks and named vectors.
//!
//! ```text
//! magic     4 bytes  "MMCK"
//! version   u32      1
//! n_meta    u32      then n_meta × (string key, string value)
//! n_nets    u32      then n_nets × (string name, MLP1 snapshot)
//! n_vecs    u32      then n_vecs × (string name, u64 len, f64 × len)
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8. Integers and floats are
//! little-endian. Entries keep insertion order so files are reproducible.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::diffcore::{read_snapshot, write_snapshot, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MMCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub nets: Vec<(String, Mlp)>,
    pub vectors: Vec<(String, Vec<f64>)>,
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("string of {len} bytes in checkpoint")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("checkpoint string: {e}")))
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parses a required metadata entry.
    pub fn meta_parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta(key)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks metadata `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Format(format!("checkpoint metadata `{key}` = {raw:?} is malformed")))
    }

    /// Parses a comma-separated metadata list.
    pub fn meta_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self
            .meta(key)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks metadata `{key}`")))?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    Error::Format(format!("checkpoint metadata `{key}` entry {s:?} is malformed"))
                })
            })
            .collect()
    }

    pub fn push_net(&mut self, name: impl Into<String>, net: &Mlp) {
        self.nets.push((name.into(), net.clone()));
    }

    pub fn net(&self, name: &str) -> Result<&Mlp> {
        self.nets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks network `{name}`")))
    }

    pub fn push_vector(&mut self, name: impl Into<String>, v: &[f64]) {
        self.vectors.push((name.into(), v.to_vec()));
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        self.vectors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Format(format!("checkpoint lacks vector `{name}`")))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        w.write_all(&(self.nets.len() as u32).to_le_bytes())?;
        for (name, net) in &self.nets {
            write_str(w, name)?;
            write_snapshot(net, w)?;
        }
        w.write_all(&(self.vectors.len() as u32).to_le_bytes())?;
        for (name, v) in &self.vectors {
            write_str(w, name)?;
            w.write_all(&(v.len() as u64).to_le_bytes())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("not a checkpoint (magic {magic:?})")));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut ck = Checkpoint::new();
        for _ in 0..read_u32(r)? {
            let k = read_str(r)?;
            let v = read_str(r)?;
            ck.meta.push((k, v));
        }
        for _ in 0..read_u32(r)? {
            let name = read_str(r)?;
            ck.nets.push((name, read_snapshot(r)?));
        }
        for _ in 0..read_u32(r)? {
            let name = read_str(r)?;
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            let len = u64::from_le_bytes(b) as usize;
            if len > 1 << 28 {
                return Err(Error::Format(format!("vector `{name}` claims {len} entries")));
            }
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                r.read_exact(&mut b)?;
                v.push(f64::from_le_bytes(b));
            }
            ck.vectors.push((name, v));
        }
        Ok(ck)
    }

    /// Writes to a sibling temporary file and renames it into place, so a
    /// crash never leaves a truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

/// Writes `contents` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
