//! Self-describing parameter file shared by the policy network and the
//! response network.
//!
//! All integers and floats are little-endian:
//!
//! | field              | type           |
//! |--------------------|----------------|
//! | magic              | `b"RDRLPARM"`  |
//! | format version     | u32 (= 1)      |
//! | model kind         | u32 (1 policy, 2 response) |
//! | descriptor length  | u32 `n`        |
//! | descriptor         | `n` x u32      |
//! | parameter count    | u64 `p`        |
//! | parameters         | `p` x f64      |
//! | has training state | u8 (0 or 1)    |
//! | global version     | u64            |
//! | episodes completed | u64            |
//! | optimizer length   | u64 `m`        |
//! | optimizer state    | `m` x f64      |
//!
//! The last four fields are present only when the flag byte is 1.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RDRLPARM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum ModelKind {
    Policy = 1,
    Response = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    pub version: u64,
    pub episodes: u64,
    pub optimizer: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamFile {
    pub kind: ModelKind,
    pub descriptor: Vec<u32>,
    pub params: Vec<f64>,
    pub training: Option<TrainingState>,
}

impl ParamFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind as u32).to_le_bytes());
        out.extend_from_slice(&(self.descriptor.len() as u32).to_le_bytes());
        for d in &self.descriptor {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        match &self.training {
            None => out.push(0),
            Some(t) => {
                out.push(1);
                out.extend_from_slice(&t.version.to_le_bytes());
                out.extend_from_slice(&t.episodes.to_le_bytes());
                out.extend_from_slice(&(t.optimizer.len() as u64).to_le_bytes());
                for v in &t.optimizer {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let kind = match r.u32()? {
            1 => ModelKind::Policy,
            2 => ModelKind::Response,
            k => return Err(Error::Checkpoint(format!("unknown model kind {k}"))),
        };
        let n = r.u32()? as usize;
        let descriptor = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let p = r.u64()? as usize;
        let params = r.f64s(p)?;
        let training = match r.take(1)?[0] {
            0 => None,
            1 => {
                let version = r.u64()?;
                let episodes = r.u64()?;
                let m = r.u64()? as usize;
                Some(TrainingState {
                    version,
                    episodes,
                    optimizer: r.f64s(m)?,
                })
            }
            f => return Err(Error::Checkpoint(format!("bad training-state flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(ParamFile {
            kind,
            descriptor,
            params,
            training,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
