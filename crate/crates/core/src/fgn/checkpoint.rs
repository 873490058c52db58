//! Binary sub-model checkpoints.
//!
//! Layout: `FGN1`, dims `(F', C, H, K)` as `u32` LE, parameter groups
//! `W1, W2, W_out, b_out, w_i, w_j, q` as `f64` LE, then `trained_on` as a
//! `u64` LE count followed by sorted `u64` LE ids. The seed is not stored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fgn::model::{Dims, Params, SubModel};

pub const MAGIC: &[u8; 4] = b"FGN1";

pub fn to_bytes(m: &SubModel) -> Vec<u8> {
    let d = m.dims;
    let mut out = Vec::with_capacity(64 + 8 * (d.readout() * d.classes + m.trained_on.len()));
    out.extend_from_slice(MAGIC);
    for v in [d.feat, d.channels, d.hidden, d.classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for g in m.params.groups() {
        for x in g {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.extend_from_slice(&(m.trained_on.len() as u64).to_le_bytes());
    for id in &m.trained_on {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8], seed: u64) -> Result<SubModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let dims = Dims {
        feat: r.u32()? as usize,
        channels: r.u32()? as usize,
        hidden: r.u32()? as usize,
        classes: r.u32()? as usize,
    };
    if dims.feat == 0 || dims.channels == 0 || dims.hidden == 0 || dims.classes == 0 {
        return Err(Error::Checkpoint(format!("degenerate dims {dims:?}")));
    }
    let mut params = Params::zeros(&dims);
    for g in params.groups_mut() {
        for x in g.iter_mut() {
            *x = r.f64()?;
        }
    }
    let n = r.u64()? as usize;
    let mut trained_on = std::collections::BTreeSet::new();
    let mut prev = None;
    for _ in 0..n {
        let id = r.u64()?;
        if prev.is_some_and(|p| p >= id) {
            return Err(Error::Checkpoint("trained_on is not strictly ascending".into()));
        }
        prev = Some(id);
        trained_on.insert(id);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(SubModel {
        dims,
        params,
        seed,
        trained_on,
    })
}

pub fn save(m: &SubModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(m))?;
    Ok(())
}

pub fn load(path: &Path, seed: u64) -> Result<SubModel> {
    from_bytes(&std::fs::read(path)?, seed)
}
