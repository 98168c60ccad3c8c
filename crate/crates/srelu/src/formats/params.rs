//! Model parameter files.
//!
//! Little-endian layout:
//!
//! ```text
//! "SRLU" | version u32 | arch name (u32 len, utf-8) | train slope f64 | tensor count u32
//! per tensor: name (u32 len, utf-8) | rank u32 | dims u32 × rank | f32 × product(dims)
//! ```

use std::path::Path;

use srelu_core::nn::{ArchId, ArchitectureSpec, Model, Param};
use srelu_core::Tensor;

use super::{read_file, write_file, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"SRLU";
pub const VERSION: u32 = 1;

pub fn encode(model: &Model<f32>) -> Result<Vec<u8>> {
    let id = model.spec().id;
    if id == ArchId::Custom {
        return Err(FormatError::Malformed { what: "params".into(), detail: "custom architectures cannot be saved".into() });
    }
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut out, id.name());
    out.extend_from_slice(&model.slope.train_slope.to_le_bytes());
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        put_str(&mut out, &p.name);
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(FormatError::Truncated {
            what: "params".into(),
            expected: self.pos.saturating_add(n),
            found: self.bytes.len(),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| FormatError::Malformed { what: "params".into(), detail: e.to_string() })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic {
            what: "params".into(),
            found: u32::from_be_bytes(magic.try_into().expect("4 bytes")),
            expected: u32::from_be_bytes(MAGIC),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::Version { what: "params".into(), found: version });
    }
    let arch: ArchId = r.string()?.parse()?;
    let train_slope = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(FormatError::Malformed {
            what: "params".into(),
            detail: format!("{name} shape {shape:?} overflows"),
        })?;
        let raw = r.take(len.checked_mul(4).unwrap_or(usize::MAX))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        params.push(Param { name, value: Tensor::new(shape, data)? });
    }
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes { what: "params".into(), extra: bytes.len() - r.pos });
    }
    let mut model = Model::from_params(ArchitectureSpec::from_id(arch)?, params)?;
    model.slope.train_slope = train_slope;
    Ok(model)
}

pub fn save(path: &Path, model: &Model<f32>) -> Result<()> {
    write_file(path, &encode(model)?)
}

pub fn load(path: &Path) -> Result<Model<f32>> {
    decode(&read_file(path)?)
}
