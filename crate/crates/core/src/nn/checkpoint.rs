//! Named-tensor container.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "EQSWCKPT"
//! version  u32      1
//! count    u32      number of tensors
//! repeated count times:
//!   name_len u32, name  UTF-8 bytes
//!   dtype    u8       0 = f64, 1 = f32
//!   ndim     u32, dims  u64 × ndim
//!   data     product(dims) values of dtype
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::{ParamStore, Tensor};
use super::{NnError, Result};

const MAGIC: &[u8; 8] = b"EQSWCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F64,
    F32,
}

impl DType {
    fn tag(self) -> u8 {
        match self {
            DType::F64 => 0,
            DType::F32 => 1,
        }
    }
}

pub fn write_checkpoint<W: Write>(w: &mut W, store: &ParamStore, dtype: DType) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, t) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[dtype.tag()])?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in t.data() {
            match dtype {
                DType::F64 => w.write_all(&v.to_le_bytes())?,
                DType::F32 => w.write_all(&(v as f32).to_le_bytes())?,
            }
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| NnError::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<ParamStore> {
    if &read_array::<8, _>(r)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| NnError::Checkpoint(format!("truncated file: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
        let dtype = match read_array::<1, _>(r)?[0] {
            0 => DType::F64,
            1 => DType::F32,
            t => return Err(NnError::Checkpoint(format!("unknown dtype tag {t} in `{name}`"))),
        };
        let ndim = read_u32(r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_array::<8, _>(r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| match dtype {
                DType::F64 => read_array::<8, _>(r).map(f64::from_le_bytes),
                DType::F32 => read_array::<4, _>(r).map(|b| f32::from_le_bytes(b) as f64),
            })
            .collect::<Result<Vec<_>>>()?;
        if store.id(&name).is_some() {
            return Err(NnError::Checkpoint(format!("duplicate tensor `{name}`")));
        }
        store.add(name, Tensor::new(shape, data)?);
    }
    Ok(store)
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, dtype: DType) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, store, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a.weight", Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.1, 1e-300, -0.0]).unwrap());
        s.add("log_std", Tensor::new(vec![4], vec![0.5f64.ln(); 4]).unwrap());
        s
    }

    #[test]
    fn f64_round_trip_is_exact() {
        let s = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &s, DType::F64).unwrap();
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn layout_header() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample(), DType::F32).unwrap();
        assert_eq!(&buf[..8], b"EQSWCKPT");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        // 16 header + (4+8 name, 1, 4, 16 dims, 24 data) + (4+7, 1, 4, 8, 16)
        assert_eq!(buf.len(), 16 + 57 + 40);
    }

    #[test]
    fn truncated_and_corrupt_inputs_are_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample(), DType::F64).unwrap();
        assert!(read_checkpoint(&mut &buf[..buf.len() - 3]).is_err());
        buf[0] = b'X';
        assert!(matches!(read_checkpoint(&mut buf.as_slice()), Err(NnError::Checkpoint(_))));
    }
}
