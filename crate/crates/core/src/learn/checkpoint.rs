//! Binary parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes   "AOIPARM1"
//! tensors u32       number of shape entries
//! per entry: rank u32, then rank x u64 dimensions
//! values  f64 x sum(product of dims)
//! ```

use std::io::{Read, Write};

use super::nn::ParamSet;
use super::LearnError;

pub const MAGIC: &[u8; 8] = b"AOIPARM1";

pub fn write_params<W: Write>(mut out: W, p: &ParamSet) -> Result<(), LearnError> {
    out.write_all(MAGIC)?;
    out.write_all(&(p.shapes.len() as u32).to_le_bytes())?;
    for s in &p.shapes {
        out.write_all(&(s.len() as u32).to_le_bytes())?;
        for &d in s {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for v in &p.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, LearnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, LearnError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_params<R: Read>(mut r: R) -> Result<ParamSet, LearnError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LearnError::Checkpoint("bad magic".into()));
    }
    let n = read_u32(&mut r)? as usize;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = read_u32(&mut r)? as usize;
        let dims = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        shapes.push(dims);
    }
    let count: usize = shapes.iter().map(|s: &Vec<usize>| s.iter().product::<usize>()).sum();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        values.push(f64::from_le_bytes(b));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(LearnError::Checkpoint("trailing bytes".into()));
    }
    Ok(ParamSet { shapes, values })
}
