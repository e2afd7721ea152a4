//! Flat weight vectors and their checkpoint encoding.
//!
//! Checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic     4 bytes  "FNNW"
//! version   u32      1
//! tensors   u32      number of layout entries
//! per entry u64 rows, u64 cols, u64 offset
//! count     u64      number of values
//! values    f64 × count
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{NnError, Result};

const MAGIC: &[u8; 4] = b"FNNW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorLayout {
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorLayout {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatWeights {
    pub values: Vec<f64>,
    pub layout: Vec<TensorLayout>,
}

impl FlatWeights {
    /// Checks that the layout tiles `values` contiguously and exactly.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for (i, t) in self.layout.iter().enumerate() {
            if t.offset != expected {
                return Err(NnError::Layout(format!(
                    "tensor {i} starts at {} instead of {expected}",
                    t.offset
                )));
            }
            expected += t.len();
        }
        if expected != self.values.len() {
            return Err(NnError::Layout(format!(
                "layout covers {expected} values but vector holds {}",
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &FlatWeights) -> bool {
        self.layout == other.layout && self.values.len() == other.values.len()
    }

    /// Concatenates several vectors, rebasing offsets.
    pub fn concat(parts: &[FlatWeights]) -> FlatWeights {
        let mut out = FlatWeights::default();
        for part in parts {
            let base = out.values.len();
            out.values.extend_from_slice(&part.values);
            out.layout.extend(part.layout.iter().map(|t| TensorLayout {
                offset: t.offset + base,
                ..*t
            }));
        }
        out
    }

    /// Inverse of [`FlatWeights::concat`]: splits by tensor counts.
    pub fn split(&self, tensor_counts: &[usize]) -> Result<Vec<FlatWeights>> {
        if tensor_counts.iter().sum::<usize>() != self.layout.len() {
            return Err(NnError::Layout(format!(
                "cannot split {} tensors into groups {tensor_counts:?}",
                self.layout.len()
            )));
        }
        self.validate()?;
        let mut parts = Vec::with_capacity(tensor_counts.len());
        let mut first = 0;
        for &count in tensor_counts {
            let tensors = &self.layout[first..first + count];
            let start = tensors.first().map_or(0, |t| t.offset);
            let end = tensors.last().map_or(start, |t| t.offset + t.len());
            parts.push(FlatWeights {
                values: self.values[start..end].to_vec(),
                layout: tensors
                    .iter()
                    .map(|t| TensorLayout {
                        offset: t.offset - start,
                        ..*t
                    })
                    .collect(),
            });
            first += count;
        }
        Ok(parts)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let tensors = u32::try_from(self.layout.len())
            .map_err(|_| NnError::Checkpoint("too many tensors".into()))?;
        w.write_all(&tensors.to_le_bytes())?;
        for t in &self.layout {
            w.write_all(&(t.rows as u64).to_le_bytes())?;
            w.write_all(&(t.cols as u64).to_le_bytes())?;
            w.write_all(&(t.offset as u64).to_le_bytes())?;
        }
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let tensors = read_u32(&mut r)? as usize;
        let mut layout = Vec::with_capacity(tensors.min(1 << 16));
        for _ in 0..tensors {
            layout.push(TensorLayout {
                rows: read_u64(&mut r)? as usize,
                cols: read_u64(&mut r)? as usize,
                offset: read_u64(&mut r)? as usize,
            });
        }
        let count = read_u64(&mut r)? as usize;
        let mut values = Vec::with_capacity(count.min(1 << 24));
        let mut buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        let flat = FlatWeights { values, layout };
        flat.validate()
            .map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Ok(flat)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + 24 * self.layout.len() + 8 * self.values.len());
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
