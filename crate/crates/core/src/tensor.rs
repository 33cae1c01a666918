//! Dense row-major tensors and the `SPECTNSR` binary format.
//!
//! Format: 8 magic bytes `SPECTNSR`, `u32` LE rank, `rank` × `u64` LE
//! dimensions, then the row-major payload as `f32` LE. Several records may be
//! concatenated in one file.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result, Scalar};

pub const MAGIC: &[u8; 8] = b"SPECTNSR";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    /// Panics if `data.len()` does not match `shape`.
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Self {
        Self::new(shape, data).expect("tensor shape/data mismatch")
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Self {
        Self::from_vec(shape.to_vec(), data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Size of the last axis (1 for scalars).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data.clone())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &d in &self.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(4 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads one record; `Ok(None)` at a clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Self>> {
        let mut magic = [0u8; 8];
        let got = read_up_to(r, &mut magic)?;
        if got == 0 {
            return Ok(None);
        }
        if got < 8 || &magic != MAGIC {
            return Err(Error::Format("bad magic, expected SPECTNSR".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(truncated)?;
        let rank = u32::from_le_bytes(b4) as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut b8 = [0u8; 8];
        for _ in 0..rank {
            r.read_exact(&mut b8).map_err(truncated)?;
            shape.push(u64::from_le_bytes(b8) as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("shape {shape:?} overflows")))?;
        let mut payload = vec![0u8; n.checked_mul(4).ok_or_else(|| Error::Format("payload overflows".into()))?];
        r.read_exact(&mut payload).map_err(truncated)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        Ok(Some(Tensor { shape, data }))
    }
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated record".into())
    } else {
        Error::Io(e)
    }
}

pub fn save_tensors<T: Scalar>(path: &Path, tensors: &[Tensor<T>]) -> Result<()> {
    let mut buf = Vec::new();
    for t in tensors {
        t.write_to(&mut buf)?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_tensors<T: Scalar>(path: &Path) -> Result<Vec<Tensor<T>>> {
    let bytes = std::fs::read(path)?;
    let mut cursor = bytes.as_slice();
    let mut out = Vec::new();
    while let Some(t) = Tensor::read_from(&mut cursor)? {
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::<f32>::from_vec(vec![2, 1], vec![1.0, -2.5]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"SPECTNSR");
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..20], &2u64.to_le_bytes());
        assert_eq!(&buf[20..28], &1u64.to_le_bytes());
        assert_eq!(&buf[28..32], &1.0f32.to_le_bytes());
        assert_eq!(&buf[32..36], &(-2.5f32).to_le_bytes());
        assert_eq!(buf.len(), 36);
    }

    #[test]
    fn concatenated_records() {
        let a = Tensor::<f32>::from_vec(vec![3], vec![1.0, 2.0, 3.0]);
        let b = Tensor::<f32>::scalar(4.0);
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        b.write_to(&mut buf).unwrap();
        let mut cur = buf.as_slice();
        assert_eq!(Tensor::<f32>::read_from(&mut cur).unwrap(), Some(a));
        assert_eq!(Tensor::<f32>::read_from(&mut cur).unwrap(), Some(b));
        assert_eq!(Tensor::<f32>::read_from(&mut cur).unwrap(), None);
    }

    #[test]
    fn corrupt_inputs() {
        assert!(Tensor::<f32>::read_from(&mut &b"NOTATNSR\0\0\0\0"[..]).is_err());
        let t = Tensor::<f32>::from_vec(vec![4], vec![0.0; 4]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(Tensor::<f32>::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn shape_mismatch() {
        assert!(Tensor::<f64>::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
