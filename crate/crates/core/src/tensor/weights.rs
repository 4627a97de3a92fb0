//! `DLRW` weight files: magic, u32 version, u32 tensor count, then per
//! tensor a u16-length UTF-8 name, u8 rank, u32 extents and f32 data. All
//! integers and floats little-endian.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::Tensor;

const MAGIC: &[u8; 4] = b"DLRW";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a weight file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed weight file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, tensor: Tensor) -> Self {
        Self { name: name.into(), tensor }
    }
}

pub fn encode_weights(tensors: &[NamedTensor]) -> Result<Vec<u8>, WeightFileError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for nt in tensors {
        let name = nt.name.as_bytes();
        let name_len = u16::try_from(name.len())
            .map_err(|_| WeightFileError::Malformed(format!("name too long: {}", nt.name)))?;
        let ndim = u8::try_from(nt.tensor.ndim())
            .map_err(|_| WeightFileError::Malformed(format!("rank too large: {}", nt.name)))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(ndim);
        for &e in nt.tensor.shape() {
            let e = u32::try_from(e).map_err(|_| WeightFileError::Malformed("extent exceeds u32".into()))?;
            out.extend_from_slice(&e.to_le_bytes());
        }
        for v in nt.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(WeightFileError::Truncated(self.buf.len()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, WeightFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_weights(buf: &[u8]) -> Result<Vec<NamedTensor>, WeightFileError> {
    let mut r = Reader { buf, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(WeightFileError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(WeightFileError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| WeightFileError::Malformed(format!("tensor name: {e}")))?
            .to_string();
        let ndim = r.take(1)?[0] as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| WeightFileError::Malformed(format!("{name}: shape overflow")))?;
        let bytes = r.take(len)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let tensor = Tensor::new(&shape, data).map_err(|e| WeightFileError::Malformed(format!("{name}: {e}")))?;
        out.push(NamedTensor { name, tensor });
    }
    if r.pos != buf.len() {
        return Err(WeightFileError::Malformed(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(out)
}

pub fn write_weight_file(path: impl AsRef<Path>, tensors: &[NamedTensor]) -> Result<(), WeightFileError> {
    fs::write(path, encode_weights(tensors)?)?;
    Ok(())
}

pub fn read_weight_file(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>, WeightFileError> {
    decode_weights(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<NamedTensor> {
        vec![
            NamedTensor::new("a", Tensor::new(&[2, 3], vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5, -7.25, 1e30]).unwrap()),
            NamedTensor::new("branch0.kernel", Tensor::new(&[1, 1, 2], vec![0.1, 0.2]).unwrap()),
        ]
    }

    #[test]
    fn header_layout() {
        let bytes = encode_weights(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"DLRW");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(bytes[12..14].try_into().unwrap()), 1);
        assert_eq!(bytes[14], b'a');
        assert_eq!(bytes[15], 2);
    }

    #[test]
    fn corrupt_magic_and_version_are_distinct() {
        let mut bytes = encode_weights(&sample()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_weights(&bad), Err(WeightFileError::BadMagic(_))));
        bytes[4] = 9;
        assert!(matches!(decode_weights(&bytes), Err(WeightFileError::UnsupportedVersion(9))));
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode_weights(&sample()).unwrap();
        for cut in [3, 11, 20, bytes.len() - 1] {
            assert!(matches!(decode_weights(&bytes[..cut]), Err(WeightFileError::Truncated(_))), "cut {cut}");
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u32>(), 1..64), name in "[a-z.0-9]{1,20}") {
            let data: Vec<f32> = bits.iter().map(|&b| f32::from_bits(b)).collect();
            let t = NamedTensor::new(name, Tensor::new(&[data.len()], data).unwrap());
            let back = decode_weights(&encode_weights(std::slice::from_ref(&t)).unwrap()).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0].name, &t.name);
            let a: Vec<u32> = back[0].tensor.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, bits);
        }
    }
}
