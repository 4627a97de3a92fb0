use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::Matrix;

const MAGIC: &[u8; 4] = b"FEAT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported FEAT version {0}")]
    UnsupportedVersion(u32),
    #[error("expected {expected} bytes, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("zero-sized matrix")]
    Empty,
}

pub fn encode_feat(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feat(bytes: &[u8]) -> Result<Matrix, FeatFileError> {
    if bytes.len() < 16 {
        return Err(FeatFileError::WrongLength { expected: 16, found: bytes.len() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(FeatFileError::BadMagic(magic));
    }
    if word(4) != VERSION {
        return Err(FeatFileError::UnsupportedVersion(word(4)));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let expected = 16 + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(FeatFileError::WrongLength { expected, found: bytes.len() });
    }
    let data = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Matrix::new(rows, cols, data).map_err(|_| FeatFileError::Empty)
}

pub fn write_feat(path: impl AsRef<Path>, m: &Matrix) -> Result<(), FeatFileError> {
    std::fs::write(path, encode_feat(m))?;
    Ok(())
}

pub fn read_feat(path: impl AsRef<Path>) -> Result<Matrix, FeatFileError> {
    decode_feat(&std::fs::read(path)?)
}

/// One line per row, comma-separated, shortest round-trip float formatting.
pub fn write_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<(), FeatFileError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
