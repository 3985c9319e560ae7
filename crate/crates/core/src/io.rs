//! CHQF binary field files.
//!
//! Layout: magic `CHQF`, `u8` version (1), `u8` d, `u64` n, `f64` L, then
//! `n^d` little-endian `(f64 re, f64 im)` pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::spectral::{Field, Grid, SpectralError};

pub const MAGIC: &[u8; 4] = b"CHQF";
pub const VERSION: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a CHQF file (magic {0:?})")]
    Magic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("file truncated: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid grid in header: {0}")]
    Grid(#[from] SpectralError),
}

pub fn write_field<W: Write>(mut w: W, field: &Field) -> Result<(), FieldIoError> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, g.d() as u8])?;
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field, FieldIoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldIoError::Magic(magic));
    }
    let mut small = [0u8; 2];
    r.read_exact(&mut small)?;
    if small[0] != VERSION {
        return Err(FieldIoError::UnsupportedVersion(small[0]));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    let grid = Grid::new(small[1] as usize, n, half_width)?;
    let mut bytes = Vec::with_capacity(grid.len() * 16);
    r.read_to_end(&mut bytes)?;
    if bytes.len() < grid.len() * 16 {
        return Err(FieldIoError::Truncated {
            expected: grid.len(),
            found: bytes.len() / 16,
        });
    }
    let values = bytes
        .chunks_exact(16)
        .take(grid.len())
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(Field::new(&grid, values)?)
}

pub fn save_field(path: impl AsRef<Path>, field: &Field) -> Result<(), FieldIoError> {
    write_field(BufWriter::new(File::create(path)?), field)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field, FieldIoError> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random_smooth_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Field {
        let g = Grid::new(3, 8, 2.5).unwrap();
        random_smooth_field(&g, &mut ChaCha8Rng::seed_from_u64(1), 0.7, true)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let f = sample();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 8 + 8 + 16 * 512);
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), f.grid());
        for (a, b) in f.values.iter().zip(&back.values) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn header_errors() {
        let f = sample();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_field(bad.as_slice()),
            Err(FieldIoError::Magic(_))
        ));
        let mut v2 = buf.clone();
        v2[4] = 2;
        let err = read_field(v2.as_slice()).unwrap_err();
        assert!(matches!(err, FieldIoError::UnsupportedVersion(2)));
        assert_eq!(err.to_string(), "unsupported version 2");
        buf.truncate(buf.len() - 20);
        assert!(matches!(
            read_field(buf.as_slice()),
            Err(FieldIoError::Truncated { expected: 512, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let f = sample();
        let path = std::env::temp_dir().join(format!("chqf-{}.bin", std::process::id()));
        save_field(&path, &f).unwrap();
        let back = load_field(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back, f);
    }
}
