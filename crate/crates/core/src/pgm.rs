//! Binary (P5) 8-bit PGM rasters.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM (expected magic 'P5')")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("only 8-bit PGM is supported (maxval {0})")]
    Unsupported(u32),
    #[error("PGM raster truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn decode(bytes: &[u8]) -> Result<Pgm, PgmError> {
    let mut pos = 0;
    let mut fields = [0u32; 3];
    if bytes.get(..2) != Some(b"P5") {
        return Err(PgmError::BadMagic);
    }
    pos += 2;
    for field in fields.iter_mut() {
        // whitespace and '#' comments may separate header fields
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or_default();
        *field = text.parse().map_err(|_| PgmError::Header(format!("bad number at byte {start}")))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::Header("missing separator after maxval".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::Unsupported(maxval));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(PgmError::Truncated { expected, found: raster.len() });
    }
    Ok(Pgm { width, height, data: raster[..expected].to_vec() })
}

pub fn encode(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    debug_assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<Pgm, PgmError> {
    decode(&std::fs::read(path)?)
}

pub fn write(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<(), PgmError> {
    std::fs::write(path, encode(width, height, data))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data: Vec<u8> = (0..12).map(|i| i * 20).collect();
        let pgm = decode(&encode(4, 3, &data)).unwrap();
        assert_eq!(pgm, Pgm { width: 4, height: 3, data });
    }

    #[test]
    fn comments_in_header() {
        let mut bytes = b"P5 # made by hand\n2 # width\n1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        assert_eq!(decode(&bytes).unwrap().data, vec![7, 9]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(PgmError::BadMagic)));
        assert!(matches!(decode(b"P5\n2 2\n255\n\x01"), Err(PgmError::Truncated { expected: 4, found: 1 })));
        assert!(matches!(decode(b"P5\n1 1\n65535\n\x00\x00"), Err(PgmError::Unsupported(65535))));
    }
}
