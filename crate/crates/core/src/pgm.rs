//! Binary portable graymap (P5) rasters.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed graymap: {0}")]
    Malformed(&'static str),
}

/// 8-bit grayscale raster, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: u8) {
        self.data[row * self.width + col] = v;
    }

    pub fn to_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_p5<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&self.to_p5())
    }

    pub fn read_p5<R: Read>(mut r: R) -> Result<Self, PgmError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_p5(&buf)
    }

    pub fn from_p5(buf: &[u8]) -> Result<Self, PgmError> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < buf.len() && buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < buf.len() && buf[pos] == b'#' {
                while pos < buf.len() && buf[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PgmError::Malformed("truncated header"));
            }
            fields.push(std::str::from_utf8(&buf[start..pos]).map_err(|_| PgmError::Malformed("header"))?);
        }
        if fields[0] != "P5" {
            return Err(PgmError::Malformed("not P5"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| PgmError::Malformed("header number"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(PgmError::Malformed("only maxval 255 supported"));
        }
        pos += 1;
        let data = buf.get(pos..pos + width * height).ok_or(PgmError::Malformed("truncated data"))?;
        Ok(Self { width, height, data: data.to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_round_trip() {
        let mut img = GrayImage::filled(3, 2, 255);
        img.set(1, 1, 7);
        let bytes = img.to_p5();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(GrayImage::from_p5(&bytes).unwrap(), img);
        assert!(GrayImage::from_p5(&bytes[..bytes.len() - 1]).is_err());
    }
}
