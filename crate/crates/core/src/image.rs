//! RGB frames and the binary PNM formats used for every image artifact.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::{fs, io};

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

pub const GRAY: Rgb = [128, 128, 128];
pub const BLACK: Rgb = [0, 0, 0];

/// An 8-bit RGB image stored row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::format(
                "rgb frame",
                format!("{} bytes for {width}x{height}", data.len()),
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn ensure_same_dims(&self, other: &RgbFrame) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    pub fn write_ppm(&self, mut w: impl Write) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)
    }

    pub fn read_ppm(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let header = read_pnm_header(&mut r, "P6")?;
        if header.maxval != 255 {
            return Err(Error::format("ppm", format!("unsupported maxval {}", header.maxval)));
        }
        let mut data = vec![0u8; header.width * header.height * 3];
        r.read_exact(&mut data)?;
        Self::from_raw(header.width, header.height, data)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        self.write_ppm(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_ppm(fs::File::open(path)?)
    }
}

/// A single-channel image with up to 16-bit samples, as stored in PGM (P5).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl GrayImage {
    pub fn write_pgm(&self, mut w: impl Write) -> io::Result<()> {
        write!(w, "P5\n{} {}\n{}\n", self.width, self.height, self.maxval)?;
        if self.maxval < 256 {
            let bytes: Vec<u8> = self.data.iter().map(|&v| v as u8).collect();
            w.write_all(&bytes)
        } else {
            // 16-bit PGM samples are big-endian.
            let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_be_bytes()).collect();
            w.write_all(&bytes)
        }
    }

    pub fn read_pgm(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let header = read_pnm_header(&mut r, "P5")?;
        if header.maxval == 0 || header.maxval > 65535 {
            return Err(Error::format("pgm", format!("bad maxval {}", header.maxval)));
        }
        let n = header.width * header.height;
        let data = if header.maxval < 256 {
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf)?;
            buf.into_iter().map(u16::from).collect()
        } else {
            let mut buf = vec![0u8; n * 2];
            r.read_exact(&mut buf)?;
            buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        Ok(Self {
            width: header.width,
            height: header.height,
            maxval: header.maxval as u16,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        self.write_pgm(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_pgm(fs::File::open(path)?)
    }
}

struct PnmHeader {
    width: usize,
    height: usize,
    maxval: u32,
}

fn read_pnm_header(r: &mut impl BufRead, magic: &str) -> Result<PnmHeader> {
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        let mut tok = Vec::new();
        loop {
            let mut byte = [0u8; 1];
            if r.read(&mut byte)? == 0 {
                return Err(Error::format("pnm", "truncated header"));
            }
            match byte[0] {
                b'#' if tok.is_empty() => {
                    let mut skip = Vec::new();
                    r.read_until(b'\n', &mut skip)?;
                }
                b if b.is_ascii_whitespace() => {
                    if !tok.is_empty() {
                        break;
                    }
                }
                b => tok.push(b),
            }
        }
        tokens.push(String::from_utf8_lossy(&tok).into_owned());
    }
    if tokens[0] != magic {
        return Err(Error::format("pnm", format!("expected {magic}, found {}", tokens[0])));
    }
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| Error::format("pnm", format!("bad header field {s:?}")))
    };
    Ok(PnmHeader {
        width: num(&tokens[1])? as usize,
        height: num(&tokens[2])? as usize,
        maxval: num(&tokens[3])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip() {
        let f = RgbFrame::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 70, 9]);
        let mut buf = Vec::new();
        f.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n5 3\n255\n"));
        assert_eq!(RgbFrame::read_ppm(&buf[..]).unwrap(), f);
    }

    #[test]
    fn pgm_16bit_roundtrip() {
        let img = GrayImage {
            width: 3,
            height: 2,
            maxval: 1000,
            data: vec![0, 1, 999, 1000, 256, 7],
        };
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert_eq!(GrayImage::read_pgm(&buf[..]).unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let buf = b"P5\n# made by hand\n2 1\n255\n\x01\x02";
        let img = GrayImage::read_pgm(&buf[..]).unwrap();
        assert_eq!(img.data, vec![1, 2]);
    }

    #[test]
    fn wrong_magic_rejected() {
        let buf = b"P3\n1 1\n255\n0 0 0";
        assert!(RgbFrame::read_ppm(&buf[..]).is_err());
    }
}
