//! Binary PGM (P5) / PPM (P6) input with maxval 255.

use crate::error::{Error, Result};
use crate::wavelet::{rct_forward, PixelTriple};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    /// Interleaved samples, row-major.
    pub data: Vec<u8>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            if self.pos >= self.bytes.len() {
                return Err(Error::Truncated {
                    offset: self.pos,
                    expected: format!("header {what}"),
                });
            }
            return Err(Error::Format(format!("expected {what} at byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{what} out of range at byte {start}")))
    }
}

impl PnmImage {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 {
            return Err(Error::Truncated {
                offset: bytes.len(),
                expected: "magic number".into(),
            });
        }
        let channels = match &bytes[..2] {
            b"P5" => 1,
            b"P6" => 3,
            m => {
                return Err(Error::Format(format!(
                    "unsupported magic {:?}, expected P5 or P6",
                    String::from_utf8_lossy(m)
                )))
            }
        };
        let mut h = Header { bytes, pos: 2 };
        let width = h.number("width")?;
        let height = h.number("height")?;
        let maxval = h.number("maxval")?;
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported maxval {maxval}, only 255 is accepted")));
        }
        match bytes.get(h.pos) {
            Some(c) if c.is_ascii_whitespace() => h.pos += 1,
            Some(_) => return Err(Error::Format(format!("missing whitespace after maxval at byte {}", h.pos))),
            None => {
                return Err(Error::Truncated {
                    offset: h.pos,
                    expected: "whitespace after maxval".into(),
                })
            }
        }
        let need = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Format(format!("image size {width}x{height} overflows")))?;
        let body = &bytes[h.pos..];
        if body.len() < need {
            return Err(Error::Truncated {
                offset: bytes.len(),
                expected: format!("{need} sample bytes starting at byte {}", h.pos),
            });
        }
        Ok(PnmImage {
            width,
            height,
            channels,
            data: body[..need].to_vec(),
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::checked(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::checked(width, height, 3, data)
    }

    fn checked(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::LengthMismatch {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        Ok(PnmImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    /// Component planes: `[Y]` for grayscale, `[Y, Cb, Cr]` through the
    /// reversible colour transform for RGB.
    pub fn to_planes(&self) -> Vec<Vec<i32>> {
        if self.channels == 1 {
            return vec![self.data.iter().map(|&v| v as i32).collect()];
        }
        let n = self.width * self.height;
        let mut planes = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for px in self.data.chunks_exact(3) {
            let (y, cb, cr) = rct_forward(PixelTriple::new(px[0] as u16, px[1] as u16, px[2] as u16));
            planes[0].push(y);
            planes[1].push(cb);
            planes[2].push(cr);
        }
        planes
    }
}
