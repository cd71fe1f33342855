use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// A float image, pixels interleaved row-major as `(y, x, channel)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::ImageFormat(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} pixels", height * width * channels),
                found: format!("{}", data.len()),
            });
        }
        let mut img = Image {
            height,
            width,
            channels,
            data,
        };
        img.clamp();
        Ok(img)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub(crate) fn blank_like(&self) -> Self {
        Image {
            data: vec![0.0; self.data.len()],
            ..*self
        }
    }

    /// Clamp into `[0, 1]`; NaN becomes 0.
    pub(crate) fn clamp(&mut self) {
        for v in &mut self.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }

    /// `(1, channels, height, width)`.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_fn([1, self.channels, self.height, self.width], |[_, c, y, x]| {
            self.get(y, x, c)
        })
    }

    /// Item `b` of a `(B, C, H, W)` tensor, clamped.
    pub fn from_tensor(t: &Tensor<f32>, b: usize) -> Result<Self> {
        let [_, c, h, w] = t.dims();
        let mut data = Vec::with_capacity(c * h * w);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data.push(t.get([b, ch, y, x]));
                }
            }
        }
        Self::new(h, w, c, data)
    }

    /// Binary PGM (`P5`, one channel) or PPM (`P6`, three channels).
    pub fn write_pnm(&self, mut w: impl Write) -> Result<()> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        write!(w, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|&v| (v * 255.0).round() as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_pnm(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let magic = header_token(&mut r)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(Error::ImageFormat(format!("unsupported magic {other:?}"))),
        };
        let mut field = |name: &str| -> Result<usize> {
            let tok = header_token(&mut r)?;
            tok.parse()
                .map_err(|_| Error::ImageFormat(format!("bad {name} {tok:?}")))
        };
        let width = field("width")?;
        let height = field("height")?;
        let maxval = field("maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::ImageFormat(format!("maxval {maxval} not in 1..=255")));
        }
        let n = width * height * channels;
        let mut bytes = vec![0u8; n];
        let mut filled = 0;
        while filled < n {
            match r.read(&mut bytes[filled..])? {
                0 => break,
                k => filled += k,
            }
        }
        if filled < n {
            return Err(Error::Truncated {
                expected: n,
                found: filled,
            });
        }
        let scale = 1.0 / maxval as f32;
        Self::new(height, width, channels, bytes.iter().map(|&b| b as f32 * scale).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pnm(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_pnm(std::fs::File::open(path)?)
    }
}

// Whitespace-separated header token; `#` comments run to end of line. Consumes
// exactly one whitespace byte after the token, as the format requires before
// the raster.
fn header_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if tok.is_empty() {
                return Err(Error::ImageFormat("unexpected end of header".into()));
            }
            return Ok(tok);
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
        } else if b.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(b as char);
        }
    }
}
