//! Synthetic word images from 5x7 bitmap glyphs.

use crate::corruptions::Image;
use crate::tensor::{Rng, Tensor};
use crate::{Error, Result};

pub const ALPHABET: &str = "0123456789ABCDEF";
pub const IMAGE_HEIGHT: usize = 32;
pub const IMAGE_WIDTH: usize = 64;
pub const MAX_LABEL_LEN: usize = 4;

const SCALE: usize = 2;
const GLYPH_W: usize = 5 * SCALE;
const GLYPH_H: usize = 7 * SCALE;

// Rows top to bottom, bit 4 is the leftmost column.
#[rustfmt::skip]
const GLYPHS: [[u8; 7]; 16] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E], // 0
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E], // 1
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F], // 2
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E], // 3
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02], // 4
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E], // 5
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E], // 6
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08], // 7
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E], // 8
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C], // 9
    [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], // A
    [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E], // B
    [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E], // C
    [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C], // D
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F], // E
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10], // F
];

/// Number of CTC classes: the alphabet plus the blank at index 0.
pub fn num_classes() -> usize {
    ALPHABET.len() + 1
}

/// Class indices (1-based, 0 is the blank) for a label; case-insensitive.
pub fn encode(label: &str) -> Result<Vec<usize>> {
    label
        .chars()
        .map(|ch| {
            ALPHABET
                .find(ch.to_ascii_uppercase())
                .map(|i| i + 1)
                .ok_or_else(|| Error::InvalidArgument(format!("character {ch:?} not in alphabet")))
        })
        .collect()
}

pub fn decode(classes: &[usize]) -> String {
    classes
        .iter()
        .filter_map(|&c| ALPHABET.as_bytes().get(c.wrapping_sub(1)).map(|&b| b as char))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub image: Image,
    pub label: String,
}

/// Rendering knobs; the defaults are what training and evaluation use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderStyle {
    /// Probability of a one-pixel horizontal stroke dilation.
    pub bold_prob: f64,
    pub max_gap: usize,
    pub speckle_prob: f64,
    pub noise_std: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            bold_prob: 0.5,
            max_gap: 4,
            speckle_prob: 0.01,
            noise_std: 0.03,
        }
    }
}

pub fn random_label(rng: &mut Rng) -> String {
    let len = 1 + rng.below(MAX_LABEL_LEN);
    (0..len)
        .map(|_| ALPHABET.as_bytes()[rng.below(ALPHABET.len())] as char)
        .collect()
}

/// Render `label` with seeded jitter in position, spacing, stroke width,
/// contrast and background speckle.
pub fn render(label: &str, style: &RenderStyle, rng: &mut Rng) -> Result<SyntheticSample> {
    let classes = encode(label)?;
    let n = classes.len();
    if n == 0 || n > MAX_LABEL_LEN {
        return Err(Error::InvalidArgument(format!(
            "label length must be 1..={MAX_LABEL_LEN}, got {n}"
        )));
    }
    let bg = rng.uniform_range(0.0, 0.3);
    let fg = rng.uniform_range(0.65, 1.0);
    let bold = rng.bernoulli(style.bold_prob);
    let gaps: Vec<usize> = (0..n.saturating_sub(1)).map(|_| 1 + rng.below(style.max_gap)).collect();
    let total = n * GLYPH_W + gaps.iter().sum::<usize>() + bold as usize;
    let x0 = rng.below(IMAGE_WIDTH - total + 1);
    let y0 = 4 + rng.below(IMAGE_HEIGHT - GLYPH_H - 8 + 1);

    let mut ink = vec![false; IMAGE_HEIGHT * IMAGE_WIDTH];
    let mut x = x0;
    for (i, &c) in classes.iter().enumerate() {
        let y = (y0 as isize + rng.below(3) as isize - 1) as usize;
        for (r, bits) in GLYPHS[c - 1].iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) == 0 {
                    continue;
                }
                for dy in 0..SCALE {
                    for dx in 0..SCALE + bold as usize {
                        ink[(y + r * SCALE + dy) * IMAGE_WIDTH + x + col * SCALE + dx] = true;
                    }
                }
            }
        }
        x += GLYPH_W + gaps.get(i).copied().unwrap_or(0);
    }

    let data = ink
        .iter()
        .map(|&on| {
            let base = if rng.bernoulli(style.speckle_prob) {
                rng.uniform()
            } else if on {
                fg
            } else {
                bg
            };
            (base + style.noise_std * rng.normal()) as f32
        })
        .collect();
    Ok(SyntheticSample {
        image: Image::new(IMAGE_HEIGHT, IMAGE_WIDTH, 1, data)?,
        label: label.to_string(),
    })
}

pub fn sample(style: &RenderStyle, rng: &mut Rng) -> SyntheticSample {
    let label = random_label(rng);
    render(&label, style, rng).expect("random labels are renderable")
}

/// Stack single-channel images into `(B, 1, H, W)`.
pub fn batch_tensor(images: &[&Image]) -> Result<Tensor<f32>> {
    let mut data = Vec::with_capacity(images.len() * IMAGE_HEIGHT * IMAGE_WIDTH);
    for img in images {
        if (img.height(), img.width(), img.channels()) != (IMAGE_HEIGHT, IMAGE_WIDTH, 1) {
            return Err(Error::ShapeMismatch {
                expected: format!("{IMAGE_HEIGHT}x{IMAGE_WIDTH}x1"),
                found: format!("{}x{}x{}", img.height(), img.width(), img.channels()),
            });
        }
        data.extend_from_slice(img.data());
    }
    Tensor::from_vec([images.len(), 1, IMAGE_HEIGHT, IMAGE_WIDTH], data)
}

/// Horizontally rescale the content by `factor` about the left edge
/// (nearest neighbour), filling uncovered columns with the edge column.
pub fn resize_width(img: &Image, factor: f64) -> Image {
    let (h, w) = (img.height(), img.width());
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let sx = ((x as f64 / factor).floor() as usize).min(w - 1);
            data.push(img.get(y, sx, 0));
        }
    }
    Image::new(h, w, 1, data).expect("same dims")
}
