//! Resampling corruptions: elastic, shear/rotate and perspective.

use super::Image;
use crate::tensor::Rng;

/// Mirror an index into `[0, n)` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m >= n as isize { period - m } else { m }) as usize
}

/// Bilinear sample at fractional `(y, x)` with reflected borders. At integer
/// coordinates this returns the stored pixel exactly.
fn bilinear(img: &Image, y: f64, x: f64, c: usize) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (h, w) = (img.height(), img.width());
    let (iy, ix) = (y0 as isize, x0 as isize);
    let at = |dy: isize, dx: isize| img.get(reflect(iy + dy, h), reflect(ix + dx, w), c) as f64;
    let top = (1.0 - fx) * at(0, 0) + fx * at(0, 1);
    let bottom = (1.0 - fx) * at(1, 0) + fx * at(1, 1);
    (1.0 - fy) * top + fy * bottom
}

/// Resample every output pixel from `source(y, x)` in the input.
fn remap(img: &Image, source: impl Fn(usize, usize) -> (f64, f64)) -> Image {
    let mut out = img.blank_like();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (sy, sx) = source(y, x);
            for c in 0..img.channels() {
                out.set(y, x, c, bilinear(img, sy, sx, c) as f32);
            }
        }
    }
    out
}

fn gaussian_smooth(field: &mut [f64], h: usize, w: usize, sigma: f64) {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; field.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-r..=r)
                .zip(&kernel)
                .map(|(d, k)| k * field[y * w + clamp(x as isize + d, w)])
                .sum::<f64>()
                / norm;
        }
    }
    for y in 0..h {
        for x in 0..w {
            field[y * w + x] = (-r..=r)
                .zip(&kernel)
                .map(|(d, k)| k * tmp[clamp(y as isize + d, h) * w + x])
                .sum::<f64>()
                / norm;
        }
    }
}

pub(super) fn elastic(img: &Image, alpha: f64, sigma: f64, rng: &mut Rng) -> Image {
    let (h, w) = (img.height(), img.width());
    let mut dy: Vec<f64> = (0..h * w).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mut dx: Vec<f64> = (0..h * w).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    gaussian_smooth(&mut dy, h, w, sigma);
    gaussian_smooth(&mut dx, h, w, sigma);
    remap(img, |y, x| {
        let i = y * w + x;
        (y as f64 + alpha * dy[i], x as f64 + alpha * dx[i])
    })
}

pub(super) fn shear_rotate(img: &Image, shear_deg: f64, rotate_deg: f64) -> Image {
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let cx = (img.width() as f64 - 1.0) / 2.0;
    // Forward map in (x, y): rotation after an x-shear, about the centre.
    let t = shear_deg.to_radians().tan();
    let (s, c) = rotate_deg.to_radians().sin_cos();
    let m = [[c, c * t - s], [s, s * t + c]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    remap(img, |y, x| {
        let (px, py) = (x as f64 - cx, y as f64 - cy);
        let sx = inv[0][0] * px + inv[0][1] * py + cx;
        let sy = inv[1][0] * px + inv[1][1] * py + cy;
        (sy, sx)
    })
}

/// Projective map from the unit square onto a quadrilateral, with corners
/// `(0,0), (1,0), (1,1), (0,1)` sent to `quad[0..4]` in that order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
    g: f64,
    h: f64,
}

impl Homography {
    pub fn from_unit_square(quad: [(f64, f64); 4]) -> Self {
        let [(x0, y0), (x1, y1), (x2, y2), (x3, y3)] = quad;
        let sx = x0 - x1 + x2 - x3;
        let sy = y0 - y1 + y2 - y3;
        if sx == 0.0 && sy == 0.0 {
            return Homography {
                a: x1 - x0,
                b: x2 - x1,
                c: x0,
                d: y1 - y0,
                e: y2 - y1,
                f: y0,
                g: 0.0,
                h: 0.0,
            };
        }
        let (dx1, dx2, dy1, dy2) = (x1 - x2, x3 - x2, y1 - y2, y3 - y2);
        let den = dx1 * dy2 - dx2 * dy1;
        let g = (sx * dy2 - dx2 * sy) / den;
        let h = (dx1 * sy - sx * dy1) / den;
        Homography {
            a: x1 - x0 + g * x1,
            b: x3 - x0 + h * x3,
            c: x0,
            d: y1 - y0 + g * y1,
            e: y3 - y0 + h * y3,
            f: y0,
            g,
            h,
        }
    }

    pub fn map(&self, u: f64, v: f64) -> (f64, f64) {
        let z = self.g * u + self.h * v + 1.0;
        ((self.a * u + self.b * v + self.c) / z, (self.d * u + self.e * v + self.f) / z)
    }
}

pub(super) fn perspective(img: &Image, scale: f64, rng: &mut Rng) -> Image {
    let (h1, w1) = (img.height() as f64 - 1.0, img.width() as f64 - 1.0);
    let mut jitter = || (rng.normal().abs() * scale).min(0.45);
    let quad = [
        (jitter() * w1, jitter() * h1),
        (w1 - jitter() * w1, jitter() * h1),
        (w1 - jitter() * w1, h1 - jitter() * h1),
        (jitter() * w1, h1 - jitter() * h1),
    ];
    if h1 < 1.0 || w1 < 1.0 {
        return img.clone();
    }
    let hom = Homography::from_unit_square(quad);
    remap(img, |y, x| {
        let (sx, sy) = hom.map(x as f64 / w1, y as f64 / h1);
        (sy, sx)
    })
}
