//! Seeded image corruptions for robustness evaluation.
//!
//! Each kind is specified mathematically with parameter ranges; values are
//! drawn uniformly from their range on every call. Outputs are clamped to
//! `[0, 1]` and keep the input's dims.

mod geometry;
mod image;

use std::fmt;
use std::str::FromStr;

pub use geometry::Homography;
pub use image::Image;

use crate::tensor::Rng;
use crate::{Error, Result};

/// Closed interval sampled uniformly; `lo == hi` is a fixed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.uniform_range(self.lo, self.hi)
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{name} range {self:?} is not ordered")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Clean,
    LocalMasking,
    PixelWise,
    Geometric,
}

impl Category {
    pub fn name(&self) -> &'static str {
        match self {
            Category::Clean => "clean",
            Category::LocalMasking => "local_masking",
            Category::PixelWise => "pixel_wise",
            Category::Geometric => "geometric",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionKind {
    None,
    CoarseDropout,
    Cutout,
    AdditiveGaussianNoise,
    ElasticTransform,
    MotionBlur,
    ShearRotate,
    Perspective,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 8] = [
        CorruptionKind::None,
        CorruptionKind::CoarseDropout,
        CorruptionKind::Cutout,
        CorruptionKind::AdditiveGaussianNoise,
        CorruptionKind::ElasticTransform,
        CorruptionKind::MotionBlur,
        CorruptionKind::ShearRotate,
        CorruptionKind::Perspective,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CorruptionKind::None => "none",
            CorruptionKind::CoarseDropout => "dropout",
            CorruptionKind::Cutout => "cutout",
            CorruptionKind::AdditiveGaussianNoise => "noise",
            CorruptionKind::ElasticTransform => "elastic",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ShearRotate => "shear_rotate",
            CorruptionKind::Perspective => "perspective",
        }
    }

    pub fn category(&self) -> Category {
        match self {
            CorruptionKind::None => Category::Clean,
            CorruptionKind::CoarseDropout | CorruptionKind::Cutout => Category::LocalMasking,
            CorruptionKind::AdditiveGaussianNoise
            | CorruptionKind::ElasticTransform
            | CorruptionKind::MotionBlur => Category::PixelWise,
            CorruptionKind::ShearRotate | CorruptionKind::Perspective => Category::Geometric,
        }
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match s.as_str() {
            "coarse_dropout" => "dropout",
            "gaussian_noise" | "additive_gaussian_noise" => "noise",
            "elastic_transform" => "elastic",
            "blur" => "motion_blur",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown corruption {s:?}")))
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A corruption with its parameter ranges.
#[derive(Clone, Debug, PartialEq)]
pub enum CorruptionSpec {
    None,
    /// Drop a fraction `p` of cells of a coarse grid whose cell side is
    /// `size_percent` of the image side; dropped pixels become 0.
    CoarseDropout { p: Range, size_percent: Range },
    /// `iterations` rectangles of `size` times the image sides, filled.
    Cutout { iterations: usize, size: f64, fill: f32 },
    /// Per-pixel `N(0, scale^2)` on the `[0, 1]` intensity scale.
    AdditiveGaussianNoise { scale: Range },
    /// Uniform `[-1, 1]` displacement fields, Gaussian-smoothed with `sigma`
    /// and scaled by `alpha` pixels; bilinear resampling.
    ElasticTransform { alpha: Range, sigma: f64 },
    /// A normalized length-`k` line kernel at an angle (degrees) picked from
    /// `angles`.
    MotionBlur { k: usize, angles: Vec<f64> },
    /// Shear then rotation about the centre (degrees), reflected borders.
    ShearRotate { shear: Range, rotate: Range },
    /// Corners jittered inward by `|N(0, scale^2)|` of the image sides, the
    /// resulting quad warped back onto the full frame.
    Perspective { scale: Range },
}

impl CorruptionSpec {
    pub fn default_for(kind: CorruptionKind) -> Self {
        match kind {
            CorruptionKind::None => CorruptionSpec::None,
            CorruptionKind::CoarseDropout => CorruptionSpec::CoarseDropout {
                p: Range::new(0.0, 0.05),
                size_percent: Range::new(0.02, 0.25),
            },
            CorruptionKind::Cutout => CorruptionSpec::Cutout {
                iterations: 4,
                size: 0.2,
                fill: 0.5,
            },
            CorruptionKind::AdditiveGaussianNoise => CorruptionSpec::AdditiveGaussianNoise {
                scale: Range::new(0.0, 0.2),
            },
            CorruptionKind::ElasticTransform => CorruptionSpec::ElasticTransform {
                alpha: Range::new(0.0, 5.0),
                sigma: 0.5,
            },
            CorruptionKind::MotionBlur => CorruptionSpec::MotionBlur {
                k: 15,
                angles: vec![-45.0, 45.0],
            },
            CorruptionKind::ShearRotate => CorruptionSpec::ShearRotate {
                shear: Range::new(-10.0, 10.0),
                rotate: Range::new(-10.0, 10.0),
            },
            CorruptionKind::Perspective => CorruptionSpec::Perspective {
                scale: Range::new(0.05, 0.2),
            },
        }
    }

    pub fn kind(&self) -> CorruptionKind {
        match self {
            CorruptionSpec::None => CorruptionKind::None,
            CorruptionSpec::CoarseDropout { .. } => CorruptionKind::CoarseDropout,
            CorruptionSpec::Cutout { .. } => CorruptionKind::Cutout,
            CorruptionSpec::AdditiveGaussianNoise { .. } => CorruptionKind::AdditiveGaussianNoise,
            CorruptionSpec::ElasticTransform { .. } => CorruptionKind::ElasticTransform,
            CorruptionSpec::MotionBlur { .. } => CorruptionKind::MotionBlur,
            CorruptionSpec::ShearRotate { .. } => CorruptionKind::ShearRotate,
            CorruptionSpec::Perspective { .. } => CorruptionKind::Perspective,
        }
    }

    pub fn category(&self) -> Category {
        self.kind().category()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CorruptionSpec::None => Ok(()),
            CorruptionSpec::CoarseDropout { p, size_percent } => {
                p.validate("p")?;
                size_percent.validate("size_percent")?;
                if p.lo < 0.0 || p.hi > 1.0 || size_percent.lo <= 0.0 || size_percent.hi > 1.0 {
                    return Err(Error::InvalidArgument("dropout ranges out of bounds".into()));
                }
                Ok(())
            }
            CorruptionSpec::Cutout { size, fill, .. } => {
                if !(*size > 0.0 && *size <= 1.0) || !(0.0..=1.0).contains(fill) {
                    return Err(Error::InvalidArgument("cutout size/fill out of bounds".into()));
                }
                Ok(())
            }
            CorruptionSpec::AdditiveGaussianNoise { scale } => {
                scale.validate("scale")?;
                if scale.lo < 0.0 {
                    return Err(Error::InvalidArgument("noise scale must be nonnegative".into()));
                }
                Ok(())
            }
            CorruptionSpec::ElasticTransform { alpha, sigma } => {
                alpha.validate("alpha")?;
                if !(*sigma > 0.0) {
                    return Err(Error::InvalidArgument("elastic sigma must be positive".into()));
                }
                Ok(())
            }
            CorruptionSpec::MotionBlur { k, angles } => {
                if *k < 3 || angles.is_empty() {
                    return Err(Error::InvalidArgument(
                        "motion blur needs k >= 3 and at least one angle".into(),
                    ));
                }
                Ok(())
            }
            CorruptionSpec::ShearRotate { shear, rotate } => {
                shear.validate("shear")?;
                rotate.validate("rotate")?;
                if shear.lo <= -90.0 || shear.hi >= 90.0 {
                    return Err(Error::InvalidArgument("shear must lie in (-90, 90)".into()));
                }
                Ok(())
            }
            CorruptionSpec::Perspective { scale } => {
                scale.validate("scale")?;
                if scale.lo < 0.0 {
                    return Err(Error::InvalidArgument("perspective scale must be nonnegative".into()));
                }
                Ok(())
            }
        }
    }
}

impl From<CorruptionKind> for CorruptionSpec {
    fn from(kind: CorruptionKind) -> Self {
        Self::default_for(kind)
    }
}

/// Apply `spec` to `img`, drawing all randomness from `rng`.
pub fn apply(img: &Image, spec: &CorruptionSpec, rng: &mut Rng) -> Result<Image> {
    spec.validate()?;
    if img.is_empty() {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let mut out = match spec {
        CorruptionSpec::None => return Ok(img.clone()),
        CorruptionSpec::CoarseDropout { p, size_percent } => {
            coarse_dropout(img, p.sample(rng), size_percent.sample(rng), rng)
        }
        CorruptionSpec::Cutout {
            iterations,
            size,
            fill,
        } => {
            let rects = cutout_rects(img.height(), img.width(), *iterations, *size, rng);
            fill_rects(img, &rects, *fill)
        }
        CorruptionSpec::AdditiveGaussianNoise { scale } => {
            let s = scale.sample(rng);
            let mut out = img.clone();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    for c in 0..img.channels() {
                        let n = rng.normal();
                        out.set(y, x, c, (img.get(y, x, c) as f64 + s * n) as f32);
                    }
                }
            }
            out
        }
        CorruptionSpec::ElasticTransform { alpha, sigma } => {
            geometry::elastic(img, alpha.sample(rng), *sigma, rng)
        }
        CorruptionSpec::MotionBlur { k, angles } => {
            let angle = angles[rng.below(angles.len())];
            motion_blur(img, *k, angle)?
        }
        CorruptionSpec::ShearRotate { shear, rotate } => {
            let (sh, rot) = (shear.sample(rng), rotate.sample(rng));
            geometry::shear_rotate(img, sh, rot)
        }
        CorruptionSpec::Perspective { scale } => {
            let s = scale.sample(rng);
            geometry::perspective(img, s, rng)
        }
    };
    out.clamp();
    Ok(out)
}

fn coarse_dropout(img: &Image, p: f64, size_percent: f64, rng: &mut Rng) -> Image {
    let (h, w) = (img.height(), img.width());
    let gh = ((h as f64 * size_percent).round() as usize).max(1);
    let gw = ((w as f64 * size_percent).round() as usize).max(1);
    let mask: Vec<bool> = (0..gh * gw).map(|_| rng.bernoulli(p)).collect();
    let mut out = img.clone();
    for y in 0..h {
        let gy = y * gh / h;
        for x in 0..w {
            if mask[gy * gw + x * gw / w] {
                for c in 0..img.channels() {
                    out.set(y, x, c, 0.0);
                }
            }
        }
    }
    out
}

/// Axis-aligned rectangle `[y0, y1) x [x0, x1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub y0: usize,
    pub x0: usize,
    pub y1: usize,
    pub x1: usize,
}

impl Rect {
    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.y0..self.y1).contains(&y) && (self.x0..self.x1).contains(&x)
    }
}

/// The rectangles Cutout would fill: sides `size` times the image sides (at
/// least one pixel), centres uniform over the image, clipped to the frame.
pub fn cutout_rects(h: usize, w: usize, iterations: usize, size: f64, rng: &mut Rng) -> Vec<Rect> {
    let rh = ((h as f64 * size).round() as usize).clamp(1, h);
    let rw = ((w as f64 * size).round() as usize).clamp(1, w);
    (0..iterations)
        .map(|_| {
            let cy = rng.below(h);
            let cx = rng.below(w);
            let y0 = cy.saturating_sub(rh / 2);
            let x0 = cx.saturating_sub(rw / 2);
            Rect {
                y0,
                x0,
                y1: (y0 + rh).min(h),
                x1: (x0 + rw).min(w),
            }
        })
        .collect()
}

fn fill_rects(img: &Image, rects: &[Rect], fill: f32) -> Image {
    let mut out = img.clone();
    for r in rects {
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                for c in 0..img.channels() {
                    out.set(y, x, c, fill);
                }
            }
        }
    }
    out
}

/// Line kernel of `k` taps through the centre at `angle_deg`, normalized to
/// sum 1; returned as `(dy, dx, weight)` offsets.
pub fn motion_kernel(k: usize, angle_deg: f64) -> Vec<(isize, isize, f64)> {
    let r = (k / 2) as isize;
    let (s, c) = angle_deg.to_radians().sin_cos();
    let side = (2 * r + 1) as usize;
    let mut grid = vec![0.0f64; side * side];
    let half = (k as f64 - 1.0) / 2.0;
    for i in 0..k {
        let t = i as f64 - half;
        let dx = (t * c).round() as isize;
        let dy = (-t * s).round() as isize;
        grid[((dy + r) as usize) * side + (dx + r) as usize] += 1.0;
    }
    let total: f64 = grid.iter().sum();
    let mut taps = Vec::new();
    for (i, &v) in grid.iter().enumerate() {
        if v > 0.0 {
            let dy = (i / side) as isize - r;
            let dx = (i % side) as isize - r;
            taps.push((dy, dx, v / total));
        }
    }
    taps
}

fn motion_blur(img: &Image, k: usize, angle: f64) -> Result<Image> {
    if k > img.height() || k > img.width() {
        return Err(Error::KernelExceedsImage);
    }
    let taps = motion_kernel(k, angle);
    let mut out = img.blank_like();
    for y in 0..img.height() {
        for x in 0..img.width() {
            for c in 0..img.channels() {
                let mut acc = 0.0f64;
                for &(dy, dx, wgt) in &taps {
                    let sy = geometry::reflect(y as isize + dy, img.height());
                    let sx = geometry::reflect(x as isize + dx, img.width());
                    acc += wgt * img.get(sy, sx, c) as f64;
                }
                out.set(y, x, c, acc as f32);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::tensor::Rng;

    fn test_image(seed: u64, h: usize, w: usize, c: usize) -> Image {
        let mut rng = Rng::new(seed);
        // Values in (0.05, 0.45) so they never collide with the cutout fill.
        let data = (0..h * w * c).map(|_| (0.05 + 0.4 * rng.uniform()) as f32).collect();
        Image::new(h, w, c, data).unwrap()
    }

    fn max_diff(a: &Image, b: &Image) -> f32 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
    }

    #[test]
    fn none_is_bitwise_identity() {
        let img = test_image(1, 32, 64, 1);
        let out = apply(&img, &CorruptionSpec::None, &mut Rng::new(3)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn zero_noise_is_identity() {
        let img = test_image(2, 16, 20, 3);
        let spec = CorruptionSpec::AdditiveGaussianNoise {
            scale: Range::fixed(0.0),
        };
        assert_eq!(apply(&img, &spec, &mut Rng::new(4)).unwrap(), img);
    }

    #[test]
    fn zero_alpha_elastic_is_identity() {
        let img = test_image(3, 32, 64, 1);
        let spec = CorruptionSpec::ElasticTransform {
            alpha: Range::fixed(0.0),
            sigma: 0.5,
        };
        assert!(max_diff(&apply(&img, &spec, &mut Rng::new(5)).unwrap(), &img) <= 1e-6);
    }

    #[test]
    fn zero_range_geometric_is_identity() {
        let img = test_image(4, 32, 64, 1);
        for spec in [
            CorruptionSpec::ShearRotate {
                shear: Range::fixed(0.0),
                rotate: Range::fixed(0.0),
            },
            CorruptionSpec::Perspective {
                scale: Range::fixed(0.0),
            },
        ] {
            assert!(max_diff(&apply(&img, &spec, &mut Rng::new(6)).unwrap(), &img) <= 1e-6);
        }
    }

    #[test]
    fn cutout_fills_exactly_four_rectangles() {
        let img = test_image(5, 32, 64, 1);
        let spec = CorruptionSpec::default_for(CorruptionKind::Cutout);
        let out = apply(&img, &spec, &mut Rng::new(7)).unwrap();
        let rects = cutout_rects(32, 64, 4, 0.2, &mut Rng::new(7));
        assert_eq!(rects.len(), 4);
        for y in 0..32 {
            for x in 0..64 {
                let inside = rects.iter().any(|r| r.contains(y, x));
                assert_eq!(out.get(y, x, 0) == 0.5, inside, "({y}, {x})");
                if !inside {
                    assert_eq!(out.get(y, x, 0), img.get(y, x, 0));
                }
            }
        }
        for r in &rects {
            assert!((1..=6).contains(&(r.y1 - r.y0)) && (1..=13).contains(&(r.x1 - r.x0)));
        }
    }

    #[test]
    fn dropout_only_zeroes() {
        let img = test_image(6, 32, 64, 1);
        let spec = CorruptionSpec::CoarseDropout {
            p: Range::fixed(0.5),
            size_percent: Range::fixed(0.1),
        };
        let out = apply(&img, &spec, &mut Rng::new(8)).unwrap();
        let dropped = out.data().iter().zip(img.data()).filter(|(o, i)| o != i).count();
        assert!(out.data().iter().zip(img.data()).all(|(&o, &i)| o == i || o == 0.0));
        assert!(dropped > 0 && dropped < 32 * 64);
    }

    #[test]
    fn motion_kernel_is_normalized_line() {
        for angle in [-45.0, 0.0, 45.0, 90.0] {
            let taps = motion_kernel(15, angle);
            let total: f64 = taps.iter().map(|t| t.2).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(taps.iter().all(|&(dy, dx, _)| dy.abs() <= 7 && dx.abs() <= 7));
        }
        assert_eq!(motion_kernel(15, 0.0).len(), 15);
        assert!(motion_kernel(15, 45.0).iter().all(|&(dy, dx, _)| dy == -dx));
    }

    #[test]
    fn motion_blur_preserves_interior_mean() {
        let img = test_image(9, 48, 96, 1);
        let spec = CorruptionSpec::default_for(CorruptionKind::MotionBlur);
        let out = apply(&img, &spec, &mut Rng::new(10)).unwrap();
        let interior = |im: &Image| {
            let mut s = 0.0;
            let mut n = 0.0;
            for y in 8..40 {
                for x in 8..88 {
                    s += im.get(y, x, 0) as f64;
                    n += 1.0;
                }
            }
            s / n
        };
        let (a, b) = (interior(&img), interior(&out));
        assert!((a - b).abs() / a < 0.02, "{a} vs {b}");
    }

    #[test]
    fn motion_blur_kernel_exceeds_image() {
        let img = test_image(11, 10, 64, 1);
        let spec = CorruptionSpec::default_for(CorruptionKind::MotionBlur);
        let err = apply(&img, &spec, &mut Rng::new(1)).unwrap_err();
        assert_eq!(err.to_string(), "kernel exceeds image");
    }

    #[test]
    fn kinds_parse_and_categorize() {
        for kind in CorruptionKind::ALL {
            assert_eq!(kind.name().parse::<CorruptionKind>().unwrap(), kind);
            assert_eq!(CorruptionSpec::default_for(kind).kind(), kind);
        }
        assert_eq!(CorruptionKind::Cutout.category(), Category::LocalMasking);
        assert_eq!(CorruptionKind::MotionBlur.category(), Category::PixelWise);
        assert_eq!(CorruptionKind::Perspective.category(), Category::Geometric);
        assert!("sepia".parse::<CorruptionKind>().is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let img = test_image(12, 8, 8, 1);
        let bad = CorruptionSpec::AdditiveGaussianNoise {
            scale: Range::new(0.3, 0.1),
        };
        assert!(apply(&img, &bad, &mut Rng::new(0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn every_kind_is_deterministic_and_shape_preserving(seed in 0u64..1000, k in 0usize..8, c in prop::sample::select(vec![1usize, 3])) {
            let img = test_image(seed ^ 0xabc, 24, 40, c);
            let spec = CorruptionSpec::default_for(CorruptionKind::ALL[k]);
            let spec = match spec {
                CorruptionSpec::MotionBlur { angles, .. } => CorruptionSpec::MotionBlur { k: 9, angles },
                s => s,
            };
            let a = apply(&img, &spec, &mut Rng::new(seed)).unwrap();
            let b = apply(&img, &spec, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!((a.height(), a.width(), a.channels()), (24, 40, c));
            prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
