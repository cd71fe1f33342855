//! Rank-4 `(batch, channel, height, width)` tensor container.
//!
//! Everything in the crate works on [`Tensor`], a contiguous row-major buffer
//! where index `(b, c, h, w)` lives at offset `((b*C + c)*H + h)*W + w`. The
//! width axis is therefore the unit-stride inner loop, which is the hot path
//! for the windowed moment computations.
//!
//! Tensors are generic over [`Scalar`] so that the same kernels run in 32-bit
//! (training, [`FeatureTensor`]) and 64-bit (gradient verification).

mod io;
mod rng;

pub use io::{load, read_from, save, write_to, FILE_MAGIC, FILE_VERSION};
pub use rng::Rng;

use std::fmt;

use crate::{Error, Result};

/// Floating-point element type for tensors.
pub trait Scalar:
    num_like::Float + Default + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `c = alpha * a * b + beta * c` on strided row-major matrices.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`; each matrix is described
    /// by its row and column strides in elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    );
}

/// The small slice of float behaviour the kernels need, without pulling in a
/// numeric-traits dependency.
pub mod num_like {
    use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

    pub trait Float:
        Copy
        + PartialOrd
        + Add<Output = Self>
        + Sub<Output = Self>
        + Mul<Output = Self>
        + Div<Output = Self>
        + Neg<Output = Self>
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
    {
        const ZERO: Self;
        const ONE: Self;
        fn sqrt(self) -> Self;
        fn exp(self) -> Self;
        fn ln(self) -> Self;
        fn abs(self) -> Self;
        fn max(self, other: Self) -> Self;
        fn min(self, other: Self) -> Self;
        fn is_finite(self) -> bool;
        fn is_nan(self) -> bool;
    }

    macro_rules! impl_float {
        ($t:ty) => {
            impl Float for $t {
                const ZERO: Self = 0.0;
                const ONE: Self = 1.0;
                #[inline]
                fn sqrt(self) -> Self {
                    <$t>::sqrt(self)
                }
                #[inline]
                fn exp(self) -> Self {
                    <$t>::exp(self)
                }
                #[inline]
                fn ln(self) -> Self {
                    <$t>::ln(self)
                }
                #[inline]
                fn abs(self) -> Self {
                    <$t>::abs(self)
                }
                #[inline]
                fn max(self, other: Self) -> Self {
                    <$t>::max(self, other)
                }
                #[inline]
                fn min(self, other: Self) -> Self {
                    <$t>::min(self, other)
                }
                #[inline]
                fn is_finite(self) -> bool {
                    <$t>::is_finite(self)
                }
                #[inline]
                fn is_nan(self) -> bool {
                    <$t>::is_nan(self)
                }
            }
        };
    }

    impl_float!(f32);
    impl_float!(f64);
}

fn check_gemm_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    assert!(rs >= 0 && cs >= 0, "negative strides are not supported");
    let last = (rows - 1) * rs as usize + (cols - 1) * cs as usize;
    assert!(last < len, "gemm operand out of bounds");
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: (&[Self], isize, isize),
                b: (&[Self], isize, isize),
                beta: Self,
                c: (&mut [Self], isize, isize),
            ) {
                check_gemm_extent(a.0.len(), m, k, a.1, a.2);
                check_gemm_extent(b.0.len(), k, n, b.1, b.2);
                check_gemm_extent(c.0.len(), m, n, c.1, c.2);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every operand extent was bounds-checked above and the
                // output slice is uniquely borrowed.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.0.as_ptr(),
                        a.1,
                        a.2,
                        b.0.as_ptr(),
                        b.1,
                        b.2,
                        beta,
                        c.0.as_mut_ptr(),
                        c.1,
                        c.2,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// One of the four tensor axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Batch = 0,
    Channel = 1,
    Height = 2,
    Width = 3,
}

/// Subset of `{Channel, Height, Width}` naming the axes a statistic is indexed
/// by. Reduction runs over the complement; the batch axis is always kept.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisSet {
    channel: bool,
    height: bool,
    width: bool,
}

impl AxisSet {
    pub const C: AxisSet = AxisSet::new(true, false, false);
    pub const H: AxisSet = AxisSet::new(false, true, false);
    pub const W: AxisSet = AxisSet::new(false, false, true);
    pub const HW: AxisSet = AxisSet::new(false, true, true);
    pub const CW: AxisSet = AxisSet::new(true, false, true);
    pub const CH: AxisSet = AxisSet::new(true, true, false);

    /// The six kept-axis variants compared in the axis ablation.
    pub const VARIANTS: [AxisSet; 6] = [
        AxisSet::C,
        AxisSet::W,
        AxisSet::H,
        AxisSet::HW,
        AxisSet::CW,
        AxisSet::CH,
    ];

    pub const fn new(channel: bool, height: bool, width: bool) -> Self {
        AxisSet {
            channel,
            height,
            width,
        }
    }

    pub fn from_axes(axes: &[Axis]) -> Result<Self> {
        let mut set = AxisSet::new(false, false, false);
        for axis in axes {
            match axis {
                Axis::Batch => {
                    return Err(Error::InvalidAxisSet(
                        "batch cannot be a kept axis".to_string(),
                    ))
                }
                Axis::Channel => set.channel = true,
                Axis::Height => set.height = true,
                Axis::Width => set.width = true,
            }
        }
        Ok(set)
    }

    pub fn contains(&self, axis: Axis) -> bool {
        match axis {
            Axis::Batch => false,
            Axis::Channel => self.channel,
            Axis::Height => self.height,
            Axis::Width => self.width,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.channel || self.height || self.width)
    }

    /// Short lowercase name, e.g. `"ch"` for `{Channel, Height}`.
    pub fn name(&self) -> String {
        let mut s = String::new();
        if self.channel {
            s.push('c');
        }
        if self.height {
            s.push('h');
        }
        if self.width {
            s.push('w');
        }
        s
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::InvalidAxisSet("kept axis set is empty".to_string()))
        } else {
            Ok(())
        }
    }

    /// Dims of the statistics tensor for a tensor of `dims`: reduced axes
    /// collapse to extent 1.
    pub fn stat_dims(&self, dims: [usize; 4]) -> [usize; 4] {
        [
            dims[0],
            if self.channel { dims[1] } else { 1 },
            if self.height { dims[2] } else { 1 },
            if self.width { dims[3] } else { 1 },
        ]
    }

    /// Number of elements each statistic is computed over.
    pub fn group_size(&self, dims: [usize; 4]) -> usize {
        (if self.channel { 1 } else { dims[1] })
            * (if self.height { 1 } else { dims[2] })
            * (if self.width { 1 } else { dims[3] })
    }
}

impl std::str::FromStr for AxisSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = AxisSet::new(false, false, false);
        for ch in s.trim().chars() {
            let slot = match ch.to_ascii_lowercase() {
                'c' => &mut set.channel,
                'h' => &mut set.height,
                'w' => &mut set.width,
                _ => return Err(Error::InvalidAxisSet(format!("unknown axis '{ch}' in {s:?}"))),
            };
            if *slot {
                return Err(Error::InvalidAxisSet(format!("duplicate axis '{ch}' in {s:?}")));
            }
            *slot = true;
        }
        set.ensure_non_empty()?;
        Ok(set)
    }
}

impl fmt::Debug for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AxisSet({{{}}})", self.name())
    }
}

impl fmt::Display for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Dense rank-4 tensor in row-major `(B, C, H, W)` layout.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

/// The 32-bit activation container used for training.
pub type FeatureTensor = Tensor<f32>;

fn checked_numel(dims: [usize; 4]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::DimOverflow)
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self::full(dims, T::ZERO)
    }

    pub fn full(dims: [usize; 4], value: T) -> Self {
        let n = checked_numel(dims).expect("tensor dims overflow usize");
        Tensor {
            dims,
            data: vec![value; n],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Result<Self> {
        let n = checked_numel(dims)?;
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} elements for dims {:?}", n, dims),
                found: format!("{} elements", data.len()),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut t = Self::zeros(dims);
        let [b, c, h, w] = dims;
        let mut i = 0;
        for bi in 0..b {
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        t.data[i] = f([bi, ci, hi, wi]);
                        i += 1;
                    }
                }
            }
        }
        t
    }

    /// Standard-normal entries scaled by `scale` and shifted by `shift`.
    pub fn randn(dims: [usize; 4], rng: &mut Rng, scale: f64, shift: f64) -> Self {
        let n = checked_numel(dims).expect("tensor dims overflow usize");
        let data = (0..n)
            .map(|_| T::from_f64(rng.normal() * scale + shift))
            .collect();
        Tensor { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 4]) -> usize {
        let [_, c, h, w] = self.dims;
        ((idx[0] * c + idx[1]) * h + idx[2]) * w + idx[3]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> T {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 4], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn reshape(self, dims: [usize; 4]) -> Result<Self> {
        Self::from_vec(dims, self.data)
    }

    /// Contiguous slice holding batch item `b`.
    pub fn item(&self, b: usize) -> &[T] {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(Tensor {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.ensure_same_dims(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Sum of all elements, accumulated in 64-bit.
    pub fn sum(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.to_f64().abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.dims),
                found: format!("{:?}", other.dims),
            });
        }
        Ok(())
    }

    /// Columns `[start, start + len)` of every `(b, c, h)` row.
    pub fn narrow_width(&self, start: usize, len: usize) -> Self {
        let [b, c, h, w] = self.dims;
        assert!(start + len <= w, "width range out of bounds");
        let mut out = Vec::with_capacity(b * c * h * len);
        for row in self.data.chunks_exact(w.max(1)).take(b * c * h) {
            out.extend_from_slice(&row[start..start + len]);
        }
        Tensor {
            dims: [b, c, h, len],
            data: out,
        }
    }

    /// Mean over the axes not in `kept`, accumulated in 64-bit. The result has
    /// the reduced axes collapsed to extent 1 and always retains the batch axis.
    pub fn reduce_mean(&self, kept: AxisSet) -> Result<Self> {
        kept.ensure_non_empty()?;
        let n = kept.group_size(self.dims);
        if self.is_empty() || n == 0 {
            return Err(Error::EmptyReduction);
        }
        let sums = group_sums(self, kept, |v| v.to_f64());
        let inv = 1.0 / n as f64;
        Ok(Tensor {
            dims: kept.stat_dims(self.dims),
            data: sums.into_iter().map(|s| T::from_f64(s * inv)).collect(),
        })
    }

    /// Broadcast a statistics tensor (reduced axes of extent 1) back to `dims`.
    pub fn broadcast_to(&self, dims: [usize; 4]) -> Result<Self> {
        for (axis, (&s, &d)) in self.dims.iter().zip(&dims).enumerate() {
            if s != d && s != 1 {
                return Err(Error::ShapeMismatch {
                    expected: format!("broadcastable to {:?}", dims),
                    found: format!("{:?} (axis {axis})", self.dims),
                });
            }
        }
        let [sb, sc, sh, sw] = self.dims;
        Ok(Tensor::from_fn(dims, |[b, c, h, w]| {
            let idx = [
                if sb == 1 { 0 } else { b },
                if sc == 1 { 0 } else { c },
                if sh == 1 { 0 } else { h },
                if sw == 1 { 0 } else { w },
            ];
            self.get(idx)
        }))
    }
}

/// Maps every element offset of a tensor with `dims` to its statistics group.
///
/// Groups are numbered in row-major order of the statistic dims so the result
/// lines up with [`AxisSet::stat_dims`].
pub(crate) fn group_index_fn(dims: [usize; 4], kept: AxisSet) -> impl Fn(usize, usize, usize, usize) -> usize {
    let sd = kept.stat_dims(dims);
    let (kc, kh, kw) = (
        kept.contains(Axis::Channel),
        kept.contains(Axis::Height),
        kept.contains(Axis::Width),
    );
    move |b, c, h, w| {
        let c = if kc { c } else { 0 };
        let h = if kh { h } else { 0 };
        let w = if kw { w } else { 0 };
        ((b * sd[1] + c) * sd[2] + h) * sd[3] + w
    }
}

/// Per-group sums of `f(x)` in 64-bit, in statistic-dims order.
pub(crate) fn group_sums<T: Scalar>(x: &Tensor<T>, kept: AxisSet, f: impl Fn(T) -> f64) -> Vec<f64> {
    let dims = x.dims();
    let sd = kept.stat_dims(dims);
    let mut sums = vec![0.0f64; sd.iter().product()];
    let [b, c, h, w] = dims;
    if kept == AxisSet::CH {
        // Unit-stride fast path: each (b, c, h) row is one group.
        for (s, row) in sums.iter_mut().zip(x.data().chunks_exact(w.max(1))) {
            *s = row.iter().map(|&v| f(v)).sum();
        }
        return sums;
    }
    let group = group_index_fn(dims, kept);
    let data = x.data();
    let mut i = 0;
    for bi in 0..b {
        for ci in 0..c {
            for hi in 0..h {
                let base = group(bi, ci, hi, 0);
                if kept.contains(Axis::Width) {
                    for (wi, &v) in data[i..i + w].iter().enumerate() {
                        sums[base + wi] += f(v);
                    }
                } else {
                    sums[base] += data[i..i + w].iter().map(|&v| f(v)).sum::<f64>();
                }
                i += w;
            }
        }
    }
    sums
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?} [", self.dims)?;
        for (i, v) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v:?}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ... ({} more)", self.data.len() - SHOWN)?;
        }
        f.write_str("]")
    }
}

/// Max-norm relative distance `max|a - b| / max|b|` (absolute when `b` is zero).
pub fn max_rel_diff<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    assert_eq!(a.dims(), b.dims(), "max_rel_diff on mismatched dims");
    let scale = b.max_abs();
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .fold(0.0f64, |m, (x, y)| m.max((x.to_f64() - y.to_f64()).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_mean(x: &Tensor<f64>, kept: AxisSet, idx: [usize; 4]) -> f64 {
        let [b, c, h, w] = x.dims();
        let mut sum = 0.0;
        let mut n = 0;
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    if (kept.contains(Axis::Channel) && ci != idx[1])
                        || (kept.contains(Axis::Height) && hi != idx[2])
                        || (kept.contains(Axis::Width) && wi != idx[3])
                    {
                        continue;
                    }
                    let _ = b;
                    sum += x.get([idx[0], ci, hi, wi]);
                    n += 1;
                }
            }
        }
        sum / n as f64
    }

    #[test]
    fn offset_is_row_major() {
        let t = Tensor::<f32>::zeros([2, 3, 4, 5]);
        assert_eq!(t.offset([1, 2, 3, 4]), ((1 * 3 + 2) * 4 + 3) * 5 + 4);
        assert_eq!(t.offset([0, 0, 0, 1]), 1);
    }

    #[test]
    fn constant_mean_is_constant() {
        let t = Tensor::<f32>::full([2, 3, 4, 5], 3.0);
        let m = t.reduce_mean(AxisSet::CH).unwrap();
        assert_eq!(m.dims(), [2, 3, 4, 1]);
        assert!(m.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn row_mean_over_width() {
        let t = Tensor::<f32>::from_vec([1, 1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = t.reduce_mean(AxisSet::CH).unwrap();
        assert_eq!(m.data(), &[2.5]);
    }

    #[test]
    fn channel_kept_mean_matches_loop_oracle() {
        let mut rng = Rng::new(11);
        let x = Tensor::<f64>::randn([1, 2, 2, 2], &mut rng, 1.0, 0.0);
        let m = x.reduce_mean(AxisSet::C).unwrap();
        assert_eq!(m.dims(), [1, 2, 1, 1]);
        for c in 0..2 {
            let slab: f64 = (0..2)
                .flat_map(|h| (0..2).map(move |w| (h, w)))
                .map(|(h, w)| x.get([0, c, h, w]))
                .sum::<f64>()
                / 4.0;
            assert!((m.get([0, c, 0, 0]) - slab).abs() < 1e-15);
        }
    }

    #[test]
    fn every_variant_matches_brute_force() {
        let mut rng = Rng::new(5);
        let x = Tensor::<f64>::randn([2, 3, 4, 5], &mut rng, 2.0, 1.0);
        for kept in AxisSet::VARIANTS {
            let m = x.reduce_mean(kept).unwrap();
            assert_eq!(m.dims(), kept.stat_dims(x.dims()));
            let [b, c, h, w] = m.dims();
            for bi in 0..b {
                for ci in 0..c {
                    for hi in 0..h {
                        for wi in 0..w {
                            let want = brute_mean(&x, kept, [bi, ci, hi, wi]);
                            assert!((m.get([bi, ci, hi, wi]) - want).abs() < 1e-12, "{kept:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn empty_tensor_is_an_error() {
        let t = Tensor::<f32>::zeros([0, 1, 1, 1]);
        assert!(matches!(t.reduce_mean(AxisSet::C), Err(Error::EmptyReduction)));
        let t = Tensor::<f32>::zeros([1, 2, 0, 3]);
        assert!(matches!(t.reduce_mean(AxisSet::C), Err(Error::EmptyReduction)));
    }

    #[test]
    fn axis_set_parsing() {
        assert_eq!("ch".parse::<AxisSet>().unwrap(), AxisSet::CH);
        assert_eq!("HC".parse::<AxisSet>().unwrap(), AxisSet::CH);
        assert!("".parse::<AxisSet>().is_err());
        assert!("cc".parse::<AxisSet>().is_err());
        assert!("b".parse::<AxisSet>().is_err());
        assert!(AxisSet::from_axes(&[Axis::Batch]).is_err());
        for v in AxisSet::VARIANTS {
            assert_eq!(v.name().parse::<AxisSet>().unwrap(), v);
        }
    }

    #[test]
    fn narrow_width_picks_columns() {
        let t = Tensor::<f32>::from_fn([1, 1, 2, 4], |[_, _, h, w]| (h * 10 + w) as f32);
        let n = t.narrow_width(1, 2);
        assert_eq!(n.data(), &[1.0, 2.0, 11.0, 12.0]);
    }
}
