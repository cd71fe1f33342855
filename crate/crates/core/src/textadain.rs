//! Windowed, permuted statistics swapping.
//!
//! A batch `(B, C, H, W)` is cut into `K` windows of width `W / K` along the
//! width axis, giving `B*K` elements. With probability `p` per call, a
//! permutation of those elements is drawn and each element takes the kept-axis
//! statistics (by default `{C, H}`) of its permuted partner. The windows are
//! then put back. Trailing columns that do not fill a window are never touched.
//!
//! The layer is a no-op outside training.

use std::fmt;
use std::str::FromStr;

use crate::statmoments::{moments_allow_zero, StatPair, DEFAULT_EPS};
use crate::statswap::{recipient_stats, transfer, transfer_backward};
use crate::tensor::{AxisSet, Rng, Scalar, Tensor};
use crate::{Error, Result};

pub const DEFAULT_P: f64 = 0.01;
pub const DEFAULT_K: usize = 5;

/// Where donor statistics come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DonorSource {
    /// Other windows of the same batch, via a random permutation.
    Batch,
    /// An i.i.d. standard-normal window per element.
    GaussianNoise,
    /// A constant-zero window per element.
    BlankImage,
}

impl DonorSource {
    pub fn name(&self) -> &'static str {
        match self {
            DonorSource::Batch => "batch",
            DonorSource::GaussianNoise => "gauss",
            DonorSource::BlankImage => "blank",
        }
    }
}

impl FromStr for DonorSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "batch" => Ok(DonorSource::Batch),
            "gauss" => Ok(DonorSource::GaussianNoise),
            "blank" => Ok(DonorSource::BlankImage),
            other => Err(Error::Config(format!(
                "unknown donor source {other:?} (expected batch|gauss|blank)"
            ))),
        }
    }
}

impl fmt::Display for DonorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TextAdainConfig {
    /// Probability that a call swaps statistics at all.
    pub p: f64,
    /// Windows per batch item.
    pub k: usize,
    pub eps: f64,
    pub kept: AxisSet,
    pub donor: DonorSource,
}

impl Default for TextAdainConfig {
    fn default() -> Self {
        TextAdainConfig {
            p: DEFAULT_P,
            k: DEFAULT_K,
            eps: DEFAULT_EPS,
            kept: AxisSet::CH,
            donor: DonorSource::Batch,
        }
    }
}

impl TextAdainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".to_string()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidEpsilon(self.eps));
        }
        self.kept.ensure_non_empty()
    }
}

/// `(B, C, H, W)` reshaped into `B*K` windows plus the untouched remainder.
///
/// Element `j*K + k` holds columns `[k*w, (k+1)*w)` of batch item `j`, where
/// `w = W / K` (floor). When `w == 0` the elements are empty and every column
/// is in the remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedBatch<T> {
    pub elements: Tensor<T>,
    /// The trailing `W mod K` columns of each item, shape `(B, C, H, W - K*w)`.
    pub remainder: Tensor<T>,
    pub source_dims: [usize; 4],
    pub k: usize,
}

impl<T: Scalar> WindowedBatch<T> {
    pub fn window_width(&self) -> usize {
        self.source_dims[3] / self.k
    }

    /// Windows are narrower than one column, so no swap can happen.
    pub fn is_degenerate(&self) -> bool {
        self.window_width() == 0
    }
}

pub fn split<T: Scalar>(x: &Tensor<T>, k: usize) -> Result<WindowedBatch<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("window count must be at least 1".to_string()));
    }
    let [b, c, h, w] = x.dims();
    let ww = w / k;
    let rem = w - ww * k;
    let mut elements = Vec::with_capacity(b * k * c * h * ww);
    let mut remainder = Vec::with_capacity(b * c * h * rem);
    for j in 0..b {
        let item = x.item(j);
        for win in 0..k {
            for row in item.chunks_exact(w.max(1)).take(c * h) {
                elements.extend_from_slice(&row[win * ww..(win + 1) * ww]);
            }
        }
        for row in item.chunks_exact(w.max(1)).take(c * h) {
            remainder.extend_from_slice(&row[ww * k..]);
        }
    }
    Ok(WindowedBatch {
        elements: Tensor::from_vec([b * k, c, h, ww], elements)?,
        remainder: Tensor::from_vec([b, c, h, rem], remainder)?,
        source_dims: x.dims(),
        k,
    })
}

pub fn merge<T: Scalar>(wb: &WindowedBatch<T>) -> Result<Tensor<T>> {
    let [b, c, h, w] = wb.source_dims;
    if wb.k == 0 {
        return Err(Error::InvalidArgument("window count must be at least 1".to_string()));
    }
    let ww = w / wb.k;
    let rem = w - ww * wb.k;
    let want_el = [b * wb.k, c, h, ww];
    let want_rem = [b, c, h, rem];
    if wb.elements.dims() != want_el || wb.remainder.dims() != want_rem {
        return Err(Error::ShapeMismatch {
            expected: format!("elements {want_el:?} and remainder {want_rem:?}"),
            found: format!("{:?} and {:?}", wb.elements.dims(), wb.remainder.dims()),
        });
    }
    let mut out = Tensor::zeros(wb.source_dims);
    let rows = c * h;
    for j in 0..b {
        let dst = out.item_mut(j);
        for win in 0..wb.k {
            let src = wb.elements.item(j * wb.k + win);
            for r in 0..rows {
                dst[r * w + win * ww..r * w + (win + 1) * ww]
                    .copy_from_slice(&src[r * ww..(r + 1) * ww]);
            }
        }
        let src = wb.remainder.item(j);
        for r in 0..rows {
            dst[r * w + ww * wb.k..(r + 1) * w].copy_from_slice(&src[r * rem..(r + 1) * rem]);
        }
    }
    Ok(out)
}

/// The random choices of one forward call.
#[derive(Clone, Debug, PartialEq)]
pub enum DonorPlan<T> {
    /// Layer does nothing (not training, Bernoulli draw failed, or windows
    /// narrower than a column).
    Skip,
    /// Element `i` takes the statistics of element `perm[i]`.
    Permutation(Vec<usize>),
    /// Element `i` takes the statistics of `donors` element `i`.
    Synthetic(Tensor<T>),
}

/// Draw the per-call randomness: one Bernoulli(p), then the donors.
pub fn sample_plan<T: Scalar>(
    dims: [usize; 4],
    cfg: &TextAdainConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<DonorPlan<T>> {
    cfg.validate()?;
    if !training || !rng.bernoulli(cfg.p) {
        return Ok(DonorPlan::Skip);
    }
    let [b, c, h, w] = dims;
    let ww = w / cfg.k;
    if ww == 0 || b == 0 || c * h == 0 {
        return Ok(DonorPlan::Skip);
    }
    let el_dims = [b * cfg.k, c, h, ww];
    Ok(match cfg.donor {
        DonorSource::Batch => DonorPlan::Permutation(rng.permutation(b * cfg.k)?),
        DonorSource::GaussianNoise => DonorPlan::Synthetic(Tensor::randn(el_dims, rng, 1.0, 0.0)),
        DonorSource::BlankImage => DonorPlan::Synthetic(Tensor::zeros(el_dims)),
    })
}

fn donor_stats<T: Scalar>(
    own: &StatPair,
    elements: &Tensor<T>,
    plan: &DonorPlan<T>,
    cfg: &TextAdainConfig,
) -> Result<StatPair> {
    match plan {
        DonorPlan::Skip => unreachable!("skip plans never reach the swap"),
        DonorPlan::Permutation(perm) => own.permute_batch(perm),
        DonorPlan::Synthetic(donors) => {
            elements.ensure_same_dims(donors)?;
            moments_allow_zero(donors, cfg.kept, cfg.eps)
        }
    }
}

/// Cached state for the backward pass of one forward call.
#[derive(Clone, Debug)]
pub enum TextAdainVjp<T> {
    Identity,
    Swap {
        source_dims: [usize; 4],
        k: usize,
        elements: Tensor<T>,
        own: StatPair,
        donor_std: Tensor<f64>,
    },
}

impl<T: Scalar> TextAdainVjp<T> {
    /// Map an upstream gradient on the layer output to the input gradient.
    ///
    /// Each window's gradient goes through its own statistics only; donating
    /// statistics contributes nothing, and remainder columns pass through.
    pub fn apply(&self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            TextAdainVjp::Identity => Ok(upstream.clone()),
            TextAdainVjp::Swap {
                source_dims,
                k,
                elements,
                own,
                donor_std,
            } => {
                if upstream.dims() != *source_dims {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{source_dims:?}"),
                        found: format!("{:?}", upstream.dims()),
                    });
                }
                let mut wg = split(upstream, *k)?;
                wg.elements = transfer_backward(elements, own, donor_std, &wg.elements)?;
                merge(&wg)
            }
        }
    }
}

/// Run the layer with a fixed plan, returning output and backward state.
pub fn forward_with_plan<T: Scalar>(
    x: &Tensor<T>,
    cfg: &TextAdainConfig,
    plan: &DonorPlan<T>,
) -> Result<(Tensor<T>, TextAdainVjp<T>)> {
    cfg.validate()?;
    if matches!(plan, DonorPlan::Skip) {
        return Ok((x.clone(), TextAdainVjp::Identity));
    }
    let mut wb = split(x, cfg.k)?;
    if wb.is_degenerate() {
        return Ok((x.clone(), TextAdainVjp::Identity));
    }
    let own = recipient_stats(&wb.elements, cfg.kept, cfg.eps)?;
    let donor = donor_stats(&own, &wb.elements, plan, cfg)?;
    let swapped = transfer(&wb.elements, &own, &donor)?;
    let elements = std::mem::replace(&mut wb.elements, swapped);
    let out = merge(&wb)?;
    Ok((
        out,
        TextAdainVjp::Swap {
            source_dims: x.dims(),
            k: cfg.k,
            elements,
            own,
            donor_std: donor.std,
        },
    ))
}

/// One stochastic application of the layer.
///
/// Outside training, or when the per-call Bernoulli(p) draw fails, the input
/// is returned unchanged and no further randomness is consumed.
pub fn forward<T: Scalar>(
    x: &Tensor<T>,
    cfg: &TextAdainConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<Tensor<T>> {
    Ok(forward_backward(x, cfg, rng, training)?.0)
}

pub fn forward_backward<T: Scalar>(
    x: &Tensor<T>,
    cfg: &TextAdainConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<(Tensor<T>, TextAdainVjp<T>)> {
    let plan = sample_plan(x.dims(), cfg, rng, training)?;
    forward_with_plan(x, cfg, &plan)
}
