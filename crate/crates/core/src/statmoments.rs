//! Kept-axis moments and affine instance normalization.
//!
//! For a kept set `D`, every statistic is indexed by the batch axis plus the
//! axes in `D`, and is computed over the remaining axes. The standard deviation
//! is always epsilon-inflated inside the square root, `sqrt(var + eps)`, with
//! the population (divide-by-count) variance.

use crate::tensor::{AxisSet, Scalar, Tensor};
use crate::{Error, Result};

/// Library default epsilon.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Per-group mean and epsilon-inflated standard deviation.
///
/// Both tensors have the statistic dims of their kept set (reduced axes have
/// extent 1). Statistics are kept in 64-bit whatever the input precision.
#[derive(Clone, Debug)]
pub struct StatPair {
    pub mean: Tensor<f64>,
    pub std: Tensor<f64>,
    pub eps: f64,
    pub kept: AxisSet,
}

impl StatPair {
    /// Permute the statistics along the batch axis: entry `i` of the result is
    /// entry `perm[i]` of `self`.
    pub fn permute_batch(&self, perm: &[usize]) -> Result<Self> {
        Ok(StatPair {
            mean: gather_batch(&self.mean, perm)?,
            std: gather_batch(&self.std, perm)?,
            eps: self.eps,
            kept: self.kept,
        })
    }
}

pub(crate) fn gather_batch<T: Scalar>(x: &Tensor<T>, perm: &[usize]) -> Result<Tensor<T>> {
    let [b, c, h, w] = x.dims();
    if perm.len() != b || perm.iter().any(|&p| p >= b) {
        return Err(Error::InvalidArgument(format!(
            "batch permutation of length {} for batch {}",
            perm.len(),
            b
        )));
    }
    let mut out = Vec::with_capacity(x.numel());
    for &p in perm {
        out.extend_from_slice(x.item(p));
    }
    Tensor::from_vec([b, c, h, w], out)
}

/// Maps flat element offsets to statistic-group offsets.
pub(crate) enum Groups {
    /// The reduced axes form a suffix of the layout, so each group is one
    /// contiguous run of `len` elements.
    Contiguous { len: usize },
    Indexed(Vec<usize>),
}

impl Groups {
    pub(crate) fn new(dims: [usize; 4], kept: AxisSet) -> Self {
        let [_, c, h, w] = dims;
        if kept == AxisSet::CH {
            return Groups::Contiguous { len: w };
        }
        if kept == AxisSet::C {
            return Groups::Contiguous { len: h * w };
        }
        let index = crate::tensor::group_index_fn(dims, kept);
        let mut ids = Vec::with_capacity(dims.iter().product());
        for b in 0..dims[0] {
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        ids.push(index(b, ci, hi, wi));
                    }
                }
            }
        }
        Groups::Indexed(ids)
    }

    #[inline]
    pub(crate) fn group(&self, i: usize) -> usize {
        match self {
            Groups::Contiguous { len } => i / len,
            Groups::Indexed(ids) => ids[i],
        }
    }
}

fn validate_eps(eps: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { eps >= 0.0 } else { eps > 0.0 };
    if ok && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(eps))
    }
}

/// Mean and `sqrt(population variance + eps)` over the axes not in `kept`.
pub fn moments<T: Scalar>(x: &Tensor<T>, kept: AxisSet, eps: f64) -> Result<StatPair> {
    validate_eps(eps, false)?;
    moments_with(x, kept, eps)
}

/// Like [`moments`] but accepts `eps == 0`, used by exactness checks.
pub(crate) fn moments_allow_zero<T: Scalar>(
    x: &Tensor<T>,
    kept: AxisSet,
    eps: f64,
) -> Result<StatPair> {
    validate_eps(eps, true)?;
    moments_with(x, kept, eps)
}

fn moments_with<T: Scalar>(x: &Tensor<T>, kept: AxisSet, eps: f64) -> Result<StatPair> {
    kept.ensure_non_empty()?;
    let n = kept.group_size(x.dims());
    if x.is_empty() || n == 0 {
        return Err(Error::EmptyReduction);
    }
    let (mean, var) = mean_var_f64(x, kept);
    let sd = kept.stat_dims(x.dims());
    let std = var.iter().map(|&v| (v + eps).sqrt()).collect();
    Ok(StatPair {
        mean: Tensor::from_vec(sd, mean)?,
        std: Tensor::from_vec(sd, std)?,
        eps,
        kept,
    })
}

/// Two-pass per-group mean and population variance in 64-bit.
pub(crate) fn mean_var_f64<T: Scalar>(x: &Tensor<T>, kept: AxisSet) -> (Vec<f64>, Vec<f64>) {
    let n = kept.group_size(x.dims()) as f64;
    let groups = Groups::new(x.dims(), kept);
    let n_groups: usize = kept.stat_dims(x.dims()).iter().product();
    let mut mean = vec![0.0f64; n_groups];
    for (i, v) in x.data().iter().enumerate() {
        mean[groups.group(i)] += v.to_f64();
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; n_groups];
    for (i, v) in x.data().iter().enumerate() {
        let g = groups.group(i);
        let d = v.to_f64() - mean[g];
        var[g] += d * d;
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

/// `(x - mean) / std` with kept-axis statistics.
pub fn normalize<T: Scalar>(x: &Tensor<T>, kept: AxisSet, eps: f64) -> Result<Tensor<T>> {
    let stats = moments(x, kept, eps)?;
    let groups = Groups::new(x.dims(), kept);
    let mut out = x.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let g = groups.group(i);
        *v = T::from_f64((v.to_f64() - stats.mean.data()[g]) / stats.std.data()[g]);
    }
    Ok(out)
}

/// Learned per-channel scale and shift.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> AffineParams<T> {
    pub fn identity(channels: usize) -> Self {
        AffineParams {
            gamma: vec![T::ONE; channels],
            beta: vec![T::ZERO; channels],
        }
    }

    fn check(&self, channels: usize) -> Result<()> {
        if self.gamma.len() != channels || self.beta.len() != channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{channels} affine parameters"),
                found: format!("gamma {}, beta {}", self.gamma.len(), self.beta.len()),
            });
        }
        Ok(())
    }
}

/// `gamma_c * (x - mu) / sigma + beta_c`, statistics over `(H, W)` per `(b, c)`.
pub fn instance_norm<T: Scalar>(
    x: &Tensor<T>,
    params: &AffineParams<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let [_, c, h, w] = x.dims();
    params.check(c)?;
    let stats = moments(x, AxisSet::C, eps)?;
    let hw = h * w;
    let mut out = x.clone();
    for (g, chunk) in out.data_mut().chunks_exact_mut(hw.max(1)).enumerate() {
        let ch = g % c;
        let (mu, sigma) = (stats.mean.data()[g], stats.std.data()[g]);
        let (gamma, beta) = (params.gamma[ch].to_f64(), params.beta[ch].to_f64());
        for v in chunk {
            *v = T::from_f64(gamma * ((v.to_f64() - mu) / sigma) + beta);
        }
    }
    Ok(out)
}

/// Gradients of [`instance_norm`] w.r.t. input, gamma and beta.
pub fn instance_norm_backward<T: Scalar>(
    x: &Tensor<T>,
    params: &AffineParams<T>,
    eps: f64,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, AffineParams<T>)> {
    let [_, c, h, w] = x.dims();
    params.check(c)?;
    x.ensure_same_dims(upstream)?;
    let stats = moments(x, AxisSet::C, eps)?;
    let hw = (h * w).max(1);
    let n = (h * w) as f64;
    let mut dx = Tensor::zeros(x.dims());
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    let xs = x.data().chunks_exact(hw);
    let gs = upstream.data().chunks_exact(hw);
    for (g, ((xc, gc), dc)) in xs.zip(gs).zip(dx.data_mut().chunks_exact_mut(hw)).enumerate() {
        let ch = g % c;
        let mu = stats.mean.data()[g];
        let sigma = stats.std.data()[g];
        let mut sum_g = 0.0;
        let mut sum_gz = 0.0;
        for (&xv, &gv) in xc.iter().zip(gc) {
            let z = (xv.to_f64() - mu) / sigma;
            sum_g += gv.to_f64();
            sum_gz += gv.to_f64() * z;
        }
        dgamma[ch] += sum_gz;
        dbeta[ch] += sum_g;
        let mean_g = sum_g / n;
        let mean_gz = sum_gz / n;
        let scale = params.gamma[ch].to_f64() / sigma;
        for ((&xv, &gv), d) in xc.iter().zip(gc).zip(dc.iter_mut()) {
            let z = (xv.to_f64() - mu) / sigma;
            *d = T::from_f64(scale * (gv.to_f64() - mean_g - z * mean_gz));
        }
    }
    Ok((
        dx,
        AffineParams {
            gamma: dgamma.into_iter().map(T::from_f64).collect(),
            beta: dbeta.into_iter().map(T::from_f64).collect(),
        },
    ))
}
