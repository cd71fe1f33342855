//! Statistics transfer between a recipient and a donor tensor.
//!
//! `adain(a, b, D) = std_D(b) * (a - mean_D(a)) / std_D(a) + mean_D(b)` for any
//! kept-axis set `D`. With `D = {C}` this is classic AdaIN; with `D = {C, H}`
//! it is the per-row variant used by the windowed layer.
//!
//! The donor only ever contributes through its statistics, and those are
//! treated as constants when differentiating: [`adain_backward`] returns a
//! donor gradient that is identically zero.

use crate::statmoments::{moments_allow_zero, Groups, StatPair};
use crate::tensor::{AxisSet, Scalar, Tensor};
use crate::{Error, Result};

/// Recipient and donor of identical shape.
#[derive(Clone, Copy, Debug)]
pub struct SwapPair<'a, T> {
    pub recipient: &'a Tensor<T>,
    pub donor: &'a Tensor<T>,
}

impl<'a, T: Scalar> SwapPair<'a, T> {
    pub fn new(recipient: &'a Tensor<T>, donor: &'a Tensor<T>) -> Result<Self> {
        recipient.ensure_same_dims(donor)?;
        Ok(SwapPair { recipient, donor })
    }
}

#[derive(Clone, Debug)]
pub struct SwapGrad<T> {
    pub d_recipient: Tensor<T>,
    /// Always zero: donor statistics are detached.
    pub d_donor: Tensor<T>,
}

/// Recipient statistics, rejecting zero-variance groups when `eps == 0`.
pub(crate) fn recipient_stats<T: Scalar>(
    x: &Tensor<T>,
    kept: AxisSet,
    eps: f64,
) -> Result<StatPair> {
    let stats = moments_allow_zero(x, kept, eps)?;
    if eps == 0.0 && stats.std.data().iter().any(|&s| s == 0.0) {
        return Err(Error::ZeroVarianceWithoutEpsilon);
    }
    Ok(stats)
}

fn check_stats<T: Scalar>(x: &Tensor<T>, stats: &StatPair, what: &str) -> Result<()> {
    let want = stats.kept.stat_dims(x.dims());
    if stats.mean.dims() != want || stats.std.dims() != want {
        return Err(Error::ShapeMismatch {
            expected: format!("{what} statistics of dims {want:?}"),
            found: format!("{:?} / {:?}", stats.mean.dims(), stats.std.dims()),
        });
    }
    Ok(())
}

/// Apply precomputed statistics: `(x - mean_a) * (std_b / std_a) + mean_b`.
///
/// `own` must be the statistics of `x`; `donor` any statistics of the same
/// kept set and dims.
pub fn transfer<T: Scalar>(
    x: &Tensor<T>,
    own: &StatPair,
    donor: &StatPair,
) -> Result<Tensor<T>> {
    check_stats(x, own, "recipient")?;
    check_stats(x, donor, "donor")?;
    if own.kept != donor.kept {
        return Err(Error::InvalidArgument(format!(
            "kept sets differ: {} vs {}",
            own.kept, donor.kept
        )));
    }
    let (mu_a, sd_a) = (own.mean.data(), own.std.data());
    let (mu_b, sd_b) = (donor.mean.data(), donor.std.data());
    let scale: Vec<f64> = sd_b.iter().zip(sd_a).map(|(&b, &a)| b / a).collect();
    let mut out = x.clone();
    match Groups::new(x.dims(), own.kept) {
        Groups::Contiguous { len } => {
            for (g, chunk) in out.data_mut().chunks_exact_mut(len.max(1)).enumerate() {
                let (m, s, mb) = (mu_a[g], scale[g], mu_b[g]);
                for v in chunk {
                    *v = T::from_f64((v.to_f64() - m) * s + mb);
                }
            }
        }
        groups => {
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                let g = groups.group(i);
                *v = T::from_f64((v.to_f64() - mu_a[g]) * scale[g] + mu_b[g]);
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of [`transfer`] w.r.t. `x`, holding the donor
/// statistics constant.
///
/// Per reduction group of size `n`, with `z = (x - mean_a) / std_a`,
/// `gc = g - mean(g)`:
/// `dx = (std_b / std_a) * (gc - z * mean(gc * z))`.
pub fn transfer_backward<T: Scalar>(
    x: &Tensor<T>,
    own: &StatPair,
    donor_std: &Tensor<f64>,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_stats(x, own, "recipient")?;
    x.ensure_same_dims(upstream)?;
    if donor_std.dims() != own.std.dims() {
        return Err(Error::ShapeMismatch {
            expected: format!("donor std of dims {:?}", own.std.dims()),
            found: format!("{:?}", donor_std.dims()),
        });
    }
    let dims = x.dims();
    let n = own.kept.group_size(dims) as f64;
    let n_groups = own.mean.numel();
    let groups = Groups::new(dims, own.kept);
    let mu = own.mean.data();
    let sd = own.std.data();

    let mut mean_g = vec![0.0f64; n_groups];
    for (i, g) in upstream.data().iter().enumerate() {
        mean_g[groups.group(i)] += g.to_f64();
    }
    mean_g.iter_mut().for_each(|m| *m /= n);

    // Centering g first makes an all-constant upstream give an exact zero.
    let mut mean_gz = vec![0.0f64; n_groups];
    for (i, (xv, g)) in x.data().iter().zip(upstream.data()).enumerate() {
        let k = groups.group(i);
        let z = (xv.to_f64() - mu[k]) / sd[k];
        mean_gz[k] += (g.to_f64() - mean_g[k]) * z;
    }
    mean_gz.iter_mut().for_each(|m| *m /= n);

    let ratio: Vec<f64> = donor_std.data().iter().zip(sd).map(|(b, a)| b / a).collect();
    let mut dx = Tensor::zeros(dims);
    for (i, ((xv, g), d)) in x
        .data()
        .iter()
        .zip(upstream.data())
        .zip(dx.data_mut())
        .enumerate()
    {
        let k = groups.group(i);
        let z = (xv.to_f64() - mu[k]) / sd[k];
        let gc = g.to_f64() - mean_g[k];
        *d = T::from_f64(ratio[k] * (gc - z * mean_gz[k]));
    }
    Ok(dx)
}

/// Transfer the donor's kept-axis statistics onto the recipient.
///
/// `eps == 0` is accepted for exactness checks, but then every recipient group
/// must have nonzero variance.
pub fn adain<T: Scalar>(pair: SwapPair<'_, T>, kept: AxisSet, eps: f64) -> Result<Tensor<T>> {
    pair.recipient.ensure_same_dims(pair.donor)?;
    let own = recipient_stats(pair.recipient, kept, eps)?;
    let donor = moments_allow_zero(pair.donor, kept, eps)?;
    transfer(pair.recipient, &own, &donor)
}

/// Gradient of `sum(upstream * adain(pair))` with donor statistics detached.
pub fn adain_backward<T: Scalar>(
    pair: SwapPair<'_, T>,
    kept: AxisSet,
    eps: f64,
    upstream: &Tensor<T>,
) -> Result<SwapGrad<T>> {
    pair.recipient.ensure_same_dims(pair.donor)?;
    pair.recipient.ensure_same_dims(upstream)?;
    let own = recipient_stats(pair.recipient, kept, eps)?;
    let donor = moments_allow_zero(pair.donor, kept, eps)?;
    let d_recipient = transfer_backward(pair.recipient, &own, &donor.std, upstream)?;
    Ok(SwapGrad {
        d_recipient,
        d_donor: Tensor::zeros(pair.donor.dims()),
    })
}
