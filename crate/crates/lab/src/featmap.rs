//! First-principal-component intensity maps of convolutional features.

use textadain::corruptions::Image;
use textadain::{Error, Result, Tensor};

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 1000;

/// An `H x W` map with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl IntensityMap {
    pub fn to_image(&self) -> Image {
        Image::new(self.height, self.width, 1, self.data.clone()).expect("map values lie in [0, 1]")
    }
}

/// Leading eigenvector of a symmetric PSD matrix by power iteration, or
/// `None` when the matrix is zero.
///
/// The start vector is the column with the largest diagonal entry, which lies
/// in the matrix's range and so cannot be orthogonal to every top eigenvector.
/// The sign is fixed so the loadings sum to a positive value (ties broken by
/// the largest-magnitude loading), which does not depend on channel order.
pub fn leading_eigenvector(cov: &[f64], n: usize) -> Option<Vec<f64>> {
    let start = (0..n).max_by(|&a, &b| cov[a * n + a].total_cmp(&cov[b * n + b]))?;
    if cov[start * n + start] <= 0.0 {
        return None;
    }
    let mut v: Vec<f64> = (0..n).map(|i| cov[i * n + start]).collect();
    normalize(&mut v);
    for _ in 0..POWER_MAX_ITERS {
        let mut next: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| cov[i * n + j] * v[j]).sum())
            .collect();
        if normalize(&mut next) == 0.0 {
            return None;
        }
        // Compare up to sign so a negative eigenvalue cannot stall the test.
        let same: f64 = v.iter().zip(&next).map(|(a, b)| a * b).sum();
        if same < 0.0 {
            next.iter_mut().for_each(|x| *x = -*x);
        }
        let delta = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < POWER_TOL {
            break;
        }
    }
    let sum: f64 = v.iter().sum();
    let flip = if sum.abs() > 1e-12 {
        sum < 0.0
    } else {
        let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        big < 0.0
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Some(v)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Project each spatial location's channel vector of item `b` onto the first
/// principal component and min-max normalize. Constant input gives zeros.
pub fn intensity_map(features: &Tensor<f32>, b: usize) -> Result<IntensityMap> {
    let [batch, c, h, w] = features.dims();
    if b >= batch || c == 0 || h * w == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot map item {b} of features {:?}",
            features.dims()
        )));
    }
    let n = h * w;
    let item = features.item(b);
    let means: Vec<f64> = (0..c)
        .map(|ch| item[ch * n..(ch + 1) * n].iter().map(|&v| v as f64).sum::<f64>() / n as f64)
        .collect();
    let centered = |ch: usize, l: usize| item[ch * n + l] as f64 - means[ch];
    let mut cov = vec![0.0; c * c];
    for i in 0..c {
        for j in i..c {
            let s = (0..n).map(|l| centered(i, l) * centered(j, l)).sum::<f64>() / n as f64;
            cov[i * c + j] = s;
            cov[j * c + i] = s;
        }
    }
    let zeros = IntensityMap {
        height: h,
        width: w,
        data: vec![0.0; n],
    };
    let Some(pc) = leading_eigenvector(&cov, c) else {
        return Ok(zeros);
    };
    let scores: Vec<f64> = (0..n)
        .map(|l| (0..c).map(|ch| pc[ch] * centered(ch, l)).sum())
        .collect();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        return Ok(zeros);
    }
    Ok(IntensityMap {
        height: h,
        width: w,
        data: scores.iter().map(|&s| ((s - lo) / range) as f32).collect(),
    })
}
