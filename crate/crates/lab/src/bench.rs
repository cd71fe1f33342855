//! Wall-clock microbenchmarks of the statistics kernels against a plain copy.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use textadain::statmoments::{instance_norm, AffineParams, DEFAULT_EPS};
use textadain::statswap::{adain, SwapPair};
use textadain::textadain::{self as layer, TextAdainConfig};
use textadain::{AxisSet, Error, Result, Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchOp {
    /// TextAdaIN forward with the swap always applied.
    TextAdain,
    /// TextAdaIN forward with p = 0: the layer's pass-through path.
    Identity,
    Adain,
    InstanceNorm,
    /// `memcpy` of the input into a preallocated buffer.
    Copy,
}

impl BenchOp {
    pub const ALL: [BenchOp; 5] = [
        BenchOp::TextAdain,
        BenchOp::Identity,
        BenchOp::Adain,
        BenchOp::InstanceNorm,
        BenchOp::Copy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BenchOp::TextAdain => "textadain",
            BenchOp::Identity => "identity",
            BenchOp::Adain => "adain",
            BenchOp::InstanceNorm => "instance_norm",
            BenchOp::Copy => "copy",
        }
    }
}

impl FromStr for BenchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s.trim()).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|o| o.name()).collect();
            Error::InvalidArgument(format!("unknown bench op {s:?} (expected one of {})", names.join(", ")))
        })
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub median_s: f64,
    pub p95_s: f64,
    pub elements_per_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub op: BenchOp,
    pub dims: [usize; 4],
    pub reps: usize,
    pub timing: Timing,
    /// The copy baseline at the same shape and repetitions.
    pub copy: Timing,
}

impl BenchReport {
    /// Op throughput over copy throughput.
    pub fn relative_throughput(&self) -> f64 {
        self.timing.elements_per_s / self.copy.elements_per_s
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [b, c, h, w] = self.dims;
        writeln!(f, "op={} shape={b}x{c}x{h}x{w} reps={}", self.op, self.reps)?;
        for (label, t) in [(self.op.name(), &self.timing), ("copy", &self.copy)] {
            writeln!(
                f,
                "{label:>14}: median {:.3e} s  p95 {:.3e} s  {:.3e} elements/s",
                t.median_s, t.p95_s, t.elements_per_s
            )?;
        }
        write!(f, "relative throughput vs copy: {:.3}", self.relative_throughput())
    }
}

/// Nearest-rank percentile of sorted `xs`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn time_reps(reps: usize, numel: usize, mut f: impl FnMut() -> Result<()>) -> Result<Timing> {
    f()?;
    let mut secs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        f()?;
        secs.push(t0.elapsed().as_secs_f64());
    }
    secs.sort_by(f64::total_cmp);
    let median_s = percentile(&secs, 0.5);
    Ok(Timing {
        median_s,
        p95_s: percentile(&secs, 0.95),
        elements_per_s: numel as f64 / median_s.max(1e-12),
    })
}

fn time_op(op: BenchOp, x: &Tensor<f32>, donor: &Tensor<f32>, reps: usize) -> Result<Timing> {
    let n = x.numel();
    let mut rng = Rng::new(0);
    match op {
        BenchOp::TextAdain | BenchOp::Identity => {
            let cfg = TextAdainConfig {
                p: if op == BenchOp::TextAdain { 1.0 } else { 0.0 },
                ..TextAdainConfig::default()
            };
            time_reps(reps, n, || {
                black_box(layer::forward(black_box(x), &cfg, &mut rng, true)?);
                Ok(())
            })
        }
        BenchOp::Adain => time_reps(reps, n, || {
            black_box(adain(SwapPair::new(x, donor)?, AxisSet::CH, DEFAULT_EPS)?);
            Ok(())
        }),
        BenchOp::InstanceNorm => {
            let params = AffineParams::identity(x.dims()[1]);
            time_reps(reps, n, || {
                black_box(instance_norm(black_box(x), &params, DEFAULT_EPS)?);
                Ok(())
            })
        }
        BenchOp::Copy => {
            let mut buf = vec![0f32; n];
            time_reps(reps, n, || {
                buf.copy_from_slice(black_box(x.data()));
                black_box(&buf);
                Ok(())
            })
        }
    }
}

/// Time `reps` runs of `op` on a random `dims` batch (after one warm-up run),
/// alongside a copy of the same tensor.
pub fn bench(op: BenchOp, dims: [usize; 4], reps: usize) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::InvalidArgument("repetitions must be positive".into()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!("shape {dims:?} has a zero extent")));
    }
    let mut rng = Rng::new(1);
    let x: Tensor<f32> = Tensor::randn(dims, &mut rng, 1.0, 0.0);
    let donor: Tensor<f32> = Tensor::randn(dims, &mut rng, 2.0, 0.5);
    Ok(BenchReport {
        op,
        dims,
        reps,
        timing: time_op(op, &x, &donor, reps)?,
        copy: time_op(BenchOp::Copy, &x, &donor, reps)?,
    })
}
