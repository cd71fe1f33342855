//! Ready-made gradient checks: each differentiable op of the tape, evaluated
//! in 64-bit on seeded random inputs and compared with central differences.

use std::fmt;
use std::str::FromStr;

use super::{finite_diff, FiniteDiffReport, Graph, StepSize, Var};
use crate::statmoments::DEFAULT_EPS;
use crate::tensor::{AxisSet, Rng, Tensor};
use crate::textadain::{forward_with_plan, sample_plan, split, DonorPlan, TextAdainConfig};
use crate::{Error, Result};

/// Step used for the 1e-6 checks. Narrow windows give the swap a small
/// curvature scale, so the three-point rule's O(h^2) truncation error can reach
/// 1e-6 at the default step, while shrinking the step lets round-off through
/// instead. The O(h^4) stencil at the default step keeps both near 1e-8.
pub const TIGHT: StepSize = StepSize::FivePoint { rel: 1e-4, floor: 1e-6 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradOp {
    Adain,
    TextAdain,
    InstanceNorm,
    Conv2d,
    Relu,
    MaxPool,
    LinearFrames,
    LogSoftmax,
    Ctc,
}

impl GradOp {
    pub const ALL: [GradOp; 9] = [
        GradOp::Adain,
        GradOp::TextAdain,
        GradOp::InstanceNorm,
        GradOp::Conv2d,
        GradOp::Relu,
        GradOp::MaxPool,
        GradOp::LinearFrames,
        GradOp::LogSoftmax,
        GradOp::Ctc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GradOp::Adain => "adain",
            GradOp::TextAdain => "textadain",
            GradOp::InstanceNorm => "instance_norm",
            GradOp::Conv2d => "conv2d",
            GradOp::Relu => "relu",
            GradOp::MaxPool => "max_pool",
            GradOp::LinearFrames => "linear_frames",
            GradOp::LogSoftmax => "log_softmax",
            GradOp::Ctc => "ctc",
        }
    }
}

impl FromStr for GradOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|o| o.name()).collect();
                Error::InvalidArgument(format!("unknown op {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

impl fmt::Display for GradOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything random about a check except the input itself, fixed per seed so
/// the function seen by the finite differences is the one differentiated.
struct Fixture {
    op: GradOp,
    seed: u64,
    aux: Vec<Tensor<f64>>,
    weights: Tensor<f64>,
    labels: Vec<Vec<usize>>,
    /// TextAdaIN only: the sampled donors materialized from the unperturbed
    /// input, so perturbing `x` cannot move the donor statistics.
    frozen: Option<DonorPlan<f64>>,
}

impl Fixture {
    fn new(op: GradOp, x0: &Tensor<f64>, seed: u64) -> Result<Self> {
        let dims = x0.dims();
        let [b, c, h, w] = dims;
        let mut rng = Rng::with_stream(seed, 1);
        let mut aux = Vec::new();
        let mut labels = Vec::new();
        let out_dims = match op {
            GradOp::Adain => {
                aux.push(Tensor::randn(dims, &mut rng, 1.5, 0.3));
                dims
            }
            GradOp::InstanceNorm => {
                aux.push(Tensor::randn([1, c, 1, 1], &mut rng, 1.0, 1.0));
                aux.push(Tensor::randn([1, c, 1, 1], &mut rng, 1.0, 0.0));
                dims
            }
            GradOp::Conv2d => {
                let c_out = 3;
                aux.push(Tensor::randn([c_out, c, 3, 3], &mut rng, 0.5, 0.0));
                aux.push(Tensor::randn([1, c_out, 1, 1], &mut rng, 0.5, 0.0));
                [b, c_out, h, w]
            }
            GradOp::MaxPool => {
                if h < 2 || w < 2 {
                    return Err(Error::InvalidArgument("max_pool check needs H, W >= 2".into()));
                }
                [b, c, h / 2, w / 2]
            }
            GradOp::LinearFrames => {
                if h != 1 {
                    return Err(Error::InvalidArgument("linear_frames expects H = 1".into()));
                }
                let classes = 5;
                aux.push(Tensor::randn([1, 1, classes, c], &mut rng, 0.5, 0.0));
                aux.push(Tensor::randn([1, 1, 1, classes], &mut rng, 0.5, 0.0));
                [b, 1, w, classes]
            }
            GradOp::Ctc => {
                if c != 1 || w < 2 {
                    return Err(Error::InvalidArgument(
                        "ctc expects logits shaped (B, 1, T, classes) with classes >= 2".into(),
                    ));
                }
                for _ in 0..b {
                    let len = rng.below(h / 2 + 1);
                    labels.push((0..len).map(|_| 1 + rng.below(w - 1)).collect());
                }
                [1, 1, 1, 1]
            }
            GradOp::TextAdain | GradOp::Relu | GradOp::LogSoftmax => dims,
        };
        let weights = Tensor::randn(out_dims, &mut rng, 1.0, 0.0);
        let frozen = match op {
            GradOp::TextAdain => Some(Self::freeze(x0, seed)?),
            _ => None,
        };
        Ok(Fixture {
            op,
            seed,
            aux,
            weights,
            labels,
            frozen,
        })
    }

    fn freeze(x0: &Tensor<f64>, seed: u64) -> Result<DonorPlan<f64>> {
        let cfg = Self::textadain_cfg();
        let plan = sample_plan(x0.dims(), &cfg, &mut Rng::with_stream(seed, 2), true)?;
        Ok(match plan {
            DonorPlan::Permutation(perm) => {
                let el = split(x0, cfg.k)?.elements;
                let data = perm.iter().flat_map(|&j| el.item(j).iter().copied()).collect();
                DonorPlan::Synthetic(Tensor::from_vec(el.dims(), data)?)
            }
            other => other,
        })
    }

    /// Function value for the finite differences.
    fn value(&self, t: &Tensor<f64>) -> Result<f64> {
        if let Some(plan) = &self.frozen {
            let out = forward_with_plan(t, &Self::textadain_cfg(), plan)?.0;
            return Ok(out.data().iter().zip(self.weights.data()).map(|(a, b)| a * b).sum());
        }
        let mut g = Graph::new();
        let x = g.constant(t.clone());
        let r = self.build(&mut g, x)?;
        Ok(g.value(r).data()[0])
    }

    fn textadain_cfg() -> TextAdainConfig {
        TextAdainConfig {
            p: 1.0,
            kept: AxisSet::CH,
            ..TextAdainConfig::default()
        }
    }

    /// Scalar `sum(op(x) * weights)` (or the CTC loss itself).
    fn build(&self, g: &mut Graph<f64>, x: Var) -> Result<Var> {
        let out = match self.op {
            GradOp::Adain => {
                let donor = g.constant(self.aux[0].clone());
                g.adain(x, donor, AxisSet::CH, DEFAULT_EPS)?
            }
            GradOp::TextAdain => {
                let mut rng = Rng::with_stream(self.seed, 2);
                g.textadain(x, &Self::textadain_cfg(), &mut rng, true)?
            }
            GradOp::InstanceNorm => {
                let gamma = g.constant(self.aux[0].clone());
                let beta = g.constant(self.aux[1].clone());
                g.instance_norm(x, gamma, beta, DEFAULT_EPS)?
            }
            GradOp::Conv2d => {
                let w = g.constant(self.aux[0].clone());
                let b = g.constant(self.aux[1].clone());
                g.conv2d(x, w, b, 1)?
            }
            GradOp::Relu => g.relu(x),
            GradOp::MaxPool => g.max_pool(x, 2, 2)?,
            GradOp::LinearFrames => {
                let w = g.constant(self.aux[0].clone());
                let b = g.constant(self.aux[1].clone());
                g.linear_frames(x, w, b)?
            }
            GradOp::LogSoftmax => g.log_softmax(x),
            GradOp::Ctc => {
                let lp = g.log_softmax(x);
                return Ok(g.ctc_loss(lp, &self.labels)?.0);
            }
        };
        g.dot(out, self.weights.clone())
    }
}

/// Compare the tape gradient of op `op` at a seeded random input of shape
/// `dims` with central finite differences.
///
/// For TextAdaIN the reference function holds the donor statistics at their
/// unperturbed values, which is exactly what the backward pass assumes.
pub fn gradcheck_op(op: GradOp, dims: [usize; 4], seed: u64, step: StepSize) -> Result<FiniteDiffReport> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!("shape {dims:?} has a zero extent")));
    }
    let x0: Tensor<f64> = Tensor::randn(dims, &mut Rng::with_stream(seed, 0), 1.0, 0.2);
    let fixture = Fixture::new(op, &x0, seed)?;
    let mut g = Graph::new();
    let x = g.leaf(x0.clone());
    let root = fixture.build(&mut g, x)?;
    let analytic = g
        .backward(root)?
        .take(x)
        .unwrap_or_else(|| Tensor::zeros(dims));
    let mut failure = None;
    let numeric = finite_diff(
        |t| match fixture.value(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &x0,
        step,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    FiniteDiffReport::compare(&analytic, numeric?, step)
}
