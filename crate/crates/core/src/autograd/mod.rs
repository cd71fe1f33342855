//! Minimal reverse-mode differentiation over the recognizer's op set.
//!
//! A [`Graph`] is an append-only tape: every op pushes a node whose parents
//! already exist, so the tape order is a topological order and
//! [`Graph::backward`] visits each node once in reverse. Nodes that do not
//! depend on any leaf requiring gradients are never visited.
//!
//! Detachment is structural: the AdaIN-family ops only route gradients to the
//! recipient, so a donor leaf ends up with an exactly-zero gradient.

pub mod checks;
mod finite_diff;
mod kernels;

pub use checks::{gradcheck_op, GradOp};
pub use finite_diff::{check_gradient, finite_diff, FiniteDiffReport, StepSize};

use crate::statmoments::{instance_norm, instance_norm_backward, AffineParams};
use crate::statswap::{adain, adain_backward, SwapPair};
use crate::tensor::{AxisSet, Rng, Scalar, Tensor};
use crate::textadain::{forward_backward, TextAdainConfig, TextAdainVjp};
use crate::toyocr::ctc::ctc_loss;
use crate::{Error, Result};

use kernels::ConvGeom;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    Relu {
        x: Var,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    InstanceNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    },
    TextAdain {
        x: Var,
        vjp: TextAdainVjp<T>,
    },
    Adain {
        recipient: Var,
        donor: Var,
        kept: AxisSet,
        eps: f64,
    },
    LinearFrames {
        x: Var,
        w: Var,
        b: Var,
    },
    LogSoftmax {
        x: Var,
    },
    CtcLoss {
        x: Var,
        grad: Tensor<T>,
    },
    Sum {
        x: Var,
    },
    SumSquares {
        x: Var,
    },
    Dot {
        x: Var,
        weights: Tensor<T>,
    },
    Add {
        a: Var,
        b: Var,
    },
}

impl<T> Op<T> {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::Relu { .. } => "relu",
            Op::MaxPool { .. } => "max_pool",
            Op::InstanceNorm { .. } => "instance_norm",
            Op::TextAdain { .. } => "textadain",
            Op::Adain { .. } => "adain",
            Op::LinearFrames { .. } => "linear_frames",
            Op::LogSoftmax { .. } => "log_softmax",
            Op::CtcLoss { .. } => "ctc_loss",
            Op::Sum { .. } => "sum",
            Op::SumSquares { .. } => "sum_squares",
            Op::Dot { .. } => "dot",
            Op::Add { .. } => "add",
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Per-node gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the root w.r.t. `var`; `None` when nothing flowed there.
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

/// Metadata from a CTC loss node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CtcStats {
    /// Per-item losses (`+inf` for unreachable labels).
    pub losses: Vec<f64>,
    /// Items whose label could not be aligned; they contribute nothing.
    pub unreachable: usize,
}

#[derive(Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    /// Op name of the node behind `var`.
    pub fn op_tag(&self, var: Var) -> &'static str {
        self.nodes[var.0].op.tag()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Stride-1 convolution with `pad` zero padding. `w` is
    /// `(C_out, C_in, kh, kw)`, `b` is `(1, C_out, 1, 1)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, pad: usize) -> Result<Var> {
        let [batch, c_in, h, wd] = self.value(x).dims();
        let [c_out, wc, kh, kw] = self.value(w).dims();
        if wc != c_in || self.value(b).dims() != [1, c_out, 1, 1] {
            return Err(Error::ShapeMismatch {
                expected: format!("weights (_, {c_in}, _, _) and bias (1, {c_out}, 1, 1)"),
                found: format!("{:?} and {:?}", self.value(w).dims(), self.value(b).dims()),
            });
        }
        if h + 2 * pad < kh || wd + 2 * pad < kw {
            return Err(Error::InvalidArgument("convolution kernel larger than padded input".into()));
        }
        let geom = ConvGeom {
            batch,
            c_in,
            h,
            w: wd,
            c_out,
            kh,
            kw,
            pad,
            h_out: h + 2 * pad + 1 - kh,
            w_out: wd + 2 * pad + 1 - kw,
        };
        let (out, cols) = kernels::conv2d_forward(&geom, self.value(x), self.value(w), self.value(b));
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(out, Op::Conv2d { x, w, b, geom, cols }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > T::ZERO { v } else { T::ZERO });
        let rg = self.needs(&[x]);
        self.push(out, Op::Relu { x }, rg)
    }

    /// Non-overlapping `kh x kw` max pooling (trailing rows/columns dropped).
    pub fn max_pool(&mut self, x: Var, kh: usize, kw: usize) -> Result<Var> {
        let [_, _, h, w] = self.value(x).dims();
        if kh == 0 || kw == 0 || kh > h || kw > w {
            return Err(Error::InvalidArgument(format!(
                "pool window {kh}x{kw} does not fit {h}x{w}"
            )));
        }
        let (out, argmax) = kernels::max_pool_forward(self.value(x), kh, kw);
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::MaxPool { x, argmax }, rg))
    }

    /// Affine instance normalization; `gamma`, `beta` are `(1, C, 1, 1)`.
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let params = self.affine(gamma, beta);
        let out = instance_norm(self.value(x), &params, eps)?;
        let rg = self.needs(&[x, gamma, beta]);
        Ok(self.push(out, Op::InstanceNorm { x, gamma, beta, eps }, rg))
    }

    fn affine(&self, gamma: Var, beta: Var) -> AffineParams<T> {
        AffineParams {
            gamma: self.value(gamma).data().to_vec(),
            beta: self.value(beta).data().to_vec(),
        }
    }

    /// The windowed statistics-swapping layer; draws its randomness from `rng`.
    pub fn textadain(
        &mut self,
        x: Var,
        cfg: &TextAdainConfig,
        rng: &mut Rng,
        training: bool,
    ) -> Result<Var> {
        let (out, vjp) = forward_backward(self.value(x), cfg, rng, training)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::TextAdain { x, vjp }, rg))
    }

    /// Statistics transfer; gradients reach `recipient` only.
    pub fn adain(&mut self, recipient: Var, donor: Var, kept: AxisSet, eps: f64) -> Result<Var> {
        let out = adain(SwapPair::new(self.value(recipient), self.value(donor))?, kept, eps)?;
        let rg = self.needs(&[recipient]);
        Ok(self.push(
            out,
            Op::Adain {
                recipient,
                donor,
                kept,
                eps,
            },
            rg,
        ))
    }

    /// Per-frame affine map: `x` is `(B, C, 1, T)`, `w` is `(1, 1, A, C)`,
    /// `b` is `(1, 1, 1, A)`; output is `(B, 1, T, A)`.
    pub fn linear_frames(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let [_, c, h, _] = self.value(x).dims();
        let [_, _, a, wc] = self.value(w).dims();
        if h != 1 || wc != c || self.value(b).dims() != [1, 1, 1, a] {
            return Err(Error::ShapeMismatch {
                expected: format!("frames (_, {wc}, 1, _) and bias (1, 1, 1, {a})"),
                found: format!("{:?} and {:?}", self.value(x).dims(), self.value(b).dims()),
            });
        }
        let out = kernels::linear_frames_forward(self.value(x), self.value(w), self.value(b));
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(out, Op::LinearFrames { x, w, b }, rg))
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let out = kernels::log_softmax_forward(self.value(x));
        let rg = self.needs(&[x]);
        self.push(out, Op::LogSoftmax { x }, rg)
    }

    /// Mean CTC loss over the batch. `x` holds log-probabilities
    /// `(B, 1, T, classes)`; unreachable labels are skipped and counted.
    pub fn ctc_loss(&mut self, x: Var, labels: &[Vec<usize>]) -> Result<(Var, CtcStats)> {
        let [b, one, t, classes] = self.value(x).dims();
        if one != 1 || labels.len() != b {
            return Err(Error::ShapeMismatch {
                expected: format!("(B, 1, T, A) with {} labels", labels.len()),
                found: format!("{:?}", self.value(x).dims()),
            });
        }
        let mut grad = Tensor::zeros(self.value(x).dims());
        let mut stats = CtcStats::default();
        let mut total = 0.0;
        let inv_b = 1.0 / b.max(1) as f64;
        for (i, label) in labels.iter().enumerate() {
            let out = ctc_loss(self.value(x).item(i), t, classes, label);
            stats.losses.push(out.loss);
            if !out.reachable {
                stats.unreachable += 1;
                continue;
            }
            total += out.loss;
            for (g, v) in grad.item_mut(i).iter_mut().zip(&out.grad) {
                *g = T::from_f64(v * inv_b);
            }
        }
        let value = Tensor::full([1, 1, 1, 1], T::from_f64(total * inv_b));
        let rg = self.needs(&[x]);
        Ok((self.push(value, Op::CtcLoss { x, grad }, rg), stats))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::full([1, 1, 1, 1], T::from_f64(self.value(x).sum()));
        let rg = self.needs(&[x]);
        self.push(value, Op::Sum { x }, rg)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|v| v.to_f64() * v.to_f64()).sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::full([1, 1, 1, 1], T::from_f64(s)), Op::SumSquares { x }, rg)
    }

    /// `sum(x * weights)` with constant weights.
    pub fn dot(&mut self, x: Var, weights: Tensor<T>) -> Result<Var> {
        self.value(x).ensure_same_dims(&weights)?;
        let s: f64 = self
            .value(x)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a.to_f64() * b.to_f64())
            .sum();
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::full([1, 1, 1, 1], T::from_f64(s)), Op::Dot { x, weights }, rg))
    }

    /// Elementwise `a + b`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let root_dims = self.value(root).dims();
        if self.value(root).numel() != 1 {
            return Err(Error::NonScalarRoot(root_dims));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_dims, T::ONE));

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let acc = |var: Var, delta: Tensor<T>, grads: &mut Vec<Option<Tensor<T>>>| {
                if !self.nodes[var.0].requires_grad {
                    return;
                }
                match grads[var.0].as_mut() {
                    Some(existing) => existing
                        .add_assign(&delta)
                        .expect("gradient shape matches node shape"),
                    None => grads[var.0] = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Conv2d { x, w, b, geom, cols } => {
                    let want_input = self.nodes[x.0].requires_grad;
                    let (dx, dw, db) =
                        kernels::conv2d_backward(geom, cols, self.value(*w), &g, want_input);
                    if let Some(dx) = dx {
                        acc(*x, dx, &mut grads);
                    }
                    acc(*w, dw, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::Relu { x } => {
                    let xv = self.value(*x);
                    let d = g.zip_map(xv, |gv, v| if v > T::ZERO { gv } else { T::ZERO })?;
                    acc(*x, d, &mut grads);
                }
                Op::MaxPool { x, argmax } => {
                    let mut d = Tensor::zeros(self.value(*x).dims());
                    for (&src, &gv) in argmax.iter().zip(g.data()) {
                        d.data_mut()[src] += gv;
                    }
                    acc(*x, d, &mut grads);
                }
                Op::InstanceNorm { x, gamma, beta, eps } => {
                    let params = self.affine(*gamma, *beta);
                    let (dx, dp) = instance_norm_backward(self.value(*x), &params, *eps, &g)?;
                    let c = params.gamma.len();
                    acc(*x, dx, &mut grads);
                    acc(*gamma, Tensor::from_vec([1, c, 1, 1], dp.gamma)?, &mut grads);
                    acc(*beta, Tensor::from_vec([1, c, 1, 1], dp.beta)?, &mut grads);
                }
                Op::TextAdain { x, vjp } => {
                    acc(*x, vjp.apply(&g)?, &mut grads);
                }
                Op::Adain {
                    recipient,
                    donor,
                    kept,
                    eps,
                } => {
                    let pair = SwapPair::new(self.value(*recipient), self.value(*donor))?;
                    let sg = adain_backward(pair, *kept, *eps, &g)?;
                    acc(*recipient, sg.d_recipient, &mut grads);
                    acc(*donor, sg.d_donor, &mut grads);
                }
                Op::LinearFrames { x, w, b } => {
                    let (dx, dw, db) =
                        kernels::linear_frames_backward(self.value(*x), self.value(*w), &g);
                    acc(*x, dx, &mut grads);
                    acc(*w, dw, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::LogSoftmax { x } => {
                    acc(*x, kernels::log_softmax_backward(&node.value, &g), &mut grads);
                }
                Op::CtcLoss { x, grad } => {
                    acc(*x, grad.scale(g.data()[0]), &mut grads);
                }
                Op::Sum { x } => {
                    acc(*x, Tensor::full(self.value(*x).dims(), g.data()[0]), &mut grads);
                }
                Op::SumSquares { x } => {
                    let s = g.data()[0] + g.data()[0];
                    acc(*x, self.value(*x).scale(s), &mut grads);
                }
                Op::Dot { x, weights } => {
                    acc(*x, weights.scale(g.data()[0]), &mut grads);
                }
                Op::Add { a, b } => {
                    acc(*a, g.clone(), &mut grads);
                    acc(*b, g, &mut grads);
                }
            }
        }
        Ok(Gradients { grads })
    }
}
