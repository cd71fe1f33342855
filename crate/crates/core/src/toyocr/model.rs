//! The 4-conv CTC recognizer.
//!
//! Each stage is `conv3x3 -> instance norm (affine) -> ReLU -> TextAdaIN ->
//! max pool`. Pools `2x2, 2x2, 2x1, 4x1` take a `32 x 64` image to a `1 x 16`
//! map, i.e. 16 frames of 64 channels, which a per-frame linear layer maps to
//! log-probabilities over the alphabet plus blank.

use super::ctc::greedy_decode;
use super::glyphs::{self, IMAGE_HEIGHT, IMAGE_WIDTH};
use crate::autograd::{Graph, Var};
use crate::corruptions::Image;
use crate::statmoments::DEFAULT_EPS;
use crate::tensor::{Rng, Tensor};
use crate::textadain::TextAdainConfig;
use crate::{Error, Result};

pub const CHANNELS: [usize; 4] = [16, 32, 48, 64];
pub const POOLS: [(usize, usize); 4] = [(2, 2), (2, 2), (2, 1), (4, 1)];
/// Frames emitted per image.
pub const FRAMES: usize = IMAGE_WIDTH / 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: Vec<Param>,
}

/// How the TextAdaIN slots behave in a forward pass.
pub enum Layers<'a> {
    /// No TextAdaIN layers at all.
    Removed,
    Present {
        cfg: &'a TextAdainConfig,
        rng: &'a mut Rng,
        training: bool,
    },
}

/// Vars of one forward pass: parameters in `Model::params` order, then the
/// `(B, 1, T, classes)` log-probabilities.
pub struct Forward {
    pub params: Vec<Var>,
    pub logprobs: Var,
}

/// Expected parameter names and dims, in storage order.
pub fn param_layout() -> Vec<(String, [usize; 4])> {
    let mut out = Vec::new();
    let mut c_in = 1;
    for (i, &c) in CHANNELS.iter().enumerate() {
        out.push((format!("conv{i}.weight"), [c, c_in, 3, 3]));
        out.push((format!("conv{i}.bias"), [1, c, 1, 1]));
        out.push((format!("norm{i}.gamma"), [1, c, 1, 1]));
        out.push((format!("norm{i}.beta"), [1, c, 1, 1]));
        c_in = c;
    }
    let classes = glyphs::num_classes();
    out.push(("head.weight".into(), [1, 1, classes, c_in]));
    out.push(("head.bias".into(), [1, 1, 1, classes]));
    out
}

impl Model {
    /// He-normal convolutions, unit/zero norm affine, `1/sqrt(fan_in)` head.
    pub fn init(rng: &mut Rng) -> Self {
        let params = param_layout()
            .into_iter()
            .map(|(name, dims)| {
                let value = if name.ends_with(".weight") {
                    let fan_in = dims[1] * dims[2] * dims[3];
                    let gain = if name.starts_with("conv") { 2.0 } else { 1.0 };
                    Tensor::randn(dims, rng, (gain / fan_in as f64).sqrt(), 0.0)
                } else if name.ends_with(".gamma") {
                    Tensor::full(dims, 1.0)
                } else {
                    Tensor::zeros(dims)
                };
                Param { name, value }
            })
            .collect();
        Model { params }
    }

    /// Build from named tensors, checking names and dims against the layout.
    pub fn from_params(params: Vec<Param>) -> Result<Self> {
        let layout = param_layout();
        if params.len() != layout.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for (p, (name, dims)) in params.iter().zip(&layout) {
            if &p.name != name || p.value.dims() != *dims {
                return Err(Error::Checkpoint(format!(
                    "expected {name} {dims:?}, found {} {:?}",
                    p.name,
                    p.value.dims()
                )));
            }
        }
        Ok(Model { params })
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Record a forward pass of `input` (`(B, 1, 32, 64)`) on `g`. Parameters
    /// are leaves when `trainable`, constants otherwise.
    pub fn forward(
        &self,
        g: &mut Graph<f32>,
        input: Tensor<f32>,
        mut layers: Layers<'_>,
        trainable: bool,
    ) -> Result<Forward> {
        let [_, c, h, w] = input.dims();
        if (c, h, w) != (1, IMAGE_HEIGHT, IMAGE_WIDTH) {
            return Err(Error::ShapeMismatch {
                expected: format!("(B, 1, {IMAGE_HEIGHT}, {IMAGE_WIDTH})"),
                found: format!("{:?}", input.dims()),
            });
        }
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    g.leaf(p.value.clone())
                } else {
                    g.constant(p.value.clone())
                }
            })
            .collect();
        let mut x = g.constant(input);
        for (i, &(ph, pw)) in POOLS.iter().enumerate() {
            let [wt, b, gamma, beta] = [0, 1, 2, 3].map(|k| params[4 * i + k]);
            x = g.conv2d(x, wt, b, 1)?;
            x = g.instance_norm(x, gamma, beta, DEFAULT_EPS)?;
            x = g.relu(x);
            if let Layers::Present { cfg, rng, training } = &mut layers {
                x = g.textadain(x, cfg, rng, *training)?;
            }
            x = g.max_pool(x, ph, pw)?;
        }
        let n = params.len();
        let logits = g.linear_frames(x, params[n - 2], params[n - 1])?;
        let logprobs = g.log_softmax(logits);
        Ok(Forward { params, logprobs })
    }

    /// Per-frame log-probabilities `(B, 1, T, classes)` in inference mode.
    pub fn logprobs(&self, input: Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, input, Layers::Removed, false)?;
        Ok(g.value(f.logprobs).clone())
    }

    /// Raw output of convolution `layer` (before its normalization) in
    /// inference mode, shape `(B, CHANNELS[layer], h, w)`.
    pub fn conv_features(&self, input: Tensor<f32>, layer: usize) -> Result<Tensor<f32>> {
        if layer >= CHANNELS.len() {
            return Err(Error::InvalidArgument(format!("no conv layer {layer}")));
        }
        let mut g = Graph::new();
        let p: Vec<Var> = self.params.iter().map(|p| g.constant(p.value.clone())).collect();
        let mut x = g.constant(input);
        for (i, &(ph, pw)) in POOLS.iter().enumerate() {
            x = g.conv2d(x, p[4 * i], p[4 * i + 1], 1)?;
            if i == layer {
                break;
            }
            x = g.instance_norm(x, p[4 * i + 2], p[4 * i + 3], DEFAULT_EPS)?;
            x = g.relu(x);
            x = g.max_pool(x, ph, pw)?;
        }
        Ok(g.value(x).clone())
    }

    /// Greedy transcriptions, processed in chunks of `chunk` images.
    pub fn predict(&self, images: &[&Image], chunk: usize) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(images.len());
        for part in images.chunks(chunk.max(1)) {
            let lp = self.logprobs(glyphs::batch_tensor(part)?)?;
            out.extend(decode_batch(&lp));
        }
        Ok(out)
    }
}

/// Greedy-decode every item of a `(B, 1, T, classes)` log-probability tensor.
pub fn decode_batch(logprobs: &Tensor<f32>) -> Vec<String> {
    let [b, _, t, classes] = logprobs.dims();
    (0..b)
        .map(|i| glyphs::decode(&greedy_decode(logprobs.item(i), t, classes)))
        .collect()
}
