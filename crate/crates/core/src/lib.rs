//! Feature-statistics swapping for sequence text recognizers.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: rank-4 container, seeded RNG and the `FT4` file format.
//! - [`statmoments`]: kept-axis mean/std and affine instance normalization.
//! - [`statswap`]: the AdaIN family over any kept-axis set, with a closed-form
//!   backward pass in which donor statistics are constants.
//! - [`textadain`]: the windowed, permuted layer built on [`statswap`].
//! - [`autograd`]: a small reverse-mode tape over the recognizer's op set and
//!   a central finite-difference verifier.
//! - [`corruptions`]: seeded image corruptions for robustness evaluation.
//! - [`toyocr`]: synthetic glyph words, a 4-conv CTC recognizer, training and
//!   evaluation.
//! - [`config`]: flat `key=value` configuration files.

pub mod autograd;
pub mod config;
pub mod corruptions;
pub mod statmoments;
pub mod statswap;
pub mod tensor;
pub mod textadain;
pub mod toyocr;

pub use tensor::{Axis, AxisSet, FeatureTensor, Rng, Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty reduction domain")]
    EmptyReduction,
    #[error("invalid axis set: {0}")]
    InvalidAxisSet(String),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("zero variance without epsilon")]
    ZeroVarianceWithoutEpsilon,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u32),
    #[error("dim overflow")]
    DimOverflow,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("kernel exceeds image")]
    KernelExceedsImage,
    #[error("root must be a scalar, got dims {0:?}")]
    NonScalarRoot([usize; 4]),
    #[error("non-finite function value at element {0}")]
    NonFinite(usize),
    #[error("config error: {0}")]
    Config(String),
    #[error("image format error: {0}")]
    ImageFormat(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("training diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
