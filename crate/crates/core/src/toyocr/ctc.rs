//! CTC loss (log-space forward-backward) and greedy decoding.
//!
//! Frames are rows of a `T x (A + 1)` matrix of log-probabilities; class 0 is
//! the blank.

use crate::tensor::Scalar;

pub const BLANK: usize = 0;

/// Loss and gradient for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CtcOutput {
    /// `-log P(label | frames)`; `+inf` when the label cannot be aligned.
    pub loss: f64,
    /// `d loss / d logprobs`, same `T x (A + 1)` layout as the input.
    pub grad: Vec<f64>,
    /// `false` when the label needs more frames than are available.
    pub reachable: bool,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Minimum number of frames needed to emit `label` (repeats need a blank).
pub fn min_frames(label: &[usize]) -> usize {
    label.len() + label.windows(2).filter(|w| w[0] == w[1]).count()
}

/// CTC loss over `frames` (`t_len` rows of `classes` log-probabilities).
///
/// Labels hold class indices in `1..classes`. The gradient is taken w.r.t. the
/// log-probabilities treated as free inputs; composing with a log-softmax is
/// the caller's job.
pub fn ctc_loss<T: Scalar>(frames: &[T], t_len: usize, classes: usize, label: &[usize]) -> CtcOutput {
    assert_eq!(frames.len(), t_len * classes, "frame matrix size");
    assert!(
        label.iter().all(|&l| l != BLANK && l < classes),
        "label classes must lie in 1..{classes}"
    );
    if min_frames(label) > t_len {
        return CtcOutput {
            loss: f64::INFINITY,
            grad: vec![0.0; frames.len()],
            reachable: false,
        };
    }
    let lp = |t: usize, k: usize| frames[t * classes + k].to_f64();

    // Extended label: blank, l1, blank, l2, ..., blank.
    let s_len = 2 * label.len() + 1;
    let ext = |s: usize| if s % 2 == 0 { BLANK } else { label[s / 2] };
    let can_skip = |s: usize| s >= 2 && s % 2 == 1 && ext(s) != ext(s - 2);

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; t_len * s_len];
    alpha[0] = lp(0, ext(0));
    if s_len > 1 {
        alpha[1] = lp(0, ext(1));
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let prev = &alpha[(t - 1) * s_len..t * s_len];
            let mut a = prev[s];
            if s >= 1 {
                a = log_add(a, prev[s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, prev[s - 2]);
            }
            alpha[t * s_len + s] = if a == neg { neg } else { a + lp(t, ext(s)) };
        }
    }
    let last = (t_len - 1) * s_len;
    let mut log_p = alpha[last + s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[last + s_len - 2]);
    }

    let mut beta = vec![neg; t_len * s_len];
    beta[last + s_len - 1] = lp(t_len - 1, ext(s_len - 1));
    if s_len > 1 {
        beta[last + s_len - 2] = lp(t_len - 1, ext(s_len - 2));
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let next = &beta[(t + 1) * s_len..(t + 2) * s_len];
            let mut b = next[s];
            if s + 1 < s_len {
                b = log_add(b, next[s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, next[s + 2]);
            }
            beta[t * s_len + s] = if b == neg { neg } else { b + lp(t, ext(s)) };
        }
    }

    // alpha_t(s) * beta_t(s) counts frame t's probability twice, hence the
    // extra -lp(t, k) when forming d loss / d lp(t, k).
    let mut grad = vec![0.0; frames.len()];
    let mut acc = vec![neg; classes];
    for t in 0..t_len {
        acc.iter_mut().for_each(|a| *a = neg);
        for s in 0..s_len {
            let ab = alpha[t * s_len + s] + beta[t * s_len + s];
            let k = ext(s);
            acc[k] = log_add(acc[k], ab);
        }
        for k in 0..classes {
            if acc[k] != neg {
                grad[t * classes + k] = -(acc[k] - lp(t, k) - log_p).exp();
            }
        }
    }
    CtcOutput {
        loss: -log_p,
        grad,
        reachable: true,
    }
}

/// Per-frame argmax, collapse repeats, drop blanks.
pub fn greedy_decode<T: Scalar>(frames: &[T], t_len: usize, classes: usize) -> Vec<usize> {
    assert_eq!(frames.len(), t_len * classes, "frame matrix size");
    let mut out = Vec::new();
    let mut prev = BLANK;
    for row in frames.chunks_exact(classes.max(1)) {
        let best = row
            .iter()
            .enumerate()
            .fold((0, row[0]), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0;
        if best != BLANK && best != prev {
            out.push(best);
        }
        prev = best;
    }
    out
}
