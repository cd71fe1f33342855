//! Forward and backward kernels for the dense ops of the tape.

use crate::tensor::{Scalar, Tensor};

/// Geometry of a stride-1 zero-padded 2-D convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeom {
    pub fn patch(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub fn positions(&self) -> usize {
        self.h_out * self.w_out
    }
}

/// Unfold one batch item into a `patch x positions` column matrix.
pub(crate) fn im2col<T: Scalar>(g: &ConvGeom, item: &[T], cols: &mut [T]) {
    let n = g.positions();
    let mut row = 0;
    for c in 0..g.c_in {
        let plane = &item[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.h_out {
                    let iy = oy as isize + ky as isize - g.pad as isize;
                    let out_row = &mut dst[oy * g.w_out..(oy + 1) * g.w_out];
                    if iy < 0 || iy >= g.h as isize {
                        out_row.iter_mut().for_each(|v| *v = T::ZERO);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in out_row.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            T::ZERO
                        } else {
                            src[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Accumulate a column-matrix gradient back onto one input item.
pub(crate) fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], item: &mut [T]) {
    let n = g.positions();
    let mut row = 0;
    for c in 0..g.c_in {
        let plane = &mut item[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.h_out {
                    let iy = oy as isize + ky as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.w_out {
                        let ix = ox as isize + kx as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.w_out + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Returns the output and the cached column matrices (one per item).
pub(crate) fn conv2d_forward<T: Scalar>(
    g: &ConvGeom,
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> (Tensor<T>, Vec<T>) {
    let (k, n) = (g.patch(), g.positions());
    let mut cols = vec![T::ZERO; g.batch * k * n];
    let mut out = Tensor::zeros([g.batch, g.c_out, g.h_out, g.w_out]);
    for b in 0..g.batch {
        let cb = &mut cols[b * k * n..(b + 1) * k * n];
        im2col(g, x.item(b), cb);
        let ob = out.item_mut(b);
        for (co, row) in ob.chunks_exact_mut(n.max(1)).enumerate() {
            row.iter_mut().for_each(|v| *v = bias.data()[co]);
        }
        T::gemm(
            g.c_out,
            k,
            n,
            T::ONE,
            (weight.data(), k as isize, 1),
            (cb, n as isize, 1),
            T::ONE,
            (ob, n as isize, 1),
        );
    }
    (out, cols)
}

/// Gradients w.r.t. input, weight and bias. `want_input` skips the input
/// gradient for the first layer.
pub(crate) fn conv2d_backward<T: Scalar>(
    g: &ConvGeom,
    cols: &[T],
    weight: &Tensor<T>,
    upstream: &Tensor<T>,
    want_input: bool,
) -> (Option<Tensor<T>>, Tensor<T>, Tensor<T>) {
    let (k, n) = (g.patch(), g.positions());
    let mut dw = Tensor::zeros(weight.dims());
    let mut db = Tensor::zeros([1, g.c_out, 1, 1]);
    let mut dx = want_input.then(|| Tensor::zeros([g.batch, g.c_in, g.h, g.w]));
    let mut dcols = vec![T::ZERO; if want_input { k * n } else { 0 }];
    for b in 0..g.batch {
        let gb = upstream.item(b);
        let cb = &cols[b * k * n..(b + 1) * k * n];
        for (co, row) in gb.chunks_exact(n.max(1)).enumerate() {
            let s = row.iter().fold(T::ZERO, |a, &v| a + v);
            db.data_mut()[co] += s;
        }
        // dW (c_out x k) += dY (c_out x n) * cols^T (n x k)
        T::gemm(
            g.c_out,
            n,
            k,
            T::ONE,
            (gb, n as isize, 1),
            (cb, 1, n as isize),
            T::ONE,
            (dw.data_mut(), k as isize, 1),
        );
        if let Some(dx) = dx.as_mut() {
            // dcols (k x n) = W^T (k x c_out) * dY (c_out x n)
            T::gemm(
                k,
                g.c_out,
                n,
                T::ONE,
                (weight.data(), 1, k as isize),
                (gb, n as isize, 1),
                T::ZERO,
                (&mut dcols, n as isize, 1),
            );
            col2im(g, &dcols, dx.item_mut(b));
        }
    }
    (dx, dw, db)
}

/// Non-overlapping max pooling; returns output and the flat argmax per output.
pub(crate) fn max_pool_forward<T: Scalar>(x: &Tensor<T>, kh: usize, kw: usize) -> (Tensor<T>, Vec<usize>) {
    let [b, c, h, w] = x.dims();
    let (ho, wo) = (h / kh, w / kw);
    let mut out = Tensor::zeros([b, c, ho, wo]);
    let mut arg = vec![0usize; out.numel()];
    let data = x.data();
    let mut o = 0;
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + oy * kh * w + ox * kw;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let i = base + (oy * kh + dy) * w + ox * kw + dx;
                        if data[i] > data[best] {
                            best = i;
                        }
                    }
                }
                out.data_mut()[o] = data[best];
                arg[o] = best;
                o += 1;
            }
        }
    }
    (out, arg)
}

/// `(B, C, 1, T)` frames times `(1, 1, A, C)` weights plus bias -> `(B, 1, T, A)`.
pub(crate) fn linear_frames_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Tensor<T> {
    let [b, c, _, t] = x.dims();
    let a = weight.dims()[2];
    let mut out = Tensor::zeros([b, 1, t, a]);
    for bi in 0..b {
        let ob = out.item_mut(bi);
        for row in ob.chunks_exact_mut(a.max(1)) {
            row.copy_from_slice(bias.data());
        }
        // out (t x a) = x^T (t x c) * w^T (c x a)
        T::gemm(
            t,
            c,
            a,
            T::ONE,
            (x.item(bi), 1, t as isize),
            (weight.data(), 1, c as isize),
            T::ONE,
            (ob, a as isize, 1),
        );
    }
    out
}

pub(crate) fn linear_frames_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    upstream: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let [b, c, _, t] = x.dims();
    let a = weight.dims()[2];
    let mut dx = Tensor::zeros(x.dims());
    let mut dw = Tensor::zeros(weight.dims());
    let mut db = Tensor::zeros([1, 1, 1, a]);
    for bi in 0..b {
        let gb = upstream.item(bi);
        for row in gb.chunks_exact(a.max(1)) {
            for (d, &v) in db.data_mut().iter_mut().zip(row) {
                *d += v;
            }
        }
        // dx (c x t) = w^T (c x a) * g^T (a x t)
        T::gemm(
            c,
            a,
            t,
            T::ONE,
            (weight.data(), 1, c as isize),
            (gb, 1, a as isize),
            T::ZERO,
            (dx.item_mut(bi), t as isize, 1),
        );
        // dw (a x c) += g^T (a x t) * x^T (t x c)
        T::gemm(
            a,
            t,
            c,
            T::ONE,
            (gb, 1, a as isize),
            (x.item(bi), 1, t as isize),
            T::ONE,
            (dw.data_mut(), c as isize, 1),
        );
    }
    (dx, dw, db)
}

/// Log-softmax along the width (last) axis.
pub(crate) fn log_softmax_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let w = x.dims()[3];
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(w.max(1)) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64()));
        let lse = max + row.iter().map(|v| (v.to_f64() - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v = T::from_f64(v.to_f64() - lse);
        }
    }
    out
}

pub(crate) fn log_softmax_backward<T: Scalar>(y: &Tensor<T>, upstream: &Tensor<T>) -> Tensor<T> {
    let w = y.dims()[3];
    let mut dx = upstream.clone();
    for (yr, dr) in y.data().chunks_exact(w.max(1)).zip(dx.data_mut().chunks_exact_mut(w.max(1))) {
        let total: f64 = dr.iter().map(|v| v.to_f64()).sum();
        for (d, &yv) in dr.iter_mut().zip(yr) {
            *d = T::from_f64(d.to_f64() - yv.to_f64().exp() * total);
        }
    }
    dx
}
