//! Numeric kernels: pooling, concatenation, expansion, convolutions, batch
//! normalisation, and their hand-derived backward passes.
//!
//! Everything here is a pure function over [`Tensor`] values; the autodiff
//! tape wraps these in differentiable nodes. All loops are plain scalar code
//! with fixed iteration order, so results are bit-for-bit deterministic.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{Axis, Tensor, TensorError};

/// Decompose a shape around one axis: (product before, extent, product after).
///
/// Element (o, k, i) of the decomposition lives at flat index
/// `(o * len + k) * inner + i`, which is the basis for every axis-wise
/// reduction and copy in this module.
fn split3(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Mean along one named axis; that axis keeps extent 1.
///
/// Uses a running (Welford-style) mean rather than sum-then-divide: when
/// every entry along the axis is identical the update term is exactly zero,
/// so expanding a tensor and pooling it back is an exact round trip.
pub fn pool_avg(x: &Tensor, axis: Axis) -> Result<Tensor, TensorError> {
    let ax = axis.resolve(x)?;
    let (outer, len, inner) = split3(x.shape(), ax);
    let mut shape = x.shape().to_vec();
    shape[ax] = 1;
    let mut out = Tensor::zeros(&shape);
    let xd = x.data();
    let od = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let mut mean = xd[o * len * inner + i];
            for k in 1..len {
                let v = xd[(o * len + k) * inner + i];
                mean += (v - mean) / (k + 1) as f64;
            }
            od[o * inner + i] = mean;
        }
    }
    Ok(out)
}

/// Max along one named axis, with the flat source index of each winning
/// entry (first index on ties) recorded for gradient routing.
pub fn pool_max(x: &Tensor, axis: Axis) -> Result<(Tensor, Vec<usize>), TensorError> {
    let ax = axis.resolve(x)?;
    let (outer, len, inner) = split3(x.shape(), ax);
    let mut shape = x.shape().to_vec();
    shape[ax] = 1;
    let mut out = Tensor::zeros(&shape);
    let mut argmax = vec![0usize; outer * inner];
    let xd = x.data();
    let od = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let mut best = xd[o * len * inner + i];
            let mut best_at = o * len * inner + i;
            for k in 1..len {
                let at = (o * len + k) * inner + i;
                if xd[at] > best {
                    best = xd[at];
                    best_at = at;
                }
            }
            od[o * inner + i] = best;
            argmax[o * inner + i] = best_at;
        }
    }
    Ok((out, argmax))
}

/// Concatenate two tensors along one named axis; `a` occupies the leading
/// slots.
pub fn concat_along(a: &Tensor, b: &Tensor, axis: Axis) -> Result<Tensor, TensorError> {
    let ax = axis.resolve(a)?;
    axis.resolve(b)?;
    let same_elsewhere = a.rank() == b.rank()
        && a.shape()
            .iter()
            .zip(b.shape())
            .enumerate()
            .all(|(i, (&ea, &eb))| i == ax || ea == eb);
    if !same_elsewhere {
        return Err(TensorError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (outer, len_a, inner) = split3(a.shape(), ax);
    let len_b = b.shape()[ax];
    let mut shape = a.shape().to_vec();
    shape[ax] = len_a + len_b;
    let mut out = Tensor::zeros(&shape);
    let od = out.data_mut();
    let ad = a.data();
    let bd = b.data();
    let len = len_a + len_b;
    for o in 0..outer {
        for k in 0..len_a {
            let src = (o * len_a + k) * inner;
            let dst = (o * len + k) * inner;
            od[dst..dst + inner].copy_from_slice(&ad[src..src + inner]);
        }
        for k in 0..len_b {
            let src = (o * len_b + k) * inner;
            let dst = (o * len + len_a + k) * inner;
            od[dst..dst + inner].copy_from_slice(&bd[src..src + inner]);
        }
    }
    Ok(out)
}

/// Repeat a size-1 axis `extent` times (element copying).
pub fn expand_along(y: &Tensor, axis: Axis, extent: usize) -> Result<Tensor, TensorError> {
    let ax = axis.resolve(y)?;
    if extent < 1 {
        return Err(TensorError::BadExtent { extent });
    }
    if y.shape()[ax] != 1 {
        return Err(TensorError::ExtentNotOne {
            axis,
            extent: y.shape()[ax],
        });
    }
    let (outer, _, inner) = split3(y.shape(), ax);
    let mut shape = y.shape().to_vec();
    shape[ax] = extent;
    let mut out = Tensor::zeros(&shape);
    let od = out.data_mut();
    let yd = y.data();
    for o in 0..outer {
        let src = o * inner;
        for k in 0..extent {
            let dst = (o * extent + k) * inner;
            od[dst..dst + inner].copy_from_slice(&yd[src..src + inner]);
        }
    }
    Ok(out)
}

/// Sum over one axis (by raw index), keeping it at extent 1. Adjoint of
/// [`expand_along`]; also the reduction inside avg-pool's backward.
pub fn sum_along(g: &Tensor, axis: usize) -> Tensor {
    let (outer, len, inner) = split3(g.shape(), axis);
    let mut shape = g.shape().to_vec();
    shape[axis] = 1;
    let mut out = Tensor::zeros(&shape);
    let gd = g.data();
    let od = out.data_mut();
    for o in 0..outer {
        for k in 0..len {
            let src = (o * len + k) * inner;
            for i in 0..inner {
                od[o * inner + i] += gd[src + i];
            }
        }
    }
    out
}

/// Elementwise sum; shapes must match exactly.
pub fn ew_add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = a.clone();
    out.data_mut()
        .iter_mut()
        .zip(b.data())
        .for_each(|(v, &w)| *v += w);
    Ok(out)
}

/// Elementwise product; shapes must match exactly.
pub fn ew_mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = a.clone();
    out.data_mut()
        .iter_mut()
        .zip(b.data())
        .for_each(|(v, &w)| *v *= w);
    Ok(out)
}

/// Multiply every entry by a scalar.
pub fn scale(x: &Tensor, s: f64) -> Tensor {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v *= s);
    out
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-v))
}

/// Pointwise logistic sigmoid.
pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    out.data_mut()
        .iter_mut()
        .for_each(|v| *v = sigmoid_scalar(*v));
    out
}

/// Pointwise max(0, x).
pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// The three non-batch axes left over once `channel` is designated, in
/// canonical C, T, H, W order.
pub fn sliding_axes(channel: Axis) -> [Axis; 3] {
    let mut out = [Axis::C; 3];
    let mut at = 0;
    for ax in [Axis::C, Axis::T, Axis::H, Axis::W] {
        if ax != channel {
            out[at] = ax;
            at += 1;
        }
    }
    out
}

/// Validate conv3 arguments and return (channel index, sliding indices,
/// kernel extents, paddings).
#[allow(clippy::type_complexity)]
fn conv3_layout(
    x: &Tensor,
    kernel: &Tensor,
    channel_axis: Axis,
    sliding: [Axis; 3],
) -> Result<(usize, [usize; 3], [usize; 3], [usize; 3]), TensorError> {
    let ci = channel_axis.resolve(x)?;
    if channel_axis == Axis::N {
        return Err(TensorError::BadAxes {
            reason: "channel axis cannot be the batch axis",
        });
    }
    let mut seen = [false; 5];
    seen[ci] = true;
    for ax in sliding {
        let i = ax.index();
        if ax == Axis::N {
            return Err(TensorError::BadAxes {
                reason: "sliding axes cannot include the batch axis",
            });
        }
        if seen[i] {
            return Err(TensorError::BadAxes {
                reason: "sliding axes must be distinct and exclude the channel axis",
            });
        }
        seen[i] = true;
    }
    if kernel.rank() != 5 {
        return Err(TensorError::BadKernel {
            expected: "C_out x C_in x k0 x k1 x k2",
            got: kernel.shape().to_vec(),
        });
    }
    let k = [kernel.shape()[2], kernel.shape()[3], kernel.shape()[4]];
    if k.iter().any(|&e| e % 2 == 0) {
        return Err(TensorError::BadKernel {
            expected: "odd extents on every sliding dimension",
            got: kernel.shape().to_vec(),
        });
    }
    if kernel.shape()[1] != x.shape()[ci] {
        return Err(TensorError::ChannelMismatch {
            kernel_in: kernel.shape()[1],
            input: x.shape()[ci],
        });
    }
    let si = [sliding[0].index(), sliding[1].index(), sliding[2].index()];
    let pad = [k[0] / 2, k[1] / 2, k[2] / 2];
    Ok((ci, si, k, pad))
}

/// 3D convolution over an arbitrary designated channel axis.
///
/// `kernel` has shape C_out x C_in x k0 x k1 x k2 (all k odd); `sliding`
/// names the three axes the k0/k1/k2 windows move over, zero-padded by k/2
/// so their extents are preserved. Stride 1, no bias. The batch axis is
/// untouched.
pub fn conv3_over(
    x: &Tensor,
    kernel: &Tensor,
    channel_axis: Axis,
    sliding: [Axis; 3],
) -> Result<Tensor, TensorError> {
    let (ci, si, k, pad) = conv3_layout(x, kernel, channel_axis, sliding)?;
    let c_out = kernel.shape()[0];
    let c_in = kernel.shape()[1];
    let mut shape = x.shape().to_vec();
    shape[ci] = c_out;
    let mut out = Tensor::zeros(&shape);
    let sx = x.strides();
    let so = out.strides();
    let ext = [x.shape()[si[0]], x.shape()[si[1]], x.shape()[si[2]]];
    let xd = x.data();
    let kd = kernel.data();
    let od = out.data_mut();
    for b in 0..x.shape()[0] {
        for oc in 0..c_out {
            let base_o = b * so[0] + oc * so[ci];
            for u0 in 0..ext[0] {
                for u1 in 0..ext[1] {
                    for u2 in 0..ext[2] {
                        let o_at = base_o + u0 * so[si[0]] + u1 * so[si[1]] + u2 * so[si[2]];
                        let mut acc = 0.0;
                        for ic in 0..c_in {
                            let base_x = b * sx[0] + ic * sx[ci];
                            let base_k = (oc * c_in + ic) * k[0];
                            for d0 in 0..k[0] {
                                let v0 = u0 as isize + d0 as isize - pad[0] as isize;
                                if v0 < 0 || v0 >= ext[0] as isize {
                                    continue;
                                }
                                for d1 in 0..k[1] {
                                    let v1 = u1 as isize + d1 as isize - pad[1] as isize;
                                    if v1 < 0 || v1 >= ext[1] as isize {
                                        continue;
                                    }
                                    for d2 in 0..k[2] {
                                        let v2 = u2 as isize + d2 as isize - pad[2] as isize;
                                        if v2 < 0 || v2 >= ext[2] as isize {
                                            continue;
                                        }
                                        let x_at = base_x
                                            + v0 as usize * sx[si[0]]
                                            + v1 as usize * sx[si[1]]
                                            + v2 as usize * sx[si[2]];
                                        let k_at = ((base_k + d0) * k[1] + d1) * k[2] + d2;
                                        acc += kd[k_at] * xd[x_at];
                                    }
                                }
                            }
                        }
                        od[o_at] = acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv3_over`] with respect to its input and kernel.
///
/// One scatter pass mirrors the forward loop: each (output position, tap)
/// pair contributes kernel·g to the input gradient and input·g to the
/// kernel gradient. Arguments must be the ones the forward accepted.
pub fn conv3_over_backward(
    x: &Tensor,
    kernel: &Tensor,
    g: &Tensor,
    channel_axis: Axis,
    sliding: [Axis; 3],
) -> Result<(Tensor, Tensor), TensorError> {
    let (ci, si, k, pad) = conv3_layout(x, kernel, channel_axis, sliding)?;
    let c_out = kernel.shape()[0];
    let c_in = kernel.shape()[1];
    let mut gx = Tensor::zeros(x.shape());
    let mut gk = Tensor::zeros(kernel.shape());
    let sx = x.strides();
    let so = g.strides();
    let ext = [x.shape()[si[0]], x.shape()[si[1]], x.shape()[si[2]]];
    let xd = x.data();
    let kd = kernel.data();
    let gd = g.data();
    let gxd = gx.data_mut();
    let gkd = gk.data_mut();
    for b in 0..x.shape()[0] {
        for oc in 0..c_out {
            let base_o = b * so[0] + oc * so[ci];
            for u0 in 0..ext[0] {
                for u1 in 0..ext[1] {
                    for u2 in 0..ext[2] {
                        let go = gd[base_o + u0 * so[si[0]] + u1 * so[si[1]] + u2 * so[si[2]]];
                        if go == 0.0 {
                            continue;
                        }
                        for ic in 0..c_in {
                            let base_x = b * sx[0] + ic * sx[ci];
                            let base_k = (oc * c_in + ic) * k[0];
                            for d0 in 0..k[0] {
                                let v0 = u0 as isize + d0 as isize - pad[0] as isize;
                                if v0 < 0 || v0 >= ext[0] as isize {
                                    continue;
                                }
                                for d1 in 0..k[1] {
                                    let v1 = u1 as isize + d1 as isize - pad[1] as isize;
                                    if v1 < 0 || v1 >= ext[1] as isize {
                                        continue;
                                    }
                                    for d2 in 0..k[2] {
                                        let v2 = u2 as isize + d2 as isize - pad[2] as isize;
                                        if v2 < 0 || v2 >= ext[2] as isize {
                                            continue;
                                        }
                                        let x_at = base_x
                                            + v0 as usize * sx[si[0]]
                                            + v1 as usize * sx[si[1]]
                                            + v2 as usize * sx[si[2]];
                                        let k_at = ((base_k + d0) * k[1] + d1) * k[2] + d2;
                                        gxd[x_at] += kd[k_at] * go;
                                        gkd[k_at] += xd[x_at] * go;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gk))
}

fn conv2_layout(x: &Tensor, kernel: &Tensor) -> Result<(usize, usize), TensorError> {
    Axis::C.resolve(x)?;
    if kernel.rank() != 4 {
        return Err(TensorError::BadKernel {
            expected: "C_out x C_in x kh x kw",
            got: kernel.shape().to_vec(),
        });
    }
    let (kh, kw) = (kernel.shape()[2], kernel.shape()[3]);
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(TensorError::BadKernel {
            expected: "odd spatial extents",
            got: kernel.shape().to_vec(),
        });
    }
    if kernel.shape()[1] != x.shape()[1] {
        return Err(TensorError::ChannelMismatch {
            kernel_in: kernel.shape()[1],
            input: x.shape()[1],
        });
    }
    Ok((kh, kw))
}

/// Per-frame 2D convolution on an N x C x T x H x W tensor.
///
/// The same kernel (C_out x C_in x kh x kw, odd extents, zero "same"
/// padding, stride 1) is applied independently to every frame t, so no
/// information crosses the time axis.
pub fn conv2_frames(
    x: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
) -> Result<Tensor, TensorError> {
    let (kh, kw) = conv2_layout(x, kernel)?;
    let (c_out, c_in) = (kernel.shape()[0], kernel.shape()[1]);
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(TensorError::ShapeMismatch {
                left: b.shape().to_vec(),
                right: vec![c_out],
            });
        }
    }
    let (n, _, t, h, w) = dims5(x);
    let mut out = Tensor::zeros(&[n, c_out, t, h, w]);
    let (ph, pw) = (kh / 2, kw / 2);
    let xd = x.data();
    let kd = kernel.data();
    let od = out.data_mut();
    for b in 0..n {
        for oc in 0..c_out {
            let bias_v = bias.map_or(0.0, |bv| bv.data()[oc]);
            for tt in 0..t {
                for oh in 0..h {
                    for ow in 0..w {
                        let mut acc = bias_v;
                        for ic in 0..c_in {
                            let x_plane = ((b * x.shape()[1] + ic) * t + tt) * h;
                            let k_plane = ((oc * c_in + ic) * kh) * kw;
                            for dh in 0..kh {
                                let vh = oh as isize + dh as isize - ph as isize;
                                if vh < 0 || vh >= h as isize {
                                    continue;
                                }
                                let x_row = (x_plane + vh as usize) * w;
                                let k_row = k_plane + dh * kw;
                                for dw in 0..kw {
                                    let vw = ow as isize + dw as isize - pw as isize;
                                    if vw < 0 || vw >= w as isize {
                                        continue;
                                    }
                                    acc += kd[k_row + dw] * xd[x_row + vw as usize];
                                }
                            }
                        }
                        od[(((b * c_out + oc) * t + tt) * h + oh) * w + ow] = acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2_frames`] for input, kernel, and (optionally) bias.
pub fn conv2_frames_backward(
    x: &Tensor,
    kernel: &Tensor,
    g: &Tensor,
    with_bias: bool,
) -> Result<(Tensor, Tensor, Option<Tensor>), TensorError> {
    let (kh, kw) = conv2_layout(x, kernel)?;
    let (c_out, c_in) = (kernel.shape()[0], kernel.shape()[1]);
    let (n, _, t, h, w) = dims5(x);
    let mut gx = Tensor::zeros(x.shape());
    let mut gk = Tensor::zeros(kernel.shape());
    let mut gb = with_bias.then(|| Tensor::zeros(&[c_out]));
    let (ph, pw) = (kh / 2, kw / 2);
    let xd = x.data();
    let kd = kernel.data();
    let gd = g.data();
    let gxd = gx.data_mut();
    let gkd = gk.data_mut();
    for b in 0..n {
        for oc in 0..c_out {
            let mut bias_acc = 0.0;
            for tt in 0..t {
                for oh in 0..h {
                    for ow in 0..w {
                        let go = gd[(((b * c_out + oc) * t + tt) * h + oh) * w + ow];
                        bias_acc += go;
                        if go == 0.0 {
                            continue;
                        }
                        for ic in 0..c_in {
                            let x_plane = ((b * c_in + ic) * t + tt) * h;
                            let k_plane = ((oc * c_in + ic) * kh) * kw;
                            for dh in 0..kh {
                                let vh = oh as isize + dh as isize - ph as isize;
                                if vh < 0 || vh >= h as isize {
                                    continue;
                                }
                                let x_row = (x_plane + vh as usize) * w;
                                let k_row = k_plane + dh * kw;
                                for dw in 0..kw {
                                    let vw = ow as isize + dw as isize - pw as isize;
                                    if vw < 0 || vw >= w as isize {
                                        continue;
                                    }
                                    gxd[x_row + vw as usize] += kd[k_row + dw] * go;
                                    gkd[k_row + dw] += xd[x_row + vw as usize] * go;
                                }
                            }
                        }
                    }
                }
            }
            if let Some(gb) = gb.as_mut() {
                gb.data_mut()[oc] += bias_acc;
            }
        }
    }
    Ok((gx, gk, gb))
}

/// Fully connected layer: x is n x d_in, w is d_out x d_in, bias d_out.
pub fn linear(x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, TensorError> {
    if x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[1] {
        return Err(TensorError::ShapeMismatch {
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    let (n, d_in) = (x.shape()[0], x.shape()[1]);
    let d_out = w.shape()[0];
    if let Some(b) = bias {
        if b.shape() != [d_out] {
            return Err(TensorError::ShapeMismatch {
                left: b.shape().to_vec(),
                right: vec![d_out],
            });
        }
    }
    let mut out = Tensor::zeros(&[n, d_out]);
    let xd = x.data();
    let wd = w.data();
    let od = out.data_mut();
    for i in 0..n {
        for o in 0..d_out {
            let mut acc = bias.map_or(0.0, |b| b.data()[o]);
            for j in 0..d_in {
                acc += xd[i * d_in + j] * wd[o * d_in + j];
            }
            od[i * d_out + o] = acc;
        }
    }
    Ok(out)
}

/// Gradients of [`linear`] for input, weight, and bias.
pub fn linear_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (n, d_in) = (x.shape()[0], x.shape()[1]);
    let d_out = w.shape()[0];
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[d_out]);
    let xd = x.data();
    let wd = w.data();
    let gd = g.data();
    {
        let gxd = gx.data_mut();
        for i in 0..n {
            for o in 0..d_out {
                let go = gd[i * d_out + o];
                for j in 0..d_in {
                    gxd[i * d_in + j] += wd[o * d_in + j] * go;
                }
            }
        }
    }
    {
        let gwd = gw.data_mut();
        let gbd = gb.data_mut();
        for i in 0..n {
            for o in 0..d_out {
                let go = gd[i * d_out + o];
                gbd[o] += go;
                for j in 0..d_in {
                    gwd[o * d_in + j] += xd[i * d_in + j] * go;
                }
            }
        }
    }
    (gx, gw, gb)
}

fn dims5(x: &Tensor) -> (usize, usize, usize, usize, usize) {
    (
        x.shape()[0],
        x.shape()[1],
        x.shape()[2],
        x.shape()[3],
        x.shape()[4],
    )
}

/// Number of channels a shift fraction moves in each direction.
pub fn shift_channels(c: usize, fraction: f64) -> Result<usize, TensorError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(TensorError::BadFraction { fraction });
    }
    Ok((c as f64 * fraction) as usize)
}

/// Parameter-free temporal shift: the first `c_shift` channels move one
/// frame forward (t -> t+1), the next `c_shift` move one frame backward,
/// vacated frames are zero-filled, remaining channels pass through.
///
/// With `invert` the two directions swap, which is exactly the adjoint:
/// the backward pass of a shift is the inverse shift applied to the
/// upstream gradient.
pub fn temporal_shift_raw(x: &Tensor, c_shift: usize, invert: bool) -> Tensor {
    let (n, c, t, h, w) = dims5(x);
    let plane = h * w;
    let mut out = Tensor::zeros(x.shape());
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            // delta = +1 copies frame t-1 into t (forward shift).
            let delta: isize = if ch < c_shift {
                if invert {
                    -1
                } else {
                    1
                }
            } else if ch < 2 * c_shift {
                if invert {
                    1
                } else {
                    -1
                }
            } else {
                0
            };
            for tt in 0..t {
                let src_t = tt as isize - delta;
                let dst = ((b * c + ch) * t + tt) * plane;
                if src_t < 0 || src_t >= t as isize {
                    continue;
                }
                let src = ((b * c + ch) * t + src_t as usize) * plane;
                od[dst..dst + plane].copy_from_slice(&xd[src..src + plane]);
            }
        }
    }
    out
}

/// [`temporal_shift_raw`] with the channel count derived from a fraction.
pub fn temporal_shift(x: &Tensor, fraction: f64) -> Result<Tensor, TensorError> {
    Axis::C.resolve(x)?;
    let c_shift = shift_channels(x.shape()[1], fraction)?;
    Ok(temporal_shift_raw(x, c_shift, false))
}

/// Non-overlapping 2x2 mean pooling over H and W (both must be even).
pub fn avgpool_hw2(x: &Tensor) -> Result<Tensor, TensorError> {
    let (n, c, t, h, w) = dims5(x);
    Axis::H.resolve(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(TensorError::BadAxes {
            reason: "2x2 pooling requires even H and W",
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, t, oh, ow]);
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            for tt in 0..t {
                let src_plane = ((b * c + ch) * t + tt) * h;
                let dst_plane = ((b * c + ch) * t + tt) * oh;
                for i in 0..oh {
                    let r0 = (src_plane + 2 * i) * w;
                    let r1 = (src_plane + 2 * i + 1) * w;
                    for j in 0..ow {
                        od[(dst_plane + i) * ow + j] = 0.25
                            * (xd[r0 + 2 * j]
                                + xd[r0 + 2 * j + 1]
                                + xd[r1 + 2 * j]
                                + xd[r1 + 2 * j + 1]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward of [`avgpool_hw2`]: each input cell receives a quarter of its
/// pooled output's gradient.
pub fn avgpool_hw2_backward(g: &Tensor, in_shape: &[usize]) -> Tensor {
    let (n, c, t, oh, ow) = dims5(g);
    let (h, w) = (in_shape[3], in_shape[4]);
    let mut gx = Tensor::zeros(in_shape);
    let gd = g.data();
    let gxd = gx.data_mut();
    for b in 0..n {
        for ch in 0..c {
            for tt in 0..t {
                let src_plane = ((b * c + ch) * t + tt) * oh;
                let dst_plane = ((b * c + ch) * t + tt) * h;
                for i in 0..oh {
                    let r0 = (dst_plane + 2 * i) * w;
                    let r1 = (dst_plane + 2 * i + 1) * w;
                    for j in 0..ow {
                        let v = 0.25 * gd[(src_plane + i) * ow + j];
                        gxd[r0 + 2 * j] += v;
                        gxd[r0 + 2 * j + 1] += v;
                        gxd[r1 + 2 * j] += v;
                        gxd[r1 + 2 * j + 1] += v;
                    }
                }
            }
        }
    }
    gx
}

/// Per-channel batch statistics of `x` around the given raw axis:
/// (mean, biased variance), each of length `channels`.
pub fn batch_stats(x: &Tensor, axis: usize) -> (Tensor, Tensor) {
    let (outer, len, inner) = split3(x.shape(), axis);
    let count = (outer * inner) as f64;
    let mut mean = Tensor::zeros(&[len]);
    let mut var = Tensor::zeros(&[len]);
    let xd = x.data();
    for c in 0..len {
        let mut acc = 0.0;
        for o in 0..outer {
            let base = (o * len + c) * inner;
            for i in 0..inner {
                acc += xd[base + i];
            }
        }
        mean.data_mut()[c] = acc / count;
    }
    for c in 0..len {
        let m = mean.data()[c];
        let mut acc = 0.0;
        for o in 0..outer {
            let base = (o * len + c) * inner;
            for i in 0..inner {
                let d = xd[base + i] - m;
                acc += d * d;
            }
        }
        var.data_mut()[c] = acc / count;
    }
    (mean, var)
}

/// Normalise with the supplied per-channel statistics and affine params.
pub fn batchnorm_apply(
    x: &Tensor,
    axis: usize,
    mean: &Tensor,
    var: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Tensor {
    let (outer, len, inner) = split3(x.shape(), axis);
    let mut out = Tensor::zeros(x.shape());
    let xd = x.data();
    let od = out.data_mut();
    for c in 0..len {
        let m = mean.data()[c];
        let inv = 1.0 / libm::sqrt(var.data()[c] + eps);
        let ga = gamma.data()[c];
        let be = beta.data()[c];
        for o in 0..outer {
            let base = (o * len + c) * inner;
            for i in 0..inner {
                od[base + i] = ga * (xd[base + i] - m) * inv + be;
            }
        }
    }
    out
}

/// Backward of training-mode batch normalisation, where the statistics are
/// functions of the batch itself. Returns (grad x, grad gamma, grad beta).
///
/// With xhat = (x - mean) / sqrt(var + eps) and m elements per channel:
///   dx = gamma/sqrt(var+eps) * (g - mean(g) - xhat * mean(g * xhat))
/// which folds the mean- and variance-path terms into two per-channel sums.
pub fn batchnorm_train_backward(
    x: &Tensor,
    axis: usize,
    mean: &Tensor,
    var: &Tensor,
    gamma: &Tensor,
    eps: f64,
    g: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (outer, len, inner) = split3(x.shape(), axis);
    let count = (outer * inner) as f64;
    let mut gx = Tensor::zeros(x.shape());
    let mut ggamma = Tensor::zeros(&[len]);
    let mut gbeta = Tensor::zeros(&[len]);
    let xd = x.data();
    let gd = g.data();
    let gxd = gx.data_mut();
    for c in 0..len {
        let m = mean.data()[c];
        let inv = 1.0 / libm::sqrt(var.data()[c] + eps);
        let ga = gamma.data()[c];
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for o in 0..outer {
            let base = (o * len + c) * inner;
            for i in 0..inner {
                let xhat = (xd[base + i] - m) * inv;
                sum_g += gd[base + i];
                sum_gx += gd[base + i] * xhat;
            }
        }
        ggamma.data_mut()[c] = sum_gx;
        gbeta.data_mut()[c] = sum_g;
        let mean_g = sum_g / count;
        let mean_gx = sum_gx / count;
        for o in 0..outer {
            let base = (o * len + c) * inner;
            for i in 0..inner {
                let xhat = (xd[base + i] - m) * inv;
                gxd[base + i] = ga * inv * (gd[base + i] - mean_g - xhat * mean_gx);
            }
        }
    }
    (gx, ggamma, gbeta)
}

/// Backward of eval-mode batch normalisation (fixed statistics): the map is
/// affine per channel. Returns (grad x, grad gamma, grad beta).
pub fn batchnorm_eval_backward(
    x: &Tensor,
    axis: usize,
    mean: &Tensor,
    var: &Tensor,
    gamma: &Tensor,
    eps: f64,
    g: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (outer, len, inner) = split3(x.shape(), axis);
    let mut gx = Tensor::zeros(x.shape());
    let mut ggamma = Tensor::zeros(&[len]);
    let mut gbeta = Tensor::zeros(&[len]);
    let xd = x.data();
    let gd = g.data();
    let gxd = gx.data_mut();
    for c in 0..len {
        let m = mean.data()[c];
        let inv = 1.0 / libm::sqrt(var.data()[c] + eps);
        let ga = gamma.data()[c];
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for o in 0..outer {
            let base = (o * len + c) * inner;
            for i in 0..inner {
                let xhat = (xd[base + i] - m) * inv;
                sum_g += gd[base + i];
                sum_gx += gd[base + i] * xhat;
                gxd[base + i] = ga * inv * gd[base + i];
            }
        }
        ggamma.data_mut()[c] = sum_gx;
        gbeta.data_mut()[c] = sum_g;
    }
    (gx, ggamma, gbeta)
}

/// Mean cross-entropy of softmaxed logits (n x k) against integer labels.
/// Returns the loss and the softmax probabilities (cached for backward:
/// d loss / d logits = (probs - onehot) / n).
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), TensorError> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(TensorError::ShapeMismatch {
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    let mut probs = Tensor::zeros(&[n, k]);
    let ld = logits.data();
    let pd = probs.data_mut();
    let mut loss = 0.0;
    for i in 0..n {
        let row = &ld[i * k..(i + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for j in 0..k {
            let e = libm::exp(row[j] - max);
            pd[i * k + j] = e;
            denom += e;
        }
        for j in 0..k {
            pd[i * k + j] /= denom;
        }
        if labels[i] >= k {
            return Err(TensorError::BadScalar {
                what: "class label",
                value: labels[i] as f64,
            });
        }
        loss -= libm::log(pd[i * k + labels[i]]);
    }
    Ok((loss / n as f64, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_tensor(rng: &mut StdRng, shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        let data: alloc::vec::Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn avg_pool_of_constant_is_constant() {
        let x = Tensor::filled(&[1, 3, 2, 2, 2], 3.0);
        for axis in [Axis::C, Axis::T, Axis::H, Axis::W] {
            let y = pool_avg(&x, axis).unwrap();
            assert!(y.data().iter().all(|&v| v == 3.0));
        }
    }

    #[test]
    fn pool_column_values() {
        // Axis T column [1, 5, 3] at the only spatial position.
        let x = Tensor::from_vec(vec![1, 1, 3, 1, 1], vec![1.0, 5.0, 3.0]).unwrap();
        let a = pool_avg(&x, Axis::T).unwrap();
        let (m, arg) = pool_max(&x, Axis::T).unwrap();
        assert_eq!(a.data(), &[3.0]);
        assert_eq!(m.data(), &[5.0]);
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn max_pool_tie_takes_first_index() {
        let x = Tensor::from_vec(vec![1, 1, 4, 1, 1], vec![2.0, 7.0, 7.0, 1.0]).unwrap();
        let (_, arg) = pool_max(&x, Axis::T).unwrap();
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn avg_le_max_elementwise() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let x = rand_tensor(&mut rng, &[2, 4, 4, 6, 6]);
            for axis in Axis::ALL {
                let a = pool_avg(&x, axis).unwrap();
                let (m, _) = pool_max(&x, axis).unwrap();
                assert!(a.data().iter().zip(m.data()).all(|(&av, &mv)| av <= mv));
            }
        }
    }

    #[test]
    fn concat_slots_in_order_and_shape_checked() {
        let a = Tensor::filled(&[1, 2, 1, 2, 2], 1.0);
        let b = Tensor::filled(&[1, 2, 1, 2, 2], 2.0);
        let y = concat_along(&a, &b, Axis::T).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 2, 2]);
        assert_eq!(y.at(&[0, 1, 0, 1, 1]), 1.0);
        assert_eq!(y.at(&[0, 1, 1, 1, 1]), 2.0);
        let c = Tensor::filled(&[1, 3, 1, 2, 2], 2.0);
        assert!(matches!(
            concat_along(&a, &c, Axis::T),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn expand_then_pool_recovers_input() {
        let mut rng = StdRng::seed_from_u64(5);
        let y = rand_tensor(&mut rng, &[2, 3, 1, 4, 4]);
        let e = expand_along(&y, Axis::T, 6).unwrap();
        assert_eq!(e.shape(), &[2, 3, 6, 4, 4]);
        let back_avg = pool_avg(&e, Axis::T).unwrap();
        let (back_max, _) = pool_max(&e, Axis::T).unwrap();
        assert_eq!(back_avg, y);
        assert_eq!(back_max, y);
    }

    #[test]
    fn expand_rejects_bad_arguments() {
        let y = Tensor::zeros(&[1, 2, 1, 2, 2]);
        assert_eq!(
            expand_along(&y, Axis::T, 0),
            Err(TensorError::BadExtent { extent: 0 })
        );
        assert_eq!(
            expand_along(&y, Axis::C, 4),
            Err(TensorError::ExtentNotOne {
                axis: Axis::C,
                extent: 2
            })
        );
        let same = expand_along(&y, Axis::T, 1).unwrap();
        assert_eq!(same, y);
    }

    #[test]
    fn expand_sum_adjoint_identity() {
        // <expand(y), g> == <y, sum_along(g)>
        let mut rng = StdRng::seed_from_u64(17);
        let y = rand_tensor(&mut rng, &[2, 3, 1, 4, 4]);
        let g = rand_tensor(&mut rng, &[2, 3, 6, 4, 4]);
        let lhs: f64 = expand_along(&y, Axis::T, 6)
            .unwrap()
            .data()
            .iter()
            .zip(g.data())
            .map(|(&a, &b)| a * b)
            .sum();
        let rhs: f64 = y
            .data()
            .iter()
            .zip(sum_along(&g, Axis::T.index()).data())
            .map(|(&a, &b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let y = sigmoid(&Tensor::zeros(&[2, 2]));
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mul_by_ones_is_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        let x = rand_tensor(&mut rng, &[2, 3, 4]);
        let ones = Tensor::filled(&[2, 3, 4], 1.0);
        assert_eq!(ew_mul(&x, &ones).unwrap(), x);
    }

    #[test]
    fn conv3_zero_kernel_gives_zero() {
        let mut rng = StdRng::seed_from_u64(7);
        let x = rand_tensor(&mut rng, &[1, 2, 4, 5, 5]);
        let k = Tensor::zeros(&[1, 2, 3, 3, 3]);
        let y = conv3_over(&x, &k, Axis::C, [Axis::T, Axis::H, Axis::W]).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 5, 5]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv3_delta_kernel_is_identity() {
        let mut rng = StdRng::seed_from_u64(9);
        let x = rand_tensor(&mut rng, &[2, 1, 4, 5, 5]);
        let mut k = Tensor::zeros(&[1, 1, 3, 3, 3]);
        k.set(&[0, 0, 1, 1, 1], 1.0);
        let y = conv3_over(&x, &k, Axis::C, [Axis::T, Axis::H, Axis::W]).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv3_is_linear_in_input() {
        let mut rng = StdRng::seed_from_u64(13);
        let x = rand_tensor(&mut rng, &[4, 2, 3, 5, 5]);
        let y = rand_tensor(&mut rng, &[4, 2, 3, 5, 5]);
        let k = rand_tensor(&mut rng, &[2, 2, 3, 3, 3]);
        let (a, b) = (0.7, -1.3);
        let mix = ew_add(&scale(&x, a), &scale(&y, b)).unwrap();
        let lhs = conv3_over(&mix, &k, Axis::C, [Axis::T, Axis::H, Axis::W]).unwrap();
        let rhs = ew_add(
            &scale(
                &conv3_over(&x, &k, Axis::C, [Axis::T, Axis::H, Axis::W]).unwrap(),
                a,
            ),
            &scale(
                &conv3_over(&y, &k, Axis::C, [Axis::T, Axis::H, Axis::W]).unwrap(),
                b,
            ),
        )
        .unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - r).abs() < 1e-9);
        }
    }

    #[test]
    fn conv3_validates_axes_and_kernel() {
        let x = Tensor::zeros(&[1, 2, 4, 5, 5]);
        let k = Tensor::zeros(&[1, 2, 3, 3, 3]);
        assert!(matches!(
            conv3_over(&x, &k, Axis::N, [Axis::T, Axis::H, Axis::W]),
            Err(TensorError::BadAxes { .. })
        ));
        assert!(matches!(
            conv3_over(&x, &k, Axis::C, [Axis::C, Axis::H, Axis::W]),
            Err(TensorError::BadAxes { .. })
        ));
        assert!(matches!(
            conv3_over(&x, &k, Axis::C, [Axis::T, Axis::T, Axis::W]),
            Err(TensorError::BadAxes { .. })
        ));
        let even = Tensor::zeros(&[1, 2, 2, 3, 3]);
        assert!(matches!(
            conv3_over(&x, &even, Axis::C, [Axis::T, Axis::H, Axis::W]),
            Err(TensorError::BadKernel { .. })
        ));
        let wrong_in = Tensor::zeros(&[1, 3, 3, 3, 3]);
        assert!(matches!(
            conv3_over(&x, &wrong_in, Axis::C, [Axis::T, Axis::H, Axis::W]),
            Err(TensorError::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn conv2_delta_kernel_is_identity_per_frame() {
        let mut rng = StdRng::seed_from_u64(21);
        let x = rand_tensor(&mut rng, &[2, 3, 2, 4, 4]);
        let mut k = Tensor::zeros(&[3, 3, 3, 3]);
        for c in 0..3 {
            k.set(&[c, c, 1, 1], 1.0);
        }
        let y = conv2_frames(&x, &k, None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn linear_matches_hand_example() {
        let x = Tensor::from_vec(vec![1, 2], vec![2.0, -1.0]).unwrap();
        let w = Tensor::from_vec(vec![2, 2], vec![1.0, 0.5, -2.0, 3.0]).unwrap();
        let b = Tensor::from_vec(vec![2], vec![0.25, 0.0]).unwrap();
        let y = linear(&x, &w, Some(&b)).unwrap();
        assert_eq!(y.data(), &[2.0 - 0.5 + 0.25, -4.0 - 3.0]);
    }

    #[test]
    fn shift_boundary_rule() {
        // T=2, one forward-shifted channel: frame 0 becomes 0, frame 1 gets
        // old frame 0.
        let x = Tensor::from_vec(vec![1, 2, 2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = temporal_shift(&x, 0.5).unwrap();
        assert_eq!(y.data(), &[0.0, 1.0, 4.0, 0.0]);
    }

    #[test]
    fn shift_zero_channels_is_identity() {
        let mut rng = StdRng::seed_from_u64(2);
        let x = rand_tensor(&mut rng, &[1, 3, 4, 2, 2]);
        // 3 channels * 0.25 rounds down to 0 shifted channels.
        let y = temporal_shift(&x, 0.25).unwrap();
        assert_eq!(y, x);
        assert!(matches!(
            temporal_shift(&x, 0.75),
            Err(TensorError::BadFraction { .. })
        ));
        assert!(matches!(
            temporal_shift(&x, 0.0),
            Err(TensorError::BadFraction { .. })
        ));
    }

    #[test]
    fn shift_inverse_is_adjoint() {
        // <shift(x), g> == <x, shift_inverse(g)>
        let mut rng = StdRng::seed_from_u64(23);
        let x = rand_tensor(&mut rng, &[2, 8, 4, 3, 3]);
        let g = rand_tensor(&mut rng, &[2, 8, 4, 3, 3]);
        let lhs: f64 = temporal_shift_raw(&x, 2, false)
            .data()
            .iter()
            .zip(g.data())
            .map(|(&a, &b)| a * b)
            .sum();
        let rhs: f64 = x
            .data()
            .iter()
            .zip(temporal_shift_raw(&g, 2, true).data())
            .map(|(&a, &b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_normalises_and_bypass_stats_behave() {
        let mut rng = StdRng::seed_from_u64(31);
        let x = rand_tensor(&mut rng, &[2, 3, 2, 4, 4]);
        let (mean, var) = batch_stats(&x, 1);
        let gamma = Tensor::filled(&[3], 1.0);
        let beta = Tensor::zeros(&[3]);
        let y = batchnorm_apply(&x, 1, &mean, &var, &gamma, &beta, 1e-5);
        let (ym, yv) = batch_stats(&y, 1);
        for c in 0..3 {
            assert!(ym.data()[c].abs() < 1e-12);
            assert!((yv.data()[c] - 1.0).abs() < 1e-3); // eps shrinks it slightly
        }
    }

    #[test]
    fn batchnorm_constant_input_is_well_defined() {
        // Batch size 1, constant input: variance 0, eps keeps it finite.
        let x = Tensor::filled(&[1, 2, 2, 2, 2], 4.0);
        let (mean, var) = batch_stats(&x, 1);
        assert_eq!(var.data(), &[0.0, 0.0]);
        let gamma = Tensor::filled(&[2], 1.0);
        let beta = Tensor::zeros(&[2]);
        let y = batchnorm_apply(&x, 1, &mean, &var, &gamma, &beta, 1e-5);
        assert!(y.data().iter().all(|v| v.is_finite() && v.abs() < 1e-9));
    }

    #[test]
    fn softmax_xent_uniform_logits_is_ln_k() {
        let logits = Tensor::zeros(&[3, 4]);
        let (loss, probs) = softmax_xent(&logits, &[0, 1, 2]).unwrap();
        assert!((loss - libm::log(4.0)).abs() < 1e-12);
        assert!(probs.data().iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn avgpool_hw2_averages_blocks() {
        let x = Tensor::from_vec(vec![1, 1, 1, 2, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let y = avgpool_hw2(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1, 1]);
        assert_eq!(y.data(), &[3.0]);
        let odd = Tensor::zeros(&[1, 1, 1, 3, 2]);
        assert!(matches!(
            avgpool_hw2(&odd),
            Err(TensorError::BadAxes { .. })
        ));
    }
}
