//! Naive reference implementations used as oracles.
//!
//! Everything in this module is deliberately written as straight-line nested
//! loops with direct index arithmetic, independent of the production kernels
//! and of the autodiff tape, so that agreement between the two is meaningful
//! evidence of correctness. Nothing here is used on a training path.

use alloc::vec::Vec;

use crate::tensor::{Axis, Tensor};

fn idx5(shape: &[usize], c: [usize; 5]) -> usize {
    (((c[0] * shape[1] + c[1]) * shape[2] + c[2]) * shape[3] + c[3]) * shape[4] + c[4]
}

/// Mean over one axis of a rank-5 tensor, extent kept at 1.
pub fn naive_pool_avg(x: &Tensor, axis: Axis) -> Tensor {
    let s = x.shape();
    let ax = axis.index();
    let mut out_shape = s.to_vec();
    out_shape[ax] = 1;
    let mut out = Tensor::zeros(&out_shape);
    for i0 in 0..out_shape[0] {
        for i1 in 0..out_shape[1] {
            for i2 in 0..out_shape[2] {
                for i3 in 0..out_shape[3] {
                    for i4 in 0..out_shape[4] {
                        let mut acc = 0.0;
                        for k in 0..s[ax] {
                            let mut c = [i0, i1, i2, i3, i4];
                            c[ax] = k;
                            acc += x.data()[idx5(s, c)];
                        }
                        let at = idx5(&out_shape, [i0, i1, i2, i3, i4]);
                        out.data_mut()[at] = acc / s[ax] as f64;
                    }
                }
            }
        }
    }
    out
}

/// Max over one axis of a rank-5 tensor, extent kept at 1.
pub fn naive_pool_max(x: &Tensor, axis: Axis) -> Tensor {
    let s = x.shape();
    let ax = axis.index();
    let mut out_shape = s.to_vec();
    out_shape[ax] = 1;
    let mut out = Tensor::zeros(&out_shape);
    for i0 in 0..out_shape[0] {
        for i1 in 0..out_shape[1] {
            for i2 in 0..out_shape[2] {
                for i3 in 0..out_shape[3] {
                    for i4 in 0..out_shape[4] {
                        let mut best = f64::NEG_INFINITY;
                        for k in 0..s[ax] {
                            let mut c = [i0, i1, i2, i3, i4];
                            c[ax] = k;
                            let v = x.data()[idx5(s, c)];
                            if v > best {
                                best = v;
                            }
                        }
                        let at = idx5(&out_shape, [i0, i1, i2, i3, i4]);
                        out.data_mut()[at] = best;
                    }
                }
            }
        }
    }
    out
}

/// Index-by-index concatenation of two rank-5 tensors along one axis.
pub fn naive_concat(a: &Tensor, b: &Tensor, axis: Axis) -> Tensor {
    let ax = axis.index();
    let mut out_shape = a.shape().to_vec();
    out_shape[ax] = a.shape()[ax] + b.shape()[ax];
    let mut out = Tensor::zeros(&out_shape);
    for i0 in 0..out_shape[0] {
        for i1 in 0..out_shape[1] {
            for i2 in 0..out_shape[2] {
                for i3 in 0..out_shape[3] {
                    for i4 in 0..out_shape[4] {
                        let c = [i0, i1, i2, i3, i4];
                        let v = if c[ax] < a.shape()[ax] {
                            a.data()[idx5(a.shape(), c)]
                        } else {
                            let mut cb = c;
                            cb[ax] -= a.shape()[ax];
                            b.data()[idx5(b.shape(), cb)]
                        };
                        out.data_mut()[idx5(&out_shape, c)] = v;
                    }
                }
            }
        }
    }
    out
}

/// Copy a unit axis `extent` times.
pub fn naive_expand(y: &Tensor, axis: Axis, extent: usize) -> Tensor {
    let ax = axis.index();
    let mut out_shape = y.shape().to_vec();
    out_shape[ax] = extent;
    let mut out = Tensor::zeros(&out_shape);
    for i0 in 0..out_shape[0] {
        for i1 in 0..out_shape[1] {
            for i2 in 0..out_shape[2] {
                for i3 in 0..out_shape[3] {
                    for i4 in 0..out_shape[4] {
                        let c = [i0, i1, i2, i3, i4];
                        let mut cs = c;
                        cs[ax] = 0;
                        out.data_mut()[idx5(&out_shape, c)] = y.data()[idx5(y.shape(), cs)];
                    }
                }
            }
        }
    }
    out
}

pub fn naive_sigmoid(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        let e = libm::exp(*v);
        *v = e / (1.0 + e);
    }
    out
}

pub fn naive_relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

pub fn naive_mul(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = a.clone();
    for (v, w) in out.data_mut().iter_mut().zip(b.data()) {
        *v *= w;
    }
    out
}

/// Direct-sum 3D convolution over a designated channel axis: loops over
/// every output coordinate, then over input channels and the full kernel
/// window, skipping taps that fall outside the zero padding.
pub fn naive_conv3(x: &Tensor, kernel: &Tensor, channel_axis: Axis, sliding: [Axis; 3]) -> Tensor {
    let s = x.shape();
    let ci = channel_axis.index();
    let sl = [sliding[0].index(), sliding[1].index(), sliding[2].index()];
    let (c_out, c_in) = (kernel.shape()[0], kernel.shape()[1]);
    let k = [kernel.shape()[2], kernel.shape()[3], kernel.shape()[4]];
    let mut out_shape = s.to_vec();
    out_shape[ci] = c_out;
    let mut out = Tensor::zeros(&out_shape);
    for i0 in 0..out_shape[0] {
        for i1 in 0..out_shape[1] {
            for i2 in 0..out_shape[2] {
                for i3 in 0..out_shape[3] {
                    for i4 in 0..out_shape[4] {
                        let oc = [i0, i1, i2, i3, i4];
                        let mut acc = 0.0;
                        for ic in 0..c_in {
                            for d0 in 0..k[0] {
                                for d1 in 0..k[1] {
                                    for d2 in 0..k[2] {
                                        let mut c = oc;
                                        c[ci] = ic;
                                        let taps = [d0, d1, d2];
                                        let mut ok = true;
                                        for (j, &d) in taps.iter().enumerate() {
                                            let v = oc[sl[j]] as isize + d as isize
                                                - (k[j] / 2) as isize;
                                            if v < 0 || v >= s[sl[j]] as isize {
                                                ok = false;
                                                break;
                                            }
                                            c[sl[j]] = v as usize;
                                        }
                                        if !ok {
                                            continue;
                                        }
                                        let kv = kernel.data()
                                            [idx5(kernel.shape(), [oc[ci], ic, d0, d1, d2])];
                                        acc += kv * x.data()[idx5(s, c)];
                                    }
                                }
                            }
                        }
                        out.data_mut()[idx5(&out_shape, oc)] = acc;
                    }
                }
            }
        }
    }
    out
}

/// Per-frame 2D convolution by direct summation (same padding, stride 1).
pub fn naive_conv2_frames(x: &Tensor, kernel: &Tensor, bias: Option<&Tensor>) -> Tensor {
    let s = x.shape();
    let (n, c_in, t, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    let c_out = kernel.shape()[0];
    let (kh, kw) = (kernel.shape()[2], kernel.shape()[3]);
    let out_shape = [n, c_out, t, h, w];
    let mut out = Tensor::zeros(&out_shape);
    for b in 0..n {
        for oc in 0..c_out {
            for tt in 0..t {
                for oh in 0..h {
                    for ow in 0..w {
                        let mut acc = match bias {
                            Some(bt) => bt.data()[oc],
                            None => 0.0,
                        };
                        for ic in 0..c_in {
                            for dh in 0..kh {
                                for dw in 0..kw {
                                    let vh = oh as isize + dh as isize - (kh / 2) as isize;
                                    let vw = ow as isize + dw as isize - (kw / 2) as isize;
                                    if vh < 0 || vh >= h as isize || vw < 0 || vw >= w as isize {
                                        continue;
                                    }
                                    let kv = kernel.data()[((oc * c_in + ic) * kh + dh) * kw + dw];
                                    let xv =
                                        x.data()[idx5(s, [b, ic, tt, vh as usize, vw as usize])];
                                    acc += kv * xv;
                                }
                            }
                        }
                        out.data_mut()[idx5(&out_shape, [b, oc, tt, oh, ow])] = acc;
                    }
                }
            }
        }
    }
    out
}

/// Per-channel copy oracle for the temporal shift.
pub fn naive_temporal_shift(x: &Tensor, fraction: f64) -> Tensor {
    let s = x.shape();
    let (n, c, t, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    let c_shift = (c as f64 * fraction) as usize;
    let mut out = Tensor::zeros(s);
    for b in 0..n {
        for ch in 0..c {
            for tt in 0..t {
                for hh in 0..h {
                    for ww in 0..w {
                        let src_t = if ch < c_shift {
                            tt as isize - 1
                        } else if ch < 2 * c_shift {
                            tt as isize + 1
                        } else {
                            tt as isize
                        };
                        if src_t < 0 || src_t >= t as isize {
                            continue;
                        }
                        let v = x.data()[idx5(s, [b, ch, src_t as usize, hh, ww])];
                        out.data_mut()[idx5(s, [b, ch, tt, hh, ww])] = v;
                    }
                }
            }
        }
    }
    out
}

pub fn naive_linear(x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Tensor {
    let (n, d_in) = (x.shape()[0], x.shape()[1]);
    let d_out = w.shape()[0];
    let mut out = Tensor::zeros(&[n, d_out]);
    for i in 0..n {
        for o in 0..d_out {
            let mut acc = match bias {
                Some(bt) => bt.data()[o],
                None => 0.0,
            };
            for j in 0..d_in {
                acc += x.data()[i * d_in + j] * w.data()[o * d_in + j];
            }
            out.data_mut()[i * d_out + o] = acc;
        }
    }
    out
}

/// Batch-normalisation handling for the straight-line composites.
#[derive(Clone, Debug)]
pub enum NaiveBn {
    /// Normalise with the batch's own statistics (training behaviour).
    Train,
    /// Skip normalisation entirely (exact identity).
    Bypass,
}

/// Training-mode batch normalisation over one raw axis, by direct loops.
pub fn naive_bn_train(x: &Tensor, axis: usize, gamma: &Tensor, beta: &Tensor, eps: f64) -> Tensor {
    let s = x.shape();
    let channels = s[axis];
    let mut out = Tensor::zeros(s);
    let count = (x.numel() / channels) as f64;
    for c in 0..channels {
        let mut sum = 0.0;
        for i0 in 0..s[0] {
            for i1 in 0..s[1] {
                for i2 in 0..s[2] {
                    for i3 in 0..s[3] {
                        for i4 in 0..s[4] {
                            let co = [i0, i1, i2, i3, i4];
                            if co[axis] == c {
                                sum += x.data()[idx5(s, co)];
                            }
                        }
                    }
                }
            }
        }
        let mean = sum / count;
        let mut sq = 0.0;
        for i0 in 0..s[0] {
            for i1 in 0..s[1] {
                for i2 in 0..s[2] {
                    for i3 in 0..s[3] {
                        for i4 in 0..s[4] {
                            let co = [i0, i1, i2, i3, i4];
                            if co[axis] == c {
                                let d = x.data()[idx5(s, co)] - mean;
                                sq += d * d;
                            }
                        }
                    }
                }
            }
        }
        let inv = 1.0 / libm::sqrt(sq / count + eps);
        for i0 in 0..s[0] {
            for i1 in 0..s[1] {
                for i2 in 0..s[2] {
                    for i3 in 0..s[3] {
                        for i4 in 0..s[4] {
                            let co = [i0, i1, i2, i3, i4];
                            if co[axis] == c {
                                let v = (x.data()[idx5(s, co)] - mean) * inv;
                                out.data_mut()[idx5(s, co)] = gamma.data()[c] * v + beta.data()[c];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Plain-tensor weights of one gate: conv kernel plus BN affine params.
#[derive(Clone, Debug)]
pub struct NaiveGate {
    pub kernel: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

const BN_EPS: f64 = 1e-5;

fn remaining_axes(channel: Axis) -> [Axis; 3] {
    match channel {
        Axis::C => [Axis::T, Axis::H, Axis::W],
        Axis::T => [Axis::C, Axis::H, Axis::W],
        Axis::H => [Axis::C, Axis::T, Axis::W],
        Axis::W => [Axis::C, Axis::T, Axis::H],
        Axis::N => unreachable!("batch axis is never a gate axis"),
    }
}

/// One full gate, straight-line: pool both ways over `axis`, concatenate,
/// convolve with `axis` as the conv channel, normalise, squash, re-expand.
/// `src` supplies the context; the returned gate matches `src`'s shape.
pub fn naive_gate(src: &Tensor, axis: Axis, g: &NaiveGate, bn: &NaiveBn) -> Tensor {
    let avg = naive_pool_avg(src, axis);
    let max = naive_pool_max(src, axis);
    let ctx = naive_concat(&avg, &max, axis);
    let conv = naive_conv3(&ctx, &g.kernel, axis, remaining_axes(axis));
    let normed = match bn {
        NaiveBn::Train => naive_bn_train(&conv, axis.index(), &g.gamma, &g.beta, BN_EPS),
        NaiveBn::Bypass => conv,
    };
    let sig = naive_sigmoid(&normed);
    naive_expand(&sig, axis, src.shape()[axis.index()])
}

pub fn naive_c_unit(x: &Tensor, c: &NaiveGate, bn: &NaiveBn) -> Tensor {
    naive_mul(&naive_gate(x, Axis::C, c, bn), x)
}

/// The averaged T/H/W gate stack as a gate map (not yet multiplied in).
pub fn naive_st_gate(src: &Tensor, st: &[NaiveGate; 3], bn: &NaiveBn) -> Tensor {
    let yt = naive_gate(src, Axis::T, &st[0], bn);
    let yh = naive_gate(src, Axis::H, &st[1], bn);
    let yw = naive_gate(src, Axis::W, &st[2], bn);
    let mut out = yt;
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v = (*v + yh.data()[i] + yw.data()[i]) / 3.0;
    }
    out
}

pub fn naive_st_unit(x: &Tensor, st: &[NaiveGate; 3], bn: &NaiveBn) -> Tensor {
    naive_mul(&naive_st_gate(x, st, bn), x)
}

/// Inner C unit refines, the refined map only feeds the ST contexts, and the
/// resulting gate multiplies the untouched input.
pub fn naive_cinst(x: &Tensor, c: &NaiveGate, st: &[NaiveGate; 3], bn: &NaiveBn) -> Tensor {
    let z = naive_c_unit(x, c, bn);
    let y = naive_st_gate(&z, st, bn);
    naive_mul(&y, x)
}

/// Inner ST unit refines, its output builds the C context, and the C gate
/// multiplies the untouched input.
pub fn naive_stinc(x: &Tensor, st: &[NaiveGate; 3], c: &NaiveGate, bn: &NaiveBn) -> Tensor {
    let z = naive_st_unit(x, st, bn);
    let y = naive_gate(&z, Axis::C, c, bn);
    naive_mul(&y, x)
}

pub fn naive_se3d(x: &Tensor, w1: &Tensor, w2: &Tensor) -> Tensor {
    let s = x.shape();
    let (n, c) = (s[0], s[1]);
    let mut pooled = Tensor::zeros(&[n, c]);
    for b in 0..n {
        for ch in 0..c {
            let mut acc = 0.0;
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        acc += x.data()[idx5(s, [b, ch, tt, hh, ww])];
                    }
                }
            }
            pooled.data_mut()[b * c + ch] = acc / (s[2] * s[3] * s[4]) as f64;
        }
    }
    let hidden = naive_relu(&naive_linear(&pooled, w1, None));
    let gate = naive_sigmoid(&naive_linear(&hidden, w2, None));
    let mut out = x.clone();
    for b in 0..n {
        for ch in 0..c {
            let g = gate.data()[b * c + ch];
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        out.data_mut()[idx5(s, [b, ch, tt, hh, ww])] *= g;
                    }
                }
            }
        }
    }
    out
}

pub fn naive_ge3d_g(x: &Tensor) -> Tensor {
    let s = x.shape();
    let mut out = x.clone();
    for b in 0..s[0] {
        for ch in 0..s[1] {
            let mut acc = 0.0;
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        acc += x.data()[idx5(s, [b, ch, tt, hh, ww])];
                    }
                }
            }
            let m = acc / (s[2] * s[3] * s[4]) as f64;
            let g = 1.0 / (1.0 + libm::exp(-m));
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        out.data_mut()[idx5(s, [b, ch, tt, hh, ww])] *= g;
                    }
                }
            }
        }
    }
    out
}

pub fn naive_s3d_g(x: &Tensor, w: &Tensor, bias: &Tensor) -> Tensor {
    let s = x.shape();
    let (n, c) = (s[0], s[1]);
    let mut pooled = Tensor::zeros(&[n, c]);
    for b in 0..n {
        for ch in 0..c {
            let mut acc = 0.0;
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        acc += x.data()[idx5(s, [b, ch, tt, hh, ww])];
                    }
                }
            }
            pooled.data_mut()[b * c + ch] = acc / (s[2] * s[3] * s[4]) as f64;
        }
    }
    let gate = naive_sigmoid(&naive_linear(&pooled, w, Some(bias)));
    let mut out = x.clone();
    for b in 0..n {
        for ch in 0..c {
            let g = gate.data()[b * c + ch];
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        out.data_mut()[idx5(s, [b, ch, tt, hh, ww])] *= g;
                    }
                }
            }
        }
    }
    out
}

/// Plain-tensor weights of a CBAM-style block: shared channel MLP plus the
/// two-channel spatial conv with its BN.
#[derive(Clone, Debug)]
pub struct NaiveCbam {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub spatial: NaiveGate,
}

pub fn naive_cbam3d(x: &Tensor, p: &NaiveCbam, bn: &NaiveBn) -> Tensor {
    let s = x.shape();
    let (n, c) = (s[0], s[1]);
    // Channel attention: shared MLP over avg- and max-pooled descriptors.
    let mut avg = Tensor::zeros(&[n, c]);
    let mut max = Tensor::zeros(&[n, c]);
    for b in 0..n {
        for ch in 0..c {
            let mut acc = 0.0;
            let mut best = f64::NEG_INFINITY;
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        let v = x.data()[idx5(s, [b, ch, tt, hh, ww])];
                        acc += v;
                        if v > best {
                            best = v;
                        }
                    }
                }
            }
            avg.data_mut()[b * c + ch] = acc / (s[2] * s[3] * s[4]) as f64;
            max.data_mut()[b * c + ch] = best;
        }
    }
    let mlp = |v: &Tensor| -> Tensor {
        naive_linear(
            &naive_relu(&naive_linear(v, &p.w1, Some(&p.b1))),
            &p.w2,
            Some(&p.b2),
        )
    };
    let mut summed = mlp(&avg);
    for (v, m) in summed.data_mut().iter_mut().zip(mlp(&max).data()) {
        *v += m;
    }
    let ch_gate = naive_sigmoid(&summed);
    let mut x1 = x.clone();
    for b in 0..n {
        for ch in 0..c {
            let g = ch_gate.data()[b * c + ch];
            for tt in 0..s[2] {
                for hh in 0..s[3] {
                    for ww in 0..s[4] {
                        x1.data_mut()[idx5(s, [b, ch, tt, hh, ww])] *= g;
                    }
                }
            }
        }
    }
    // Spatial attention over the channel-refined map.
    let sp_gate = naive_gate(&x1, Axis::C, &p.spatial, bn);
    naive_mul(&sp_gate, &x1)
}

/// Largest |a - b| over matching positions — the deviation metric used by
/// every oracle comparison.
pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut worst = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = (x - y).abs();
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// Seeded uniform tensor in [-1, 1), shared by oracle and gradient drivers.
pub fn seeded_tensor(seed: u64, shape: &[usize]) -> Tensor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape.to_vec(), data).unwrap()
}
