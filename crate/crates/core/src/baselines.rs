//! Comparison attention blocks: squeeze-excitation (SE3D), its parameter
//! free gating skeleton (GE3D-G), the single-layer sigmoid gate (S3D-G),
//! and the two-stage channel-then-spatial block (CBAM3D).
//!
//! All four consume a [N, C, T, H, W] map and return a map of the same
//! shape. SE3D and CBAM3D squeeze the clip down to one descriptor per
//! channel and run a bottleneck MLP over it; S3D-G uses one full linear
//! layer; GE3D-G has no parameters at all and simply gates each channel by
//! the sigmoid of its own global average.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::attention::build_context;
use crate::autodiff::{init_uniform, BatchNorm, NodeId, ParamId, ParamStore, Tape};
use crate::kernels::sliding_axes;
use crate::tensor::{Axis, TensorError};

fn check_reduction(channels: usize, reduction: usize) -> Result<usize, TensorError> {
    if reduction == 0 || !channels.is_multiple_of(reduction) {
        return Err(TensorError::BadScalar {
            what: "channel reduction must divide the channel count",
            value: reduction as f64,
        });
    }
    Ok(channels / reduction)
}

/// Average-pool T, then H, then W, leaving a [n, c, 1, 1, 1] descriptor.
fn squeeze_avg(tape: &mut Tape, x: NodeId) -> Result<NodeId, TensorError> {
    let p = tape.pool_avg(x, Axis::T)?;
    let p = tape.pool_avg(p, Axis::H)?;
    tape.pool_avg(p, Axis::W)
}

/// Max-pool T, then H, then W — the global per-channel maximum.
fn squeeze_max(tape: &mut Tape, x: NodeId) -> Result<NodeId, TensorError> {
    let p = tape.pool_max(x, Axis::T)?;
    let p = tape.pool_max(p, Axis::H)?;
    tape.pool_max(p, Axis::W)
}

/// Broadcast a [n, c] gate over the clip extents and multiply it into `x`.
fn gate_per_channel(tape: &mut Tape, gate: NodeId, x: NodeId) -> Result<NodeId, TensorError> {
    let shape = tape.value(x).shape().to_vec();
    let g = tape.reshape(gate, &[shape[0], shape[1], 1, 1, 1])?;
    let g = tape.expand(g, Axis::T, shape[2])?;
    let g = tape.expand(g, Axis::H, shape[3])?;
    let g = tape.expand(g, Axis::W, shape[4])?;
    tape.mul(g, x)
}

fn channel_count(tape: &Tape, x: NodeId, expected: usize) -> Result<usize, TensorError> {
    let c = tape.value(x).extent(Axis::C)?;
    if c != expected {
        return Err(TensorError::ChannelMismatch {
            kernel_in: expected,
            input: c,
        });
    }
    Ok(c)
}

/// Squeeze-excitation: global average descriptor, bias-free bottleneck MLP
/// (reduce by `reduction`, ReLU, restore), sigmoid, per-channel gate.
#[derive(Clone, Debug)]
pub struct Se3d {
    pub w1: ParamId,
    pub w2: ParamId,
    channels: usize,
}

impl Se3d {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        channels: usize,
        reduction: usize,
    ) -> Result<Se3d, TensorError> {
        let hidden = check_reduction(channels, reduction)?;
        let w1 = store.add(
            &format!("{name}.w1"),
            init_uniform(rng, &[hidden, channels], channels),
        );
        let w2 = store.add(
            &format!("{name}.w2"),
            init_uniform(rng, &[channels, hidden], hidden),
        );
        Ok(Se3d { w1, w2, channels })
    }

    pub fn apply(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let c = channel_count(tape, x, self.channels)?;
        let n = tape.value(x).shape()[0];
        let pooled = squeeze_avg(tape, x)?;
        let flat = tape.reshape(pooled, &[n, c])?;
        let w1 = tape.param(store, self.w1);
        let hidden = tape.linear(flat, w1, None)?;
        let hidden = tape.relu(hidden);
        let w2 = tape.param(store, self.w2);
        let logits = tape.linear(hidden, w2, None)?;
        let gate = tape.sigmoid(logits);
        gate_per_channel(tape, gate, x)
    }
}

/// The gating skeleton with the MLP removed: each channel is scaled by the
/// sigmoid of its own global average. No parameters.
#[derive(Clone, Debug)]
pub struct Ge3dG;

impl Ge3dG {
    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, TensorError> {
        let pooled = squeeze_avg(tape, x)?;
        let gate = tape.sigmoid(pooled);
        let shape = tape.value(x).shape().to_vec();
        let g = tape.expand(gate, Axis::T, shape[2])?;
        let g = tape.expand(g, Axis::H, shape[3])?;
        let g = tape.expand(g, Axis::W, shape[4])?;
        tape.mul(g, x)
    }
}

/// One full linear layer (with bias) from the pooled descriptor straight to
/// per-channel sigmoid gates.
#[derive(Clone, Debug)]
pub struct S3dG {
    pub w: ParamId,
    pub b: ParamId,
    channels: usize,
}

impl S3dG {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, channels: usize) -> S3dG {
        let w = store.add(
            &format!("{name}.w"),
            init_uniform(rng, &[channels, channels], channels),
        );
        let b = store.add(
            &format!("{name}.b"),
            init_uniform(rng, &[channels], channels),
        );
        S3dG { w, b, channels }
    }

    pub fn apply(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let c = channel_count(tape, x, self.channels)?;
        let n = tape.value(x).shape()[0];
        let pooled = squeeze_avg(tape, x)?;
        let flat = tape.reshape(pooled, &[n, c])?;
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let logits = tape.linear(flat, w, Some(b))?;
        let gate = tape.sigmoid(logits);
        gate_per_channel(tape, gate, x)
    }
}

/// Channel attention (shared biased MLP over average and max descriptors,
/// summed) followed by spatial attention (a 2-slot channel context convolved
/// with a 1 x 2 x k_t x 7 x 7 kernel) on the channel-refined map.
#[derive(Clone, Debug)]
pub struct Cbam3d {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub spatial_kernel: ParamId,
    pub spatial_bn: BatchNorm,
    pub k_t: usize,
    channels: usize,
}

impl Cbam3d {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        channels: usize,
        reduction: usize,
        k_t: usize,
    ) -> Result<Cbam3d, TensorError> {
        if k_t != 1 && k_t != 3 {
            return Err(TensorError::BadKernel {
                expected: "spatial kernel with temporal extent 1 or 3",
                got: vec![1, 2, k_t, 7, 7],
            });
        }
        let hidden = check_reduction(channels, reduction)?;
        let w1 = store.add(
            &format!("{name}.mlp.w1"),
            init_uniform(rng, &[hidden, channels], channels),
        );
        let b1 = store.add(
            &format!("{name}.mlp.b1"),
            init_uniform(rng, &[hidden], channels),
        );
        let w2 = store.add(
            &format!("{name}.mlp.w2"),
            init_uniform(rng, &[channels, hidden], hidden),
        );
        let b2 = store.add(
            &format!("{name}.mlp.b2"),
            init_uniform(rng, &[channels], hidden),
        );
        let fan_in = 2 * k_t * 7 * 7;
        let spatial_kernel = store.add(
            &format!("{name}.spatial.kernel"),
            init_uniform(rng, &[1, 2, k_t, 7, 7], fan_in),
        );
        let spatial_bn = BatchNorm::new(store, &format!("{name}.spatial.bn"), 1, Axis::C.index());
        Ok(Cbam3d {
            w1,
            b1,
            w2,
            b2,
            spatial_kernel,
            spatial_bn,
            k_t,
            channels,
        })
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let c = channel_count(tape, x, self.channels)?;
        let n = tape.value(x).shape()[0];

        // Channel attention: the same MLP scores both descriptors.
        let avg = squeeze_avg(tape, x)?;
        let avg = tape.reshape(avg, &[n, c])?;
        let max = squeeze_max(tape, x)?;
        let max = tape.reshape(max, &[n, c])?;
        let mut scores = Vec::with_capacity(2);
        for desc in [avg, max] {
            let w1 = tape.param(store, self.w1);
            let b1 = tape.param(store, self.b1);
            let h = tape.linear(desc, w1, Some(b1))?;
            let h = tape.relu(h);
            let w2 = tape.param(store, self.w2);
            let b2 = tape.param(store, self.b2);
            scores.push(tape.linear(h, w2, Some(b2))?);
        }
        let summed = tape.add(scores[0], scores[1])?;
        let ch_gate = tape.sigmoid(summed);
        let x1 = gate_per_channel(tape, ch_gate, x)?;

        // Spatial attention on the channel-refined map.
        let ctx = build_context(tape, x1, Axis::C)?;
        let k = tape.param(store, self.spatial_kernel);
        let conv = tape.conv3(ctx, k, Axis::C, sliding_axes(Axis::C))?;
        let normed = self.spatial_bn.apply(tape, store, conv)?;
        let squashed = tape.sigmoid(normed);
        let sp_gate = tape.expand(squashed, Axis::C, c)?;
        tape.mul(sp_gate, x1)
    }
}
