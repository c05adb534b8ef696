//! Reverse-mode automatic differentiation over the numeric kernels.
//!
//! A [`Tape`] records each operation as a node holding its forward value and
//! whatever the hand-derived backward rule needs (argmax maps, batch
//! statistics, the sigmoid output). [`Tape::backward`] walks the nodes in
//! reverse creation order, accumulating gradients additively into per-node
//! buffers and into the [`ParamStore`] for parameter leaves.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::kernels;
use crate::tensor::{Axis, Tensor, TensorError};

/// Handle to a parameter owned by a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

/// A learnable tensor with an accumulated gradient and a report-friendly name.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Owns every parameter of a model; tapes reference them by [`ParamId`].
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: String::from(name),
            value,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    fn accumulate_grad(&mut self, id: ParamId, g: &Tensor) {
        self.params[id.0]
            .grad
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .for_each(|(acc, &v)| *acc += v);
    }
}

/// Centered uniform initialisation scaled by 1/sqrt(fan_in).
pub fn init_uniform<R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / libm::sqrt(fan_in as f64);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape.to_vec(), data).expect("shape/data constructed consistently")
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum BnCache {
    /// Batch statistics (mean, biased variance) captured during forward.
    Train { mean: Tensor, var: Tensor },
    /// The running statistics the eval forward used.
    Eval { mean: Tensor, var: Tensor },
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    PoolAvg {
        x: NodeId,
        axis: usize,
    },
    PoolMax {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Concat {
        a: NodeId,
        b: NodeId,
        axis: usize,
    },
    Expand {
        x: NodeId,
        axis: usize,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        s: f64,
    },
    Sigmoid {
        x: NodeId,
    },
    Relu {
        x: NodeId,
    },
    Conv3 {
        x: NodeId,
        kernel: NodeId,
        channel_axis: Axis,
        sliding: [Axis; 3],
    },
    Conv2Frames {
        x: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
    },
    Linear {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    TemporalShift {
        x: NodeId,
        c_shift: usize,
    },
    AvgPoolHw2 {
        x: NodeId,
    },
    Reshape {
        x: NodeId,
    },
    SumAll {
        x: NodeId,
    },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        axis: usize,
        eps: f64,
        cache: BnCache,
    },
    SoftmaxXent {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Records a single forward computation and replays it in reverse for
/// gradients. Node gradients persist on the tape and accumulate across
/// repeated [`Tape::backward`] calls.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Accumulated gradient of a node, if backward has reached it.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Record an input (non-parameter leaf).
    pub fn leaf(&mut self, x: Tensor) -> NodeId {
        self.push(Op::Leaf, x)
    }

    /// Record a parameter leaf by copying its current value from the store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(Op::Param(id), store.value(id).clone())
    }

    pub fn pool_avg(&mut self, x: NodeId, axis: Axis) -> Result<NodeId, TensorError> {
        let y = kernels::pool_avg(self.value(x), axis)?;
        Ok(self.push(
            Op::PoolAvg {
                x,
                axis: axis.index(),
            },
            y,
        ))
    }

    pub fn pool_max(&mut self, x: NodeId, axis: Axis) -> Result<NodeId, TensorError> {
        let (y, argmax) = kernels::pool_max(self.value(x), axis)?;
        Ok(self.push(Op::PoolMax { x, argmax }, y))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId, axis: Axis) -> Result<NodeId, TensorError> {
        let y = kernels::concat_along(self.value(a), self.value(b), axis)?;
        Ok(self.push(
            Op::Concat {
                a,
                b,
                axis: axis.index(),
            },
            y,
        ))
    }

    pub fn expand(&mut self, x: NodeId, axis: Axis, extent: usize) -> Result<NodeId, TensorError> {
        let y = kernels::expand_along(self.value(x), axis, extent)?;
        Ok(self.push(
            Op::Expand {
                x,
                axis: axis.index(),
            },
            y,
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let y = kernels::ew_add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add { a, b }, y))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let y = kernels::ew_mul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Mul { a, b }, y))
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> NodeId {
        let y = kernels::scale(self.value(x), s);
        self.push(Op::Scale { x, s }, y)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let y = kernels::sigmoid(self.value(x));
        self.push(Op::Sigmoid { x }, y)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let y = kernels::relu(self.value(x));
        self.push(Op::Relu { x }, y)
    }

    pub fn conv3(
        &mut self,
        x: NodeId,
        kernel: NodeId,
        channel_axis: Axis,
        sliding: [Axis; 3],
    ) -> Result<NodeId, TensorError> {
        let y = kernels::conv3_over(self.value(x), self.value(kernel), channel_axis, sliding)?;
        Ok(self.push(
            Op::Conv3 {
                x,
                kernel,
                channel_axis,
                sliding,
            },
            y,
        ))
    }

    pub fn conv2_frames(
        &mut self,
        x: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
    ) -> Result<NodeId, TensorError> {
        let y = kernels::conv2_frames(
            self.value(x),
            self.value(kernel),
            bias.map(|b| self.value(b)),
        )?;
        Ok(self.push(Op::Conv2Frames { x, kernel, bias }, y))
    }

    pub fn linear(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    ) -> Result<NodeId, TensorError> {
        let y = kernels::linear(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(Op::Linear { x, w, b }, y))
    }

    pub fn temporal_shift(&mut self, x: NodeId, fraction: f64) -> Result<NodeId, TensorError> {
        Axis::C.resolve(self.value(x))?;
        let c_shift = kernels::shift_channels(self.value(x).shape()[1], fraction)?;
        let y = kernels::temporal_shift_raw(self.value(x), c_shift, false);
        Ok(self.push(Op::TemporalShift { x, c_shift }, y))
    }

    pub fn avgpool_hw2(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let y = kernels::avgpool_hw2(self.value(x))?;
        Ok(self.push(Op::AvgPoolHw2 { x }, y))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, TensorError> {
        let y = self.value(x).reshaped(shape)?;
        Ok(self.push(Op::Reshape { x }, y))
    }

    /// Sum of every entry, as a scalar node.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).data().iter().sum();
        self.push(Op::SumAll { x }, Tensor::scalar(total))
    }

    /// Mean softmax cross-entropy against integer labels, as a scalar node.
    pub fn softmax_xent(
        &mut self,
        logits: NodeId,
        labels: &[usize],
    ) -> Result<NodeId, TensorError> {
        let (loss, probs) = kernels::softmax_xent(self.value(logits), labels)?;
        Ok(self.push(
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            Tensor::scalar(loss),
        ))
    }

    fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        match &mut grads[id.0] {
            Some(acc) => acc
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .for_each(|(a, &v)| *a += v),
            slot => *slot = Some(g),
        }
    }

    /// Reverse sweep from a scalar root, accumulating into node gradients
    /// and parameter gradients. May be called repeatedly; contributions add.
    pub fn backward(&mut self, root: NodeId, store: &mut ParamStore) -> Result<(), TensorError> {
        if self.nodes[root.0].value.numel() != 1 {
            return Err(TensorError::BadScalar {
                what: "backward root element count",
                value: self.nodes[root.0].value.numel() as f64,
            });
        }
        let mut local: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        local[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = local[i].take() else { continue };
            // Persist this node's gradient so callers can read it after the
            // sweep; repeated backward calls keep adding here.
            match &mut self.grads[i] {
                Some(acc) => acc
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(a, &v)| *a += v),
                slot => *slot = Some(g.clone()),
            }
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(pid) => store.accumulate_grad(*pid, &g),
                Op::PoolAvg { x, axis } => {
                    let extent = self.nodes[x.0].value.shape()[*axis];
                    let ax = Axis::ALL[*axis];
                    let spread = kernels::scale(
                        &kernels::expand_along(&g, ax, extent)
                            .expect("pool output has unit extent on the pooled axis"),
                        1.0 / extent as f64,
                    );
                    Self::accumulate(&mut local, *x, spread);
                }
                Op::PoolMax { x, argmax } => {
                    let mut gx = Tensor::zeros(self.nodes[x.0].value.shape());
                    for (out_at, &src) in argmax.iter().enumerate() {
                        gx.data_mut()[src] += g.data()[out_at];
                    }
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::Concat { a, b, axis } => {
                    // Split the upstream gradient back into the two slot
                    // ranges along the concatenated axis.
                    let sa = self.nodes[a.0].value.shape();
                    let (la, lb) = (sa[*axis], self.nodes[b.0].value.shape()[*axis]);
                    let outer: usize = sa[..*axis].iter().product();
                    let inner: usize = sa[*axis + 1..].iter().product();
                    let mut ga = Tensor::zeros(sa);
                    let mut gb = Tensor::zeros(self.nodes[b.0].value.shape());
                    let gd = g.data();
                    for o in 0..outer {
                        for k in 0..la {
                            let src = (o * (la + lb) + k) * inner;
                            let dst = (o * la + k) * inner;
                            ga.data_mut()[dst..dst + inner].copy_from_slice(&gd[src..src + inner]);
                        }
                        for k in 0..lb {
                            let src = (o * (la + lb) + la + k) * inner;
                            let dst = (o * lb + k) * inner;
                            gb.data_mut()[dst..dst + inner].copy_from_slice(&gd[src..src + inner]);
                        }
                    }
                    Self::accumulate(&mut local, *a, ga);
                    Self::accumulate(&mut local, *b, gb);
                }
                Op::Expand { x, axis } => {
                    Self::accumulate(&mut local, *x, kernels::sum_along(&g, *axis));
                }
                Op::Add { a, b } => {
                    Self::accumulate(&mut local, *a, g.clone());
                    Self::accumulate(&mut local, *b, g.clone());
                }
                Op::Mul { a, b } => {
                    let ga = kernels::ew_mul(&g, &self.nodes[b.0].value)
                        .expect("mul operands recorded with equal shapes");
                    let gb = kernels::ew_mul(&g, &self.nodes[a.0].value)
                        .expect("mul operands recorded with equal shapes");
                    Self::accumulate(&mut local, *a, ga);
                    Self::accumulate(&mut local, *b, gb);
                }
                Op::Scale { x, s } => {
                    Self::accumulate(&mut local, *x, kernels::scale(&g, *s));
                }
                Op::Sigmoid { x } => {
                    // dy/dx = y (1 - y) with y the cached forward output.
                    let mut gx = g.clone();
                    gx.data_mut()
                        .iter_mut()
                        .zip(self.nodes[i].value.data())
                        .for_each(|(gv, &y)| *gv *= y * (1.0 - y));
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::Relu { x } => {
                    let mut gx = g.clone();
                    gx.data_mut()
                        .iter_mut()
                        .zip(self.nodes[x.0].value.data())
                        .for_each(|(gv, &xv)| {
                            if xv <= 0.0 {
                                *gv = 0.0;
                            }
                        });
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::Conv3 {
                    x,
                    kernel,
                    channel_axis,
                    sliding,
                } => {
                    let (gx, gk) = kernels::conv3_over_backward(
                        &self.nodes[x.0].value,
                        &self.nodes[kernel.0].value,
                        &g,
                        *channel_axis,
                        *sliding,
                    )
                    .expect("backward reuses the arguments the forward validated");
                    Self::accumulate(&mut local, *x, gx);
                    Self::accumulate(&mut local, *kernel, gk);
                }
                Op::Conv2Frames { x, kernel, bias } => {
                    let (gx, gk, gb) = kernels::conv2_frames_backward(
                        &self.nodes[x.0].value,
                        &self.nodes[kernel.0].value,
                        &g,
                        bias.is_some(),
                    )
                    .expect("backward reuses the arguments the forward validated");
                    Self::accumulate(&mut local, *x, gx);
                    Self::accumulate(&mut local, *kernel, gk);
                    if let (Some(b), Some(gb)) = (bias, gb) {
                        Self::accumulate(&mut local, *b, gb);
                    }
                }
                Op::Linear { x, w, b } => {
                    let (gx, gw, gb) = kernels::linear_backward(
                        &self.nodes[x.0].value,
                        &self.nodes[w.0].value,
                        &g,
                    );
                    Self::accumulate(&mut local, *x, gx);
                    Self::accumulate(&mut local, *w, gw);
                    if let Some(b) = b {
                        Self::accumulate(&mut local, *b, gb);
                    }
                }
                Op::TemporalShift { x, c_shift } => {
                    // Adjoint of a shift is the inverse shift.
                    let gx = kernels::temporal_shift_raw(&g, *c_shift, true);
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::AvgPoolHw2 { x } => {
                    let gx = kernels::avgpool_hw2_backward(&g, self.nodes[x.0].value.shape());
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::Reshape { x } => {
                    let gx = g
                        .reshaped(self.nodes[x.0].value.shape())
                        .expect("reshape preserves element count");
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::SumAll { x } => {
                    let gx = Tensor::filled(self.nodes[x.0].value.shape(), g.data()[0]);
                    Self::accumulate(&mut local, *x, gx);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    axis,
                    eps,
                    cache,
                } => {
                    let xv = &self.nodes[x.0].value;
                    let gammav = &self.nodes[gamma.0].value;
                    let (gx, ggamma, gbeta) = match cache {
                        BnCache::Train { mean, var } => kernels::batchnorm_train_backward(
                            xv, *axis, mean, var, gammav, *eps, &g,
                        ),
                        BnCache::Eval { mean, var } => {
                            kernels::batchnorm_eval_backward(xv, *axis, mean, var, gammav, *eps, &g)
                        }
                    };
                    Self::accumulate(&mut local, *x, gx);
                    Self::accumulate(&mut local, *gamma, ggamma);
                    Self::accumulate(&mut local, *beta, gbeta);
                }
                Op::SoftmaxXent {
                    logits,
                    labels,
                    probs,
                } => {
                    let n = labels.len();
                    let mut gx = probs.clone();
                    for (row, &lab) in labels.iter().enumerate() {
                        let k = probs.shape()[1];
                        gx.data_mut()[row * k + lab] -= 1.0;
                    }
                    let scale = g.data()[0] / n as f64;
                    gx.data_mut().iter_mut().for_each(|v| *v *= scale);
                    Self::accumulate(&mut local, *logits, gx);
                }
            }
        }
        Ok(())
    }
}

/// Batch normalisation over one raw axis, with train / eval / bypass modes
/// and running statistics updated as a forward side effect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
    Bypass,
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
    pub mode: BnMode,
    axis: usize,
    channels: usize,
}

impl BatchNorm {
    /// Fresh BN over `channels` entries of the given raw axis: gamma 1,
    /// beta 0, running mean 0, running variance 1, eps 1e-5, momentum 0.1.
    pub fn new(store: &mut ParamStore, name: &str, channels: usize, axis: usize) -> BatchNorm {
        let mut gname = String::from(name);
        gname.push_str(".gamma");
        let mut bname = String::from(name);
        bname.push_str(".beta");
        BatchNorm {
            gamma: store.add(&gname, Tensor::filled(&[channels], 1.0)),
            beta: store.add(&bname, Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            eps: 1e-5,
            momentum: 0.1,
            mode: BnMode::Train,
            axis,
            channels,
        }
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        if let BnMode::Bypass = self.mode {
            return Ok(x); // exact identity: no node, no gradient path
        }
        let xv = tape.value(x);
        if xv.rank() <= self.axis || xv.shape()[self.axis] != self.channels {
            return Err(TensorError::ShapeMismatch {
                left: xv.shape().to_vec(),
                right: vec![self.channels],
            });
        }
        let gamma = tape.param(store, self.gamma);
        let beta = tape.param(store, self.beta);
        let (cache, y) = match self.mode {
            BnMode::Train => {
                let (mean, var) = kernels::batch_stats(tape.value(x), self.axis);
                let y = kernels::batchnorm_apply(
                    tape.value(x),
                    self.axis,
                    &mean,
                    &var,
                    tape.value(gamma),
                    tape.value(beta),
                    self.eps,
                );
                for c in 0..self.channels {
                    let rm = &mut self.running_mean.data_mut()[c];
                    *rm = (1.0 - self.momentum) * *rm + self.momentum * mean.data()[c];
                    let rv = &mut self.running_var.data_mut()[c];
                    *rv = (1.0 - self.momentum) * *rv + self.momentum * var.data()[c];
                }
                (BnCache::Train { mean, var }, y)
            }
            BnMode::Eval => {
                let mean = self.running_mean.clone();
                let var = self.running_var.clone();
                let y = kernels::batchnorm_apply(
                    tape.value(x),
                    self.axis,
                    &mean,
                    &var,
                    tape.value(gamma),
                    tape.value(beta),
                    self.eps,
                );
                (BnCache::Eval { mean, var }, y)
            }
            BnMode::Bypass => unreachable!("handled above"),
        };
        Ok(tape.push(
            Op::BatchNorm {
                x,
                gamma,
                beta,
                axis: self.axis,
                eps: self.eps,
                cache,
            },
            y,
        ))
    }
}

/// SGD with momentum and weight decay:
/// v <- momentum*v + grad + weight_decay*value; value <- value - lr*v;
/// gradients are zeroed after each step.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Result<Sgd, TensorError> {
        if lr <= 0.0 {
            return Err(TensorError::BadScalar {
                what: "learning rate",
                value: lr,
            });
        }
        Ok(Sgd {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        })
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        while self.velocity.len() < store.len() {
            let id = ParamId(self.velocity.len());
            self.velocity.push(Tensor::zeros(store.value(id).shape()));
        }
        for (i, v) in self.velocity.iter_mut().enumerate() {
            let p = &mut store.params[i];
            for j in 0..v.numel() {
                let g = p.grad.data()[j] + self.weight_decay * p.value.data()[j];
                let vj = self.momentum * v.data()[j] + g;
                v.data_mut()[j] = vj;
                p.value.data_mut()[j] -= self.lr * vj;
            }
        }
        store.zero_grads();
    }
}

/// Central-difference gradient of a scalar-valued function at `x`.
pub fn finite_diff_grad<F: FnMut(&Tensor) -> f64>(mut f: F, x: &Tensor, step: f64) -> Tensor {
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    grad
}
