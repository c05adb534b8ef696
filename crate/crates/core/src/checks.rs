//! Named verification drivers shared by the CLI and the test suite:
//! finite-difference gradient checks for every primitive op and every
//! attention module, and naive-loop oracle comparisons for the forward
//! paths.
//!
//! Gradients are compared with the scaled metric
//! max |g_a - g_n| / max(1, |g_a|, |g_n|), which behaves like absolute
//! error near zero and relative error for large entries. Non-scalar
//! outputs are reduced to a scalar by weighting with a fixed seeded random
//! tensor, so every output position influences the check.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{AnyModule, Variant};
use crate::autodiff::{finite_diff_grad, BatchNorm, BnMode, NodeId, ParamStore, Tape};
use crate::baselines::{Cbam3d, Se3d};
use crate::kernels;
use crate::reference::{self, max_abs_diff, seeded_tensor, NaiveBn, NaiveCbam, NaiveGate};
use crate::tensor::{Axis, Tensor, TensorError};

/// Central-difference step shared by every gradient check.
pub const FD_STEP: f64 = 1e-5;
/// Scaled-error tolerance for primitive ops.
pub const PRIMITIVE_TOL: f64 = 1e-6;
/// Scaled-error tolerance for whole attention modules.
pub const MODULE_TOL: f64 = 1e-5;
/// Absolute tolerance for forward oracle comparisons.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum CheckError {
    UnknownName {
        kind: &'static str,
        name: String,
        valid: String,
    },
    Tensor(TensorError),
}

impl core::fmt::Display for CheckError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CheckError::UnknownName { kind, name, valid } => {
                write!(f, "unknown {kind} '{name}'; valid names: {valid}")
            }
            CheckError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for CheckError {}

impl From<TensorError> for CheckError {
    fn from(e: TensorError) -> CheckError {
        CheckError::Tensor(e)
    }
}

/// Result of one named check: worst deviation against its tolerance.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst < self.tol
    }
}

/// max |a - n| / max(1, |a|, |n|) over all entries.
pub fn scaled_max_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        let scale = 1.0f64.max(a.abs()).max(n.abs());
        let err = (a - n).abs() / scale;
        if err > worst {
            worst = err;
        }
    }
    worst
}

const PRIMITIVES: [&str; 18] = [
    "sigmoid",
    "relu",
    "pool_avg",
    "pool_max",
    "concat",
    "expand",
    "add",
    "mul",
    "scale",
    "conv3",
    "conv2",
    "linear",
    "temporal_shift",
    "avgpool_hw2",
    "batchnorm",
    "batchnorm_eval",
    "softmax_xent",
    "sum_all",
];

/// Every name `run_gradcheck` accepts.
pub fn gradcheck_names() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = PRIMITIVES.to_vec();
    names.extend(Variant::ALL.iter().map(|v| v.name()));
    names
}

/// Every name `run_oracle` accepts.
pub fn oracle_names() -> Vec<&'static str> {
    let mut names = alloc::vec![
        "pool_avg",
        "pool_max",
        "concat",
        "expand",
        "conv3",
        "conv2",
        "temporal_shift",
        "linear",
        "sigmoid",
        "relu",
        "mul",
        "batchnorm",
    ];
    names.extend(Variant::ALL.iter().map(|v| v.name()));
    names
}

fn join(names: &[&str]) -> String {
    let mut out = String::new();
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(n);
    }
    out
}

/// Default [T, H, W, C] probe size for a named check: modules get enough
/// channels for the 16x squeeze baselines, primitives stay tiny.
pub fn gradcheck_default_size(name: &str) -> [usize; 4] {
    if Variant::parse(name).is_some() {
        [3, 3, 3, 16]
    } else {
        [3, 4, 4, 4]
    }
}

/// Nudge entries away from zero so ReLU finite differences never straddle
/// the kink.
fn away_from_kink(mut t: Tensor) -> Tensor {
    for v in t.data_mut() {
        if v.abs() < 1e-3 {
            *v += 0.25;
        }
    }
    t
}

type BuildFn<'a> = Box<dyn Fn(&mut Tape, &[NodeId]) -> Result<NodeId, TensorError> + 'a>;

/// Scalar loss of a built graph: the output itself when scalar, else the
/// sum of the output weighted by a fixed seeded tensor.
fn graph_loss(
    tape: &mut Tape,
    out: NodeId,
    weight_seed: u64,
) -> Result<(NodeId, f64), TensorError> {
    let loss = if tape.value(out).is_scalar() {
        out
    } else {
        let r = tape.leaf(seeded_tensor(weight_seed, tape.value(out).shape()));
        let p = tape.mul(out, r)?;
        tape.sum_all(p)
    };
    let v = tape.value(loss).data()[0];
    Ok((loss, v))
}

/// FD-vs-analytic error for a pure graph of plain leaves.
fn probe(inputs: &[Tensor], build: BuildFn, weight_seed: u64) -> Result<f64, TensorError> {
    let mut tape = Tape::new();
    let nodes: Vec<NodeId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &nodes)?;
    let (loss, _) = graph_loss(&mut tape, out, weight_seed)?;
    let mut store = ParamStore::new();
    tape.backward(loss, &mut store)?;

    let mut worst = 0.0f64;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = tape
            .grad(nodes[i])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(x.shape()));
        let f = |p: &Tensor| -> f64 {
            let mut t2 = Tape::new();
            let nodes2: Vec<NodeId> = inputs
                .iter()
                .enumerate()
                .map(|(j, t)| t2.leaf(if j == i { p.clone() } else { t.clone() }))
                .collect();
            let out2 = build(&mut t2, &nodes2).expect("probe graph rebuilds");
            let (_, v) = graph_loss(&mut t2, out2, weight_seed).expect("probe loss");
            v
        };
        let numeric = finite_diff_grad(f, x, FD_STEP);
        worst = worst.max(scaled_max_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn eval_module_loss(
    forward: &mut dyn FnMut(&mut Tape, &ParamStore, NodeId) -> Result<NodeId, TensorError>,
    store: &ParamStore,
    x: &Tensor,
    weight_seed: u64,
) -> Result<f64, TensorError> {
    let mut tape = Tape::new();
    let xn = tape.leaf(x.clone());
    let y = forward(&mut tape, store, xn)?;
    let (_, v) = graph_loss(&mut tape, y, weight_seed)?;
    Ok(v)
}

/// FD-vs-analytic error for a forward that reads parameters from a store:
/// checks the gradient with respect to the input and every parameter.
fn module_probe(
    mut forward: impl FnMut(&mut Tape, &ParamStore, NodeId) -> Result<NodeId, TensorError>,
    store: &ParamStore,
    x: &Tensor,
    weight_seed: u64,
) -> Result<f64, TensorError> {
    let mut tape = Tape::new();
    let xn = tape.leaf(x.clone());
    let y = forward(&mut tape, store, xn)?;
    let (loss, _) = graph_loss(&mut tape, y, weight_seed)?;
    let mut grad_store = store.clone();
    grad_store.zero_grads();
    tape.backward(loss, &mut grad_store)?;

    let analytic_x = tape
        .grad(xn)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape()));
    let numeric_x = finite_diff_grad(
        |p| eval_module_loss(&mut forward, store, p, weight_seed).expect("module forward"),
        x,
        FD_STEP,
    );
    let mut worst = scaled_max_error(&analytic_x, &numeric_x);

    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let analytic = grad_store.grad(id).clone();
        let mut s2 = store.clone();
        let n = s2.value(id).numel();
        let mut numeric = Tensor::zeros(store.value(id).shape());
        for j in 0..n {
            let orig = s2.value(id).data()[j];
            s2.value_mut(id).data_mut()[j] = orig + FD_STEP;
            let plus = eval_module_loss(&mut forward, &s2, x, weight_seed)?;
            s2.value_mut(id).data_mut()[j] = orig - FD_STEP;
            let minus = eval_module_loss(&mut forward, &s2, x, weight_seed)?;
            s2.value_mut(id).data_mut()[j] = orig;
            numeric.data_mut()[j] = (plus - minus) / (2.0 * FD_STEP);
        }
        worst = worst.max(scaled_max_error(&analytic, &numeric));
    }
    Ok(worst)
}

/// Largest reduction from the usual ladder that divides the channel count
/// (so fixtures work at any probe width; 16 is the standard setting).
fn fixture_reduction(channels: usize) -> usize {
    [16usize, 8, 4, 2, 1]
        .into_iter()
        .find(|r| channels.is_multiple_of(*r))
        .unwrap_or(1)
}

/// A module plus its freshly initialised parameter store, sized for
/// `channels`, for gradient checks, oracle comparisons and benchmarks.
pub fn module_fixture(
    variant: Variant,
    seed: u64,
    channels: usize,
) -> Result<(AnyModule, ParamStore), TensorError> {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = fixture_reduction(channels);
    let module = match variant {
        Variant::Se3d => AnyModule::Se3d(Se3d::new(&mut store, &mut rng, "att", channels, r)?),
        Variant::Cbam3d177 => {
            AnyModule::Cbam(Cbam3d::new(&mut store, &mut rng, "att", channels, r, 1)?)
        }
        Variant::Cbam3d377 => {
            AnyModule::Cbam(Cbam3d::new(&mut store, &mut rng, "att", channels, r, 3)?)
        }
        _ => AnyModule::build(variant, &mut store, &mut rng, channels, "att")?,
    };
    Ok((module, store))
}

fn gradcheck_module(variant: Variant, seed: u64, size: [usize; 4]) -> Result<f64, TensorError> {
    let [t, h, w, c] = size;
    let (mut module, store) = module_fixture(variant, seed, c)?;
    module.set_bn_mode(BnMode::Train);
    let x = seeded_tensor(seed.wrapping_add(7), &[1, c, t, h, w]);
    module_probe(
        |tape, store, xn| module.apply(tape, store, xn),
        &store,
        &x,
        seed.wrapping_add(13),
    )
}

fn gradcheck_primitive(
    name: &str,
    seed: u64,
    size: [usize; 4],
) -> Result<Option<f64>, TensorError> {
    let [t, h, w, c] = size;
    let shape = [2, c, t, h, w];
    let ws = seed.wrapping_add(13);
    let x = seeded_tensor(seed, &shape);
    let err = match name {
        "sigmoid" => probe(&[x], Box::new(|tp, n| Ok(tp.sigmoid(n[0]))), ws)?,
        "relu" => probe(
            &[away_from_kink(x)],
            Box::new(|tp, n| Ok(tp.relu(n[0]))),
            ws,
        )?,
        "pool_avg" | "pool_max" => {
            let mx = name == "pool_max";
            let mut worst = 0.0f64;
            for axis in Axis::ALL {
                let e = probe(
                    core::slice::from_ref(&x),
                    Box::new(move |tp, n| {
                        if mx {
                            tp.pool_max(n[0], axis)
                        } else {
                            tp.pool_avg(n[0], axis)
                        }
                    }),
                    ws,
                )?;
                worst = worst.max(e);
            }
            worst
        }
        "concat" => {
            let b = seeded_tensor(seed.wrapping_add(1), &shape);
            probe(
                &[x, b],
                Box::new(|tp, n| tp.concat(n[0], n[1], Axis::C)),
                ws,
            )?
        }
        "expand" => {
            let thin = seeded_tensor(seed, &[2, c, 1, h, w]);
            probe(
                &[thin],
                Box::new(move |tp, n| tp.expand(n[0], Axis::T, t)),
                ws,
            )?
        }
        "add" => {
            let b = seeded_tensor(seed.wrapping_add(1), &shape);
            probe(&[x, b], Box::new(|tp, n| tp.add(n[0], n[1])), ws)?
        }
        "mul" => {
            let b = seeded_tensor(seed.wrapping_add(1), &shape);
            probe(&[x, b], Box::new(|tp, n| tp.mul(n[0], n[1])), ws)?
        }
        "scale" => probe(&[x], Box::new(|tp, n| Ok(tp.scale(n[0], -1.7))), ws)?,
        "conv3" => {
            let src = seeded_tensor(seed, &[2, 2, t, h, w]);
            let k = seeded_tensor(seed.wrapping_add(1), &[1, 2, 3, 3, 3]);
            probe(
                &[src, k],
                Box::new(|tp, n| tp.conv3(n[0], n[1], Axis::C, kernels::sliding_axes(Axis::C))),
                ws,
            )?
        }
        "conv2" => {
            let k = seeded_tensor(seed.wrapping_add(1), &[3, c, 3, 3]);
            let b = seeded_tensor(seed.wrapping_add(2), &[3]);
            probe(
                &[x, k, b],
                Box::new(|tp, n| tp.conv2_frames(n[0], n[1], Some(n[2]))),
                ws,
            )?
        }
        "linear" => {
            let src = seeded_tensor(seed, &[3, 5]);
            let wt = seeded_tensor(seed.wrapping_add(1), &[4, 5]);
            let b = seeded_tensor(seed.wrapping_add(2), &[4]);
            probe(
                &[src, wt, b],
                Box::new(|tp, n| tp.linear(n[0], n[1], Some(n[2]))),
                ws,
            )?
        }
        "temporal_shift" => probe(&[x], Box::new(|tp, n| tp.temporal_shift(n[0], 0.25)), ws)?,
        "avgpool_hw2" => probe(&[x], Box::new(|tp, n| tp.avgpool_hw2(n[0])), ws)?,
        "batchnorm" | "batchnorm_eval" => {
            let mut store = ParamStore::new();
            let mut bn = BatchNorm::new(&mut store, "bn", c, Axis::C.index());
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
            *store.value_mut(bn.gamma) = crate::autodiff::init_uniform(&mut rng, &[c], 1);
            *store.value_mut(bn.beta) = seeded_tensor(seed.wrapping_add(4), &[c]);
            if name == "batchnorm_eval" {
                bn.mode = BnMode::Eval;
                let mut mean = seeded_tensor(seed.wrapping_add(5), &[c]);
                let mut var = seeded_tensor(seed.wrapping_add(6), &[c]);
                for v in var.data_mut() {
                    *v = v.abs() + 0.5;
                }
                core::mem::swap(&mut bn.running_mean, &mut mean);
                core::mem::swap(&mut bn.running_var, &mut var);
            }
            module_probe(|tape, store, xn| bn.apply(tape, store, xn), &store, &x, ws)?
        }
        "softmax_xent" => {
            let k = 4usize;
            let logits = seeded_tensor(seed, &[5, k]);
            let labels: Vec<usize> = (0..5).map(|i| i % k).collect();
            probe(
                &[logits],
                Box::new(move |tp, n| tp.softmax_xent(n[0], &labels)),
                ws,
            )?
        }
        "sum_all" => probe(&[x], Box::new(|tp, n| Ok(tp.sum_all(n[0]))), ws)?,
        _ => return Ok(None),
    };
    Ok(Some(err))
}

/// Run the named finite-difference check. Module names use the module
/// tolerance; primitive names the tighter primitive tolerance.
pub fn run_gradcheck(
    name: &str,
    seed: u64,
    size: Option<[usize; 4]>,
) -> Result<CheckOutcome, CheckError> {
    let size = size.unwrap_or_else(|| gradcheck_default_size(name));
    if let Some(variant) = Variant::parse(name) {
        let worst = gradcheck_module(variant, seed, size)?;
        return Ok(CheckOutcome {
            name: name.to_string(),
            worst,
            tol: MODULE_TOL,
        });
    }
    match gradcheck_primitive(name, seed, size)? {
        Some(worst) => Ok(CheckOutcome {
            name: name.to_string(),
            worst,
            tol: PRIMITIVE_TOL,
        }),
        None => Err(CheckError::UnknownName {
            kind: "gradcheck target",
            name: name.to_string(),
            valid: join(&gradcheck_names()),
        }),
    }
}

fn naive_gate_of(store: &ParamStore, g: &crate::attention::Gate) -> NaiveGate {
    NaiveGate {
        kernel: store.value(g.kernel).clone(),
        gamma: store.value(g.bn.gamma).clone(),
        beta: store.value(g.bn.beta).clone(),
    }
}

fn st_triple(gates: &[NaiveGate]) -> [NaiveGate; 3] {
    [gates[0].clone(), gates[1].clone(), gates[2].clone()]
}

/// The straight-line forward of a whole variant, composed from the naive
/// single-module oracles.
fn naive_variant(variant: Variant, module: &AnyModule, store: &ParamStore, x: &Tensor) -> Tensor {
    let bn = NaiveBn::Train;
    let gates: Vec<NaiveGate> = module
        .gates()
        .into_iter()
        .map(|g| naive_gate_of(store, g))
        .collect();
    match variant {
        Variant::C => reference::naive_c_unit(x, &gates[0], &bn),
        Variant::St => reference::naive_st_unit(x, &st_triple(&gates), &bn),
        Variant::CinSt => reference::naive_cinst(x, &gates[0], &st_triple(&gates[1..]), &bn),
        Variant::StinC => reference::naive_stinc(x, &st_triple(&gates), &gates[3], &bn),
        Variant::CStSeq => {
            let mid = reference::naive_c_unit(x, &gates[0], &bn);
            reference::naive_st_unit(&mid, &st_triple(&gates[1..]), &bn)
        }
        Variant::StCSeq => {
            let mid = reference::naive_st_unit(x, &st_triple(&gates), &bn);
            reference::naive_c_unit(&mid, &gates[3], &bn)
        }
        Variant::CStPar => {
            let a = reference::naive_c_unit(x, &gates[0], &bn);
            let b = reference::naive_st_unit(x, &st_triple(&gates[1..]), &bn);
            mean_of(&a, &b)
        }
        Variant::CinStStinCSeq => {
            let mid = reference::naive_cinst(x, &gates[0], &st_triple(&gates[1..]), &bn);
            reference::naive_stinc(&mid, &st_triple(&gates[4..]), &gates[7], &bn)
        }
        Variant::StinCCinStSeq => {
            let mid = reference::naive_stinc(x, &st_triple(&gates), &gates[3], &bn);
            reference::naive_cinst(&mid, &gates[4], &st_triple(&gates[5..]), &bn)
        }
        Variant::CinStStinCPar => {
            let a = reference::naive_cinst(x, &gates[0], &st_triple(&gates[1..]), &bn);
            let b = reference::naive_stinc(x, &st_triple(&gates[4..]), &gates[7], &bn);
            mean_of(&a, &b)
        }
        Variant::Se3d => match module {
            AnyModule::Se3d(m) => reference::naive_se3d(x, store.value(m.w1), store.value(m.w2)),
            _ => unreachable!(),
        },
        Variant::Ge3dG => reference::naive_ge3d_g(x),
        Variant::S3dG => match module {
            AnyModule::S3dG(m) => reference::naive_s3d_g(x, store.value(m.w), store.value(m.b)),
            _ => unreachable!(),
        },
        Variant::Cbam3d177 | Variant::Cbam3d377 => match module {
            AnyModule::Cbam(m) => {
                let p = NaiveCbam {
                    w1: store.value(m.w1).clone(),
                    b1: store.value(m.b1).clone(),
                    w2: store.value(m.w2).clone(),
                    b2: store.value(m.b2).clone(),
                    spatial: NaiveGate {
                        kernel: store.value(m.spatial_kernel).clone(),
                        gamma: store.value(m.spatial_bn.gamma).clone(),
                        beta: store.value(m.spatial_bn.beta).clone(),
                    },
                };
                reference::naive_cbam3d(x, &p, &bn)
            }
            _ => unreachable!(),
        },
    }
}

fn mean_of(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = a.clone();
    for (v, bv) in out.data_mut().iter_mut().zip(b.data()) {
        *v = 0.5 * (*v + bv);
    }
    out
}

/// The shape every oracle comparison runs at.
pub const ORACLE_SHAPE: [usize; 5] = [2, 8, 4, 8, 8];

fn oracle_module(variant: Variant, seed: u64) -> Result<f64, TensorError> {
    let c = ORACLE_SHAPE[1];
    let (mut module, store) = module_fixture(variant, seed, c)?;
    module.set_bn_mode(BnMode::Train);
    let x = seeded_tensor(seed.wrapping_add(7), &ORACLE_SHAPE);
    let mut tape = Tape::new();
    let xn = tape.leaf(x.clone());
    let y = module.apply(&mut tape, &store, xn)?;
    let expect = naive_variant(variant, &module, &store, &x);
    Ok(max_abs_diff(tape.value(y), &expect))
}

fn oracle_primitive(name: &str, seed: u64) -> Result<Option<f64>, TensorError> {
    let x = seeded_tensor(seed, &ORACLE_SHAPE);
    let dev = match name {
        "pool_avg" => {
            let mut worst = 0.0f64;
            for axis in Axis::ALL {
                let got = kernels::pool_avg(&x, axis)?;
                worst = worst.max(max_abs_diff(&got, &reference::naive_pool_avg(&x, axis)));
            }
            worst
        }
        "pool_max" => {
            let mut worst = 0.0f64;
            for axis in Axis::ALL {
                let (got, _) = kernels::pool_max(&x, axis)?;
                worst = worst.max(max_abs_diff(&got, &reference::naive_pool_max(&x, axis)));
            }
            worst
        }
        "concat" => {
            let b = kernels::scale(&x, -2.0);
            let mut worst = 0.0f64;
            for axis in Axis::ALL {
                let got = kernels::concat_along(&x, &b, axis)?;
                worst = worst.max(max_abs_diff(&got, &reference::naive_concat(&x, &b, axis)));
            }
            worst
        }
        "expand" => {
            let mut worst = 0.0f64;
            for axis in Axis::ALL {
                let thin = kernels::pool_avg(&x, axis)?;
                let extent = x.extent(axis)?;
                let got = kernels::expand_along(&thin, axis, extent)?;
                worst = worst.max(max_abs_diff(
                    &got,
                    &reference::naive_expand(&thin, axis, extent),
                ));
            }
            worst
        }
        "conv3" => {
            let mut worst = 0.0f64;
            for channel in Axis::ALL.into_iter().filter(|a| *a != Axis::N) {
                let mut shape = ORACLE_SHAPE;
                shape[channel.index()] = 2;
                let src = seeded_tensor(seed.wrapping_add(channel.index() as u64), &shape);
                let k = seeded_tensor(seed.wrapping_add(11), &[1, 2, 3, 3, 3]);
                let sliding = kernels::sliding_axes(channel);
                let got = kernels::conv3_over(&src, &k, channel, sliding)?;
                worst = worst.max(max_abs_diff(
                    &got,
                    &reference::naive_conv3(&src, &k, channel, sliding),
                ));
            }
            worst
        }
        "conv2" => {
            let k = seeded_tensor(seed.wrapping_add(1), &[4, ORACLE_SHAPE[1], 3, 3]);
            let b = seeded_tensor(seed.wrapping_add(2), &[4]);
            let got = kernels::conv2_frames(&x, &k, Some(&b))?;
            max_abs_diff(&got, &reference::naive_conv2_frames(&x, &k, Some(&b)))
        }
        "temporal_shift" => {
            let got = kernels::temporal_shift(&x, 0.25)?;
            max_abs_diff(&got, &reference::naive_temporal_shift(&x, 0.25))
        }
        "linear" => {
            let src = seeded_tensor(seed, &[6, 10]);
            let wt = seeded_tensor(seed.wrapping_add(1), &[7, 10]);
            let b = seeded_tensor(seed.wrapping_add(2), &[7]);
            let got = kernels::linear(&src, &wt, Some(&b))?;
            max_abs_diff(&got, &reference::naive_linear(&src, &wt, Some(&b)))
        }
        "sigmoid" => max_abs_diff(&kernels::sigmoid(&x), &reference::naive_sigmoid(&x)),
        "relu" => max_abs_diff(&kernels::relu(&x), &reference::naive_relu(&x)),
        "mul" => {
            let b = seeded_tensor(seed.wrapping_add(1), &ORACLE_SHAPE);
            max_abs_diff(&kernels::ew_mul(&x, &b)?, &reference::naive_mul(&x, &b))
        }
        "batchnorm" => {
            let c = ORACLE_SHAPE[1];
            let gamma = seeded_tensor(seed.wrapping_add(1), &[c]);
            let beta = seeded_tensor(seed.wrapping_add(2), &[c]);
            let axis = Axis::C.index();
            let (mean, var) = kernels::batch_stats(&x, axis);
            let got = kernels::batchnorm_apply(&x, axis, &mean, &var, &gamma, &beta, 1e-5);
            max_abs_diff(
                &got,
                &reference::naive_bn_train(&x, axis, &gamma, &beta, 1e-5),
            )
        }
        _ => return Ok(None),
    };
    Ok(Some(dev))
}

/// Run the named forward oracle comparison at [`ORACLE_SHAPE`].
pub fn run_oracle(name: &str, seed: u64) -> Result<CheckOutcome, CheckError> {
    if let Some(variant) = Variant::parse(name) {
        let worst = oracle_module(variant, seed)?;
        return Ok(CheckOutcome {
            name: name.to_string(),
            worst,
            tol: ORACLE_TOL,
        });
    }
    match oracle_primitive(name, seed)? {
        Some(worst) => Ok(CheckOutcome {
            name: name.to_string(),
            worst,
            tol: ORACLE_TOL,
        }),
        None => Err(CheckError::UnknownName {
            kind: "oracle op",
            name: name.to_string(),
            valid: join(&oracle_names()),
        }),
    }
}
