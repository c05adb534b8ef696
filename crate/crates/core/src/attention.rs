//! The axial attention family: context-pair builders, the C and ST single
//! units, the nested CinST / STinC modules, and their sequential and
//! parallel combinations.
//!
//! Every unit follows the same shape: squeeze one axis down to an
//! (average, max) pair, treat that 2-slot axis as the input channel of a
//! tiny 3x3x3 convolution over the remaining axes, normalise, squash to a
//! sigmoid gate, re-expand, and multiply into a feature map. The nested
//! modules differ only in *which* tensor supplies the contexts: the inner
//! unit's refined output builds the contexts while the final gate always
//! multiplies the original input.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{init_uniform, BatchNorm, BnMode, NodeId, ParamId, ParamStore, Tape};
use crate::baselines::{Cbam3d, Ge3dG, S3dG, Se3d};
use crate::kernels::sliding_axes;
use crate::tensor::{Axis, TensorError};

/// Every selectable attention module, in the naming scheme used by configs
/// and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    C,
    St,
    CStSeq,
    StCSeq,
    CStPar,
    CinSt,
    StinC,
    CinStStinCSeq,
    StinCCinStSeq,
    CinStStinCPar,
    Se3d,
    Ge3dG,
    S3dG,
    Cbam3d177,
    Cbam3d377,
}

impl Variant {
    pub const ALL: [Variant; 15] = [
        Variant::C,
        Variant::St,
        Variant::CStSeq,
        Variant::StCSeq,
        Variant::CStPar,
        Variant::CinSt,
        Variant::StinC,
        Variant::CinStStinCSeq,
        Variant::StinCCinStSeq,
        Variant::CinStStinCPar,
        Variant::Se3d,
        Variant::Ge3dG,
        Variant::S3dG,
        Variant::Cbam3d177,
        Variant::Cbam3d377,
    ];

    /// The ten axial-attention variants (as opposed to the baselines).
    pub const AIA: [Variant; 10] = [
        Variant::C,
        Variant::St,
        Variant::CStSeq,
        Variant::StCSeq,
        Variant::CStPar,
        Variant::CinSt,
        Variant::StinC,
        Variant::CinStStinCSeq,
        Variant::StinCCinStSeq,
        Variant::CinStStinCPar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::C => "c",
            Variant::St => "st",
            Variant::CStSeq => "c_st_seq",
            Variant::StCSeq => "st_c_seq",
            Variant::CStPar => "c_st_par",
            Variant::CinSt => "cinst",
            Variant::StinC => "stinc",
            Variant::CinStStinCSeq => "cinst_stinc_seq",
            Variant::StinCCinStSeq => "stinc_cinst_seq",
            Variant::CinStStinCPar => "cinst_stinc_par",
            Variant::Se3d => "se3d",
            Variant::Ge3dG => "ge3d_g",
            Variant::S3dG => "s3d_g",
            Variant::Cbam3d177 => "cbam3d_177",
            Variant::Cbam3d377 => "cbam3d_377",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Comma-separated list of all valid names (for error messages).
    pub fn valid_names() -> String {
        let mut out = String::new();
        for (i, v) in Variant::ALL.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(v.name());
        }
        out
    }
}

/// One gate head: a 1x2x3x3x3 conv kernel over a squeezed axis plus its
/// batch norm.
#[derive(Clone, Debug)]
pub struct Gate {
    pub kernel: ParamId,
    pub bn: BatchNorm,
    pub axis: Axis,
}

/// Number of weights in one gate kernel (1 x 2 x 3 x 3 x 3).
pub const GATE_KERNEL_WEIGHTS: usize = 54;

impl Gate {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, axis: Axis) -> Gate {
        let shape = [1, 2, 3, 3, 3];
        let kernel = store.add(
            &format!("{name}.kernel"),
            init_uniform(rng, &shape, GATE_KERNEL_WEIGHTS),
        );
        let bn = BatchNorm::new(store, &format!("{name}.bn"), 1, axis.index());
        Gate { kernel, bn, axis }
    }

    /// Build the context pair from `src` over this gate's axis, run
    /// conv -> BN -> sigmoid, and expand back to `src`'s full extent.
    pub fn gate_map(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        src: NodeId,
    ) -> Result<NodeId, TensorError> {
        if store.value(self.kernel).shape() != [1, 2, 3, 3, 3] {
            return Err(TensorError::BadKernel {
                expected: "1 x 2 x 3 x 3 x 3",
                got: store.value(self.kernel).shape().to_vec(),
            });
        }
        let extent = tape.value(src).extent(self.axis)?;
        let ctx = build_context(tape, src, self.axis)?;
        let k = tape.param(store, self.kernel);
        let conv = tape.conv3(ctx, k, self.axis, sliding_axes(self.axis))?;
        let normed = self.bn.apply(tape, store, conv)?;
        let squashed = tape.sigmoid(normed);
        tape.expand(squashed, self.axis, extent)
    }
}

/// Concat(AvgPool, MaxPool) along one axis — the 2-slot context pair, with
/// the average in slot 0.
pub fn build_context(tape: &mut Tape, x: NodeId, axis: Axis) -> Result<NodeId, TensorError> {
    let avg = tape.pool_avg(x, axis)?;
    let max = tape.pool_max(x, axis)?;
    tape.concat(avg, max, axis)
}

/// Channel attention: one gate over the C axis.
#[derive(Clone, Debug)]
pub struct CUnit {
    pub gate: Gate,
}

impl CUnit {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str) -> CUnit {
        CUnit {
            gate: Gate::new(store, rng, &format!("{name}.c"), Axis::C),
        }
    }

    pub fn gate_map(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        src: NodeId,
    ) -> Result<NodeId, TensorError> {
        self.gate.gate_map(tape, store, src)
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let y = self.gate_map(tape, store, x)?;
        tape.mul(y, x)
    }
}

/// Spatio-temporal attention: gates over T, H, and W, averaged.
#[derive(Clone, Debug)]
pub struct StUnit {
    pub t: Gate,
    pub h: Gate,
    pub w: Gate,
}

impl StUnit {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str) -> StUnit {
        StUnit {
            t: Gate::new(store, rng, &format!("{name}.t"), Axis::T),
            h: Gate::new(store, rng, &format!("{name}.h"), Axis::H),
            w: Gate::new(store, rng, &format!("{name}.w"), Axis::W),
        }
    }

    /// The averaged three-gate map: (Y_T + Y_H + Y_W) / 3.
    pub fn gate_map(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        src: NodeId,
    ) -> Result<NodeId, TensorError> {
        let yt = self.t.gate_map(tape, store, src)?;
        let yh = self.h.gate_map(tape, store, src)?;
        let yw = self.w.gate_map(tape, store, src)?;
        let sum = tape.add(yt, yh)?;
        let sum = tape.add(sum, yw)?;
        Ok(tape.scale(sum, 1.0 / 3.0))
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let y = self.gate_map(tape, store, x)?;
        tape.mul(y, x)
    }
}

/// C-inside-ST: the C unit refines a copy, the refined copy supplies the
/// T/H/W contexts, and the resulting ST gate multiplies the untouched input.
#[derive(Clone, Debug)]
pub struct CinSt {
    pub c: CUnit,
    pub st: StUnit,
}

impl CinSt {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str) -> CinSt {
        CinSt {
            c: CUnit::new(store, rng, &format!("{name}.inner")),
            st: StUnit::new(store, rng, &format!("{name}.outer")),
        }
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let z = self.c.apply(tape, store, x)?;
        let y = self.st.gate_map(tape, store, z)?;
        tape.mul(y, x)
    }
}

/// ST-inside-C: the ST unit refines a copy, the refined copy supplies the C
/// context, and the resulting C gate multiplies the untouched input.
#[derive(Clone, Debug)]
pub struct StinC {
    pub st: StUnit,
    pub c: CUnit,
}

impl StinC {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str) -> StinC {
        StinC {
            st: StUnit::new(store, rng, &format!("{name}.inner")),
            c: CUnit::new(store, rng, &format!("{name}.outer")),
        }
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        let z = self.st.apply(tape, store, x)?;
        let y = self.c.gate_map(tape, store, z)?;
        tape.mul(y, x)
    }
}

/// Any buildable attention module, including the two combination
/// topologies. Sequential feeds the first module's output into the second;
/// parallel runs both on the same input and averages the refined outputs.
#[derive(Clone, Debug)]
pub enum AnyModule {
    C(CUnit),
    St(StUnit),
    CinSt(CinSt),
    StinC(StinC),
    Se3d(Se3d),
    Ge3dG(Ge3dG),
    S3dG(S3dG),
    Cbam(Cbam3d),
    Seq(Box<AnyModule>, Box<AnyModule>),
    Par(Box<AnyModule>, Box<AnyModule>),
}

impl AnyModule {
    /// Construct a module with freshly initialised, independent parameters.
    /// `channels` is the C extent the module will see (the baselines size
    /// their per-channel maps from it; the axial units are channel-free).
    pub fn build<R: Rng>(
        variant: Variant,
        store: &mut ParamStore,
        rng: &mut R,
        channels: usize,
        name: &str,
    ) -> Result<AnyModule, TensorError> {
        Ok(match variant {
            Variant::C => AnyModule::C(CUnit::new(store, rng, name)),
            Variant::St => AnyModule::St(StUnit::new(store, rng, name)),
            Variant::CinSt => AnyModule::CinSt(CinSt::new(store, rng, name)),
            Variant::StinC => AnyModule::StinC(StinC::new(store, rng, name)),
            Variant::CStSeq => seq(
                AnyModule::build(Variant::C, store, rng, channels, &format!("{name}.0"))?,
                AnyModule::build(Variant::St, store, rng, channels, &format!("{name}.1"))?,
            ),
            Variant::StCSeq => seq(
                AnyModule::build(Variant::St, store, rng, channels, &format!("{name}.0"))?,
                AnyModule::build(Variant::C, store, rng, channels, &format!("{name}.1"))?,
            ),
            Variant::CStPar => par(
                AnyModule::build(Variant::C, store, rng, channels, &format!("{name}.0"))?,
                AnyModule::build(Variant::St, store, rng, channels, &format!("{name}.1"))?,
            ),
            Variant::CinStStinCSeq => seq(
                AnyModule::build(Variant::CinSt, store, rng, channels, &format!("{name}.0"))?,
                AnyModule::build(Variant::StinC, store, rng, channels, &format!("{name}.1"))?,
            ),
            Variant::StinCCinStSeq => seq(
                AnyModule::build(Variant::StinC, store, rng, channels, &format!("{name}.0"))?,
                AnyModule::build(Variant::CinSt, store, rng, channels, &format!("{name}.1"))?,
            ),
            Variant::CinStStinCPar => par(
                AnyModule::build(Variant::CinSt, store, rng, channels, &format!("{name}.0"))?,
                AnyModule::build(Variant::StinC, store, rng, channels, &format!("{name}.1"))?,
            ),
            Variant::Se3d => AnyModule::Se3d(Se3d::new(store, rng, name, channels, 16)?),
            Variant::Ge3dG => AnyModule::Ge3dG(Ge3dG),
            Variant::S3dG => AnyModule::S3dG(S3dG::new(store, rng, name, channels)),
            Variant::Cbam3d177 => AnyModule::Cbam(Cbam3d::new(store, rng, name, channels, 16, 1)?),
            Variant::Cbam3d377 => AnyModule::Cbam(Cbam3d::new(store, rng, name, channels, 16, 3)?),
        })
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, TensorError> {
        match self {
            AnyModule::C(m) => m.apply(tape, store, x),
            AnyModule::St(m) => m.apply(tape, store, x),
            AnyModule::CinSt(m) => m.apply(tape, store, x),
            AnyModule::StinC(m) => m.apply(tape, store, x),
            AnyModule::Se3d(m) => m.apply(tape, store, x),
            AnyModule::Ge3dG(m) => m.apply(tape, x),
            AnyModule::S3dG(m) => m.apply(tape, store, x),
            AnyModule::Cbam(m) => m.apply(tape, store, x),
            AnyModule::Seq(a, b) => {
                let mid = a.apply(tape, store, x)?;
                b.apply(tape, store, mid)
            }
            AnyModule::Par(a, b) => {
                let ya = a.apply(tape, store, x)?;
                let yb = b.apply(tape, store, x)?;
                let sum = tape.add(ya, yb)?;
                Ok(tape.scale(sum, 0.5))
            }
        }
    }

    /// Switch every batch norm inside this module to the given mode.
    pub fn set_bn_mode(&mut self, mode: BnMode) {
        match self {
            AnyModule::C(m) => m.gate.bn.mode = mode,
            AnyModule::St(m) => {
                m.t.bn.mode = mode;
                m.h.bn.mode = mode;
                m.w.bn.mode = mode;
            }
            AnyModule::CinSt(m) => {
                m.c.gate.bn.mode = mode;
                m.st.t.bn.mode = mode;
                m.st.h.bn.mode = mode;
                m.st.w.bn.mode = mode;
            }
            AnyModule::StinC(m) => {
                m.st.t.bn.mode = mode;
                m.st.h.bn.mode = mode;
                m.st.w.bn.mode = mode;
                m.c.gate.bn.mode = mode;
            }
            AnyModule::Se3d(_) | AnyModule::Ge3dG(_) | AnyModule::S3dG(_) => {}
            AnyModule::Cbam(m) => m.spatial_bn.mode = mode,
            AnyModule::Seq(a, b) | AnyModule::Par(a, b) => {
                a.set_bn_mode(mode);
                b.set_bn_mode(mode);
            }
        }
    }

    /// All gates of the axial variants, in application order (for the
    /// oracle drivers, which need the raw weights).
    pub fn gates(&self) -> Vec<&Gate> {
        let mut out = Vec::new();
        self.collect_gates(&mut out);
        out
    }

    fn collect_gates<'a>(&'a self, out: &mut Vec<&'a Gate>) {
        match self {
            AnyModule::C(m) => out.push(&m.gate),
            AnyModule::St(m) => out.extend([&m.t, &m.h, &m.w]),
            AnyModule::CinSt(m) => {
                out.push(&m.c.gate);
                out.extend([&m.st.t, &m.st.h, &m.st.w]);
            }
            AnyModule::StinC(m) => {
                out.extend([&m.st.t, &m.st.h, &m.st.w]);
                out.push(&m.c.gate);
            }
            AnyModule::Se3d(_) | AnyModule::Ge3dG(_) | AnyModule::S3dG(_) | AnyModule::Cbam(_) => {}
            AnyModule::Seq(a, b) | AnyModule::Par(a, b) => {
                a.collect_gates(out);
                b.collect_gates(out);
            }
        }
    }
}

fn seq(a: AnyModule, b: AnyModule) -> AnyModule {
    AnyModule::Seq(Box::new(a), Box::new(b))
}

fn par(a: AnyModule, b: AnyModule) -> AnyModule {
    AnyModule::Par(Box::new(a), Box::new(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{self, max_abs_diff, seeded_tensor, NaiveBn, NaiveGate};
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_params(store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            store
                .value_mut(id)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = 0.0);
        }
    }

    fn run(variant: Variant, x: &Tensor, seed: u64, mode: BnMode, zeroed: bool) -> Tensor {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut module =
            AnyModule::build(variant, &mut store, &mut rng, x.shape()[1], "att").unwrap();
        if zeroed {
            zero_params(&mut store);
        }
        module.set_bn_mode(mode);
        let mut tape = Tape::new();
        let xn = tape.leaf(x.clone());
        let y = module.apply(&mut tape, &store, xn).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn zero_kernel_bypass_fixpoints() {
        let x = seeded_tensor(42, &[2, 16, 3, 4, 4]);
        let half = crate::kernels::scale(&x, 0.5);
        let quarter = crate::kernels::scale(&x, 0.25);
        for v in [Variant::C, Variant::St, Variant::CinSt, Variant::StinC] {
            assert_eq!(run(v, &x, 1, BnMode::Bypass, true), half, "{}", v.name());
        }
        for v in [
            Variant::CStSeq,
            Variant::StCSeq,
            Variant::CinStStinCSeq,
            Variant::StinCCinStSeq,
        ] {
            assert_eq!(run(v, &x, 1, BnMode::Bypass, true), quarter, "{}", v.name());
        }
        for v in [Variant::CStPar, Variant::CinStStinCPar] {
            assert_eq!(run(v, &x, 1, BnMode::Bypass, true), half, "{}", v.name());
        }
    }

    #[test]
    fn every_variant_preserves_shape_and_gates_in_unit_interval() {
        // On strictly positive input, output/input recovers the implicit
        // gate, which must lie in (0, 1) for every variant.
        let mut base = seeded_tensor(7, &[1, 16, 3, 4, 4]);
        base.data_mut().iter_mut().for_each(|v| *v = 1.0 + 0.4 * *v);
        for variant in Variant::ALL {
            let y = run(variant, &base, 3, BnMode::Train, false);
            assert_eq!(y.shape(), base.shape(), "{}", variant.name());
            for (yv, xv) in y.data().iter().zip(base.data()) {
                let gate = yv / xv;
                assert!(
                    gate > 0.0 && gate < 1.0,
                    "{}: gate {gate} outside (0,1)",
                    variant.name()
                );
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
        }
        assert_eq!(Variant::parse("bogus"), None);
        assert!(Variant::valid_names().contains("cinst_stinc_seq"));
    }

    #[test]
    fn gate_rejects_tampered_kernel_shape() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut unit = CUnit::new(&mut store, &mut rng, "att");
        *store.value_mut(unit.gate.kernel) = Tensor::zeros(&[1, 2, 3, 3, 5]);
        let mut tape = Tape::new();
        let xn = tape.leaf(seeded_tensor(1, &[1, 4, 2, 3, 3]));
        assert!(matches!(
            unit.apply(&mut tape, &store, xn),
            Err(TensorError::BadKernel { .. })
        ));
    }

    #[test]
    fn c_unit_output_is_frame_permutation_covariant() {
        // Circularly shifting frames permutes the output identically, away
        // from the temporal padding boundary. Normalisation is bypassed:
        // batch statistics see the boundary frames, whose conv windows mix
        // non-adjacent originals, so they are not permutation-invariant.
        let t = 6;
        let shift = 2;
        let x = seeded_tensor(11, &[1, 5, t, 4, 4]);
        let mut shifted = Tensor::zeros(x.shape());
        for tt in 0..t {
            let src = (tt + shift) % t;
            for c in 0..5 {
                for h in 0..4 {
                    for w in 0..4 {
                        let v = x.at(&[0, c, src, h, w]);
                        shifted.set(&[0, c, tt, h, w], v);
                    }
                }
            }
        }
        let y = run(Variant::C, &x, 5, BnMode::Bypass, false);
        let y_shifted = run(Variant::C, &shifted, 5, BnMode::Bypass, false);
        for tt in 0..t {
            let src = (tt + shift) % t;
            // Interior only: both windows must avoid the clip boundary.
            if tt == 0 || tt == t - 1 || src == 0 || src == t - 1 {
                continue;
            }
            for c in 0..5 {
                for h in 0..4 {
                    for w in 0..4 {
                        let a = y_shifted.at(&[0, c, tt, h, w]);
                        let b = y.at(&[0, c, src, h, w]);
                        assert!((a - b).abs() < 1e-9, "frame {tt} vs {src}");
                    }
                }
            }
        }
    }

    fn naive_gate_of(store: &ParamStore, g: &Gate) -> NaiveGate {
        NaiveGate {
            kernel: store.value(g.kernel).clone(),
            gamma: store.value(g.bn.gamma).clone(),
            beta: store.value(g.bn.beta).clone(),
        }
    }

    #[test]
    fn composites_match_straight_line_oracles() {
        let x = seeded_tensor(99, &[2, 6, 3, 5, 5]);
        for (mode, nbn) in [
            (BnMode::Train, NaiveBn::Train),
            (BnMode::Bypass, NaiveBn::Bypass),
        ] {
            for variant in [Variant::C, Variant::St, Variant::CinSt, Variant::StinC] {
                let mut store = ParamStore::new();
                let mut rng = ChaCha8Rng::seed_from_u64(31);
                let mut module = AnyModule::build(variant, &mut store, &mut rng, 6, "att").unwrap();
                module.set_bn_mode(mode);
                let gates: Vec<NaiveGate> = module
                    .gates()
                    .into_iter()
                    .map(|g| naive_gate_of(&store, g))
                    .collect();
                let mut tape = Tape::new();
                let xn = tape.leaf(x.clone());
                let y = module.apply(&mut tape, &store, xn).unwrap();
                let expect = match variant {
                    Variant::C => reference::naive_c_unit(&x, &gates[0], &nbn),
                    Variant::St => reference::naive_st_unit(
                        &x,
                        &[gates[0].clone(), gates[1].clone(), gates[2].clone()],
                        &nbn,
                    ),
                    Variant::CinSt => reference::naive_cinst(
                        &x,
                        &gates[0],
                        &[gates[1].clone(), gates[2].clone(), gates[3].clone()],
                        &nbn,
                    ),
                    Variant::StinC => reference::naive_stinc(
                        &x,
                        &[gates[0].clone(), gates[1].clone(), gates[2].clone()],
                        &gates[3],
                        &nbn,
                    ),
                    _ => unreachable!(),
                };
                assert!(
                    max_abs_diff(tape.value(y), &expect) < 1e-9,
                    "{} in {:?}",
                    variant.name(),
                    mode
                );
            }
        }
    }
}
