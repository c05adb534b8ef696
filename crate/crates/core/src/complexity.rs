//! Static parameter and FLOP accounting over declarative architecture
//! descriptions.
//!
//! The counting convention is the one used by common profiler tools:
//! convolutions and linear layers cost one FLOP per multiply-accumulate
//! over their output positions (bias additions not counted), batch norm
//! costs two operations per normalised element, and activations, pooling,
//! gating multiplies, expands and temporal shifts are free. Under this
//! convention the stock 8-frame 224-crop ResNet-50 video backbone lands on
//! the familiar 32.88G per clip.
//!
//! Parameters count everything trainable: conv and linear weights, biases
//! where present, and one (gamma, beta) pair per normalised channel.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::attention::Variant;

/// The counting convention tag carried by every report.
pub const CONVENTION: &str =
    "conv/linear multiply-accumulates plus 2 ops per batch-normalised element; \
activations, pooling, gating and shifts free";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArchError {
    /// Attention can only attach to a bottleneck residual block.
    NotBottleneck { block: &'static str },
}

impl core::fmt::Display for ArchError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ArchError::NotBottleneck { block } => {
                write!(
                    f,
                    "attention attaches to bottleneck blocks only, not {block}"
                )
            }
        }
    }
}

impl core::error::Error for ArchError {}

/// Which backbone family the descriptor models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backbone {
    /// Per-frame 2D processing with prediction averaging; no cross-frame op.
    Tsn,
    /// Same network plus a parameter-free temporal channel shift per block.
    Tsm,
}

impl Backbone {
    pub fn name(self) -> &'static str {
        match self {
            Backbone::Tsn => "tsn",
            Backbone::Tsm => "tsm",
        }
    }

    pub fn parse(s: &str) -> Option<Backbone> {
        match s {
            "tsn" => Some(Backbone::Tsn),
            "tsm" => Some(Backbone::Tsm),
            _ => None,
        }
    }
}

/// Where inside the residual block an attention module sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Width {
    /// After the 3x3 conv, at the bottleneck's reduced channel count.
    Reduced,
    /// After the residual join, at the block's full output channel count.
    Full,
}

impl Width {
    pub fn name(self) -> &'static str {
        match self {
            Width::Reduced => "reduced",
            Width::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Width> {
        match s {
            "reduced" => Some(Width::Reduced),
            "full" => Some(Width::Full),
            _ => None,
        }
    }

    /// The placement each variant is normally reported at: the axial
    /// modules and the single-layer gate sit at the reduced width; the
    /// squeeze-excitation family and the two-stage channel/spatial block
    /// count at full block width.
    pub fn default_for(variant: Variant) -> Width {
        match variant {
            Variant::Se3d | Variant::Ge3dG | Variant::Cbam3d177 | Variant::Cbam3d377 => Width::Full,
            _ => Width::Reduced,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionConfig {
    pub variant: Variant,
    pub width: Width,
}

/// One block descriptor in a residual backbone.
#[derive(Clone, Debug)]
pub enum Block {
    /// 1x1 reduce -> 3x3 -> 1x1 expand with a skip connection.
    Bottleneck {
        width: usize,
        stride: usize,
        attention: Option<AttentionConfig>,
    },
    /// The stem (7x7 conv, BN, max pool) — not a residual block.
    Stem,
}

/// Record an attention attachment on a bottleneck descriptor. The module
/// acts (and is counted) on the reduced-width feature after the 3x3 conv,
/// or on the full-width block output when the config says so.
pub fn attach_to_bottleneck(block: Block, config: AttentionConfig) -> Result<Block, ArchError> {
    match block {
        Block::Bottleneck { width, stride, .. } => Ok(Block::Bottleneck {
            width,
            stride,
            attention: Some(config),
        }),
        Block::Stem => Err(ArchError::NotBottleneck { block: "the stem" }),
    }
}

/// One counted layer. Geometry is stored per clip: `positions` is the
/// number of output sites a kernel is applied at across all frames, and
/// `elements` the number of normalised values.
#[derive(Clone, Debug)]
pub enum LayerKind {
    Conv2 {
        c_in: usize,
        c_out: usize,
        k: (usize, usize),
        bias: bool,
        positions: usize,
    },
    Conv3 {
        c_in: usize,
        c_out: usize,
        k: (usize, usize, usize),
        bias: bool,
        positions: usize,
    },
    BatchNorm {
        channels: usize,
        elements: usize,
    },
    Linear {
        d_in: usize,
        d_out: usize,
        bias: bool,
        batch: usize,
    },
    /// Cost-free structural layer (pooling, shift, parameter-free gate).
    Marker,
}

impl LayerKind {
    pub fn params(&self) -> u64 {
        match *self {
            LayerKind::Conv2 {
                c_in,
                c_out,
                k,
                bias,
                ..
            } => (k.0 * k.1 * c_in * c_out + if bias { c_out } else { 0 }) as u64,
            LayerKind::Conv3 {
                c_in,
                c_out,
                k,
                bias,
                ..
            } => (k.0 * k.1 * k.2 * c_in * c_out + if bias { c_out } else { 0 }) as u64,
            LayerKind::BatchNorm { channels, .. } => 2 * channels as u64,
            LayerKind::Linear {
                d_in, d_out, bias, ..
            } => (d_in * d_out + if bias { d_out } else { 0 }) as u64,
            LayerKind::Marker => 0,
        }
    }

    pub fn flops(&self) -> u64 {
        match *self {
            LayerKind::Conv2 {
                c_in,
                c_out,
                k,
                positions,
                ..
            } => (k.0 * k.1 * c_in * c_out) as u64 * positions as u64,
            LayerKind::Conv3 {
                c_in,
                c_out,
                k,
                positions,
                ..
            } => (k.0 * k.1 * k.2 * c_in * c_out) as u64 * positions as u64,
            LayerKind::BatchNorm { elements, .. } => 2 * elements as u64,
            LayerKind::Linear {
                d_in, d_out, batch, ..
            } => (d_in * d_out * batch) as u64,
            LayerKind::Marker => 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

/// Ordered layer descriptors plus the input signature they were sized for.
#[derive(Clone, Debug)]
pub struct ArchSpec {
    pub name: String,
    pub frames: usize,
    pub crop: usize,
    pub classes: usize,
    pub layers: Vec<Layer>,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub name: String,
    pub params: u64,
    pub flops: u64,
}

/// Per-layer rows and exact totals, tagged with the counting convention.
#[derive(Clone, Debug)]
pub struct ComplexityReport {
    pub convention: &'static str,
    pub rows: Vec<Row>,
    pub total_params: u64,
    pub total_flops: u64,
}

impl ComplexityReport {
    /// Total parameters at the usual table rounding, e.g. "23.86M".
    pub fn params_m(&self) -> String {
        format!("{:.2}M", self.total_params as f64 / 1e6)
    }

    /// Total FLOPs per clip at the usual table rounding, e.g. "32.88G".
    pub fn flops_g(&self) -> String {
        format!("{:.2}G", self.total_flops as f64 / 1e9)
    }
}

/// Tally every layer of a spec into a per-layer and total report.
pub fn walk(spec: &ArchSpec) -> ComplexityReport {
    let mut rows = Vec::with_capacity(spec.layers.len());
    let mut total_params = 0u64;
    let mut total_flops = 0u64;
    for layer in &spec.layers {
        let params = layer.kind.params();
        let flops = layer.kind.flops();
        total_params += params;
        total_flops += flops;
        rows.push(Row {
            name: layer.name.clone(),
            params,
            flops,
        });
    }
    ComplexityReport {
        convention: CONVENTION,
        rows,
        total_params,
        total_flops,
    }
}

/// Count trainable parameters per layer. The report also carries the FLOP
/// column; both counters walk the same descriptors.
pub fn count_params(spec: &ArchSpec) -> ComplexityReport {
    walk(spec)
}

/// Count per-clip FLOPs per layer under the MAC convention (see
/// [`CONVENTION`]).
pub fn count_flops(spec: &ArchSpec) -> ComplexityReport {
    walk(spec)
}

fn conv_out(side: usize, k: usize, stride: usize, pad: usize) -> usize {
    (side + 2 * pad - k) / stride + 1
}

/// Emit the conv + BN pair of one attention gate head.
fn push_gate(layers: &mut Vec<Layer>, name: &str, k: (usize, usize, usize), positions: usize) {
    layers.push(Layer {
        name: format!("{name}.conv"),
        kind: LayerKind::Conv3 {
            c_in: 2,
            c_out: 1,
            k,
            bias: false,
            positions,
        },
    });
    layers.push(Layer {
        name: format!("{name}.bn"),
        kind: LayerKind::BatchNorm {
            channels: 1,
            elements: positions,
        },
    });
}

/// Gate positions per clip for an axial gate over the named axis, given
/// the channel count, square spatial side and frame count at the
/// insertion point. The pooled axis collapses to the conv's channel pair,
/// so positions run over the remaining three extents.
fn axial_positions(axis: char, c: usize, side: usize, frames: usize) -> usize {
    match axis {
        'c' => frames * side * side,
        't' => c * side * side,
        'h' => c * frames * side,
        'w' => c * frames * side,
        _ => unreachable!(),
    }
}

fn push_axial_unit(
    layers: &mut Vec<Layer>,
    prefix: &str,
    axes: &[char],
    c: usize,
    side: usize,
    frames: usize,
) {
    for &axis in axes {
        push_gate(
            layers,
            &format!("{prefix}.{axis}"),
            (3, 3, 3),
            axial_positions(axis, c, side, frames),
        );
    }
}

/// Emit the rows of one attention module at channel count `c` and spatial
/// side `side`.
fn push_attention(
    layers: &mut Vec<Layer>,
    prefix: &str,
    variant: Variant,
    c: usize,
    side: usize,
    frames: usize,
) {
    const REDUCTION: usize = 16;
    match variant {
        Variant::C => push_axial_unit(layers, prefix, &['c'], c, side, frames),
        Variant::St => push_axial_unit(layers, prefix, &['t', 'h', 'w'], c, side, frames),
        Variant::CinSt => {
            push_axial_unit(layers, &format!("{prefix}.inner"), &['c'], c, side, frames);
            push_axial_unit(
                layers,
                &format!("{prefix}.outer"),
                &['t', 'h', 'w'],
                c,
                side,
                frames,
            );
        }
        Variant::StinC => {
            push_axial_unit(
                layers,
                &format!("{prefix}.inner"),
                &['t', 'h', 'w'],
                c,
                side,
                frames,
            );
            push_axial_unit(layers, &format!("{prefix}.outer"), &['c'], c, side, frames);
        }
        Variant::CStSeq | Variant::CStPar => {
            push_attention(layers, &format!("{prefix}.0"), Variant::C, c, side, frames);
            push_attention(layers, &format!("{prefix}.1"), Variant::St, c, side, frames);
        }
        Variant::StCSeq => {
            push_attention(layers, &format!("{prefix}.0"), Variant::St, c, side, frames);
            push_attention(layers, &format!("{prefix}.1"), Variant::C, c, side, frames);
        }
        Variant::CinStStinCSeq | Variant::CinStStinCPar => {
            push_attention(
                layers,
                &format!("{prefix}.0"),
                Variant::CinSt,
                c,
                side,
                frames,
            );
            push_attention(
                layers,
                &format!("{prefix}.1"),
                Variant::StinC,
                c,
                side,
                frames,
            );
        }
        Variant::StinCCinStSeq => {
            push_attention(
                layers,
                &format!("{prefix}.0"),
                Variant::StinC,
                c,
                side,
                frames,
            );
            push_attention(
                layers,
                &format!("{prefix}.1"),
                Variant::CinSt,
                c,
                side,
                frames,
            );
        }
        Variant::Se3d => {
            layers.push(Layer {
                name: format!("{prefix}.w1"),
                kind: LayerKind::Linear {
                    d_in: c,
                    d_out: c / REDUCTION,
                    bias: false,
                    batch: 1,
                },
            });
            layers.push(Layer {
                name: format!("{prefix}.w2"),
                kind: LayerKind::Linear {
                    d_in: c / REDUCTION,
                    d_out: c,
                    bias: false,
                    batch: 1,
                },
            });
        }
        Variant::Ge3dG => layers.push(Layer {
            name: format!("{prefix}.gate"),
            kind: LayerKind::Marker,
        }),
        Variant::S3dG => layers.push(Layer {
            name: format!("{prefix}.w"),
            kind: LayerKind::Linear {
                d_in: c,
                d_out: c,
                bias: true,
                batch: 1,
            },
        }),
        Variant::Cbam3d177 | Variant::Cbam3d377 => {
            let k_t = if variant == Variant::Cbam3d377 { 3 } else { 1 };
            // The shared MLP scores both the average and the max descriptor.
            layers.push(Layer {
                name: format!("{prefix}.mlp.w1"),
                kind: LayerKind::Linear {
                    d_in: c,
                    d_out: c / REDUCTION,
                    bias: true,
                    batch: 2,
                },
            });
            layers.push(Layer {
                name: format!("{prefix}.mlp.w2"),
                kind: LayerKind::Linear {
                    d_in: c / REDUCTION,
                    d_out: c,
                    bias: true,
                    batch: 2,
                },
            });
            push_gate(
                layers,
                &format!("{prefix}.spatial"),
                (k_t, 7, 7),
                frames * side * side,
            );
        }
    }
}

struct BlockCursor {
    c_in: usize,
    side: usize,
}

#[allow(clippy::too_many_arguments)]
fn push_bottleneck(
    layers: &mut Vec<Layer>,
    prefix: &str,
    cur: &mut BlockCursor,
    frames: usize,
    tsm: bool,
    width: usize,
    stride: usize,
    attention: Option<AttentionConfig>,
) {
    let c_out = 4 * width;
    if tsm {
        layers.push(Layer {
            name: format!("{prefix}.shift"),
            kind: LayerKind::Marker,
        });
    }
    let in_side = cur.side;
    let out_side = conv_out(in_side, 3, stride, 1);
    let per_frame_in = in_side * in_side;
    let per_frame_out = out_side * out_side;

    layers.push(Layer {
        name: format!("{prefix}.conv1"),
        kind: LayerKind::Conv2 {
            c_in: cur.c_in,
            c_out: width,
            k: (1, 1),
            bias: false,
            positions: frames * per_frame_in,
        },
    });
    layers.push(Layer {
        name: format!("{prefix}.bn1"),
        kind: LayerKind::BatchNorm {
            channels: width,
            elements: frames * width * per_frame_in,
        },
    });
    layers.push(Layer {
        name: format!("{prefix}.conv2"),
        kind: LayerKind::Conv2 {
            c_in: width,
            c_out: width,
            k: (3, 3),
            bias: false,
            positions: frames * per_frame_out,
        },
    });
    layers.push(Layer {
        name: format!("{prefix}.bn2"),
        kind: LayerKind::BatchNorm {
            channels: width,
            elements: frames * width * per_frame_out,
        },
    });
    if let Some(cfg) = attention {
        if cfg.width == Width::Reduced {
            push_attention(
                layers,
                &format!("{prefix}.att"),
                cfg.variant,
                width,
                out_side,
                frames,
            );
        }
    }
    layers.push(Layer {
        name: format!("{prefix}.conv3"),
        kind: LayerKind::Conv2 {
            c_in: width,
            c_out,
            k: (1, 1),
            bias: false,
            positions: frames * per_frame_out,
        },
    });
    layers.push(Layer {
        name: format!("{prefix}.bn3"),
        kind: LayerKind::BatchNorm {
            channels: c_out,
            elements: frames * c_out * per_frame_out,
        },
    });
    if stride != 1 || cur.c_in != c_out {
        layers.push(Layer {
            name: format!("{prefix}.downsample.conv"),
            kind: LayerKind::Conv2 {
                c_in: cur.c_in,
                c_out,
                k: (1, 1),
                bias: false,
                positions: frames * per_frame_out,
            },
        });
        layers.push(Layer {
            name: format!("{prefix}.downsample.bn"),
            kind: LayerKind::BatchNorm {
                channels: c_out,
                elements: frames * c_out * per_frame_out,
            },
        });
    }
    if let Some(cfg) = attention {
        if cfg.width == Width::Full {
            push_attention(
                layers,
                &format!("{prefix}.att"),
                cfg.variant,
                c_out,
                out_side,
                frames,
            );
        }
    }
    cur.c_in = c_out;
    cur.side = out_side;
}

/// Build the ResNet-50 video backbone descriptor: stage plan [3, 4, 6, 3]
/// at bottleneck widths (64, 128, 256, 512) with x4 expansion, spatial
/// stride carried by the 3x3 convs, per-frame processing with prediction
/// averaging, and an optional attention module inside every bottleneck.
/// The TSM flavour adds one cost-free shift marker per block, so its
/// totals equal the TSN totals for every variant.
pub fn resnet50_spec(
    mode: Backbone,
    frames: usize,
    crop: usize,
    classes: usize,
    attention: Option<AttentionConfig>,
) -> ArchSpec {
    let mut layers = Vec::new();
    let mut side = conv_out(crop, 7, 2, 3);
    layers.push(Layer {
        name: String::from("conv1"),
        kind: LayerKind::Conv2 {
            c_in: 3,
            c_out: 64,
            k: (7, 7),
            bias: false,
            positions: frames * side * side,
        },
    });
    layers.push(Layer {
        name: String::from("bn1"),
        kind: LayerKind::BatchNorm {
            channels: 64,
            elements: frames * 64 * side * side,
        },
    });
    side = conv_out(side, 3, 2, 1);
    layers.push(Layer {
        name: String::from("maxpool"),
        kind: LayerKind::Marker,
    });

    let mut cur = BlockCursor { c_in: 64, side };
    let widths = [64usize, 128, 256, 512];
    let counts = [3usize, 4, 6, 3];
    for (si, (&width, &blocks)) in widths.iter().zip(&counts).enumerate() {
        for b in 0..blocks {
            let stride = if si > 0 && b == 0 { 2 } else { 1 };
            let mut block = Block::Bottleneck {
                width,
                stride,
                attention: None,
            };
            if let Some(cfg) = attention {
                block = attach_to_bottleneck(block, cfg).unwrap();
            }
            let Block::Bottleneck {
                width,
                stride,
                attention,
            } = block
            else {
                unreachable!()
            };
            push_bottleneck(
                &mut layers,
                &format!("layer{}.{b}", si + 1),
                &mut cur,
                frames,
                mode == Backbone::Tsm,
                width,
                stride,
                attention,
            );
        }
    }

    layers.push(Layer {
        name: String::from("avgpool"),
        kind: LayerKind::Marker,
    });
    layers.push(Layer {
        name: String::from("fc"),
        kind: LayerKind::Linear {
            d_in: cur.c_in,
            d_out: classes,
            bias: true,
            batch: frames,
        },
    });

    let att_tag = match attention {
        Some(cfg) => format!("+{}@{}", cfg.variant.name(), cfg.width.name()),
        None => String::new(),
    };
    ArchSpec {
        name: format!(
            "{}-resnet50-{frames}f-{crop}px-{classes}c{att_tag}",
            mode.name()
        ),
        frames,
        crop,
        classes,
        layers,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn name(self) -> &'static str {
        match self {
            ReportFormat::Table => "table",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "table" => Some(ReportFormat::Table),
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

/// Render a report. Column order is fixed, the totals row comes last, and
/// totals appear both at full precision and at the usual table rounding.
pub fn emit_report(report: &ComplexityReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => {
            let name_w = report
                .rows
                .iter()
                .map(|r| r.name.len())
                .chain([5usize])
                .max()
                .unwrap();
            let mut out = String::new();
            out.push_str(&format!(
                "{:<name_w$}  {:>12}  {:>14}\n",
                "layer", "params", "flops"
            ));
            for row in &report.rows {
                out.push_str(&format!(
                    "{:<name_w$}  {:>12}  {:>14}\n",
                    row.name, row.params, row.flops
                ));
            }
            out.push_str(&format!(
                "{:<name_w$}  {:>12}  {:>14}  ({}, {})\n",
                "total",
                report.total_params,
                report.total_flops,
                report.params_m(),
                report.flops_g()
            ));
            out.push_str(&format!("convention: {}\n", report.convention));
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("layer,params,flops\n");
            for row in &report.rows {
                out.push_str(&format!("{},{},{}\n", row.name, row.params, row.flops));
            }
            out.push_str(&format!(
                "total,{},{}\n",
                report.total_params, report.total_flops
            ));
            out
        }
        ReportFormat::Json => {
            let mut out = String::from("{\n");
            out.push_str(&format!("  \"convention\": \"{}\",\n", report.convention));
            out.push_str("  \"rows\": [\n");
            for (i, row) in report.rows.iter().enumerate() {
                let comma = if i + 1 < report.rows.len() { "," } else { "" };
                out.push_str(&format!(
                    "    {{\"layer\": \"{}\", \"params\": {}, \"flops\": {}}}{comma}\n",
                    row.name, row.params, row.flops
                ));
            }
            out.push_str("  ],\n");
            out.push_str(&format!(
                "  \"total\": {{\"params\": {}, \"flops\": {}, \"params_m\": \"{}\", \"flops_g\": \"{}\"}}\n",
                report.total_params,
                report.total_flops,
                report.params_m(),
                report.flops_g()
            ));
            out.push_str("}\n");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audit(
        mode: Backbone,
        classes: usize,
        attention: Option<(Variant, Width)>,
    ) -> ComplexityReport {
        let cfg = attention.map(|(variant, width)| AttentionConfig { variant, width });
        count_params(&resnet50_spec(mode, 8, 224, classes, cfg))
    }

    fn default_cfg(variant: Variant) -> Option<(Variant, Width)> {
        Some((variant, Width::default_for(variant)))
    }

    const PLAIN_PARAMS: u64 = 23_864_558;
    const PLAIN_FLOPS: u64 = 32_877_764_608;

    #[test]
    fn plain_backbone_matches_hand_audited_totals() {
        for mode in [Backbone::Tsn, Backbone::Tsm] {
            let report = audit(mode, 174, None);
            assert_eq!(report.total_params, PLAIN_PARAMS);
            assert_eq!(report.total_flops, PLAIN_FLOPS);
            assert_eq!(report.params_m(), "23.86M");
            assert_eq!(report.flops_g(), "32.88G");
        }
    }

    #[test]
    fn thousand_class_head_matches_the_stock_figure() {
        let report = audit(Backbone::Tsn, 1000, None);
        assert_eq!(report.total_params, 25_557_032);
        assert_eq!(report.params_m(), "25.56M");
    }

    #[test]
    fn axial_param_deltas_follow_the_per_block_formulas() {
        let per_block: &[(Variant, u64)] = &[
            (Variant::C, 56),
            (Variant::St, 168),
            (Variant::CStSeq, 224),
            (Variant::StCSeq, 224),
            (Variant::CStPar, 224),
            (Variant::CinSt, 224),
            (Variant::StinC, 224),
            (Variant::CinStStinCSeq, 448),
            (Variant::StinCCinStSeq, 448),
            (Variant::CinStStinCPar, 448),
        ];
        for &(variant, delta) in per_block {
            let report = audit(Backbone::Tsn, 174, default_cfg(variant));
            assert_eq!(
                report.total_params,
                PLAIN_PARAMS + 16 * delta,
                "{}",
                variant.name()
            );
            assert_eq!(report.params_m(), "23.87M", "{}", variant.name());
        }
    }

    #[test]
    fn axial_flop_totals_round_to_the_expected_cells() {
        let cases: &[(Variant, u64, &str)] = &[
            (Variant::C, 6_212_416, "32.88G"),
            (Variant::St, 128_651_264, "33.01G"),
            (Variant::CinSt, 134_863_680, "33.01G"),
            (Variant::StinC, 134_863_680, "33.01G"),
            (Variant::CStSeq, 134_863_680, "33.01G"),
            (Variant::StCSeq, 134_863_680, "33.01G"),
            (Variant::CStPar, 134_863_680, "33.01G"),
            (Variant::CinStStinCSeq, 269_727_360, "33.15G"),
            (Variant::StinCCinStSeq, 269_727_360, "33.15G"),
            (Variant::CinStStinCPar, 269_727_360, "33.15G"),
        ];
        for &(variant, delta, cell) in cases {
            for mode in [Backbone::Tsn, Backbone::Tsm] {
                let report = audit(mode, 174, default_cfg(variant));
                assert_eq!(
                    report.total_flops,
                    PLAIN_FLOPS + delta,
                    "{}",
                    variant.name()
                );
                assert_eq!(report.flops_g(), cell, "{}", variant.name());
            }
        }
    }

    #[test]
    fn baseline_params_match_their_reported_rows() {
        let se = audit(Backbone::Tsn, 174, default_cfg(Variant::Se3d));
        assert_eq!(se.total_params, 26_379_502);
        assert_eq!(se.params_m(), "26.38M");

        let ge = audit(Backbone::Tsn, 174, default_cfg(Variant::Ge3dG));
        assert_eq!(ge.total_params, PLAIN_PARAMS);

        let s3d = audit(Backbone::Tsn, 174, default_cfg(Variant::S3dG));
        assert_eq!(s3d.total_params, 25_125_806);
        assert_eq!(s3d.params_m(), "25.13M");

        let cbam3 = audit(Backbone::Tsn, 174, default_cfg(Variant::Cbam3d377));
        assert_eq!(cbam3.total_params, 26_400_286);
        assert_eq!(cbam3.params_m(), "26.40M");

        let cbam1 = audit(Backbone::Tsn, 174, default_cfg(Variant::Cbam3d177));
        assert_eq!(cbam1.total_params, 26_397_150);
        assert_eq!(cbam1.params_m(), "26.40M");
    }

    #[test]
    fn baseline_flops_stay_within_five_percent_of_plain() {
        for variant in [
            Variant::Se3d,
            Variant::Ge3dG,
            Variant::S3dG,
            Variant::Cbam3d177,
            Variant::Cbam3d377,
        ] {
            let report = audit(Backbone::Tsn, 174, default_cfg(variant));
            let ratio = report.total_flops as f64 / PLAIN_FLOPS as f64;
            assert!(
                (1.0..1.05).contains(&ratio),
                "{}: ratio {ratio}",
                variant.name()
            );
        }
    }

    #[test]
    fn totals_are_exactly_the_sum_of_rows() {
        let report = audit(Backbone::Tsm, 174, default_cfg(Variant::CinStStinCSeq));
        let p: u64 = report.rows.iter().map(|r| r.params).sum();
        let f: u64 = report.rows.iter().map(|r| r.flops).sum();
        assert_eq!(report.total_params, p);
        assert_eq!(report.total_flops, f);
    }

    #[test]
    fn adding_a_layer_never_decreases_totals() {
        let mut spec = resnet50_spec(Backbone::Tsn, 8, 224, 174, None);
        let before = count_params(&spec);
        spec.layers.push(Layer {
            name: String::from("extra"),
            kind: LayerKind::Conv2 {
                c_in: 4,
                c_out: 4,
                k: (3, 3),
                bias: true,
                positions: 10,
            },
        });
        let after = count_flops(&spec);
        assert!(after.total_params >= before.total_params);
        assert!(after.total_flops >= before.total_flops);
    }

    #[test]
    fn empty_spec_reports_zero_totals() {
        let spec = ArchSpec {
            name: String::from("empty"),
            frames: 8,
            crop: 224,
            classes: 174,
            layers: Vec::new(),
        };
        let report = count_params(&spec);
        assert_eq!(report.total_params, 0);
        assert_eq!(report.total_flops, 0);
        assert_eq!(report.rows.len(), 0);
    }

    #[test]
    fn attention_only_attaches_to_bottlenecks() {
        let cfg = AttentionConfig {
            variant: Variant::C,
            width: Width::Reduced,
        };
        assert!(matches!(
            attach_to_bottleneck(Block::Stem, cfg),
            Err(ArchError::NotBottleneck { .. })
        ));
        let block = Block::Bottleneck {
            width: 64,
            stride: 1,
            attention: None,
        };
        assert!(matches!(
            attach_to_bottleneck(block, cfg),
            Ok(Block::Bottleneck {
                attention: Some(_),
                ..
            })
        ));
    }

    #[test]
    fn reduced_attention_rows_sit_between_the_3x3_and_the_expand() {
        let spec = resnet50_spec(
            Backbone::Tsn,
            8,
            224,
            174,
            Some(AttentionConfig {
                variant: Variant::C,
                width: Width::Reduced,
            }),
        );
        let names: Vec<&str> = spec.layers.iter().map(|l| l.name.as_str()).collect();
        let att = names
            .iter()
            .position(|n| *n == "layer1.0.att.c.conv")
            .unwrap();
        let bn2 = names.iter().position(|n| *n == "layer1.0.bn2").unwrap();
        let conv3 = names.iter().position(|n| *n == "layer1.0.conv3").unwrap();
        assert!(bn2 < att && att < conv3);
    }

    #[test]
    fn single_gate_kernel_counts_fifty_four_weights() {
        let kind = LayerKind::Conv3 {
            c_in: 2,
            c_out: 1,
            k: (3, 3, 3),
            bias: false,
            positions: 100,
        };
        assert_eq!(kind.params(), 54);
    }

    #[test]
    fn report_formats_are_deterministic_and_totals_last() {
        let report = audit(Backbone::Tsn, 174, default_cfg(Variant::CinStStinCSeq));
        let csv = emit_report(&report, ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), report.rows.len() + 2);
        assert_eq!(lines[0], "layer,params,flops");
        assert!(lines
            .last()
            .unwrap()
            .starts_with("total,23871726,33147491968"));

        let table = emit_report(&report, ReportFormat::Table);
        assert!(table.contains("23871726"));
        assert!(table.contains("23.87M"));
        assert!(table.contains("33.15G"));

        let json = emit_report(&report, ReportFormat::Json);
        assert!(json.contains("\"params\": 23871726"));
        assert!(json.contains("\"flops_g\": \"33.15G\""));
        assert_eq!(json, emit_report(&report, ReportFormat::Json));
    }
}
