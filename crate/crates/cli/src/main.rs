//! `aia` — command-line front end for the video attention library.
//!
//! Subcommands:
//!   audit      parameter / FLOP report for the ResNet-50 video backbones
//!   gradcheck  finite-difference gradient check for one op or module
//!   train      deterministic toy training run on the moving-square task
//!   bench      wall-clock timing of a module's forward and backward pass
//!   oracle     naive-loop oracle comparison for one kernel or module
//!
//! Exit codes: 0 success, 1 check failed, 2 usage error.
//! Set `AIA_LOG=debug` for extra per-step output.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use aia_core::attention::Variant;
use aia_core::autodiff::{BnMode, ParamStore, Tape};
use aia_core::checks::{
    gradcheck_default_size, module_fixture, run_gradcheck, run_oracle, CheckError, MODULE_TOL,
    PRIMITIVE_TOL,
};
use aia_core::complexity::{
    emit_report, resnet50_spec, walk, AttentionConfig, Backbone, ReportFormat, Width,
};
use aia_core::reference::seeded_tensor;
use aia_core::toy::{self, ToyBackbone, ToyError};

use config::resolve_train_config;

const EXIT_OK: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "aia",
    version,
    about = "audit, gradient-check, train and benchmark video attention modules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report parameter and FLOP counts for a ResNet-50 video backbone.
    Audit {
        /// Backbone style: tsn or tsm.
        #[arg(long, default_value = "tsn")]
        backbone: String,
        /// Frames sampled per clip.
        #[arg(long, default_value_t = 8)]
        frames: usize,
        /// Square crop resolution in pixels.
        #[arg(long, default_value_t = 224)]
        crop: usize,
        /// Classifier output classes.
        #[arg(long, default_value_t = 174)]
        classes: usize,
        /// Attention variant, or "none" for the plain backbone.
        #[arg(long, default_value = "none")]
        attention: String,
        /// Insertion width: reduced or full (defaults per variant).
        #[arg(long)]
        width: Option<String>,
        /// Output format: table, csv or json.
        #[arg(long, default_value = "table")]
        format: String,
        /// Write the report to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients against finite differences.
    Gradcheck {
        /// Primitive op or attention variant to check.
        #[arg(long)]
        module: String,
        /// RNG seed for inputs and parameters.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input size as T,H,W,C (defaults per module).
        #[arg(long)]
        size: Option<String>,
        /// Error tolerance override; 0 is a sentinel that always fails.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Train a small backbone on the synthetic moving-square task.
    Train {
        /// TOML config file; missing keys fall back to defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Temporal module: none, shift, or an attention variant.
        #[arg(long)]
        variant: Option<String>,
        /// RNG seed (overrides the config file).
        #[arg(long)]
        seed: Option<u64>,
        /// Write per-epoch metrics as CSV to this file.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Time a module's forward and forward+backward passes.
    Bench {
        /// Attention variant to benchmark.
        #[arg(long)]
        module: String,
        /// Input size as T,H,W,C (defaults per module).
        #[arg(long)]
        size: Option<String>,
        /// Timed iterations; the median is reported.
        #[arg(long, default_value_t = 5)]
        iters: usize,
    },
    /// Compare a production kernel against its naive-loop oracle.
    Oracle {
        /// Kernel or module name.
        #[arg(long)]
        op: String,
        /// RNG seed for inputs and parameters.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn debug_enabled() -> bool {
    std::env::var("AIA_LOG")
        .map(|v| v == "debug")
        .unwrap_or(false)
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Audit {
            backbone,
            frames,
            crop,
            classes,
            attention,
            width,
            format,
            out,
        } => cmd_audit(
            &backbone,
            frames,
            crop,
            classes,
            &attention,
            width.as_deref(),
            &format,
            out,
        ),
        Command::Gradcheck {
            module,
            seed,
            size,
            tol,
        } => cmd_gradcheck(&module, seed, size.as_deref(), tol),
        Command::Train {
            config,
            variant,
            seed,
            metrics_out,
        } => cmd_train(config, variant.as_deref(), seed, metrics_out),
        Command::Bench {
            module,
            size,
            iters,
        } => cmd_bench(&module, size.as_deref(), iters),
        Command::Oracle { op, seed } => cmd_oracle(&op, seed),
    }
}

fn parse_attention(name: &str) -> Result<Option<Variant>, String> {
    if name == "none" {
        return Ok(None);
    }
    match Variant::parse(name) {
        Some(v) => Ok(Some(v)),
        None => Err(format!(
            "unknown attention variant `{name}`; valid names: none, {}",
            Variant::valid_names()
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_audit(
    backbone: &str,
    frames: usize,
    crop: usize,
    classes: usize,
    attention: &str,
    width: Option<&str>,
    format: &str,
    out: Option<PathBuf>,
) -> ExitCode {
    let mode = match Backbone::parse(backbone) {
        Some(m) => m,
        None => {
            return usage_error(&format!(
                "unknown backbone `{backbone}`; valid names: tsn, tsm"
            ))
        }
    };
    let variant = match parse_attention(attention) {
        Ok(v) => v,
        Err(msg) => return usage_error(&msg),
    };
    let width = match width {
        None => variant.map(Width::default_for),
        Some(w) => match Width::parse(w) {
            Some(w) => Some(w),
            None => {
                return usage_error(&format!("unknown width `{w}`; valid names: reduced, full"))
            }
        },
    };
    let format = match ReportFormat::parse(format) {
        Some(f) => f,
        None => {
            return usage_error(&format!(
                "unknown format `{format}`; valid names: table, csv, json"
            ))
        }
    };
    if frames == 0 || crop == 0 || classes == 0 {
        return usage_error("frames, crop and classes must all be positive");
    }

    println!(
        "audit: backbone={} frames={} crop={} classes={} attention={} width={} format={} out={}",
        mode.name(),
        frames,
        crop,
        classes,
        variant.map_or("none", Variant::name),
        width.map_or("-", Width::name),
        format.name(),
        out.as_deref()
            .map_or_else(|| "-".into(), |p| p.display().to_string()),
    );

    let attention = variant.map(|v| AttentionConfig {
        variant: v,
        width: width.unwrap_or_else(|| Width::default_for(v)),
    });
    let spec = resnet50_spec(mode, frames, crop, classes, attention);
    let report = walk(&spec);
    let rendered = emit_report(&report, format);
    match out {
        Some(path) => {
            if let Err(err) = fs::write(&path, rendered.as_bytes()) {
                eprintln!("error: cannot write {}: {err}", path.display());
                return ExitCode::from(EXIT_CHECK_FAILED);
            }
            println!(
                "total: {} params ({}), {} flops ({})",
                report.total_params,
                report.params_m(),
                report.total_flops,
                report.flops_g()
            );
            println!("wrote {} report to {}", format.name(), path.display());
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(EXIT_OK)
}

fn parse_size(text: &str) -> Result<[usize; 4], String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "size must be four comma-separated integers T,H,W,C, got `{text}`"
        ));
    }
    let mut size = [0usize; 4];
    for (slot, part) in size.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("size component `{part}` is not a positive integer"))?;
        if *slot == 0 {
            return Err(format!("size component `{part}` must be positive"));
        }
    }
    Ok(size)
}

fn cmd_gradcheck(module: &str, seed: u64, size: Option<&str>, tol: Option<f64>) -> ExitCode {
    let size = match size.map(parse_size).transpose() {
        Ok(s) => s.unwrap_or_else(|| gradcheck_default_size(module)),
        Err(msg) => return usage_error(&msg),
    };
    let default_tol = if Variant::parse(module).is_some() {
        MODULE_TOL
    } else {
        PRIMITIVE_TOL
    };
    let tol = tol.unwrap_or(default_tol);
    if tol < 0.0 {
        return usage_error("tolerance must be non-negative");
    }
    println!(
        "gradcheck: module={} seed={} size={},{},{},{} tol={:e}",
        module, seed, size[0], size[1], size[2], size[3], tol
    );

    let outcome = match run_gradcheck(module, seed, Some(size)) {
        Ok(o) => o,
        Err(err @ CheckError::UnknownName { .. }) => return usage_error(&err.to_string()),
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    // A zero tolerance is a sentinel: it can never be met, so it always
    // exits 1 — useful for exercising failure paths in CI wrappers.
    let passed = outcome.worst < tol;
    println!(
        "gradcheck {}: max relative error {:e} (tol {:e}) -> {}",
        module,
        outcome.worst,
        tol,
        if passed { "pass" } else { "FAIL" }
    );
    if passed {
        ExitCode::from(EXIT_OK)
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn cmd_train(
    config_path: Option<PathBuf>,
    variant: Option<&str>,
    seed: Option<u64>,
    metrics_out: Option<PathBuf>,
) -> ExitCode {
    let (cfg, temporal) = match resolve_train_config(config_path.as_deref(), variant, seed) {
        Ok(pair) => pair,
        Err(msg) => return usage_error(&msg),
    };
    if let Err(err) = cfg.validate() {
        return usage_error(&err.to_string());
    }

    println!(
        "train: variant={} seed={} epochs={} batch_size={} lr={} momentum={} weight_decay={} \
         lr_decay_epoch={} lr_decay={} train_clips={} val_clips={} n_classes={} noise={} \
         frames={} height={} width={} square={} speed={} config={} metrics_out={}",
        temporal.label(),
        cfg.seed,
        cfg.epochs,
        cfg.batch_size,
        cfg.lr,
        cfg.momentum,
        cfg.weight_decay,
        cfg.lr_decay_epoch,
        cfg.lr_decay,
        cfg.train_clips,
        cfg.val_clips,
        cfg.n_classes,
        cfg.noise,
        cfg.frames,
        cfg.height,
        cfg.width,
        cfg.square,
        cfg.speed,
        config_path
            .as_deref()
            .map_or_else(|| "-".into(), |p| p.display().to_string()),
        metrics_out
            .as_deref()
            .map_or_else(|| "-".into(), |p| p.display().to_string()),
    );

    let (train_set, val_set) = match cfg.make_datasets() {
        Ok(pair) => pair,
        Err(err) => return usage_error(&err.to_string()),
    };
    let mut store = ParamStore::new();
    let (variant, shift_fraction) = temporal.parts();
    // Dataset generation burns seed and seed+1, the epoch shuffle seed+2;
    // the model takes the next slot so all streams stay independent.
    let mut model = match ToyBackbone::seeded(
        &mut store,
        cfg.seed.wrapping_add(3),
        cfg.n_classes,
        variant,
        shift_fraction,
    ) {
        Ok(m) => m,
        Err(err) => return usage_error(&err.to_string()),
    };

    let started = Instant::now();
    let mut on_epoch = |m: &toy::EpochMetrics| {
        println!(
            "epoch {}: train_loss {} val_top1 {}",
            m.epoch, m.train_loss, m.val_top1
        );
    };
    let metrics = match toy::train_with(
        &mut model,
        &mut store,
        &train_set,
        &val_set,
        &cfg,
        &mut on_epoch,
    ) {
        Ok(m) => m,
        Err(ToyError::Diverged { epoch, loss }) => {
            eprintln!("error: training diverged at epoch {epoch} (loss {loss})");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    let elapsed = started.elapsed();

    let mut csv = String::from("epoch,train_loss,val_top1\n");
    for m in &metrics {
        csv.push_str(&format!("{},{},{}\n", m.epoch, m.train_loss, m.val_top1));
    }
    if let Some(path) = &metrics_out {
        if let Err(err) = fs::write(path, csv.as_bytes()) {
            eprintln!("error: cannot write {}: {err}", path.display());
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
        println!("wrote metrics to {}", path.display());
    }
    let last = metrics.last().expect("at least one epoch");
    println!(
        "{{\"variant\":\"{}\",\"seed\":{},\"epochs\":{},\"final_train_loss\":{},\"final_val_top1\":{},\"wall_seconds\":{:.1}}}",
        temporal.label(),
        cfg.seed,
        metrics.len(),
        last.train_loss,
        last.val_top1,
        elapsed.as_secs_f64()
    );
    ExitCode::from(EXIT_OK)
}

fn median(mut samples: Vec<Duration>) -> Duration {
    samples.sort();
    samples[samples.len() / 2]
}

fn cmd_bench(module: &str, size: Option<&str>, iters: usize) -> ExitCode {
    let variant = match Variant::parse(module) {
        Some(v) => v,
        None => {
            return usage_error(&format!(
                "unknown module `{module}`; valid names: {}",
                Variant::valid_names()
            ));
        }
    };
    let size = match size.map(parse_size).transpose() {
        Ok(s) => s.unwrap_or_else(|| gradcheck_default_size(module)),
        Err(msg) => return usage_error(&msg),
    };
    if iters == 0 {
        return usage_error("iters must be positive");
    }
    let [t, h, w, c] = size;
    println!("bench: module={module} size={t},{h},{w},{c} iters={iters}");

    let (mut module_impl, mut store) = match module_fixture(variant, 11, c) {
        Ok(pair) => pair,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    module_impl.set_bn_mode(BnMode::Train);
    let x = seeded_tensor(11, &[1, c, t, h, w]);
    let weights = seeded_tensor(13, &[1, c, t, h, w]);

    let mut run = |with_backward: bool, store: &mut ParamStore| -> Result<Duration, String> {
        let begun = Instant::now();
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let out = module_impl
            .apply(&mut tape, store, input)
            .map_err(|e| e.to_string())?;
        if with_backward {
            let w_id = tape.leaf(weights.clone());
            let weighted = tape.mul(out, w_id).map_err(|e| e.to_string())?;
            let loss = tape.sum_all(weighted);
            tape.backward(loss, store).map_err(|e| e.to_string())?;
            store.zero_grads();
        }
        Ok(begun.elapsed())
    };

    let mut forward = Vec::with_capacity(iters);
    let mut both = Vec::with_capacity(iters);
    for i in 0..iters {
        match (run(false, &mut store), run(true, &mut store)) {
            (Ok(f), Ok(fb)) => {
                if debug_enabled() {
                    println!(
                        "  iter {}: forward {:.3} ms, forward+backward {:.3} ms",
                        i,
                        f.as_secs_f64() * 1e3,
                        fb.as_secs_f64() * 1e3
                    );
                }
                forward.push(f);
                both.push(fb);
            }
            (Err(msg), _) | (_, Err(msg)) => {
                eprintln!("error: {msg}");
                return ExitCode::from(EXIT_CHECK_FAILED);
            }
        }
    }
    println!(
        "bench {}: forward median {:.3} ms, forward+backward median {:.3} ms over {} iters",
        module,
        median(forward).as_secs_f64() * 1e3,
        median(both).as_secs_f64() * 1e3,
        iters
    );
    ExitCode::from(EXIT_OK)
}

fn cmd_oracle(op: &str, seed: u64) -> ExitCode {
    println!("oracle: op={op} seed={seed}");
    let outcome = match run_oracle(op, seed) {
        Ok(o) => o,
        Err(err @ CheckError::UnknownName { .. }) => return usage_error(&err.to_string()),
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    let passed = outcome.passed();
    println!(
        "oracle {}: max absolute deviation {:e} (tol {:e}) -> {}",
        op,
        outcome.worst,
        outcome.tol,
        if passed { "pass" } else { "FAIL" }
    );
    if passed {
        ExitCode::from(EXIT_OK)
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
