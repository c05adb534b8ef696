//! Training-run configuration: TOML file schema, CLI overrides, and the
//! choice of temporal component.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use aia_core::attention::Variant;
use aia_core::toy::TrainConfig;

/// TOML schema for `aia train --config`. Every key is optional and falls
/// back to the corresponding `TrainConfig` default, except `seed`, which
/// must come from either the file or `--seed`. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    lr_decay_epoch: Option<usize>,
    lr_decay: Option<f64>,
    seed: Option<u64>,
    train_clips: Option<usize>,
    val_clips: Option<usize>,
    n_classes: Option<usize>,
    noise: Option<f64>,
    frames: Option<usize>,
    height: Option<usize>,
    width: Option<usize>,
    square: Option<usize>,
    speed: Option<usize>,
    variant: Option<String>,
    shift_fraction: Option<f64>,
}

/// What to place at the backbone's temporal insertion point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TemporalChoice {
    Plain,
    Shift { fraction: f64 },
    Attention(Variant),
}

impl TemporalChoice {
    pub fn label(&self) -> &'static str {
        match self {
            TemporalChoice::Plain => "none",
            TemporalChoice::Shift { .. } => "shift",
            TemporalChoice::Attention(v) => v.name(),
        }
    }

    /// The `(variant, shift_fraction)` pair `ToyBackbone::seeded` expects.
    pub fn parts(&self) -> (Option<Variant>, Option<f64>) {
        match *self {
            TemporalChoice::Plain => (None, None),
            TemporalChoice::Shift { fraction } => (None, Some(fraction)),
            TemporalChoice::Attention(v) => (Some(v), None),
        }
    }
}

fn parse_temporal(name: &str, shift_fraction: Option<f64>) -> Result<TemporalChoice, String> {
    match name {
        "none" => Ok(TemporalChoice::Plain),
        "shift" => Ok(TemporalChoice::Shift {
            fraction: shift_fraction.unwrap_or(0.25),
        }),
        other => match Variant::parse(other) {
            Some(v) => Ok(TemporalChoice::Attention(v)),
            None => Err(format!(
                "unknown variant `{other}`; valid names: none, shift, {}",
                Variant::valid_names()
            )),
        },
    }
}

/// Merge defaults, an optional TOML file, and CLI overrides into the final
/// config plus temporal choice. Precedence: CLI flag > file key > default.
pub fn resolve_train_config(
    path: Option<&Path>,
    cli_variant: Option<&str>,
    cli_seed: Option<u64>,
) -> Result<(TrainConfig, TemporalChoice), String> {
    let file = match path {
        None => FileConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|err| format!("cannot read config {}: {err}", p.display()))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|err| format!("invalid config {}:\n{err}", p.display()))?
        }
    };

    let mut cfg = TrainConfig::default();
    if let Some(v) = file.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = file.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = file.lr {
        cfg.lr = v;
    }
    if let Some(v) = file.momentum {
        cfg.momentum = v;
    }
    if let Some(v) = file.weight_decay {
        cfg.weight_decay = v;
    }
    if let Some(v) = file.lr_decay_epoch {
        cfg.lr_decay_epoch = v;
    }
    if let Some(v) = file.lr_decay {
        cfg.lr_decay = v;
    }
    if let Some(v) = file.train_clips {
        cfg.train_clips = v;
    }
    if let Some(v) = file.val_clips {
        cfg.val_clips = v;
    }
    if let Some(v) = file.n_classes {
        cfg.n_classes = v;
    }
    if let Some(v) = file.noise {
        cfg.noise = v;
    }
    if let Some(v) = file.frames {
        cfg.frames = v;
    }
    if let Some(v) = file.height {
        cfg.height = v;
    }
    if let Some(v) = file.width {
        cfg.width = v;
    }
    if let Some(v) = file.square {
        cfg.square = v;
    }
    if let Some(v) = file.speed {
        cfg.speed = v;
    }

    // A config file describes a reproducible experiment, so it must pin the
    // seed itself unless the caller overrides it explicitly.
    match (cli_seed, file.seed, path) {
        (Some(s), _, _) => cfg.seed = s,
        (None, Some(s), _) => cfg.seed = s,
        (None, None, Some(p)) => {
            return Err(format!(
                "config {} does not set `seed` and no --seed was given",
                p.display()
            ))
        }
        (None, None, None) => {}
    }

    let temporal = match cli_variant {
        Some(name) => parse_temporal(name, file.shift_fraction)?,
        None => match &file.variant {
            Some(name) => parse_temporal(name, file.shift_fraction)?,
            None => TemporalChoice::Plain,
        },
    };
    Ok((cfg, temporal))
}
