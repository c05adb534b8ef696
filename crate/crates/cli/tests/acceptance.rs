//! Release gate: seven checks covering parameter/FLOP reproduction, the
//! gradient and oracle suites, algebraic fixpoints, the temporal-modelling
//! demonstration, and output determinism. Each test prints one
//! `criterion N (...): PASS` line (visible with `--nocapture`); a failure
//! panics with the offending detail.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use aia_core::attention::Variant;
use aia_core::autodiff::{BnMode, ParamStore, Tape};
use aia_core::checks::{gradcheck_names, module_fixture, oracle_names, run_gradcheck, run_oracle};
use aia_core::complexity::{resnet50_spec, walk, AttentionConfig, Backbone, Width};
use aia_core::reference::seeded_tensor;
use aia_core::toy::{self, ToyBackbone, TrainConfig};

fn pass(n: usize, label: &str) {
    println!("criterion {n} ({label}): PASS");
}

fn reduced(variant: Variant) -> Option<AttentionConfig> {
    Some(AttentionConfig {
        variant,
        width: Width::Reduced,
    })
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("aia-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir");
    dir.join(name)
}

#[test]
fn criterion_1_parameter_reproduction() {
    let begun = Instant::now();

    for backbone in [Backbone::Tsn, Backbone::Tsm] {
        let plain = walk(&resnet50_spec(backbone, 8, 224, 174, None));
        assert_eq!(plain.total_params, 23_864_558, "{} plain", backbone.name());
        assert_eq!(plain.params_m(), "23.86M", "{} plain", backbone.name());
        for v in Variant::AIA {
            let report = walk(&resnet50_spec(backbone, 8, 224, 174, reduced(v)));
            assert_eq!(
                report.params_m(),
                "23.87M",
                "{} + {} params off",
                backbone.name(),
                v.name()
            );
        }
    }

    // Every attention conv kernel holds exactly 54 weights, 48 of them in
    // the ST configuration (three axial gates in each of 16 blocks).
    let plain = walk(&resnet50_spec(Backbone::Tsn, 8, 224, 174, None));
    let st = walk(&resnet50_spec(
        Backbone::Tsn,
        8,
        224,
        174,
        reduced(Variant::St),
    ));
    let mut gate_convs = 0usize;
    let mut per_block: BTreeMap<String, u64> = BTreeMap::new();
    for row in &st.rows {
        if let Some(block) = row
            .name
            .split(".att.")
            .next()
            .filter(|_| row.name.contains(".att."))
        {
            *per_block.entry(block.to_string()).or_default() += row.params;
            if row.name.ends_with(".conv") {
                assert_eq!(row.params, 54, "gate kernel size in {}", row.name);
                gate_convs += 1;
            }
        }
    }
    assert_eq!(gate_convs, 48);
    assert_eq!(per_block.len(), 16, "attention should sit in all 16 blocks");
    for (block, params) in &per_block {
        assert_eq!(*params, 168, "ST parameter delta in {block}");
    }
    assert_eq!(st.total_params - plain.total_params, 2688);

    let elapsed = begun.elapsed();
    assert!(elapsed < Duration::from_secs(1), "too slow: {elapsed:?}");
    pass(1, "parameter reproduction");
}

#[test]
fn criterion_2_flop_reproduction() {
    let begun = Instant::now();

    // (variant, expected rounded label, expected table value in G)
    let table: [(Option<Variant>, &str, f64); 7] = [
        (None, "32.88G", 32.88),
        (Some(Variant::C), "32.88G", 32.88),
        (Some(Variant::St), "33.01G", 33.01),
        (Some(Variant::CinSt), "33.01G", 33.015),
        (Some(Variant::StinC), "33.01G", 33.015),
        (Some(Variant::CinStStinCSeq), "33.15G", 33.15),
        (Some(Variant::StinCCinStSeq), "33.15G", 33.15),
    ];
    for (variant, label, target_g) in table {
        let attention = variant.map(|v| reduced(v).unwrap());
        let tsn = walk(&resnet50_spec(Backbone::Tsn, 8, 224, 174, attention));
        assert_eq!(tsn.flops_g(), label, "{variant:?}");
        let total_g = tsn.total_flops as f64 / 1e9;
        assert!(
            (total_g - target_g).abs() <= 0.02,
            "{variant:?}: {total_g} vs {target_g}"
        );
        // The temporal shift is free, so the shifted backbone must cost
        // exactly the same under this convention.
        let tsm = walk(&resnet50_spec(Backbone::Tsm, 8, 224, 174, attention));
        assert_eq!(tsm.total_flops, tsn.total_flops, "{variant:?} tsm");
        assert_eq!(tsm.total_params, tsn.total_params, "{variant:?} tsm");
    }

    let plain = walk(&resnet50_spec(Backbone::Tsn, 8, 224, 174, None));
    let c = walk(&resnet50_spec(
        Backbone::Tsn,
        8,
        224,
        174,
        reduced(Variant::C),
    ));
    let delta_g = (c.total_flops - plain.total_flops) as f64 / 1e9;
    assert!(
        (0.005..=0.007).contains(&delta_g),
        "C-unit FLOP delta should be about 0.006G, got {delta_g}"
    );

    let elapsed = begun.elapsed();
    assert!(elapsed < Duration::from_secs(1), "too slow: {elapsed:?}");
    pass(2, "flop reproduction");
}

#[test]
fn criterion_3_gradient_suite() {
    let begun = Instant::now();
    for name in gradcheck_names() {
        for seed in 101..=105 {
            let outcome = run_gradcheck(name, seed, None).expect("known name");
            assert!(
                outcome.passed(),
                "gradcheck {name} seed {seed}: {:e} >= {:e}",
                outcome.worst,
                outcome.tol
            );
        }
    }
    let elapsed = begun.elapsed();
    assert!(elapsed < Duration::from_secs(120), "too slow: {elapsed:?}");
    pass(3, "gradient suite");
}

#[test]
fn criterion_4_oracle_equivalence() {
    let begun = Instant::now();
    for name in oracle_names() {
        for seed in [201, 202] {
            let outcome = run_oracle(name, seed).expect("known name");
            assert!(
                outcome.passed(),
                "oracle {name} seed {seed}: {:e} >= {:e}",
                outcome.worst,
                outcome.tol
            );
        }
    }
    let elapsed = begun.elapsed();
    assert!(elapsed < Duration::from_secs(60), "too slow: {elapsed:?}");
    pass(4, "oracle equivalence");
}

#[test]
fn criterion_5_algebraic_fixpoints() {
    // With zero gate kernels and normalisation bypassed, every sigmoid is
    // exactly one half, so each stage halves its input.
    let x = seeded_tensor(55, &[2, 16, 4, 6, 6]);
    for v in Variant::AIA {
        let (mut module, mut store) = module_fixture(v, 56, 16).expect("fixture");
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            for value in store.value_mut(id).data_mut() {
                *value = 0.0;
            }
        }
        module.set_bn_mode(BnMode::Bypass);
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let out = module.apply(&mut tape, &store, input).expect("apply");
        let factor = match v {
            Variant::CStSeq | Variant::StCSeq | Variant::CinStStinCSeq | Variant::StinCCinStSeq => {
                0.25
            }
            _ => 0.5,
        };
        for (o, i) in tape.value(out).data().iter().zip(x.data()) {
            assert_eq!(*o, factor * *i, "{} fixpoint", v.name());
        }
    }

    // With random parameters every gate stays strictly inside (0,1), so on
    // a strictly positive input the output lands strictly between 0 and x.
    let positive = {
        let mut t = seeded_tensor(57, &[1, 16, 3, 5, 5]);
        for v in t.data_mut() {
            *v = 1.0 + 0.4 * *v;
        }
        t
    };
    for v in Variant::ALL {
        let (mut module, store) = module_fixture(v, 58, 16).expect("fixture");
        module.set_bn_mode(BnMode::Train);
        let mut tape = Tape::new();
        let input = tape.leaf(positive.clone());
        let out = module.apply(&mut tape, &store, input).expect("apply");
        for (o, i) in tape.value(out).data().iter().zip(positive.data()) {
            assert!(
                *o > 0.0 && *o < *i,
                "{}: gate left (0,1), output {o} vs input {i}",
                v.name()
            );
        }
    }
    pass(5, "algebraic fixpoints");
}

fn final_val_top1(variant: Option<Variant>) -> f64 {
    let cfg = TrainConfig::default();
    let (train_set, val_set) = cfg.make_datasets().expect("datasets");
    let mut store = ParamStore::new();
    let mut model = ToyBackbone::seeded(
        &mut store,
        cfg.seed.wrapping_add(3),
        cfg.n_classes,
        variant,
        None,
    )
    .expect("model");
    let metrics = toy::train(&mut model, &mut store, &train_set, &val_set, &cfg).expect("train");
    metrics.last().expect("epochs").val_top1
}

#[test]
fn criterion_6_toy_temporal_demonstration() {
    let begun = Instant::now();
    let plain = final_val_top1(None);
    let c_unit = final_val_top1(Some(Variant::C));
    let combo = final_val_top1(Some(Variant::CinStStinCSeq));
    println!("toy validation top-1: plain {plain}, c {c_unit}, cinst_stinc_seq {combo}");
    assert!(
        plain <= 0.40,
        "frame-independent backbone should stay near chance, got {plain}"
    );
    assert!(
        c_unit >= 0.80,
        "channel gate should crack the task, got {c_unit}"
    );
    assert!(
        combo >= 0.85,
        "two-stage module should do best, got {combo}"
    );
    assert!(
        c_unit - plain >= 0.40,
        "temporal margin collapsed: c {c_unit} vs plain {plain}"
    );
    let elapsed = begun.elapsed();
    assert!(elapsed < Duration::from_secs(600), "too slow: {elapsed:?}");
    pass(6, "toy temporal demonstration");
}

fn run_aia(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_aia"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_7_deterministic_outputs() {
    // The exact same audit invocation twice: identical report file bytes
    // and identical stdout.
    let audit = scratch("audit.json");
    let args = [
        "audit",
        "--attention",
        "stinc_cinst_seq",
        "--format",
        "json",
        "--out",
        audit.to_str().unwrap(),
    ];
    let first = run_aia(&args);
    assert!(first.status.success());
    let first_report = fs::read(&audit).unwrap();
    let second = run_aia(&args);
    assert!(second.status.success());
    assert_eq!(first_report, fs::read(&audit).unwrap());
    assert_eq!(first.stdout, second.stdout);
    assert!(!first_report.is_empty());

    // The exact same tiny training run twice: identical metrics files and
    // identical epoch/summary lines. The summary's wall_seconds field is
    // honest wall-clock time, so it is cut before comparing stdout.
    let cfg = scratch("determinism.toml");
    fs::write(
        &cfg,
        "epochs = 2\ntrain_clips = 24\nval_clips = 16\nseed = 11\nvariant = \"cinst\"\n",
    )
    .unwrap();
    let metrics = scratch("metrics.csv");
    let args = [
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--metrics-out",
        metrics.to_str().unwrap(),
    ];
    let first = run_aia(&args);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let first_metrics = fs::read(&metrics).unwrap();
    let second = run_aia(&args);
    assert!(
        second.status.success(),
        "{}",
        String::from_utf8_lossy(&second.stderr)
    );
    assert_eq!(first_metrics, fs::read(&metrics).unwrap());
    let timeless = |out: &[u8]| {
        let text = String::from_utf8(out.to_vec()).unwrap();
        let cut = text.find("\"wall_seconds\"").expect("summary line present");
        text[..cut].to_string()
    };
    assert_eq!(timeless(&first.stdout), timeless(&second.stdout));
    assert!(!first_metrics.is_empty());
    pass(7, "deterministic outputs");
}
