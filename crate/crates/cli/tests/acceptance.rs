//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.
//!
//! Criteria run one after another inside a single test so the timed ones
//! (gradient checks, training) are not sharing the CPU with each other.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use ris_sense_channel::{
    channel_paths, receive_gain, run_campaign, sweep_to_cir, synthesize_sweep, EnvironmentKind, EnvironmentProfile, PathKind,
    Scenario, SweepConfig, Window,
};
use ris_sense_core::checkpoint::load_checkpoint;
use ris_sense_core::diagnostics::{run_checks, CheckTarget};
use ris_sense_core::{Architecture, CcnnModel, ClassLabel, Rng, Tensor};
use ris_sense_dataset::{
    augment, build_recipe, cell_spectrogram, check_leakage, random_ops, AugmentOp, Provenance, Recipe, SpectrogramImage,
    IMAGE_SIZE,
};
use ris_sense_harness::{run_grid, GridConfig, DEFAULT_SEED};

/// Epochs used for the surrogate-training criterion (the budget allows up to 30).
const TRAINING_EPOCHS: usize = 12;
const TRAINING_BUDGET_S: f64 = 600.0;

type Outcome = Result<String, String>;

fn criterion(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("PASS  {name:<14} {detail} [{secs:.1} s]"),
        Err(detail) => println!("FAIL  {name:<14} {detail} [{secs:.1} s]"),
    }
    result.is_ok()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let results = run_checks(CheckTarget::All).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let worst: Vec<String> = results.iter().map(|r| format!("{}={:.1e}", r.name, r.max_rel_error)).collect();
    for r in &results {
        ensure(r.passed(), || format!("{} max rel error {:.3e} > {:.0e}", r.name, r.max_rel_error, r.tolerance))?;
    }
    ensure(secs <= 60.0, || format!("took {secs:.1} s > 60 s"))?;
    Ok(worst.join(" "))
}

fn shapes() -> Outcome {
    let model = CcnnModel::init(Architecture::ccnn(), &mut Rng::new(DEFAULT_SEED)).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(3);
    let data = (0..3 * 224 * 224).map(|_| rng.uniform(0.0, 1.0)).collect();
    let x = Tensor::from_vec(&[1, 3, 224, 224], data).map_err(|e| e.to_string())?;
    let trace = model.trace_shapes(&x).map_err(|e| e.to_string())?;
    let expected: Vec<Vec<usize>> = vec![
        vec![1, 3, 224, 224],
        vec![1, 32, 112, 112],
        vec![1, 64, 56, 56],
        vec![1, 128, 28, 28],
        vec![1, 100352],
        vec![1, 256],
        vec![1, 3],
    ];
    ensure(trace == expected, || format!("got {trace:?}"))?;
    Ok("3x224x224 -> 32x112x112 -> 64x56x56 -> 128x28x28 -> 100352 -> 256 -> 3".into())
}

fn normalization() -> Outcome {
    const PASSES: usize = 1000;
    const BATCH: usize = 8;
    let mut rng = Rng::new(99);
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut model = CcnnModel::init(Architecture::ccnn(), &mut rng).map_err(|e| e.to_string())?;
    while done < PASSES {
        if done % 200 == 0 {
            model = CcnnModel::init(Architecture::ccnn(), &mut rng).map_err(|e| e.to_string())?;
        }
        // inputs span several orders of magnitude to push the logits around
        let scale = 10f64.powf(rng.uniform(-2.0, 2.0));
        let data = (0..BATCH * 3 * 224 * 224).map(|_| scale * rng.uniform(0.0, 1.0)).collect();
        let x = Tensor::from_vec(&[BATCH, 3, 224, 224], data).map_err(|e| e.to_string())?;
        let probs = model.predict(&x).map_err(|e| e.to_string())?;
        for row in probs.data().chunks(3) {
            ensure(row.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)), || format!("row {row:?} outside simplex"))?;
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        done += BATCH;
    }
    ensure(worst <= 1e-9, || format!("row sum off by {worst:.3e}"))?;
    Ok(format!("{done} rows, max |sum - 1| = {worst:.1e}"))
}

fn dataset_sizes(root: &Path) -> Outcome {
    let mut lines = Vec::new();
    for env in EnvironmentKind::ALL {
        let campaign = run_campaign(&EnvironmentProfile::for_kind(env), &SweepConfig::default(), DEFAULT_SEED)
            .map_err(|e| e.to_string())?;
        let mut sizes = Vec::new();
        for recipe in Recipe::ALL {
            let dir = root.join(env.name()).join(recipe.name());
            let m = build_recipe(recipe, &campaign, &dir, DEFAULT_SEED).map_err(|e| e.to_string())?;
            let expected = [72, 720, 144, 725][recipe.index()];
            ensure(m.entries.len() == expected, || format!("{env}/{recipe}: {} entries, want {expected}", m.entries.len()))?;
            check_leakage(&m).map_err(|s| format!("{env}/{recipe}: source {s} in both splits"))?;
            let measured = m.provenance_count(Provenance::Measured);
            let noisy = m.provenance_count(Provenance::NoisyAugmented);
            match recipe {
                Recipe::MixedMeasured => {
                    ensure(measured > noisy, || format!("{env}/mixed_measured: {measured} measured <= {noisy} noisy"))?
                }
                Recipe::MixedSynthetic => {
                    ensure(noisy > measured, || format!("{env}/mixed_synthetic: {noisy} noisy <= {measured} measured"))?
                }
                _ => {}
            }
            sizes.push(m.entries.len().to_string());
        }
        lines.push(format!("{env} {}", sizes.join("/")));
    }
    Ok(format!("{}; no leakage", lines.join(", ")))
}

fn training(root: &Path) -> Outcome {
    let mut cfg = GridConfig {
        recipes: vec![Recipe::Measured],
        record_runtime: true,
        ..GridConfig::default()
    };
    cfg.train.epochs = TRAINING_EPOCHS;
    let cells = run_grid(&cfg, root, |_| {}).map_err(|e| e.to_string())?;
    let acc = |env: EnvironmentKind| -> Result<(f64, f64), String> {
        let c = cells.iter().find(|c| c.environment == env).ok_or(format!("no {env} cell"))?;
        let r = c.report.as_ref().ok_or_else(|| format!("{env} failed: {:?}", c.error))?;
        Ok((r.accuracy, c.runtime_s.unwrap_or(f64::NAN)))
    };
    let (chamber, chamber_s) = acc(EnvironmentKind::Chamber)?;
    let (meeting, _) = acc(EnvironmentKind::Meeting)?;
    let (hflab, _) = acc(EnvironmentKind::Hflab)?;
    let summary = format!(
        "chamber {chamber:.3} ({chamber_s:.0} s), meeting {meeting:.3}, hflab {hflab:.3} after {TRAINING_EPOCHS} epochs"
    );
    ensure(chamber >= 0.95, || format!("chamber below 0.95: {summary}"))?;
    ensure(chamber_s <= TRAINING_BUDGET_S, || format!("chamber over {TRAINING_BUDGET_S} s: {summary}"))?;
    ensure(hflab >= 0.80, || format!("hflab below 0.80: {summary}"))?;
    ensure(chamber >= meeting && meeting >= hflab, || format!("ordering broken: {summary}"))?;
    Ok(summary)
}

fn run_cli_grid(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ris-sense"))
        .args(["grid", "--out"])
        .arg(out)
        .args(["--seed", "2024", "--epochs", "1", "--envs", "chamber", "--recipes", "measured"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || format!("grid exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)))
}

fn determinism(root: &Path) -> Outcome {
    let (a, b) = (root.join("a"), root.join("b"));
    run_cli_grid(&a)?;
    run_cli_grid(&b)?;
    let csv_a = fs::read(a.join("grid.csv")).map_err(|e| e.to_string())?;
    let csv_b = fs::read(b.join("grid.csv")).map_err(|e| e.to_string())?;
    ensure(csv_a == csv_b, || "grid.csv differs between runs".into())?;
    let ckpt = Path::new("models").join("chamber_measured.ccnn");
    let (ma, _) = load_checkpoint(&a.join(&ckpt)).map_err(|e| e.to_string())?;
    let (mb, _) = load_checkpoint(&b.join(&ckpt)).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(17);
    let data = (0..2 * 3 * 224 * 224).map(|_| rng.uniform(0.0, 1.0)).collect();
    let probe = Tensor::from_vec(&[2, 3, 224, 224], data).map_err(|e| e.to_string())?;
    let pa = ma.predict(&probe).map_err(|e| e.to_string())?;
    let pb = mb.predict(&probe).map_err(|e| e.to_string())?;
    let diff = pa.data().iter().zip(pb.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(diff <= 1e-6, || format!("probe outputs differ by {diff:.3e}"))?;
    let same_bytes = fs::read(a.join(&ckpt)).ok() == fs::read(b.join(&ckpt)).ok();
    Ok(format!("grid.csv identical ({} bytes), probe diff {diff:.1e}, checkpoint bytes identical: {same_bytes}", csv_a.len()))
}

fn physics() -> Outcome {
    let cfg = SweepConfig::default();
    // 0.431 m at the speed of light, times the 0.4 GHz span
    let tau: f64 = 0.431 / 299_792_458.0;
    let expected = (tau * (5.2e9 - 4.8e9)).round() as usize;
    let chamber = EnvironmentProfile::chamber();
    for window in [Window::Rect, Window::Hann] {
        let s = synthesize_sweep(&chamber, &Scenario::new(ClassLabel::Los), 0.0, &cfg, &mut Rng::new(1))
            .map_err(|e| e.to_string())?;
        let bin = sweep_to_cir(&s, window).map_err(|e| e.to_string())?.peak_bin();
        ensure(bin == expected, || format!("{window:?} peak bin {bin}, want {expected}"))?;
    }

    let freqs = cfg.frequencies();
    let order = [ClassLabel::Los, ClassLabel::Nlos75, ClassLabel::Nlos100];
    for env in EnvironmentKind::ALL {
        let profile = EnvironmentProfile::for_kind(env);
        let direct: Vec<_> = order
            .iter()
            .map(|&k| {
                let paths = channel_paths(&profile, &Scenario::new(k), &cfg);
                paths.iter().find(|p| p.kind == PathKind::Direct).expect("direct path").clone()
            })
            .collect();
        for angle in cfg.angles() {
            for &f in &freqs {
                let mag: Vec<f64> = direct
                    .iter()
                    .map(|d| {
                        let g = d.gain * receive_gain(angle - d.arrival_deg, &cfg);
                        (g * Complex64::from_polar(1.0, -2.0 * PI * f * d.delay_s)).norm()
                    })
                    .collect();
                ensure(mag[0] >= mag[1] && mag[1] >= mag[2], || format!("{env} angle {angle} f {f}: {mag:?}"))?;
            }
        }
    }

    let mut worst = 0.0f64;
    for env in EnvironmentKind::ALL {
        let profile = EnvironmentProfile::for_kind(env);
        for k in ClassLabel::ALL {
            for angle in [0.0, 85.0, 190.0, 355.0] {
                let s = synthesize_sweep(&profile, &Scenario::new(k), angle, &cfg, &mut Rng::new(angle as u64))
                    .map_err(|e| e.to_string())?;
                let cir = sweep_to_cir(&s, Window::Rect).map_err(|e| e.to_string())?;
                let freq_energy = s.h.iter().map(|h| h.norm_sqr()).sum::<f64>() / s.h.len() as f64;
                let delay_energy: f64 = cir.taps.iter().map(|c| c.norm_sqr()).sum();
                worst = worst.max((freq_energy - delay_energy).abs() / freq_energy);
            }
        }
    }
    ensure(worst <= 1e-9, || format!("Parseval relative error {worst:.3e}"))?;
    Ok(format!("peak bin {expected}, blockage ordered at all {} angles, Parseval rel err {worst:.1e}", cfg.angle_count()))
}

fn max_diff(a: &SpectrogramImage, b: &SpectrogramImage) -> u8 {
    a.pixels.iter().zip(&b.pixels).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

fn augmentation() -> Outcome {
    let campaign = run_campaign(&EnvironmentProfile::hflab(), &SweepConfig::default(), DEFAULT_SEED).map_err(|e| e.to_string())?;
    let mut images = Vec::new();
    for k in ClassLabel::ALL {
        for angle in [0, 20, 50] {
            images.push(cell_spectrogram(&campaign, k, angle).map_err(|e| e.to_string())?);
        }
    }
    let neutral = [
        AugmentOp::Saturation(1.0),
        AugmentOp::Brightness(1.0),
        AugmentOp::Contrast(1.0),
        AugmentOp::Hue(0.0),
        AugmentOp::Rotate(0.0),
        AugmentOp::ResizeCrop(1.0),
    ];
    let mut rng = Rng::new(5);
    let mut outputs = 0;
    for img in &images {
        let twice = augment(&augment(img, &[AugmentOp::Hflip]).map_err(|e| e.to_string())?, &[AugmentOp::Hflip])
            .map_err(|e| e.to_string())?;
        ensure(&twice == img, || "hflip twice changed the image".into())?;
        let hue = max_diff(&augment(img, &[AugmentOp::Hue(360.0)]).map_err(|e| e.to_string())?, img);
        ensure(hue <= 1, || format!("hue 360 moved a channel by {hue}"))?;
        let id = max_diff(&augment(img, &neutral).map_err(|e| e.to_string())?, img);
        ensure(id <= 1, || format!("neutral ops moved a channel by {id}"))?;
        for _ in 0..20 {
            let ops = random_ops(&mut rng);
            let out = augment(img, &ops).map_err(|e| e.to_string())?;
            ensure(
                out.width() == IMAGE_SIZE && out.height() == IMAGE_SIZE && out.pixels.len() == IMAGE_SIZE * IMAGE_SIZE * 3,
                || format!("{ops:?} gave {}x{}", out.width(), out.height()),
            )?;
            outputs += 1;
        }
    }
    Ok(format!("{} images, {outputs} random augmentations all 224x224x3", images.len()))
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let results = [
        criterion("gradient", gradient),
        criterion("shape", shapes),
        criterion("normalization", normalization),
        criterion("dataset-size", || dataset_sizes(&tmp.path().join("datasets"))),
        criterion("training", || training(&tmp.path().join("training"))),
        criterion("determinism", || determinism(&tmp.path().join("determinism"))),
        criterion("physics", physics),
        criterion("augmentation", augmentation),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
