use std::path::{Path, PathBuf};

use ris_sense_channel::{run_campaign, EnvironmentProfile, SweepConfig};
use ris_sense_core::{Architecture, Mode};
use ris_sense_dataset::{build_recipe, DatasetManifest, Recipe, Split};
use ris_sense_harness::*;

/// Builds the chamber measured recipe under `dir` and returns the manifest path.
fn chamber_measured(dir: &Path) -> PathBuf {
    let campaign = run_campaign(&EnvironmentProfile::chamber(), &SweepConfig::default(), DEFAULT_SEED).unwrap();
    build_recipe(Recipe::Measured, &campaign, dir, DEFAULT_SEED).unwrap();
    dir.join("manifest.json")
}

/// First `per_class` images of each class.
fn subset(split: &LoadedSplit, per_class: usize) -> LoadedSplit {
    let mut out = LoadedSplit { images: Vec::new(), labels: Vec::new() };
    for class in 0..3 {
        for (img, &l) in split.images.iter().zip(&split.labels).filter(|(_, &l)| l == class).take(per_class) {
            out.images.push(img.clone());
            out.labels.push(l);
        }
    }
    out
}

fn splits(manifest: &Path) -> (LoadedSplit, LoadedSplit) {
    let m = DatasetManifest::load(manifest).unwrap();
    (load_split(manifest, &m, Split::Train).unwrap(), load_split(manifest, &m, Split::Test).unwrap())
}

#[test]
fn zero_learning_rate_matches_the_untrained_model() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = splits(&chamber_measured(dir.path()));
    let train = subset(&train, 3);
    let cfg = TrainConfig { epochs: 1, batch_size: 4, adam: AdamConfig { lr: 0.0, ..AdamConfig::default() }, ..TrainConfig::default() };
    let (trained, _) = train_loaded(Architecture::ccnn(), &train, &cfg, |_, _| {}).unwrap();

    let mut untrained = initial_model(Architecture::ccnn(), &cfg).unwrap();
    for (a, b) in trained.params().iter().zip(untrained.params()) {
        assert_eq!(a.data(), b.data());
    }
    // The untrained network gets the same end-of-training BN estimate; with equal
    // weights that estimate is equal too, so every prediction matches.
    let mut rng = ris_sense_core::Rng::new(0);
    reestimate_batch_norm(&mut untrained, &train, cfg.batch_size, &mut rng).unwrap();
    untrained.set_mode(Mode::Eval);
    let a = evaluate(&trained, &test).unwrap();
    let b = evaluate(&untrained, &test).unwrap();
    assert_eq!(a.confusion, b.confusion);
    assert_eq!(a.accuracy, b.accuracy);
}

#[test]
fn training_is_deterministic_and_evaluation_is_read_only() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = splits(&chamber_measured(dir.path()));
    let train = subset(&train, 2);
    let cfg = TrainConfig { epochs: 2, batch_size: 3, seed: 11, ..TrainConfig::default() };
    let (a, curve_a) = train_loaded(Architecture::ccnn(), &train, &cfg, |_, _| {}).unwrap();
    let (b, curve_b) = train_loaded(Architecture::ccnn(), &train, &cfg, |_, _| {}).unwrap();
    assert_eq!(curve_a, curve_b);
    assert_eq!(curve_a.len(), 2);
    assert_eq!(a, b);

    let before = a.clone();
    evaluate(&a, &test).unwrap();
    assert_eq!(a, before);

    let other = TrainConfig { seed: 12, ..cfg };
    let (c, _) = train_loaded(Architecture::ccnn(), &train, &other, |_, _| {}).unwrap();
    assert_ne!(a, c);
}

#[test]
fn train_reports_on_the_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = chamber_measured(dir.path());
    let mut epochs = Vec::new();
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let out = train(&manifest, &cfg, |e, loss| epochs.push((e, loss))).unwrap();
    assert_eq!(epochs.len(), 1);
    assert_eq!(out.loss_curve, vec![epochs[0].1]);
    assert_eq!(out.train_n, 57);
    let r = &out.report;
    assert_eq!(r.test_n, 15);
    assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 15);
    assert_eq!(r.recipe, Some(Recipe::Measured));
    assert!((0.0..=1.0).contains(&r.accuracy));
    let again = evaluate_split(&out.model, &manifest, Split::Test).unwrap();
    assert_eq!(again.confusion, r.confusion);
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = splits(&chamber_measured(dir.path()));
    for cfg in [TrainConfig { epochs: 0, ..TrainConfig::default() }, TrainConfig { batch_size: 1, ..TrainConfig::default() }] {
        let err = train_loaded(Architecture::ccnn(), &train, &cfg, |_, _| {}).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)), "{err}");
    }
    let empty = LoadedSplit { images: Vec::new(), labels: Vec::new() };
    let err = train_loaded(Architecture::ccnn(), &empty, &TrainConfig::default(), |_, _| {}).unwrap_err();
    assert!(matches!(err, HarnessError::EmptySplit("train")));
}

#[test]
fn missing_image_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = chamber_measured(dir.path());
    let m = DatasetManifest::load(&manifest).unwrap();
    let victim = DatasetManifest::resolve(&manifest, &m.entries[5]);
    std::fs::remove_file(&victim).unwrap();
    let split = m.entries[5].split;
    match load_split(&manifest, &m, split).unwrap_err() {
        HarnessError::Ingest { path, .. } => assert_eq!(path, victim.display().to_string()),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn chamber_loss_falls_over_five_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = splits(&chamber_measured(dir.path()));
    let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
    let (_, curve) = train_loaded(Architecture::ccnn(), &train, &cfg, |_, _| {}).unwrap();
    assert!(curve[4] < curve[0], "{curve:?}");
    assert!(curve.iter().all(|l| l.is_finite()));
}
