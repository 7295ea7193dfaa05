use std::path::Path;

use ris_sense_core::layers::softmax_cross_entropy;
use ris_sense_core::rng::derive_seed;
use ris_sense_core::{Architecture, CcnnModel, Mode, Rng};
use ris_sense_dataset::{DatasetManifest, Split};
use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, AdamConfig, AdamState};
use crate::data::{batch_tensor, load_split, LoadedSplit};
use crate::error::{HarnessError, Result};
use crate::report::{evaluate, EvalReport};

/// Seed used whenever none is given.
pub const DEFAULT_SEED: u64 = 2024;

const INIT_TAG: u64 = 1;
const DROPOUT_TAG: u64 = 2;
const SHUFFLE_TAG: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch_size: 16, adam: AdamConfig::default(), seed: DEFAULT_SEED, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(HarnessError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(HarnessError::Config("batch_size must be at least 2".into()));
        }
        let a = &self.adam;
        if !(a.lr >= 0.0 && a.lr.is_finite()) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(HarnessError::Config(format!("bad optimizer settings {a:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CcnnModel,
    /// Mean training loss of each epoch.
    pub loss_curve: Vec<f64>,
    pub report: EvalReport,
    pub train_n: usize,
}

/// Trains a freshly initialised network on already-loaded data. `on_epoch`
/// receives the epoch index and its mean loss.
pub fn train_loaded(
    arch: Architecture,
    data: &LoadedSplit,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(CcnnModel, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(HarnessError::EmptySplit("train"));
    }
    let mut model = initial_model(arch, cfg)?;
    model.set_mode(Mode::Train);
    let mut dropout_rng = Rng::derived(cfg.seed, &[DROPOUT_TAG]);
    let mut adam = AdamState::new(&model.params());
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        if cfg.shuffle {
            Rng::derived(cfg.seed, &[SHUFFLE_TAG, epoch as u64]).shuffle(&mut order);
        }
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = batch_tensor(data, batch);
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let fwd = model.forward(&x, &mut dropout_rng)?;
            let loss = softmax_cross_entropy(&fwd.logits, &labels)?;
            let grads = model.backward(&fwd.cache, &loss.grad_logits)?;
            drop(fwd);
            adam_step(model.params_mut(), &grads.tensors, &mut adam, &cfg.adam)?;
            total += loss.loss * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        curve.push(mean);
        on_epoch(epoch, mean);
    }
    reestimate_batch_norm(&mut model, data, cfg.batch_size, &mut dropout_rng)?;
    model.set_mode(Mode::Eval);
    Ok((model, curve))
}

/// The network `train_loaded` starts from for this config.
pub fn initial_model(arch: Architecture, cfg: &TrainConfig) -> Result<CcnnModel> {
    Ok(CcnnModel::init(arch, &mut Rng::derived(cfg.seed, &[INIT_TAG]))?)
}

/// Replaces the BN running statistics with the plain average of the batch
/// statistics of one pass over `data` at the final weights.
///
/// The exponential average taken during training trails weights that are still
/// moving, and on small sets that lag alone can flip eval-mode predictions.
/// Parameters are untouched.
pub fn reestimate_batch_norm(model: &mut CcnnModel, data: &LoadedSplit, batch_size: usize, rng: &mut Rng) -> Result<()> {
    let saved: Vec<f64> = model.norms.iter().map(|n| n.momentum).collect();
    model.set_mode(Mode::Train);
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut outcome = Ok(());
    for (k, batch) in idx.chunks(batch_size.max(2)).enumerate() {
        if batch.len() < 2 {
            break;
        }
        for n in model.norms.iter_mut() {
            n.momentum = 1.0 / (k + 1) as f64;
        }
        if let Err(e) = model.forward(&batch_tensor(data, batch), rng) {
            outcome = Err(e.into());
            break;
        }
    }
    for (n, m) in model.norms.iter_mut().zip(saved) {
        n.momentum = m;
    }
    outcome
}

/// Loads a manifest's splits, trains, and evaluates on the test split.
pub fn train(manifest_path: &Path, cfg: &TrainConfig, on_epoch: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let train_split = load_split(manifest_path, &manifest, Split::Train)?;
    let test_split = load_split(manifest_path, &manifest, Split::Test)?;
    let (model, loss_curve) = train_loaded(Architecture::ccnn(), &train_split, cfg, on_epoch)?;
    let mut report = evaluate(&model, &test_split)?;
    report.recipe = Some(manifest.recipe);
    report.environment = Some(manifest.environment);
    report.seed = cfg.seed;
    report.train_n = train_split.len();
    Ok(TrainOutcome { model, loss_curve, report, train_n: train_split.len() })
}

/// Seed for one grid cell or any other derived run.
pub(crate) fn sub_seed(seed: u64, tags: &[u64]) -> u64 {
    derive_seed(seed, tags)
}
