use std::path::Path;

use ris_sense_channel::EnvironmentKind;
use ris_sense_core::CcnnModel;
use ris_sense_dataset::{DatasetManifest, Recipe, Split};
use serde::{Deserialize, Serialize};

use crate::data::{batch_tensor, load_split, LoadedSplit};
use crate::error::{HarnessError, Result};

const EVAL_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recipe: Option<Recipe>,
    pub environment: Option<EnvironmentKind>,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; 3]; 3],
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub train_n: usize,
    pub test_n: usize,
    pub runtime_s: Option<f64>,
    pub seed: u64,
}

impl EvalReport {
    /// Metrics from true and predicted class indices. Precision or recall of
    /// a class with no predictions or no samples is 0.
    pub fn from_predictions(labels: &[usize], predictions: &[usize]) -> Self {
        let mut confusion = [[0usize; 3]; 3];
        for (&t, &p) in labels.iter().zip(predictions) {
            confusion[t][p] += 1;
        }
        let total = labels.len();
        let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = std::array::from_fn(|k| ratio(confusion[k][k], (0..3).map(|t| confusion[t][k]).sum()));
        let recall = std::array::from_fn(|k| ratio(confusion[k][k], confusion[k].iter().sum()));
        EvalReport {
            recipe: None,
            environment: None,
            accuracy: ratio(correct, total),
            confusion,
            precision,
            recall,
            train_n: 0,
            test_n: total,
            runtime_s: None,
            seed: 0,
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode predictions over a loaded split; the model is only read.
pub fn evaluate(model: &CcnnModel, data: &LoadedSplit) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(HarnessError::EmptySplit("test"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut predictions = Vec::with_capacity(data.len());
    for batch in idx.chunks(EVAL_BATCH) {
        let probs = model.predict(&batch_tensor(data, batch))?;
        predictions.extend(probs.data().chunks(3).map(argmax));
    }
    Ok(EvalReport::from_predictions(&data.labels, &predictions))
}

/// Loads one split of a manifest and evaluates it.
pub fn evaluate_split(model: &CcnnModel, manifest_path: &Path, split: Split) -> Result<EvalReport> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let data = load_split(manifest_path, &manifest, split)?;
    let mut r = evaluate(model, &data)?;
    r.recipe = Some(manifest.recipe);
    r.environment = Some(manifest.environment);
    r.seed = manifest.seed;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let labels = [0, 1, 2, 2, 1, 0, 0];
        let r = EvalReport::from_predictions(&labels, &labels);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, [[3, 0, 0], [0, 2, 0], [0, 0, 2]]);
        assert_eq!(r.precision, [1.0; 3]);
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let labels = [0, 0, 1, 2, 2, 2];
        let preds = [1, 0, 1, 0, 2, 1];
        let r = EvalReport::from_predictions(&labels, &preds);
        let rows: Vec<usize> = r.confusion.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(rows, [2, 1, 3]);
        assert_eq!(r.accuracy, 3.0 / 6.0);
        assert_eq!(r.recall, [0.5, 1.0, 1.0 / 3.0]);
        assert_eq!(r.precision, [0.5, 1.0 / 3.0, 1.0]);
    }

    #[test]
    fn argmax_prefers_first_tie() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }
}
