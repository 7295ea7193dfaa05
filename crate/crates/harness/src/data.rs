use std::path::Path;

use rayon::prelude::*;
use ris_sense_core::Tensor;
use ris_sense_dataset::{DatasetManifest, SpectrogramImage, Split, IMAGE_SIZE};

use crate::error::{HarnessError, Result};

/// Decoded images of one split, kept as bytes until batching.
#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub images: Vec<SpectrogramImage>,
    pub labels: Vec<usize>,
}

impl LoadedSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn load_split(manifest_path: &Path, manifest: &DatasetManifest, split: Split) -> Result<LoadedSplit> {
    let entries: Vec<_> = manifest.split(split).collect();
    let images = entries
        .par_iter()
        .map(|e| {
            let p = DatasetManifest::resolve(manifest_path, e);
            SpectrogramImage::read_png(&p)
                .map_err(|err| HarnessError::Ingest { path: p.display().to_string(), reason: err.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedSplit { images, labels: entries.iter().map(|e| e.label.index()).collect() })
}

/// `[B, 3, 224, 224]` for the given sample indices.
pub fn batch_tensor(split: &LoadedSplit, indices: &[usize]) -> Tensor {
    let per = 3 * IMAGE_SIZE * IMAGE_SIZE;
    let mut data = Vec::with_capacity(indices.len() * per);
    for &i in indices {
        data.extend_from_slice(split.images[i].to_tensor().data());
    }
    Tensor::from_vec(&[indices.len(), 3, IMAGE_SIZE, IMAGE_SIZE], data).expect("batch shape")
}
