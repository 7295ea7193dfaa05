use ris_sense_core::Rng;
use serde::{Deserialize, Serialize};

use crate::image::SpectrogramImage;
use crate::recipe::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    Slight,
    Heavy,
}

impl NoiseLevel {
    /// Standard deviation as a fraction of full scale.
    pub fn sigma(self) -> f64 {
        match self {
            NoiseLevel::Slight => 5.0 / 255.0,
            NoiseLevel::Heavy => 25.0 / 255.0,
        }
    }
}

/// I.i.d. Gaussian noise on every channel value, `sigma` in full-scale units,
/// clamped to `[0, 255]`.
pub fn add_noise_sigma(img: &SpectrogramImage, sigma: f64, rng: &mut Rng) -> SpectrogramImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let pixels = img
        .pixels
        .iter()
        .map(|&p| (p as f64 + 255.0 * sigma * rng.normal()).round().clamp(0.0, 255.0) as u8)
        .collect();
    SpectrogramImage { pixels, meta: img.meta.clone() }
}

pub fn add_noise(img: &SpectrogramImage, level: NoiseLevel, rng: &mut Rng) -> SpectrogramImage {
    let mut out = add_noise_sigma(img, level.sigma(), rng);
    if let Some(m) = out.meta.as_mut() {
        m.provenance = Provenance::NoisyAugmented;
    }
    out
}
