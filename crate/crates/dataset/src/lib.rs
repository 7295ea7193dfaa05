//! CIR → spectrogram images, image augmentation and noise, and the four
//! dataset recipes (measured, synthetic, mixed-measured, mixed-synthetic).

mod augment;
mod colormap;
mod error;
mod image;
mod noise;
mod recipe;
mod stft;

pub use augment::{augment, random_ops, rgb_to_hsv, hsv_to_rgb, AugmentOp};
pub use colormap::Colormap;
pub use error::{DatasetError, Result};
pub use image::{ImageMeta, SpectrogramImage, IMAGE_SIZE};
pub use noise::{add_noise, add_noise_sigma, NoiseLevel};
pub use recipe::{
    build_recipe, cell_spectrogram, check_leakage, measured_angle_indices, DatasetManifest, ManifestEntry, Provenance,
    Recipe, Split, MANIFEST_FILE, TEST_FRACTION,
};
pub use stft::{cir_to_spectrogram, StftParams};
