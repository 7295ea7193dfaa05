use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use ris_sense_channel::{sweep_to_cir, Campaign, EnvironmentKind, Window};
use ris_sense_core::rng::derive_seed;
use ris_sense_core::{ClassLabel, Rng};
use serde::{Deserialize, Serialize};

use crate::augment::{augment, random_ops, AugmentOp};
use crate::error::{DatasetError, Result};
use crate::image::{ImageMeta, SpectrogramImage};
use crate::noise::{add_noise, NoiseLevel};
use crate::stft::{cir_to_spectrogram, StftParams};

pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Measured,
    Synthetic,
    MixedMeasured,
    MixedSynthetic,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::Measured, Recipe::Synthetic, Recipe::MixedMeasured, Recipe::MixedSynthetic];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Measured => "measured",
            Recipe::Synthetic => "synthetic",
            Recipe::MixedMeasured => "mixed_measured",
            Recipe::MixedSynthetic => "mixed_synthetic",
        }
    }

    pub fn set_size(self) -> usize {
        match self {
            Recipe::Measured => 72,
            Recipe::Synthetic => 720,
            Recipe::MixedMeasured => 144,
            Recipe::MixedSynthetic => 725,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| DatasetError::Unknown { kind: "recipe", name: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    Augmented,
    NoisyAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

mod label_index {
    use ris_sense_core::ClassLabel;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(l: &ClassLabel, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(l.index() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ClassLabel, D::Error> {
        let i = u64::deserialize(d)?;
        ClassLabel::from_index(i as usize).ok_or_else(|| D::Error::custom(format!("label {i} out of range")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest file.
    pub path: String,
    #[serde(with = "label_index")]
    pub label: ClassLabel,
    pub provenance: Provenance,
    pub split: Split,
    pub source_angle_deg: f64,
    /// Campaign cell the image derives from, `<class>@<angle index>`.
    pub source: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops: Vec<AugmentOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub recipe: Recipe,
    pub environment: EnvironmentKind,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.label.index()] += 1;
        }
        c
    }

    pub fn provenance_count(&self, p: Provenance) -> usize {
        self.entries.iter().filter(|e| e.provenance == p).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| DatasetError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| DatasetError::Manifest { path: path.display().to_string(), reason: e.to_string() })
    }

    /// Absolute location of an entry's image given the manifest path.
    pub fn resolve(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
        manifest_path.parent().unwrap_or(Path::new(".")).join(&entry.path)
    }
}

/// Fails with the offending source when one campaign cell feeds both splits.
pub fn check_leakage(manifest: &DatasetManifest) -> std::result::Result<(), String> {
    let mut seen: HashMap<&str, Split> = HashMap::new();
    for e in &manifest.entries {
        if let Some(&s) = seen.get(e.source.as_str()) {
            if s != e.split {
                return Err(e.source.clone());
            }
        }
        seen.insert(&e.source, e.split);
    }
    Ok(())
}

/// `count` angle indices spread evenly over `n_angles`.
pub fn measured_angle_indices(n_angles: usize, count: usize) -> Result<Vec<usize>> {
    if count > n_angles {
        return Err(DatasetError::Capacity(format!("{count} angles requested, campaign has {n_angles}")));
    }
    Ok((0..count).map(|i| i * n_angles / count).collect())
}

fn test_count(n: usize) -> usize {
    (n as f64 * TEST_FRACTION).round() as usize
}

#[derive(Debug, Clone)]
struct Plan {
    label: ClassLabel,
    angle_index: usize,
    split: Split,
    provenance: Provenance,
    noise: Option<NoiseLevel>,
}

const SPLIT_TAG: u64 = 0x5_0117;
const ENTRY_TAG: u64 = 0xE_0001;

/// Per class: shuffled source pool, first `test_count` sources go to test.
fn split_sources(pool: &[usize], seed: u64, recipe: Recipe, label: ClassLabel) -> (Vec<usize>, Vec<usize>) {
    let mut order = pool.to_vec();
    Rng::derived(seed, &[SPLIT_TAG, recipe.index() as u64, label.index() as u64]).shuffle(&mut order);
    let k = test_count(order.len());
    let test = order[..k].to_vec();
    let train = order[k..].to_vec();
    (train, test)
}

fn variants(
    plans: &mut Vec<Plan>,
    label: ClassLabel,
    sources: &[usize],
    n: usize,
    split: Split,
    provenance: Provenance,
    noise: Option<NoiseLevel>,
) {
    for i in 0..n {
        plans.push(Plan { label, angle_index: sources[i % sources.len()], split, provenance, noise });
    }
}

fn plan_recipe(recipe: Recipe, n_angles: usize, seed: u64) -> Result<Vec<Plan>> {
    let mut plans = Vec::new();
    for label in ClassLabel::ALL {
        let c = label.index();
        let measured = |plans: &mut Vec<Plan>, pool_size: usize| -> Result<(Vec<usize>, Vec<usize>)> {
            let pool = measured_angle_indices(n_angles, pool_size)?;
            let (train, test) = split_sources(&pool, seed, recipe, label);
            for &a in &pool {
                let split = if test.contains(&a) { Split::Test } else { Split::Train };
                plans.push(Plan { label, angle_index: a, split, provenance: Provenance::Measured, noise: None });
            }
            Ok((train, test))
        };
        match recipe {
            Recipe::Measured => {
                measured(&mut plans, 24)?;
            }
            Recipe::Synthetic => {
                // one seed image per class and split
                let pool = measured_angle_indices(n_angles, 24)?;
                let (train, test) = split_sources(&pool, seed, recipe, label);
                let k = test_count(240);
                variants(&mut plans, label, &test[..1], k, Split::Test, Provenance::Augmented, None);
                variants(&mut plans, label, &train[..1], 240 - k, Split::Train, Provenance::Augmented, None);
            }
            Recipe::MixedMeasured => {
                let (train, test) = measured(&mut plans, 32)?;
                let k = test_count(16);
                let noisy = Provenance::NoisyAugmented;
                variants(&mut plans, label, &test, k, Split::Test, noisy, Some(NoiseLevel::Slight));
                variants(&mut plans, label, &train, 16 - k, Split::Train, noisy, Some(NoiseLevel::Slight));
            }
            Recipe::MixedSynthetic => {
                let (train, test) = measured(&mut plans, 24)?;
                let n = 653 / 3 + usize::from(c < 653 % 3);
                let k = test_count(n);
                let noisy = Provenance::NoisyAugmented;
                variants(&mut plans, label, &test, k, Split::Test, noisy, Some(NoiseLevel::Heavy));
                variants(&mut plans, label, &train, n - k, Split::Train, noisy, Some(NoiseLevel::Heavy));
            }
        }
    }
    Ok(plans)
}

fn source_id(label: ClassLabel, angle_index: usize) -> String {
    format!("{}@{angle_index}", label.slug())
}

/// Delay span kept before the STFT. It covers the longest room tail (5 × 40 ns)
/// with margin; later taps hold only receiver noise.
pub const DELAY_GATE_S: f64 = 320e-9;

/// Renders one campaign cell as a spectrogram: Hann-windowed CIR, gated to
/// [`DELAY_GATE_S`], default STFT.
pub fn cell_spectrogram(campaign: &Campaign, label: ClassLabel, angle_index: usize) -> Result<SpectrogramImage> {
    let sweep = campaign
        .get(label, angle_index)
        .ok_or_else(|| DatasetError::Capacity(format!("no campaign cell {}", source_id(label, angle_index))))?;
    let cir = sweep_to_cir(sweep, Window::Hann)?;
    let stft = StftParams::default();
    let gate = ((DELAY_GATE_S / cir.bin_s).ceil() as usize).clamp(stft.window_len, cir.taps.len());
    cir_to_spectrogram(&cir.taps[..gate], &stft)
}

/// Builds one recipe from a campaign, writing `manifest.json` and PNGs under
/// `out_dir/images/`. Splits are drawn per source cell before augmentation.
pub fn build_recipe(recipe: Recipe, campaign: &Campaign, out_dir: &Path, seed: u64) -> Result<DatasetManifest> {
    let n_angles = campaign.angles_per_scenario();
    let plans = plan_recipe(recipe, n_angles, seed)?;
    let env = campaign.profile.name;

    let mut needed: Vec<(ClassLabel, usize)> = plans.iter().map(|p| (p.label, p.angle_index)).collect();
    needed.sort();
    needed.dedup();
    let sources: BTreeMap<(ClassLabel, usize), SpectrogramImage> = needed
        .par_iter()
        .map(|&(l, a)| cell_spectrogram(campaign, l, a).map(|img| ((l, a), img)))
        .collect::<Result<_>>()?;

    let images = out_dir.join("images");
    fs::create_dir_all(&images).map_err(|e| DatasetError::io(&images, e))?;
    let angle_step = campaign.config.angle_step_deg;
    let entries = plans
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<ManifestEntry> {
            let entry_seed = derive_seed(seed, &[ENTRY_TAG, recipe.index() as u64, i as u64]);
            let mut rng = Rng::new(entry_seed);
            let source_angle_deg = p.angle_index as f64 * angle_step;
            let mut img = sources[&(p.label, p.angle_index)].clone();
            img.meta = Some(ImageMeta {
                label: p.label,
                environment: env,
                provenance: p.provenance,
                source_angle_deg,
                seed: entry_seed,
            });
            let ops = if p.provenance == Provenance::Measured { Vec::new() } else { random_ops(&mut rng) };
            img = augment(&img, &ops)?;
            if let Some(level) = p.noise {
                img = add_noise(&img, level, &mut rng);
            }
            let rel = format!("images/{}_{}_{:04}_{}.png", recipe.name(), env, i, p.label.slug());
            img.write_png(&out_dir.join(&rel))?;
            Ok(ManifestEntry {
                path: rel,
                label: p.label,
                provenance: p.provenance,
                split: p.split,
                source_angle_deg,
                source: source_id(p.label, p.angle_index),
                seed: entry_seed,
                ops,
                noise: p.noise,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest { recipe, environment: env, seed, entries };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
