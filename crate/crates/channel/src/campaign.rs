use std::fs;
use std::path::Path;

use ris_sense_core::rng::derive_seed;
use ris_sense_core::{ClassLabel, Rng};
use serde::{Deserialize, Serialize};

use crate::error::{ChannelError, Result};
use crate::io::{read_sweep, sweep_csv, write_sweep};
use crate::model::{synthesize_sweep, ChannelSweep, EnvironmentProfile, Scenario, SweepConfig};

/// Sub-seed of one cell: `derive_seed(seed, [scenario_index, angle_index])`.
pub fn cell_seed(seed: u64, scenario_index: usize, angle_index: usize) -> u64 {
    derive_seed(seed, &[scenario_index as u64, angle_index as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub profile: EnvironmentProfile,
    pub config: SweepConfig,
    pub seed: u64,
    /// Scenario-major, angle-minor.
    pub sweeps: Vec<ChannelSweep>,
}

#[derive(Serialize, Deserialize)]
struct Index {
    profile: EnvironmentProfile,
    config: SweepConfig,
    seed: u64,
    cells: Vec<String>,
}

const INDEX_FILE: &str = "campaign.json";

pub fn run_campaign(env: &EnvironmentProfile, cfg: &SweepConfig, seed: u64) -> Result<Campaign> {
    cfg.validate()?;
    let angles = cfg.angles();
    let mut sweeps = Vec::with_capacity(3 * angles.len());
    for (si, kind) in ClassLabel::ALL.into_iter().enumerate() {
        let scn = Scenario::new(kind);
        for (ai, &angle) in angles.iter().enumerate() {
            let mut rng = Rng::new(cell_seed(seed, si, ai));
            sweeps.push(synthesize_sweep(env, &scn, angle, cfg, &mut rng)?);
        }
    }
    Ok(Campaign { profile: env.clone(), config: cfg.clone(), seed, sweeps })
}

impl Campaign {
    pub fn angles_per_scenario(&self) -> usize {
        self.config.angle_count()
    }

    pub fn get(&self, scenario: ClassLabel, angle_index: usize) -> Option<&ChannelSweep> {
        let n = self.angles_per_scenario();
        if angle_index >= n {
            return None;
        }
        self.sweeps.get(scenario.index() * n + angle_index)
    }

    pub fn cell_file_name(&self, index: usize) -> String {
        let s = &self.sweeps[index];
        format!(
            "{}_{}_{:03}.cir",
            self.profile.name,
            s.meta.scenario.slug(),
            index % self.angles_per_scenario()
        )
    }

    /// Writes `campaign.json` plus one `.cir` file per cell, and a `.csv`
    /// twin of each cell when `csv` is set.
    pub fn save(&self, dir: &Path, csv: bool) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| ChannelError::io(dir, e))?;
        let mut cells = Vec::with_capacity(self.sweeps.len());
        for (i, sweep) in self.sweeps.iter().enumerate() {
            let name = self.cell_file_name(i);
            write_sweep(&dir.join(&name), sweep)?;
            if csv {
                let p = dir.join(name.replace(".cir", ".csv"));
                fs::write(&p, sweep_csv(sweep)).map_err(|e| ChannelError::io(&p, e))?;
            }
            cells.push(name);
        }
        let index = Index { profile: self.profile.clone(), config: self.config.clone(), seed: self.seed, cells };
        let p = dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        fs::write(&p, text).map_err(|e| ChannelError::io(&p, e))
    }

    pub fn load(dir: &Path) -> Result<Campaign> {
        let p = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&p).map_err(|e| ChannelError::io(&p, e))?;
        let index: Index = serde_json::from_str(&text).map_err(|e| ChannelError::format(&p, e.to_string()))?;
        index.config.validate()?;
        if index.cells.len() != 3 * index.config.angle_count() {
            return Err(ChannelError::format(&p, "cell count does not match the angle grid"));
        }
        let sweeps = index.cells.iter().map(|c| read_sweep(&dir.join(c))).collect::<Result<Vec<_>>>()?;
        Ok(Campaign { profile: index.profile, config: index.config, seed: index.seed, sweeps })
    }
}
