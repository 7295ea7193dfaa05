use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ris_sense_channel::{run_campaign, EnvironmentKind, EnvironmentProfile, SweepConfig};
use ris_sense_core::checkpoint::save_checkpoint;
use ris_sense_dataset::{build_recipe, Recipe, MANIFEST_FILE};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{HarnessError, Result};
use crate::report::EvalReport;
use crate::train::{sub_seed, train, TrainConfig, DEFAULT_SEED};

pub const GRID_CSV: &str = "grid.csv";
pub const GRID_JSON: &str = "grid.json";
pub const GRID_SVG: &str = "grid.svg";

const CAMPAIGN_TAG: u64 = 10;
const DATASET_TAG: u64 = 20;
const TRAIN_TAG: u64 = 30;

/// Reference cCNN and VGG-16 accuracies for each cell, shown next to ours
/// for comparison only.
pub fn reference_accuracy(env: EnvironmentKind, recipe: Recipe) -> (&'static str, &'static str) {
    use EnvironmentKind::*;
    use Recipe::*;
    match (recipe, env) {
        (Measured, Meeting) => ("95.0%", "71.0%"),
        (Measured, Hflab) => ("86.0%", "29.0%"),
        (Measured, Chamber) => ("99.9%", "64.0%"),
        (Synthetic, Meeting) => ("93.0%", "50.0%"),
        (Synthetic, Hflab) => ("92.0%", "38.0%"),
        (Synthetic, Chamber) => ("94.0%", "51.2%"),
        (MixedMeasured, Meeting) => ("94.0%", "86.0%"),
        (MixedMeasured, Hflab) => ("93.0%", "75.0%"),
        (MixedMeasured, Chamber) => ("94.0%", "86.0%"),
        (MixedSynthetic, Meeting) => ("88.0%", "88.0%"),
        (MixedSynthetic, Hflab) => ("86.0%", "85.5%"),
        (MixedSynthetic, Chamber) => ("88.0%", "88.0%"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub seed: u64,
    pub environments: Vec<EnvironmentKind>,
    pub recipes: Vec<Recipe>,
    /// The seed field is replaced by a per-cell derived seed.
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    /// Wall-clock times make reports run-dependent, so they are opt-in.
    pub record_runtime: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            seed: DEFAULT_SEED,
            environments: EnvironmentKind::ALL.to_vec(),
            recipes: Recipe::ALL.to_vec(),
            train: TrainConfig::default(),
            sweep: SweepConfig::default(),
            record_runtime: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub environment: EnvironmentKind,
    pub recipe: Recipe,
    pub set_size: usize,
    pub seed: u64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    pub loss_curve: Vec<f64>,
    pub runtime_s: Option<f64>,
}

#[derive(Debug)]
pub enum GridProgress<'a> {
    CellStart { environment: EnvironmentKind, recipe: Recipe },
    Epoch { environment: EnvironmentKind, recipe: Recipe, epoch: usize, loss: f64 },
    CellDone(&'a CellOutcome),
}

fn run_cell(
    cfg: &GridConfig,
    out_dir: &Path,
    env: EnvironmentKind,
    recipe: Recipe,
    train_seed: u64,
    on_epoch: impl FnMut(usize, f64),
) -> Result<(EvalReport, Vec<f64>)> {
    let campaign_dir = out_dir.join("campaigns").join(env.name());
    let campaign = match ris_sense_channel::Campaign::load(&campaign_dir) {
        Ok(c) if c.config == cfg.sweep && c.seed == sub_seed(cfg.seed, &[CAMPAIGN_TAG, env.index() as u64]) => c,
        _ => {
            let c = run_campaign(
                &EnvironmentProfile::for_kind(env),
                &cfg.sweep,
                sub_seed(cfg.seed, &[CAMPAIGN_TAG, env.index() as u64]),
            )?;
            c.save(&campaign_dir, false)?;
            c
        }
    };
    let data_dir = out_dir.join("datasets").join(env.name()).join(recipe.name());
    let data_seed = sub_seed(cfg.seed, &[DATASET_TAG, env.index() as u64, recipe.index() as u64]);
    build_recipe(recipe, &campaign, &data_dir, data_seed)?;
    let tcfg = TrainConfig { seed: train_seed, ..cfg.train.clone() };
    let outcome = train(&data_dir.join(MANIFEST_FILE), &tcfg, on_epoch)?;
    let models = out_dir.join("models");
    fs::create_dir_all(&models).map_err(|e| HarnessError::io(&models, e))?;
    let meta = json!({
        "recipe": recipe.name(),
        "environment": env.name(),
        "epochs": tcfg.epochs,
        "batch_size": tcfg.batch_size,
        "adam": tcfg.adam,
        "loss_curve": outcome.loss_curve,
    });
    save_checkpoint(&outcome.model, &models.join(format!("{env}_{recipe}.ccnn")), Some(train_seed), meta)?;
    Ok((outcome.report, outcome.loss_curve))
}

/// Trains and evaluates every (recipe, environment) cell, recipe-major. A
/// failing cell is recorded and the grid moves on. Writes `grid.csv`,
/// `grid.json` and `grid.svg` into `out_dir`.
pub fn run_grid(cfg: &GridConfig, out_dir: &Path, mut progress: impl FnMut(GridProgress)) -> Result<Vec<CellOutcome>> {
    cfg.train.validate()?;
    cfg.sweep.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut cells = Vec::new();
    for &recipe in &cfg.recipes {
        for &env in &cfg.environments {
            progress(GridProgress::CellStart { environment: env, recipe });
            let seed = sub_seed(cfg.seed, &[TRAIN_TAG, env.index() as u64, recipe.index() as u64]);
            let start = Instant::now();
            let result = run_cell(cfg, out_dir, env, recipe, seed, |epoch, loss| {
                progress(GridProgress::Epoch { environment: env, recipe, epoch, loss })
            });
            let runtime_s = cfg.record_runtime.then(|| start.elapsed().as_secs_f64());
            let cell = match result {
                Ok((mut report, loss_curve)) => {
                    report.runtime_s = runtime_s;
                    CellOutcome {
                        environment: env,
                        recipe,
                        set_size: recipe.set_size(),
                        seed,
                        report: Some(report),
                        error: None,
                        loss_curve,
                        runtime_s,
                    }
                }
                Err(e) => CellOutcome {
                    environment: env,
                    recipe,
                    set_size: recipe.set_size(),
                    seed,
                    report: None,
                    error: Some(e.to_string()),
                    loss_curve: Vec::new(),
                    runtime_s,
                },
            };
            progress(GridProgress::CellDone(&cell));
            cells.push(cell);
        }
    }
    let write = |name: &str, text: String| {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))
    };
    write(GRID_CSV, render_csv(&cells))?;
    write(GRID_JSON, serde_json::to_string_pretty(&cells).expect("cells serialize"))?;
    write(GRID_SVG, render_svg(&cells))?;
    Ok(cells)
}

pub fn render_csv(cells: &[CellOutcome]) -> String {
    let mut s = String::from(
        "recipe,environment,set_size,train_n,test_n,accuracy,paper_reference_cnn,paper_reference_vgg16,runtime_s,seed\n",
    );
    for c in cells {
        let (cnn, vgg) = reference_accuracy(c.environment, c.recipe);
        let (train_n, test_n, acc) = match &c.report {
            Some(r) => (r.train_n.to_string(), r.test_n.to_string(), format!("{:.6}", r.accuracy)),
            None => (String::new(), String::new(), "failed".to_string()),
        };
        let runtime = c.runtime_s.map(|t| format!("{t:.1}")).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{train_n},{test_n},{acc},{cnn},{vgg},{runtime},{}",
            c.recipe, c.environment, c.set_size, c.seed
        )
        .unwrap();
    }
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bar chart: one group per environment, one bar per recipe, with
/// the published cCNN value drawn as a dashed tick over each bar.
pub fn render_svg(cells: &[CellOutcome]) -> String {
    const COLORS: [&str; 4] = ["#3b528b", "#21918c", "#5ec962", "#fde725"];
    let (w, h) = (760.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let mut envs: Vec<EnvironmentKind> = Vec::new();
    let mut recipes: Vec<Recipe> = Vec::new();
    for c in cells {
        if !envs.contains(&c.environment) {
            envs.push(c.environment);
        }
        if !recipes.contains(&c.recipe) {
            recipes.push(c.recipe);
        }
    }
    let y_of = |acc: f64| top + plot_h * (1.0 - acc);
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">Test accuracy by environment and dataset recipe</text>"#, left + plot_w / 2.0).unwrap();
    for i in 0..=5 {
        let acc = i as f64 / 5.0;
        let y = y_of(acc);
        writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##, left + plot_w).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}%</text>"#, left - 6.0, y + 4.0, i * 20).unwrap();
    }
    let group_w = plot_w / envs.len().max(1) as f64;
    let bar_w = group_w * 0.8 / recipes.len().max(1) as f64;
    for (gi, env) in envs.iter().enumerate() {
        let gx = left + gi as f64 * group_w + group_w * 0.1;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, gx + group_w * 0.4, top + plot_h + 20.0, env).unwrap();
        for (ri, recipe) in recipes.iter().enumerate() {
            let Some(c) = cells.iter().find(|c| c.environment == *env && c.recipe == *recipe) else { continue };
            let x = gx + ri as f64 * bar_w;
            match &c.report {
                Some(r) => {
                    let y = y_of(r.accuracy);
                    writeln!(
                        s,
                        r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{} {}: {:.1}%</title></rect>"#,
                        bar_w - 2.0,
                        top + plot_h - y,
                        COLORS[ri % 4],
                        esc(env.name()),
                        esc(recipe.name()),
                        100.0 * r.accuracy
                    )
                    .unwrap();
                }
                None => {
                    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">failed</text>"#, x + bar_w / 2.0, top + plot_h - 4.0).unwrap();
                }
            }
            let (reference, _) = reference_accuracy(*env, *recipe);
            if let Ok(p) = reference.trim_end_matches('%').parse::<f64>() {
                let y = y_of(p / 100.0);
                writeln!(s, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-dasharray="3,2"/>"#, x + bar_w - 2.0).unwrap();
            }
        }
    }
    let lx = left + plot_w + 20.0;
    for (ri, recipe) in recipes.iter().enumerate() {
        let y = top + 10.0 + ri as f64 * 20.0;
        writeln!(s, r#"<rect x="{lx}" y="{y}" width="12" height="12" fill="{}"/>"#, COLORS[ri % 4]).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 18.0, y + 10.0, esc(recipe.name())).unwrap();
    }
    let y = top + 10.0 + recipes.len() as f64 * 20.0;
    writeln!(s, r#"<line x1="{lx}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="black" stroke-dasharray="3,2"/>"#, y + 6.0, lx + 12.0, y + 6.0).unwrap();
    writeln!(s, r#"<text x="{}" y="{}">reference</text>"#, lx + 18.0, y + 10.0).unwrap();
    s.push_str("</svg>\n");
    s
}
