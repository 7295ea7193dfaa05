//! Training and evaluation of the cCNN on spectrogram datasets, and the
//! environment × recipe experiment grid with CSV, JSON and SVG reports.

mod adam;
mod data;
mod error;
mod grid;
mod report;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{batch_tensor, load_split, LoadedSplit};
pub use error::{HarnessError, Result};
pub use grid::{
    reference_accuracy, render_csv, render_svg, run_grid, CellOutcome, GridConfig, GridProgress, GRID_CSV, GRID_JSON,
    GRID_SVG,
};
pub use report::{evaluate, evaluate_split, EvalReport};
pub use train::{initial_model, reestimate_batch_norm, train, train_loaded, TrainConfig, TrainOutcome, DEFAULT_SEED};
