//! Dense tensors, hand-written forward/backward layers, and the customized CNN
//! (cCNN) that classifies RIS channel spectrograms as LOS or one of two NLOS
//! blockage classes.
//!
//! All network math runs in `f64`; checkpoints store `f32`.

pub mod checkpoint;
pub mod diagnostics;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Architecture, CcnnModel, ClassLabel, ForwardCache, ParamGrads};
pub use rng::Rng;
pub use tensor::Tensor;

/// Whether layers run with batch statistics and dropout (`Train`) or as a
/// deterministic inference map (`Eval`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}
