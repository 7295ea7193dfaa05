//! Synthetic stand-in for a VNA turntable campaign: a transmitter, an RIS
//! panel and a receive horn on a turntable, with an optional metal plate
//! blocking the direct path.
//!
//! Each (environment, scenario, angle) cell is a complex frequency sweep
//! `h(f) = sum_k a_k G(angle - theta_k) exp(-j 2 pi f tau_k)` plus receiver
//! noise. [`sweep_to_cir`] turns a sweep into a delay-domain impulse response.

mod campaign;
mod cir;
mod error;
mod io;
mod model;

pub use campaign::{cell_seed, run_campaign, Campaign};
pub use cir::{sweep_to_cir, Cir, Window};
pub use error::{ChannelError, Result};
pub use io::{read_sweep, sweep_csv, write_sweep, CIR_MAGIC};
pub use model::{
    blockage_loss_db, channel_paths, direct_path_amplitude, receive_gain, synthesize_sweep, ChannelSweep,
    EnvironmentKind, EnvironmentProfile, Path, PathKind, Scenario, SweepConfig, SweepMeta, SPEED_OF_LIGHT,
};
