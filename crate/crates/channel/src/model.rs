use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use ris_sense_core::{ClassLabel, Rng};
use serde::{Deserialize, Serialize};

use crate::error::{ChannelError, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    Chamber,
    Meeting,
    Hflab,
}

impl EnvironmentKind {
    pub const ALL: [EnvironmentKind; 3] = [EnvironmentKind::Chamber, EnvironmentKind::Meeting, EnvironmentKind::Hflab];

    pub fn name(self) -> &'static str {
        match self {
            EnvironmentKind::Chamber => "chamber",
            EnvironmentKind::Meeting => "meeting",
            EnvironmentKind::Hflab => "hflab",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvironmentKind {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self> {
        EnvironmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ChannelError::Unknown { kind: "environment", name: s.to_string() })
    }
}

/// Room-dependent multipath. Clutter geometry is drawn once from `room_seed`
/// so that every scenario and turntable angle sees the same room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentProfile {
    pub name: EnvironmentKind,
    pub clutter_path_count: usize,
    /// Range of clutter path gains in dB relative to the unblocked direct path.
    pub clutter_gain_db: (f64, f64),
    pub reverberation_decay_ns: f64,
    pub room_seed: u64,
}

impl EnvironmentProfile {
    pub fn chamber() -> Self {
        EnvironmentProfile {
            name: EnvironmentKind::Chamber,
            clutter_path_count: 0,
            clutter_gain_db: (0.0, 0.0),
            reverberation_decay_ns: 0.0,
            room_seed: 0xC4A3_0001,
        }
    }

    pub fn meeting() -> Self {
        EnvironmentProfile {
            name: EnvironmentKind::Meeting,
            clutter_path_count: 6,
            clutter_gain_db: (-38.0, -26.0),
            reverberation_decay_ns: 10.0,
            room_seed: 0x3EE7_0002,
        }
    }

    pub fn hflab() -> Self {
        EnvironmentProfile {
            name: EnvironmentKind::Hflab,
            clutter_path_count: 24,
            clutter_gain_db: (-35.0, -23.0),
            reverberation_decay_ns: 40.0,
            room_seed: 0x4F1A_0003,
        }
    }

    pub fn for_kind(kind: EnvironmentKind) -> Self {
        match kind {
            EnvironmentKind::Chamber => Self::chamber(),
            EnvironmentKind::Meeting => Self::meeting(),
            EnvironmentKind::Hflab => Self::hflab(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ClassLabel,
    pub plate_side_m: f64,
    pub plate_thickness_mm: f64,
}

impl Scenario {
    pub const ALL: [ClassLabel; 3] = ClassLabel::ALL;

    pub fn new(kind: ClassLabel) -> Self {
        let plate_side_m = match kind {
            ClassLabel::Los => 0.0,
            ClassLabel::Nlos100 => 1.0,
            ClassLabel::Nlos75 => 0.75,
        };
        let plate_thickness_mm = if kind == ClassLabel::Los { 0.0 } else { 5.0 };
        Scenario { kind, plate_side_m, plate_thickness_mm }
    }
}

/// Direct-path attenuation of a square plate: 20 dB per square metre of plate.
pub fn blockage_loss_db(plate_side_m: f64) -> f64 {
    20.0 * plate_side_m * plate_side_m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
    pub tx_rx_distance_m: f64,
    pub angle_step_deg: f64,
    /// RIS path gain relative to the unblocked direct path.
    pub ris_gain_db: f64,
    /// RIS panel position relative to the transmitter, in metres along and
    /// across the Rx→Tx axis.
    pub ris_offset_m: (f64, f64),
    /// Full width of the raised-cosine main lobe.
    pub beamwidth_deg: f64,
    pub antenna_floor_db: f64,
    /// Receiver noise per frequency point, dB relative to the direct path.
    pub noise_db: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            f_start_hz: 4.8e9,
            f_stop_hz: 5.2e9,
            n_points: 401,
            tx_rx_distance_m: 0.431,
            angle_step_deg: 5.0,
            ris_gain_db: -21.0,
            ris_offset_m: (0.52, 0.12),
            beamwidth_deg: 60.0,
            antenna_floor_db: -10.0,
            noise_db: -80.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ChannelError::Config(m.to_string()));
        if !(self.f_start_hz > 0.0 && self.f_start_hz < self.f_stop_hz && self.f_stop_hz.is_finite()) {
            return bad("need 0 < f_start < f_stop");
        }
        if self.n_points < 16 {
            return bad("n_points must be at least 16");
        }
        if !(self.tx_rx_distance_m > 0.0) {
            return bad("tx_rx_distance_m must be positive");
        }
        if !(self.angle_step_deg > 0.0 && self.angle_step_deg <= 360.0) {
            return bad("angle_step_deg must be in (0, 360]");
        }
        let steps = 360.0 / self.angle_step_deg;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad("360 / angle_step_deg must be an integer");
        }
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg <= 360.0) {
            return bad("beamwidth_deg must be in (0, 360]");
        }
        if self.antenna_floor_db > 0.0 {
            return bad("antenna_floor_db must be <= 0");
        }
        for v in [self.ris_gain_db, self.noise_db, self.antenna_floor_db, self.ris_offset_m.0, self.ris_offset_m.1] {
            if !v.is_finite() {
                return bad("non-finite parameter");
            }
        }
        Ok(())
    }

    pub fn span_hz(&self) -> f64 {
        self.f_stop_hz - self.f_start_hz
    }

    /// Endpoint-inclusive grid from `f_start` to `f_stop`.
    pub fn frequencies(&self) -> Vec<f64> {
        let df = self.span_hz() / (self.n_points - 1) as f64;
        (0..self.n_points).map(|k| self.f_start_hz + k as f64 * df).collect()
    }

    pub fn angle_count(&self) -> usize {
        (360.0 / self.angle_step_deg).round() as usize
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.angle_count()).map(|i| i as f64 * self.angle_step_deg).collect()
    }

    pub fn direct_delay_s(&self) -> f64 {
        self.tx_rx_distance_m / SPEED_OF_LIGHT
    }

    /// Rx sits at the origin facing the Tx at `(d, 0)`.
    fn ris_position(&self) -> (f64, f64) {
        (self.tx_rx_distance_m + self.ris_offset_m.0, self.ris_offset_m.1)
    }

    pub fn ris_delay_s(&self) -> f64 {
        let (x, y) = self.ris_position();
        let leg1 = (x - self.tx_rx_distance_m).hypot(y);
        let leg2 = x.hypot(y);
        (leg1 + leg2) / SPEED_OF_LIGHT
    }

    pub fn ris_arrival_deg(&self) -> f64 {
        let (x, y) = self.ris_position();
        y.atan2(x).to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Direct,
    Ris,
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    pub delay_s: f64,
    /// Complex gain before the receive pattern.
    pub gain: Complex64,
    pub arrival_deg: f64,
}

/// Raised-cosine amplitude pattern of the receive horn, main lobe at 0°.
pub fn receive_gain(relative_deg: f64, cfg: &SweepConfig) -> f64 {
    let floor = 10f64.powf(cfg.antenna_floor_db / 20.0);
    let phi = (relative_deg + 180.0).rem_euclid(360.0) - 180.0;
    let half = cfg.beamwidth_deg;
    if phi.abs() >= half {
        floor
    } else {
        floor + (1.0 - floor) * 0.5 * (1.0 + (PI * phi / half).cos())
    }
}

/// Every propagation path of one scenario in one room.
pub fn channel_paths(env: &EnvironmentProfile, scn: &Scenario, cfg: &SweepConfig) -> Vec<Path> {
    let mut paths = Vec::with_capacity(2 + env.clutter_path_count);
    let tau_d = cfg.direct_delay_s();
    paths.push(Path {
        kind: PathKind::Direct,
        delay_s: tau_d,
        gain: Complex64::new(10f64.powf(-blockage_loss_db(scn.plate_side_m) / 20.0), 0.0),
        arrival_deg: 0.0,
    });
    paths.push(Path {
        kind: PathKind::Ris,
        delay_s: cfg.ris_delay_s(),
        gain: Complex64::new(10f64.powf(cfg.ris_gain_db / 20.0), 0.0),
        arrival_deg: cfg.ris_arrival_deg(),
    });
    let mut room = Rng::new(env.room_seed);
    let decay = env.reverberation_decay_ns * 1e-9;
    for _ in 0..env.clutter_path_count {
        let excess = room.uniform(0.0, 1.0).max(1e-3) * 5.0 * decay;
        let (lo, hi) = env.clutter_gain_db;
        let level_db = if hi > lo { room.uniform(lo, hi) } else { lo };
        let amplitude = 10f64.powf(level_db / 20.0) * (-excess / (2.0 * decay)).exp();
        let phase = room.uniform(0.0, 2.0 * PI);
        paths.push(Path {
            kind: PathKind::Clutter,
            delay_s: tau_d + excess,
            gain: Complex64::from_polar(amplitude, phase),
            arrival_deg: room.uniform(0.0, 360.0),
        });
    }
    paths
}

/// |h_direct| at a turntable angle; constant across frequency.
pub fn direct_path_amplitude(scn: &Scenario, angle_deg: f64, cfg: &SweepConfig) -> f64 {
    10f64.powf(-blockage_loss_db(scn.plate_side_m) / 20.0) * receive_gain(angle_deg, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub environment: EnvironmentKind,
    pub scenario: ClassLabel,
    pub angle_deg: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSweep {
    pub frequencies: Vec<f64>,
    pub h: Vec<Complex64>,
    pub meta: SweepMeta,
}

/// Noiseless sum of paths at the given turntable angle.
pub(crate) fn path_response(paths: &[Path], angle_deg: f64, freqs: &[f64], cfg: &SweepConfig) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); freqs.len()];
    for p in paths {
        let g = p.gain * receive_gain(angle_deg - p.arrival_deg, cfg);
        for (hk, &f) in h.iter_mut().zip(freqs) {
            *hk += g * Complex64::from_polar(1.0, -2.0 * PI * f * p.delay_s);
        }
    }
    h
}

/// One turntable cell. `rng` only drives receiver noise.
pub fn synthesize_sweep(
    env: &EnvironmentProfile,
    scn: &Scenario,
    angle_deg: f64,
    cfg: &SweepConfig,
    rng: &mut Rng,
) -> Result<ChannelSweep> {
    if !(0.0..360.0).contains(&angle_deg) {
        return Err(ChannelError::Angle(angle_deg));
    }
    cfg.validate()?;
    let freqs = cfg.frequencies();
    let mut h = path_response(&channel_paths(env, scn, cfg), angle_deg, &freqs, cfg);
    let sigma = 10f64.powf(cfg.noise_db / 20.0) / 2f64.sqrt();
    for hk in h.iter_mut() {
        *hk += Complex64::new(sigma * rng.normal(), sigma * rng.normal());
    }
    Ok(ChannelSweep {
        frequencies: freqs,
        h,
        meta: SweepMeta { environment: env.name, scenario: scn.kind, angle_deg, seed: rng.seed() },
    })
}
