use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ChannelError, Result};
use crate::model::ChannelSweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
}

impl Window {
    /// Symmetric window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

impl FromStr for Window {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" => Ok(Window::Rect),
            "hann" => Ok(Window::Hann),
            _ => Err(ChannelError::Unknown { kind: "window", name: s.to_string() }),
        }
    }
}

/// Delay-domain response; tap `n` sits at delay `n * bin_s` (circularly).
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub taps: Vec<Complex64>,
    pub bin_s: f64,
}

impl Cir {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.taps.iter().enumerate() {
            if c.norm_sqr() > self.taps[best].norm_sqr() {
                best = i;
            }
        }
        best
    }
}

/// `cir[n] = (1/N) sum_k w_k h_k exp(+j 2 pi k n / N)`.
pub fn sweep_to_cir(sweep: &ChannelSweep, window: Window) -> Result<Cir> {
    let n = sweep.h.len();
    if n < 16 || sweep.frequencies.len() != n {
        return Err(ChannelError::Config(format!("sweep needs at least 16 matched points, got {n}")));
    }
    let w = window.coefficients(n);
    let mut buf: Vec<Complex64> = sweep.h.iter().zip(&w).map(|(h, w)| h * w).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    let df = (sweep.frequencies[n - 1] - sweep.frequencies[0]) / (n - 1) as f64;
    Ok(Cir { taps: buf, bin_s: 1.0 / (n as f64 * df) })
}
