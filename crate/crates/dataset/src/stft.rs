use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::colormap::Colormap;
use crate::error::{DatasetError, Result};
use crate::image::{resize_bilinear, SpectrogramImage, IMAGE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftParams {
    pub window_len: usize,
    pub hop: usize,
    pub dynamic_range_db: f64,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams { window_len: 64, hop: 8, dynamic_range_db: 60.0 }
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect()
}

/// Magnitude STFT with frames centred at `m * hop` (zero padded at both
/// ends). Returns `(frames, bins, data)`, bins fft-shifted so that the
/// lowest frequency comes first.
pub(crate) fn stft_magnitude(cir: &[Complex64], p: &StftParams) -> (usize, usize, Vec<f64>) {
    let n = p.window_len;
    let w = hann(n);
    let frames = cir.len().div_ceil(p.hop);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut out = Vec::with_capacity(frames * n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..frames {
        let start = (m * p.hop) as isize - (n / 2) as isize;
        for (k, b) in buf.iter_mut().enumerate() {
            let t = start + k as isize;
            *b = if t >= 0 && (t as usize) < cir.len() { cir[t as usize] * w[k] } else { Complex64::new(0.0, 0.0) };
        }
        fft.process(&mut buf);
        out.extend((0..n).map(|k| buf[(k + n / 2) % n].norm()));
    }
    (frames, n, out)
}

/// Rows are time frames, columns frequency bins; magnitudes in dB are
/// clamped to the top `dynamic_range_db` below the peak, scaled to `[0, 1]`,
/// resized to 224×224 and coloured.
pub fn cir_to_spectrogram(cir: &[Complex64], p: &StftParams) -> Result<SpectrogramImage> {
    if p.window_len < 2 || p.hop == 0 || !(p.dynamic_range_db > 0.0) {
        return Err(DatasetError::Param(format!("bad STFT parameters {p:?}")));
    }
    if cir.len() < p.window_len {
        return Err(DatasetError::Length { len: cir.len(), window: p.window_len });
    }
    let (rows, cols, mag) = stft_magnitude(cir, p);
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    let norm: Vec<f64> = if peak > 0.0 {
        mag.iter()
            .map(|&m| {
                let db = 20.0 * (m / peak).log10();
                ((db + p.dynamic_range_db) / p.dynamic_range_db).clamp(0.0, 1.0)
            })
            .collect()
    } else {
        vec![0.0; mag.len()]
    };
    let resized = resize_bilinear(&norm, rows, cols, IMAGE_SIZE, IMAGE_SIZE);
    let cmap = Colormap::default();
    let pixels = resized.iter().flat_map(|&v| cmap.map(v)).collect();
    Ok(SpectrogramImage { pixels, meta: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_is_centred() {
        let cir = vec![Complex64::new(1.0, 0.0); 401];
        let (rows, cols, _) = stft_magnitude(&cir, &StftParams::default());
        assert_eq!((rows, cols), (51, 64));
    }

    #[test]
    fn short_cir_is_rejected() {
        let r = cir_to_spectrogram(&[Complex64::new(0.0, 0.0); 63], &StftParams::default());
        assert!(matches!(r, Err(DatasetError::Length { len: 63, window: 64 })));
    }

    #[test]
    fn zero_cir_is_uniform_low_colour() {
        let img = cir_to_spectrogram(&[Complex64::new(0.0, 0.0); 401], &StftParams::default()).unwrap();
        assert!(img.pixels.chunks(3).all(|p| p == [68, 1, 84]));
    }

    #[test]
    fn tone_peaks_at_its_bin() {
        // exp(+j 2 pi 8 t / 64) sits 8 bins above the centre column
        let cir: Vec<Complex64> =
            (0..256).map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 8.0 * t as f64 / 64.0)).collect();
        let (rows, cols, mag) = stft_magnitude(&cir, &StftParams::default());
        let mid = &mag[(rows / 2) * cols..(rows / 2 + 1) * cols];
        let best = (0..cols).max_by(|&a, &b| mid[a].total_cmp(&mid[b])).unwrap();
        assert_eq!(best, 32 + 8);
    }
}
