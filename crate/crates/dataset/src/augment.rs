use ris_sense_core::Rng;
use serde::{Deserialize, Serialize};

use crate::colormap::Colormap;
use crate::error::{DatasetError, Result};
use crate::image::{resize_bilinear, SpectrogramImage, IMAGE_SIZE};

/// Geometric and colour transforms. Colour ops act on HSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum AugmentOp {
    Hflip,
    Vflip,
    /// Degrees, `[-15, 15]`.
    Rotate(f64),
    /// Side of the cropped square relative to the image, `[0.8, 1.0]`.
    /// The crop is centred; see [`AugmentOp::ResizeCropAt`] for an offset.
    ResizeCrop(f64),
    /// Scale plus crop origin as a fraction of the free margin, each in `[0, 1]`.
    ResizeCropAt(f64, f64, f64),
    Saturation(f64),
    Brightness(f64),
    Contrast(f64),
    /// Degrees; checked modulo 360 against `[-18, 18]`.
    Hue(f64),
}

fn check(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(DatasetError::Param(format!("{name} {v} outside [{lo}, {hi}]")))
    }
}

impl AugmentOp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AugmentOp::Hflip | AugmentOp::Vflip => Ok(()),
            AugmentOp::Rotate(t) => check("rotation", t, -15.0, 15.0),
            AugmentOp::ResizeCrop(s) => check("crop scale", s, 0.8, 1.0),
            AugmentOp::ResizeCropAt(s, x, y) => {
                check("crop scale", s, 0.8, 1.0)?;
                check("crop x", x, 0.0, 1.0)?;
                check("crop y", y, 0.0, 1.0)
            }
            AugmentOp::Saturation(v) => check("saturation", v, 0.7, 1.3),
            AugmentOp::Brightness(v) => check("brightness", v, 0.7, 1.3),
            AugmentOp::Contrast(v) => check("contrast", v, 0.7, 1.3),
            AugmentOp::Hue(h) => {
                if !h.is_finite() {
                    return check("hue", h, -18.0, 18.0);
                }
                check("hue", (h + 180.0).rem_euclid(360.0) - 180.0, -18.0, 18.0)
            }
        }
    }
}

/// Standard hexcone conversion; `h` in degrees `[0, 360)`, `s`, `v` in `[0, 1]`.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / c + 2.0)
    } else {
        60.0 * ((r - g) / c + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { c / max };
    [h, s, max]
}

pub fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn map_hsv(img: &SpectrogramImage, f: impl Fn([f64; 3]) -> [f64; 3]) -> SpectrogramImage {
    let pixels = img
        .pixels
        .chunks_exact(3)
        .flat_map(|p| {
            let hsv = rgb_to_hsv([p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]);
            hsv_to_rgb(f(hsv)).map(to_byte)
        })
        .collect();
    SpectrogramImage { pixels, meta: img.meta.clone() }
}

fn flip(img: &SpectrogramImage, horizontal: bool) -> SpectrogramImage {
    let mut out = img.clone();
    for r in 0..IMAGE_SIZE {
        for c in 0..IMAGE_SIZE {
            let (sr, sc) = if horizontal { (r, IMAGE_SIZE - 1 - c) } else { (IMAGE_SIZE - 1 - r, c) };
            out.set_pixel(r, c, img.pixel(sr, sc));
        }
    }
    out
}

fn channel_planes(img: &SpectrogramImage) -> [Vec<f64>; 3] {
    std::array::from_fn(|k| img.pixels.iter().skip(k).step_by(3).map(|&v| v as f64).collect())
}

fn from_planes(planes: &[Vec<f64>; 3], img: &SpectrogramImage) -> SpectrogramImage {
    let mut pixels = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE * 3);
    for i in 0..IMAGE_SIZE * IMAGE_SIZE {
        for p in planes {
            pixels.push(p[i].round().clamp(0.0, 255.0) as u8);
        }
    }
    SpectrogramImage { pixels, meta: img.meta.clone() }
}

/// Rotation about the image centre with bilinear sampling; pixels whose
/// source falls outside the image take the colormap's low colour.
fn rotate(img: &SpectrogramImage, deg: f64) -> SpectrogramImage {
    let fill = Colormap::default().low();
    let planes = channel_planes(img);
    let (s, c) = deg.to_radians().sin_cos();
    let mid = (IMAGE_SIZE as f64 - 1.0) / 2.0;
    let last = (IMAGE_SIZE - 1) as f64;
    let mut out = img.clone();
    for r in 0..IMAGE_SIZE {
        for col in 0..IMAGE_SIZE {
            let (dx, dy) = (col as f64 - mid, r as f64 - mid);
            let x = c * dx + s * dy + mid;
            let y = -s * dx + c * dy + mid;
            if !(0.0..=last).contains(&x) || !(0.0..=last).contains(&y) {
                out.set_pixel(r, col, fill);
                continue;
            }
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(IMAGE_SIZE - 1), (y0 + 1).min(IMAGE_SIZE - 1));
            let (tx, ty) = (x - x0 as f64, y - y0 as f64);
            let rgb = std::array::from_fn(|k| {
                let p = &planes[k];
                let top = p[y0 * IMAGE_SIZE + x0] * (1.0 - tx) + p[y0 * IMAGE_SIZE + x1] * tx;
                let bot = p[y1 * IMAGE_SIZE + x0] * (1.0 - tx) + p[y1 * IMAGE_SIZE + x1] * tx;
                (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8
            });
            out.set_pixel(r, col, rgb);
        }
    }
    out
}

fn resize_crop(img: &SpectrogramImage, scale: f64, fx: f64, fy: f64) -> SpectrogramImage {
    let side = ((scale * IMAGE_SIZE as f64).round() as usize).clamp(1, IMAGE_SIZE);
    let margin = (IMAGE_SIZE - side) as f64;
    let (x0, y0) = ((fx * margin).round() as usize, (fy * margin).round() as usize);
    let planes = channel_planes(img).map(|p| {
        let crop: Vec<f64> =
            (y0..y0 + side).flat_map(|r| p[r * IMAGE_SIZE + x0..r * IMAGE_SIZE + x0 + side].to_vec()).collect();
        resize_bilinear(&crop, side, side, IMAGE_SIZE, IMAGE_SIZE)
    });
    from_planes(&planes, img)
}

fn apply(img: &SpectrogramImage, op: AugmentOp) -> SpectrogramImage {
    match op {
        AugmentOp::Hflip => flip(img, true),
        AugmentOp::Vflip => flip(img, false),
        AugmentOp::Rotate(t) => rotate(img, t),
        AugmentOp::ResizeCrop(s) => resize_crop(img, s, 0.5, 0.5),
        AugmentOp::ResizeCropAt(s, x, y) => resize_crop(img, s, x, y),
        AugmentOp::Saturation(f) => map_hsv(img, |[h, s, v]| [h, (s * f).min(1.0), v]),
        AugmentOp::Brightness(f) => map_hsv(img, |[h, s, v]| [h, s, (v * f).min(1.0)]),
        AugmentOp::Contrast(f) => {
            let mean_v = img
                .pixels
                .chunks_exact(3)
                .map(|p| p[0].max(p[1]).max(p[2]) as f64 / 255.0)
                .sum::<f64>()
                / (IMAGE_SIZE * IMAGE_SIZE) as f64;
            map_hsv(img, |[h, s, v]| [h, s, ((v - mean_v) * f + mean_v).clamp(0.0, 1.0)])
        }
        AugmentOp::Hue(d) => map_hsv(img, |[h, s, v]| [(h + d).rem_euclid(360.0), s, v]),
    }
}

/// Applies `ops` in order. Every parameter is validated before any work.
pub fn augment(img: &SpectrogramImage, ops: &[AugmentOp]) -> Result<SpectrogramImage> {
    for op in ops {
        op.validate()?;
    }
    Ok(ops.iter().fold(img.clone(), |acc, &op| apply(&acc, op)))
}

/// A random op list: each transform is included with probability 1/2 and
/// its parameter drawn uniformly from its allowed range.
pub fn random_ops(rng: &mut Rng) -> Vec<AugmentOp> {
    let mut ops = Vec::new();
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Hflip);
    }
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Vflip);
    }
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Rotate(rng.uniform(-15.0, 15.0)));
    }
    if rng.bernoulli(0.5) {
        let s = rng.uniform(0.8, 1.0);
        ops.push(AugmentOp::ResizeCropAt(s, rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)));
    }
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Saturation(rng.uniform(0.7, 1.3)));
    }
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Brightness(rng.uniform(0.7, 1.3)));
    }
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Contrast(rng.uniform(0.7, 1.3)));
    }
    if rng.bernoulli(0.5) {
        ops.push(AugmentOp::Hue(rng.uniform(-18.0, 18.0)));
    }
    ops
}
