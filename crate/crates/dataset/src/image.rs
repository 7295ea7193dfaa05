use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ris_sense_channel::EnvironmentKind;
use ris_sense_core::{ClassLabel, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{DatasetError, Result};
use crate::recipe::Provenance;

pub const IMAGE_SIZE: usize = 224;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub label: ClassLabel,
    pub environment: EnvironmentKind,
    pub provenance: Provenance,
    pub source_angle_deg: f64,
    pub seed: u64,
}

/// 224×224 RGB, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramImage {
    pub pixels: Vec<u8>,
    pub meta: Option<ImageMeta>,
}

impl SpectrogramImage {
    pub fn filled(rgb: [u8; 3]) -> Self {
        SpectrogramImage { pixels: rgb.repeat(IMAGE_SIZE * IMAGE_SIZE), meta: None }
    }

    pub fn from_pixels(pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == IMAGE_SIZE * IMAGE_SIZE * 3).then_some(SpectrogramImage { pixels, meta: None })
    }

    pub fn width(&self) -> usize {
        IMAGE_SIZE
    }

    pub fn height(&self) -> usize {
        IMAGE_SIZE
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * IMAGE_SIZE + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * IMAGE_SIZE + col);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// `[3, 224, 224]` with values in `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let plane = IMAGE_SIZE * IMAGE_SIZE;
        let mut data = vec![0.0; 3 * plane];
        for (p, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + p] = px[c] as f64 / 255.0;
            }
        }
        Tensor::from_vec(&[3, IMAGE_SIZE, IMAGE_SIZE], data).expect("fixed image shape")
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), IMAGE_SIZE as u32, IMAGE_SIZE as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let err = |e: png::EncodingError| DatasetError::Image { path: path.display().to_string(), reason: e.to_string() };
        let mut w = enc.write_header().map_err(err)?;
        w.write_image_data(&self.pixels).map_err(err)?;
        w.finish().map_err(err)
    }

    /// Accepts only 8-bit RGB PNGs of exactly 224×224.
    pub fn read_png(path: &Path) -> Result<Self> {
        let bad = |reason: String| DatasetError::Image { path: path.display().to_string(), reason };
        let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
        let mut reader = png::Decoder::new(file).read_info().map_err(|e| bad(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(bad(format!("expected 8-bit RGB, got {:?}/{:?}", info.color_type, info.bit_depth)));
        }
        if info.width as usize != IMAGE_SIZE || info.height as usize != IMAGE_SIZE {
            return Err(bad(format!("expected {IMAGE_SIZE}x{IMAGE_SIZE}, got {}x{}", info.width, info.height)));
        }
        buf.truncate(info.buffer_size());
        Ok(SpectrogramImage { pixels: buf, meta: None })
    }
}

/// Bilinear resampling of a `rows × cols` grid to `out_rows × out_cols`
/// using pixel-centre alignment and edge clamping.
pub(crate) fn resize_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let axis = |i: usize, n_in: usize, n_out: usize| {
        let x = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = x.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, x - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        let (r0, r1, tr) = axis(r, rows, out_rows);
        for c in 0..out_cols {
            let (c0, c1, tc) = axis(c, cols, out_cols);
            let top = src[r0 * cols + c0] * (1.0 - tc) + src[r0 * cols + c1] * tc;
            let bottom = src[r1 * cols + c0] * (1.0 - tc) + src[r1 * cols + c1] * tc;
            out.push(top * (1.0 - tr) + bottom * tr);
        }
    }
    out
}
