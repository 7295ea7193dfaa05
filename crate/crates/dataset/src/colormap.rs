/// Piecewise-linear RGB colormap over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Colormap {
    anchors: Vec<(f64, [f64; 3])>,
}

impl Default for Colormap {
    /// Five-anchor viridis approximation.
    fn default() -> Self {
        Colormap::new(vec![
            (0.0, [68.0, 1.0, 84.0]),
            (0.25, [59.0, 82.0, 139.0]),
            (0.5, [33.0, 145.0, 140.0]),
            (0.75, [94.0, 201.0, 98.0]),
            (1.0, [253.0, 231.0, 37.0]),
        ])
        .expect("valid anchors")
    }
}

impl Colormap {
    /// Anchors need strictly increasing positions and channels in `[0, 255]`.
    pub fn new(anchors: Vec<(f64, [f64; 3])>) -> Option<Self> {
        if anchors.len() < 2 {
            return None;
        }
        let increasing = anchors.windows(2).all(|w| w[0].0 < w[1].0);
        let in_range = anchors.iter().all(|(_, c)| c.iter().all(|v| (0.0..=255.0).contains(v)));
        (increasing && in_range).then_some(Colormap { anchors })
    }

    pub fn map(&self, v: f64) -> [u8; 3] {
        let first = self.anchors[0];
        let last = self.anchors[self.anchors.len() - 1];
        let v = if v.is_nan() { first.0 } else { v.clamp(first.0, last.0) };
        let i = self.anchors.windows(2).position(|w| v <= w[1].0).unwrap_or(self.anchors.len() - 2);
        let (p0, c0) = self.anchors[i];
        let (p1, c1) = self.anchors[i + 1];
        let t = (v - p0) / (p1 - p0);
        std::array::from_fn(|k| (c0[k] + t * (c1[k] - c0[k])).round() as u8)
    }

    pub fn low(&self) -> [u8; 3] {
        self.map(self.anchors[0].0)
    }
}
