use serde::{Deserialize, Serialize};

use super::{BinaryImage, RasterImage, VisionError};

/// Colour gate for the finger: an HSV box plus a luminance threshold.
///
/// Hue is in degrees; a `low` hue above the `high` hue wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub hsv_low: [f64; 3],
    pub hsv_high: [f64; 3],
    /// Pixels with luminance below this value are foreground candidates.
    pub gray_threshold: f64,
    /// Radius of an opening followed by a closing, 0 disables it.
    #[serde(default)]
    pub morph_radius: usize,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            hsv_low: [190.0, 0.3, 0.2],
            hsv_high: [250.0, 1.0, 1.0],
            gray_threshold: 200.0,
            morph_radius: 0,
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<(), VisionError> {
        let [hl, sl, vl] = self.hsv_low;
        let [hh, sh, vh] = self.hsv_high;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let deg = |v: f64| (0.0..=360.0).contains(&v);
        if !(deg(hl) && deg(hh)) {
            return Err(VisionError::MaskSpec(format!("hue bounds {hl}..{hh} outside [0, 360]")));
        }
        if !(unit(sl) && unit(sh) && unit(vl) && unit(vh)) {
            return Err(VisionError::MaskSpec("saturation and value bounds must lie in [0, 1]".into()));
        }
        if sl > sh || vl > vh {
            return Err(VisionError::MaskSpec("low bound above high bound".into()));
        }
        if !(0.0..=255.0).contains(&self.gray_threshold) {
            return Err(VisionError::MaskSpec(format!("grey threshold {}", self.gray_threshold)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, VisionError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| VisionError::MaskSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn contains(&self, hsv: [f64; 3]) -> bool {
        let [h, s, v] = hsv;
        let (hl, hh) = (self.hsv_low[0], self.hsv_high[0]);
        let hue_ok = if hl <= hh { h >= hl && h <= hh } else { h >= hl || h <= hh };
        hue_ok
            && s >= self.hsv_low[1]
            && s <= self.hsv_high[1]
            && v >= self.hsv_low[2]
            && v <= self.hsv_high[2]
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h, s, max]
}

fn luminance(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

/// Pixels darker than `threshold`.
pub fn to_grayscale_mask(img: &RasterImage, threshold: f64) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |x, y| luminance(img.pixel(x, y)) < threshold)
}

/// Pixels whose HSV colour lies inside the spec's box.
pub fn hsv_mask(img: &RasterImage, spec: &MaskSpec) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |x, y| spec.contains(rgb_to_hsv(img.pixel(x, y))))
}

/// Grey threshold AND colour box. Grey-only images carry no hue, so only
/// the threshold applies to them.
pub fn combined_mask(img: &RasterImage, spec: &MaskSpec) -> BinaryImage {
    let gray = to_grayscale_mask(img, spec.gray_threshold);
    if img.is_gray() {
        gray
    } else {
        gray.and(&hsv_mask(img, spec))
    }
}
