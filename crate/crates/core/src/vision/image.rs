use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use super::VisionError;

/// 8-bit raster, either RGB triples or one grey channel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterImage {
    Rgb { width: usize, height: usize, data: Vec<u8> },
    Gray { width: usize, height: usize, data: Vec<u8> },
}

impl RasterImage {
    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if width * height == 0 || data.len() != width * height * 3 {
            return Err(VisionError::Image(format!(
                "{width}x{height} rgb image needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self::Rgb { width, height, data })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if width * height == 0 || data.len() != width * height {
            return Err(VisionError::Image(format!(
                "{width}x{height} grey image needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self::Gray { width, height, data })
    }

    /// Uniformly coloured RGB image.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::Rgb { width, height, data }
    }

    pub fn width(&self) -> usize {
        match self {
            Self::Rgb { width, .. } | Self::Gray { width, .. } => *width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Self::Rgb { height, .. } | Self::Gray { height, .. } => *height,
        }
    }

    pub fn is_gray(&self) -> bool {
        matches!(self, Self::Gray { .. })
    }

    /// Colour of pixel `(x, y)`; grey pixels are replicated.
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        match self {
            Self::Rgb { width, data, .. } => {
                let i = 3 * (y * width + x);
                [data[i], data[i + 1], data[i + 2]]
            }
            Self::Gray { width, data, .. } => {
                let v = data[y * width + x];
                [v, v, v]
            }
        }
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        match self {
            Self::Rgb { width, data, .. } => {
                let i = 3 * (y * *width + x);
                data[i..i + 3].copy_from_slice(&rgb);
            }
            Self::Gray { width, data, .. } => {
                let lum = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
                data[y * *width + x] = lum.round() as u8;
            }
        }
    }

    /// Reads PPM, PGM or PNG.
    pub fn load(path: &Path) -> Result<Self, VisionError> {
        let img = image::open(path).map_err(|e| VisionError::Image(format!("{}: {e}", path.display())))?;
        Ok(match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self::Gray { width: w as usize, height: h as usize, data: g.into_raw() }
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Self::Rgb { width: w as usize, height: h as usize, data: rgb.into_raw() }
            }
        })
    }

    /// Writes in the format implied by the extension (`.ppm`, `.pgm`, `.png`).
    pub fn save(&self, path: &Path) -> Result<(), VisionError> {
        let err = |e: image::ImageError| VisionError::Image(format!("{}: {e}", path.display()));
        let (w, h) = (self.width() as u32, self.height() as u32);
        match self {
            Self::Rgb { data, .. } => RgbImage::from_raw(w, h, data.clone())
                .expect("buffer size checked")
                .save(path)
                .map_err(err),
            Self::Gray { data, .. } => GrayImage::from_raw(w, h, data.clone())
                .expect("buffer size checked")
                .save(path)
                .map_err(err),
        }
    }
}

/// Boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-bounds reads are background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn and(&self, other: &Self) -> Self {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Self { width: self.width, height: self.height, data }
    }
}
