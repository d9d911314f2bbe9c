//! Calibrated raster types and the operations the pipelines build on.
//!
//! Intensities are 8-bit. Pixel `(x, y)` lives at `y * width + x` and
//! covers the unit square `[x, x + 1] × [y, y + 1]`, with `y` growing
//! downwards.

mod filter;
mod label;
pub mod pnm;

pub use filter::{band_threshold, max_projection, median_filter, region_mode};
pub use label::{component_stats, label_components, ComponentLabeling, ComponentStats, Connectivity};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("calibration must be a positive finite number, got {0}")]
    BadCalibration(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image stack has no slices")]
    EmptyStack,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown component label {label} (labeling has {count} components)")]
    UnknownLabel { label: u32, count: u32 },
}

/// An 8-bit grayscale raster with optional physical calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
    /// Microns per pixel.
    calibration: Option<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            calibration: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn with_calibration(mut self, microns_per_pixel: f64) -> Result<Self, ImageError> {
        check_calibration(microns_per_pixel)?;
        self.calibration = Some(microns_per_pixel);
        Ok(self)
    }

    pub(crate) fn set_calibration(&mut self, calibration: Option<f64>) {
        self.calibration = calibration;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn calibration(&self) -> Option<f64> {
        self.calibration
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_dimensions(&self, other: &GrayImage) -> Result<(), ImageError> {
        if self.dimensions() != other.dimensions() {
            return Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

fn check_calibration(c: f64) -> Result<(), ImageError> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(ImageError::BadCalibration(c))
    }
}

/// A foreground/background mask. `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self, ImageError> {
        if mask.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                actual: mask.len(),
            });
        }
        Ok(Self { width, height, mask })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                mask.push(f(x, y));
            }
        }
        Self { width, height, mask }
    }

    /// Parses rows of `'0'`/`'1'` characters (also accepts `'.'`/`'#'`).
    pub fn from_rows(rows: &[&str]) -> Result<Self, ImageError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut mask = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return Err(ImageError::InvalidParameter(format!(
                    "ragged row {row:?}, expected width {width}"
                )));
            }
            for ch in row.chars() {
                match ch {
                    '1' | '#' => mask.push(true),
                    '0' | '.' => mask.push(false),
                    other => {
                        return Err(ImageError::InvalidParameter(format!(
                            "unexpected mask character {other:?}"
                        )))
                    }
                }
            }
        }
        Self::new(width, height, mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.mask[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    fn zip_with(&self, other: &BinaryImage, f: impl Fn(bool, bool) -> bool) -> Result<Self, ImageError> {
        if self.dimensions() != other.dimensions() {
            return Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            mask,
        })
    }

    pub fn and(&self, other: &BinaryImage) -> Result<Self, ImageError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryImage) -> Result<Self, ImageError> {
        self.zip_with(other, |a, b| a || b)
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.dimensions() == other.dimensions() && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    /// Renders the mask as 0/255 intensities.
    pub fn to_gray(&self) -> Result<GrayImage, ImageError> {
        let data = self.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::new(self.width, self.height, data)
    }

    /// Foreground as horizontal runs `(y, x_start, x_end_exclusive)` in raster order.
    pub fn runs(&self) -> Vec<(usize, usize, usize)> {
        let mut runs = Vec::new();
        for y in 0..self.height {
            let row = &self.mask[y * self.width..(y + 1) * self.width];
            let mut x = 0;
            while x < self.width {
                if row[x] {
                    let start = x;
                    while x < self.width && row[x] {
                        x += 1;
                    }
                    runs.push((y, start, x));
                } else {
                    x += 1;
                }
            }
        }
        runs
    }
}

/// An ordered z-stack of equally sized slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    slices: Vec<GrayImage>,
    /// Microns between consecutive slices.
    z_spacing: Option<f64>,
}

impl ImageStack {
    pub fn new(slices: Vec<GrayImage>) -> Result<Self, ImageError> {
        let first = slices.first().ok_or(ImageError::EmptyStack)?;
        for s in &slices[1..] {
            first.same_dimensions(s)?;
            if s.calibration() != first.calibration() {
                return Err(ImageError::InvalidParameter(
                    "stack slices carry different calibrations".into(),
                ));
            }
        }
        Ok(Self {
            slices,
            z_spacing: None,
        })
    }

    pub fn with_z_spacing(mut self, microns: f64) -> Result<Self, ImageError> {
        check_calibration(microns)?;
        self.z_spacing = Some(microns);
        Ok(self)
    }

    pub fn slices(&self) -> &[GrayImage] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn z_spacing(&self) -> Option<f64> {
        self.z_spacing
    }

    pub fn dimensions(&self) -> (usize, usize) {
        self.slices[0].dimensions()
    }

    pub fn calibration(&self) -> Option<f64> {
        self.slices[0].calibration()
    }
}
