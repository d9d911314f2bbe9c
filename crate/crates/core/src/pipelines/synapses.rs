use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::image::{band_threshold, label_components, BinaryImage, Connectivity, GrayImage};

/// Closed intensity band `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntensityRange {
    pub lo: u8,
    pub hi: u8,
}

impl IntensityRange {
    pub fn new(lo: u8, hi: u8) -> Result<Self, PipelineError> {
        if lo > hi {
            return Err(PipelineError::InvalidRange(format!("{lo}:{hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub const FULL: IntensityRange = IntensityRange { lo: 0, hi: 255 };
}

impl fmt::Display for IntensityRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

/// Parses `lo:hi`.
impl FromStr for IntensityRange {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PipelineError::InvalidRange(s.to_string());
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        Self::new(lo, hi)
    }
}

fn default_band_width() -> f64 {
    4.0
}

/// Hand-traced dendrite: a polyline in pixel coordinates and the half-width
/// of the band around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiPolyline {
    pub vertices: Vec<[f64; 2]>,
    #[serde(default = "default_band_width", alias = "bandWidth")]
    pub band_width: f64,
}

impl RoiPolyline {
    pub fn new(vertices: Vec<[f64; 2]>, band_width: f64) -> Result<Self, PipelineError> {
        let roi = Self { vertices, band_width };
        roi.validate()?;
        Ok(roi)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let roi: Self =
            serde_json::from_str(text).map_err(|e| PipelineError::InvalidParameter(format!("ROI JSON: {e}")))?;
        roi.validate()?;
        Ok(roi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ROI serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.vertices.len() < 2 {
            return Err(PipelineError::TooFewVertices);
        }
        if self.vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PipelineError::InvalidParameter("ROI vertices must be finite".into()));
        }
        if !(self.band_width.is_finite() && self.band_width >= 1.0) {
            return Err(PipelineError::BandWidth(self.band_width));
        }
        Ok(())
    }

    /// Arc length in pixels.
    pub fn length_px(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|s| (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1]))
            .sum()
    }

    pub fn length_um(&self, microns_per_pixel: f64) -> f64 {
        self.length_px() * microns_per_pixel
    }

    /// Pixels whose centre `(x + ½, y + ½)` lies within `band_width` of the polyline.
    pub fn rasterize(&self, width: usize, height: usize) -> BinaryImage {
        let mut out = BinaryImage::empty(width, height);
        let r = self.band_width;
        for s in self.vertices.windows(2) {
            let ([ax, ay], [bx, by]) = (s[0], s[1]);
            let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64) as usize;
            let x0 = clamp(ax.min(bx) - r - 1.0, width);
            let x1 = clamp(ax.max(bx) + r + 1.0, width);
            let y0 = clamp(ay.min(by) - r - 1.0, height);
            let y1 = clamp(ay.max(by) + r + 1.0, height);
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            for y in y0..y1 {
                for x in x0..x1 {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    let t = if len2 > 0.0 {
                        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (qx, qy) = (ax + t * dx - px, ay + t * dy - py);
                    if qx * qx + qy * qy <= r * r {
                        out.set(x, y, true);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseReport {
    pub count: usize,
    pub roi_length_px: f64,
    pub dendrite_length_um: f64,
    /// Synapses per 100 µm of dendrite.
    pub density_per_100um: f64,
    pub calibration: f64,
    pub red_range: IntensityRange,
    pub green_range: IntensityRange,
    pub band_width: f64,
    #[serde(skip)]
    pub marked: Option<BinaryImage>,
}

impl SynapseReport {
    pub const CSV_HEADER: &'static str =
        "count,dendrite_length_um,density_per_100um,roi_length_px,calibration,red_range,green_range,band_width";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{},{},{},{}",
            self.count,
            self.dendrite_length_um,
            self.density_per_100um,
            self.roi_length_px,
            self.calibration,
            self.red_range,
            self.green_range,
            self.band_width
        )
    }
}

/// Marks pixels inside both intensity bands and the ROI band, then counts
/// 8-connected components of the marked mask.
pub fn count_synapses(
    red: &GrayImage,
    green: &GrayImage,
    roi: &RoiPolyline,
    red_range: IntensityRange,
    green_range: IntensityRange,
    calibration: f64,
) -> Result<SynapseReport, PipelineError> {
    red.same_dimensions(green)?;
    roi.validate()?;
    if !(calibration.is_finite() && calibration > 0.0) {
        return Err(crate::image::ImageError::BadCalibration(calibration).into());
    }
    let length_px = roi.length_px();
    if length_px <= 0.0 {
        return Err(PipelineError::ZeroLengthRoi);
    }
    let (w, h) = red.dimensions();
    let band = roi.rasterize(w, h);
    if band.is_empty() {
        return Err(PipelineError::EmptyRoi);
    }
    let marked = band_threshold(red, red_range.lo, red_range.hi)?
        .and(&band_threshold(green, green_range.lo, green_range.hi)?)?
        .and(&band)?;
    let count = label_components(&marked, Connectivity::Eight).count() as usize;
    let length_um = length_px * calibration;
    Ok(SynapseReport {
        count,
        roi_length_px: length_px,
        dendrite_length_um: length_um,
        density_per_100um: 100.0 * count as f64 / length_um,
        calibration,
        red_range,
        green_range,
        band_width: roi.band_width,
        marked: Some(marked),
    })
}
