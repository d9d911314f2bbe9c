//! The biologist-facing analyses built on the image and topology core.

mod locate;
mod nuclei;
mod structure;
mod synapses;

pub use locate::{locate_neurons, LocateParams, LocationReport, NeuronBox};
pub use nuclei::{count_nuclei, AxisCriterion, NucleusParams, NucleusReport, RejectedComponent, Rejection};
pub use structure::{extract_structure, StructureParams, StructureResult};
pub use synapses::{count_synapses, IntensityRange, RoiPolyline, SynapseReport};

use thiserror::Error;

use crate::image::{median_filter, GrayImage, ImageError};
use crate::persistence::PersistenceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error("ROI needs at least two vertices")]
    TooFewVertices,
    #[error("ROI band width must be at least 1 pixel, got {0}")]
    BandWidth(f64),
    #[error("ROI has zero length")]
    ZeroLengthRoi,
    #[error("ROI band does not cover any pixel of the image")]
    EmptyRoi,
    #[error("invalid intensity range {0}")]
    InvalidRange(String),
    #[error("control mean must be positive, got {0}")]
    NonPositiveControl(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Signed change relative to control: `100·(1 − treatment/control)`.
/// Positive values are inhibition, negative values potentiation.
pub fn percent_change(control_mean: f64, treatment_mean: f64) -> Result<f64, PipelineError> {
    if !(control_mean.is_finite() && control_mean > 0.0) {
        return Err(PipelineError::NonPositiveControl(control_mean));
    }
    Ok(100.0 * (1.0 - treatment_mean / control_mean))
}

/// Median prefilter; radius 0 leaves the image untouched.
pub(crate) fn prefilter(img: &GrayImage, radius: usize) -> Result<GrayImage, ImageError> {
    if radius == 0 {
        Ok(img.clone())
    } else {
        median_filter(img, radius)
    }
}
