//! Silhouette-based pose measurement from side-view images.
//!
//! The pipeline masks the finger by colour, traces its outer contour, finds
//! the notch apexes on the bottom line and converts them into joint angles.

mod contour;
mod image;
mod mask;
mod morphology;
mod peaks;
mod pipeline;
mod render;

use thiserror::Error;

use crate::chain::ChainError;

pub use self::image::{BinaryImage, RasterImage};
pub use contour::{extract_contour, split_contour, Contour, ContourSplit, MIN_COMPONENT_AREA};
pub use mask::{combined_mask, hsv_mask, rgb_to_hsv, to_grayscale_mask, MaskSpec};
pub use morphology::{close, dilate, erode, morphology, open, MorphOp};
pub use peaks::{fit_line, find_joint_peaks, intersect, refine_corner, Line, Peak};
pub use pipeline::{angles_from_image, track_tip, ImageAngles, PixelFrame, TipTrack, MAX_GAP_FRACTION};
pub use render::{BodyShape, Camera};

/// Failure of one stage of the image pipeline.
#[derive(Debug, Error)]
pub enum VisionError {
    #[error("image: {0}")]
    Image(String),
    #[error("mask spec: {0}")]
    MaskSpec(String),
    #[error("contour stage: {0}")]
    Contour(String),
    #[error("split stage: {0}")]
    Split(String),
    #[error("peak stage: found {found} joint candidates, need {needed}")]
    Peaks { found: usize, needed: usize },
    #[error("angle stage: {0}")]
    Angles(#[from] ChainError),
    #[error("tracking: {gaps} of {frames} frames failed")]
    TooManyGaps { gaps: usize, frames: usize },
    #[error("tracking: {0}")]
    Tracking(String),
}

impl VisionError {
    /// Name of the pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Image(_) => "image",
            Self::MaskSpec(_) => "mask",
            Self::Contour(_) => "contour",
            Self::Split(_) => "split",
            Self::Peaks { .. } => "peaks",
            Self::Angles(_) => "angles",
            Self::TooManyGaps { .. } | Self::Tracking(_) => "tracking",
        }
    }
}
