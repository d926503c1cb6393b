//! Scene composition: a densely packed background layer, foreground objects
//! placed under crop and overlap limits, and occluders sized to hide a target
//! fraction of a foreground object.

mod background;
mod foreground;
mod hue;
mod mixed;
mod occluder;

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Pose};

pub use background::{
    background_scale_range, compose_background, sphere_diameter, sphere_scale_for_diameter, BackgroundLayer,
    BackgroundSettings, ScaleRange,
};
pub use foreground::{place_foreground, ForegroundConstraints, ForegroundScene};
pub use hue::{hue_shift_texture, hue_shift_texture_by};
pub use mixed::{compose_mixed_background, list_real_images, load_real_background, MixedBackground};
pub use occluder::{place_occluders, OccluderPlacement, OccluderSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Background,
    Foreground,
    Occluder,
}

/// One model instance in a layer. `model_id` indexes the model list of its
/// layer (foreground models for the foreground, the background pool otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub model_id: usize,
    pub pose: Pose,
    pub scale: f64,
    pub hue_shift: f64,
    pub layer: Layer,
}

/// The three layers of one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerComposition {
    pub background: Vec<PlacedObject>,
    pub foreground: Vec<PlacedObject>,
    pub occluders: Vec<OccluderPlacement>,
}

impl LayerComposition {
    pub fn occluder_objects(&self) -> Vec<PlacedObject> {
        self.occluders.iter().map(|o| o.object.clone()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ComposeError {
    #[error("model list is empty")]
    NoModels,
    #[error("background coverage incomplete after {placements} placements ({uncovered} cells left)")]
    CoverageNotReached { placements: usize, uncovered: usize },
    #[error("no real background images found in {0}")]
    NoRealImages(std::path::PathBuf),
    #[error("real background {path}: {source}")]
    RealImage {
        path: std::path::PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
