use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::curriculum::{CurriculumCursor, ScheduleItem};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub file_name: String,
    /// Image index; per-image random streams are keyed by it.
    pub seed_offset: u64,
    pub annotation_count: usize,
    /// Schedule items placed in this image, in placement order.
    pub items: Vec<ScheduleItem>,
}

/// Everything needed to resume or regenerate a dataset. Written after every
/// completed chunk, so it always describes a consistent prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    /// Config with model paths resolved; worker count is not recorded since
    /// output does not depend on it.
    pub config: Config,
    pub seed: u64,
    pub num_images: u64,
    /// Schedule position after the last completed image.
    pub cursor: CurriculumCursor,
    pub next_image_index: u64,
    pub images: Vec<ImageRecord>,
    /// Items consumed without placement because they fit nowhere.
    pub skipped: Vec<ScheduleItem>,
}

impl DatasetManifest {
    pub fn new(config: Config, seed: u64, num_images: u64) -> Self {
        Self {
            version: MANIFEST_VERSION,
            config,
            seed,
            num_images,
            cursor: CurriculumCursor::default(),
            next_image_index: 0,
            images: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.next_image_index >= self.num_images
    }
}
