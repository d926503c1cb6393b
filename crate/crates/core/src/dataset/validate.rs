use std::path::Path;

use super::manifest::{DatasetManifest, MANIFEST_FILE};
use super::{read_json, read_label, CocoDataset, GenerateError, COCO_FILE, IMAGE_DIR};
use crate::config::BackgroundMode;

/// Slack for pixel-boundary effects in occlusion checks.
const BOUNDARY_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub images: usize,
    pub annotations: usize,
    pub occluders: usize,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Re-checks the recorded invariants of a dataset directory: file presence and
/// sizes, box bounds, truncation and overlap limits, occlusion bands,
/// background coverage and consistency of the COCO index with the labels.
pub fn validate_dataset(dir: &Path) -> Result<ValidationReport, GenerateError> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let coco: CocoDataset = read_json(&dir.join(COCO_FILE))?;
    let cfg = &manifest.config;
    let mut report = ValidationReport::default();
    let mut problem = |msg: String| report.problems.push(msg);
    let (occ_lo, occ_hi) = (
        cfg.occluders.coverage_range[0] - cfg.occluders.tolerance,
        cfg.occluders.coverage_range[1] + cfg.occluders.tolerance,
    );
    let mut annotation_total = 0;
    let mut occluder_total = 0;

    for record in &manifest.images {
        let index = record.seed_offset;
        let label = match read_label(dir, index) {
            Ok(l) => l,
            Err(e) => {
                problem(format!("image {index}: {e}"));
                continue;
            }
        };
        let tag = &label.file_name;
        match image::image_dimensions(dir.join(IMAGE_DIR).join(tag)) {
            Ok(dims) if dims == (label.width, label.height) => {}
            Ok(dims) => problem(format!("{tag}: size {dims:?} differs from label")),
            Err(e) => problem(format!("{tag}: {e}")),
        }
        if label.annotations.len() != record.annotation_count {
            problem(format!(
                "{tag}: manifest lists {} annotations, label has {}",
                record.annotation_count,
                label.annotations.len()
            ));
        }
        if cfg.generation.background == BackgroundMode::FullSynthetic {
            if label.annotations.len() > cfg.foreground.max_objects {
                problem(format!("{tag}: {} objects exceed the limit", label.annotations.len()));
            }
            if label.background_coverage < 0.999 {
                problem(format!(
                    "{tag}: background covers only {:.4}",
                    label.background_coverage
                ));
            }
        }
        let (w, h) = (label.width as f64, label.height as f64);
        for (j, a) in label.annotations.iter().enumerate() {
            let [x, y, bw, bh] = a.bbox;
            if x < 0.0 || y < 0.0 || bw < 0.0 || bh < 0.0 || x + bw > w + 1e-9 || y + bh > h + 1e-9 {
                problem(format!("{tag} #{j}: bbox {:?} outside the image", a.bbox));
            }
            if a.truncation > cfg.foreground.max_truncation + 1e-9 {
                problem(format!("{tag} #{j}: truncation {:.3}", a.truncation));
            }
            for (k, b) in label.annotations[..j].iter().enumerate() {
                let overlap = a.bbox().overlap_ratio(&b.bbox());
                if overlap > cfg.foreground.max_overlap + 1e-9 {
                    problem(format!("{tag} #{k}/#{j}: overlap {overlap:.3}"));
                }
            }
            let limit = if a.occluded {
                occ_hi
            } else {
                cfg.occluders.spill_tolerance
            };
            if a.occlusion > limit + BOUNDARY_TOLERANCE || a.occlusion < 0.0 {
                problem(format!("{tag} #{j}: occlusion {:.3}", a.occlusion));
            }
        }
        for o in &label.occluders {
            if !(occ_lo - 1e-9..=occ_hi + 1e-9).contains(&o.achieved_coverage) {
                problem(format!("{tag}: occluder coverage {:.3}", o.achieved_coverage));
            }
        }
        annotation_total += label.annotations.len();
        occluder_total += label.occluders.len();
    }

    if coco.images.len() != manifest.images.len() {
        problem(format!(
            "{COCO_FILE} lists {} images, manifest {}",
            coco.images.len(),
            manifest.images.len()
        ));
    }
    if coco.annotations.len() != annotation_total {
        problem(format!(
            "{COCO_FILE} lists {} annotations, labels {annotation_total}",
            coco.annotations.len()
        ));
    }
    report.images = manifest.images.len();
    report.annotations = annotation_total;
    report.occluders = occluder_total;
    Ok(report)
}
