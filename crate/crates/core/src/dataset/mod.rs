//! Annotations, on-disk layout, manifests and the generation driver.
//!
//! A dataset directory holds:
//! - `images/NNNNNN.png`: fused, noised and blurred images;
//! - `labels/NNNNNN.json`: one [`ImageLabel`] per image;
//! - `annotations.json`: COCO-style index of all images and boxes;
//! - `manifest.json`: config, seed and schedule state for resume and replay.

mod generate;
mod manifest;
mod preview;
mod validate;

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::composer::OccluderPlacement;
use crate::geometry::{BBox, CameraIntrinsics, Pose, PoseProvenance, ProjectedBox};
use crate::postprocess::FusedSample;
use crate::renderer::LightSource;

pub use generate::{replay, run_generation, GenerateError, GenerateOptions, Generator, ImagePlan, RenderedImage};
pub use manifest::{DatasetManifest, ImageRecord, MANIFEST_FILE};
pub use preview::write_previews;
pub use validate::{validate_dataset, ValidationReport};

pub const COCO_FILE: &str = "annotations.json";
pub const IMAGE_DIR: &str = "images";
pub const LABEL_DIR: &str = "labels";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Index of the foreground model.
    pub class_id: usize,
    /// `[x, y, w, h]` in pixels, clipped to the image.
    pub bbox: [f64; 4],
    pub pose: Pose,
    pub truncation: f64,
    /// `1 - visible_after / visible_before` occluder fusion.
    pub occlusion: f64,
    pub occluded: bool,
    pub visible_pixels: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<PoseProvenance>,
}

impl Annotation {
    pub fn bbox(&self) -> BBox {
        BBox::from_xywh(self.bbox)
    }
}

/// One annotation per foreground placement, in placement order.
pub fn annotate(
    sample: &FusedSample,
    fg: &[crate::composer::PlacedObject],
    boxes: &[ProjectedBox],
    occluders: &[OccluderPlacement],
) -> Vec<Annotation> {
    let occlusion = sample.occlusion();
    fg.iter()
        .zip(boxes)
        .enumerate()
        .map(|(j, (p, b))| Annotation {
            class_id: p.model_id,
            bbox: b.bbox.to_xywh(),
            pose: p.pose,
            truncation: b.truncation,
            occlusion: occlusion[j],
            occluded: occluders.iter().any(|o| o.target == j),
            visible_pixels: sample.post_visible[j],
            provenance: p.pose.provenance,
        })
        .collect()
}

/// Shares of the image by content, measured on the fused masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaFractions {
    /// Pixels of foreground objects, occluded parts included.
    pub foreground: f64,
    /// Synthetic background or occluder pixels outside the foreground.
    pub synthetic: f64,
    /// Pixels showing the real photo.
    pub real: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccluderRecord {
    pub target: usize,
    pub model_id: usize,
    pub target_coverage: f64,
    pub achieved_coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessRecord {
    pub noise_sigma: f64,
    pub blur_kernel: u32,
    pub blur_sigma: f64,
}

/// Everything recorded about one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageLabel {
    pub index: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub intrinsics: CameraIntrinsics,
    pub lights: Vec<LightSource>,
    pub annotations: Vec<Annotation>,
    pub occluders: Vec<OccluderRecord>,
    pub background_objects: usize,
    /// Fraction of pixels carrying a background instance among those not
    /// covered by foreground or occluders.
    pub background_coverage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_background: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_fractions: Option<AreaFractions>,
    pub postprocess: PostprocessRecord,
}

pub fn image_file_name(index: u64) -> String {
    format!("{index:06}.png")
}

pub fn label_file_name(index: u64) -> String {
    format!("{index:06}.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenerateError + '_ {
    move |source| GenerateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), GenerateError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), GenerateError> {
    let text = serde_json::to_vec_pretty(value).map_err(|source| GenerateError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, &text)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, GenerateError> {
    let text = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&text).map_err(|source| GenerateError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the image as PNG and its label as JSON; returns both paths.
pub fn write_sample(img: &RgbImage, label: &ImageLabel, out_dir: &Path) -> Result<(PathBuf, PathBuf), GenerateError> {
    let image_dir = out_dir.join(IMAGE_DIR);
    let label_dir = out_dir.join(LABEL_DIR);
    std::fs::create_dir_all(&image_dir).map_err(io_err(&image_dir))?;
    std::fs::create_dir_all(&label_dir).map_err(io_err(&label_dir))?;
    let image_path = image_dir.join(&label.file_name);
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|source| GenerateError::Image {
            path: image_path.clone(),
            source,
        })?;
    write_atomic(&image_path, &png)?;
    let label_path = label_dir.join(label_file_name(label.index));
    write_json(&label_path, label)?;
    Ok((image_path, label_path))
}

pub fn read_label(out_dir: &Path, index: u64) -> Result<ImageLabel, GenerateError> {
    read_json(&out_dir.join(LABEL_DIR).join(label_file_name(index)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: usize,
    pub bbox: [f64; 4],
    pub area: f64,
    pub iscrowd: u8,
    pub truncation: f64,
    pub occlusion: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

impl CocoDataset {
    /// Categories named after the foreground model files, ids in model order.
    pub fn with_categories(models: &[PathBuf]) -> Self {
        let categories = models
            .iter()
            .enumerate()
            .map(|(id, p)| CocoCategory {
                id,
                name: p
                    .file_stem()
                    .map_or_else(|| format!("object_{id}"), |s| s.to_string_lossy().into_owned()),
            })
            .collect();
        Self {
            categories,
            ..Default::default()
        }
    }

    pub fn push(&mut self, label: &ImageLabel) {
        self.images.push(CocoImage {
            id: label.index,
            file_name: format!("{IMAGE_DIR}/{}", label.file_name),
            width: label.width,
            height: label.height,
        });
        for a in &label.annotations {
            self.annotations.push(CocoAnnotation {
                id: self.annotations.len() as u64,
                image_id: label.index,
                category_id: a.class_id,
                bbox: a.bbox,
                area: a.bbox[2] * a.bbox[3],
                iscrowd: 0,
                truncation: a.truncation,
                occlusion: a.occlusion,
                pose: a.pose,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};

    fn label(annotations: Vec<Annotation>) -> ImageLabel {
        ImageLabel {
            index: 3,
            file_name: image_file_name(3),
            width: 8,
            height: 6,
            intrinsics: CameraIntrinsics::new(10.0, 10.0, 4.0, 3.0, 8, 6).unwrap(),
            lights: vec![LightSource::white(-Vector3::z(), 0.3)],
            annotations,
            occluders: vec![],
            background_objects: 4,
            background_coverage: 1.0,
            real_background: None,
            area_fractions: None,
            postprocess: PostprocessRecord {
                noise_sigma: 1.5,
                blur_kernel: 3,
                blur_sigma: 0.7,
            },
        }
    }

    #[test]
    fn empty_sample_still_writes_image() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::new(8, 6);
        let (ip, lp) = write_sample(&img, &label(vec![]), dir.path()).unwrap();
        assert_eq!(image::open(&ip).unwrap().to_rgb8(), img);
        let back: ImageLabel = read_json(&lp).unwrap();
        assert!(back.annotations.is_empty());
    }

    #[test]
    fn labels_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let a = Annotation {
            class_id: 2,
            bbox: [1.25, 0.5, 3.0000001, 2.75],
            pose: Pose::new(
                UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
                Vector3::new(0.3, -0.1, 7.5),
            )
            .unwrap()
            .with_provenance(PoseProvenance {
                scale_index: 1,
                view_index: 4,
                inplane_index: 2,
            }),
            truncation: 0.125,
            occlusion: 0.2138,
            occluded: true,
            visible_pixels: 77,
            provenance: None,
        };
        let l = label(vec![a]);
        write_sample(&RgbImage::new(8, 6), &l, dir.path()).unwrap();
        assert_eq!(read_label(dir.path(), 3).unwrap(), l);
    }

    #[test]
    fn coco_ids_are_sequential() {
        let mut coco = CocoDataset::with_categories(&[PathBuf::from("m/duck.obj")]);
        let a = Annotation {
            class_id: 0,
            bbox: [0.0, 0.0, 2.0, 3.0],
            pose: Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 5.0)).unwrap(),
            truncation: 0.0,
            occlusion: 0.0,
            occluded: false,
            visible_pixels: 6,
            provenance: None,
        };
        coco.push(&label(vec![a.clone(), a]));
        assert_eq!(coco.categories[0].name, "duck");
        assert_eq!(coco.annotations.iter().map(|a| a.id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(coco.annotations[0].area, 6.0);
        assert_eq!(coco.images[0].file_name, "images/000003.png");
    }
}
