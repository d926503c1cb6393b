use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::Rng;

use super::background::{fill_background, FillTarget};
use super::{BackgroundLayer, BackgroundSettings, ComposeError, ScaleRange};
use crate::geometry::{CameraIntrinsics, TexturedMesh};

/// PNG and JPEG files directly inside `dir`, sorted by name.
pub fn list_real_images(dir: &Path) -> Result<Vec<PathBuf>, ComposeError> {
    let io = |source| ComposeError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(ComposeError::NoRealImages(dir.to_path_buf()));
    }
    Ok(files)
}

/// Loads a photo scaled to cover `width`×`height` and center-cropped to it.
pub fn load_real_background(path: &Path, width: u32, height: u32) -> Result<RgbImage, ComposeError> {
    let img = image::open(path)
        .map_err(|source| ComposeError::RealImage {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let k = (width as f64 / img.width() as f64).max(height as f64 / img.height() as f64);
    let w = ((img.width() as f64 * k).ceil() as u32).max(width);
    let h = ((img.height() as f64 * k).ceil() as u32).max(height);
    let resized = imageops::resize(&img, w, h, FilterType::Triangle);
    Ok(imageops::crop_imm(&resized, (w - width) / 2, (h - height) / 2, width, height).to_image())
}

/// A real photo with synthetic background objects covering part of it.
#[derive(Debug, Clone)]
pub struct MixedBackground {
    pub photo: RgbImage,
    pub source: PathBuf,
    pub layer: BackgroundLayer,
}

/// Picks a random photo to fill the frame, then adds synthetic background
/// objects until synthetic content covers `synthetic_fraction` of the image
/// outside `fg_mask`. Pixels in `precovered` (occluders, say) already count as
/// synthetic.
#[allow(clippy::too_many_arguments)]
pub fn compose_mixed_background<R: Rng + ?Sized>(
    rng: &mut R,
    real_images: &[PathBuf],
    pool: &[TexturedMesh],
    cam: &CameraIntrinsics,
    range: &ScaleRange,
    settings: &BackgroundSettings,
    synthetic_fraction: f64,
    fg_mask: &[bool],
    precovered: &[usize],
) -> Result<MixedBackground, ComposeError> {
    let Some(source) = real_images.get(rng.random_range(0..real_images.len().max(1))) else {
        return Err(ComposeError::NoRealImages(PathBuf::new()));
    };
    let photo = load_real_background(source, cam.width, cam.height)?;
    let layer = fill_background(
        rng,
        pool,
        cam,
        range,
        settings,
        Some(fg_mask),
        precovered,
        FillTarget::Fraction(synthetic_fraction),
    )?;
    Ok(MixedBackground {
        photo,
        source: source.clone(),
        layer,
    })
}
