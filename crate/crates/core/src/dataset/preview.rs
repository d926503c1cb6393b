use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::manifest::{DatasetManifest, MANIFEST_FILE};
use super::{io_err, read_json, read_label, GenerateError, IMAGE_DIR};
use crate::color::{hsv_to_rgb, to_u8};

fn class_color(class_id: usize) -> Rgb<u8> {
    // Golden-angle hue steps keep neighboring classes apart.
    let hue = (class_id as f64 * 0.618_033_988_75).fract() * TAU;
    Rgb(hsv_to_rgb([hue, 0.9, 1.0]).map(to_u8))
}

fn draw_rect(img: &mut RgbImage, [x, y, w, h]: [f64; 4], color: Rgb<u8>, thickness: u32) {
    if img.width() == 0 || img.height() == 0 {
        return;
    }
    let max_x = img.width() - 1;
    let max_y = img.height() - 1;
    let x0 = (x.floor().max(0.0) as u32).min(max_x);
    let y0 = (y.floor().max(0.0) as u32).min(max_y);
    let x1 = ((x + w).ceil().max(0.0) as u32).saturating_sub(1).min(max_x).max(x0);
    let y1 = ((y + h).ceil().max(0.0) as u32).saturating_sub(1).min(max_y).max(y0);
    for t in 0..thickness {
        for px in x0..=x1 {
            img.put_pixel(px, (y0 + t).min(y1), color);
            img.put_pixel(px, y1.saturating_sub(t).max(y0), color);
        }
        for py in y0..=y1 {
            img.put_pixel((x0 + t).min(x1), py, color);
            img.put_pixel(x1.saturating_sub(t).max(x0), py, color);
        }
    }
}

/// Writes copies of up to `limit` dataset images with their boxes drawn, one
/// color per class. Returns the written paths.
pub fn write_previews(dataset: &Path, out_dir: &Path, limit: usize) -> Result<Vec<PathBuf>, GenerateError> {
    let manifest: DatasetManifest = read_json(&dataset.join(MANIFEST_FILE))?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for record in manifest.images.iter().take(limit) {
        let label = read_label(dataset, record.seed_offset)?;
        let path = dataset.join(IMAGE_DIR).join(&label.file_name);
        let mut img = image::open(&path)
            .map_err(|source| GenerateError::Image {
                path: path.clone(),
                source,
            })?
            .to_rgb8();
        for a in &label.annotations {
            draw_rect(&mut img, a.bbox, class_color(a.class_id), 2);
        }
        let target = out_dir.join(&label.file_name);
        img.save(&target).map_err(|source| GenerateError::Image {
            path: target.clone(),
            source,
        })?;
        written.push(target);
    }
    Ok(written)
}
