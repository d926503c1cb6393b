#![allow(dead_code)]

use std::path::{Path, PathBuf};

use synthgen::assets::write_random_library;
use synthgen::config::Config;

/// Procedural model libraries on disk and a config pointing at them.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: Config,
}

impl Fixture {
    pub fn new(num_fg: usize, num_bg: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let fg = dir.path().join("fg");
        let bg = dir.path().join("bg");
        std::fs::create_dir_all(&fg).unwrap();
        std::fs::create_dir_all(&bg).unwrap();
        write_random_library(&fg, "fg", num_fg, seed, 64).unwrap();
        write_random_library(&bg, "bg", num_bg, seed + 1, 32).unwrap();
        let mut config = Config::default();
        config.models.foreground = vec![fg];
        config.models.background = vec![bg];
        Self { dir, config }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Writes a few flat-ish "photos" for mixed backgrounds.
    pub fn with_real_images(mut self, count: usize) -> Self {
        let dir = self.dir.path().join("real");
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..count {
            let img = image::RgbImage::from_fn(200, 150, |x, y| {
                image::Rgb([(x + 40 * i as u32) as u8, (y * 2) as u8, (100 + 30 * i) as u8])
            });
            img.save(dir.join(format!("photo_{i}.png"))).unwrap();
        }
        self.config.mixed.real_image_dir = Some(dir);
        self
    }
}

/// Shrinks the camera by `factor`, keeping the field of view.
pub fn shrink_camera(config: &mut Config, factor: f64) {
    let c = &mut config.camera;
    c.width = (c.width as f64 / factor).round() as u32;
    c.height = (c.height as f64 / factor).round() as u32;
    c.fx /= factor;
    c.fy /= factor;
    c.cx /= factor;
    c.cy /= factor;
}
