//! Generation settings, read from TOML. Every field has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::composer::{BackgroundSettings, ForegroundConstraints, OccluderSettings};
use crate::geometry::{CameraIntrinsics, MAX_INTRINSICS_JITTER};
use crate::viewsphere::{scale_distances, subdivide_icosahedron, PoseSpace, ViewSphereError, MAX_SUBDIVISION_LEVEL};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    PoseSpace(#[from] ViewSphereError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseMode {
    #[default]
    Curriculum,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundMode {
    #[default]
    FullSynthetic,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Relative per-image perturbation of fx, fy, cx, cy.
    pub jitter: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 960,
            height: 720,
            fx: 800.0,
            fy: 800.0,
            cx: 480.0,
            cy: 360.0,
            jitter: 0.05,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpaceConfig {
    pub subdivision_level: u32,
    pub inplane_steps: usize,
    pub num_scales: usize,
    pub d_near: f64,
    pub d_far: f64,
}

impl Default for PoseSpaceConfig {
    fn default() -> Self {
        Self {
            subdivision_level: 1,
            inplane_steps: 8,
            num_scales: 4,
            d_near: 6.0,
            d_far: 30.0,
        }
    }
}

impl PoseSpaceConfig {
    pub fn build(&self) -> Result<PoseSpace, ViewSphereError> {
        let sphere = subdivide_icosahedron(self.subdivision_level)?;
        let distances = if self.num_scales == 1 {
            vec![self.d_near]
        } else {
            scale_distances(self.d_near, self.d_far, self.num_scales)?
        };
        PoseSpace::new(sphere, self.inplane_steps, distances)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightingConfig {
    pub count: usize,
    pub color_jitter: f64,
    pub ambient_range: [f64; 2],
}

impl Default for LightingConfig {
    fn default() -> Self {
        Self {
            count: 1,
            color_jitter: 0.2,
            ambient_range: [0.2, 0.4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub noise_sigma_range: [f64; 2],
    pub blur_kernel_sizes: Vec<u32>,
    pub blur_sigma_range: [f64; 2],
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            noise_sigma_range: [0.0, 8.0],
            blur_kernel_sizes: vec![1, 3, 5, 7, 9],
            blur_sigma_range: [0.3, 3.0],
        }
    }
}

/// Area targets for mixed real/synthetic backgrounds. The real share is
/// whatever foreground and synthetic objects leave uncovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixedConfig {
    pub real_image_dir: Option<PathBuf>,
    pub real_fraction: f64,
    pub synthetic_fraction: f64,
    pub foreground_fraction: f64,
}

impl Default for MixedConfig {
    fn default() -> Self {
        Self {
            real_image_dir: None,
            real_fraction: 0.7,
            synthetic_fraction: 0.1,
            foreground_fraction: 0.2,
        }
    }
}

/// Model files; a directory entry stands for every `.obj` file inside it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub foreground: Vec<PathBuf>,
    pub background: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub mode: PoseMode,
    pub background: BackgroundMode,
    /// Images composed per checkpoint.
    pub chunk_size: usize,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            mode: PoseMode::Curriculum,
            background: BackgroundMode::FullSynthetic,
            chunk_size: 32,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub camera: CameraConfig,
    pub pose_space: PoseSpaceConfig,
    pub lighting: LightingConfig,
    pub background: BackgroundSettings,
    pub foreground: ForegroundConstraints,
    pub occluders: OccluderSettings,
    pub postprocess: PostprocessConfig,
    pub mixed: MixedConfig,
    pub models: ModelsConfig,
    pub generation: GenerationConfig,
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })
    }

    /// Reads and validates a config file; relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.models.foreground.iter_mut().for_each(fix);
        self.models.background.iter_mut().for_each(fix);
        if let Some(dir) = self.mixed.real_image_dir.as_mut() {
            fix(dir);
        }
    }

    /// Checks ranges and shapes; model files are checked when loaded.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let cam = self.camera.intrinsics();
        if cam.validate().is_err() {
            return invalid(format!("camera intrinsics out of range: {cam:?}"));
        }
        if !(0.0..=MAX_INTRINSICS_JITTER).contains(&self.camera.jitter) {
            return invalid(format!(
                "camera.jitter {} outside [0, {MAX_INTRINSICS_JITTER}]",
                self.camera.jitter
            ));
        }
        let ps = &self.pose_space;
        if ps.subdivision_level > MAX_SUBDIVISION_LEVEL {
            return Err(ViewSphereError::LevelTooHigh(ps.subdivision_level).into());
        }
        if ps.num_scales == 0 || ps.inplane_steps == 0 {
            return invalid("pose_space needs at least one scale and one in-plane step");
        }
        if !(ps.d_near > 1.0) || (ps.num_scales > 1 && !(ps.d_far > ps.d_near)) {
            return invalid("pose_space distances must satisfy 1 < d_near < d_far (models have unit radius)");
        }
        let l = &self.lighting;
        if l.count == 0 {
            return invalid("lighting.count must be at least 1");
        }
        if !(0.0..=1.0).contains(&l.color_jitter) {
            return invalid("lighting.color_jitter must lie in [0, 1]");
        }
        check_range("lighting.ambient_range", l.ambient_range, 0.0, 1.0)?;
        let bg = &self.background;
        check_range(
            "background.size_multipliers",
            bg.size_multipliers,
            f64::MIN_POSITIVE,
            f64::INFINITY,
        )?;
        if !(bg.distance > 1.0) {
            return invalid("background.distance must exceed 1");
        }
        if !(0.0..=1.0).contains(&bg.min_subrange_fraction) {
            return invalid("background.min_subrange_fraction must lie in [0, 1]");
        }
        if bg.occupancy_cell == 0 || !(bg.guard_factor >= 1.0) {
            return invalid("background.occupancy_cell must be positive and guard_factor at least 1");
        }
        let fg = &self.foreground;
        if !(0.0..=1.0).contains(&fg.max_truncation) || !(0.0..=1.0).contains(&fg.max_overlap) {
            return invalid("foreground truncation and overlap limits must lie in [0, 1]");
        }
        if fg.attempts == 0 || fg.max_objects == 0 {
            return invalid("foreground.attempts and max_objects must be positive");
        }
        let occ = &self.occluders;
        if !(0.0..=1.0).contains(&occ.probability) {
            return invalid("occluders.probability must lie in [0, 1]");
        }
        check_range("occluders.coverage_range", occ.coverage_range, f64::MIN_POSITIVE, 1.0)?;
        if !(occ.tolerance >= 0.0) || !(occ.spill_tolerance >= 0.0) || occ.attempts == 0 {
            return invalid("occluder tolerances must be non-negative and attempts positive");
        }
        let pp = &self.postprocess;
        check_range("postprocess.noise_sigma_range", pp.noise_sigma_range, 0.0, 30.0)?;
        check_range(
            "postprocess.blur_sigma_range",
            pp.blur_sigma_range,
            f64::MIN_POSITIVE,
            f64::INFINITY,
        )?;
        if pp.blur_kernel_sizes.is_empty() {
            return invalid("postprocess.blur_kernel_sizes is empty");
        }
        if let Some(k) = pp.blur_kernel_sizes.iter().find(|&&k| k % 2 == 0) {
            return invalid(format!("blur kernel size {k} is even"));
        }
        let m = &self.mixed;
        for (name, v) in [
            ("real_fraction", m.real_fraction),
            ("synthetic_fraction", m.synthetic_fraction),
            ("foreground_fraction", m.foreground_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("mixed.{name} must lie in [0, 1]"));
            }
        }
        if (m.real_fraction + m.synthetic_fraction + m.foreground_fraction - 1.0).abs() > 1e-6 {
            return invalid("mixed fractions must sum to 1");
        }
        if self.generation.background == BackgroundMode::Mixed && m.real_image_dir.is_none() {
            return invalid("mixed backgrounds need mixed.real_image_dir");
        }
        if self.generation.chunk_size == 0 {
            return invalid("generation.chunk_size must be positive");
        }
        Ok(())
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2], min: f64, max: f64) -> Result<(), ConfigError> {
    if !(lo >= min && hi <= max && lo <= hi) {
        return invalid(format!("{name} [{lo}, {hi}] must be ordered within [{min}, {max}]"));
    }
    Ok(())
}

/// Expands directories into their `.obj` files, sorted by name.
pub fn expand_model_paths(entries: &[PathBuf]) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in entries {
        if entry.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(entry)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")));
            found.sort();
            out.extend(found);
        } else {
            out.push(entry.clone());
        }
    }
    Ok(out)
}
