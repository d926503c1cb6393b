use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;

use super::manifest::{DatasetManifest, ImageRecord, MANIFEST_FILE};
use super::{
    annotate, image_file_name, read_json, write_json, write_sample, AreaFractions, CocoDataset, ImageLabel,
    OccluderRecord, PostprocessRecord, COCO_FILE,
};
use crate::composer::{
    background_scale_range, compose_background, compose_mixed_background, list_real_images, place_foreground,
    place_occluders, ComposeError, ForegroundScene, LayerComposition, ScaleRange,
};
use crate::config::{expand_model_paths, BackgroundMode, Config, ConfigError, PoseMode};
use crate::curriculum::{CurriculumCursor, CurriculumSource, ItemSource, RandomSource, ScheduleItem};
use crate::geometry::{load_mesh, normalize_mesh, perturb_intrinsics, CameraIntrinsics, GeometryError, TexturedMesh};
use crate::postprocess::{add_white_noise, fuse, random_blur, FusedSample, PostprocessError};
use crate::renderer::{rasterize, rasterize_onto, sample_light, RenderBuffer};
use crate::seed::{stream_rng, Stream};
use crate::viewsphere::PoseSpace;

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} models: list is empty")]
    NoModels(&'static str),
    #[error("loading model {path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: GeometryError,
    },
    #[error("image {index}: {source}")]
    Compose {
        index: u64,
        #[source]
        source: ComposeError,
    },
    #[error(transparent)]
    Setup(#[from] ComposeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("writing {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{0} already holds a dataset; resume it or choose another directory")]
    OutputExists(PathBuf),
    #[error("cannot resume: {0}")]
    ResumeMismatch(String),
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn load_models(entries: &[PathBuf], role: &'static str) -> Result<(Vec<PathBuf>, Vec<TexturedMesh>), GenerateError> {
    let paths = expand_model_paths(entries).map_err(|source| GenerateError::Io {
        path: entries.first().cloned().unwrap_or_default(),
        source,
    })?;
    if paths.is_empty() {
        return Err(GenerateError::NoModels(role));
    }
    let models = paths
        .iter()
        .map(|p| {
            load_mesh(p)
                .and_then(|m| normalize_mesh(&m))
                .map_err(|source| GenerateError::Model {
                    path: p.clone(),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((paths, models))
}

/// Per-image inputs decided in the sequential pre-pass.
#[derive(Debug, Clone)]
pub struct ImagePlan {
    pub index: u64,
    pub cam: CameraIntrinsics,
    pub scene: ForegroundScene,
}

/// A finished image with everything computed on the way.
#[derive(Debug, Clone)]
pub struct RenderedImage {
    pub image: RgbImage,
    pub label: ImageLabel,
    pub composition: LayerComposition,
    pub fused: FusedSample,
    pub foreground: RenderBuffer,
    pub background: RenderBuffer,
    pub occluders: RenderBuffer,
    pub items: Vec<ScheduleItem>,
    pub skipped: Vec<ScheduleItem>,
}

/// Loaded models and derived constants shared by all images of a run.
pub struct Generator {
    pub config: Config,
    pub seed: u64,
    pub space: PoseSpace,
    pub base_cam: CameraIntrinsics,
    pub fg_paths: Vec<PathBuf>,
    pub fg_models: Vec<TexturedMesh>,
    pub bg_models: Vec<TexturedMesh>,
    pub range: ScaleRange,
    pub real_images: Vec<PathBuf>,
}

impl Generator {
    pub fn new(config: Config, seed: u64) -> Result<Self, GenerateError> {
        config.validate()?;
        let (fg_paths, fg_models) = load_models(&config.models.foreground, "foreground")?;
        let (_, bg_models) = load_models(&config.models.background, "background")?;
        Self::with_models(config, seed, fg_paths, fg_models, bg_models)
    }

    /// Uses already loaded (and normalized) models.
    pub fn with_models(
        config: Config,
        seed: u64,
        fg_paths: Vec<PathBuf>,
        fg_models: Vec<TexturedMesh>,
        bg_models: Vec<TexturedMesh>,
    ) -> Result<Self, GenerateError> {
        config.validate()?;
        if fg_models.is_empty() {
            return Err(GenerateError::NoModels("foreground"));
        }
        if bg_models.is_empty() {
            return Err(GenerateError::NoModels("background"));
        }
        let space = config.pose_space.build().map_err(ConfigError::from)?;
        let base_cam = config.camera.intrinsics();
        let range = background_scale_range(&fg_models, &space, &base_cam, &config.background)?;
        let real_images = match (&config.generation.background, &config.mixed.real_image_dir) {
            (BackgroundMode::Mixed, Some(dir)) => list_real_images(dir)?,
            _ => Vec::new(),
        };
        Ok(Self {
            config,
            seed,
            space,
            base_cam,
            fg_paths,
            fg_models,
            bg_models,
            range,
            real_images,
        })
    }

    pub fn curriculum_source(&self, cursor: CurriculumCursor) -> CurriculumSource<'_> {
        CurriculumSource::new(cursor, self.fg_models.len(), &self.space)
    }

    /// Draws intrinsics and places the foreground. Must run in image order
    /// when `source` is shared across images.
    pub fn plan(&self, index: u64, source: &mut dyn ItemSource) -> Result<ImagePlan, GenerateError> {
        let compose = |source| GenerateError::Compose { index, source };
        let mut rng = stream_rng(self.seed, index, Stream::Intrinsics);
        let cam = perturb_intrinsics(&self.base_cam, &mut rng, self.config.camera.jitter)?;
        let coverage = match self.config.generation.background {
            BackgroundMode::Mixed => Some(self.config.mixed.foreground_fraction),
            BackgroundMode::FullSynthetic => None,
        };
        let mut rng = stream_rng(self.seed, index, Stream::Foreground);
        let scene = place_foreground(
            &mut rng,
            source,
            &self.fg_models,
            &self.space,
            &cam,
            &self.config.foreground,
            coverage,
        )
        .map_err(compose)?;
        Ok(ImagePlan { index, cam, scene })
    }

    /// Plans one image on its own: random mode, or a curriculum started at `cursor`.
    pub fn plan_standalone(&self, index: u64, cursor: &mut CurriculumCursor) -> Result<ImagePlan, GenerateError> {
        match self.config.generation.mode {
            PoseMode::Curriculum => {
                let mut source = self.curriculum_source(*cursor);
                let plan = self.plan(index, &mut source)?;
                *cursor = source.cursor;
                Ok(plan)
            }
            PoseMode::Random => {
                let rng = stream_rng(self.seed, index, Stream::Schedule);
                let mut source = RandomSource::new(rng, self.fg_models.len(), &self.space);
                self.plan(index, &mut source)
            }
        }
    }

    /// Renders, fuses and postprocesses a planned image. Independent of every
    /// other image, so safe to run in parallel.
    pub fn render(&self, plan: &ImagePlan) -> Result<RenderedImage, GenerateError> {
        let (index, cam) = (plan.index, &plan.cam);
        let compose = |source| GenerateError::Compose { index, source };
        let rng = |s| stream_rng(self.seed, index, s);
        let cfg = &self.config;

        let mut light_rng = rng(Stream::Light);
        let lights: Vec<_> = (0..cfg.lighting.count)
            .map(|_| sample_light(&mut light_rng, cfg.lighting.color_jitter, cfg.lighting.ambient_range))
            .collect();

        let fg = &plan.scene.placements;
        let fg_buf = rasterize(fg, &self.fg_models, cam, &lights);
        let occluders = place_occluders(
            &mut rng(Stream::Occluder),
            fg,
            &self.fg_models,
            &fg_buf,
            &self.bg_models,
            cam,
            &cfg.occluders,
        )
        .map_err(compose)?;
        let occ_objects: Vec<_> = occluders.iter().map(|o| o.object.clone()).collect();
        let occ_buf = rasterize(&occ_objects, &self.bg_models, cam, &lights);

        let (background, bg_buf, real_background) = match cfg.generation.background {
            BackgroundMode::FullSynthetic => {
                let layer = compose_background(
                    &mut rng(Stream::Background),
                    &self.bg_models,
                    cam,
                    &self.range,
                    &cfg.background,
                )
                .map_err(compose)?;
                let buf = rasterize(&layer.placements, &self.bg_models, cam, &lights);
                (layer.placements, buf, None)
            }
            BackgroundMode::Mixed => {
                let fg_mask: Vec<bool> = fg_buf.instance.iter().map(|&i| i != 0).collect();
                let precovered: Vec<usize> = (0..occ_buf.pixel_count())
                    .filter(|&p| occ_buf.instance[p] != 0 && !fg_mask[p])
                    .collect();
                let mixed = compose_mixed_background(
                    &mut rng(Stream::Mixed),
                    &self.real_images,
                    &self.bg_models,
                    cam,
                    &self.range,
                    &cfg.background,
                    cfg.mixed.synthetic_fraction,
                    &fg_mask,
                    &precovered,
                )
                .map_err(compose)?;
                let mut buf = RenderBuffer::with_background(mixed.photo);
                rasterize_onto(&mut buf, &mixed.layer.placements, &self.bg_models, cam, &lights);
                (mixed.layer.placements, buf, Some(mixed.source))
            }
        };

        let fused = fuse(&bg_buf, &fg_buf, &occ_buf, fg.len())?;
        let mut image = fused.rgb.clone();
        let noise_sigma = add_white_noise(&mut image, &mut rng(Stream::Noise), cfg.postprocess.noise_sigma_range);
        let (image, blur_kernel, blur_sigma) = random_blur(
            &image,
            &mut rng(Stream::Blur),
            &cfg.postprocess.blur_kernel_sizes,
            cfg.postprocess.blur_sigma_range,
        )?;

        let n = fused.instance.len();
        let (mut free, mut free_covered, mut fg_px, mut synth_px) = (0usize, 0usize, 0usize, 0usize);
        for p in 0..n {
            let (f, o, b) = (
                fg_buf.instance[p] != 0,
                occ_buf.instance[p] != 0,
                bg_buf.instance[p] != 0,
            );
            if !f && !o {
                free += 1;
                free_covered += b as usize;
            }
            if f {
                fg_px += 1;
            } else if o || b {
                synth_px += 1;
            }
        }
        let area_fractions = real_background.as_ref().map(|_| AreaFractions {
            foreground: fg_px as f64 / n as f64,
            synthetic: synth_px as f64 / n as f64,
            real: (n - fg_px - synth_px) as f64 / n as f64,
        });

        let annotations = annotate(&fused, fg, &plan.scene.boxes, &occluders);
        let label = ImageLabel {
            index,
            file_name: image_file_name(index),
            width: cam.width,
            height: cam.height,
            intrinsics: *cam,
            lights,
            annotations,
            occluders: occluders
                .iter()
                .map(|o| OccluderRecord {
                    target: o.target,
                    model_id: o.object.model_id,
                    target_coverage: o.target_coverage,
                    achieved_coverage: o.achieved_coverage,
                })
                .collect(),
            background_objects: background.len(),
            background_coverage: if free == 0 {
                1.0
            } else {
                free_covered as f64 / free as f64
            },
            real_background,
            area_fractions,
            postprocess: PostprocessRecord {
                noise_sigma,
                blur_kernel,
                blur_sigma,
            },
        };
        Ok(RenderedImage {
            image,
            label,
            composition: LayerComposition {
                background,
                foreground: fg.clone(),
                occluders,
            },
            fused,
            foreground: fg_buf,
            background: bg_buf,
            occluders: occ_buf,
            items: plan.scene.items.clone(),
            skipped: plan.scene.skipped.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub out_dir: PathBuf,
    /// Total image count of the dataset (including images already present when resuming).
    pub num_images: u64,
    pub seed: u64,
    pub resume: bool,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

fn snapshot(config: &Config) -> Config {
    let mut c = config.clone();
    c.generation.workers = 0;
    c
}

/// Generates (or resumes) a dataset in `options.out_dir`.
///
/// Images are produced in chunks: a sequential pass places the foreground of
/// each image in order, then the images of the chunk are rendered and written
/// in parallel. After each chunk the COCO index and the manifest are rewritten
/// so that an interrupted run can resume from the last checkpoint.
pub fn run_generation(config: &Config, options: &GenerateOptions) -> Result<DatasetManifest, GenerateError> {
    let out = &options.out_dir;
    std::fs::create_dir_all(out).map_err(|source| GenerateError::Io {
        path: out.clone(),
        source,
    })?;
    let manifest_path = out.join(MANIFEST_FILE);
    let coco_path = out.join(COCO_FILE);
    let snapshot = snapshot(config);

    let (mut manifest, mut coco, generator) = if manifest_path.exists() {
        if !options.resume {
            return Err(GenerateError::OutputExists(out.clone()));
        }
        let manifest: DatasetManifest = read_json(&manifest_path)?;
        if manifest.seed != options.seed {
            return Err(GenerateError::ResumeMismatch(format!(
                "seed {} differs from the recorded {}",
                options.seed, manifest.seed
            )));
        }
        if manifest.config != snapshot {
            return Err(GenerateError::ResumeMismatch(
                "config differs from the recorded one".into(),
            ));
        }
        if options.num_images < manifest.next_image_index {
            return Err(GenerateError::ResumeMismatch(format!(
                "dataset already has {} images",
                manifest.next_image_index
            )));
        }
        let coco: CocoDataset = read_json(&coco_path)?;
        let generator = Generator::new(config.clone(), options.seed)?;
        (manifest, coco, generator)
    } else {
        let generator = Generator::new(config.clone(), options.seed)?;
        let coco = CocoDataset::with_categories(&generator.fg_paths);
        (
            DatasetManifest::new(snapshot, options.seed, options.num_images),
            coco,
            generator,
        )
    };
    manifest.num_images = options.num_images;

    let workers = if options.workers > 0 {
        options.workers
    } else {
        config.generation.workers
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let chunk = config.generation.chunk_size as u64;
    let mut cursor = manifest.cursor;
    while manifest.next_image_index < options.num_images {
        let start = manifest.next_image_index;
        let end = (start + chunk).min(options.num_images);
        let mut plans = Vec::with_capacity((end - start) as usize);
        for index in start..end {
            plans.push(generator.plan_standalone(index, &mut cursor)?);
        }
        let labels = pool.install(|| {
            plans
                .par_iter()
                .map(|plan| {
                    let rendered = generator.render(plan)?;
                    write_sample(&rendered.image, &rendered.label, out)?;
                    Ok(rendered.label)
                })
                .collect::<Result<Vec<_>, GenerateError>>()
        })?;
        for (plan, label) in plans.iter().zip(&labels) {
            coco.push(label);
            manifest.images.push(ImageRecord {
                file_name: label.file_name.clone(),
                seed_offset: label.index,
                annotation_count: label.annotations.len(),
                items: plan.scene.items.clone(),
            });
            manifest.skipped.extend(plan.scene.skipped.iter().copied());
        }
        manifest.cursor = cursor;
        manifest.next_image_index = end;
        write_json(&coco_path, &coco)?;
        write_json(&manifest_path, &manifest)?;
        log::info!("{end}/{} images", options.num_images);
    }
    Ok(manifest)
}

/// Regenerates the dataset described by a manifest into `out_dir`.
pub fn replay(manifest_path: &Path, out_dir: &Path, workers: usize) -> Result<DatasetManifest, GenerateError> {
    let manifest: DatasetManifest = read_json(manifest_path)?;
    run_generation(
        &manifest.config,
        &GenerateOptions {
            out_dir: out_dir.to_path_buf(),
            num_images: manifest.next_image_index,
            seed: manifest.seed,
            resume: false,
            workers,
        },
    )
}
