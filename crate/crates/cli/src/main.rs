use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use synthgen::assets::write_random_library;
use synthgen::config::{BackgroundMode, Config, PoseMode};
use synthgen::dataset::{replay, run_generation, validate_dataset, write_previews, GenerateOptions};

#[derive(Parser)]
#[command(
    name = "synthgen",
    version,
    about = "Layered synthetic training images for object detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Curriculum,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackgroundArg {
    FullSynthetic,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset, or resume an interrupted one.
    Generate {
        /// TOML config; built-in defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        num_images: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        background: Option<BackgroundArg>,
        /// Foreground model files or directories (replaces the config list).
        #[arg(long = "fg-models", num_args = 1..)]
        fg_models: Vec<PathBuf>,
        /// Background model files or directories (replaces the config list).
        #[arg(long = "bg-models", num_args = 1..)]
        bg_models: Vec<PathBuf>,
        /// Photo directory for `--background mixed`.
        #[arg(long)]
        real_images: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Continue the dataset already in `--out`.
        #[arg(long)]
        resume: bool,
    },
    /// Re-check a generated dataset's invariants.
    Validate { dir: PathBuf },
    /// Draw annotation boxes onto copies of dataset images.
    Preview {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        limit: usize,
    },
    /// Regenerate a dataset from its manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Write procedural model libraries and a config that uses them.
    MakeAssets {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        foreground: usize,
        #[arg(long, default_value_t = 64)]
        background: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        texture_size: u32,
    },
    /// Print the default config as TOML.
    DefaultConfig,
}

fn build_config(
    path: Option<&Path>,
    mode: Option<ModeArg>,
    background: Option<BackgroundArg>,
    fg_models: Vec<PathBuf>,
    bg_models: Vec<PathBuf>,
    real_images: Option<PathBuf>,
) -> Result<Config> {
    let mut config = match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(m) = mode {
        config.generation.mode = match m {
            ModeArg::Curriculum => PoseMode::Curriculum,
            ModeArg::Random => PoseMode::Random,
        };
    }
    if let Some(b) = background {
        config.generation.background = match b {
            BackgroundArg::FullSynthetic => BackgroundMode::FullSynthetic,
            BackgroundArg::Mixed => BackgroundMode::Mixed,
        };
    }
    if !fg_models.is_empty() {
        config.models.foreground = fg_models;
    }
    if !bg_models.is_empty() {
        config.models.background = bg_models;
    }
    if real_images.is_some() {
        config.mixed.real_image_dir = real_images;
    }
    if config.models.foreground.is_empty() || config.models.background.is_empty() {
        bail!("no models configured; pass --fg-models and --bg-models or a config listing them");
    }
    config.validate()?;
    Ok(config)
}

fn make_assets(out: &Path, foreground: usize, background: usize, seed: u64, texture_size: u32) -> Result<()> {
    let fg = out.join("foreground");
    let bg = out.join("background");
    for dir in [&fg, &bg] {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_random_library(&fg, "fg", foreground, seed, texture_size)?;
    write_random_library(&bg, "bg", background, seed.wrapping_add(1), texture_size)?;
    let mut config = Config::default();
    config.models.foreground = vec!["foreground".into()];
    config.models.background = vec!["background".into()];
    let path = out.join("config.toml");
    std::fs::write(&path, config.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "wrote {foreground} foreground and {background} background models; config at {}",
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            config,
            out,
            num_images,
            seed,
            mode,
            background,
            fg_models,
            bg_models,
            real_images,
            workers,
            resume,
        } => {
            let config = build_config(config.as_deref(), mode, background, fg_models, bg_models, real_images)?;
            let options = GenerateOptions {
                out_dir: out.clone(),
                num_images,
                seed,
                resume,
                workers: workers.unwrap_or(config.generation.workers),
            };
            let manifest = run_generation(&config, &options)?;
            let annotations: usize = manifest.images.iter().map(|r| r.annotation_count).sum();
            println!(
                "{} images, {annotations} annotations, {} skipped items in {}",
                manifest.images.len(),
                manifest.skipped.len(),
                out.display()
            );
        }
        Command::Validate { dir } => {
            let report = validate_dataset(&dir)?;
            for p in &report.problems {
                println!("problem: {p}");
            }
            println!(
                "{} images, {} annotations, {} occluders, {} problems",
                report.images,
                report.annotations,
                report.occluders,
                report.problems.len()
            );
            if !report.is_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Preview { dir, out, limit } => {
            let written = write_previews(&dir, &out, limit)?;
            println!("wrote {} previews to {}", written.len(), out.display());
        }
        Command::Replay { manifest, out, workers } => {
            let m = replay(&manifest, &out, workers)?;
            println!("regenerated {} images in {}", m.images.len(), out.display());
        }
        Command::MakeAssets {
            out,
            foreground,
            background,
            seed,
            texture_size,
        } => make_assets(&out, foreground, background, seed, texture_size)?,
        Command::DefaultConfig => print!("{}", Config::default().to_toml()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
