use std::path::Path;
use std::process::{Command, Output};

use synthgen::config::Config;

fn synthgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthgen"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run synthgen")
}

fn ok(out: Output) -> String {
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "stdout: {text}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    text
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Procedural assets plus a config shrunk to 240x180 for speed.
fn small_setup(dir: &Path) -> std::path::PathBuf {
    let assets = dir.join("assets");
    ok(synthgen(&[
        "make-assets",
        "--out",
        s(&assets),
        "--foreground",
        "3",
        "--background",
        "6",
        "--texture-size",
        "32",
    ]));
    let mut config = Config::load(&assets.join("config.toml")).unwrap();
    let c = &mut config.camera;
    (c.width, c.height, c.fx, c.fy, c.cx, c.cy) = (240, 180, 200.0, 200.0, 120.0, 90.0);
    config.generation.chunk_size = 2;
    let path = dir.join("small.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

#[test]
fn generate_validate_preview_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let out = dir.path().join("ds");
    let text = ok(synthgen(&[
        "generate",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--num-images",
        "3",
        "--seed",
        "5",
    ]));
    assert!(text.starts_with("3 images"), "{text}");
    assert!(out.join("annotations.json").exists());
    assert!(out.join("images/000002.png").exists());

    let text = ok(synthgen(&["validate", s(&out)]));
    assert!(text.contains("0 problems"), "{text}");

    let previews = dir.path().join("preview");
    ok(synthgen(&["preview", s(&out), "--out", s(&previews), "--limit", "2"]));
    assert_eq!(std::fs::read_dir(&previews).unwrap().count(), 2);

    let again = dir.path().join("replayed");
    ok(synthgen(&["replay", s(&out.join("manifest.json")), "--out", s(&again)]));
    for name in [
        "images/000000.png",
        "images/000002.png",
        "manifest.json",
        "annotations.json",
    ] {
        assert_eq!(
            std::fs::read(out.join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn resume_extends_and_matches_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let split = dir.path().join("split");
    let whole = dir.path().join("whole");
    let gen = |out: &Path, n: &str, extra: &[&str]| {
        let mut args = vec![
            "generate",
            "--config",
            s(&config),
            "--out",
            s(out),
            "--num-images",
            n,
            "--seed",
            "9",
        ];
        args.extend_from_slice(extra);
        synthgen(&args)
    };
    ok(gen(&split, "2", &[]));
    // An existing dataset is never overwritten without --resume.
    assert!(!gen(&split, "4", &[]).status.success());
    ok(gen(&split, "4", &["--resume"]));
    ok(gen(&whole, "4", &[]));
    for name in ["images/000003.png", "manifest.json", "annotations.json"] {
        assert_eq!(
            std::fs::read(split.join(name)).unwrap(),
            std::fs::read(whole.join(name)).unwrap(),
            "{name}"
        );
    }
    // A different seed cannot resume the dataset.
    let out = synthgen(&[
        "generate",
        "--config",
        s(&config),
        "--out",
        s(&split),
        "--num-images",
        "5",
        "--seed",
        "1",
        "--resume",
    ]);
    assert!(!out.status.success());
}

#[test]
fn ablation_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let out = dir.path().join("random");
    ok(synthgen(&[
        "generate",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--num-images",
        "2",
        "--mode",
        "random",
        "--workers",
        "2",
    ]));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["generation"]["mode"], "random");
    assert!(ok(synthgen(&["validate", s(&out)])).contains("0 problems"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // No models anywhere.
    let out = synthgen(&["generate", "--out", s(&dir.path().join("x")), "--num-images", "1"]);
    assert!(!out.status.success());
    // Mixed backgrounds need a photo directory.
    let config = small_setup(dir.path());
    let out = synthgen(&[
        "generate",
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("m")),
        "--background",
        "mixed",
    ]);
    assert!(!out.status.success());
    // Not a dataset.
    assert!(!synthgen(&["validate", s(dir.path())]).status.success());
}

#[test]
fn default_config_round_trips() {
    let text = ok(synthgen(&["default-config"]));
    let parsed = Config::from_toml(&text, Path::new(".")).unwrap();
    assert_eq!(parsed, Config::default());
}
