mod common;

use std::path::Path;

use common::{shrink_camera, Fixture};
use synthgen::config::{BackgroundMode, PoseMode};
use synthgen::dataset::{
    read_label, replay, run_generation, validate_dataset, DatasetManifest, GenerateError, GenerateOptions, COCO_FILE,
    MANIFEST_FILE,
};

fn opts(out: &Path, num_images: u64, seed: u64, resume: bool, workers: usize) -> GenerateOptions {
    GenerateOptions {
        out_dir: out.to_path_buf(),
        num_images,
        seed,
        resume,
        workers,
    }
}

fn small_fixture(seed: u64) -> Fixture {
    let mut fx = Fixture::new(4, 6, seed);
    shrink_camera(&mut fx.config, 4.0);
    fx.config.generation.chunk_size = 2;
    fx
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for name in names {
        let (x, y) = (
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
        );
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn small_dataset_validates() {
    let mut fx = Fixture::new(4, 6, 1);
    shrink_camera(&mut fx.config, 3.0);
    let out = fx.out("ds");
    let m = run_generation(&fx.config, &opts(&out, 6, 3, false, 1)).unwrap();
    assert_eq!(m.images.len(), 6);
    assert!(m.is_complete());
    let report = validate_dataset(&out).unwrap();
    assert!(report.is_ok(), "{:#?}", report.problems);
    assert_eq!(report.images, 6);
    assert!(report.annotations > 0);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let fx = small_fixture(2);
    let (split, whole) = (fx.out("split"), fx.out("whole"));
    run_generation(&fx.config, &opts(&split, 3, 7, false, 1)).unwrap();
    let m = run_generation(&fx.config, &opts(&split, 7, 7, true, 1)).unwrap();
    assert_eq!(m.images.len(), 7);
    run_generation(&fx.config, &opts(&whole, 7, 7, false, 1)).unwrap();
    same_files(
        &split,
        &whole,
        &[MANIFEST_FILE, COCO_FILE, "images/000006.png", "labels/000004.json"],
    );
}

#[test]
fn resume_guards() {
    let fx = small_fixture(3);
    let out = fx.out("ds");
    run_generation(&fx.config, &opts(&out, 2, 1, false, 1)).unwrap();
    let err = run_generation(&fx.config, &opts(&out, 4, 1, false, 1)).unwrap_err();
    assert!(matches!(err, GenerateError::OutputExists(_)), "{err}");
    let err = run_generation(&fx.config, &opts(&out, 4, 2, true, 1)).unwrap_err();
    assert!(matches!(err, GenerateError::ResumeMismatch(_)), "{err}");
    let mut changed = fx.config.clone();
    changed.foreground.max_objects = 3;
    let err = run_generation(&changed, &opts(&out, 4, 1, true, 1)).unwrap_err();
    assert!(matches!(err, GenerateError::ResumeMismatch(_)), "{err}");
    // The worker count is not part of the recorded config.
    let mut threads = fx.config.clone();
    threads.generation.workers = 3;
    run_generation(&threads, &opts(&out, 3, 1, true, 0)).unwrap();
}

#[test]
fn worker_count_does_not_change_output() {
    let fx = small_fixture(4);
    let (one, four) = (fx.out("one"), fx.out("four"));
    run_generation(&fx.config, &opts(&one, 5, 11, false, 1)).unwrap();
    run_generation(&fx.config, &opts(&four, 5, 11, false, 4)).unwrap();
    same_files(
        &one,
        &four,
        &[MANIFEST_FILE, COCO_FILE, "images/000000.png", "images/000004.png"],
    );
}

#[test]
fn replay_reproduces_dataset() {
    let fx = small_fixture(5);
    let (out, again) = (fx.out("ds"), fx.out("again"));
    run_generation(&fx.config, &opts(&out, 4, 13, false, 1)).unwrap();
    replay(&out.join(MANIFEST_FILE), &again, 2).unwrap();
    same_files(&out, &again, &[MANIFEST_FILE, COCO_FILE, "images/000003.png"]);
}

#[test]
fn curriculum_continues_across_images() {
    let fx = small_fixture(6);
    let out = fx.out("ds");
    let m = run_generation(&fx.config, &opts(&out, 4, 17, false, 1)).unwrap();
    // Placed items follow the schedule without gaps when nothing is skipped.
    assert!(m.skipped.is_empty());
    let items: Vec<_> = m.images.iter().flat_map(|r| r.items.iter().copied()).collect();
    let mut cursor = synthgen::curriculum::CurriculumCursor::default();
    let space = fx.config.pose_space.build().unwrap();
    for item in &items {
        let (expected, next) = cursor.next(4, &space);
        assert_eq!(*item, expected);
        cursor = next;
    }
    assert_eq!(m.cursor, cursor);
    let first = &items[0].pose_provenance;
    assert_eq!((first.scale_index, first.view_index, first.inplane_index), (0, 0, 0));
}

#[test]
fn random_mode_dataset_validates() {
    let mut fx = small_fixture(7);
    fx.config.generation.mode = PoseMode::Random;
    let out = fx.out("ds");
    let m = run_generation(&fx.config, &opts(&out, 4, 19, false, 1)).unwrap();
    assert_eq!(m.cursor, Default::default());
    let report = validate_dataset(&out).unwrap();
    assert!(report.is_ok(), "{:#?}", report.problems);
}

#[test]
fn mixed_mode_records_area_fractions() {
    let mut fx = small_fixture(8).with_real_images(2);
    fx.config.generation.background = BackgroundMode::Mixed;
    let out = fx.out("ds");
    run_generation(&fx.config, &opts(&out, 4, 23, false, 1)).unwrap();
    let report = validate_dataset(&out).unwrap();
    assert!(report.is_ok(), "{:#?}", report.problems);
    for index in 0..4 {
        let label = read_label(&out, index).unwrap();
        assert!(label.real_background.is_some());
        let a = label.area_fractions.unwrap();
        assert!((a.foreground + a.synthetic + a.real - 1.0).abs() < 1e-9);
        assert!(a.real > 0.3, "{a:?}");
    }
}

#[test]
fn mixed_mode_without_photos_fails() {
    let mut fx = small_fixture(9);
    fx.config.generation.background = BackgroundMode::Mixed;
    assert!(run_generation(&fx.config, &opts(&fx.out("ds"), 1, 1, false, 1)).is_err());
}

#[test]
fn manifest_round_trips() {
    let fx = small_fixture(10);
    let out = fx.out("ds");
    let m = run_generation(&fx.config, &opts(&out, 2, 29, false, 1)).unwrap();
    let text = std::fs::read_to_string(out.join(MANIFEST_FILE)).unwrap();
    let back: DatasetManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
}
