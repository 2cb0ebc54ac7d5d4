use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use azsr_cli::infer::MapMeta;
use azsr_cli::label::LabelReport;
use azsr_cli::simulate::{FrameEntry, SceneManifest, MANIFEST};
use azsr_core::io::{load_adc_cube, load_csv, save_adc_cube, CubeHeader};
use azsr_core::scene::simulate_adc_cube;
use azsr_core::{AdcCube, ArrayGeometry, SceneSpec, TargetSpec};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SMALL: &str = r#"{
  "geometry": {"n_ch": 10}, "n_fast": 32, "n_slow": 8, "range_trunc": 16,
  "scene_policy": {"range_bins": 16, "doppler_bins": 8},
  "dataset": {"small": 3},
  "train": {"epochs": 1, "batch_size": 64},
  "bench": {"vectors": 40, "warmup": 4, "frames": 1}
}"#;

fn azsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_azsr")).args(args).output().expect("spawn azsr")
}

fn ok(args: &[&str]) -> Output {
    let out = azsr(args);
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    azsr(args).status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn digest(p: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(p).unwrap()).to_vec()
}

fn dir_digests(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), digest(&p)))
        .collect();
    v.sort();
    v
}

/// Writes hand-built cubes with a manifest, as `simulate` would.
fn write_frames(dir: &Path, geom: &ArrayGeometry, cubes: &[(&str, AdcCube, SceneSpec)]) {
    fs::create_dir_all(dir).unwrap();
    let mut frames = Vec::new();
    for (name, cube, scene) in cubes {
        let file = format!("{name}.cube");
        save_adc_cube(&dir.join(&file), cube, &CubeHeader::adc(cube, &geom.id())).unwrap();
        frames.push(FrameEntry {
            frame: name.to_string(),
            file,
            seed: 0,
            scene: scene.clone(),
        });
    }
    let manifest = SceneManifest {
        format: "azsr-scenes".into(),
        config_hash: String::new(),
        toolkit_version: String::new(),
        geometry_id: geom.id(),
        n_ch: geom.n_ch(),
        n_fast: cubes[0].1.n_fast,
        n_slow: cubes[0].1.n_slow,
        frames,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string(&manifest).unwrap()).unwrap();
}

fn small_pipeline(tmp: &Path, cfg: &str) -> (PathBuf, PathBuf) {
    let cubes = tmp.join("cubes");
    let labels = tmp.join("labels");
    let models = tmp.join("models");
    ok(&["simulate", "--config", cfg, "--seed", "7", "--workers", "1", "--out", s(&cubes)]);
    ok(&["label", "--config", cfg, "--seed", "7", "--workers", "1", "--input", s(&cubes), "--out", s(&labels)]);
    ok(&[
        "train", "--config", cfg, "--seed", "7", "--workers", "1", "--input",
        s(&labels.join("records.bin")), "--out", s(&models),
    ]);
    (cubes, models)
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for d in [&a, &b] {
        ok(&["simulate", "--config", &cfg, "--seed", "7", "--out", s(d)]);
    }
    ok(&["simulate", "--config", &cfg, "--seed", "8", "--out", s(&c)]);
    assert_eq!(dir_digests(&a), dir_digests(&b));
    assert_ne!(dir_digests(&a), dir_digests(&c));
    assert_eq!(dir_digests(&a).len(), 4);
    let m: SceneManifest = serde_json::from_str(&fs::read_to_string(a.join(MANIFEST)).unwrap()).unwrap();
    assert_eq!(m.frames.len(), 3);
    assert!(m.frames.iter().all(|f| !f.scene.targets.is_empty()));
}

#[test]
fn preset_86_defaults_produce_full_size_cubes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"dataset": {"small": 1}}"#);
    let out = tmp.path().join("cubes");
    ok(&["simulate", "--config", &cfg, "--out", s(&out)]);
    let (cube, header) = load_adc_cube(&out.join("frame_00000.cube")).unwrap();
    assert_eq!(cube.dims(), [256, 64, 86]);
    assert_eq!(header.geometry_id, "ula86");
    assert!(header.config_hash.is_some());
}

#[test]
fn invalid_inputs_exit_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let zero_k = write_config(tmp.path(), "k.json", r#"{"scene_policy": {"k_max": 0}}"#);
    assert_eq!(code(&["simulate", "--config", &zero_k, "--out", s(&out)]), 2);
    let unknown = write_config(tmp.path(), "u.json", r#"{"colour": 3}"#);
    assert_eq!(code(&["simulate", "--config", &unknown, "--out", s(&out)]), 2);
    let bad_n = write_config(tmp.path(), "n.json", r#"{"geometry": {"n_ch": 12}}"#);
    assert_eq!(code(&["simulate", "--config", &bad_n, "--out", s(&out)]), 2);
    assert_eq!(code(&["simulate", "--config", "/nonexistent/c.json", "--out", s(&out)]), 2);
    assert_eq!(code(&["simulate", "--workers", "0", "--out", s(&out)]), 2);
    assert_eq!(code(&["simulate"]), 2);
    assert_eq!(code(&["frobnicate", "--out", s(&out)]), 2);
    assert_eq!(code(&["label", "--input", s(&tmp.path().join("missing")), "--out", s(&out)]), 2);
}

#[test]
fn label_counts_every_bin_and_drops_zero_alpha() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"geometry": {"n_ch": 10}}"#);
    let geom = ArrayGeometry::ula(10).unwrap();
    let scene = SceneSpec::noiseless(vec![TargetSpec::at(0.25, Complex64::new(1.0, 0.0)).with_bins(40.0, 10.0)]);
    let target = simulate_adc_cube(&geom, &scene, 256, 64).unwrap();
    let zero = AdcCube::zeros(256, 64, 10);

    let single = tmp.path().join("single");
    write_frames(&single, &geom, &[("f0", target, scene)]);
    let out = tmp.path().join("l1");
    ok(&["label", "--config", &cfg, "--input", s(&single), "--out", s(&out)]);
    let r: LabelReport = serde_json::from_str(&fs::read_to_string(out.join("label_report.json")).unwrap()).unwrap();
    assert_eq!(r.candidate_bins, 100 * 64);
    assert_eq!(r.records + r.dropped_zero_alpha, 6400);
    assert!(r.records >= 1 && r.failures.is_empty());

    let empty = tmp.path().join("empty");
    write_frames(&empty, &geom, &[("z0", zero, SceneSpec::noiseless(vec![]))]);
    let out0 = tmp.path().join("l0");
    ok(&["label", "--config", &cfg, "--input", s(&empty), "--out", s(&out0)]);
    let r0: LabelReport = serde_json::from_str(&fs::read_to_string(out0.join("label_report.json")).unwrap()).unwrap();
    assert_eq!((r0.records, r0.dropped_zero_alpha), (0, 6400));
}

#[test]
fn label_is_reproducible_and_worker_independent() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let cubes = tmp.path().join("cubes");
    ok(&["simulate", "--config", &cfg, "--out", s(&cubes)]);
    let mut hashes = Vec::new();
    for (i, w) in ["1", "1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("l{i}"));
        ok(&["label", "--config", &cfg, "--workers", w, "--input", s(&cubes), "--out", s(&out)]);
        hashes.push(digest(&out.join("records.bin")));
    }
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0], hashes[2]);
}

#[test]
fn label_rejects_cubes_of_another_geometry() {
    let tmp = TempDir::new().unwrap();
    let cfg10 = write_config(tmp.path(), "c10.json", SMALL);
    let cfg40 = write_config(tmp.path(), "c40.json", &SMALL.replace("\"n_ch\": 10", "\"n_ch\": 40"));
    let cubes = tmp.path().join("cubes");
    ok(&["simulate", "--config", &cfg10, "--out", s(&cubes)]);
    assert_eq!(code(&["label", "--config", &cfg40, "--input", s(&cubes), "--out", s(&tmp.path().join("l"))]), 2);
}

#[test]
fn train_emits_models_curves_and_resumes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let (_, models) = small_pipeline(tmp.path(), &cfg);
    for kind in ["mse", "snr_weighted"] {
        assert!(models.join(format!("model_{kind}.bin")).exists());
        let curve = fs::read_to_string(models.join(format!("loss_{kind}.csv"))).unwrap();
        assert_eq!(curve.lines().count(), 2, "{curve}");
    }

    let records = tmp.path().join("labels/records.bin");
    let three = write_config(
        tmp.path(),
        "three.json",
        &SMALL.replace(r#""epochs": 1"#, r#""epochs": 3, "checkpoint_every": 1"#).replace("\"dataset\"", "\"loss\": \"mse\", \"dataset\""),
    );
    let two = three.replace("three", "two");
    fs::write(&two, fs::read_to_string(&three).unwrap().replace(r#""epochs": 3"#, r#""epochs": 2"#)).unwrap();

    let full = tmp.path().join("full");
    ok(&["train", "--config", &three, "--seed", "7", "--workers", "1", "--input", s(&records), "--out", s(&full)]);
    let part = tmp.path().join("part");
    ok(&["train", "--config", &two, "--seed", "7", "--workers", "1", "--input", s(&records), "--out", s(&part)]);
    ok(&[
        "train", "--config", &three, "--seed", "7", "--workers", "1", "--input", s(&records), "--out", s(&part),
        "--resume", s(&part.join("checkpoint_mse.bin")),
    ]);
    let curve = fs::read_to_string(part.join("loss_mse.csv")).unwrap();
    let epochs: Vec<&str> = curve.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs, ["1", "2", "3"]);
    assert_eq!(curve, fs::read_to_string(full.join("loss_mse.csv")).unwrap());
    assert_eq!(digest(&part.join("model_mse.bin")), digest(&full.join("model_mse.bin")));
}

#[test]
fn train_rejects_records_of_another_geometry() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let cubes = tmp.path().join("cubes");
    let labels = tmp.path().join("labels");
    ok(&["simulate", "--config", &cfg, "--out", s(&cubes)]);
    ok(&["label", "--config", &cfg, "--input", s(&cubes), "--out", s(&labels)]);
    let cfg40 = write_config(tmp.path(), "c40.json", &SMALL.replace("\"n_ch\": 10", "\"n_ch\": 40"));
    let rec = labels.join("records.bin");
    assert_eq!(code(&["train", "--config", &cfg40, "--input", s(&rec), "--out", s(&tmp.path().join("m"))]), 2);
    fs::write(&rec, b"garbage\n").unwrap();
    assert_eq!(code(&["train", "--config", &cfg, "--input", s(&rec), "--out", s(&tmp.path().join("m"))]), 3);
}

#[test]
fn infer_writes_maps_and_sidecars() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let (cubes, models) = small_pipeline(tmp.path(), &cfg);
    let model = models.join("model_snr_weighted.bin");

    let maps = tmp.path().join("maps");
    ok(&["infer", "--config", &cfg, "--input", s(&cubes), "--model", s(&model), "--out", s(&maps)]);
    assert!(maps.join("dbf").is_dir() && maps.join("network").is_dir() && !maps.join("iaa").exists());

    let geom = ArrayGeometry::ula(10).unwrap();
    let zero_dir = tmp.path().join("zero");
    write_frames(&zero_dir, &geom, &[("z", AdcCube::zeros(32, 8, 10), SceneSpec::noiseless(vec![]))]);
    let zmaps = tmp.path().join("zmaps");
    ok(&[
        "infer", "--config", &cfg, "--input", s(&zero_dir.join("z.cube")), "--model", s(&model), "--with-iaa",
        "--out", s(&zmaps),
    ]);
    for est in ["dbf", "network", "iaa"] {
        let map = load_csv(&zmaps.join(est).join("z.csv")).unwrap();
        assert_eq!((map.rows, map.cols), (16, 256));
        assert!(map.data.iter().all(|v| *v == 0.0), "{est}");
        let meta: MapMeta = serde_json::from_str(&fs::read_to_string(zmaps.join(est).join("z.json")).unwrap()).unwrap();
        assert_eq!(meta.estimator, est);
        assert_eq!(meta.geometry_id, "ula10");
        assert!(!meta.config_hash.is_empty() && !meta.toolkit_version.is_empty());
        assert_eq!(meta.model.is_some(), est == "network");
        assert!(zmaps.join(est).join("z.pgm").exists() && zmaps.join(est).join("z_db.pgm").exists());
    }

    let cfg40 = write_config(tmp.path(), "c40.json", &SMALL.replace("\"n_ch\": 10", "\"n_ch\": 40"));
    assert_eq!(
        code(&["infer", "--config", &cfg40, "--input", s(&cubes), "--model", s(&model), "--out", s(&tmp.path().join("x"))]),
        2
    );
    assert_eq!(code(&["infer", "--config", &cfg40, "--input", s(&cubes), "--out", s(&tmp.path().join("y"))]), 2);
}

#[test]
fn evaluate_pairs_frames_and_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let cubes = tmp.path().join("cubes");
    ok(&["simulate", "--config", &cfg, "--out", s(&cubes)]);
    let maps = tmp.path().join("maps");
    ok(&["infer", "--config", &cfg, "--input", s(&cubes), "--with-iaa", "--out", s(&maps)]);

    let same = tmp.path().join("same");
    let out = ok(&[
        "evaluate", "--config", &cfg, "--truth", s(&maps.join("iaa")), "--pred", s(&maps.join("iaa")), "--out", s(&same),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("NMSE"));
    let csv = fs::read_to_string(same.join("metrics_iaa.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 3 + 1);
    assert!(rows[4].starts_with("mean,"));
    for row in &rows[1..] {
        assert!(row.ends_with(",0.00000000,1.00000000,inf"), "{row}");
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(same.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["reports"][0]["frames"][0]["psnr_db"], "inf");

    let cmp = tmp.path().join("cmp");
    ok(&["evaluate", "--config", &cfg, "--truth", s(&maps.join("iaa")), "--pred", s(&maps.join("dbf")), "--out", s(&cmp)]);
    let table = fs::read_to_string(cmp.join("metrics_table.txt")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("dbf"));

    fs::remove_file(maps.join("dbf/frame_00001.csv")).unwrap();
    let out = azsr(&["evaluate", "--truth", s(&maps.join("iaa")), "--pred", s(&maps.join("dbf")), "--out", s(&cmp)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frame_00001"));

    let meta_path = maps.join("dbf/frame_00000.json");
    let text = fs::read_to_string(&meta_path).unwrap().replace("ula10", "ula40");
    fs::write(&meta_path, text).unwrap();
    fs::remove_file(maps.join("iaa/frame_00001.csv")).unwrap();
    assert_eq!(
        code(&["evaluate", "--truth", s(&maps.join("iaa")), "--pred", s(&maps.join("dbf")), "--out", s(&cmp)]),
        2
    );
}

#[test]
fn bench_report_matches_published_schema() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("bench");
    ok(&["bench", "--config", &cfg, "--workers", "1", "--out", s(&out)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bench.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    let names: Vec<&str> = report["per_vector"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["estimator"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["dbf", "iaa", "network"]);
    assert_eq!(report["per_frame"].as_array().unwrap().len(), 3);
    assert_eq!(report["workers"], 1);

    let mut broken = report.clone();
    broken["per_vector"] = serde_json::json!([]);
    assert!(!validator.is_valid(&broken));
}
