use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reprostitch::io::{read_pmap, write_png};
use reprostitch::synth::{
    base_camera, generate_pair, write_dataset, GeneratedItem, ParallaxMode, SceneSpec, SynthConfig,
};
use serde_json::Value;
use tempfile::TempDir;

fn pis3r(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pis3r")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = "[synth]\nscenes = 2\nper_scene = 2\nwidth = 64\nheight = 64\n";

fn synth_small(dir: &Path) -> PathBuf {
    fs::write(dir.join("run.toml"), SMALL).unwrap();
    let o = pis3r(&["synth", "--config", "run.toml", "--seed", "3", "--out", "ds"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("ds")
}

/// One-item dataset built through the library, so tests choose the scene.
fn single_item(root: &Path, scene: &SceneSpec, mode: ParallaxMode, seed: u64) -> PathBuf {
    let data = generate_pair(scene, &base_camera(96, 96).unwrap(), mode, seed).unwrap();
    let item = GeneratedItem { scene: "scene_000".into(), item: "item_000".into(), data };
    write_dataset(root, &SynthConfig::default(), &[item]).unwrap();
    root.join("scene_000/item_000")
}

#[test]
fn synth_writes_every_item_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    let manifest = json(ds.join("manifest.json"));
    let items = manifest["items"].as_array().unwrap();
    assert_eq!(items.len(), 4);
    for it in items {
        let dir = ds.join(it["id"].as_str().unwrap());
        for f in ["ref.png", "tgt.png", "gt.png", "ref.pmap", "tgt.pmap", "cameras.json"] {
            assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
        }
    }
    let o = pis3r(&["synth", "--config", "run.toml", "--seed", "3", "--out", "ds2"], tmp.path());
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(ds.join("manifest.json")).unwrap(), fs::read(tmp.path().join("ds2/manifest.json")).unwrap());
    let a = fs::read(ds.join("scene_001/item_001/tgt.png")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("ds2/scene_001/item_001/tgt.png")).unwrap());
}

#[test]
fn synth_into_unwritable_location_exits_2() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("file"), "x").unwrap();
    let o = pis3r(&["synth", "--out", "file/sub"], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn stitch_item_writes_outputs_and_report() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    let o = pis3r(&["stitch", ds.join("scene_000/item_001").to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in ["stitched.png", "holes.png", "depth.pmap", "stitch_report.json", "stitched_alt.png", "holes_alt.png"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let r = json(out.join("stitch_report.json"));
    let hf = r["hole_fraction"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&hf));
    let (w, h) = (r["canvas"]["width"].as_u64().unwrap(), r["canvas"]["height"].as_u64().unwrap());
    assert!(w >= 64 && h >= 64);
    assert_eq!(r["method"], "pis3r");
    assert_eq!(r["config"]["reference"], 0);
    let depth = read_pmap(&out.join("depth.pmap")).unwrap();
    assert_eq!((depth.width as u64, depth.height as u64, depth.channels), (w, h, 1));
    let img = image::open(out.join("stitched.png")).unwrap();
    assert_eq!((img.width() as u64, img.height() as u64), (w, h));
}

fn files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn stitch_is_deterministic_across_job_counts() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    let ds = ds.to_str().unwrap();
    assert_eq!(code(&pis3r(&["stitch", ds, "--jobs", "1", "--out", "a"], tmp.path())), 0);
    let cfg = "jobs = 4\n";
    fs::write(tmp.path().join("jobs.toml"), cfg).unwrap();
    assert_eq!(code(&pis3r(&["stitch", ds, "--config", "jobs.toml", "--out", "b"], tmp.path())), 0);
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert_eq!(a.len(), b.len());
    for ((pa, da), (pb, db)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        if pa.ends_with("stitch_report.json") {
            let (mut ja, mut jb): (Value, Value) =
                (serde_json::from_slice(da).unwrap(), serde_json::from_slice(db).unwrap());
            assert_eq!((ja["config"]["jobs"].take(), jb["config"]["jobs"].take()), (1.into(), 4.into()));
            assert_eq!(ja, jb);
        } else {
            assert!(da == db, "{} differs", pa.display());
        }
    }
}

#[test]
fn baseline_stitches_a_planar_scene() {
    let tmp = TempDir::new().unwrap();
    let item = single_item(&tmp.path().join("ds"), &SceneSpec::planar(6.0, 11), ParallaxMode::Slight, 11);
    let o = pis3r(&["stitch", item.to_str().unwrap(), "--method", "homography-baseline", "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(tmp.path().join("out/stitch_report.json"));
    assert_eq!(r["method"], "homography-baseline");
    assert!(r["hole_fraction"].as_f64().unwrap() < 1.0);
}

#[test]
fn missing_pmap_exits_3_naming_the_file() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    let item = ds.join("scene_000/item_000");
    fs::remove_file(item.join("tgt.pmap")).unwrap();
    let o = pis3r(&["stitch", item.to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("tgt.pmap"), "{}", stderr(&o));
}

/// Copies each item's ground truth in as its stitched output.
fn perfect_stitches(ds: &Path, out: &Path) {
    for it in json(ds.join("manifest.json"))["items"].as_array().unwrap() {
        let dir = out.join(it["id"].as_str().unwrap());
        fs::create_dir_all(&dir).unwrap();
        fs::copy(ds.join(it["files"]["gt"].as_str().unwrap()), dir.join("stitched.png")).unwrap();
    }
}

#[test]
fn perfect_stitches_score_at_the_cap() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    perfect_stitches(&ds, &tmp.path().join("st"));
    let o = pis3r(&["eval", "ds", "st", "--out", "ev"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(tmp.path().join("ev/eval_report.json"));
    assert_eq!(r["aggregate"]["rsr"].as_f64().unwrap(), 100.0);
    assert_eq!(r["aggregate"]["psnr_mean"].as_f64().unwrap(), 99.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("RSR 100.0%"));
    let csv = fs::read_to_string(tmp.path().join("ev/eval_pairs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn one_corrupted_stitch_in_ten_gives_rsr_90() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.toml"), "[synth]\nscenes = 5\nper_scene = 2\nwidth = 64\nheight = 64\n").unwrap();
    assert_eq!(code(&pis3r(&["synth", "--config", "run.toml", "--out", "ds"], tmp.path())), 0);
    let (ds, st) = (tmp.path().join("ds"), tmp.path().join("st"));
    perfect_stitches(&ds, &st);
    let flat = image::RgbImage::from_pixel(128, 128, image::Rgb([90, 90, 90]));
    write_png(&st.join("scene_002/item_001/stitched.png"), &flat).unwrap();
    let o = pis3r(&["eval", "ds", "st", "--out", "ev", "--seed", "4"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(tmp.path().join("ev/eval_report.json"));
    assert_eq!(r["aggregate"]["pairs"], 10);
    assert_eq!(r["aggregate"]["rsr"].as_f64().unwrap(), 90.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("RSR 90.0%"));
    let failed: Vec<&Value> =
        r["pairs"].as_array().unwrap().iter().filter(|p| p["metrics"]["registration_ok"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["item"], "scene_002/item_001");
    assert!(failed[0]["metrics"]["psnr"].is_null());
    assert_eq!(r["config_echo"]["eval"]["registration"]["seed"], 4);
}

#[test]
fn eval_lists_missing_outputs_and_exits_4() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    perfect_stitches(&ds, &tmp.path().join("st"));
    fs::remove_file(tmp.path().join("st/scene_001/item_000/stitched.png")).unwrap();
    let o = pis3r(&["eval", "ds", "st", "--out", "ev"], tmp.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("scene_001/item_000/stitched.png"), "{}", stderr(&o));
}

#[test]
fn empty_manifest_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    fs::create_dir_all(&ds).unwrap();
    let cfg = serde_json::to_string(&SynthConfig::default()).unwrap();
    fs::write(ds.join("manifest.json"), format!("{{\"config\": {cfg}, \"items\": []}}")).unwrap();
    let o = pis3r(&["eval", "ds", "ds", "--out", "ev"], tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn pipeline_evaluates_its_own_stitches() {
    let tmp = TempDir::new().unwrap();
    synth_small(tmp.path());
    assert_eq!(code(&pis3r(&["stitch", "ds", "--out", "st"], tmp.path())), 0);
    let o = pis3r(&["eval", "ds", "st", "--out", "ev"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(tmp.path().join("ev/eval_report.json"));
    let ids: Vec<&str> = r["pairs"].as_array().unwrap().iter().map(|p| p["item"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert!(r["aggregate"]["psnr_mean"].as_f64().unwrap() > 10.0);
    assert_eq!(r["config_echo"]["method"], "pis3r");
}

fn classify(mode: ParallaxMode, seed: u64) -> (i32, Value) {
    let tmp = TempDir::new().unwrap();
    let item = single_item(&tmp.path().join("ds"), &SceneSpec::random(seed), mode, seed);
    let o = pis3r(
        &["classify", item.join("cameras.json").to_str().unwrap(), item.join("ref.pmap").to_str().unwrap()],
        tmp.path(),
    );
    let v = if code(&o) == 0 { serde_json::from_slice(&o.stdout).unwrap() } else { Value::Null };
    (code(&o), v)
}

#[test]
fn classify_reports_the_construction_mode() {
    let (c, v) = classify(ParallaxMode::PureRotation, 21);
    assert_eq!(c, 0);
    assert_eq!(v["class"], "pure-rotation");
    assert_eq!(v["p_level"], 0.0);
    let (c, v) = classify(ParallaxMode::VeryLarge, 22);
    assert_eq!(c, 0);
    assert_eq!(v["class"], "very-large");
    assert!(v["p_level"].as_f64().unwrap() >= 0.25);
}

#[test]
fn classify_rejects_a_truncated_pmap() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    let item = ds.join("scene_000/item_001");
    let bytes = fs::read(item.join("ref.pmap")).unwrap();
    fs::write(tmp.path().join("cut.pmap"), &bytes[..bytes.len() / 2]).unwrap();
    let o = pis3r(&["classify", item.join("cameras.json").to_str().unwrap(), "cut.pmap"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("cut.pmap"));
}

#[test]
fn classify_writes_json_when_asked() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path());
    let item = ds.join("scene_000/item_001");
    let o = pis3r(
        &[
            "classify",
            item.join("cameras.json").to_str().unwrap(),
            item.join("ref.pmap").to_str().unwrap(),
            "--out",
            "c",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    let v = json(tmp.path().join("c/parallax.json"));
    assert_eq!(v, serde_json::from_slice::<Value>(&o.stdout).unwrap());
    assert_eq!(v["thresholds"]["tau2"], 0.25);
}

#[test]
fn rddm_check_passes() {
    let tmp = TempDir::new().unwrap();
    let o = pis3r(&["rddm-check", "--seed", "7"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn bad_config_and_flags_exit_3() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.toml"), "methd = 1").unwrap();
    assert_eq!(code(&pis3r(&["rddm-check", "--config", "bad.toml"], tmp.path())), 3);
    assert_eq!(code(&pis3r(&["rddm-check", "--config", "absent.toml"], tmp.path())), 3);
    assert_eq!(code(&pis3r(&["stitch", "x", "--method", "nope", "--out", "o"], tmp.path())), 3);
    assert_eq!(code(&pis3r(&["synth"], tmp.path())), 3);
    assert_eq!(code(&pis3r(&["--help"], tmp.path())), 0);
}
