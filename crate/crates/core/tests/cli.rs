use std::path::Path;
use std::process::{Command, Output};

use mhlayout::layout::LayoutJson;
use mhlayout::metrics::iou3d;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhlayout"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str, walls: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let png = dir.join(format!("room{seed}.png"));
    let gt = dir.join(format!("room{seed}.json"));
    ok(&[
        "synth", "--seed", seed, "--walls", walls, "--width", "512", "--png", p(&png), "--gt", p(&gt),
    ]);
    (png, gt)
}

#[test]
fn oracle_estimate_recovers_synthetic_room() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = synth(dir.path(), "3", "6");
    let out = dir.path().join("est.json");
    ok(&["estimate", "--detector", "oracle", "--gt", p(&gt), "-o", p(&out)]);
    let iou = iou3d(&LayoutJson::read(&out).unwrap(), &LayoutJson::read(&gt).unwrap());
    assert!(iou >= 0.98, "iou {iou}");
}

#[test]
fn estimate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (png, _) = synth(dir.path(), "8", "4");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["estimate", p(&png), "--size", "256", "-o", p(&a)]);
    ok(&["estimate", p(&png), "--size", "256", "-o", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn eval_of_identical_layouts_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = synth(dir.path(), "1", "8");
    let out = ok(&["eval", p(&gt), p(&gt), "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["iou3d"], 1.0);
    assert_eq!(v["iou2d"], 1.0);
    assert_eq!(v["corner_error"], 0.0);
    assert_eq!(v["pixel_error"], 0.0);
    assert_eq!(v["delta_1"], 1.0);
}

#[test]
fn cubemap_writes_tiles_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (png, _) = synth(dir.path(), "2", "4");
    let tiles = dir.path().join("tiles");
    ok(&["cubemap", p(&png), p(&tiles), "--size", "64"]);
    let manifest: Value = serde_json::from_slice(&std::fs::read(tiles.join("manifest.json")).unwrap()).unwrap();
    let faces = manifest["faces"].as_array().unwrap();
    assert_eq!(faces.len(), 6);
    for f in faces {
        let img = image::open(tiles.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!((img.width(), img.height()), (64, 64));
    }
}

#[test]
fn plots_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (png, gt) = synth(dir.path(), "4", "4");
    let lines = dir.path().join("lines.json");
    let vectors = dir.path().join("vectors.json");
    ok(&[
        "detect", p(&png), "--size", "128", "-o", p(&lines), "--vectors", p(&vectors),
    ]);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let heat = dir.path().join(format!("heat{i}.png"));
        let over = dir.path().join(format!("over{i}.png"));
        ok(&["plot", "heatmap", p(&vectors), "-o", p(&heat)]);
        ok(&["plot", "overlay", p(&png), p(&gt), "-o", p(&over)]);
        outputs.push((std::fs::read(heat).unwrap(), std::fs::read(over).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.png");
    let out = dir.path().join("o.json");
    assert_eq!(run(&["estimate", p(&missing), "-o", p(&out)]).status.code(), Some(3));
    assert_eq!(run(&["estimate", "--no-such-flag"]).status.code(), Some(2));
    let (png, _) = synth(dir.path(), "5", "4");
    assert_eq!(
        run(&["estimate", p(&png), "--bin-scale", "3", "-o", p(&out)]).status.code(),
        Some(2)
    );
}
