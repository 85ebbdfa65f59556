//! The `nsd` binary, driven as a subprocess.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use nsd::eval::{interior_scores, load_sharp_dir, parse_manifest, simulate_pairs, SimulationConfig};
use nsd::image_io::load_image;
use nsd::lcnn::Drk;

fn nsd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsd"))
        .args(args)
        .current_dir(cwd)
        .env("NSD_LOG", "quiet")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_rkg_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(nsd(&["gen-rkg", "--count", "2", "--seed", "7", "--out", "a.rkg"], d));
    ok(nsd(&["gen-rkg", "--count", "2", "--seed", "7", "--out", "b.rkg"], d));
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.rkg"), read("b.rkg"));
    let cfg = std::fs::read_to_string(d.join("a.rkg.config.txt")).unwrap();
    assert!(cfg.contains("seed=7\n") && cfg.contains("rkg.count=2\n"), "{cfg}");
}

#[test]
fn deblur_with_delta_kernel_is_lossless() {
    let scenes = common::scene_dir(1, 48);
    let d = scenes.path();
    Drk::delta(11).unwrap().grid().save_grd(d.join("delta.grd")).unwrap();
    ok(nsd(
        &["deblur", "--input", "scene00.png", "--drk", "delta.grd", "--out", "out.png"],
        d,
    ));
    let a = load_image(d.join("scene00.png")).unwrap();
    let b = load_image(d.join("out.png")).unwrap();
    assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
}

#[test]
fn sr_output_has_scaled_dims() {
    let scenes = common::scene_dir(1, 40);
    let d = scenes.path();
    Drk::delta(11).unwrap().grid().save_grd(d.join("delta.grd")).unwrap();
    let stdout = ok(nsd(
        &["sr", "--input", "scene00.png", "--scale", "2", "--drk", "delta.grd", "--out", "up.png"],
        d,
    ));
    assert_eq!(stdout.trim(), "up.png\t80x80");
    assert_eq!(load_image(d.join("up.png")).unwrap().dims(), (80, 80));
}

#[test]
fn identity_eval_reports_blurred_baseline() {
    let scenes = common::scene_dir(2, 64);
    let d = scenes.path();
    ok(nsd(&["eval", "--seed", "3", "--sharp-dir", ".", "--method", "identity", "--out", "r.csv"], d));
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();

    let pairs = simulate_pairs(&load_sharp_dir(d).unwrap(), &SimulationConfig::with_seed(3)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), nsd::eval::REPORT_CSV_HEADER);
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], "identity");
        if f[1] == "all" {
            continue;
        }
        let size: usize = f[1].parse().unwrap();
        let scores: Vec<(f64, f64)> = pairs
            .iter()
            .filter(|p| p.kernel_size == size)
            .map(|p| interior_scores(&p.blurred, &p.sharp).unwrap())
            .collect();
        assert_eq!(f[2].parse::<usize>().unwrap(), scores.len());
        let n = scores.len() as f64;
        let psnr = scores.iter().map(|s| s.0).sum::<f64>() / n;
        let ssim = scores.iter().map(|s| s.1).sum::<f64>() / n;
        assert!((f[3].parse::<f64>().unwrap() - psnr).abs() <= 1e-6, "{line}");
        assert!((f[5].parse::<f64>().unwrap() - ssim).abs() <= 1e-6, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

#[test]
fn simulate_is_idempotent_and_manifest_parses() {
    let scenes = common::scene_dir(2, 48);
    let d = scenes.path();
    for out in ["s1", "s2"] {
        ok(nsd(&["simulate", "--seed", "4", "--sharp-dir", ".", "--out-dir", out], d));
    }
    let m1 = std::fs::read_to_string(d.join("s1/manifest.tsv")).unwrap();
    let m2 = std::fs::read_to_string(d.join("s2/manifest.tsv")).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(parse_manifest(&m1).unwrap().len(), 10);
    let names = |s: &str| {
        let mut v: Vec<_> = std::fs::read_dir(d.join(s)).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names("s1"), names("s2"));
    for n in names("s1") {
        assert_eq!(std::fs::read(d.join("s1").join(&n)).unwrap(), std::fs::read(d.join("s2").join(&n)).unwrap());
    }
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    lines[0].to_string()
}

#[test]
fn failures_print_one_coded_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = nsd(&["gen-rkg", "--count", "2", "--out", "a.rkg"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out).starts_with("config: "));
    assert!(!d.join("a.rkg").exists());

    let out = nsd(&["train", "--seed", "1", "--rkg", "missing.rkg", "--out", "m.lcnn"], d);
    assert!(error_line(&out).starts_with("io: "));

    std::fs::write(d.join("junk.rkg"), b"not a gallery").unwrap();
    let out = nsd(&["train", "--seed", "1", "--rkg", "junk.rkg", "--out", "m.lcnn"], d);
    assert!(error_line(&out).starts_with("format: "));

    let out = nsd(&["gen-rkg", "--seed", "1", "--set", "rkg.colour=3"], d);
    assert!(error_line(&out).starts_with("config: "));
}
