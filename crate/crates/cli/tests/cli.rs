use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use csc_core::io::{decode_csct, decode_pnm, encode_csct};
use csc_core::{Rng, Tensor3};
use serde_json::Value;

fn csc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csc-forge"))
        .args(args)
        .current_dir(dir)
        .env_remove("CSC_FORGE_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = csc(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn write_model(dir: &Path, layers: &[(&str, &str)]) {
    let layers: Vec<String> = layers
        .iter()
        .map(|(d, rule)| format!(r#"{{"dictionary":"{d}","rule":{rule}}}"#))
        .collect();
    fs::write(
        dir.join("model.json"),
        format!(r#"{{"layers":[{}]}}"#, layers.join(",")),
    )
    .unwrap();
}

#[test]
fn identity_model_with_zero_budget_gives_black_image() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("id.cscd"), csc_core::io::encode_cscd(&csc_core::ConvDictionary::identity())).unwrap();
    write_model(dir, &[("id.cscd", r#"{"kind":"l0","k":0}"#)]);
    ok(dir, &["synth", "--model", "model.json", "--height", "5", "--width", "7", "--out-dir", "out"]);
    let img = decode_pnm(&fs::read(dir.join("out/image.pgm")).unwrap()).unwrap();
    assert_eq!(img.shape(), (5, 7, 1));
    assert!(img.data().iter().all(|&v| v == 0.0));
    let m = manifest(&dir.join("out/manifest.json"));
    assert_eq!(m["subcommand"], "synth");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn synth_reports_the_failing_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["dictgen", "--atoms", "4", "--atom-size", "3", "--channels", "1", "--output", "a.cscd"]);
    ok(dir, &["dictgen", "--atoms", "4", "--atom-size", "3", "--channels", "5", "--output", "b.cscd"]);
    write_model(
        dir,
        &[("a.cscd", r#"{"kind":"l0inf","k":1}"#), ("b.cscd", r#"{"kind":"l0inf","k":1}"#)],
    );
    let out = csc(dir, &["synth", "--model", "model.json", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("layer 2"));
}

#[test]
fn denoise_writes_images_trace_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["testimage", "--height", "24", "--width", "24", "--output", "clean.pgm"]);
    ok(dir, &["denoise", "--input", "clean.pgm", "--sigma", "25", "--rule", "l0inf", "--k", "4", "--atoms", "16", "--iters", "10", "--seed", "7", "--out-dir", "out"]);
    for f in ["noisy.pgm", "best_single.pgm", "best_average.pgm", "trace.csv", "manifest.json"] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    let trace = fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iter,psnr_single,psnr_avg"));
    assert_eq!(trace.lines().count(), 11);
    let m = manifest(&dir.join("out/manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["rule"]["kind"], "l0inf");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn negative_sigma_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["testimage", "--height", "8", "--width", "8", "--output", "clean.pgm"]);
    let out = csc(dir, &["denoise", "--input", "clean.pgm", "--sigma", "-1", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));
    assert!(!dir.join("out").exists());
}

#[test]
fn denoise_manifests_repeat_except_duration() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["testimage", "--height", "16", "--width", "16", "--output", "clean.pgm"]);
    let args = |out: &'static str| {
        ["denoise", "--input", "clean.pgm", "--atoms", "9", "--atom-size", "3", "--iters", "5", "--seed", "7", "--out-dir", out]
    };
    ok(dir, &args("out"));
    fs::rename(dir.join("out"), dir.join("first")).unwrap();
    ok(dir, &args("out"));
    let mut a = manifest(&dir.join("first/manifest.json"));
    let mut b = manifest(&dir.join("out/manifest.json"));
    a.as_object_mut().unwrap().remove("duration_secs");
    b.as_object_mut().unwrap().remove("duration_secs");
    assert_eq!(a, b);
}

#[test]
fn forced_divergence_exits_3_with_partial_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["testimage", "--height", "16", "--width", "16", "--output", "clean.pgm"]);
    let out = csc(dir, &["denoise", "--input", "clean.pgm", "--rule", "l0", "--k", "1000", "--step", "1000", "--iters", "50", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(&dir.join("out/manifest.json"));
    assert_eq!(m["status"], "failed");
    assert!(m["results"]["error"].as_str().unwrap().contains("non-finite"));
    assert!(fs::read_to_string(dir.join("out/trace.csv")).unwrap().lines().count() > 1);
}

#[test]
fn project_with_full_budget_keeps_payload() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let g = Tensor3::random_gaussian(3, 4, 5, &mut Rng::new(1)).unwrap();
    fs::write(dir.join("g.csct"), encode_csct(&g)).unwrap();
    ok(dir, &["project", "--input", "g.csct", "--rule", "l0", "--k", "60", "--output", "p.csct"]);
    assert_eq!(fs::read(dir.join("g.csct")).unwrap(), fs::read(dir.join("p.csct")).unwrap());
    ok(dir, &["project", "--input", "g.csct", "--rule", "l0inf", "--k", "5", "--output", "q.csct"]);
    assert_eq!(fs::read(dir.join("g.csct")).unwrap(), fs::read(dir.join("q.csct")).unwrap());
}

#[test]
fn analyze_sees_the_needle_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let g = Tensor3::random_gaussian(6, 6, 8, &mut Rng::new(2)).unwrap();
    fs::write(dir.join("g.csct"), encode_csct(&g)).unwrap();
    ok(dir, &["project", "--input", "g.csct", "--rule", "l0inf", "--k", "3", "--output", "p.csct"]);
    let out = ok(dir, &["analyze", "--input", "p.csct", "--csv", "r.csv", "--heat", "h.pgm", "--manifest", "m.json"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("max_needle_nnz=3"));
    let csv = fs::read_to_string(dir.join("r.csv")).unwrap();
    assert!(csv.starts_with("# global_nnz_fraction=0.375,max_needle_nnz=3,"));
    assert_eq!(csv.lines().count(), 2 + 36);
    let heat = decode_pnm(&fs::read(dir.join("h.pgm")).unwrap()).unwrap();
    assert_eq!(heat.shape(), (6, 6, 1));
    assert_eq!(manifest(&dir.join("m.json"))["results"]["max_needle_nnz"], 3);
}

#[test]
fn effective_atoms_of_two_layer_rgb_model_are_8x8() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["dictgen", "--atoms", "128", "--atom-size", "4", "--channels", "3", "--stride", "2", "--padding", "1", "--output", "d1.cscd"]);
    ok(dir, &["dictgen", "--atoms", "128", "--atom-size", "3", "--channels", "128", "--seed", "1", "--output", "d2.cscd"]);
    write_model(
        dir,
        &[("d1.cscd", r#"{"kind":"l0inf","k":8}"#), ("d2.cscd", r#"{"kind":"l0inf","k":2}"#)],
    );
    ok(dir, &["synth", "--model", "model.json", "--out-dir", "s"]);
    ok(dir, &["atoms", "--model", "model.json", "--effective", "2", "--cols", "16", "--output", "eff.ppm"]);
    let grid = decode_pnm(&fs::read(dir.join("eff.ppm")).unwrap()).unwrap();
    // 8 rows of 16 tiles, each 8 pixels plus a 1-pixel separator
    assert_eq!(grid.shape(), (8 * 9 + 1, 16 * 9 + 1, 3));
    ok(dir, &["atoms", "--dict", "d1.cscd", "--cols", "16", "--output", "d1.ppm"]);
    let grid = decode_pnm(&fs::read(dir.join("d1.ppm")).unwrap()).unwrap();
    assert_eq!(grid.shape(), (8 * 5 + 1, 16 * 5 + 1, 3));
}

#[test]
fn malformed_container_reports_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut bytes = encode_csct(&Tensor3::zeros(2, 2, 2).unwrap());
    bytes.truncate(bytes.len() - 3);
    fs::write(dir.join("t.csct"), &bytes).unwrap();
    let out = csc(dir, &["analyze", "--input", "t.csct"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte"));
    fs::write(dir.join("x.csct"), b"NOPE").unwrap();
    let out = csc(dir, &["analyze", "--input", "x.csct"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte 0"));
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = csc(tmp.path(), &["analyze", "--input", "absent.csct"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_flags_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for args in [
        &["project", "--input", "g.csct", "--output", "p.csct"][..],
        &["project", "--input", "g.csct", "--rule", "l1", "--k", "3", "--output", "p.csct"],
        &["synth", "--bogus"],
    ] {
        assert_eq!(csc(dir, args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn pursue_trace_carries_config_header() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["dictgen", "--kind", "dct", "--atoms", "9", "--atom-size", "3", "--output", "d.cscd"]);
    ok(dir, &["testimage", "--height", "12", "--width", "12", "--output", "x.pgm"]);
    ok(dir, &["pursue", "--dict", "d.cscd", "--input", "x.pgm", "--rule", "l0", "--k", "40", "--iters", "15", "--seed", "3", "--output", "g.csct", "--trace", "t.csv", "--recon", "r.csct"]);
    let trace = fs::read_to_string(dir.join("t.csv")).unwrap();
    let mut lines = trace.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(header["algo"], "iht");
    assert_eq!(header["seed"], 3);
    assert_eq!(header["dict_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(lines.next(), Some("iter,objective"));
    assert_eq!(lines.count(), 16);
    let g = decode_csct(&fs::read(dir.join("g.csct")).unwrap()).unwrap();
    assert!(g.count_nonzero(0.0) <= 40);
    let r = decode_csct(&fs::read(dir.join("r.csct")).unwrap()).unwrap();
    assert_eq!(r.shape(), (12, 12, 1));
}

#[test]
fn learn_writes_unit_norm_dictionary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["testimage", "--height", "16", "--width", "16", "--output", "x.pgm"]);
    ok(dir, &["learn", "--input", "x.pgm", "--atoms", "4", "--atom-size", "3", "--rule", "l0inf", "--k", "1", "--epochs", "3", "--output", "d.cscd", "--trace", "e.csv"]);
    let d = csc_core::io::decode_cscd(&fs::read(dir.join("d.cscd")).unwrap()).unwrap();
    for k in 0..4 {
        assert!((d.atom_norm(k) - 1.0).abs() < 1e-5);
    }
    assert_eq!(fs::read_to_string(dir.join("e.csv")).unwrap().lines().count(), 4);
}

#[test]
fn thread_count_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let g = Tensor3::random_gaussian(2, 2, 2, &mut Rng::new(3)).unwrap();
    fs::write(dir.join("g.csct"), encode_csct(&g)).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_csc-forge"))
        .args(["analyze", "--input", "g.csct", "--manifest", "m.json"])
        .current_dir(dir)
        .env("CSC_FORGE_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(&dir.join("m.json"))["threads"], 3);
}
