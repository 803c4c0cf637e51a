use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radmi_core::synth::mini_section;
use radmi_core::{read_tensor, Tensor};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radmi"))
        .args(args)
        .output()
        .expect("spawn radmi")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn mini_dataset(root: &Path) -> PathBuf {
    let data = root.join("data");
    let o = run(&["synth", "--kind", "mini", "--out", &s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    data
}

#[test]
fn synth_correlated_field_prints_true_mi() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--kind", "correlated-field", "--rho", "0.8", "--out", &s(tmp.path())]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0.510826"));
    let a = read_tensor(tmp.path().join("sections/field/decoder_L1.npy")).unwrap();
    assert_eq!(a.shape(), &[1, 64, 64]);
}

#[test]
fn synth_rejects_invalid_rho() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--kind", "correlated-field", "--rho", "1.5", "--out", &s(tmp.path())]);
    assert_eq!(code(&o), 2);
    let o = run(&["synth", "--kind", "correlated-field", "--out", &s(tmp.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn synth_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let o = run(&["synth", "--kind", "boundary-scene", "--seed", "9", "--out", &s(&tmp.path().join(dir))]);
        assert_eq!(code(&o), 0);
    }
    for f in ["decoder_L1.npy", "decoder_L2.npy", "labels.npy", "reference.npy", "band_mask.npy"] {
        let x = std::fs::read(tmp.path().join("a/sections/scene").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("b/sections/scene").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn single_layer_dataset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let sec = tmp.path().join("data/sections/only");
    std::fs::create_dir_all(&sec).unwrap();
    let t = Tensor::from_f32(vec![2, 8, 8], vec![0.5; 128]).unwrap();
    radmi_core::write_tensor(&t, sec.join("decoder_L1.npy")).unwrap();
    let o = run(&["radmi", "--dataset", &s(&tmp.path().join("data")), "--out", &s(&tmp.path().join("out"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("only"));
}

#[test]
fn missing_dataset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["radmi", "--dataset", &s(&tmp.path().join("nope")), "--out", &s(tmp.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn failing_section_is_reported_and_others_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let data = mini_dataset(tmp.path());
    // break one section's decoder stack
    std::fs::remove_file(data.join("sections/section_001/decoder_L1.npy")).unwrap();
    let out = tmp.path().join("out");
    let o = run(&["radmi", "--dataset", &s(&data), "--out", &s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("section_001"));
    assert!(out.join("section_000/radmi.npy").exists());
    assert!(out.join("section_002/radmi.npy").exists());
    assert!(!out.join("section_001").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("radmi.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["sections"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["failures"][0]["section_id"], "section_001");
}

#[test]
fn singular_covariance_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let sec = tmp.path().join("data/sections/flat");
    std::fs::create_dir_all(&sec).unwrap();
    for (i, hw) in [(1, 8), (2, 16)] {
        let t = Tensor::from_f32(vec![2, hw, hw], vec![1.0; 2 * hw * hw]).unwrap();
        radmi_core::write_tensor(&t, sec.join(format!("decoder_L{i}.npy"))).unwrap();
    }
    let data = s(&tmp.path().join("data"));
    let out = s(&tmp.path().join("out"));
    let o = run(&["radmi", "--dataset", &data, "--out", &out, "--epsilon", "0"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // the default shrinkage keeps the same input well posed
    let o = run(&["radmi", "--dataset", &data, "--out", &out]);
    assert_eq!(code(&o), 0);
}

#[test]
fn radmi_writes_maps_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = mini_dataset(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&["radmi", "--dataset", &s(&data), "--out", &s(&out), "--patch", "5", "--weighting", "uniform"]);
    assert_eq!(code(&o), 0);
    for id in ["section_000", "section_001", "section_002"] {
        let m = read_tensor(out.join(id).join("radmi.npy")).unwrap();
        assert_eq!(m.shape(), &[32, 32]);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("radmi.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["mi"]["patch"], 5);
    assert_eq!(manifest["config"]["aggregation"]["weighting"], "uniform");
    assert_eq!(manifest["sections"][0]["forward_passes"], 1);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = mini_dataset(tmp.path());
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[mi]\npatch = 9\nepsilon = 0.01\n").unwrap();
    let out = tmp.path().join("out");
    let o = run(&["radmi", "--dataset", &s(&data), "--out", &s(&out), "--config", &s(&cfg), "--patch", "3"]);
    assert_eq!(code(&o), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("radmi.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["mi"]["patch"], 3);
    assert_eq!(manifest["config"]["mi"]["epsilon"], 0.01);

    std::fs::write(&cfg, "[mi]\nwindow = 9\n").unwrap();
    let o = run(&["radmi", "--dataset", &s(&data), "--out", &s(&out), "--config", &s(&cfg)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_flags_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = mini_dataset(tmp.path());
    let out = s(&tmp.path().join("out"));
    assert_eq!(code(&run(&["radmi", "--dataset", &s(&data), "--out", &out, "--patch", "4"])), 2);
    assert_eq!(code(&run(&["baseline", "radmi", "--dataset", &s(&data), "--out", &out])), 2);
    assert_eq!(code(&run(&["eval", "--dataset", &s(&data), "--out", &out, "--methods", ""])), 2);
    assert_eq!(code(&run(&["eval", "--dataset", &s(&data), "--out", &out, "--methods", "magic"])), 2);
    assert_eq!(code(&run(&["eval", "--dataset", &s(&data), "--out", &out, "--reference", "/no/such/dir"])), 2);
    assert_eq!(code(&run(&["radmi", "--dataset", &s(&data), "--out", &out, "--jobs", "0"])), 2);
}

#[test]
fn missing_baseline_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = mini_dataset(tmp.path());
    for id in ["section_000", "section_001", "section_002"] {
        std::fs::remove_file(data.join("sections").join(id).join("dropout_probs.npy")).unwrap();
    }
    let o = run(&["baseline", "mcdropout", "--dataset", &s(&data), "--out", &s(&tmp.path().join("out"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn self_evaluation_hits_ideal_values() {
    let tmp = tempfile::tempdir().unwrap();
    let data = mini_dataset(tmp.path());
    let out = tmp.path().join("eval");
    let o = run(&["eval", "--dataset", &s(&data), "--out", &s(&out), "--methods", "entropy", "--reference", "entropy"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[3].parse().unwrap();
        let ideal = match f[2] {
            "pearson" | "spearman" | "cosine" | "miou" | "dice" | "hist_int" => 1.0,
            _ => 0.0,
        };
        assert!((v - ideal).abs() < 1e-12, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 3 * 11);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("correlation (higher is better)"));
    assert!(table.contains("entropy  1"));
}

#[test]
fn eval_against_external_reference_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("scene");
    let o = run(&["synth", "--kind", "boundary-scene", "--seed", "0", "--out", &s(&data)]);
    assert_eq!(code(&o), 0);
    let out = tmp.path().join("eval");
    let o = run(&[
        "eval",
        "--dataset",
        &s(&data),
        "--out",
        &s(&out),
        "--reference",
        &s(&data.join("sections")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let spearman: f64 = csv
        .lines()
        .find(|l| l.starts_with("scene,radmi,spearman,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(spearman > 0.4, "{spearman}");
}

#[test]
fn degenerate_sections_are_excluded_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    // one section whose predictions never switch, so its switch map is constant
    let mut s0 = mini_section("section_000", 0).unwrap();
    let preds = s0.epoch_preds.as_ref().unwrap();
    let first: Vec<i32> = preds.as_i32().unwrap()[..32 * 32].to_vec();
    let still: Vec<i32> = first.iter().cycle().take(preds.as_i32().unwrap().len()).copied().collect();
    s0.epoch_preds = Some(Tensor::from_i32(preds.shape().to_vec(), still).unwrap());
    s0.write(data.join("sections/section_000")).unwrap();
    let s1 = mini_section("section_001", 1).unwrap();
    s1.write(data.join("sections/section_001")).unwrap();

    let out = tmp.path().join("eval");
    let o = Command::new(env!("CARGO_BIN_EXE_radmi"))
        .args(["eval", "--dataset", &s(&data), "--out", &s(&out), "--methods", "switches,entropy"])
        .env("RADMI_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("section_000"));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("excluded (degenerate input)"));
    assert!(table.contains("single section"));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(!csv.contains("section_000,switches"));
    assert!(csv.contains("section_001,switches"));
    assert!(csv.contains("section_000,entropy"));
}
