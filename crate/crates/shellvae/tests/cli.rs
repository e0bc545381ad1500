use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shellvae::dataset::Dataset;
use shellvae_core::Matrix;

fn shellvae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shellvae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small dataset plus a K=4 region in `dir`.
fn small_pair(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("data.bin");
    let region = dir.join("region.json");
    let o = shellvae(&["synth", "--n", "240", "--dim", "6", "--components", "4", "--seed", "3", "--out", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = shellvae(&["cluster", "--data", s(&data), "--k", "4", "--out", s(&region)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (data, region)
}

fn train_small(data: &Path, region: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train", "--data", s(data), "--region", s(region), "--epochs", "3", "--batch-size", "64",
        "--latent-dim", "3", "--out-dir", s(out), "--create-dirs",
    ];
    args.extend_from_slice(extra);
    shellvae(&args)
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&shellvae(&["synth"])), 1);
    assert_eq!(code(&shellvae(&["no-such-command"])), 1);
    assert_eq!(code(&shellvae(&["train", "--variant", "partial"])), 1);
    assert_eq!(code(&shellvae(&["--help"])), 0);
}

#[test]
fn degenerate_synth_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.bin");
    let o = shellvae(&["synth", "--components", "1", "--std", "0", "--n", "10", "--dim", "3", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("sha256 "));
    let (ds, _) = shellvae::dataset::read_dataset(&out).unwrap();
    assert!(ds.data.iter_rows().all(|r| r == ds.data.row(0)));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = shellvae(&["cluster", "--data", s(&dir.path().join("nope.bin")), "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn cluster_reports_region_and_echoes_radii() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let text = std::fs::read_to_string(&region).unwrap();
    assert!(text.contains("\"r_min\": 0.85"));
    assert!(text.contains("\"r_max\": 1.0"));
    let r1 = dir.path().join("k1.json");
    let o = shellvae(&["cluster", "--data", s(&data), "--k", "1", "--out", s(&r1)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("feasible: W < delta = false"));
    let o = shellvae(&["cluster", "--data", s(&data), "--k", "241", "--out", s(&r1)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_theorem_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let o = shellvae(&["verify-theorem", "--data", s(&data), "--region", s(&region)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));

    let r1 = dir.path().join("k1.json");
    assert_eq!(code(&shellvae(&["cluster", "--data", s(&data), "--k", "1", "--out", s(&r1)])), 0);
    let o = shellvae(&["verify-theorem", "--data", s(&data), "--region", s(&r1)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn four_point_fixture_prints_exact_region() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("four.bin");
    Dataset {
        data: Matrix::from_rows(&[[0.9, 0.0], [1.0, 0.0], [-0.9, 0.0], [-1.0, 0.0]]).unwrap(),
        labels: None,
    }
    .write(&data)
    .unwrap();
    let region = dir.path().join("four.json");
    let o = shellvae(&["cluster", "--data", s(&data), "--k", "2", "--raw", "--out", s(&region)]);
    assert_eq!(code(&o), 0);
    let o = shellvae(&["verify-theorem", "--data", s(&data), "--region", s(&region), "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["w"].as_f64().unwrap() - 0.0025).abs() < 1e-15);
    assert!((v["delta_collapse"].as_f64().unwrap() - 0.9025).abs() < 1e-15);
    assert_eq!(v["pass"], true);
}

#[test]
fn training_is_byte_deterministic_and_eval_matches() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b/nested");
    for out in [&a, &b] {
        let o = train_small(&data, &region, out, &["--checkpoint-every", "1"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.jsonl", "series.csv", "manifest.json", "model.ckpt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = shellvae::report::read_series(&a.join("report.jsonl")).unwrap();
    assert_eq!(report.epochs.len(), 3);

    let o = shellvae(&["eval", "--checkpoint", s(&a.join("model.ckpt")), "--data", s(&data), "--region", s(&region), "--json"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    let m = &report.summary.metrics;
    assert_eq!(v["avg_kl"].as_f64().unwrap(), m.avg_kl);
    assert_eq!(v["active_units"].as_u64().unwrap() as usize, m.active_units);
    assert_eq!(v["feasible_coverage_pct"].as_f64().unwrap(), m.feasible_coverage_pct);
    assert_eq!(v["norm_satisfaction_pct"].as_f64().unwrap(), m.norm_satisfaction_pct);
    assert_eq!(v["collapse_verdict"].as_bool().unwrap(), report.summary.collapse_verdict);

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let hash = shellvae::dataset::read_dataset(&data).unwrap().1;
    assert_eq!(manifest["dataset_sha256"], hash.as_str());
    assert_eq!(manifest["config"]["epochs"], 3);
}

#[test]
fn fresh_checkpoint_has_zero_kl() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let out = dir.path().join("fresh");
    assert_eq!(code(&train_small(&data, &region, &out, &["--epochs", "0"])), 0);
    let o = shellvae(&["eval", "--checkpoint", s(&out.join("model.ckpt")), "--data", s(&data), "--region", s(&region), "--json", "--all"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["avg_kl"].as_f64().unwrap(), 0.0);
    assert_eq!(v["rows"], 240);
}

#[test]
fn stale_region_and_wrong_checkpoint_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let other = dir.path().join("other.bin");
    assert_eq!(code(&shellvae(&["synth", "--n", "240", "--dim", "6", "--components", "4", "--seed", "4", "--out", s(&other)])), 0);
    let o = train_small(&other, &region, &dir.path().join("x"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("region was computed for dataset"));

    let out = dir.path().join("run");
    assert_eq!(code(&train_small(&data, &region, &out, &["--epochs", "0"])), 0);
    let narrow = dir.path().join("narrow.bin");
    let narrow_region = dir.path().join("narrow.json");
    assert_eq!(code(&shellvae(&["synth", "--n", "50", "--dim", "4", "--components", "2", "--out", s(&narrow)])), 0);
    assert_eq!(code(&shellvae(&["cluster", "--data", s(&narrow), "--k", "2", "--out", s(&narrow_region)])), 0);
    let o = shellvae(&["eval", "--checkpoint", s(&out.join("model.ckpt")), "--data", s(&narrow), "--region", s(&narrow_region)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not fit"));
}

#[test]
fn output_directory_must_exist_unless_asked() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let out = dir.path().join("missing/dir");
    let o = shellvae(&[
        "train", "--data", s(&data), "--region", s(&region), "--epochs", "0", "--out-dir", s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn ablation_table_has_four_variants() {
    let dir = tempfile::tempdir().unwrap();
    let (data, region) = small_pair(dir.path());
    let csv = dir.path().join("ablation.csv");
    let o = shellvae(&[
        "ablate", "--data", s(&data), "--region", s(&region), "--epochs", "1", "--latent-dim", "2",
        "--seeds", "5", "--out", s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,variant,avg_kl,feasible_coverage_pct,norm_satisfaction_pct,recon_error,active_units");
    let variants: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(variants, ["none", "boundary_only", "norm_only", "full"]);
    assert!(dir.path().join("ablation.csv.manifest.json").exists());
}

#[test]
fn idx_import() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images.idx");
    let labels = dir.path().join("labels.idx");
    let mut img = Vec::new();
    for v in [0x803u32, 3, 2, 2] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(&[0, 255, 128, 64, 1, 2, 3, 4, 5, 6, 7, 8]);
    std::fs::write(&images, &img).unwrap();
    let mut lab = Vec::new();
    for v in [0x801u32, 3] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(&[7, 1, 9]);
    std::fs::write(&labels, &lab).unwrap();

    let out = dir.path().join("mnist.bin");
    let o = shellvae(&["import-idx", "--images", s(&images), "--labels", s(&labels), "--subset", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let (ds, _) = shellvae::dataset::read_dataset(&out).unwrap();
    assert_eq!(ds.data.shape(), (3, 4));
    assert_eq!(ds.data.row(0), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    assert_eq!(ds.labels, Some(vec![7, 1, 9]));

    let o = shellvae(&["import-idx", "--images", s(&images), "--subset", "2", "--seed", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(shellvae::dataset::read_dataset(&out).unwrap().0.data.rows(), 2);

    img[3] = 0x01;
    std::fs::write(&images, &img).unwrap();
    let o = shellvae(&["import-idx", "--images", s(&images), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad magic"));
}
