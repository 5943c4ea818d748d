//! End-to-end runs of the `loss01` binary: prepare -> train -> attack ->
//! report on small synthetic data, plus the error-path contract (nonzero
//! exit, one-line `error:` message).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loss01"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn loss01");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn loss01");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    let error_lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(
        error_lines.len(),
        1,
        "expected exactly one error: line, got stderr: {stderr}"
    );
    error_lines[0].to_string()
}

/// A small fake MNIST-style IDX pair: random pixels labeled 0/1 by a fixed
/// hyperplane in pixel space, with a margin band skipped so the classes are
/// cleanly separable.
fn write_idx_pair(dir: &Path, n: usize, prefix: &str) -> (PathBuf, PathBuf) {
    let side = 4usize;
    let d = side * side;
    let mut images = Vec::new();
    images.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    images.extend_from_slice(&(n as u32).to_be_bytes());
    images.extend_from_slice(&(side as u32).to_be_bytes());
    images.extend_from_slice(&(side as u32).to_be_bytes());
    let mut labels = Vec::new();
    labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());

    // deterministic pixel noise
    let mut state = 0x1234_5678_9abc_def0u64 ^ (n as u64);
    let mut next_byte = move || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (state >> 33) as u8
    };
    let mut placed = 0;
    while placed < n {
        let row: Vec<u8> = (0..d).map(|_| next_byte()).collect();
        // alternating +/- hyperplane through the pixel-box center
        let proj: f64 = row
            .iter()
            .enumerate()
            .map(|(p, &v)| {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                sign * (f64::from(v) / 255.0 - 0.5)
            })
            .sum();
        if proj.abs() < 0.25 {
            continue; // margin band
        }
        images.extend_from_slice(&row);
        labels.push(u8::from(proj < 0.0));
        placed += 1;
    }
    let image_path = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let label_path = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    fs::write(&image_path, images).unwrap();
    fs::write(&label_path, labels).unwrap();
    (image_path, label_path)
}

fn write_mnist_layout(dir: &Path, n_train: usize, n_test: usize) {
    write_idx_pair(dir, n_train, "train");
    write_idx_pair(dir, n_test, "t10k");
}

#[test]
fn prepare_train_attack_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    let data = tmp.path().join("data");
    fs::create_dir_all(&raw).unwrap();
    write_mnist_layout(&raw, 60, 24);

    run_ok(
        bin()
            .arg("prepare")
            .args(["--source", "mnist"])
            .arg("--dir")
            .arg(&raw)
            .args(["--classes", "0", "1"])
            .arg("--out")
            .arg(&data),
    );
    assert!(data.join("train.bds").is_file());
    assert!(data.join("test.bds").is_file());

    // train a small scd01 ensemble and a small mlp baseline
    let scd_dir = tmp.path().join("scd01");
    run_ok(
        bin()
            .arg("train")
            .arg("--train")
            .arg(data.join("train.bds"))
            .arg("--test")
            .arg(data.join("test.bds"))
            .args(["--model", "scd01", "--votes", "3", "--iters", "800"])
            .args(["--eta", "0.3", "--batch-frac", "0.75"])
            .args(["--k-features", "16", "--seed", "5", "--jobs", "1"])
            .arg("--out")
            .arg(&scd_dir),
    );
    assert!(scd_dir.join("model.m01v").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(scd_dir.join("train_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["model"], "scd01");
    assert_eq!(report["member_seeds"].as_array().unwrap().len(), 3);
    assert!(report["clean_train_accuracy"].as_f64().unwrap() > 0.9);

    let mlp_dir = tmp.path().join("mlp");
    run_ok(
        bin()
            .arg("train")
            .arg("--train")
            .arg(data.join("train.bds"))
            .args(["--model", "mlp", "--votes", "2", "--sgd-epochs", "30"])
            .args(["--sgd-batch", "16", "--seed", "5", "--jobs", "1"])
            .arg("--out")
            .arg(&mlp_dir),
    );

    // attack both with a tiny substitute
    for (dir, name) in [(&scd_dir, "scd"), (&mlp_dir, "mlp")] {
        let out_dir = tmp.path().join(format!("attack_{name}"));
        run_ok(
            bin()
                .arg("attack")
                .arg("--target")
                .arg(dir.join("model.m01v"))
                .arg("--eval")
                .arg(data.join("test.bds"))
                .args(["--substitute", "mlp", "--sub-hidden", "4"])
                .args(["--sub-sgd-epochs", "5", "--epsilon", "0.2"])
                .args(["--epochs", "2", "--seed", "5", "--jobs", "1"])
                .arg("--out")
                .arg(&out_dir),
        );
        let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
        assert!(trace.starts_with("epoch,adv_acc,match_clean,match_adv,sub_train_acc,queries"));
        assert_eq!(trace.lines().count(), 1 + 3); // header + epochs 0..=2
    }

    // merged report over the two traces
    let merged = tmp.path().join("merged.csv");
    let out = run_ok(
        bin()
            .arg("report")
            .arg("--traces")
            .arg(tmp.path().join("attack_scd/trace.csv"))
            .arg(tmp.path().join("attack_mlp/trace.csv"))
            .args(["--names", "scd01", "mlp"])
            .arg("--out")
            .arg(&merged),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("model,clean_acc,final_adv_acc"));
    assert!(stdout.contains("scd01,"));
    assert!(stdout.contains("mlp,"));
    let merged_text = fs::read_to_string(&merged).unwrap();
    assert!(merged_text.starts_with("epoch,scd01_adv_acc,mlp_adv_acc"));
    assert_eq!(merged_text.lines().count(), 1 + 3);
}

#[test]
fn train_is_bit_deterministic_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    write_mnist_layout(&raw, 40, 12);
    let data = tmp.path().join("data");
    run_ok(
        bin()
            .arg("prepare")
            .args(["--source", "mnist"])
            .arg("--dir")
            .arg(&raw)
            .args(["--classes", "0", "1"])
            .arg("--out")
            .arg(&data),
    );

    let mut blobs = Vec::new();
    let mut traces = Vec::new();
    for run in 0..2 {
        let dir = tmp.path().join(format!("run{run}"));
        run_ok(
            bin()
                .arg("train")
                .arg("--train")
                .arg(data.join("train.bds"))
                .args(["--model", "mlp01", "--votes", "2", "--iters", "40"])
                .args(["--k-features", "8", "--hidden", "3", "--seed", "9"])
                .args(["--jobs", "2"])
                .arg("--out")
                .arg(&dir),
        );
        blobs.push(fs::read(dir.join("model.m01v")).unwrap());

        let attack_dir = tmp.path().join(format!("attack{run}"));
        run_ok(
            bin()
                .arg("attack")
                .arg("--target")
                .arg(dir.join("model.m01v"))
                .arg("--eval")
                .arg(data.join("test.bds"))
                .args(["--substitute", "scd01", "--sub-iters", "30"])
                .args(["--sub-k-features", "8"])
                .args([
                    "--epsilon",
                    "0.1",
                    "--epochs",
                    "2",
                    "--seed",
                    "9",
                    "--jobs",
                    "2",
                ])
                .arg("--out")
                .arg(&attack_dir),
        );
        traces.push(fs::read(attack_dir.join("trace.csv")).unwrap());
    }
    assert_eq!(
        blobs[0], blobs[1],
        "model blobs differ across identical runs"
    );
    assert_eq!(
        traces[0], traces[1],
        "trace CSVs differ across identical runs"
    );
}

#[test]
fn container_passthrough_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    write_mnist_layout(&raw, 30, 10);
    let data = tmp.path().join("data");
    run_ok(
        bin()
            .arg("prepare")
            .args(["--source", "mnist"])
            .arg("--dir")
            .arg(&raw)
            .args(["--classes", "0", "1"])
            .arg("--out")
            .arg(&data),
    );

    let copy = tmp.path().join("copy");
    run_ok(
        bin()
            .arg("prepare")
            .args(["--source", "container"])
            .arg("--train")
            .arg(data.join("train.bds"))
            .arg("--test")
            .arg(data.join("test.bds"))
            .arg("--out")
            .arg(&copy),
    );
    assert_eq!(
        fs::read(data.join("train.bds")).unwrap(),
        fs::read(copy.join("train.bds")).unwrap()
    );
    assert_eq!(
        fs::read(data.join("test.bds")).unwrap(),
        fs::read(copy.join("test.bds")).unwrap()
    );
}

#[test]
fn cifar_prepare_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    // five training batches plus a test batch, 6 records each
    let record = |label: u8, level: u8| {
        let mut r = vec![label];
        r.extend(std::iter::repeat_n(level, 3072));
        r
    };
    for b in 1..=5 {
        let mut bytes = Vec::new();
        for i in 0..6 {
            let label = (i % 2) as u8;
            bytes.extend(record(label, if label == 0 { 30 } else { 220 }));
        }
        fs::write(raw.join(format!("data_batch_{b}.bin")), &bytes).unwrap();
    }
    let mut bytes = Vec::new();
    for i in 0..6 {
        let label = (i % 2) as u8;
        bytes.extend(record(label, if label == 0 { 35 } else { 210 }));
    }
    fs::write(raw.join("test_batch.bin"), &bytes).unwrap();

    let data = tmp.path().join("data");
    let out = run_ok(
        bin()
            .arg("prepare")
            .args(["--source", "cifar10"])
            .arg("--dir")
            .arg(&raw)
            .args(["--classes", "0", "1"])
            .arg("--out")
            .arg(&data),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("d=3072"), "stdout: {stdout}");
    assert!(stdout.contains("n=30"), "stdout: {stdout}");
}

#[test]
fn failure_paths_exit_nonzero_with_one_error_line() {
    let tmp = tempfile::tempdir().unwrap();

    // missing files
    let msg = run_err(
        bin()
            .arg("train")
            .arg("--train")
            .arg(tmp.path().join("missing.bds"))
            .args(["--model", "scd01"])
            .arg("--out")
            .arg(tmp.path().join("out")),
    );
    assert!(msg.contains("file not found"), "{msg}");

    // unknown model
    let bad = tmp.path().join("bad.bds");
    fs::write(&bad, b"BDS1").unwrap();
    let msg = run_err(
        bin()
            .arg("train")
            .arg("--train")
            .arg(&bad)
            .args(["--model", "resnet"])
            .arg("--out")
            .arg(tmp.path().join("out")),
    );
    assert!(
        msg.contains("length error") || msg.contains("unknown model"),
        "{msg}"
    );

    // malformed container
    let msg = run_err(
        bin()
            .arg("train")
            .arg("--train")
            .arg(&bad)
            .args(["--model", "scd01"])
            .arg("--out")
            .arg(tmp.path().join("out")),
    );
    assert!(msg.contains("error:"), "{msg}");

    // report with mismatched epoch counts
    let t1 = tmp.path().join("t1.csv");
    let t2 = tmp.path().join("t2.csv");
    fs::write(
        &t1,
        "epoch,adv_acc,match_clean,match_adv,sub_train_acc,queries\n0,0.9,0,0,0,10\n1,0.5,0.9,0.4,1,20\n",
    )
    .unwrap();
    fs::write(
        &t2,
        "epoch,adv_acc,match_clean,match_adv,sub_train_acc,queries\n0,0.8,0,0,0,10\n",
    )
    .unwrap();
    let msg = run_err(bin().arg("report").arg("--traces").arg(&t1).arg(&t2));
    assert!(msg.contains("must align"), "{msg}");

    // config with unknown keys is rejected
    let cfg = tmp.path().join("exp.json");
    fs::write(&cfg, r#"{"seed": 1, "turbo": true}"#).unwrap();
    let msg = run_err(
        bin()
            .arg("train")
            .arg("--train")
            .arg(&bad)
            .args(["--model", "scd01"])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path().join("out")),
    );
    assert!(
        msg.contains("unknown field") || msg.contains("parsing config"),
        "{msg}"
    );
}

#[test]
fn config_file_supplies_values_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    write_mnist_layout(&raw, 30, 10);
    let data = tmp.path().join("data");
    run_ok(
        bin()
            .arg("prepare")
            .args(["--source", "mnist"])
            .arg("--dir")
            .arg(&raw)
            .args(["--classes", "0", "1"])
            .arg("--out")
            .arg(&data),
    );

    let cfg = tmp.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{
            "seed": 4,
            "train": { "model": "scd01", "votes": 2, "iters": 30, "k_features": 4 }
        }"#,
    )
    .unwrap();

    // flag --votes 1 overrides the file's 2; model comes from the file
    let dir = tmp.path().join("out");
    run_ok(
        bin()
            .arg("train")
            .arg("--train")
            .arg(data.join("train.bds"))
            .arg("--config")
            .arg(&cfg)
            .args(["--votes", "1", "--jobs", "1"])
            .arg("--out")
            .arg(&dir),
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("train_report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["model"], "scd01");
    assert_eq!(report["config"]["votes"], 1);
    assert_eq!(report["config"]["scd"]["iterations"], 30);
    assert_eq!(report["global_seed"], 4);
}
