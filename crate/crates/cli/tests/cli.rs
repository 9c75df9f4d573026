use std::path::Path;
use std::process::{Command, Output};

fn puiq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_puiq"))
        .current_dir(dir)
        .env("PUIQ_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn make_dataset(dir: &Path, out: &str, domain: &str, refs: &str, seed: &str) {
    let o = puiq(
        dir,
        &["make-dataset", "--out", out, "--refs", refs, "--domain", domain, "--seed", seed],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

const SUBCOMMANDS: [&str; 6] = ["make-dataset", "encode", "score", "train", "eval", "experiment"];

#[test]
fn help_shows_a_default_or_requirement_for_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    for sub in SUBCOMMANDS {
        let o = puiq(dir.path(), &[sub, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        let usage = text.lines().find(|l| l.starts_with("Usage:")).unwrap().to_string();
        for line in text.lines().filter(|l| l.trim_start().starts_with("--")) {
            let flag = line.split_whitespace().next().unwrap();
            let boolean = !line.contains('<');
            let documented = line.contains("[default:") || boolean || usage.contains(flag) || flag == "--help";
            assert!(documented, "{sub}: {line}");
        }
        assert!(text.contains("--seed") && text.contains("--run-log"), "{sub}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(puiq(dir.path(), &["score", "--bogus"]).status.code(), Some(2));
    assert_eq!(puiq(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let o = puiq(dir.path(), &["score", "--ref", "a.png", "--dist", "b.png", "--metric", "vif"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn score_identical_images_prints_cap() {
    let dir = tempfile::tempdir().unwrap();
    make_dataset(dir.path(), "d", "sdr", "1", "3");
    let r = "d/ref/ref_0000.png";
    let o = puiq(dir.path(), &["score", "--ref", r, "--dist", r, "--metric", "pu-psnr", "--csv", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "pu-psnr 100\n");
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    make_dataset(dir.path(), "h", "hdr", "1", "3");
    let r = "h/ref/ref_0000.pfm";
    let o = puiq(dir.path(), &["score", "--ref", r, "--dist", r, "--metric", "pu-psnr"]);
    assert_eq!(stdout(&o), "pu-psnr 100\n");
}

#[test]
fn missing_file_exits_1_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = puiq(dir.path(), &["score", "--ref", "nope.png", "--dist", "nope.png"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn eval_constant_labels_is_undefined_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    make_dataset(d, "s", "sdr", "3", "1");
    std::fs::write(
        d.join("cfg.json"),
        r#"{"epochs": 1, "batch_images": 4, "patches_per_image": 4, "model": "desk"}"#,
    )
    .unwrap();
    let o = puiq(d, &["train", "--config", "cfg.json", "--source", "s/manifest.csv", "--out", "m.ckpt"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = std::fs::read_to_string(d.join("s/manifest.csv")).unwrap();
    let constant: Vec<String> = text
        .lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            if cells.len() == 7 && cells[2] != "label" {
                cells[2] = "3";
            }
            cells.join(",")
        })
        .collect();
    std::fs::write(d.join("s/constant.csv"), constant.join("\n")).unwrap();
    let o = puiq(d, &["eval", "--checkpoint", "m.ckpt", "--manifest", "s/constant.csv", "--patches", "16"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("undefined correlation"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn train_eval_pipeline_and_run_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    make_dataset(d, "s", "sdr", "4", "1");
    make_dataset(d, "h", "hdr", "5", "2");
    std::fs::write(
        d.join("cfg.json"),
        r#"{"da_mode": "s_to_hs", "epochs": 2, "batch_images": 4, "patches_per_image": 8,
            "model": "desk", "lambda_auto": false, "lambda": 0.01}"#,
    )
    .unwrap();
    let o = puiq(
        d,
        &[
            "train", "--config", "cfg.json", "--source", "s/manifest.csv", "--target", "h/manifest.csv",
            "--out", "m.ckpt", "--history", "hist.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let history = std::fs::read_to_string(d.join("hist.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,l_sdr,l_hdr,l_coral,total,lr,lambda,cov_distance"));

    let o = puiq(
        d,
        &[
            "eval", "--checkpoint", "m.ckpt", "--manifest", "h/manifest.csv", "--patches", "32",
            "--fold", "0", "--report", "r.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("subset,fold,n,srocc,plcc,fit_flag"));
    let full: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(full[0], "full");
    assert_eq!(full[1], "0");
    assert_eq!(full[2], "25");

    let o = puiq(d, &["encode", "--in", "h/ref/ref_0000.pfm", "--scheme", "pmax", "--out", "e.pfm"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let log = std::fs::read_to_string(d.join("puiq-runs.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(log.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let subs: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(subs, ["make-dataset", "make-dataset", "train", "eval", "encode"]);
    assert!(rows[2][1].contains("--config=cfg.json"));
    assert!(rows[2][6].contains("m.ckpt") && rows[2][6].contains("hist.csv"));
    assert!(rows.iter().all(|r| &r[5] == "ok"));
    assert_eq!(&rows[1][2], "2");
}

#[test]
fn experiment_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment", "--seed", "7", "--runs", "1", "--source-refs", "5", "--target-refs", "5",
        "--levels", "2", "--epochs", "2", "--patches", "4", "--eval-patches", "16",
    ];
    let a = puiq(dir.path(), &[&args[..], &["--out", "a", "--table", "a.csv"]].concat());
    let b = puiq(dir.path(), &[&args[..], &["--out", "b"]].concat());
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("lambda>0,median"));
    assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap(), stdout(&a));
}
