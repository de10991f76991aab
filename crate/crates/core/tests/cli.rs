use std::path::Path;
use std::process::{Command, Output};

use search_softmax::experiment::read_metrics;

const BIN: &str = env!("CARGO_BIN_EXE_search-softmax");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "epochs = 3\n\n[dataset]\nclasses = 12\ndim = 8\nsamples_per_class = 10\n\n\
         [model]\nhidden = [16]\nembedding = 8\n\n[sgd]\nbatch_size = 32\n\n[eval]\npairs = 200\n",
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn plain_and_unified_zero_write_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("plain");
    let b = dir.path().join("unified");
    let oa = run(&["train-fixed", "--config", &cfg, "--seed", "4", "--loss", "plain", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = run(&[
        "train-fixed", "--config", &cfg, "--seed", "4", "--loss", "unified", "--a", "0", "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&ob), 0);
    let ma = std::fs::read(a.join("metrics.jsonl")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("metrics.jsonl")).unwrap());
    assert_eq!(std::fs::read(a.join("model.lfs")).unwrap(), std::fs::read(b.join("model.lfs")).unwrap());
    assert_eq!(read_metrics(&a.join("metrics.jsonl")).unwrap().len(), 3);
    for f in ["config.toml", "metrics.jsonl", "timings.jsonl", "model.lfs", "report.json", "roc.csv", "cmc.csv"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn search_counts_and_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let outs: Vec<_> = ["r1", "r2"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = run(&[
                "search", "--config", &cfg, "--seed", "9", "--epochs", "1", "--samples", "2", "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    let records = read_metrics(&outs[0].join("metrics.jsonl")).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].factors.len(), 2);
    assert_eq!(records[0].candidate_rewards.len(), 2);
    assert_eq!(
        std::fs::read(outs[0].join("metrics.jsonl")).unwrap(),
        std::fs::read(outs[1].join("metrics.jsonl")).unwrap()
    );
    assert!(outs[0].join("winners/epoch000.lfs").is_file());
    let mu = std::fs::read_to_string(outs[0].join("mu_trajectory.csv")).unwrap();
    assert_eq!(mu.lines().count(), 3);
}

#[test]
fn config_snapshot_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = dir.path().join("first");
    assert_eq!(
        code(&run(&["random-schedule", "--config", &cfg, "--seed", "2", "--out", first.to_str().unwrap()])),
        0
    );
    let snapshot = first.join("config.toml");
    let second = dir.path().join("second");
    let o = run(&[
        "random-schedule", "--config", snapshot.to_str().unwrap(), "--out", second.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(first.join("metrics.jsonl")).unwrap(),
        std::fs::read(second.join("metrics.jsonl")).unwrap()
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[dataset]\nkind = \"csv\"\n").unwrap();
    let o = run(&["train-fixed", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset.path"));

    let o = run(&["ablate-a", "--factors", "0,2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["train-fixed", "--loss", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["export-curves", "--a", "0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["train-fixed", "--no-such-flag"])), 2);
}

#[test]
fn missing_dataset_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "train-fixed", "--dataset", "/definitely/not/here.csv", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn eval_round_trip_and_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let train = dir.path().join("train");
    assert_eq!(code(&run(&["train-fixed", "--config", &cfg, "--loss", "am", "--out", train.to_str().unwrap()])), 0);

    let eval_dir = dir.path().join("eval");
    let o = run(&[
        "eval", "--checkpoint", train.join("model.lfs").to_str().unwrap(),
        "--dataset", train.join("validation.csv").to_str().unwrap(),
        "--pairs", train.join("pairs.csv").to_str().unwrap(),
        "--out", eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trained: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(train.join("report.json")).unwrap()).unwrap();
    let evaluated: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(trained["evaluation"], evaluated);
    assert_eq!(
        std::fs::read(train.join("roc.csv")).unwrap(),
        std::fs::read(eval_dir.join("roc.csv")).unwrap()
    );

    let bytes = std::fs::read(train.join("model.lfs")).unwrap();
    let truncated = dir.path().join("truncated.lfs");
    std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    let o = run(&[
        "eval", "--checkpoint", truncated.to_str().unwrap(),
        "--dataset", train.join("validation.csv").to_str().unwrap(),
        "--out", eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn export_curves_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["export-curves", "--a", "0,-1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 1001);
    assert!(csv.contains("\n-1,0.5,0.66666666666666663,0.33333333333333331\n"));
}

#[test]
fn ablation_summary_has_one_row_per_factor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(&["ablate-a", "--config", &cfg, "--factors", "0,-10,-100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}
