//! Runs the binary: exit codes and the full synthetic pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gesture-skel"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir` with its contents.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.clone(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["preprocess", "filter-clips", "train", "generate", "render", "eval", "synth"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
}

#[test]
fn unknown_command_exits_one_and_names_it() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));

    let out = bin().args(["train", "--bogus-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus-flag"));
}

#[test]
fn missing_input_exits_two_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.toml");
    let out =
        bin().args(["train", "--config", p(&missing), "--data", p(&missing), "--out", p(dir.path())]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.toml"));
}

#[test]
fn synthetic_pipeline_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let synth = root.path().join("synth");
    let work = root.path().join("work");
    run(&["synth", "--out", p(&synth), "--videos", "3", "--frames", "300", "--seed", "4"]);
    let again = root.path().join("synth2");
    run(&["synth", "--out", p(&again), "--videos", "3", "--frames", "300", "--seed", "4"]);
    let (a, b) = (snapshot(&synth), snapshot(&again));
    assert!(a.values().eq(b.values()), "synth is not deterministic");
    let inputs = snapshot(&synth);

    let clips = work.join("clips.tsv");
    run(&[
        "filter-clips",
        "--skeletons",
        p(&synth.join("skeletons")),
        "--histograms",
        p(&synth.join("histograms")),
        "--rules",
        p(&synth.join("rules.toml")),
        "--out",
        p(&clips),
    ]);
    let manifest = std::fs::read_to_string(&clips).unwrap();
    let accepted: Vec<&str> = manifest
        .lines()
        .filter(|l| l.split('\t').nth(6) == Some("true"))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert!(!accepted.is_empty(), "{manifest}");
    assert!(manifest.lines().any(|l| l.split('\t').nth(6) == Some("false")), "the static video should be rejected");

    let data = work.join("data");
    run(&[
        "preprocess",
        "--skeletons",
        p(&synth.join("skeletons")),
        "--features",
        p(&synth.join("features")),
        "--clips",
        p(&clips),
        "--out",
        p(&data),
    ]);
    let dataset = data.join("dataset.txt");
    assert_eq!(std::fs::read_to_string(&dataset).unwrap().lines().count(), accepted.len());

    let train = |dir: &Path| {
        run(&[
            "train",
            "--config",
            p(&synth.join("train.toml")),
            "--data",
            p(&dataset),
            "--out",
            p(dir),
            "--steps",
            "200",
        ]);
        dir.join("ckpt_00000200.bin")
    };
    let ckpt = train(&work.join("run"));
    let ckpt_again = train(&work.join("run2"));
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(&ckpt_again).unwrap(), "training is not deterministic");

    let clip = accepted[0];
    let generate = |out: &Path| {
        run(&[
            "generate",
            "--ckpt",
            p(&ckpt),
            "--ref",
            p(&data.join(format!("{clip}.skel"))),
            "--audio",
            p(&data.join(format!("{clip}.feat"))),
            "--seed",
            "7",
            "--hands",
            "--out",
            p(out),
        ]);
        out.join(format!("{clip}.pose"))
    };
    let pred = work.join("pred");
    let pose = generate(&pred);
    assert_eq!(std::fs::read(&pose).unwrap(), std::fs::read(generate(&work.join("pred2"))).unwrap());
    assert!(pred.join(format!("{clip}_hands.pose")).is_file());
    std::fs::remove_file(pred.join(format!("{clip}_hands.pose"))).unwrap();

    run(&["render", "--pose", p(&pose), "--out", p(&pred.join(clip)), "--size", "128"]);
    let gt = work.join("gt");
    run(&["render", "--pose", p(&data.join(format!("{clip}.skel"))), "--out", p(&gt.join(clip)), "--size", "128"]);
    std::fs::copy(data.join(format!("{clip}.skel")), gt.join(format!("{clip}.skel"))).unwrap();
    let frames = std::fs::read_dir(pred.join(clip)).unwrap().count();
    assert_eq!(frames, std::fs::read_dir(gt.join(clip)).unwrap().count());
    assert!(frames >= 125);

    let report = work.join("report.tsv");
    run(&["eval", "--pred", p(&pred), "--gt", p(&gt), "--out", p(&report)]);
    let report = std::fs::read_to_string(report).unwrap();
    let value = |metric: &str| -> f64 {
        report
            .lines()
            .find(|l| l.starts_with(&format!("mean\t{metric}\t")))
            .unwrap_or_else(|| panic!("no mean {metric} in\n{report}"))
            .rsplit('\t')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((0.0..=1.0).contains(&value("ssim")));
    assert!(value("psnr") > 0.0);
    assert!(value("pjpe").is_finite() && value("pjpe") >= 0.0);

    assert_eq!(snapshot(&synth), inputs, "a command modified its inputs");
}
