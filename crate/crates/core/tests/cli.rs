use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edd::experiments::{generate, generate_stream, SettingKind, SyntheticSetting};
use edd::metrics::{evaluate_prediction, EvalOptions, Prediction, Report};
use edd::{io, KernelSpec, SampleSet};
use tempfile::TempDir;

fn edd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    samples: PathBuf,
    reference: PathBuf,
    sets: Vec<SampleSet>,
    reference_set: SampleSet,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let setting = SyntheticSetting::new(SettingKind::Translation, 60, 11);
    let sets: Vec<SampleSet> = (1..=9).map(|t| generate(&setting, t).unwrap()).collect();
    let reference_set = generate_stream(&setting, 10, 1 << 32).unwrap();
    let samples = dir.path().join("samples.jsonl");
    let reference = dir.path().join("reference.jsonl");
    io::write_samples(&samples, &sets).unwrap();
    io::write_samples(&reference, std::slice::from_ref(&reference_set)).unwrap();
    Fixture {
        dir,
        samples,
        reference,
        sets,
        reference_set,
    }
}

fn read_report(p: &Path) -> Report {
    io::read_json(p).unwrap()
}

#[test]
fn predict_then_eval_matches_in_process() {
    let f = fixture();
    let pred = f.dir.path().join("pred.json");
    let report = f.dir.path().join("report.json");
    let out = edd(&[
        "predict",
        "--input",
        path_str(&f.samples),
        "--out",
        path_str(&pred),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = edd(&[
        "eval",
        "--pred",
        path_str(&pred),
        "--reference",
        path_str(&f.reference),
        "--out",
        path_str(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let sets = io::read_samples(&f.samples).unwrap();
    assert_eq!(sets, f.sets);
    let lambda = edd::dynamics::default_lambda(&sets);
    let model = edd::fit(sets, KernelSpec::gaussian(1.0), lambda, None).unwrap();
    let p = model.extrapolate().unwrap();
    let expected = evaluate_prediction(
        Prediction::Weighted(&p.embedding),
        &f.reference_set,
        &KernelSpec::gaussian(1.0),
        &EvalOptions::default(),
    )
    .unwrap();
    let got = read_report(&report);
    assert_eq!(got.hs_distance, expected.hs_distance);
    assert_eq!(got.n_pred, p.embedding.len());
    assert_eq!(got.kl, None);
}

#[test]
fn predict_is_deterministic() {
    let f = fixture();
    let run = |name: &str| {
        let p = f.dir.path().join(name);
        let out = edd(&[
            "predict",
            "--input",
            path_str(&f.samples),
            "--gamma",
            "exponential",
            "--rho",
            "0.5",
            "--out",
            path_str(&p),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn herd_then_eval_with_kl() {
    let f = fixture();
    let pred = f.dir.path().join("pred.json");
    let herded = f.dir.path().join("herded.jsonl");
    let report = f.dir.path().join("report.json");
    assert!(edd(&[
        "predict",
        "--input",
        path_str(&f.samples),
        "--out",
        path_str(&pred)
    ])
    .status
    .success());
    let out = edd(&[
        "herd",
        "--prediction",
        path_str(&pred),
        "--herd-m",
        "40",
        "--normalize",
        "--out",
        path_str(&herded),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sets = io::read_samples(&herded).unwrap();
    assert_eq!(sets.len(), 1);
    assert_eq!(sets[0].len(), 40);
    assert_eq!(sets[0].time_index(), 10);

    let out = edd(&[
        "eval",
        "--pred",
        path_str(&herded),
        "--reference",
        path_str(&f.reference),
        "--kl",
        "--out",
        path_str(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = read_report(&report);
    assert!(r.kl.unwrap() >= 0.0);
    assert!(r.hs_distance > 0.0);
}

#[test]
fn kl_on_signed_prediction_is_rejected() {
    let f = fixture();
    let pred = f.dir.path().join("pred.json");
    assert!(edd(&[
        "predict",
        "--input",
        path_str(&f.samples),
        "--out",
        path_str(&pred)
    ])
    .status
    .success());
    let out = edd(&[
        "eval",
        "--pred",
        path_str(&pred),
        "--reference",
        path_str(&f.reference),
        "--kl",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_override() {
    let f = fixture();
    let cfg = f.dir.path().join("run.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"kernel": {{"kind": "gaussian", "bandwidth": 4.0}}, "lambda": 0.01, "io": {{"input": {:?}}}}}"#,
            path_str(&f.samples)
        ),
    )
    .unwrap();
    let from_cfg = f.dir.path().join("cfg.json");
    let overridden = f.dir.path().join("flag.json");
    assert!(edd(&[
        "predict",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&from_cfg)
    ])
    .status
    .success());
    assert!(edd(&[
        "predict",
        "--config",
        path_str(&cfg),
        "--bandwidth",
        "1",
        "--lambda",
        "auto",
        "--out",
        path_str(&overridden),
    ])
    .status
    .success());
    let a: serde_json::Value = io::read_json(&from_cfg).unwrap();
    let b: serde_json::Value = io::read_json(&overridden).unwrap();
    assert_eq!(a["model"]["kernel"]["bandwidth"], 4.0);
    assert_eq!(a["model"]["lambda"], 0.01);
    assert_eq!(b["model"]["kernel"]["bandwidth"], 1.0);
    assert_ne!(a["beta"], b["beta"]);
}

#[test]
fn exit_codes() {
    let f = fixture();
    let missing = f.dir.path().join("missing.jsonl");
    assert_eq!(
        edd(&["predict", "--input", path_str(&missing)])
            .status
            .code(),
        Some(1)
    );

    let garbage = f.dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "{\"t\": 1, \"x\": [0.0]}\nnot json\n").unwrap();
    let out = edd(&["predict", "--input", path_str(&garbage)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let one = f.dir.path().join("one.jsonl");
    io::write_samples(&one, &f.sets[..1]).unwrap();
    assert_eq!(
        edd(&["predict", "--input", path_str(&one)]).status.code(),
        Some(2)
    );

    assert_eq!(
        edd(&["predict", "--input", path_str(&f.samples), "--lambda", "-1"])
            .status
            .code(),
        Some(2)
    );

    // three copies of one set at λ = 0 give a rank-one Gram matrix
    let dup = f.dir.path().join("dup.jsonl");
    let copies: Vec<SampleSet> = (1..=3)
        .map(|t| f.sets[0].clone().with_time_index(t))
        .collect();
    io::write_samples(&dup, &copies).unwrap();
    assert_eq!(
        edd(&["predict", "--input", path_str(&dup), "--lambda", "0"])
            .status
            .code(),
        Some(3)
    );

    assert_eq!(edd(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn svm_on_labeled_samples() {
    let dir = TempDir::new().unwrap();
    let setting = SyntheticSetting::new(SettingKind::PdaRotation, 80, 4);
    let s = generate(&setting, 1).unwrap();
    let input = dir.path().join("labeled.jsonl");
    let model = dir.path().join("svm.json");
    io::write_samples(&input, &[s.clone()]).unwrap();
    let out = edd(&[
        "svm",
        "--input",
        path_str(&input),
        "--c",
        "10",
        "--out",
        path_str(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let clf: edd::predsvm::LinearClassifier = io::read_json(&model).unwrap();
    assert_eq!(clf.classes, vec![-1, 1]);
    assert_eq!(clf.c, 10.0);
    assert!(clf.accuracy(&s).unwrap() > 0.8);

    let unlabeled = dir.path().join("unlabeled.jsonl");
    io::write_samples(&unlabeled, &[s.without_labels()]).unwrap();
    assert_eq!(
        edd(&["svm", "--input", path_str(&unlabeled)]).status.code(),
        Some(2)
    );
}

#[test]
fn experiment_writes_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("t1.csv");
    let json = dir.path().join("t1.json");
    let out = edd(&[
        "experiment",
        "table1",
        "--settings",
        "translation",
        "--n",
        "10",
        "--repeats",
        "3",
        "--seed",
        "2",
        "--out",
        path_str(&csv),
        "--json",
        path_str(&json),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("setting,n,method,mean,std,repeats,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows
        .iter()
        .all(|r| r.starts_with("translation,10,") && r.ends_with(",3,2")));
    assert!(json.exists());
}
