use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dner_core::corpus::synth::{overfit_corpus, templated_corpus, TemplateConfig};
use dner_core::corpus::{parse_inline, write_inline};
use dner_core::neural::load_checkpoint;

const FIGURE: &str = "muscle pain and fatigue\n0,1;3,4 ADR|0,2 ADR\n\n";

fn dner(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dner"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dner(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fail(dir: &Path, args: &[&str]) -> String {
    let out = dner(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    let last = err.lines().last().unwrap_or("");
    assert!(last.starts_with("error: "), "{err}");
    last.to_string()
}

fn put(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn trace_reproduces_figure() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "fig.txt", FIGURE);
    let table = ok(dir.path(), &["trace", "fig.txt", "--sentence", "0"]);
    let actions: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().last().unwrap())
        .collect();
    assert_eq!(
        actions,
        [
            "SHIFT",
            "SHIFT",
            "LREDUCE",
            "COMPLETE:ADR",
            "OUT",
            "SHIFT",
            "REDUCE",
            "COMPLETE:ADR"
        ]
    );
    let json = ok(
        dir.path(),
        &["trace", "fig.txt", "--sentence", ":0", "--json"],
    );
    assert_eq!(json.lines().count(), 8);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "fig.txt", FIGURE);
    put(dir.path(), "run.cfg", "# run\nepochs = 2\nhidden = 3\n");
    let err = fail(dir.path(), &["--config", "run.cfg", "stats", "fig.txt"]);
    assert!(err.contains("unknown config key `hidden`"), "{err}");
    fail(
        dir.path(),
        &["--set", "learning_rate=-1", "stats", "fig.txt"],
    );
}

#[test]
fn parse_errors_carry_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "bad.txt", "a b c\n0,9 ADR\n\n");
    let err = fail(dir.path(), &["stats", "bad.txt"]);
    assert!(err.contains("bad.txt"), "{err}");
    fail(dir.path(), &["stats", "missing.txt"]);
}

#[test]
fn stats_of_empty_corpus_are_zero() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "empty.txt", "");
    let text = ok(dir.path(), &["stats", "empty.txt"]);
    assert!(text.contains("mentions=0\n"));
    assert!(text.contains("disc_mentions=0\n"));
}

#[test]
fn convert_flatten_removes_discontinuity() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = templated_corpus(40, 3, &TemplateConfig::default());
    put(dir.path(), "in.txt", &write_inline(&corpus));
    ok(
        dir.path(),
        &["convert", "in.txt", "-o", "flat.txt", "--flatten"],
    );
    let flat = parse_inline(&fs::read_to_string(dir.path().join("flat.txt")).unwrap()).unwrap();
    assert_eq!(flat.len(), corpus.len());
    for s in &flat.sentences {
        assert!(!s.has_discontinuous());
        for (i, a) in s.mentions.iter().enumerate() {
            assert!(s.mentions[i + 1..].iter().all(|b| !a.intersects(b)));
        }
    }
    ok(
        dir.path(),
        &["convert", "flat.txt", "-o", "flat.bio", "--to", "bio"],
    );
}

#[test]
fn convert_round_trips_through_every_format() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "fig.txt", FIGURE);
    ok(
        dir.path(),
        &["convert", "fig.txt", "-o", "fig.tags", "--to", "tags"],
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("fig.tags")).unwrap(),
        "muscle\tBH-ADR\npain\tI-ADR\nand\tO\nfatigue\tBD-ADR\n\n"
    );
    ok(
        dir.path(),
        &["--format", "tags", "convert", "fig.tags", "-o", "back.txt"],
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("back.txt")).unwrap(),
        FIGURE
    );

    ok(
        dir.path(),
        &["convert", "fig.txt", "-o", "doc.txt", "--to", "standoff"],
    );
    assert!(fs::read_to_string(dir.path().join("doc.ann"))
        .unwrap()
        .contains("ADR 0 6;16 23\tmuscle fatigue"));
    let a = ok(dir.path(), &["stats", "fig.txt"]);
    let b = ok(dir.path(), &["--format", "standoff", "stats", "doc.txt"]);
    assert_eq!(a, b);
}

#[test]
fn plain_bio_rejects_discontinuous_mentions() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "fig.txt", FIGURE);
    fail(
        dir.path(),
        &["convert", "fig.txt", "-o", "fig.bio", "--to", "bio"],
    );
}

#[test]
fn resample_uses_the_configured_seed() {
    let dir = tempfile::tempdir().unwrap();
    put(
        dir.path(),
        "in.txt",
        &write_inline(&templated_corpus(30, 4, &TemplateConfig::long_gap())),
    );
    ok(
        dir.path(),
        &[
            "--seed",
            "3",
            "convert",
            "in.txt",
            "-o",
            "a.txt",
            "--resample",
            "under",
        ],
    );
    ok(
        dir.path(),
        &[
            "--seed",
            "3",
            "convert",
            "in.txt",
            "-o",
            "b.txt",
            "--resample",
            "under",
        ],
    );
    let a = fs::read(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.txt")).unwrap());
    let c = parse_inline(std::str::from_utf8(&a).unwrap()).unwrap();
    let disc = c.sentences.iter().filter(|s| s.has_discontinuous()).count();
    assert!(disc > 0);
    assert_eq!(c.len(), 2 * disc);
}

#[test]
fn oracle_check_reports_coverage() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "fig.txt", FIGURE);
    assert!(ok(dir.path(), &["oracle-check", "fig.txt"]).contains("coverage = 100.00\n"));

    // Joint and Muscle Pain at the Right Elbow and Knee: four mentions
    // crossing each other's components.
    let crossing = "joint and muscle pain at the right elbow and knee\n\
                    0,1;3,4;6,8 ADR|0,1;3,4;6,7;9,10 ADR|2,4;6,8 ADR|2,4;6,7;9,10 ADR\n\n";
    put(dir.path(), "cross.txt", crossing);
    let report = ok(dir.path(), &["oracle-check", "cross.txt"]);
    assert!(!report.contains("coverage = 100.00"), "{report}");
    assert!(report.contains("uncovered multi_overlap"), "{report}");

    put(dir.path(), "nested.txt", "a b c\n0,3 ADR|1,2 ADR\n\n");
    assert!(ok(dir.path(), &["oracle-check", "nested.txt"]).contains("nested_sentences = 1\n"));
}

#[test]
fn train_predict_evaluate_overfits() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "train.txt", &write_inline(&overfit_corpus(5)));
    put(
        dir.path(),
        "run.cfg",
        "epochs = 60\nseed = 2\ntrain = train.txt\ndev = train.txt\ncheckpoint = m.ckpt\n",
    );
    let out = dner(dir.path(), &["--config", "run.cfg", "train"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("# resolved config\n")
            && err.contains("seed = 2\n")
            && err.contains("train = train.txt\n")
    );

    let log = fs::read_to_string(dir.path().join("m.ckpt.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch ")).count(), 60);
    let best = log.lines().last().unwrap();
    assert!(
        best.starts_with("best epoch ") && best.ends_with("dev_f1 1.000000"),
        "{best}"
    );
    let best_epoch: usize = best.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(best_epoch < 60);
    let best_model = load_checkpoint(&fs::read(dir.path().join("m.ckpt")).unwrap()).unwrap();
    let last_model = load_checkpoint(&fs::read(dir.path().join("m.ckpt.last")).unwrap()).unwrap();
    assert_ne!(best_model.params, last_model.params);

    ok(
        dir.path(),
        &[
            "--config",
            "run.cfg",
            "predict",
            "--test",
            "train.txt",
            "-o",
            "pred.txt",
        ],
    );
    let report = ok(
        dir.path(),
        &[
            "evaluate",
            "--gold",
            "train.txt",
            "--pred",
            "pred.txt",
            "--json",
        ],
    );
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["overall"]["f1"], 1.0);
    assert_eq!(json["disc_only"]["gold"], 3);

    ok(
        dir.path(),
        &[
            "evaluate",
            "--gold",
            "train.txt",
            "--pred",
            "pred.txt",
            "--report",
            "r.txt",
        ],
    );
    assert!(fs::read_to_string(dir.path().join("r.txt"))
        .unwrap()
        .contains("overall"));
    let trace = ok(
        dir.path(),
        &[
            "trace",
            "train.txt",
            "--sentence",
            "doc0:0",
            "--checkpoint",
            "m.ckpt",
        ],
    );
    assert!(trace.lines().count() > 1);
}

#[test]
fn training_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "train.txt", &write_inline(&overfit_corpus(6)));
    for name in ["a", "b"] {
        let ckpt = format!("{name}.ckpt");
        ok(
            dir.path(),
            &[
                "--set",
                "epochs=3",
                "train",
                "--train",
                "train.txt",
                "--dev",
                "train.txt",
                "--checkpoint",
                &ckpt,
            ],
        );
        ok(
            dir.path(),
            &[
                "predict",
                "--checkpoint",
                &ckpt,
                "--test",
                "train.txt",
                "-o",
                &format!("{name}.pred"),
            ],
        );
    }
    for ext in ["ckpt", "ckpt.last", "ckpt.log", "pred"] {
        let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        assert_eq!(
            a,
            fs::read(dir.path().join(format!("b.{ext}"))).unwrap(),
            "{ext}"
        );
    }
}

#[test]
fn mismatched_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "fig.txt", FIGURE);
    put(dir.path(), "two.txt", &format!("{FIGURE}a b\n\n"));
    fail(
        dir.path(),
        &["evaluate", "--gold", "fig.txt", "--pred", "two.txt"],
    );
    put(dir.path(), "junk.ckpt", "not a checkpoint");
    fail(
        dir.path(),
        &[
            "predict",
            "--checkpoint",
            "junk.ckpt",
            "--test",
            "fig.txt",
            "-o",
            "p.txt",
        ],
    );
    fail(dir.path(), &["train", "--train", "fig.txt"]);
    fail(
        dir.path(),
        &[
            "--set",
            "external_vec_dim=4",
            "train",
            "--train",
            "fig.txt",
            "--checkpoint",
            "m.ckpt",
        ],
    );
}
