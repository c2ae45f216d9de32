use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[data]
n_speakers = 8
utts_per_speaker = 6
spoofs_per_speaker = 6
[protocol]
holdout_speakers = 3
cm_quota = [3, 3, 3]
asv_quota = [3, 3]
eval_quota = [3, 3, 3]
[atmm]
rounds = 2
iters_per_round = 10
sample_fraction = 0.1
[training]
epochs = 2
[eval.bootstrap]
replicates = 50
"#;

fn sasv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sasv")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = sasv(args, cwd);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit status is nonzero and stderr is one line containing `needle`.
fn fails(args: &[&str], cwd: &Path, needle: &str) {
    let out = sasv(args, cwd);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains(needle), "{err}");
}

fn workdir() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    fs::read(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let w = workdir();
    let p = w.path();
    ok(&["gen", "--speakers", "50", "--seed", "7", "--out", "a"], p);
    ok(&["gen", "--speakers", "50", "--seed", "7", "--out", "b"], p);
    for f in ["store.sgem", "metadata.tsv", "cm_train.tsv", "asv_train.tsv", "eval.tsv"] {
        assert_eq!(read(p, &format!("a/{f}")), read(p, &format!("b/{f}")), "{f}");
    }
    ok(&["gen", "--speakers", "50", "--seed", "8", "--out", "c"], p);
    assert_ne!(read(p, "a/store.sgem"), read(p, "c/store.sgem"));
    assert_eq!(&read(p, "a/store.sgem")[..4], b"SGEM");
}

fn pipeline(p: &Path, tag: &str) {
    ok(&["gen", "--config", "small.toml", "--out", &format!("{tag}/data")], p);
    ok(
        &["train", "--config", "small.toml", "--store", &format!("{tag}/data/store.sgem"), "--protocol", &format!("{tag}/data"),
          "--out", &format!("{tag}/run"), "--strategy", "s2", "--bn", "on", "--dropout", "0.2"],
        p,
    );
    ok(
        &["eval", "--config", "small.toml", "--store", &format!("{tag}/data/store.sgem"), "--checkpoint", &format!("{tag}/run/model.saga"),
          "--protocol", &format!("{tag}/data/eval.tsv"), "--out", &format!("{tag}/eval")],
        p,
    );
    ok(&["hist", "--scores", &format!("{tag}/eval/scores.tsv"), "--bins", "10", "--out", &format!("{tag}/hist.csv")], p);
}

#[test]
fn pipeline_is_reproducible_end_to_end() {
    let w = workdir();
    let p = w.path();
    pipeline(p, "x");
    pipeline(p, "y");
    for f in ["run/model.saga", "run/training_report.tsv", "eval/scores.tsv", "eval/metrics.tsv", "hist.csv"] {
        assert_eq!(read(p, &format!("x/{f}")), read(p, &format!("y/{f}")), "{f}");
    }

    let metrics = String::from_utf8(read(p, "x/eval/metrics.tsv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "metric\tpoint\tci_lower\tci_upper\tthreshold");
    assert!(lines[1].starts_with("sasv_eer\t") && lines[2].starts_with("min_adcf\t"));

    let report = String::from_utf8(read(p, "x/run/training_report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 20);

    let hist = String::from_utf8(read(p, "x/hist.csv")).unwrap();
    assert_eq!(hist.lines().next().unwrap(), "bin_left,bin_right,target,nontarget,spoof");
    assert_eq!(hist.lines().count(), 11);
}

#[test]
fn conventional_training_and_checkpoint_flag() {
    let w = workdir();
    let p = w.path();
    ok(&["gen", "--config", "small.toml", "--out", "d"], p);
    ok(&["train", "--config", "small.toml", "--store", "d/store.sgem", "--out", "r", "--atmm", "off", "--checkpoint", "m.saga"], p);
    assert_eq!(&read(p, "m.saga")[..4], b"SAGA");
    let report = String::from_utf8(read(p, "r/training_report.tsv")).unwrap();
    assert_eq!(report.lines().nth(1).unwrap().split('\t').nth(1), Some("-"));
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn ablate_prints_eight_rows() {
    let w = workdir();
    let p = w.path();
    ok(&["gen", "--config", "small.toml", "--out", "d"], p);
    let table = ok(&["ablate", "--config", "small.toml", "--store", "d/store.sgem", "--protocol", "d"], p);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 9);
    assert_eq!(lines[0], "bn\tdropout\tatmm\tsasv_eer\tmin_adcf");
    let mut combos: Vec<String> = lines[1..].iter().map(|l| l.split('\t').take(3).collect::<Vec<_>>().join(" ")).collect();
    combos.sort();
    combos.dedup();
    assert_eq!(combos.len(), 8);
    ok(&["ablate", "--config", "small.toml", "--store", "d/store.sgem", "--out", "abl.tsv"], p);
    assert_eq!(String::from_utf8(read(p, "abl.tsv")).unwrap(), table);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let w = workdir();
    let p = w.path();
    ok(&["gen", "--config", "small.toml", "--out", "d"], p);
    ok(&["train", "--config", "small.toml", "--store", "d/store.sgem", "--out", "r"], p);

    fails(&["train", "--store", "missing.sgem", "--out", "r"], p, "missing.sgem");
    fs::write(p.join("bad.toml"), "[atmm]\nroundz = 3\n").unwrap();
    fails(&["train", "--config", "bad.toml", "--store", "d/store.sgem", "--out", "r"], p, "roundz");
    fails(&["gen", "--config", "small.toml", "--out", "e", "--speakers", "1"], p, "n_speakers");

    fs::write(p.join("wide.toml"), SMALL.replace("[data]\n", "[data]\nasv_dim = 12\n")).unwrap();
    ok(&["gen", "--config", "wide.toml", "--out", "w"], p);
    fails(
        &["eval", "--store", "w/store.sgem", "--checkpoint", "r/model.saga", "--protocol", "w", "--out", "e"],
        p,
        "dimension mismatch",
    );

    fs::write(p.join("junk.sgem"), b"JUNKJUNKJUNKJUNKJUNK").unwrap();
    fails(&["train", "--store", "junk.sgem", "--out", "r"], p, "byte offset 0");
    fs::write(p.join("ghost.tsv"), "ghost-1\tghost-2\ttarget\n").unwrap();
    fails(
        &["eval", "--store", "d/store.sgem", "--checkpoint", "r/model.saga", "--protocol", "ghost.tsv", "--out", "e"],
        p,
        "ghost",
    );
}
